"""Learnable state, ablation variants, and the episode forward pass."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .attention import AttentionParams, frequency_branch
from .config import Config
from .spectral import build_mask
from .subspace import ClassSubspace, FusionParams, View, build_subspace, class_scores, flatten

PARAMS_MAGIC = b"FSMP"
PARAMS_VERSION = 1

# stream tag mixed into jitter seeds so they never collide with sampling seeds
JITTER_STREAM = 7


@dataclass(frozen=True)
class Variant:
    name: str
    use_shape: bool
    attention: bool
    adaptive: bool
    label: str


VARIANTS = {
    "V0": Variant("V0", False, False, False, "spatial subspace only"),
    "V1": Variant("V1", True, False, False, "frequency branch, mean fusion"),
    "V2": Variant("V2", True, True, False, "frequency attention, mean fusion"),
    "V3": Variant("V3", True, True, True, "attention + adaptive fusion"),
}


@dataclass(frozen=True)
class ModelParams:
    attention: AttentionParams
    fusion: FusionParams = field(default_factory=FusionParams)
    logit_scale: float = 1.0

    @classmethod
    def init(cls, channels: int, reduction: int = 4, logit_scale: float = 1.0, seed=0):
        return cls(AttentionParams.init(channels, reduction, np.random.default_rng(seed)),
                   FusionParams(), float(logit_scale))

    @property
    def size(self) -> int:
        return self.attention.size + 3

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.attention.to_vector(), self.fusion.w, [self.logit_scale]])

    def with_vector(self, vec) -> "ModelParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.size:
            raise ValueError(f"expected {self.size} parameters, got {vec.size}")
        if not np.all(np.isfinite(vec)):
            raise ValueError("parameters must be finite")
        n = self.attention.size
        return ModelParams(self.attention.with_vector(vec[:n]), FusionParams(vec[n:n + 2]),
                           float(vec[n + 2]))

    def coordinate_names(self) -> list[str]:
        a = self.attention
        names = [f"W1[{i},{j}]" for i in range(a.hidden) for j in range(a.channels)]
        names += [f"b1[{i}]" for i in range(a.hidden)]
        names += [f"W2[{i},{j}]" for i in range(a.channels) for j in range(a.hidden)]
        names += [f"b2[{i}]" for i in range(a.channels)]
        return names + ["w_spatial", "w_shape", "logit_scale"]


def params_to_bytes(params: ModelParams) -> bytes:
    vec = params.to_vector()
    head = PARAMS_MAGIC + struct.pack("<4I", PARAMS_VERSION, params.attention.channels,
                                      params.attention.reduction, vec.size)
    return head + vec.astype("<f8").tobytes()


def params_from_bytes(blob: bytes) -> ModelParams:
    if len(blob) < 20 or blob[:4] != PARAMS_MAGIC:
        raise ValueError("not a parameter file (bad magic at offset 0)")
    version, channels, reduction, count = struct.unpack_from("<4I", blob, 4)
    if version != PARAMS_VERSION:
        raise ValueError(f"unsupported parameter file version {version} at offset 4")
    template = ModelParams.init(channels, reduction)
    if count != template.size:
        raise ValueError(f"header declares {count} values, C={channels} r={reduction} needs {template.size}")
    expected = 20 + 8 * count
    if len(blob) != expected:
        raise ValueError(f"parameter payload is {len(blob)} bytes, expected {expected}")
    return template.with_vector(np.frombuffer(blob, dtype="<f8", offset=20))


def save_params(params: ModelParams, path):
    Path(path).write_bytes(params_to_bytes(params))


def load_params(path) -> ModelParams:
    return params_from_bytes(Path(path).read_bytes())


class Forward(NamedTuple):
    logits: np.ndarray  # (Q, N)
    subspaces: list  # per class: (spatial, shape-or-None)


def jitter_rng(config: Config, episode_index: int, class_index: int, view: View):
    view_id = 0 if view is View.SPATIAL else 1
    return np.random.default_rng([config.seed, JITTER_STREAM, episode_index, class_index, view_id])


def view_features(x, params: ModelParams, config: Config, variant: Variant):
    """``(spatial, shape)`` feature matrices for a ``(n, C, H, W)`` batch."""
    spatial = flatten(x, config.spatial_pool)
    if not variant.use_shape:
        return spatial, None
    mask = build_mask(x.shape[-2], x.shape[-1], config.tau)
    attn = params.attention if variant.attention else None
    return spatial, flatten(frequency_branch(x, attn, mask))


def build_class_subspaces(features, labels, way, config: Config, episode_index: int, view: View):
    out = []
    for k in range(way):
        rows = features[labels == k]
        out.append(build_subspace(rows, config.d_max, config.jitter,
                                  jitter_rng(config, episode_index, k, view), view,
                                  tag=f"episode {episode_index} class {k} view {view.value}"))
    return out


def forward(episode, params: ModelParams, config: Config, variant="V3") -> Forward:
    """Support -> dual subspaces, queries -> scaled fused logits."""
    variant = VARIANTS[variant] if isinstance(variant, str) else variant
    s_sp, s_sh = view_features(episode.support, params, config, variant)
    q_sp, q_sh = view_features(episode.query, params, config, variant)
    labels = np.asarray(episode.support_labels)
    spatial = build_class_subspaces(s_sp, labels, episode.way, config, episode.index, View.SPATIAL)
    if variant.use_shape:
        shape = build_class_subspaces(s_sh, labels, episode.way, config, episode.index, View.SHAPE)
        fp = params.fusion if variant.adaptive else FusionParams((0.0, 0.0))
    else:
        shape = [None] * episode.way
        fp = None
    pairs = list(zip(spatial, shape))
    scores = class_scores(q_sp, q_sh, pairs, fp, config.epsilon, config.fusion_space)
    return Forward(params.logit_scale * scores, pairs)
