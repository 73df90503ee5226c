"""Frequency channel attention and the full frequency (shape-view) branch."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .spectral import LowPassMask, apply_mask, check_finite, dct2, idct2

LEAKY_SLOPE = 0.1
LN_EPSILON = 1e-5
DEFAULT_REDUCTION = 4


@dataclass(frozen=True)
class AttentionParams:
    """Bottleneck MLP weights: ``C -> C/r -> C``."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    reduction: int = DEFAULT_REDUCTION
    leaky_slope: float = LEAKY_SLOPE
    ln_epsilon: float = LN_EPSILON

    def __post_init__(self):
        hidden, channels = np.shape(self.W1)
        if channels % self.reduction or channels // self.reduction != hidden:
            raise ValueError(
                f"W1 must be (C/r, C) with r={self.reduction}; got {np.shape(self.W1)}")
        if np.shape(self.W2) != (channels, hidden):
            raise ValueError(f"W2 must be {(channels, hidden)}, got {np.shape(self.W2)}")
        if np.shape(self.b1) != (hidden,) or np.shape(self.b2) != (channels,):
            raise ValueError("bias shapes do not match W1/W2")

    @property
    def channels(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    @classmethod
    def init(cls, channels: int, reduction: int = DEFAULT_REDUCTION, rng=None):
        """Seeded uniform(-1/sqrt(C), 1/sqrt(C)) weights, zero biases."""
        if channels < 1 or reduction < 1 or channels % reduction:
            raise ValueError(f"reduction {reduction} must divide channel count {channels}")
        rng = np.random.default_rng(rng)
        hidden = channels // reduction
        bound = 1.0 / np.sqrt(channels)
        W1 = rng.uniform(-bound, bound, size=(hidden, channels))
        W2 = rng.uniform(-bound, bound, size=(channels, hidden))
        return cls(W1, np.zeros(hidden), W2, np.zeros(channels), reduction)

    @property
    def size(self) -> int:
        return self.W1.size + self.b1.size + self.W2.size + self.b2.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    def with_vector(self, vec) -> "AttentionParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.size:
            raise ValueError(f"expected {self.size} values, got {vec.size}")
        h, c = self.hidden, self.channels
        cuts = np.cumsum([h * c, h, c * h])
        w1, b1, w2, b2 = np.split(vec, cuts)
        return replace(self, W1=w1.reshape(h, c), b1=b1, W2=w2.reshape(c, h), b2=b2)


def gap(f) -> np.ndarray:
    """Global average pool over the last two axes (signed coefficients)."""
    f = check_finite(f, "spectrum")
    return f.mean(axis=(-2, -1))


def layer_norm(e, eps: float = LN_EPSILON) -> np.ndarray:
    e = np.asarray(e, dtype=np.float64)
    if e.shape[-1] < 1:
        raise ValueError("layer_norm needs at least one element")
    centered = e - e.mean(axis=-1, keepdims=True)
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    return centered / np.sqrt(var + eps)


def leaky_relu(x, slope: float = LEAKY_SLOPE):
    return np.where(x >= 0, x, slope * x)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def attention_weights(e, p: AttentionParams) -> np.ndarray:
    """Channel gains in (0, 1) from pooled channel energies ``e`` (shape ``(..., C)``).

    LayerNorm is applied here, so ``e`` is the raw GAP output.
    """
    e = check_finite(e, "channel energy")
    if e.shape[-1] != p.channels:
        raise ValueError(f"energy vector has {e.shape[-1]} channels, params expect {p.channels}")
    z = layer_norm(e, p.ln_epsilon)
    hidden = leaky_relu(z @ p.W1.T + p.b1, p.leaky_slope)
    return sigmoid(hidden @ p.W2.T + p.b2)


def reweight(f, w) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if f.ndim < 3 or w.shape[-1] != f.shape[-3]:
        raise ValueError(f"gain vector of shape {w.shape} does not match spectrum {f.shape}")
    return f * w[..., :, None, None]


def frequency_branch(x, p: AttentionParams | None, mask: LowPassMask) -> np.ndarray:
    """DCT -> low-pass -> channel attention -> IDCT.

    ``p=None`` bypasses attention (all gains 1). Accepts ``(..., C, H, W)``.
    """
    f_low = apply_mask(dct2(x), mask)
    if p is not None:
        f_low = reweight(f_low, attention_weights(gap(f_low), p))
    return idct2(f_low)
