"""FTS1 feature-tensor files, dataset splits, and the synthetic benchmark."""
from __future__ import annotations

import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import Config, ConfigError, load_config  # noqa: F401  (re-exported)
from .spectral import build_mask, idct2

FTS_MAGIC = b"FTS1"
FTS_VERSION = 1
_HEADER = struct.Struct("<4s6I")  # magic, version, n, C, H, W, classes
PHASES = ("base", "val", "novel")
SPLIT_RATIOS = (0.50, 0.25, 0.25)


class FtsFormatError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass
class DatasetSplit:
    """Samples plus a disjoint base/val/novel assignment of class ids."""

    features: np.ndarray  # (n, C, H, W)
    labels: np.ndarray  # (n,) global class ids
    splits: dict = field(default_factory=dict)  # phase -> tuple of class ids

    def __post_init__(self):
        self.features = np.asarray(self.features)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 4:
            raise ValueError(f"features must be (n, C, H, W), got {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("one label per sample required")
        self.splits = {k: tuple(int(c) for c in v) for k, v in self.splits.items()}
        seen = {}
        for phase, classes in self.splits.items():
            for c in classes:
                if c in seen:
                    raise ValueError(f"class {c} appears in both {seen[c]!r} and {phase!r} splits")
                seen[c] = phase

    @property
    def shape(self):
        return self.features.shape[1:]

    def classes(self, phase: str):
        if phase not in self.splits:
            raise ConfigError(f"dataset has no {phase!r} split")
        return self.splits[phase]

    def class_indices(self, phase: str) -> dict:
        return {c: np.flatnonzero(self.labels == c) for c in self.classes(phase)}


def write_fts(path, features, labels, n_classes: int | None = None):
    features = np.asarray(features)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 4:
        raise ValueError(f"features must be (n, C, H, W), got {features.shape}")
    n, c, h, w = features.shape
    if labels.shape != (n,):
        raise ValueError("one label per sample required")
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if n else 0
    if n and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    rec = np.empty(n, dtype=[("label", "<u4"), ("data", "<f4", (c * h * w,))])
    rec["label"] = labels
    rec["data"] = features.reshape(n, c * h * w)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FTS_MAGIC, FTS_VERSION, n, c, h, w, n_classes))
        fh.write(rec.tobytes())


def read_fts(path):
    """Return ``(features float32 (n, C, H, W), labels, n_classes)``."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise FtsFormatError(f"header needs {_HEADER.size} bytes, file has {len(blob)}", len(blob))
    magic, version, n, c, h, w, n_classes = _HEADER.unpack_from(blob)
    if magic != FTS_MAGIC:
        raise FtsFormatError(f"bad magic {magic!r}", 0)
    if version != FTS_VERSION:
        raise FtsFormatError(f"unsupported version {version}", 4)
    if n and min(c, h, w) == 0:
        raise FtsFormatError(f"degenerate tensor shape {(c, h, w)}", 12)
    rec_size = 4 + 4 * c * h * w
    expected = _HEADER.size + n * rec_size
    if len(blob) != expected:
        raise FtsFormatError(f"expected {expected} bytes for {n} samples, got {len(blob)}",
                             min(len(blob), expected))
    rec = np.frombuffer(blob, offset=_HEADER.size,
                        dtype=[("label", "<u4"), ("data", "<f4", (c * h * w,))], count=n)
    labels = rec["label"].astype(np.int64)
    if n and labels.max() >= n_classes:
        i = int(np.argmax(labels >= n_classes))
        raise FtsFormatError(f"label {labels[i]} >= class count {n_classes}",
                             _HEADER.size + i * rec_size)
    return rec["data"].reshape(n, c, h, w).copy(), labels, n_classes


def split_counts(n_classes: int):
    base = int(np.floor(n_classes * SPLIT_RATIOS[0] + 0.5))
    val = int(np.floor(n_classes * SPLIT_RATIOS[1] + 0.5))
    return base, val, n_classes - base - val


def assign_splits(n_classes: int) -> dict:
    counts = split_counts(n_classes)
    for phase, k in zip(PHASES, counts):
        if k <= 0:
            raise ConfigError(f"{n_classes} classes leave the {phase} split empty "
                              f"(50/25/25 gives {counts})")
    edges = np.cumsum((0,) + counts)
    return {p: tuple(range(edges[i], edges[i + 1])) for i, p in enumerate(PHASES)}


@dataclass(frozen=True)
class SynthSpec:
    """Class templates live in the low-pass band, clutter outside it.

    ``template_scale``, ``pose_scale`` and ``noise_scale`` are per-coefficient
    standard deviations; ``pose_scale`` is relative to ``template_scale``.
    """

    classes: int = 40
    per_class: int = 30
    channels: int = 8
    height: int = 8
    width: int = 8
    template_scale: float = 1.0
    pose_scale: float = 0.3
    noise_scale: float = 3.0
    tau: float = 0.3
    seed: int = 0

    def validate(self):
        for name in ("classes", "per_class", "channels", "height", "width"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("template_scale", "pose_scale", "noise_scale"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0 < self.tau < 1:
            raise ConfigError("tau must lie in (0, 1)")
        mask = build_mask(self.height, self.width, self.tau)
        if mask.kept == mask.bits.size:
            raise ConfigError("passband covers the whole grid; no room for clutter")
        assign_splits(self.classes)


def synth_spectra(spec: SynthSpec):
    """Per-sample ``(template, pose, noise)`` spectra and labels (float64)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    shape = (spec.channels, spec.height, spec.width)
    band = build_mask(spec.height, spec.width, spec.tau).bits
    templates = rng.normal(0.0, spec.template_scale, size=(spec.classes,) + shape) * band
    labels = np.repeat(np.arange(spec.classes), spec.per_class)
    n = labels.size
    pose = rng.normal(0.0, spec.template_scale * spec.pose_scale, size=(n,) + shape) * band
    # one clutter process for every class: high frequencies carry no label information
    noise = rng.normal(0.0, spec.noise_scale, size=(n,) + shape) * ~band
    return templates[labels], pose, noise, labels


def generate_synthetic(spec: SynthSpec = SynthSpec()) -> DatasetSplit:
    template, pose, noise, labels = synth_spectra(spec)
    feats = idct2(template + pose + noise).astype(np.float32)
    return DatasetSplit(feats, labels, assign_splits(spec.classes))


def save_dataset(data: DatasetSplit, outdir, spec: SynthSpec | None = None):
    """Write one FTS file per split plus a key=value manifest; return written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    n_classes = int(max(max(v) for v in data.splits.values()) + 1)
    paths = []
    lines = ["format=FTS1", f"classes={n_classes}",
             "shape=" + "x".join(str(s) for s in data.shape)]
    for phase in PHASES:
        classes = data.splits.get(phase, ())
        idx = np.flatnonzero(np.isin(data.labels, classes))
        path = outdir / f"{phase}.fts"
        write_fts(path, data.features[idx], data.labels[idx], n_classes)
        paths.append(path)
        lines.append(f"{phase}.file={path.name}")
        lines.append(f"{phase}.classes=" + ",".join(str(c) for c in classes))
    if spec is not None:
        lines += [f"synth.{k}={v!r}" for k, v in asdict(spec).items()]
    manifest = outdir / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n")
    return paths + [manifest]


def load_dataset(path) -> DatasetSplit:
    """Load a dataset directory (manifest + FTS files) or a single FTS file.

    A lone file gets every class assigned to the ``novel`` split.
    """
    path = Path(path)
    if path.is_dir():
        meta = {}
        for line in (path / "manifest.txt").read_text().splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                meta[k.strip()] = v.strip()
        feats, labels, splits = [], [], {}
        for phase in PHASES:
            if f"{phase}.file" not in meta:
                continue
            f, l, _ = read_fts(path / meta[f"{phase}.file"])
            feats.append(f)
            labels.append(l)
            raw = meta.get(f"{phase}.classes", "")
            splits[phase] = tuple(int(c) for c in raw.split(",") if c)
        shape = tuple(int(s) for s in meta["shape"].split("x"))
        feats = [f.reshape((-1,) + shape) for f in feats]
        return DatasetSplit(np.concatenate(feats), np.concatenate(labels), splits)
    feats, labels, n_classes = read_fts(path)
    return DatasetSplit(feats, labels, {"novel": tuple(np.unique(labels).tolist())})
