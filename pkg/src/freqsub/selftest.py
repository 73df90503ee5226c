"""Fast built-in correctness checks (``freqsub selftest``)."""
from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from . import oracles
from .config import Config
from .data_io import SynthSpec, generate_synthetic, read_fts, write_fts
from .episodic import sample_episode
from .model import ModelParams, params_from_bytes, params_to_bytes
from .objective import fd_gradient, fusion_gradient
from .spectral import build_mask, dct2, idct2
from .subspace import build_subspace, projection_distance


def check_dct():
    rng = np.random.default_rng(101)
    for _ in range(20):
        shape = tuple(rng.integers(1, [4, 9, 9]))
        x = rng.uniform(-10, 10, size=shape)
        f = dct2(x)
        if np.max(np.abs(f - oracles.naive_dct2(x))) > 1e-9:
            return f"dct2 disagrees with literal sum at shape {shape}"
        if np.max(np.abs(idct2(f) - x)) > 1e-9:
            return f"idct2(dct2(x)) != x at shape {shape}"
        if abs(np.sum(f ** 2) - np.sum(x ** 2)) > 1e-9 * np.sum(x ** 2):
            return f"energy not preserved at shape {shape}"
    return None


def check_mask():
    for H, W, tau, count in ((10, 10, 0.3, 28), (2, 2, 0.3, 3), (16, 16, 0.5, None), (7, 5, 0.2, None)):
        m = build_mask(H, W, tau)
        expected = oracles.enumerate_mask(H, W, tau)
        if m.kept_indices() != expected:
            return f"mask {H}x{W} tau={tau} keeps {m.kept}, enumeration keeps {len(expected)}"
        if count is not None and m.kept != count:
            return f"mask {H}x{W} tau={tau} keeps {m.kept}, expected {count}"
    return None


def check_projector():
    rng = np.random.default_rng(202)
    for _ in range(50):
        D, K = int(rng.integers(1, 9)), int(rng.integers(1, 6))
        sub = build_subspace(rng.normal(size=(K, D)), 5, 1e-5, rng)
        q = rng.normal(size=D)
        ref = oracles.residual_distance(q, sub.mean, sub.basis)
        if abs(projection_distance(q, sub) - ref) > 1e-9:
            return f"projection distance differs from explicit projector (D={D}, K={K})"
        P = sub.projector()
        if np.linalg.norm(P @ P - P) > 1e-8:
            return "projector is not idempotent"
    return None


def check_fusion_gradient():
    data = generate_synthetic(SynthSpec(classes=8, per_class=8, channels=4, height=4, width=4))
    cfg = Config(way=3, shot=2, query=3)
    params = ModelParams.init(4, 2, seed=3)
    params = params.with_vector(np.r_[params.to_vector()[:-3], 0.3, -0.2, 2.0])
    for i in range(3):
        ep = sample_episode(data, "base", 3, 2, 3, np.random.default_rng(i), index=i)
        fd = fd_gradient(ep, params, cfg)[-3:-1]
        exact = fusion_gradient(ep, params, cfg)
        if np.max(np.abs(fd - exact)) > 1e-4 * max(np.max(np.abs(exact)), 1e-12):
            return f"fusion gradient mismatch: fd={fd}, analytic={exact}"
    return None


def check_roundtrip():
    rng = np.random.default_rng(303)
    feats = rng.normal(size=(6, 2, 3, 4)).astype(np.float32)
    labels = np.array([0, 1, 2, 0, 1, 2])
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "x.fts"
        write_fts(path, feats, labels, 3)
        f2, l2, n = read_fts(path)
    if n != 3 or not np.array_equal(l2, labels) or f2.tobytes() != feats.tobytes():
        return "FTS round-trip is not bit-exact"
    p = ModelParams.init(8, 4, seed=9)
    if not np.array_equal(params_from_bytes(params_to_bytes(p)).to_vector(), p.to_vector()):
        return "parameter file round-trip changed values"
    return None


CHECKS = {
    "dct_oracle": check_dct,
    "mask_enumeration": check_mask,
    "projector_oracle": check_projector,
    "fusion_gradient": check_fusion_gradient,
    "round_trip": check_roundtrip,
}


def run_selftest():
    """Return ``[(name, error-or-None)]`` for every check."""
    out = []
    for name, fn in CHECKS.items():
        try:
            out.append((name, fn()))
        except Exception as exc:  # a crashing check is a failing check
            out.append((name, f"{type(exc).__name__}: {exc}"))
    return out
