"""Slow, literal reference computations used by the self-test and the test suite.

Nothing here shares code with the fast paths it checks.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def naive_dct2(x) -> np.ndarray:
    """Quadruple loop over (c, u, v, x, y) of the DCT-II definition."""
    x = np.asarray(x, dtype=np.float64)
    C, H, W = x.shape
    out = np.zeros_like(x)
    for c in range(C):
        for u in range(H):
            au = math.sqrt(1.0 / H) if u == 0 else math.sqrt(2.0 / H)
            for v in range(W):
                av = math.sqrt(1.0 / W) if v == 0 else math.sqrt(2.0 / W)
                acc = 0.0
                for i in range(H):
                    cu = math.cos(math.pi * (2 * i + 1) * u / (2 * H))
                    for j in range(W):
                        acc += x[c, i, j] * cu * math.cos(math.pi * (2 * j + 1) * v / (2 * W))
                out[c, u, v] = au * av * acc
    return out


def enumerate_mask(H: int, W: int, tau) -> set:
    """Kept (u, v) by exact rational evaluation of (u/H + v/W)/2 <= tau."""
    t = Fraction(str(tau))
    return {(u, v) for u in range(H) for v in range(W)
            if (Fraction(u, H) + Fraction(v, W)) / 2 <= t}


def residual_distance(q, mean, basis) -> float:
    """||(I - P P^T)(q - mu)||^2 with the projector materialized."""
    q = np.asarray(q, dtype=np.float64)
    P = np.asarray(basis, dtype=np.float64)
    proj = np.eye(q.shape[0]) - P @ P.T
    r = proj @ (q - mean)
    return float(r @ r)


def sample_stdev_ci(values):
    """(mean, 1.96 * sample stdev / sqrt(n)) by explicit sums."""
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, 1.96 * math.sqrt(var) / math.sqrt(n)
