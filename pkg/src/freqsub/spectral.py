"""Orthonormal 2-D DCT-II / IDCT and low-pass spectral masking.

Feature tensors are ``(C, H, W)`` float arrays; any number of leading batch
axes is accepted, the transform always acts on the last two axes.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

DEFAULT_TAU = 0.3

# Test-only mutation canary: flips the mask comparison from <= to <.
_FAULT_MASK_STRICT = os.environ.get("FREQSUB_FAULT_INJECT", "") == "mask-strict"


def check_finite(x, name="input"):
    """Return ``x`` as a float64 array, raising on the first NaN/Inf entry."""
    arr = np.asarray(x, dtype=np.float64)
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"{name} has non-finite value {arr[idx]!r} at index {idx}")
    return arr


@lru_cache(maxsize=64)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis, ``B[u, x] = a(u) cos(pi (2x+1) u / 2n)``."""
    if n < 1:
        raise ValueError(f"transform length must be positive, got {n}")
    u = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    basis = np.cos(np.pi * (2 * x + 1) * u / (2 * n))
    alpha = np.full((n, 1), np.sqrt(2.0 / n))
    alpha[0, 0] = np.sqrt(1.0 / n)
    basis = alpha * basis
    basis.setflags(write=False)
    return basis


def _check_spatial(x, name):
    arr = check_finite(x, name)
    if arr.ndim < 2:
        raise ValueError(f"{name} needs at least 2 dims (H, W), got shape {arr.shape}")
    return arr


def dct2(x) -> np.ndarray:
    """Separable orthonormal 2-D DCT-II over the last two axes."""
    x = _check_spatial(x, "feature tensor")
    bh = dct_matrix(x.shape[-2])
    bw = dct_matrix(x.shape[-1])
    return bh @ x @ bw.T


def idct2(f) -> np.ndarray:
    """Inverse of :func:`dct2` (the basis is orthogonal, so it is the transpose)."""
    f = _check_spatial(f, "spectrum")
    bh = dct_matrix(f.shape[-2])
    bw = dct_matrix(f.shape[-1])
    return bh.T @ f @ bw


@dataclass(frozen=True)
class LowPassMask:
    bits: np.ndarray
    tau: float

    @property
    def shape(self):
        return self.bits.shape

    @property
    def kept(self) -> int:
        return int(self.bits.sum())

    def kept_indices(self):
        return {(int(u), int(v)) for u, v in np.argwhere(self.bits)}


def _tau_fraction(tau) -> Fraction:
    # Decimal reading of tau so that printed thresholds such as 0.3 land exactly
    # on grid points like (u + v) / 20 == 0.3.
    return Fraction(repr(float(tau)))


def build_mask(height: int, width: int, tau: float = DEFAULT_TAU) -> LowPassMask:
    """Keep (u, v) where the normalized Manhattan score (u/H + v/W)/2 is <= tau.

    The comparison is done in exact rational arithmetic.
    """
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in the open interval (0, 1), got {tau}")
    if height < 1 or width < 1:
        raise ValueError(f"mask shape must be positive, got {(height, width)}")
    t = _tau_fraction(tau)
    # (u/H + v/W)/2 <= p/q  <=>  q (u W + v H) <= 2 p H W
    u = np.arange(height, dtype=object)[:, None]
    v = np.arange(width, dtype=object)[None, :]
    lhs = t.denominator * (u * width + v * height)
    rhs = 2 * t.numerator * height * width
    bits = (lhs < rhs) if _FAULT_MASK_STRICT else (lhs <= rhs)
    bits = np.asarray(bits, dtype=bool)
    bits.setflags(write=False)
    return LowPassMask(bits=bits, tau=float(tau))


def full_mask(height: int, width: int) -> LowPassMask:
    """All-pass mask (used for identity configurations)."""
    bits = np.ones((height, width), dtype=bool)
    bits.setflags(write=False)
    return LowPassMask(bits=bits, tau=1.0)


def apply_mask(f, mask: LowPassMask) -> np.ndarray:
    f = _check_spatial(f, "spectrum")
    if f.shape[-2:] != mask.shape:
        raise ValueError(f"spectrum spatial shape {f.shape[-2:]} does not match mask {mask.shape}")
    return np.where(mask.bits, f, 0.0)


def lowpass(x, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Spatial-domain low-pass filter: ``idct2(apply_mask(dct2(x)))``."""
    x = np.asarray(x, dtype=np.float64)
    mask = build_mask(x.shape[-2], x.shape[-1], tau)
    return idct2(apply_mask(dct2(x), mask))
