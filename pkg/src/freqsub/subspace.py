"""Truncated-SVD class subspaces and the dual-view projection metric."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

DEFAULT_JITTER = 1e-5
DEFAULT_EPSILON = 1e-6
DEFAULT_D_MAX = 5


class View(str, Enum):
    SPATIAL = "spatial"
    SHAPE = "shape"


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClassSubspace:
    mean: np.ndarray
    basis: np.ndarray  # (D, d), orthonormal columns
    view: View = View.SPATIAL

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


@dataclass(frozen=True)
class FusionParams:
    w: np.ndarray = None  # (w_spatial, w_shape)

    def __post_init__(self):
        w = np.array([1.0, 1.0] if self.w is None else self.w, dtype=np.float64)
        if w.shape != (2,):
            raise ValueError(f"fusion logits must be a 2-vector, got shape {w.shape}")
        object.__setattr__(self, "w", w)

    @property
    def alpha(self) -> np.ndarray:
        return softmax(self.w)


@dataclass(frozen=True)
class DualDistance:
    d_spatial: float
    d_shape: float
    s_spatial: float
    s_shape: float
    fused: float


def softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def flatten(x, pool: str = "none") -> np.ndarray:
    """Vectorize ``(..., C, H, W)`` row-major; ``pool="gap"`` averages H, W first."""
    x = np.asarray(x, dtype=np.float64)
    if pool == "gap":
        return x.mean(axis=(-2, -1))
    if pool != "none":
        raise ValueError(f"unknown pooling {pool!r}")
    return x.reshape(x.shape[:-3] + (-1,))


def unflatten(v, shape) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v.reshape(v.shape[:-1] + tuple(shape))


def _canonical_signs(basis):
    # make the largest-magnitude entry of each column positive
    if basis.shape[1] == 0:
        return basis
    idx = np.abs(basis).argmax(axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def build_subspace(support, d_max: int = DEFAULT_D_MAX, jitter: float = DEFAULT_JITTER,
                   rng=None, view: View = View.SPATIAL, tag: str = "") -> ClassSubspace:
    """Centre the ``(K, D)`` support, add Gaussian jitter, keep the top left singular vectors.

    The rank is ``min(d_max, K, D)``, minus any directions whose singular value is
    numerically zero (a noiseless single shot therefore yields a rank-0 subspace,
    i.e. a plain prototype).
    """
    S = np.asarray(support, dtype=np.float64)
    if S.ndim == 1:
        S = S[None, :]
    if S.shape[0] == 0:
        raise ValueError(f"empty support set {tag}".strip())
    if jitter < 0:
        raise ValueError(f"jitter scale must be >= 0, got {jitter}")
    mu = S.mean(axis=0)
    centered = (S - mu).T  # (D, K)
    if jitter > 0:
        rng = np.random.default_rng(rng)
        centered = centered + rng.normal(0.0, jitter, size=centered.shape)
    try:
        U, sv, _ = np.linalg.svd(centered, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for {tag or 'subspace'}: {exc}") from exc
    D, K = centered.shape
    d = min(int(d_max), K, D)
    tol = max(D, K) * np.finfo(np.float64).eps * (sv[0] if sv.size else 0.0)
    d = min(d, int(np.count_nonzero(sv > tol)))
    return ClassSubspace(mean=mu, basis=_canonical_signs(U[:, :d]), view=View(view))


def projection_distance(q, sub: ClassSubspace) -> np.ndarray | float:
    """Squared residual ``||(I - P P^T)(q - mu)||^2`` for one query or a ``(Q, D)`` batch."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != sub.dim:
        raise ValueError(f"query has dimension {q.shape[-1]}, subspace has {sub.dim}")
    qbar = q - sub.mean
    coeff = qbar @ sub.basis
    # plain sums so a rank-0 subspace gives the squared prototype distance bit for bit
    dist = np.maximum(np.sum(qbar ** 2, axis=-1) - np.sum(coeff ** 2, axis=-1), 0.0)
    return float(dist) if dist.ndim == 0 else dist


def similarity(dist, epsilon: float = DEFAULT_EPSILON):
    dist = np.asarray(dist, dtype=np.float64)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if np.any(dist < 0):
        raise ValueError("projection distance must be non-negative")
    s = -np.sqrt(dist + epsilon)
    return float(s) if s.ndim == 0 else s


def fuse(d_spatial, d_shape, fp: FusionParams, epsilon: float = DEFAULT_EPSILON,
         space: str = "similarity"):
    """Softmax-weighted combination of the two views.

    ``space="similarity"`` fuses ``-sqrt(d + eps)`` (larger is better);
    ``space="distance"`` fuses raw distances and negates them so the returned
    score is still larger-is-better.
    """
    alpha = fp.alpha
    if space == "similarity":
        fused = alpha[0] * similarity(d_spatial, epsilon) + alpha[1] * similarity(d_shape, epsilon)
    elif space == "distance":
        fused = -(alpha[0] * np.asarray(d_spatial) + alpha[1] * np.asarray(d_shape))
    else:
        raise ValueError(f"unknown fusion space {space!r}")
    return alpha, fused


def dual_distance(q_spatial, q_shape, sub_spatial: ClassSubspace, sub_shape: ClassSubspace,
                  fp: FusionParams, epsilon: float = DEFAULT_EPSILON) -> DualDistance:
    ds = projection_distance(q_spatial, sub_spatial)
    dh = projection_distance(q_shape, sub_shape)
    _, fused = fuse(ds, dh, fp, epsilon)
    return DualDistance(ds, dh, similarity(ds, epsilon), similarity(dh, epsilon), float(fused))


def class_scores(q_spatial, q_shape, subspaces, fp: FusionParams | None,
                 epsilon: float = DEFAULT_EPSILON, space: str = "similarity") -> np.ndarray:
    """Fused scores ``(Q, N)`` for queries against per-class ``(spatial, shape)`` pairs.

    ``fp=None`` or ``q_shape=None`` scores the spatial view alone.
    """
    ds = np.stack([projection_distance(q_spatial, pair[0]) for pair in subspaces], axis=-1)
    if fp is None or q_shape is None:
        if space == "similarity":
            return similarity(ds, epsilon)
        return -ds
    for k, pair in enumerate(subspaces):
        if len(pair) < 2 or pair[1] is None:
            raise ValueError(f"class {k} is missing its shape-view subspace")
    dh = np.stack([projection_distance(q_shape, pair[1]) for pair in subspaces], axis=-1)
    return fuse(ds, dh, fp, epsilon, space)[1]


def classify_query(q_spatial, q_shape, subspaces, fp: FusionParams, scale: float = 1.0,
                   epsilon: float = DEFAULT_EPSILON, space: str = "similarity"):
    """Return ``(logits, predicted)``; ties go to the lowest class index."""
    for k, pair in enumerate(subspaces):
        if len(pair) < 2 or pair[0] is None or pair[1] is None:
            raise ValueError(f"class {k} is missing a view subspace")
    logits = scale * class_scores(q_spatial, q_shape, subspaces, fp, epsilon, space)
    return logits, np.argmax(logits, axis=-1)
