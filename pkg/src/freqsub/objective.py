"""Losses and the finite-difference trainer."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .config import Config
from .model import VARIANTS, ModelParams, forward, view_features
from .subspace import NumericalError, projection_distance, similarity, softmax

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class LossBreakdown:
    l_cls: float
    l_disc: float
    lam: float
    l_total: float


class TrainingDiverged(NumericalError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = list(trace)


def log_softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits, labels) -> float:
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n = logits.shape[1]
    if labels.shape[0] != logits.shape[0]:
        raise ValueError(f"{labels.shape[0]} labels for {logits.shape[0]} rows of logits")
    if np.any((labels < 0) | (labels >= n)):
        bad = labels[(labels < 0) | (labels >= n)][0]
        raise ValueError(f"label {bad} out of range [0, {n})")
    return float(-log_softmax(logits)[np.arange(labels.size), labels].mean())


def disc_loss(bases) -> float:
    """Sum over ordered pairs i != j of ||P_i^T P_j||_F^2."""
    bases = [np.asarray(b, dtype=np.float64) for b in bases]
    if not bases:
        return 0.0
    dims = {b.shape[0] for b in bases}
    if len(dims) > 1:
        raise ValueError(f"bases live in different ambient dimensions: {sorted(dims)}")
    total = 0.0
    for i, p in enumerate(bases):
        for j, q in enumerate(bases):
            if i != j:
                total += float(np.sum((p.T @ q) ** 2))
    return total


def episode_disc_loss(subspaces) -> float:
    """Orthogonality penalty summed over both views of one episode."""
    total = 0.0
    for v in range(2):
        bases = [pair[v].basis for pair in subspaces if pair[v] is not None]
        total += disc_loss(bases)
    return total


def total_loss(episode, params: ModelParams, config: Config, variant="V3") -> LossBreakdown:
    fwd = forward(episode, params, config, variant)
    l_cls = cross_entropy(fwd.logits, episode.query_labels)
    l_disc = episode_disc_loss(fwd.subspaces) if config.lam else 0.0
    return LossBreakdown(l_cls, l_disc, config.lam, l_cls + config.lam * l_disc)


def fd_gradient(episode, params: ModelParams, config: Config, h: float | None = None,
                variant="V3") -> np.ndarray:
    """Central differences of ``l_total`` over every entry of ``params.to_vector()``.

    Jitter is keyed on (seed, episode, class, view), so the +h and -h passes see
    identical noise.
    """
    h = config.fd_step if h is None else h
    if h <= 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    theta = params.to_vector()
    names = params.coordinate_names()
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        vals = []
        for sign in (1.0, -1.0):
            t = theta.copy()
            t[i] += sign * h
            val = total_loss(episode, params.with_vector(t), config, variant).l_total
            if not np.isfinite(val):
                raise NumericalError(f"non-finite loss at {names[i]} {'+' if sign > 0 else '-'} h")
            vals.append(val)
        grad[i] = (vals[0] - vals[1]) / (2 * h)
    return grad


def fusion_gradient(episode, params: ModelParams, config: Config) -> np.ndarray:
    """Closed-form d l_total / d (w_spatial, w_shape) for the similarity-space fusion.

    The orthogonality term does not depend on the fusion logits.
    """
    fwd = forward(episode, params, config, "V3")
    queries = view_features(episode.query, params, config, VARIANTS["V3"])
    sims = []
    for v in range(2):
        d = np.stack([projection_distance(queries[v], pair[v]) for pair in fwd.subspaces], axis=-1)
        sims.append(similarity(d, config.epsilon) if config.fusion_space == "similarity" else -d)
    sims = np.stack(sims)  # (2, Q, N)
    probs = softmax(fwd.logits)
    onehot = np.eye(episode.way)[np.asarray(episode.query_labels)]
    dlogits = (probs - onehot) / probs.shape[0]
    alpha = params.fusion.alpha
    jac = np.diag(alpha) - np.outer(alpha, alpha)  # d alpha_i / d w_j
    return jac.T @ (params.logit_scale * np.einsum("qn,vqn->v", dlogits, sims))


def train(episodes: Iterable, params: ModelParams, config: Config, steps: int | None = None,
          lr: float | None = None, variant="V3"):
    """Plain gradient descent on finite-difference gradients, one episode per step.

    Returns ``(params, trace)`` where ``trace`` holds ``l_total`` before each update.
    """
    steps = config.steps if steps is None else steps
    lr = config.lr if lr is None else lr
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    trace = []
    it = iter(episodes)
    for step in range(steps):
        ep = next(it)
        loss = total_loss(ep, params, config, variant).l_total
        trace.append(loss)
        if not np.isfinite(loss) or loss > DIVERGENCE_LIMIT:
            raise TrainingDiverged(f"loss {loss} at step {step}", trace)
        if lr == 0:
            continue
        grad = fd_gradient(ep, params, config, variant=variant)
        theta = params.to_vector() - lr * grad
        if params.logit_scale > 0 and theta[-1] <= 0:
            theta[-1] = params.logit_scale  # scale must stay positive
        params = params.with_vector(theta)
        log.debug("step %d loss %.6f", step, loss)
    return params, trace
