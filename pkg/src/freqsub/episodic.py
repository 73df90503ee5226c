"""N-way K-shot episodes, evaluation statistics, and the variant ablation."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import Config, ConfigError
from .data_io import DatasetSplit
from .model import VARIANTS, ModelParams, forward

SAMPLE_STREAM = 11
SHUFFLE_STREAM = 13
WORKERS_ENV = "FREQSUB_WORKERS"


@dataclass
class Episode:
    support: np.ndarray  # (N*K, C, H, W), class-major
    support_labels: np.ndarray
    query: np.ndarray  # (N*M, C, H, W)
    query_labels: np.ndarray
    way: int
    shot: int
    n_query: int
    classes: tuple = ()  # global class id of each episode label
    support_ids: np.ndarray = None
    query_ids: np.ndarray = None
    index: int = 0


@dataclass
class EpisodeResult:
    accuracy: float
    logits: np.ndarray
    predictions: np.ndarray
    labels: np.ndarray
    classes: tuple = ()


@dataclass
class EvalReport:
    accuracies: np.ndarray
    label: str = ""

    @property
    def episodes(self) -> int:
        return len(self.accuracies)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies, ddof=1)) if self.episodes > 1 else 0.0

    @property
    def ci95(self) -> float:
        return 1.96 * self.std / np.sqrt(self.episodes)

    def lines(self, prefix="") -> list[str]:
        return [f"{prefix}episodes={self.episodes}",
                f"{prefix}mean_accuracy={self.mean:.6f}",
                f"{prefix}ci95={self.ci95:.6f}",
                f"{prefix}summary={100 * self.mean:.2f} +- {100 * self.ci95:.2f} %"]


def episode_rng(seed: int, index: int, stream: int = SAMPLE_STREAM):
    return np.random.default_rng([seed, stream, index])


def sample_episode(split: DatasetSplit, phase: str, way: int, shot: int, n_query: int,
                   rng, index: int = 0) -> Episode:
    rng = np.random.default_rng(rng)
    pools = split.class_indices(phase)
    if len(pools) < way:
        raise ConfigError(f"{phase} split has {len(pools)} classes, {way}-way episodes need {way}")
    need = shot + n_query
    short = {c: len(ix) for c, ix in pools.items() if len(ix) < need}
    classes = np.array(sorted(pools))
    picked = rng.choice(classes, size=way, replace=False)
    for c in picked:
        if int(c) in short:
            raise ConfigError(f"class {c} has {short[int(c)]} samples, episode needs {need} "
                              f"({shot} support + {n_query} query)")
    sup, qry = [], []
    for c in picked:
        ids = rng.choice(pools[int(c)], size=need, replace=False)
        sup.append(ids[:shot])
        qry.append(ids[shot:])
    sup, qry = np.concatenate(sup), np.concatenate(qry)
    feats = split.features
    return Episode(
        support=feats[sup].astype(np.float64),
        support_labels=np.repeat(np.arange(way), shot),
        query=feats[qry].astype(np.float64),
        query_labels=np.repeat(np.arange(way), n_query),
        way=way, shot=shot, n_query=n_query,
        classes=tuple(int(c) for c in picked),
        support_ids=sup, query_ids=qry, index=index)


def evaluate_episode(ep: Episode, params: ModelParams, config: Config, variant=None) -> EpisodeResult:
    variant = variant or config.variant
    logits = forward(ep, params, config, variant).logits
    pred = np.argmax(logits, axis=-1)
    labels = np.asarray(ep.query_labels)
    return EpisodeResult(float(np.mean(pred == labels)), logits, pred, labels, ep.classes)


def _workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def episode_stream(split: DatasetSplit, config: Config, phase: str = "novel", start: int = 0):
    """Endless deterministic episodes; episode ``i`` depends only on (seed, i)."""
    i = start
    while True:
        yield sample_episode(split, phase, config.way, config.shot, config.query,
                             episode_rng(config.seed, i), index=i)
        i += 1


def _one(split, params, config, phase, variants, shuffle, i):
    ep = sample_episode(split, phase, config.way, config.shot, config.query,
                        episode_rng(config.seed, i), index=i)
    if shuffle:
        ep.query_labels = episode_rng(config.seed, i, SHUFFLE_STREAM).permutation(ep.query_labels)
    return [evaluate_episode(ep, params, config, v) for v in variants]


def run_episodes(split, params, config: Config, variants, phase="novel", shuffle=False,
                 episodes=None):
    """Per-variant lists of EpisodeResult on one shared episode stream."""
    n = config.episodes if episodes is None else episodes
    job = lambda i: _one(split, params, config, phase, variants, shuffle, i)  # noqa: E731
    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(job, range(n)))
    else:
        rows = [job(i) for i in range(n)]
    return {v: [row[j] for row in rows] for j, v in enumerate(variants)}


def evaluate(split: DatasetSplit, params: ModelParams, config: Config, phase: str = "novel",
             variant=None, shuffle: bool = False, keep_results: bool = False):
    """Mean accuracy and 95% CI over ``config.episodes`` sampled episodes.

    ``shuffle=True`` randomly permutes each episode's query labels (chance control).
    """
    if config.episodes < 2:
        raise ConfigError("evaluation needs at least 2 episodes for a confidence interval")
    variant = variant or config.variant
    results = run_episodes(split, params, config, [variant], phase, shuffle)[variant]
    report = EvalReport(np.array([r.accuracy for r in results]), variant)
    return (report, results) if keep_results else report


def ablate(split: DatasetSplit, params: ModelParams, config: Config, phase: str = "novel",
           shuffle: bool = False, keep_results: bool = False):
    """Evaluate V0..V3 on the same episode stream."""
    if config.episodes < 2:
        raise ConfigError("evaluation needs at least 2 episodes for a confidence interval")
    names = list(VARIANTS)
    results = run_episodes(split, params, config, names, phase, shuffle)
    table = {v: EvalReport(np.array([r.accuracy for r in results[v]]), v) for v in names}
    return (table, results) if keep_results else table


def write_accuracy_csv(path, reports: dict):
    """Columns: episode, then one accuracy column per report key."""
    keys = list(reports)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode"] + [f"accuracy_{k}" for k in keys])
        for i in range(reports[keys[0]].episodes):
            w.writerow([i] + [f"{reports[k].accuracies[i]:.6f}" for k in keys])
