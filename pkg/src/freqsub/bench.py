"""Per-task timing and allocation comparison of the single- and dual-view metrics."""
from __future__ import annotations

import time
import tracemalloc
from dataclasses import dataclass

import numpy as np

from .config import Config
from .episodic import Episode
from .model import ModelParams, forward

# (label, C, H, W): a wide flattened map and a compact pooled-style map
SCALES = (("1600-D", 64, 5, 5), ("640-D", 40, 4, 4))


@dataclass
class BenchRow:
    scale: str
    dim: int
    model: str
    params: int
    median_ms: float
    iqr_ms: float
    std_ms: float
    peak_mb: float


def random_task(channels, height, width, way=5, shot=5, n_query=15, seed=0) -> Episode:
    rng = np.random.default_rng(seed)
    return Episode(
        support=rng.normal(size=(way * shot, channels, height, width)),
        support_labels=np.repeat(np.arange(way), shot),
        query=rng.normal(size=(way * n_query, channels, height, width)),
        query_labels=np.repeat(np.arange(way), n_query),
        way=way, shot=shot, n_query=n_query, index=seed)


def time_variant(task, params, config, variant, tasks=20, warmup=3):
    for _ in range(warmup):
        forward(task, params, config, variant)
    times = []
    for _ in range(tasks):
        t0 = time.perf_counter()
        forward(task, params, config, variant)
        times.append(1e3 * (time.perf_counter() - t0))
    tracemalloc.start()
    forward(task, params, config, variant)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return np.array(times), peak / 2 ** 20


def run_bench(config: Config, tasks: int = 20, warmup: int = 3, scales=SCALES):
    rows = []
    for label, c, h, w in scales:
        task = random_task(c, h, w, config.way, config.shot, config.query, config.seed)
        params = ModelParams.init(c, config.reduction, config.logit_scale, config.seed)
        for variant, name, n_params in (("V0", "single-view", 0), ("V3", "dual-view", params.size)):
            t, peak = time_variant(task, params, config, variant, tasks, warmup)
            q1, q3 = np.percentile(t, [25, 75])
            rows.append(BenchRow(label, c * h * w, f"{variant} {name}", n_params,
                                 float(np.median(t)), float(q3 - q1), float(np.std(t, ddof=1)), peak))
    return rows
