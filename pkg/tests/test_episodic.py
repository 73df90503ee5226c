import numpy as np
import pytest

from freqsub import oracles
from freqsub.config import Config, ConfigError
from freqsub.data_io import DatasetSplit, SynthSpec, generate_synthetic
from freqsub.episodic import (EvalReport, Episode, ablate, evaluate, evaluate_episode,
                              sample_episode)
from freqsub.model import ModelParams


@pytest.fixture(scope="module")
def bench_data():
    return generate_synthetic(SynthSpec(classes=20, per_class=20, seed=3))


@pytest.mark.parametrize("shot,total", [(1, 80), (5, 100)])
def test_episode_sizes(bench_data, shot, total):
    ep = sample_episode(bench_data, "novel", 5, shot, 15, np.random.default_rng(0))
    assert ep.support.shape[0] == 5 * shot and ep.query.shape[0] == 75
    assert ep.support.shape[0] + ep.query.shape[0] == total
    assert np.bincount(ep.support_labels).tolist() == [shot] * 5
    assert np.bincount(ep.query_labels).tolist() == [15] * 5
    assert not set(ep.support_ids) & set(ep.query_ids)
    assert set(ep.classes) <= set(bench_data.splits["novel"])
    # episode label k maps back to global class ep.classes[k]
    np.testing.assert_array_equal(bench_data.labels[ep.support_ids],
                                  np.array(ep.classes)[ep.support_labels])


def test_episode_determinism(bench_data):
    a = sample_episode(bench_data, "base", 5, 2, 3, np.random.default_rng(9))
    b = sample_episode(bench_data, "base", 5, 2, 3, np.random.default_rng(9))
    np.testing.assert_array_equal(a.support_ids, b.support_ids)
    np.testing.assert_array_equal(a.query_ids, b.query_ids)


def test_episode_precondition_errors(bench_data):
    with pytest.raises(ConfigError, match="classes"):
        sample_episode(bench_data, "novel", 6, 1, 1, 0)
    with pytest.raises(ConfigError, match="samples"):
        sample_episode(bench_data, "novel", 5, 10, 15, 0)
    with pytest.raises(ConfigError, match="split"):
        sample_episode(DatasetSplit(np.zeros((0, 1, 1, 1)), np.zeros(0), {}), "novel", 2, 1, 1, 0)


def test_self_classification_is_perfect(bench_data):
    params = ModelParams.init(8, 4, seed=0)
    cfg = Config(shot=3)
    for i in range(3):
        ep = sample_episode(bench_data, "novel", 5, 3, 1, np.random.default_rng(i), index=i)
        sanity = Episode(ep.support, ep.support_labels, ep.support, ep.support_labels, 5, 3, 3,
                         index=i)
        for v in ("V0", "V1", "V3"):
            assert evaluate_episode(sanity, params, cfg, v).accuracy == 1.0


def test_permuted_labels_are_chance(bench_data):
    cfg = Config(shot=1, episodes=200, seed=2)
    rep = evaluate(bench_data, ModelParams.init(8, 4, seed=0), cfg, shuffle=True)
    assert abs(rep.mean - 0.2) <= 3 * rep.std / np.sqrt(rep.episodes)


def test_report_ci_formula():
    rep = EvalReport(np.array([0.8, 1.0]))
    assert rep.mean == pytest.approx(0.9)
    assert rep.ci95 == pytest.approx(0.196, abs=1e-12)
    assert EvalReport(np.full(7, 0.6)).ci95 == 0.0
    acc = np.random.default_rng(0).uniform(size=31)
    assert (EvalReport(acc).mean, EvalReport(acc).ci95) == pytest.approx(oracles.sample_stdev_ci(acc.tolist()))


def test_evaluate_basic(bench_data):
    params = ModelParams.init(8, 4, seed=0)
    rep = evaluate(bench_data, params, Config(shot=1, episodes=5))
    assert rep.episodes == 5 and np.all((rep.accuracies >= 0) & (rep.accuracies <= 1))
    with pytest.raises(ConfigError):
        evaluate(bench_data, params, Config(episodes=1))
    assert Config().episodes == 600 and Config().query == 15


def test_evaluate_does_not_mutate(bench_data):
    params = ModelParams.init(8, 4, seed=0)
    before = (bench_data.features.copy(), bench_data.labels.copy(), params.to_vector().copy())
    evaluate(bench_data, params, Config(shot=1, episodes=3))
    np.testing.assert_array_equal(before[0], bench_data.features)
    np.testing.assert_array_equal(before[1], bench_data.labels)
    np.testing.assert_array_equal(before[2], params.to_vector())


def test_parallel_matches_sequential(bench_data, monkeypatch):
    params = ModelParams.init(8, 4, seed=0)
    cfg = Config(shot=1, episodes=6)
    seq = evaluate(bench_data, params, cfg).accuracies
    monkeypatch.setenv("FREQSUB_WORKERS", "3")
    np.testing.assert_array_equal(evaluate(bench_data, params, cfg).accuracies, seq)


def test_v3_with_dominant_spatial_weight_reproduces_v0(bench_data):
    params = ModelParams.init(8, 4, seed=0)
    params = params.with_vector(np.r_[params.to_vector()[:-3], 30.0, -30.0, 1.0])
    _, results = ablate(bench_data, params, Config(shot=2, episodes=20), keep_results=True)
    for r0, r3 in zip(results["V0"], results["V3"]):
        np.testing.assert_array_equal(r0.predictions, r3.predictions)


def test_v2_with_unit_gains_equals_v1(bench_data):
    base = ModelParams.init(8, 4, seed=0)
    a = base.attention
    vec = np.zeros(a.size)
    vec[-a.channels:] = 60.0  # b2 large, all weights zero: every gain is 1
    params = type(base)(a.with_vector(vec), base.fusion, 1.0)
    _, results = ablate(bench_data, params, Config(shot=2, episodes=10), keep_results=True)
    for r1, r2 in zip(results["V1"], results["V2"]):
        np.testing.assert_allclose(r1.logits, r2.logits, atol=1e-9)


def test_ablate_rows_and_shared_stream(bench_data):
    params = ModelParams.init(8, 4, seed=0)
    cfg = Config(shot=1, episodes=4)
    table = ablate(bench_data, params, cfg)
    assert list(table) == ["V0", "V1", "V2", "V3"]
    np.testing.assert_array_equal(table["V0"].accuracies,
                                  evaluate(bench_data, params, cfg, variant="V0").accuracies)


def test_spatial_pool_gap(bench_data):
    params = ModelParams.init(8, 4, seed=0)
    rep = evaluate(bench_data, params, Config(shot=1, episodes=3, spatial_pool="gap"), variant="V0")
    assert rep.episodes == 3
