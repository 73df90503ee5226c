import struct

import numpy as np
import pytest

from freqsub.attention import frequency_branch
from freqsub.config import Config, ConfigError, load_config
from freqsub.data_io import (DatasetSplit, FtsFormatError, SynthSpec, assign_splits,
                             generate_synthetic, load_dataset, read_fts, save_dataset,
                             synth_spectra, write_fts)
from freqsub.spectral import build_mask, dct2


def test_fts_roundtrip_bit_exact(tmp_path, rng):
    feats = rng.normal(size=(7, 3, 4, 5)).astype(np.float32)
    labels = rng.integers(0, 4, size=7)
    write_fts(tmp_path / "a.fts", feats, labels, 4)
    f, l, n = read_fts(tmp_path / "a.fts")
    assert n == 4 and f.dtype == np.float32
    assert f.tobytes() == feats.tobytes()
    np.testing.assert_array_equal(l, labels)


def test_fts_layout(tmp_path):
    write_fts(tmp_path / "b.fts", np.array([[[[1.5, -2.0]]]]), [1], 2)
    blob = (tmp_path / "b.fts").read_bytes()
    assert blob[:4] == b"FTS1"
    assert struct.unpack("<6I", blob[4:28]) == (1, 1, 1, 1, 2, 2)
    assert struct.unpack("<I2f", blob[28:]) == (1, 1.5, -2.0)


def test_fts_truncated(tmp_path, rng):
    write_fts(tmp_path / "c.fts", rng.normal(size=(3, 1, 2, 2)), [0, 1, 0], 2)
    blob = (tmp_path / "c.fts").read_bytes()
    (tmp_path / "c.fts").write_bytes(blob[:-3])
    with pytest.raises(FtsFormatError, match=f"expected {len(blob)} bytes .* got {len(blob) - 3}"):
        read_fts(tmp_path / "c.fts")
    (tmp_path / "c.fts").write_bytes(blob[:10])
    with pytest.raises(FtsFormatError, match="header"):
        read_fts(tmp_path / "c.fts")


def test_fts_bad_magic_and_label_overflow(tmp_path):
    write_fts(tmp_path / "d.fts", np.zeros((2, 1, 1, 1)), [0, 1], 2)
    blob = bytearray((tmp_path / "d.fts").read_bytes())
    (tmp_path / "e.fts").write_bytes(b"XXXX" + bytes(blob[4:]))
    with pytest.raises(FtsFormatError, match="magic") as info:
        read_fts(tmp_path / "e.fts")
    assert info.value.offset == 0
    blob[28 + 8:28 + 12] = struct.pack("<I", 9)  # second record's label
    (tmp_path / "f.fts").write_bytes(bytes(blob))
    with pytest.raises(FtsFormatError, match="label 9") as info:
        read_fts(tmp_path / "f.fts")
    assert info.value.offset == 36


def test_fts_empty(tmp_path):
    write_fts(tmp_path / "g.fts", np.zeros((0, 2, 3, 3)), np.zeros(0, int), 0)
    f, l, n = read_fts(tmp_path / "g.fts")
    assert f.shape == (0, 2, 3, 3) and l.size == 0
    data = load_dataset(tmp_path / "g.fts")
    from freqsub.episodic import sample_episode
    with pytest.raises(ConfigError):
        sample_episode(data, "novel", 5, 1, 1, 0)


def test_split_disjointness_enforced():
    with pytest.raises(ValueError, match="both"):
        DatasetSplit(np.zeros((2, 1, 1, 1)), [0, 1], {"base": (0, 1), "novel": (1,)})


def test_split_ratios():
    assert {k: len(v) for k, v in assign_splits(40).items()} == {"base": 20, "val": 10, "novel": 10}
    assert assign_splits(40)["novel"] == tuple(range(30, 40))
    with pytest.raises(ConfigError, match="novel"):
        assign_splits(3)


def test_synthetic_spectral_support():
    spec = SynthSpec(classes=8, per_class=4, seed=1)
    template, pose, noise, _ = synth_spectra(spec)
    band = build_mask(spec.height, spec.width, spec.tau).bits
    assert not template[..., ~band].any() and not pose[..., ~band].any()
    assert not noise[..., band].any()
    # the stored float32 tensors re-transform to the same split (up to storage precision)
    spectra = dct2(generate_synthetic(spec).features)
    assert np.max(np.abs(spectra[..., ~band] - noise[..., ~band])) < 1e-5
    assert np.max(np.abs(spectra[..., band] - (template + pose)[..., band])) < 1e-5


def test_synthetic_determinism():
    a = generate_synthetic(SynthSpec(classes=8, per_class=3, seed=4))
    b = generate_synthetic(SynthSpec(classes=8, per_class=3, seed=4))
    assert a.features.tobytes() == b.features.tobytes()
    c = generate_synthetic(SynthSpec(classes=8, per_class=3, seed=5))
    assert a.features.tobytes() != c.features.tobytes()


def test_noise_free_shape_view_is_class_pure():
    spec = SynthSpec(classes=8, per_class=6, noise_scale=0.0, pose_scale=0.1, seed=2)
    data = generate_synthetic(spec)
    shape = frequency_branch(data.features.astype(float), None, build_mask(8, 8, 0.3)).reshape(48, -1)
    within = np.mean([np.var(shape[data.labels == k], axis=0).sum() for k in range(8)])
    between = np.var(np.stack([shape[data.labels == k].mean(0) for k in range(8)]), axis=0).sum()
    assert within < 0.05 * between


def test_heavy_noise_makes_raw_nearest_neighbour_chance():
    spec = SynthSpec(classes=20, per_class=20, noise_scale=30.0, seed=3)
    data = generate_synthetic(spec)
    X = data.features.reshape(len(data.labels), -1).astype(float)
    rng = np.random.default_rng(0)
    hits = []
    for _ in range(2000):
        classes = rng.choice(20, 5, replace=False)
        picks = [rng.choice(np.flatnonzero(data.labels == c), 2, replace=False) for c in classes]
        support = X[[p[0] for p in picks]]
        t = rng.integers(5)
        q = X[picks[t][1]]
        hits.append(np.argmin(((support - q) ** 2).sum(1)) == t)
    acc, se = np.mean(hits), np.sqrt(0.2 * 0.8 / len(hits))
    assert abs(acc - 0.2) < 4 * se + 0.02


def test_save_and_load_dataset(tmp_path):
    spec = SynthSpec(classes=8, per_class=3, seed=1)
    data = generate_synthetic(spec)
    paths = save_dataset(data, tmp_path / "ds", spec)
    assert [p.name for p in paths] == ["base.fts", "val.fts", "novel.fts", "manifest.txt"]
    back = load_dataset(tmp_path / "ds")
    assert back.splits == data.splits
    order = np.argsort(data.labels, kind="stable")
    np.testing.assert_array_equal(back.features, data.features[order])


def test_config_defaults_and_validation(tmp_path):
    cfg = load_config()
    assert (cfg.tau, cfg.lam, cfg.jitter, cfg.epsilon, cfg.episodes, cfg.query) == \
        (0.3, 0.03, 1e-5, 1e-6, 600, 15)
    with pytest.raises(ConfigError, match=r"tau.*\(0, 1\)"):
        load_config(tau=1.5)
    assert load_config(lam=0).lam == 0.0
    (tmp_path / "c.txt").write_text("# comment\ntau = 0.25\nlambda=0.1\nway=3\n")
    cfg = load_config(tmp_path / "c.txt", way=4)
    assert (cfg.tau, cfg.lam, cfg.way) == (0.25, 0.1, 4)
    (tmp_path / "bad.txt").write_text("nonsense=1\n")
    with pytest.raises(ConfigError, match="unknown"):
        load_config(tmp_path / "bad.txt")
    with pytest.raises(ConfigError):
        Config(fusion_space="cosine")
    assert any(line.startswith("config.tau=") for line in cfg.as_lines())
