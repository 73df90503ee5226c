import os
import subprocess
import sys

import numpy as np
import pytest

from freqsub.cli import main
from freqsub.model import ModelParams, load_params


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def body(text):
    return [l for l in text.splitlines() if not l.startswith("timestamp=")]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth") / "ds"
    assert main(["gen-synth", "--out", str(out), "--classes", "20", "--per-class", "20",
                 "--seed", "2"]) == 0
    return out


SMALL = ("--episodes", 6, "--shot", 1, "--query", 3)


def test_gen_synth_is_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, "gen-synth", "--out", tmp_path / name, "--classes", 8,
                   "--per-class", 4)[0] == 0
    for f in ("base.fts", "val.fts", "novel.fts", "manifest.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_gen_synth_too_few_classes(tmp_path, capsys):
    code, _, err = run(capsys, "gen-synth", "--out", tmp_path / "x", "--classes", 3)
    assert code == 1 and "novel" in err


def test_eval_deterministic(dataset, capsys):
    code, a, _ = run(capsys, "eval", dataset, *SMALL)
    assert code == 0
    _, b, _ = run(capsys, "eval", dataset, *SMALL)
    assert body(a) == body(b)
    assert a.splitlines()[0] == "freqsub eval"
    assert any(l.startswith("config.tau=") for l in a.splitlines())
    assert any(l.startswith("mean_accuracy=") for l in a.splitlines())


def test_eval_errors(dataset, tmp_path, capsys):
    assert run(capsys, "eval", tmp_path / "missing")[0] == 1
    assert run(capsys, "eval", dataset, "--tau", 1.5)[0] == 1
    assert run(capsys, "eval", dataset, "--way", 50, *SMALL[:2])[0] == 1
    (tmp_path / "junk.fts").write_bytes(b"nope")
    code, _, err = run(capsys, "eval", tmp_path / "junk.fts")
    assert code == 1 and "offset" in err


def test_ablate_rows_match_spatial_eval(dataset, tmp_path, capsys):
    code, out, _ = run(capsys, "ablate", dataset, *SMALL, "--csv", tmp_path / "acc.csv")
    assert code == 0
    rows = [l.split()[0] for l in out.splitlines() if l[:2] in ("V0", "V1", "V2", "V3") and "." not in l[:3]]
    assert rows == ["V0", "V1", "V2", "V3"]
    v0 = [l.split("=", 1)[1] for l in out.splitlines() if l.startswith("V0.mean_accuracy=")]
    _, single, _ = run(capsys, "eval", dataset, *SMALL, "--view", "spatial-only")
    assert v0 == [l.split("=", 1)[1] for l in single.splitlines() if l.startswith("mean_accuracy=")]
    header = (tmp_path / "acc.csv").read_text().splitlines()[0]
    assert header == "episode,accuracy_V0,accuracy_V1,accuracy_V2,accuracy_V3"


def test_train_zero_steps_keeps_init(dataset, tmp_path, capsys):
    code, _, _ = run(capsys, "train", dataset, "--steps", 0, "--out", tmp_path / "p.bin")
    assert code == 0
    init = ModelParams.init(8, 4, 1.0, 0)
    np.testing.assert_array_equal(load_params(tmp_path / "p.bin").to_vector(), init.to_vector())


def test_train_then_eval(dataset, tmp_path, capsys):
    code, out, _ = run(capsys, "train", dataset, "--steps", 3, "--shot", 1, "--query", 3,
                       "--out", tmp_path / "p.bin", "--trace", tmp_path / "t.csv")
    assert code == 0 and "steps=3" in out
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 4
    code, out, _ = run(capsys, "eval", dataset, *SMALL, "--params", tmp_path / "p.bin")
    assert code == 0
    code, _, err = run(capsys, "gen-synth", "--out", tmp_path / "c4", "--channels", 4,
                       "--classes", 8, "--per-class", 5)
    assert run(capsys, "eval", tmp_path / "c4", "--params", tmp_path / "p.bin")[0] == 1


def test_bench_structure(capsys):
    code, out, _ = run(capsys, "bench", "--tasks", 3, "--warmup", 1)
    assert code == 0
    rows = [l.split() for l in out.splitlines() if l.startswith(("1600-D", "640-D")) and "=" not in l]
    assert [(r[0], r[1]) for r in rows] == [("1600-D", "V0"), ("1600-D", "V3"), ("640-D", "V0"), ("640-D", "V3")]
    assert rows[0][3] == "0" and int(rows[1][3]) > 0


def test_selftest_passes(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0 and "result=pass (5/5)" in out


def test_selftest_catches_injected_fault():
    env = dict(os.environ, FREQSUB_FAULT_INJECT="mask-strict")
    proc = subprocess.run([sys.executable, "-m", "freqsub.cli", "selftest"], env=env,
                          capture_output=True, text=True)
    assert proc.returncode != 0
    assert "FAIL mask_enumeration" in proc.stdout


def test_help_mentions_csv_columns(capsys):
    with pytest.raises(SystemExit):
        main(["eval", "--help"])
    assert "accuracy_<variant>" in capsys.readouterr().out
