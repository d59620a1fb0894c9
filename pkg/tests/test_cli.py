import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from vosbench.cli import main
from vosbench.config import JOBS_ENV, ConfigError, load_config
from vosbench.masks import VideoSequence, read_sequence, write_manifest, write_sequence
from vosbench.synth import SCENARIOS

GOLDEN = Path(__file__).parent / "golden"


def make_dataset(root: Path, n=3, frames=5, size=(20, 24), seed=0):
    rng = np.random.default_rng(seed)
    for i in range(n):
        f = np.zeros((frames,) + size, np.uint8)
        for t in range(frames):
            r, c = rng.integers(2, 10, size=2)
            f[t, r:r + 6, c:c + 6] = 1
            f[t, 12:16, 14 + t % 3:20] = 2
        write_sequence(root / f"seq{i}", VideoSequence(f, f"seq{i}"))


def test_evaluate_identity(tmp_path, capsys):
    make_dataset(tmp_path / "gt")
    assert main(["evaluate", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "gt"),
                 "--out", str(tmp_path / "out")]) == 0
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    for col in ("J", "F", "J&F", "F_dot", "J&F_dot"):
        assert doc["summary"][col] == 1.0
    assert "100.00" in capsys.readouterr().out
    assert (tmp_path / "out" / "report.csv").read_text().startswith("sequence,object,J,F")


def test_evaluate_reads_rle_manifests(tmp_path):
    make_dataset(tmp_path / "gt", n=1)
    seq = read_sequence(tmp_path / "gt" / "seq0")
    (tmp_path / "pred").mkdir()
    write_manifest(tmp_path / "pred" / "seq0.rle", seq)
    assert main(["evaluate", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "pred"),
                 "--out", str(tmp_path / "out")]) == 0
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    assert doc["summary"]["J"] == 1.0


def test_evaluate_missing_sequence_scores_zero(tmp_path, caplog):
    make_dataset(tmp_path / "gt")
    shutil.copytree(tmp_path / "gt", tmp_path / "pred")
    shutil.rmtree(tmp_path / "pred" / "seq1")
    assert main(["evaluate", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "pred"),
                 "--out", str(tmp_path / "out")]) == 0
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    rows = {(r["sequence"], r["object"]): r for r in doc["rows"]}
    assert rows[("seq1", 1)]["J"] == 0.0 and rows[("seq0", 1)]["J"] == 1.0
    assert doc["meta"]["missing_predictions"] == ["seq1"]
    assert "seq1" in caplog.text


def test_evaluate_unreadable_file(tmp_path, capsys):
    make_dataset(tmp_path / "gt", n=1)
    shutil.copytree(tmp_path / "gt", tmp_path / "pred")
    bad = tmp_path / "pred" / "seq0" / "00002.png"
    bad.write_bytes(b"not a png")
    code = main(["evaluate", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "pred"),
                 "--out", str(tmp_path / "out")])
    assert code != 0
    assert "00002.png" in capsys.readouterr().err


def test_evaluate_size_mismatch(tmp_path, capsys):
    make_dataset(tmp_path / "gt", n=1)
    make_dataset(tmp_path / "pred", n=1, size=(20, 25))
    code = main(["evaluate", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "pred"),
                 "--out", str(tmp_path / "out")])
    assert code != 0


def test_evaluate_figures(tmp_path):
    make_dataset(tmp_path / "gt", n=1)
    assert main(["evaluate", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "gt"),
                 "--out", str(tmp_path / "out"), "--figures"]) == 0
    assert (tmp_path / "out" / "figures" / "summary.png").stat().st_size > 0
    assert (tmp_path / "out" / "figures" / "seq0.png").exists()


def test_config_file_and_flag_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"metrics": {"k_adapt": 0.3, "tolerance_frac": 0.01}, "jobs": 2}))
    rc = load_config(cfg)
    assert rc.metrics.k_adapt == 0.3 and rc.jobs == 2
    rc = load_config(cfg, k_adapt=0.05, jobs=3)
    assert rc.metrics.k_adapt == 0.05 and rc.metrics.tolerance_frac == 0.01 and rc.jobs == 3
    monkeypatch.setenv(JOBS_ENV, "5")
    assert load_config().jobs == 5
    assert load_config(cfg).jobs == 2
    monkeypatch.setenv(JOBS_ENV, "zero")
    with pytest.raises(ConfigError):
        load_config()


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"metrics": {"nope": 1}}))
    with pytest.raises(ConfigError, match="nope"):
        load_config(bad)
    bad.write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)
    make_dataset(tmp_path / "gt", n=1)
    assert main(["evaluate", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "gt"),
                 "--out", str(tmp_path / "o"), "--config", str(bad)]) == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_k_adapt_flag_changes_scores(tmp_path):
    make_dataset(tmp_path / "gt", n=1, seed=1)
    make_dataset(tmp_path / "pred", n=1, seed=2)
    args = ["evaluate", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "pred")]
    main(args + ["--out", str(tmp_path / "a"), "--k-adapt", "0.01"])
    main(args + ["--out", str(tmp_path / "b"), "--k-adapt", "1.0"])
    a = json.loads((tmp_path / "a" / "report.json").read_text())["summary"]
    b = json.loads((tmp_path / "b" / "report.json").read_text())["summary"]
    assert a["J"] == b["J"] and a["F_dot"] < b["F_dot"]


# -- fuse -------------------------------------------------------------------

def _manifest(path: Path, sources, **extra):
    doc = {"sources": [{"name": n, "path": str(p), "weight": w} for n, p, w in sources]}
    doc.update(extra)
    path.write_text(json.dumps(doc))
    return path


def test_fuse_single_source_passthrough(tmp_path):
    make_dataset(tmp_path / "a")
    man = _manifest(tmp_path / "m.json", [("a", tmp_path / "a", 1.0)])
    assert main(["fuse", "--manifest", str(man), "--out", str(tmp_path / "out")]) == 0
    for i in range(3):
        src = read_sequence(tmp_path / "a" / f"seq{i}").frames
        assert (read_sequence(tmp_path / "out" / f"seq{i}").frames == src).all()


def test_fuse_twin_distractor_recovers_gt(tmp_path):
    assert main(["simulate", "twin-distractor", "--out", str(tmp_path / "sim")]) == 0
    sim = tmp_path / "sim"
    assert main(["fuse", "--manifest", str(sim / "fusion.json"), "--out", str(tmp_path / "f")]) == 0
    fused = read_sequence(tmp_path / "f" / "twin-distractor").frames
    gt = read_sequence(sim / "gt" / "twin-distractor").frames
    assert (fused == gt).mean() >= 0.99


def test_fuse_conflict_is_stable(tmp_path):
    a = np.zeros((2, 4, 4), np.uint8)
    a[:, :2] = 2
    b = np.zeros((2, 4, 4), np.uint8)
    b[:, :2] = 5
    write_sequence(tmp_path / "a" / "s", VideoSequence(a))
    write_sequence(tmp_path / "b" / "s", VideoSequence(b))
    man = _manifest(tmp_path / "m.json", [("a", tmp_path / "a", 1.0), ("b", tmp_path / "b", 1.0)],
                    threshold=0.5)
    outs = []
    for k in range(2):
        assert main(["fuse", "--manifest", str(man), "--out", str(tmp_path / f"o{k}")]) == 0
        outs.append(read_sequence(tmp_path / f"o{k}" / "s").frames)
    assert (outs[0][:, :2] == 2).all() and (outs[0] == outs[1]).all()


def test_fuse_dimension_mismatch_names_sequence(tmp_path, capsys):
    write_sequence(tmp_path / "a" / "clip", VideoSequence(np.ones((2, 4, 4), np.uint8)))
    write_sequence(tmp_path / "b" / "clip", VideoSequence(np.ones((2, 4, 5), np.uint8)))
    man = _manifest(tmp_path / "m.json", [("a", tmp_path / "a", 1.0), ("b", tmp_path / "b", 1.0)])
    assert main(["fuse", "--manifest", str(man), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "clip" in err and "frame 0" in err


def test_fuse_handles_empty_sequences(tmp_path):
    for n in "ab":
        write_sequence(tmp_path / n / "s", VideoSequence(np.zeros((2, 3, 3), np.uint8)))
    man = _manifest(tmp_path / "m.json", [("a", tmp_path / "a", 1.0), ("b", tmp_path / "b", 1.0)])
    assert main(["fuse", "--manifest", str(man), "--out", str(tmp_path / "o")]) == 0
    assert not read_sequence(tmp_path / "o" / "s").frames.any()


def test_fuse_average_mode(tmp_path):
    frames = [np.zeros((2, 4, 4), np.uint8) for _ in range(3)]
    frames[0][:, 0, :] = 1
    frames[1][:, 0, :2] = 1
    for n, f in zip("abc", frames):
        write_sequence(tmp_path / n / "s", VideoSequence(f))
    man = _manifest(tmp_path / "m.json", [(n, tmp_path / n, 1.0) for n in "abc"], mode="average")
    assert main(["fuse", "--manifest", str(man), "--out", str(tmp_path / "o")]) == 0
    out = read_sequence(tmp_path / "o" / "s").frames
    assert (out[:, 0, :2] == 1).all() and not out[:, 0, 2:].any()


# -- plan -------------------------------------------------------------------

def test_plan_examples(capsys, tmp_path):
    assert main(["plan", "uniform", "20", "20", "4", "5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "uniform 20 20 4 5" and out[1] == "0 1 2 3 4"
    assert main(["plan", "wraparound", "3", "5"]) == 0
    assert capsys.readouterr().out.splitlines()[1] == "0 0 1 1 2"
    assert main(["plan", "head", "100", "10", "--out", str(tmp_path / "p.txt")]) == 0
    assert (tmp_path / "p.txt").read_text().startswith("head 100 10 2 5")


def test_plan_errors(capsys, tmp_path):
    assert main(["plan", "bogus", "3", "5"]) == 1
    err = capsys.readouterr().err
    assert "uniform" in err and "wraparound+" in err
    assert main(["plan", "qframe", "30", "10"]) == 1
    assert "--ranking" in capsys.readouterr().err
    assert main(["plan", "uniform", "20", "21", "4", "5"]) == 1
    ranking = tmp_path / "r.txt"
    ranking.write_text("5 4 3 2 1 0 9 8 7 6")
    assert main(["plan", "qframe", "10", "4", "2", "2", "--ranking", str(ranking)]) == 0
    assert capsys.readouterr().out.splitlines()[1:] == ["2 3", "4 5"]


# -- simulate ---------------------------------------------------------------

def test_simulate_mpm_on_off(tmp_path):
    assert main(["simulate", "linear-occlusion", "--out", str(tmp_path / "on"), "--mpm", "on"]) == 0
    assert main(["simulate", "linear-occlusion", "--out", str(tmp_path / "off"), "--mpm", "off"]) == 0
    on = json.loads((tmp_path / "on" / "report.json").read_text())
    off = json.loads((tmp_path / "off" / "report.json").read_text())
    j_on = on["meta"]["mpm"]["reappearance_J"]["mpm-on"]["1"]
    j_off = off["meta"]["mpm"]["reappearance_J"]["mpm-off"]["1"]
    assert j_on > j_off


def test_simulate_scene_cut_log(tmp_path):
    assert main(["simulate", "scene-cut", "--out", str(tmp_path / "s")]) == 0
    lines = (tmp_path / "s" / "scene_changes.log").read_text().splitlines()
    fired = [int(line.split()[0]) for line in lines[1:] if line.endswith("yes")]
    assert fired == [7]


def test_simulate_unknown_scenario(capsys):
    assert main(["simulate", "nowhere", "--out", "unused"]) == 1
    assert "linear-occlusion" in capsys.readouterr().err


def test_simulate_script_path(tmp_path):
    from vosbench.synth import builtin_script
    path = tmp_path / "mine.json"
    raw = dict(builtin_script("scene-cut").raw, name="mine")
    path.write_text(json.dumps(raw))
    assert main(["simulate", str(path), "--out", str(tmp_path / "o"), "--seed", "1"]) == 0
    assert (tmp_path / "o" / "gt" / "mine" / "00000.png").exists()


def test_simulate_same_seed_identical(tmp_path):
    for k in range(2):
        assert main(["simulate", "reappear-far", "--out", str(tmp_path / f"r{k}"), "--seed", "4"]) == 0
    assert _tree_bytes(tmp_path / "r0") == _tree_bytes(tmp_path / "r1")


def _tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.parametrize("name", SCENARIOS)
def test_simulate_matches_golden(tmp_path, name):
    assert main(["simulate", name, "--out", str(tmp_path / name)]) == 0
    golden = GOLDEN / name
    files = sorted(p.name for p in golden.iterdir())
    assert files
    for fname in files:
        assert (tmp_path / name / fname).read_bytes() == (golden / fname).read_bytes(), fname


# -- report -----------------------------------------------------------------

def test_report_rerender(tmp_path, capsys):
    make_dataset(tmp_path / "gt", n=2)
    main(["evaluate", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "gt"),
          "--out", str(tmp_path / "ev")])
    capsys.readouterr()
    assert main(["report", "--in", str(tmp_path / "ev" / "report.json"),
                 "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "report.csv").read_text() == \
        (tmp_path / "ev" / "report.csv").read_text()
    assert (tmp_path / "rep" / "report.txt").read_text() == capsys.readouterr().out
    assert (tmp_path / "rep" / "figures" / "summary.png").exists()


def test_report_bad_input(tmp_path, capsys):
    p = tmp_path / "x.json"
    p.write_text(json.dumps({"a": 1}))
    assert main(["report", "--in", str(p)]) == 1
    assert main(["report", "--in", str(tmp_path / "missing.json")]) == 1
