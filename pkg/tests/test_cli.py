import hashlib
import json
from pathlib import Path

import pytest

from sceneprior.cli import EXIT_CODES, main
from sceneprior.knowledge import load_triples
from sceneprior.svg import render_trajectory

GOLDEN = Path(__file__).parent / "golden"

TRAJ = {
    "width": 6, "height": 4,
    "walls": [[x, y] for x in range(6) for y in (0, 3)] + [[0, 1], [0, 2], [5, 1], [5, 2]],
    "objects": [[4, 2, "towel"]], "goal": [4, 2], "viewpoints": [[3, 2], [4, 1]],
    "poses": [[1, 1, 0], [2, 1, 0], [3, 1, 0], [3, 1, 90], [3, 2, 90]], "success": True,
}


def sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_cfg(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_gen_corpus_default_and_idempotent(tmp_path, capsys):
    assert main(["gen-corpus", "--out", str(tmp_path / "a")]) == 0
    assert main(["gen-corpus", "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    splits = json.loads((tmp_path / "a" / "splits.json").read_text())
    assert len(splits["seen"]) == 68 and len(splits["unseen"]) == 17
    assert len(splits["heard"]) == 16 and len(splits["unheard"]) == 5
    for f in ("corpus.json", "splits.json"):
        assert sha(tmp_path / "a" / f) == sha(tmp_path / "b" / f)


def test_gen_corpus_tiny(tmp_path):
    cfg = write_cfg(tmp_path, {"corpus": {"n_houses": 5}})
    assert main(["gen-corpus", "--config", cfg, "--out", str(tmp_path)]) == 0
    splits = json.loads((tmp_path / "splits.json").read_text())
    assert (len(splits["seen"]), len(splits["unseen"])) == (4, 1)


def test_build_kg(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"corpus": {"n_houses": 6}})
    main(["gen-corpus", "--config", cfg, "--out", str(tmp_path)])
    assert main(["build-kg", str(tmp_path / "corpus.json"), "--out", str(tmp_path / "kg.triples")]) == 0
    kg = load_triples(tmp_path / "kg.triples")
    assert kg.A.shape == (45, 45) and (kg.A == kg.A.T).all()
    capsys.readouterr()
    (tmp_path / "empty.json").write_text(json.dumps({"master_seed": 0, "houses": [], "seen": [], "unseen": []}))
    code = main(["build-kg", str(tmp_path / "empty.json")])
    assert code == EXIT_CODES["knowledge"]
    assert capsys.readouterr().err.startswith("error: knowledge: ")
    assert main(["build-kg", str(tmp_path / "nope.json")]) == EXIT_CODES["input"]


def test_eval_writes_reports_and_svgs(tmp_path):
    cfg = write_cfg(tmp_path, {"corpus": {"n_houses": 10}, "episodes": {"per_split": 3}, "policy": {"name": "random"}})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path), "--svg", "2"]) == 0
    for label in ("SH-HS", "SH-US", "UH-HS", "UH-US"):
        assert (tmp_path / f"report_random_{label}.csv").exists()
    assert (tmp_path / "report_random.csv").read_text().splitlines()[0] == "split,n,SR,SPL,SNA,DTG,SWS"
    svgs = sorted((tmp_path / "trajectories").glob("*.svg"))
    assert len(svgs) == 2 and svgs[0].read_text().startswith("<svg")
    assert main(["report", str(tmp_path / "report_random.json"), "--out", str(tmp_path / "all.csv")]) == 0
    assert (tmp_path / "all.csv").read_text().count("\n") == 6


def test_train_deterministic_and_resumable(tmp_path):
    cfg = write_cfg(tmp_path, {"train": {"episodes": 400}})
    main(["train", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["train", "--config", cfg, "--out", str(tmp_path / "b")])
    assert sha(tmp_path / "a" / "region_policy.bin") == sha(tmp_path / "b" / "region_policy.bin")
    main(["train", "--config", cfg, "--out", str(tmp_path / "c"), "--batches", "15"])
    main(["train", "--config", cfg, "--out", str(tmp_path / "c"), "--resume", str(tmp_path / "c" / "region_policy.bin")])
    assert sha(tmp_path / "a" / "region_policy.bin") == sha(tmp_path / "c" / "region_policy.bin")
    assert (tmp_path / "a" / "learning_curve.csv").read_text() == (tmp_path / "c" / "learning_curve.csv").read_text()


def test_plot_traj_golden(tmp_path):
    src = tmp_path / "t.json"
    src.write_text(json.dumps(TRAJ))
    assert main(["plot-traj", str(src), "--out", str(tmp_path / "t.svg")]) == 0
    assert (tmp_path / "t.svg").read_text() == (GOLDEN / "trajectory.svg").read_text()


def test_plot_traj_shapes():
    empty = render_trajectory({"width": 3, "height": 3, "poses": [[1, 1, 0]]})
    assert 'class="start"' in empty and "<polyline" not in empty
    square = [[1, 1, 0], [2, 1, 0], [2, 2, 90], [1, 2, 180], [1, 1, 270]]
    svg = render_trajectory({"width": 4, "height": 4, "poses": square})
    pts = svg.split('points="')[1].split('"')[0].split()
    assert len(pts) == 5 and pts[0] == pts[-1]


def test_config_errors_are_single_line(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"corpus": {"n_house": 5}})
    assert main(["gen-corpus", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CODES["config"]
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and err.startswith("error: config:") and "n_house" in err
    bad = write_cfg(tmp_path, {"episodes": {"per_split": 0}}, "bad.json")
    assert main(["sample-episodes", "--config", bad, "--out", str(tmp_path)]) == EXIT_CODES["config"]
    assert main(["gen-corpus", "--config", str(tmp_path / "missing.json")]) == EXIT_CODES["config"]


def test_output_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("SCENEPRIOR_OUT", str(tmp_path / "env"))
    cfg = write_cfg(tmp_path, {"corpus": {"n_houses": 5}})
    assert main(["gen-corpus", "--config", cfg, "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "env" / "corpus.json").exists() and not (tmp_path / "flag").exists()
