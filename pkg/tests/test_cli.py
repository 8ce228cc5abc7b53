import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dlvmc.cli import main

TINY = ["train.n_walkers=32", "train.burn_in=5", "train.n_pretrain=5", "train.n_opt=12",
        "train.eval_steps=20", "train.checkpoint_every=5", "model.width_one=8",
        "model.width_aux=4", "model.n_det=1"]


def _sets(overrides):
    return [a for o in overrides for a in ("--set", o)]


def _json_line(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    run = tmp_path_factory.mktemp("cli") / "h"
    assert main(["train", "--preset", "hydrogen", "--run-dir", str(run), *_sets(TINY)]) == 0
    return run


def test_train_writes_artifacts(trained):
    for name in ("config.json", "log.csv", "pretrain.csv", "pretrained.npz", "final.npz",
                 "energy.json", "eval_means.txt", "summary.json", "checkpoint_000005.npz"):
        assert (trained / name).is_file(), name
    with open(trained / "log.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["step"]) for r in rows] == list(range(12))
    energy = json.loads((trained / "energy.json").read_text())
    assert energy["n_samples"] == 20 * 32 and np.isfinite(energy["mean"])
    assert len(np.loadtxt(trained / "eval_means.txt")) == 20


def test_evaluate_from_checkpoint(trained, tmp_path, capsys):
    out = tmp_path / "ev"
    code = main(["evaluate", "--preset", "hydrogen", "--checkpoint", str(trained / "final.npz"),
                 "--run-dir", str(out), *_sets(TINY)])
    assert code == 0
    msg = _json_line(capsys)
    energy = json.loads((out / "energy.json").read_text())
    assert msg["energy"] == energy["mean"]
    assert not (out / "log.csv").exists()


def test_resume_continues_step_count(trained, tmp_path):
    out = tmp_path / "resumed"
    code = main(["train", "--preset", "hydrogen", "--resume", str(trained / "checkpoint_000005.npz"),
                 "--run-dir", str(out), *_sets(TINY), "--set", "train.eval_steps=0"])
    assert code == 0
    with open(out / "log.csv") as fh:
        steps = [int(r["step"]) for r in csv.DictReader(fh)]
    assert steps[0] == 5 and len(steps) == 12


def test_report_table_and_chart(trained, tmp_path):
    second = tmp_path / "h_b"
    assert main(["train", "--preset", "hydrogen", "--run-dir", str(second), *_sets(TINY),
                 "--set", "seed=1"]) == 0
    out = tmp_path / "report"
    assert main(["report", str(second), str(trained), "--out", str(out)]) == 0
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["run"] for r in rows] == sorted([trained.name, second.name])
    for row in rows:
        src = trained if row["run"] == trained.name else second
        assert float(row["energy_mean"]) == json.loads((src / "energy.json").read_text())["mean"]
    root = ET.parse(out / "energy.svg").getroot()
    assert root.tag == "{http://www.w3.org/2000/svg}svg" and root.get("version") == "1.1"
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 2
    assert sorted(p.name for p in (out / "curves").iterdir()) == sorted(
        f"{r['run']}.csv" for r in rows)


def test_report_skips_broken_dirs(trained, tmp_path, caplog):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", str(trained), str(empty), "--out", str(tmp_path / "r")]) == 0
    with open(tmp_path / "r" / "summary.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 1
    assert "empty" in caplog.text


def test_scf_dump_integrals(tmp_path, capsys):
    dump = tmp_path / "ints.npz"
    assert main(["scf", "--preset", "h2", "--run-dir", str(tmp_path / "s"),
                 "--dump-integrals", str(dump), "--set", 'scf.basis="sto-3g"']) == 0
    msg = _json_line(capsys)
    assert msg["converged"] and abs(msg["trace_DS"] - 2) < 1e-8
    with np.load(dump) as z:
        assert int(z["format_version"]) == 1 and z["S"].shape == (2, 2) and z["eri"].shape == (2,) * 4


def test_frames_dump(tmp_path):
    dump = tmp_path / "frames.txt"
    assert main(["frames", "--preset", "lih", "--run-dir", str(tmp_path / "f"),
                 "--dump-frames", str(dump)]) == 0
    assert dump.read_text() == (tmp_path / "f" / "frames.txt").read_text()


def test_pretrain_only(tmp_path):
    out = tmp_path / "p"
    assert main(["pretrain", "--preset", "hydrogen", "--run-dir", str(out), *_sets(TINY)]) == 0
    assert (out / "pretrained.npz").is_file() and not (out / "log.csv").exists()


@pytest.mark.parametrize("argv", [
    ["train", "--preset", "hydrogen", "--set", "train.learning_rate=1"],
    ["train", "--preset", "hydrogen", "--set", "train.n_walkers=zero"],
    ["scf", "--set", 'geometry.xyz="1\\n\\nXx 0 0 0"'],
    ["evaluate", "--preset", "hydrogen", "--checkpoint", "/nonexistent/final.npz"],
])
def test_config_errors_exit_1(argv, tmp_path, capsys):
    assert main([*argv, "--run-dir", str(tmp_path / "x")]) == 1
    assert "error" in capsys.readouterr().err


def test_numeric_abort_exit_2(tmp_path, capsys):
    out = tmp_path / "abort"
    code = main(["train", "--preset", "hydrogen", "--run-dir", str(out), *_sets(TINY),
                 "--set", "train.lr0=1e250", "--set", "train.n_pretrain=0"])
    assert code == 2
    assert "numeric abort" in capsys.readouterr().err
    assert (out / "abort.npz").is_file()
    assert json.loads((out / "abort.json").read_text())["step"] >= 0
