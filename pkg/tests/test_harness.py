import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from boltzgrad.cli import main
from boltzgrad.harness import (CSV_COLUMNS, EXPERIMENTS, ConfigError, ConvergenceRecord,
                               ExperimentConfig, Row, Verdict, emit_results, run_experiment)

ZEROTH = """
[experiment]
name = zeroth
d = 2
radii = 0.2, 0.1

[verdict]
abs_tol = 1e-6, 1e-8
"""


def test_bundled_configs_load():
    for name in EXPERIMENTS:
        cfg = ExperimentConfig.bundled(name)
        assert cfg.name == name
    with pytest.raises(ConfigError):
        ExperimentConfig.bundled("nonsense")


@pytest.mark.parametrize("text", [
    ZEROTH + "\n[plotting]\ncolor = red\n",
    ZEROTH.replace("d = 2", "d = 2\ndimension = 3"),
    ZEROTH.replace("d = 2", "d = 4"),
    ZEROTH.replace("radii = 0.2, 0.1", "radii = 0.2, 1.5"),
    ZEROTH.replace("radii = 0.2, 0.1", "radii = 0.2, fast"),
    ZEROTH.replace("name = zeroth", "name = fourth-order"),
    ZEROTH + "\n[alpha]\nmode = random\n",
    ZEROTH + "\n[alpha]\nmode = explicit\nvector = 0.1\n",
    ZEROTH + "\n[numerics]\neps = 0.01\n",
    "[verdict]\nrel_tol = 0.1\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_ini(text)


def test_emit_empty_and_small_records(tmp_path):
    rec = ConvergenceRecord("zeroth", 2)
    path, spath = emit_results(rec, out_dir=tmp_path)
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"
    assert json.loads(spath.read_text())["passed"] is False
    rec.rows = [Row(0.1, "preset", 0.25 + 0j, 0.25 + 0j, 0.0, 0.0, 1e-18, 3.0),
                Row(0.2, "preset", 0.26 + 0j, 0.25 + 0j, 0.01, 0.04, 1e-18, 2.0)]
    rec.verdicts["x"] = Verdict(True, 0.01, "<= 1")
    path, _ = emit_results(rec, out_dir=tmp_path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    # rows come out in decreasing r; seconds are zeroed without timing
    rows = list(csv.DictReader(lines))
    assert [float(w["r"]) for w in rows] == [0.2, 0.1]
    assert all(float(w["seconds"]) == 0 for w in rows)
    path, _ = emit_results(rec, fmt="json-lines", out_dir=tmp_path)
    first = json.loads(path.read_text().splitlines()[0])
    assert set(first) == set(CSV_COLUMNS)


def test_zeroth_run_is_deterministic(tmp_path):
    cfg = ExperimentConfig.from_ini(ZEROTH)
    rec = run_experiment(cfg)
    assert rec.passed
    assert [w.r for w in rec.rows] == [0.2, 0.1]
    a = [p.read_bytes() for p in emit_results(rec, out_dir=tmp_path / "a")]
    b = [p.read_bytes() for p in emit_results(run_experiment(cfg), out_dir=tmp_path / "b")]
    assert a == b
    rec2 = run_experiment(replace(cfg, threads=2))
    for w1, w2 in zip(rec.rows, rec2.rows):
        assert abs(w1.value - w2.value) <= 1e-13


def test_random_alpha_is_seeded():
    cfg = ExperimentConfig.from_ini(ZEROTH + "\n[alpha]\nmode = random\ncount = 3\nseed = 7\n")
    from boltzgrad.harness import alphas
    a1, a2 = alphas(cfg), alphas(cfg)
    assert [k for k, _ in a1] == ["mc-000", "mc-001", "mc-002"]
    np.testing.assert_array_equal(np.array([v for _, v in a1]), np.array([v for _, v in a2]))


def test_rational_alpha_is_excluded():
    cfg = ExperimentConfig.from_ini("""
[experiment]
name = theta-mean
d = 2
radii = 0.5

[alpha]
mode = explicit
vector = 0.5, 0.25

[verdict]
monotone = true
final_rel_tol = 0.15
""")
    rec = run_experiment(cfg)
    assert set(rec.verdicts) == {"excluded"}
    assert rec.verdicts["excluded"].passed is None
    assert "excluded input" in rec.verdicts["excluded"].note


def test_cli_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in EXPERIMENTS:
        assert name in out


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nname = zeroth\nd = 7\n")
    assert main(["zeroth", "--config", str(bad)]) == 2
    assert main(["zeroth", "--config", str(tmp_path / "missing.ini")]) == 2
    good = tmp_path / "z.ini"
    good.write_text(ZEROTH)
    assert main(["first-cancel", "--config", str(good)]) == 2
    assert main(["zeroth", "--config", str(good), "--out", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "PASS  zeroth/r=0.1" in out
    assert (tmp_path / "out" / "zeroth.csv").exists()
    strict = tmp_path / "strict.ini"
    strict.write_text(ZEROTH.replace("abs_tol = 1e-6, 1e-8", "abs_tol = 1e-30, 1e-30"))
    assert main(["zeroth", "--config", str(strict), "--out", str(tmp_path / "out2")]) == 1
