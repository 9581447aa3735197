"""Experiment configs, CSV format, and the command-line wrapper."""

import pytest

from skorochaos import ExperimentConfig, run_experiment
from skorochaos.cli import main, read_config_file
from skorochaos.experiments import format_value

TINY = {
    "geometry": dict(M=2, samples=200, seed=5),
    "isometry": dict(N=8, L=2, paths=3000, seed=5),
    "martingale": dict(N=8, seed=5),
    "theorem1": dict(N=16, depth=4, seed=5),
    "ducnualart": dict(N=8, seed=5),
    "reversal": dict(N=8, paths=600, seed=5, t=0.25, n=2),
    "stopping": dict(N=8, paths=600, seed=5),
}


@pytest.mark.parametrize("name", sorted(TINY))
def test_each_experiment_passes_at_small_size(name):
    cfg = ExperimentConfig(experiment=name, **TINY[name])
    res = run_experiment(cfg)
    assert res.ok, res.failures
    assert res.rows
    for row in res.rows:
        assert len(row) == len(res.columns)


def test_csv_echo_includes_seed_and_trailing_newline():
    cfg = ExperimentConfig(experiment="theorem1", N=16, depth=4, seed=9, workers=3)
    res = run_experiment(cfg)
    text = res.csv_text()
    assert text.endswith("\n")
    lines = text.splitlines()
    echo = [l for l in lines if l.startswith("# ")]
    assert "# experiment=theorem1" in echo
    assert "# seed=9" in echo
    assert not any(l.startswith("# workers") or l.startswith("# out") for l in echo)
    assert lines[len(echo)] == "depth,vhat,sobolev_bound"
    assert len(lines) == len(echo) + 1 + len(res.rows)


def test_format_value_round_trips_floats():
    for x in (0.1, 1.0 / 3.0, 1e-300, 123456789.123456789, -2.5e17):
        assert float(format_value(x)) == x
    assert format_value(True) == "true"
    assert format_value(False) == "false"
    assert format_value(42) == "42"


@pytest.mark.parametrize(
    "overrides",
    [
        dict(experiment="nonsense"),
        dict(N=7),
        dict(N=6),
        dict(experiment="isometry", N=128),
        dict(L=5),
        dict(paths=1),
        dict(N=8, depth=5),
        dict(M=0),
        dict(M=7),
        dict(n=4),
        dict(samples=0),
        dict(workers=0),
    ],
)
def test_config_validation_rejects(overrides):
    base = dict(experiment="martingale", N=8)
    base.update(overrides)
    with pytest.raises(ValueError):
        ExperimentConfig(**base).validate()


def test_reversal_may_exceed_kernel_cell_cap():
    ExperimentConfig(experiment="reversal", N=128).validate()


def test_read_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# a comment\n\nN = 8\nseed=3\n")
    assert read_config_file(str(p)) == {"N": "8", "seed": "3"}
    bad = tmp_path / "bad.cfg"
    bad.write_text("N 8\n")
    with pytest.raises(ValueError):
        read_config_file(str(bad))


def test_cli_flag_overrides_config_file(tmp_path, capsys):
    p = tmp_path / "run.cfg"
    p.write_text("N=16\nseed=3\n")
    rc = main(["martingale", "--config", str(p), "--N", "8"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "# N=8" in out
    assert "# seed=3" in out


def test_cli_rejects_unknown_config_key(tmp_path, capsys):
    p = tmp_path / "run.cfg"
    p.write_text("bogus=1\n")
    assert main(["martingale", "--config", str(p)]) == 2
    p.write_text("experiment=stopping\n")
    assert main(["martingale", "--config", str(p)]) == 2


def test_cli_invalid_value_exits_2(capsys):
    assert main(["martingale", "--N", "7"]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_writes_out_file(tmp_path, capsys):
    dest = tmp_path / "table.csv"
    rc = main(["martingale", "--N", "8", "--out", str(dest)])
    captured = capsys.readouterr()
    assert rc == 0
    assert captured.out == ""
    assert "martingale: pass" in captured.err
    text = dest.read_text()
    assert text.startswith("# experiment=martingale")
    assert text.endswith("\n")


def test_cli_reports_failures(monkeypatch, capsys):
    from skorochaos import experiments as exp

    def failing(cfg):
        res = exp.ExperimentResult(cfg, ("a",))
        res.rows.append((1,))
        res.failures.append("synthetic failure for the exit path")
        return res

    monkeypatch.setitem(exp.EXPERIMENTS, "martingale", failing)
    rc = main(["martingale", "--N", "8"])
    err = capsys.readouterr().err
    assert rc == 1
    assert "FAIL: synthetic failure" in err
    assert "martingale: FAIL (1 rows)" in err


@pytest.mark.parametrize("name", ["isometry", "reversal", "stopping"])
def test_worker_count_never_changes_output(name):
    kw = dict(TINY[name])
    one = ExperimentConfig(experiment=name, workers=1, **kw)
    four = ExperimentConfig(experiment=name, workers=4, **kw)
    assert run_experiment(one).csv_text() == run_experiment(four).csv_text()
