import json

import pytest

from ribotide import cli
from ribotide.core import SolverError

SMALL = ["--n1", "5", "--n2", "10", "--n3", "5", "--sweeps", "200"]


def test_parse_fig3_defaults():
    cfg = cli.parse_config(["sweep", "--n1", "100", "--n2", "200", "--n3", "100", "--c", "0.025"])
    assert cfg.subcommand == "sweep"
    assert (cfg.n1, cfg.n2, cfg.n3, cfg.c) == (100, 200, 100, [0.025])
    assert len(cfg.rho0) == 99 and cfg.sweeps == 100_000


def test_parse_limit_request():
    cfg = cli.parse_config(["limit", "--c0", "20", "--rho0", "0.045"])
    assert cfg.c0 == 20.0 and cfg.rho0 == [0.045]


@pytest.mark.parametrize("argv,needle", [
    (["sweep", "--rho0", "1.5"], "--rho0=1.5 outside legal range (0.0, 1.0)"),
    (["sweep", "--c", "0"], "--c=0.0 outside legal range"),
    (["sweep", "--n2", "1"], "--n2=1 outside legal range [2"),
    (["limit", "--rho0", "0.5"], "--rho0=0.5 outside legal range (0.0, 0.5)"),
    (["sweep", "--bogus", "1"], "--bogus"),
    (["sweep", "--engines", "magic"], "magic"),
    (["convergence", "--n2", "100", "50"], "strictly increasing"),
    (["frobnicate"], "frobnicate"),
])
def test_usage_errors(argv, needle, capsys):
    assert cli.main(argv) == 2
    assert needle in capsys.readouterr().err


def test_config_file_and_override(tmp_path):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"c": 0.05, "rho0": [0.2, 0.3], "n2": 50, "output-dir": "x"}))
    cfg = cli.parse_config(["profile", "--config", str(conf), "--c", "0.07"])
    assert cfg.c == 0.07 and cfg.rho0 == [0.2, 0.3] and cfg.n2 == 50 and cfg.output_dir == "x"


@pytest.mark.parametrize("payload,needle", [
    ({"colour": 1}, "unknown config key 'colour'"),
    ({"n1": 2.5}, "must be an integer"),
    ({"c": "high"}, "must be a number"),
    ([1, 2], "JSON object"),
])
def test_bad_config(tmp_path, payload, needle, capsys):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps(payload))
    assert cli.main(["profile", "--config", str(conf)]) == 2
    assert needle in capsys.readouterr().err


def test_missing_config(tmp_path, capsys):
    assert cli.main(["profile", "--config", str(tmp_path / "nope.json")]) == 2


def test_format_float():
    assert cli.format_float(0.1) == "0.10000000000000001"
    assert cli.format_float(None) == "NA"
    assert cli.format_float(float("nan")) == "NA"
    assert cli.format_float(50) == "50"
    assert float(cli.format_float(1 / 3)) == 1 / 3


def test_sweep_csv(tmp_path, capsys):
    code = cli.main(["sweep", *SMALL, "--rho0", "0.2", "0.6", "--c", "0.1",
                     "--output-dir", str(tmp_path), "--threads", "2"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("sweep: wrote 2 rows") and out.count("\n") == 1
    raw = (tmp_path / "exit_flow.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "rho0,c,j3_tasep,se_tasep,j3_det,j3_limit"
    assert lines[1].startswith("0.20000000000000001,0.10000000000000001,")
    assert lines[2].endswith(",NA")
    assert not list(tmp_path.glob(".tmp-*"))


def test_sweep_json(tmp_path):
    assert cli.main(["sweep", *SMALL, "--rho0", "0.2", "0.6", "--c", "0.1", "--format", "json",
                     "--output-dir", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "exit_flow.json").read_text())
    assert list(rows[0]) == ["rho0", "c", "j3_tasep", "se_tasep", "j3_det", "j3_limit"]
    assert rows[1]["j3_limit"] is None and rows[0]["rho0"] == 0.2


def test_profile_and_convergence_files(tmp_path):
    assert cli.main(["profile", "--n1", "5", "--n2", "10", "--n3", "5", "--rho0", "0.3",
                     "--output-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "profile_rho0=0.3.csv").read_text().splitlines()
    assert lines[0] == "n,rho_s,rho_e,flow_s" and len(lines) == 21 and lines[1].startswith("0,")
    assert (tmp_path / "limit_profile_rho0=0.3.csv").exists()
    assert cli.main(["convergence", "--n2", "50", "100", "--rho0", "0.05", "0.1",
                     "--output-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "convergence.csv").read_text().splitlines()
    assert lines[0] == "n2,sup_error" and lines[1].startswith("50,") and len(lines) == 3


def test_tasep_and_limit_files(tmp_path, capsys):
    assert cli.main(["tasep", *SMALL, "--rho0", "0.2", "0.4", "--output-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "tasep_flow.csv").read_text().splitlines()
    assert lines[0] == "rho0,c,j3_tasep,se_tasep" and len(lines) == 3
    assert cli.main(["limit", "--c0", "20", "--rho0", "0.045", "--output-dir", str(tmp_path)]) == 0
    assert "j3_limit(rho0=0.045, c0=20.0) = 0.0170" in capsys.readouterr().out
    assert (tmp_path / "limit.csv").read_text().splitlines()[0] == "rho0,c0,j3_limit,peak_rho0"


def test_io_failure(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["limit", "--output-dir", str(blocker / "sub")]) == 4
    assert "cannot write output" in capsys.readouterr().err


def test_solver_failure(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise SolverError("forced failure")

    monkeypatch.setattr(cli, "flow_curve", boom)
    assert cli.main(["tasep", *SMALL, "--rho0", "0.2", "--output-dir", str(tmp_path)]) == 3
    assert "forced failure" in capsys.readouterr().err


def test_row_errors_give_solver_status(tmp_path, monkeypatch):
    from ribotide import experiments as ex

    monkeypatch.setattr(ex, "deterministic_exit_flow", lambda p, g: (_ for _ in ()).throw(SolverError("x")))
    code = cli.main(["sweep", *SMALL, "--rho0", "0.2", "--c", "0.1", "--engines", "deterministic",
                     "--output-dir", str(tmp_path)])
    assert code == 3
    assert (tmp_path / "exit_flow.csv").read_text().splitlines()[1].endswith(",NA,NA,NA,NA")


def test_threads_env(monkeypatch):
    from ribotide.parallel import worker_count

    monkeypatch.setenv("RIBOTIDE_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(5) == 5
    monkeypatch.setenv("RIBOTIDE_THREADS", "zero")
    with pytest.raises(ValueError):
        worker_count()
