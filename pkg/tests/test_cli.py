import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from khmlab import pipeline
from khmlab.cli import EXIT_CONFIG, EXIT_GATE, EXIT_OK, main
from khmlab.config import ENV_VAR, SCHEMA, Config, load_config, parse_text
from khmlab.grid import ConfigurationError


def test_defaults_validate():
    cfg = load_config("default")
    assert cfg["kernel.profile"] == "bump"
    assert set(cfg.values) == set(SCHEMA)


def test_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nkernel.epsilon = 0.25\nsolver.model = hallmhd  # trailing\n")
    cfg = load_config(str(p), ["kernel.epsilon=0.75"])
    assert cfg["kernel.epsilon"] == 0.75 and cfg["solver.model"] == "hallmhd"


def test_env_var(tmp_path, monkeypatch):
    p = tmp_path / "env.cfg"
    p.write_text("ic.seed = 9\n")
    monkeypatch.setenv(ENV_VAR, str(p))
    assert load_config()["ic.seed"] == 9


@pytest.mark.parametrize(
    "pairs",
    [{"no.such": "1"}, {"grid.n": "9"}, {"kernel.epsilon": "-1"}, {"kernel.profile": "box"}, {"ic.seed": "x"}, {"scan.lambda_min": "2", "scan.lambda_max": "1"}, {"scan.include_hl": "maybe"}],
)
def test_invalid_values(pairs):
    with pytest.raises(ConfigurationError):
        Config().updated(pairs)


def test_bad_lines():
    with pytest.raises(ConfigurationError):
        parse_text("just words\n")
    with pytest.raises(ConfigurationError):
        parse_text("a.b = 1\na.b = 2\n")


@pytest.mark.parametrize("word, value", [("true", True), ("Off", False), ("1", True), ("no", False)])
def test_boolean_keys(word, value):
    assert Config().updated({"scan.include_hl": word})["scan.include_hl"] is value


@given(st.floats(0.01, 10), st.integers(0, 10_000), st.booleans())
def test_dump_roundtrip(eps, seed, flag):
    cfg = Config().updated({"kernel.epsilon": eps, "ic.seed": seed, "scan.include_hl": flag})
    again = Config().updated(parse_text(cfg.dumps()))
    assert again.values == cfg.values
    assert again.digest() == cfg.digest()


def test_cli_invalid_config_exit_code(tmp_path, capsys):
    assert main(["verify-constants", "--config", "default", "--set", "bogus.key=1", "--output", str(tmp_path)]) == EXIT_CONFIG
    assert "bogus.key" in capsys.readouterr().err


def test_verify_constants_cli(tmp_path):
    assert main(["verify-constants", "--config", "default", "--output", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "verify_constants_report.json").read_text())
    entries = rep["kernels"]["bump"]["entries"]
    assert entries["T_route"]["expected"] == -15 / 8
    assert entries["L_route"]["expected"] == -9 / 4
    assert entries["eliminated_S_EL_bar"]["expected"] == -5 / 4
    assert pipeline.verify_manifest(tmp_path) == []


def test_tolerance_failure_exit_code(tmp_path):
    assert main(["verify-constants", "--set", "tolerances.constants=1e-30", "--output", str(tmp_path)]) == EXIT_GATE


def test_simulate_abc_flat_ledger(tmp_path):
    out = tmp_path / "abc"
    args = ["simulate", "--set", "solver.model=emhd", "--set", "ic.kind=abc", "--set", "grid.n=16",
            "--set", "solver.t_end=0.05", "--set", "solver.snapshot_interval=0.025", "--output", str(out), "--deterministic"]
    assert main(args) == EXIT_OK
    led = pipeline.load_ledger(out)
    assert max(led.E) - min(led.E) <= 1e-14
    assert max(led.H_M) - min(led.H_M) <= 1e-14
    assert len(pipeline.load_states(out)) == 3
    assert (out / "config.resolved").read_text().count("=") == len(SCHEMA)
    # manifest checksums detect tampering
    (out / "ledger.csv").write_text("t,E\n")
    assert pipeline.verify_manifest(out) == ["ledger.csv"]


def _simulate(out, extra=()):
    args = ["simulate", "--set", "solver.model=hallmhd", "--set", "grid.n=16", "--set", "ic.kmax=2",
            "--set", "solver.t_end=0.02", "--set", "solver.dt=0.005", "--set", "solver.snapshot_interval=0.01",
            "--set", "solver.eta=0.01", "--set", "solver.nu=0.01", "--output", str(out), "--deterministic", *extra]
    return main(args)


def test_estimate_is_deterministic_and_resumable(tmp_path):
    run_dir = tmp_path / "run"
    assert _simulate(run_dir) == EXIT_OK
    outs = []
    for name in ("e1", "e2"):
        o = tmp_path / name
        rc = main(["estimate", "--input", str(run_dir), "--output", str(o), "--set", "quad.directions=16",
                   "--set", "scan.lambda_min=0.5", "--set", "scan.lambda_max=1.0", "--set", "scan.count=2",
                   "--set", "kernel.epsilon=1.0", "--set", "audit.directions=4", "--deterministic"])
        assert rc == EXIT_OK
        outs.append(o)
    a = (outs[0] / "shells_0000.csv").read_bytes()
    assert a == (outs[1] / "shells_0000.csv").read_bytes()
    assert a.splitlines()[0] == b"lambda,direction_count,value,estimator_name"


def test_scan_laws_and_report(tmp_path):
    run_dir = tmp_path / "run"
    assert _simulate(run_dir) == EXIT_OK
    rc = main(["scan-laws", "--input", str(run_dir), "--output", str(run_dir), "--set", "quad.directions=16",
               "--set", "scan.lambda_min=0.5", "--set", "scan.lambda_max=1.5", "--set", "scan.count=3"])
    # a 16^3 run this short has no inertial range: the gate fails, but the outputs exist
    assert rc == EXIT_GATE
    plateau = json.loads((run_dir / "plateau.json").read_text())
    assert len(plateau["lambdas"]) == 3
    assert (run_dir / "laws.csv").read_text().startswith("lambda,t,model,S_EL")
    assert main(["report", "--input", str(run_dir), "--output", str(run_dir)]) == EXIT_GATE
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["tasks"]["simulate_report.json"]["pass"] is True
    assert summary["tasks"]["scan_laws_report.json"]["pass"] is False


def test_missing_inputs(tmp_path):
    assert main(["scan-laws", "--input", str(tmp_path / "nothing"), "--output", str(tmp_path)]) == EXIT_CONFIG
    assert main(["report", "--input", str(tmp_path / "nothing"), "--output", str(tmp_path)]) == EXIT_CONFIG


def test_audit_cli(tmp_path):
    rc = main(["audit-khm", "--set", "grid.n=16", "--set", "kernel.epsilon=1.0", "--set", "audit.directions=6",
               "--set", "quad.radial_nodes=24", "--set", "ic.kmax=2", "--output", str(tmp_path)])
    assert rc == EXIT_OK
    rep = json.loads((tmp_path / "audit_khm_report.json").read_text())
    assert set(rep["audits"]) == {"energy-L", "energy-T", "helicity-L", "helicity-T"}
