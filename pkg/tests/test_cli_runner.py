import json
import math

import numpy as np
import pytest

from pantolab import cli, runner, verify
from pantolab.diagnostics import CONVERGES_TO_ZERO, UNBOUNDED
from pantolab.errors import ConfigError, UsageError
from pantolab.history import DenseSolution

DET = {"kind": "DetPantograph", "params": {"a": 0.5, "b": -1, "q": 0.5}, "forcing": {"kind": "zero"},
       "x0": 1.0, "grid": {"kind": "log", "t_end": 1e4},
       "diagnostics": {"estimate_exponent": {"window": [100, 10000]}}}

STOCH = {"kind": "StochPantograph", "params": {"a": 0.5, "b": -1, "q": 0.5},
         "noise": {"kind": "exponential", "C": 1, "rate": -1}, "grid": {"h": 0.01, "t_end": 100},
         "paths": 100, "x0": 1.0, "seed": 42}


def write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_det_pantograph_end_to_end(tmp_path):
    rep = runner.run_simulate(runner.parse_config(DET), tmp_path)
    sol = DenseSolution.from_csv(rep.csv_paths[0])
    assert sol.domain[1] >= 1e4
    rates = rep.diagnostics["rate_estimates"]
    assert rates[0]["exponent"] == pytest.approx(-1.0, abs=0.1)
    saved = json.loads((tmp_path / "detpantograph_report.json").read_text())
    assert saved["config"]["kind"] == "DetPantograph"


def test_invalid_q_names_field():
    cfg = dict(DET, params={"a": 0.5, "b": -1, "q": 1.5})
    with pytest.raises(ConfigError) as err:
        runner.parse_config(cfg)
    assert err.value.field == "params.q"


def test_config_errors_carry_paths():
    with pytest.raises(ConfigError) as err:
        runner.parse_config(dict(DET, grid={"kind": "uniform", "t_end": 1}))
    assert err.value.field == "grid.h"
    with pytest.raises(ConfigError) as err:
        runner.parse_config(dict(DET, kind="Nope"))
    assert err.value.field == "kind"


def test_aux_only_closed_form(tmp_path):
    cfg = {"kind": "AuxOnly", "forcing": {"kind": "constant", "c": 1}, "grid": {"h": 0.01, "t_end": 2}}
    rep = runner.run_simulate(runner.parse_config(cfg), tmp_path)
    y = DenseSolution.from_csv(rep.csv_paths[0])
    assert y(1.0) == pytest.approx(1 - math.exp(-1), abs=1e-10)


def test_stochastic_kinds_require_a_seed(monkeypatch):
    monkeypatch.delenv(runner.SEED_ENV, raising=False)
    cfg = {k: v for k, v in STOCH.items() if k != "seed"}
    with pytest.raises(ConfigError) as err:
        runner.parse_config(cfg)
    assert err.value.field == "seed"


def test_seed_priority(monkeypatch):
    monkeypatch.setenv(runner.SEED_ENV, "7")
    assert runner.resolve_seed(None, None) == 7
    assert runner.resolve_seed(3, None) == 3
    assert runner.resolve_seed(3, 5) == 5


def test_ensemble_exponential_noise_converges(tmp_path):
    rep = runner.run_ensemble(runner.parse_config(STOCH), tmp_path, threads=2)
    assert rep.summary["tally"].get(CONVERGES_TO_ZERO, 0) >= 95


@pytest.mark.xfail(strict=True, reason="the stationary noise-driven state grows only like sqrt(log t); "
                   "the factor-2 window growth of the Unbounded verdict is not reached at this horizon")
def test_ensemble_constant_noise_unbounded(tmp_path):
    cfg = dict(STOCH, noise={"kind": "constant", "c": 1})
    rep = runner.run_ensemble(runner.parse_config(cfg), tmp_path)
    assert rep.summary["tally"].get(UNBOUNDED, 0) >= 80


def test_single_path_ensemble_equals_simulate(tmp_path):
    cfg = runner.parse_config(dict(STOCH, paths=1, seed=5))
    runner.run_ensemble(cfg, tmp_path / "e")
    runner.run_simulate(cfg, tmp_path / "s")
    q = np.loadtxt(tmp_path / "e" / "stochpantograph_quantiles.csv", delimiter=",", skiprows=1)
    x = np.loadtxt(tmp_path / "s" / "stochpantograph.csv", delimiter=",", skiprows=1)
    assert np.array_equal(q[:, 3], x[:, 1])


def test_ensemble_independent_of_thread_count(tmp_path):
    cfg = runner.parse_config(dict(STOCH, paths=12, grid={"h": 0.01, "t_end": 20}))
    runner.run_ensemble(cfg, tmp_path / "one", threads=1)
    runner.run_ensemble(cfg, tmp_path / "four", threads=4)
    a = (tmp_path / "one" / "stochpantograph_quantiles.csv").read_bytes()
    b = (tmp_path / "four" / "stochpantograph_quantiles.csv").read_bytes()
    assert a == b


def test_construct_table(tmp_path):
    spec = {"z": {"kind": "pure_power", "D": 1, "kappa": -1}, "params": {"a": 0.5, "b": -1, "q": 0.5},
            "t": [1, 10], "points": 11}
    res = runner.run_construct(spec, tmp_path)
    data = np.loadtxt(res["csv"], delimiter=",", skiprows=1)
    assert np.allclose(data[:, 1], -data[:, 0] ** -2.0)
    assert np.allclose(data[:, 2], 1 / data[:, 0])


def test_diagnose_csv(tmp_path):
    t = np.geomspace(1, 1e4, 2000)
    path = tmp_path / "x.csv"
    DenseSolution.from_arrays(t, 1 / t).to_csv(path)
    rep = runner.run_diagnose(str(path), {"estimate_exponent": {"window": [10, 1e4]}, "classify_limit": {}},
                              tmp_path, kappa_value=-1.0)
    assert rep["rate_estimates"][0]["exponent"] == pytest.approx(-1.0, abs=0.01)
    assert rep["kappa"] == -1.0


def test_verify_unknown_suite():
    with pytest.raises(UsageError):
        verify.run_verify("nosuch")


def test_verify_solver_core_passes():
    rep = verify.run_verify("solver_core")
    assert rep.passed


def test_verify_stochastic_table_is_deterministic():
    a = verify.report_json(verify.run_verify("stochastic_stability", 42))
    b = verify.report_json(verify.run_verify("stochastic_stability", 42))
    assert a == b


def test_cli_exit_codes(tmp_path, capsys):
    good = write(tmp_path, "det.json", DET)
    bad = write(tmp_path, "bad.json", dict(DET, params={"a": 0.5, "b": -1, "q": 1.5}))
    assert cli.main(["simulate", "--config", good, "--out", str(tmp_path / "o")]) == 0
    assert cli.main(["simulate", "--config", bad]) == 2
    assert "params.q" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["verify", "nosuch"]) == 2
    assert cli.main(["verify", "solver_core"]) == 0
    assert cli.main(["verify", "deterministic_asymptotics"]) == 4


def test_cli_numeric_failure_exit_code(tmp_path):
    cfg = dict(STOCH, params={"a": 0.5, "b": -100, "q": 0.5}, paths=2)
    assert cli.main(["simulate", "--config", write(tmp_path, "c.json", cfg), "--out", str(tmp_path)]) == 3


def test_failed_diagnostic_is_recorded_not_fatal(tmp_path):
    cfg = dict(DET, grid={"kind": "log", "t_end": 100}, diagnostics={"estimate_exponent": {"window": [10, 50]}})
    rep = runner.run_simulate(runner.parse_config(cfg), tmp_path)
    assert "WindowTooShort" in rep.diagnostics["errors"]["estimate_exponent"]


def test_cli_seed_flag_overrides_config(tmp_path):
    cfg = write(tmp_path, "s.json", dict(STOCH, paths=3, grid={"h": 0.01, "t_end": 5}))
    assert cli.main(["ensemble", "--config", cfg, "--seed", "9", "--out", str(tmp_path / "a")]) == 0
    alt = write(tmp_path, "t.json", dict(STOCH, paths=3, grid={"h": 0.01, "t_end": 5}, seed=9))
    assert cli.main(["ensemble", "--config", alt, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "stochpantograph_quantiles.csv").read_bytes()
    b = (tmp_path / "b" / "stochpantograph_quantiles.csv").read_bytes()
    assert a == b
