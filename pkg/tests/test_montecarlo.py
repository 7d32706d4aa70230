import csv
import json
import math

import numpy as np
import pytest

import hfwhittle.montecarlo as mc
from hfwhittle.estimators import EstimationResult
from hfwhittle.exceptions import DomainError, HFWError, StudyError
from hfwhittle.info import Regime
from hfwhittle.models import ModelParams
from hfwhittle.montecarlo import StudyConfig, normality_diagnostics, run_study, scaled_errors
from hfwhittle.optimize import OptimizerReport


def fake_result(regime, theta, sigma, n, delta, **inter):
    rep = OptimizerReport("test", 0, 0, True, False)
    return EstimationResult(Regime.parse(regime), np.asarray(theta, float), sigma, 0.0, rep, n, delta, inter)


def small_config(**kw):
    base = dict(model="fgn", theta=[0.7], sigma=1.0, n=128, regime="all", replications=4, seed=7)
    base.update(kw)
    return StudyConfig(**base)


def test_scaled_errors_at_truth_are_zero():
    truth = ModelParams((0.7,), 1.0, 1e-3)
    for regime, inter in (("all", {}), ("h-known", {}), ("sigma-known", {"H2": 0.7})):
        r = fake_result(regime, [0.7], None if regime == "sigma-known" else 1.0, 1000, 1e-3, **inter)
        assert np.all(scaled_errors(r, truth, regime) == 0)


def test_scaled_errors_arithmetic():
    truth = ModelParams((0.7,), 1.0, 1e-4)
    r = fake_result("all", [0.71], 1.0, 10_000, 1e-4)
    assert scaled_errors(r, truth, "all")[0] == pytest.approx(1.0, rel=1e-12)
    s = fake_result("sigma-known", [0.701], None, 10_000, 1e-4, H2=0.701)
    assert scaled_errors(s, truth, "sigma-known")[0] == pytest.approx(0.001 * 100 * math.log(1e4), rel=1e-10)
    assert scaled_errors(s, truth, "sigma-known")[0] == pytest.approx(0.9210, abs=1e-4)


def test_scaled_errors_all_unknown_coordinates():
    truth = ModelParams((0.7,), 2.0, 1e-2)
    r = fake_result("all", [0.72], 2.5, 400, 1e-2)
    v = scaled_errors(r, truth, "all")
    L = math.log(100)
    assert v[1] == pytest.approx(20 * 0.5 / (2.0 * L), rel=1e-12)
    assert v[2] == pytest.approx(-20 * L * 0.02 + 20 * 0.5 / 2.0, rel=1e-12)


def test_scaled_errors_regime_mismatch():
    r = fake_result("all", [0.7], 1.0, 100, 0.01)
    with pytest.raises(DomainError):
        scaled_errors(r, ModelParams((0.7,)), "h-known")


def test_normality_calibration():
    rng = np.random.default_rng(31)
    cov = np.array([[2.0, 0.3], [0.3, 0.5]])
    ok = 0
    for _ in range(100):
        x = rng.multivariate_normal([0, 0], cov, size=200)
        ok += all(d["pvalue"] > 0.01 for d in normality_diagnostics(x, cov))
    # two coordinates at level 0.01 each keep about 98 of 100
    assert ok >= 95


def test_normality_degenerate_and_shifted():
    assert normality_diagnostics(np.ones(100), [[1.0]])[0]["pvalue"] < 1e-10
    x = np.random.default_rng(2).standard_normal(100) + 5
    assert normality_diagnostics(x, [[1.0]])[0]["pvalue"] < 1e-10
    with pytest.raises(DomainError):
        normality_diagnostics(np.zeros((49, 1)), [[1.0]])
    with pytest.raises(DomainError):
        normality_diagnostics(np.zeros((60, 1)), [[0.0]])


def test_config_validation_and_round_trip(tmp_path):
    cfg = small_config(regime="sigma-known", delta_c=2.0)
    assert cfg.regime == "SIGMA_KNOWN" and cfg.delta == 2.0 / 128
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert StudyConfig.load(p) == cfg
    for bad in (dict(replications=1), dict(n=32), dict(delta_c=200.0), dict(theta=[1.2]), dict(sigma=0.0)):
        with pytest.raises(DomainError):
            small_config(**bad)
    with pytest.raises(DomainError):
        StudyConfig.from_dict({**cfg.to_dict(), "colour": 1})


def test_two_replication_smoke():
    rep = run_study(small_config(replications=2))
    assert rep.replications_used == 2 and len(rep.rows) == 2
    assert np.array(rep.covariance).shape == (3, 3)
    assert rep.normality == []
    assert [r for r, _ in rep.rows] == [1, 2]


def test_report_structure_and_determinism():
    cfg = small_config(regime="h-known", replications=5)
    a, b = run_study(cfg), run_study(cfg)
    assert a.to_json() == b.to_json()
    cov = np.array(a.covariance)
    np.testing.assert_array_equal(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() >= -1e-12
    assert a.predicted_covariance == [[0.5]] or np.array(a.predicted_covariance).shape == (1, 1)
    other = run_study(small_config(regime="h-known", replications=5, seed=8))
    assert other.to_json() != a.to_json()


def test_parallel_matches_serial():
    cfg = small_config(replications=6)
    assert run_study(cfg, workers=2).to_json() == run_study(cfg, workers=1).to_json()


def test_failure_threshold(monkeypatch):
    real = mc.estimate

    def flaky(model, series, regime, **kw):
        if series.values[0] > 0:
            raise HFWError("synthetic failure")
        return real(model, series, regime, **kw)

    monkeypatch.setattr(mc, "estimate", flaky)
    with pytest.raises(StudyError):
        run_study(small_config(replications=20))

    calls = {"n": 0}

    def one_bad(model, series, regime, **kw):
        calls["n"] += 1
        if calls["n"] == 1:
            raise HFWError("synthetic failure")
        return real(model, series, regime, **kw)

    monkeypatch.setattr(mc, "estimate", one_bad)
    rep = run_study(small_config(replications=10))
    assert rep.replications_used == 9 and len(rep.failures) == 1
    assert rep.failures[0]["replication"] == 1


def test_boundary_sensitivity_counts():
    rep = run_study(small_config(replications=6, theta=[0.93], n=64))
    assert rep.sensitivity_excluding_boundary["replications"] == 6 - rep.boundary_count


def test_efficiency_ordering():
    rep = run_study(StudyConfig("fgn", [0.7], 1.0, 1024, "sigma-known", 40, 3))
    whittle = np.var(rep.extra_columns["whittle_H_at_log_rate"], ddof=1)
    assert rep.variance(0) < whittle


def test_write_json_and_csv(tmp_path):
    rep = run_study(small_config(replications=3, regime="sigma-known"))
    out = tmp_path / "r.json"
    rep.write(out)
    assert json.loads(out.read_text())["replications_used"] == 3
    with open(tmp_path / "r.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["replication", *rep.labels, "whittle_H_at_log_rate"]
    assert len(rows) == 4
    assert float(rows[1][1]) == rep.rows[0][1][0]
