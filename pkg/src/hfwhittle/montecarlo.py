"""
Seeded replication studies for the limit theorems of the Whittle estimators.

A study simulates R paths, estimates under one knowledge regime, scales the
errors at the efficient rates and compares their empirical law with the
predicted normal limit.  Replication ``r`` (1-based) draws from
``SeedSequence(seed, spawn_key=(r,))`` so every row can be regenerated on
its own and the report does not depend on execution order.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from ._json import jsonable
from .estimators import EstimationResult, estimate
from .exceptions import DomainError, HFWError, StudyError
from .info import Regime, predict_asymptotics
from .models import ModelParams, get_model
from .sampling import sample_path

MAX_FAILURE_FRACTION = 0.2
MIN_KS_SAMPLES = 50


@dataclass
class StudyConfig:
    """
    Parameters of a replication study.

    ``delta_c`` ties the sampling interval to the length, delta = delta_c / n.
    """

    model: str
    theta: list
    sigma: float
    n: int
    regime: str
    replications: int
    seed: int
    delta_c: float = 1.0
    output: str | None = None

    def __post_init__(self):
        self.theta = [float(t) for t in np.atleast_1d(self.theta)]
        self.regime = Regime.parse(self.regime).value
        get_model(self.model).check_theta(self.theta)
        if self.replications < 2:
            raise DomainError("a study needs at least 2 replications")
        if self.n < 64:
            raise DomainError("a study needs n >= 64")
        if not 0 < self.delta < 1:
            raise DomainError(f"delta rule gives delta={self.delta}, outside (0, 1)")
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")

    @property
    def delta(self) -> float:
        return self.delta_c / self.n

    @property
    def params(self) -> ModelParams:
        return ModelParams(tuple(self.theta), self.sigma, self.delta)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        extra = set(d) - set(known)
        if extra:
            raise DomainError(f"unknown study config keys: {sorted(extra)}")
        return cls(**known)

    @classmethod
    def load(cls, path) -> "StudyConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def scaled_errors(result: EstimationResult, truth: ModelParams, regime) -> np.ndarray:
    """
    Rate-scaled estimation errors.

    H_KNOWN: (sqrt(N)(psi_bar - psi), sqrt(N)(sigma_bar - sigma)).
    ALL_UNKNOWN: (sqrt(N)(theta_hat - theta), sqrt(N)(sigma_hat - sigma)/(sigma|log delta|),
    sqrt(N) log(delta)(H_hat - H) + sqrt(N)(sigma_hat - sigma)/sigma).
    SIGMA_KNOWN: (sqrt(N)(psi_hat - psi), sqrt(N)|log delta|(H2 - H)), H2 before clamping.
    """
    regime = Regime.parse(regime)
    if result.regime is not regime:
        raise DomainError(f"result is {result.regime.value}, asked for {regime.value}")
    rn = math.sqrt(result.n)
    theta0 = np.asarray(truth.theta, dtype=float)
    err = result.theta_hat - theta0
    if regime is Regime.H_KNOWN:
        return np.append(rn * err[:-1], rn * (result.sigma_hat - truth.sigma))
    if regime is Regime.ALL_UNKNOWN:
        logd = math.log(result.delta)
        ds = rn * (result.sigma_hat - truth.sigma) / truth.sigma
        aux = rn * logd * err[-1] + ds
        return np.concatenate([rn * err, [ds / abs(logd), aux]])
    ld = abs(math.log(result.delta))
    h2 = result.intermediates["H2"]
    return np.append(rn * err[:-1], rn * ld * (h2 - theta0[-1]))


def normality_diagnostics(samples, predicted_cov) -> list[dict]:
    """KS test of each coordinate, standardized by the predicted SD, against N(0, 1)."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < MIN_KS_SAMPLES:
        raise DomainError(f"normality diagnostics need >= {MIN_KS_SAMPLES} samples")
    var = np.diag(np.atleast_2d(predicted_cov))
    if var.size != x.shape[1]:
        raise DomainError("predicted covariance does not match the sample dimension")
    if np.any(var <= 0):
        raise DomainError("predicted variance must be positive")
    out = []
    for j in range(x.shape[1]):
        res = stats.kstest(x[:, j] / math.sqrt(var[j]), "norm")
        out.append({"statistic": float(res.statistic), "pvalue": float(res.pvalue)})
    return out


def _replicate(config: StudyConfig, r: int):
    """One replication: (r, scaled errors, extra columns, boundary flag) or (r, error message)."""
    model = get_model(config.model)
    regime = Regime(config.regime)
    truth = config.params
    try:
        series = sample_path(model, truth, config.n, config.seed, replication=r)
        res = estimate(model, series, regime, H0=truth.H, sigma0=truth.sigma)
        row = scaled_errors(res, truth, regime)
    except HFWError as exc:
        return r, f"{type(exc).__name__}: {exc}"
    extra = {}
    if regime is Regime.SIGMA_KNOWN:
        ld = abs(math.log(config.delta))
        extra["whittle_H_at_log_rate"] = math.sqrt(config.n) * ld * (res.intermediates["H_whittle"] - truth.H)
    if regime is Regime.ALL_UNKNOWN:
        extra["sigma_at_sqrt_n"] = math.sqrt(config.n) * (res.sigma_hat - truth.sigma)
    return r, row, extra, bool(res.optimizer_report.at_boundary)


def _replicate_star(args):
    return _replicate(*args)


def _worker_count() -> int:
    try:
        cap = int(os.environ.get("HFW_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, os.cpu_count() or 1))


def _moments(rows: np.ndarray) -> tuple[list, list]:
    if rows.shape[0] == 0:
        return [], []
    mean = rows.mean(axis=0)
    cov = np.atleast_2d(np.cov(rows, rowvar=False, ddof=1)) if rows.shape[0] > 1 else np.zeros((rows.shape[1],) * 2)
    cov = 0.5 * (cov + cov.T)
    return mean.tolist(), cov.tolist()


@dataclass
class StudyReport:
    config: dict
    labels: list
    rows: list
    replications_used: int
    failures: list
    boundary_count: int
    mean: list
    covariance: list
    predicted_covariance: list
    relative_deviation: list
    normality: list
    sensitivity_excluding_boundary: dict
    extra_columns: dict
    diagnostics: dict

    def variance(self, j: int) -> float:
        return self.covariance[j][j]

    def to_dict(self) -> dict:
        return jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def write(self, path, csv_path=None) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")
        if csv_path is None:
            root, _ = os.path.splitext(str(path))
            csv_path = root + ".csv"
        self.write_csv(csv_path)

    def write_csv(self, path) -> None:
        cols = list(self.extra_columns)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replication", *self.labels, *cols])
            for i, (r, row) in enumerate(self.rows):
                w.writerow([r, *(repr(float(v)) for v in row),
                            *(repr(float(self.extra_columns[c][i])) for c in cols)])


def _predicted_for_study(config: StudyConfig):
    pred = predict_asymptotics(config.model, config.theta, config.sigma, config.regime)
    if pred.regime is Regime.ALL_UNKNOWN:
        return pred, pred.extras["scaled_error_labels"], np.asarray(pred.extras["scaled_error_covariance"])
    if pred.regime is Regime.SIGMA_KNOWN:
        return pred, list(pred.rate_labels), np.asarray(pred.extras["estimator_covariance"])
    return pred, list(pred.rate_labels), np.asarray(pred.covariance)


def run_study(config: StudyConfig, workers: int | None = None) -> StudyReport:
    """
    Simulate, estimate and rate-scale ``config.replications`` replications.

    Failed replications are recorded and skipped; more than 20% failures
    raises ``StudyError``.  Boundary hits are kept and counted, and the
    moments are also reported without them.
    """
    pred, labels, pcov = _predicted_for_study(config)
    reps = range(1, config.replications + 1)
    workers = _worker_count() if workers is None else max(1, int(workers))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outcomes = list(ex.map(_replicate_star, [(config, r) for r in reps], chunksize=8))
    else:
        outcomes = [_replicate(config, r) for r in reps]
    outcomes.sort(key=lambda o: o[0])

    failures = [{"replication": o[0], "error": o[1]} for o in outcomes if len(o) == 2]
    good = [o for o in outcomes if len(o) == 4]
    if len(failures) > MAX_FAILURE_FRACTION * config.replications:
        raise StudyError(f"{len(failures)} of {config.replications} replications failed; "
                         f"first: {failures[0]['error']}")
    rows = np.array([o[1] for o in good], dtype=float).reshape(len(good), len(labels))
    boundary = np.array([o[3] for o in good], dtype=bool)
    mean, cov = _moments(rows)
    var_p = np.diag(pcov)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(pcov != 0, (np.asarray(cov) - pcov) / pcov, np.nan) if rows.shape[0] else []
    normality = normality_diagnostics(rows, pcov) if rows.shape[0] >= MIN_KS_SAMPLES and np.all(var_p > 0) else []
    s_mean, s_cov = _moments(rows[~boundary])
    extra_cols = {}
    for key in (good[0][2] if good else {}):
        extra_cols[key] = [o[2][key] for o in good]

    diagnostics = {"predicted": pred.to_dict()}
    if pred.regime is Regime.ALL_UNKNOWN:
        # finite-delta variance of the sigma coordinate: it equals the H error plus the
        # sqrt(N)-scale sigma error divided by |log delta|, which vanishes only slowly
        p = len(config.theta)
        A1 = np.asarray(pred.extras["A1"])
        L = abs(math.log(config.delta))
        diagnostics["sigma_coordinate_finite_delta_variance"] = float(
            A1[p - 1, p - 1] + 2.0 * A1[p - 1, p] / L + A1[p, p] / L ** 2)

    return StudyReport(
        config=config.to_dict(),
        labels=list(labels),
        rows=[[o[0], list(map(float, row))] for o, row in zip(good, rows)],
        replications_used=len(good),
        failures=failures,
        boundary_count=int(boundary.sum()),
        mean=mean,
        covariance=cov,
        predicted_covariance=pcov.tolist(),
        relative_deviation=rel.tolist() if len(rel) else [],
        normality=normality,
        sensitivity_excluding_boundary={"replications": int((~boundary).sum()), "mean": s_mean,
                                        "covariance": s_cov},
        extra_columns=extra_cols,
        diagnostics=diagnostics,
    )


def rate_discrimination(model="fgn", theta=(0.7,), sigma: float = 1.0, n_small: int = 2 ** 8,
                        n_large: int = 2 ** 12, replications: int = 500, seed: int = 2024,
                        delta_c: float = 1.0) -> dict:
    """
    Compare the growth of the sigma error at the wrong and the efficient rate.

    Runs two ALL_UNKNOWN studies and returns the variances of
    sqrt(N)(sigma_hat - sigma) and of its |log delta|-corrected version.
    """
    out = {}
    for tag, n in (("small", n_small), ("large", n_large)):
        cfg = StudyConfig(get_model(model).name, list(theta), sigma, n, "all", replications, seed,
                          delta_c)
        rep = run_study(cfg)
        j = rep.labels.index("sqrt(N)/(sigma|log delta|):sigma")
        out[tag] = {
            "n": n,
            "var_wrong_rate": float(np.var(rep.extra_columns["sigma_at_sqrt_n"], ddof=1)),
            "var_efficient_rate": rep.variance(j),
        }
    out["wrong_rate_growth"] = out["large"]["var_wrong_rate"] / out["small"]["var_wrong_rate"]
    out["efficient_rate_drift"] = abs(out["large"]["var_efficient_rate"]
                                      / out["small"]["var_efficient_rate"] - 1.0)
    return out
