"""
Whittle-type estimators under high-frequency sampling.

Three knowledge regimes are covered:

- ``estimate_H_known``: psi and sigma with the Hurst exponent fixed.
- ``estimate_all_unknown``: theta = (psi, H) by minimizing the profile
  ``sigma2_profile`` of the normalized density, then sigma by plugging the
  estimate back into the scale.
- ``estimate_sigma_known``: psi from the all-unknown fit, H from the
  one-step corrected scale equation (H1, then H2).

Scale convention: densities satisfy rho(k) = mean(exp(i k lam) f), while
the periodogram has E I_N ~ f / (2 pi).  The Whittle integrals therefore
use ``2 pi I_N`` as the data-side ordinate; every estimate is identical to
the one obtained with the periodogram-scale density f / (2 pi).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError
from .info import Regime, log_b_gradient, log_scale_b, predict_asymptotics
from .models import SpectralModel, get_model
from .optimize import BOUNDARY_TOL, OptimizerReport, minimize_box
from .periodogram import Periodogram, ScaleTag, periodogram, rescale
from .sampling import SampledSeries

MIN_N = 64
WARN_N = 256
TWO_PI = 2.0 * np.pi


@dataclass
class EstimationResult:
    regime: Regime
    theta_hat: np.ndarray
    sigma_hat: float | None
    objective_value: float
    optimizer_report: OptimizerReport
    n: int
    delta: float
    intermediates: dict = field(default_factory=dict)

    @property
    def H_hat(self) -> float:
        return float(self.theta_hat[-1])

    def to_dict(self) -> dict:
        inter = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.intermediates.items()}
        return {
            "regime": self.regime.value,
            "theta_hat": [float(t) for t in self.theta_hat],
            "sigma_hat": None if self.sigma_hat is None else float(self.sigma_hat),
            "objective_value": float(self.objective_value),
            "optimizer_report": self.optimizer_report.to_dict(),
            "n": self.n,
            "delta": self.delta,
            "intermediates": inter,
        }


def _fourier_sum(pgram: Periodogram, log_h: np.ndarray) -> float:
    """(1 / 2 pi) int 2 pi I_N / h on the Fourier grid, h given through log h on pgram.grid()."""
    _, ordinates, w = pgram.grid()
    return float(TWO_PI * np.sum(w * ordinates * np.exp(-log_h)))


def sigma2_profile(model, pgram: Periodogram, theta) -> float:
    """Fourier-sum value of sigma_N^2(theta) = mean(I_N / g_theta) (on the 2 pi I_N scale)."""
    model = get_model(model)
    th = model.check_theta(theta)
    lam, _, _ = pgram.grid()
    log_g = model.log_density(th, lam) - log_scale_b(model, th)
    return _fourier_sum(pgram, log_g)


def _as_series(series, delta: float | None) -> SampledSeries:
    if isinstance(series, SampledSeries):
        return series if delta is None else SampledSeries(series.values, delta, dict(series.meta))
    if delta is None:
        raise DomainError("delta is required when passing a bare array")
    return SampledSeries(np.asarray(series, dtype=float), delta)


def _check_length(n: int) -> None:
    if n < MIN_N:
        raise DomainError(f"series length {n} below the minimum of {MIN_N}")
    if n < WARN_N:
        warnings.warn(f"series length {n} < {WARN_N}: asymptotic approximations are crude",
                      stacklevel=3)


def _check_delta_for_log(delta: float) -> float:
    if not 0 < delta < 1:
        raise DomainError("delta must lie strictly inside (0, 1) for the |log delta| rate")
    return abs(np.log(delta))


def estimate_all_unknown(model, series, delta: float | None = None) -> EstimationResult:
    """Whittle estimate of theta = (psi, H) and plug-in estimate of sigma."""
    model = get_model(model)
    s = _as_series(series, delta)
    _check_length(s.n)
    pg = periodogram(s)
    lam, _, _ = pg.grid()

    def objective(th):
        return _fourier_sum(pg, model.log_density(th, lam) - log_scale_b(model, th))

    gradient = None
    if model.dim_p == 1:
        _, ordinates, w = pg.grid()
        weighted = TWO_PI * w * ordinates

        def gradient(H):
            # d/dH of the objective: -sum 2 pi w I / g * d log g / dH
            th = np.array([H])
            lg = model.log_density(th, lam) - log_scale_b(model, th)
            dlg = model.grad_log_density(th, lam)[-1] - log_b_gradient(model, th)[-1]
            return float(-np.sum(weighted * np.exp(-lg) * dlg))

    theta_hat, fmin, report = minimize_box(objective, model.theta_box, gradient=gradient)
    theta_hat = np.clip(theta_hat, model.lower, model.upper)
    logb = log_scale_b(model, theta_hat)
    H = float(theta_hat[-1])
    sigma2_hat = np.exp(-2.0 * H * np.log(s.delta) - logb) * fmin
    inter = {"sigma2_N": fmin, "b_theta_hat": float(np.exp(logb)), "log_b_theta_hat": logb}
    return EstimationResult(Regime.ALL_UNKNOWN, theta_hat, float(np.sqrt(sigma2_hat)), fmin,
                            report, s.n, s.delta, inter)


def estimate_H_known(model, series, H0: float, delta: float | None = None) -> EstimationResult:
    """
    Whittle estimate of (psi, sigma) with the Hurst exponent fixed at ``H0``.

    For fixed psi the minimizing sigma^2 is mean(I_bar / f_psi), so only psi
    is searched; with no psi coordinates the estimate is closed form.
    """
    model = get_model(model)
    s = _as_series(series, delta)
    _check_length(s.n)
    lo, hi = model.theta_box[-1]
    if not lo <= H0 <= hi:
        raise DomainError(f"H0={H0} outside the model's H interval {model.theta_box[-1]}")
    pg = rescale(periodogram(s), s.delta ** (-2.0 * H0), ScaleTag.H_KNOWN_SCALED)
    lam, _, _ = pg.grid()

    def full(psi):
        return np.append(psi, H0)

    def s2(psi):
        return _fourier_sum(pg, model.log_density(full(psi), lam))

    if model.dim_p == 1:
        psi = np.zeros(0)
        report = OptimizerReport(0, 1, True, False, "closed-form")
    else:
        def objective(psi):
            th = full(psi)
            return log_scale_b(model, th) + np.log(s2(psi))

        psi, _, report = minimize_box(objective, model.theta_box[:-1])
    theta = full(psi)
    sigma2 = s2(psi)
    logb = log_scale_b(model, theta)
    objective_value = logb + np.log(sigma2) + 1.0
    report.at_boundary = bool(
        np.any(psi - model.lower[:-1] < BOUNDARY_TOL) or np.any(model.upper[:-1] - psi < BOUNDARY_TOL)
    ) if psi.size else False
    inter = {"sigma2_bar": sigma2, "b_theta": float(np.exp(logb)), "H0": float(H0)}
    return EstimationResult(Regime.H_KNOWN, theta, float(np.sqrt(sigma2)), float(objective_value),
                            report, s.n, s.delta, inter)


def hurst_from_scale(log_b: float, sigma2_N: float, sigma0: float, delta: float) -> float:
    """Solve log(sigma2_N / (delta^(2H) b)) = log sigma0^2 for H."""
    ld = _check_delta_for_log(delta)
    if not sigma2_N > 0:
        raise DomainError("sigma_N^2 must be positive (zero data?)")
    return (log_b - np.log(sigma2_N) + 2.0 * np.log(sigma0)) / (2.0 * ld)


def estimate_sigma_known(model, series, sigma0: float, delta: float | None = None,
                         b_true: float | None = None) -> EstimationResult:
    """
    Efficient estimate of (psi, H) when sigma is known.

    Runs the all-unknown fit, then H1 from the scale equation with b at the
    Whittle estimate, then H2 with b at (psi_hat, H1).  ``b_true`` adds the
    oracle H0 that uses the true b(theta_0).
    """
    model = get_model(model)
    if not sigma0 > 0:
        raise DomainError("sigma0 must be positive")
    s = _as_series(series, delta)
    _check_delta_for_log(s.delta)
    base = estimate_all_unknown(model, s)
    s2 = base.intermediates["sigma2_N"]
    H1 = hurst_from_scale(base.intermediates["log_b_theta_hat"], s2, sigma0, s.delta)
    lo, hi = model.theta_box[-1]
    theta1 = base.theta_hat.copy()
    theta1[-1] = min(max(H1, lo), hi)
    H2 = hurst_from_scale(log_scale_b(model, theta1), s2, sigma0, s.delta)
    theta2 = base.theta_hat.copy()
    theta2[-1] = min(max(H2, lo), hi)
    inter = {
        "H_whittle": base.H_hat,
        "sigma_hat_all_unknown": base.sigma_hat,
        "sigma2_N": s2,
        "b_theta_hat": base.intermediates["b_theta_hat"],
        "H1": H1,
        "b_theta1": float(np.exp(log_scale_b(model, theta1))),
        "H2": H2,
        "sigma0": float(sigma0),
    }
    if b_true is not None:
        inter["H0_oracle"] = hurst_from_scale(np.log(b_true), s2, sigma0, s.delta)
    report = base.optimizer_report
    report = OptimizerReport(report.iterations, report.evaluations, report.converged,
                             report.at_boundary or not (lo + BOUNDARY_TOL <= H2 <= hi - BOUNDARY_TOL),
                             report.method)
    return EstimationResult(Regime.SIGMA_KNOWN, theta2, None, base.objective_value, report,
                            s.n, s.delta, inter)


def estimate(model, series, regime, *, H0: float | None = None, sigma0: float | None = None,
             delta: float | None = None) -> EstimationResult:
    """Dispatch to the estimator for ``regime``."""
    regime = Regime.parse(regime)
    if regime is Regime.H_KNOWN:
        if H0 is None:
            raise DomainError("H_KNOWN regime needs H0")
        return estimate_H_known(model, series, H0, delta)
    if regime is Regime.SIGMA_KNOWN:
        if sigma0 is None:
            raise DomainError("SIGMA_KNOWN regime needs sigma0")
        return estimate_sigma_known(model, series, sigma0, delta)
    return estimate_all_unknown(model, series, delta)


def predicted_for(model: SpectralModel | str, result: EstimationResult):
    """Asymptotic prediction evaluated at the estimate (used by the CLI)."""
    model = get_model(model)
    sigma = result.sigma_hat if result.sigma_hat is not None else result.intermediates["sigma0"]
    return predict_asymptotics(model, result.theta_hat, sigma, result.regime)
