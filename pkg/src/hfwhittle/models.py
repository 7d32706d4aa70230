"""
Spectral models for self-similar stationary Gaussian noise.

A model describes the unit-scale spectral density ``f(theta, lam)`` of a
stationary sequence whose sampled version at interval ``delta`` and diffusion
scale ``sigma`` has density ``sigma**2 * delta**(2H) * f(theta, lam)``.
The parameter vector is ``theta = (psi_1, ..., psi_{p-1}, H)``; the Hurst
exponent is always the last coordinate.

Normalization
-------------
Densities are normalized so that

    rho(k) = (1 / 2 pi) * integral_{-pi}^{pi} exp(i k lam) f(lam) dlam

is the lag-k autocovariance of the unit process.  With this convention the
fGn density is identically 1 at H = 1/2, and the constant in front of the
periodized power sum is ``Gamma(2H + 1) * sin(pi H)``.

Shipped families
----------------
``fgn``
    Increments of fractional Brownian motion.
``flangevin``
    Second differences of interval-averaged fBm velocities (free,
    frictionless fractional Langevin particle).

Public API
----------
- SpectralModel, ModelParams
- eval_f, eval_dlogf, eval_autocov, alpha_exponent
- get_model, register_model, MODELS
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Callable

import numpy as np
from scipy.special import bernoulli, digamma, gammaln, binom

from .exceptions import DomainError, NonConvergenceError

LAMBDA_MIN = 1e-12
LATTICE_TOL = 1e-12
H_BOX = (0.05, 0.95)

# Euler-Maclaurin settings for the Hurwitz-type tail sums
_EM_ORDER = 8
_EM_START = 12
_EM_MAX_START = 4096
_B2K = bernoulli(2 * _EM_ORDER + 2)
_EM_COEF = np.array([_B2K[2 * k] / factorial(2 * k) for k in range(1, _EM_ORDER + 1)])
_EM_NEXT = abs(_B2K[2 * _EM_ORDER + 2]) / factorial(2 * _EM_ORDER + 2)

TWO_PI = 2.0 * np.pi


# --------------------------------------------------------------------------- #
# Periodized power sums
# --------------------------------------------------------------------------- #

def _poch(s: float, m: int) -> float:
    return float(np.exp(gammaln(s + m) - gammaln(s)))


def _hurwitz_tail(s: float, q: np.ndarray, start: int, tol: float):
    """Sum_{j >= start} (q + j)**(-s) and its s-derivative, by Euler-Maclaurin."""
    x = q + start
    logx = np.log(x)
    xs = x ** (-s)
    # remainder is bounded by the first omitted correction for completely monotone summands
    bound = _EM_NEXT * _poch(s, 2 * _EM_ORDER + 1) * float(np.max(x ** (-s - 2 * _EM_ORDER - 1)))
    if bound > tol:
        return None
    t0 = x * xs / (s - 1.0)
    t1 = 0.5 * xs
    val = t0 + t1
    dval = -t0 * (logx + 1.0 / (s - 1.0)) - t1 * logx
    harmonic = 0.0
    for k in range(1, _EM_ORDER + 1):
        m = 2 * k - 1
        harmonic += 1.0 / (s + m - 1) if m == 1 else 1.0 / (s + m - 2) + 1.0 / (s + m - 1)
        tk = _EM_COEF[k - 1] * _poch(s, m) * xs * x ** (-(m))
        val = val + tk
        dval = dval + tk * (harmonic - logx)
    return val, dval


def _hurwitz(s: float, q: np.ndarray, first: int, tol: float = LATTICE_TOL):
    """Return (Sum_{j >= first} (q+j)^-s, its s-derivative) for q in (0, 1]."""
    start = max(_EM_START, first)
    while True:
        tail = _hurwitz_tail(s, q, start, tol)
        if tail is not None:
            break
        start *= 2
        if start > _EM_MAX_START:
            raise NonConvergenceError(
                f"lattice sum with exponent {s} did not reach tolerance {tol}"
            )
    j = np.arange(first, start, dtype=float)
    base = q[:, None] + j[None, :]
    terms = base ** (-s)
    head = terms.sum(axis=1)
    dhead = -(terms * np.log(base)).sum(axis=1)
    return head + tail[0], dhead + tail[1]


def log_lattice_sum(lam: np.ndarray, s: float):
    """
    log S and d(log S)/ds for S(lam) = sum_j |lam + 2 pi j|^(-s), 0 < lam <= pi.

    The j = 0 term is factored out analytically so that S is never formed
    for tiny ``lam``; this keeps the result finite far below any frequency
    the Fourier grid can reach.
    """
    lam = np.asarray(lam, dtype=float)
    q = lam / TWO_PI
    # all terms except j = 0, in units of 2 pi
    r1, dr1 = _hurwitz(s, q, first=1)
    r2, dr2 = _hurwitz(s, 1.0 - q, first=0)
    scale = TWO_PI ** (-s)
    rest = scale * (r1 + r2)
    drest = scale * (dr1 + dr2) - np.log(TWO_PI) * rest
    loglam = np.log(lam)
    ls = s * loglam
    w = rest * np.exp(ls)  # rest * lam**s, bounded for lam <= pi
    logS = -ls + np.log1p(w)
    dlogS = (-loglam + drest * np.exp(ls)) / (1.0 + w)
    return logS, dlogS


# --------------------------------------------------------------------------- #
# Autocovariance kernels
# --------------------------------------------------------------------------- #

_LARGE_LAG = 8.0
_N_SERIES = 20


def central_difference_power(k, gamma: float, order: int) -> np.ndarray:
    """
    Central difference of order 2 or 4 of ``|x|**gamma`` evaluated at lag ``k``.

    Large lags use the binomial expansion of ``(1 +/- m/k)**gamma`` so that no
    cancellation between nearly equal powers takes place.
    """
    k = np.abs(np.asarray(k, dtype=float))
    if order == 2:
        coeffs = {1: 1.0, 0: -2.0, -1: 1.0}
    elif order == 4:
        coeffs = {2: 1.0, 1: -4.0, 0: 6.0, -1: -4.0, -2: 1.0}
    else:
        raise ValueError("order must be 2 or 4")
    out = np.zeros_like(k)
    small = k <= _LARGE_LAG
    ks = k[small]
    direct = np.zeros_like(ks)
    for shift, c in coeffs.items():
        direct += c * np.abs(ks + shift) ** gamma
    out[small] = direct
    kl = k[~small]
    if kl.size:
        x = 1.0 / kl
        acc = np.zeros_like(kl)
        for n in range(2, 2 * _N_SERIES + 1, 2):
            weight = sum(c * float(shift) ** n for shift, c in coeffs.items())
            if weight:
                acc += weight * binom(gamma, n) * x ** n
        out[~small] = np.exp(gamma * np.log(kl)) * acc
    return out


# --------------------------------------------------------------------------- #
# Model abstraction
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class SpectralModel:
    """
    A parametric family of unit-scale spectral densities.

    Subclasses implement ``_log_f``, ``_grad_log_f``, ``_unit_autocov`` and
    ``_alpha``; the underscored hooks take already validated arguments and
    ``lam`` in ``(0, pi]`` as an array.  See ``docs/models.md``.
    """

    name: str
    dim_p: int
    theta_box: tuple[tuple[float, float], ...]
    param_names: tuple[str, ...] = field(default=("H",))

    # -- hooks ------------------------------------------------------------ #
    def _log_f(self, theta: np.ndarray, lam: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _grad_log_f(self, theta: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Array of shape (dim_p, len(lam))."""
        raise NotImplementedError

    def _unit_autocov(self, theta: np.ndarray, k: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _alpha(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    # -- helpers ---------------------------------------------------------- #
    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.theta_box])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.theta_box])

    def check_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.dim_p,):
            raise DomainError(f"{self.name}: theta must have length {self.dim_p}, got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise DomainError(f"{self.name}: theta must be finite")
        if np.any(theta < self.lower) or np.any(theta > self.upper):
            raise DomainError(f"{self.name}: theta={theta.tolist()} outside box {self.theta_box}")
        return theta

    def log_density(self, theta: np.ndarray, lam) -> np.ndarray:
        """log f at |lam|; no validation, any 0 < |lam| <= pi accepted."""
        return self._log_f(theta, np.abs(np.atleast_1d(np.asarray(lam, dtype=float))))

    def density(self, theta: np.ndarray, lam) -> np.ndarray:
        return np.exp(self.log_density(theta, lam))

    def grad_log_density(self, theta: np.ndarray, lam) -> np.ndarray:
        return self._grad_log_f(theta, np.abs(np.atleast_1d(np.asarray(lam, dtype=float))))


class _PeriodizedPowerModel(SpectralModel):
    """Density ``Gamma(2H+1) sin(pi H) {2(1-cos lam)}^m sum_j |lam+2 pi j|^-(2m-1+2H)``."""

    order: int = 1

    def _exponent(self, H: float) -> float:
        return 2 * self.order - 1 + 2.0 * H

    def _log_f(self, theta, lam):
        H = float(theta[-1])
        logS, _ = log_lattice_sum(lam, self._exponent(H))
        log_const = gammaln(2 * H + 1) + np.log(np.sin(np.pi * H))
        log_filter = self.order * np.log(4.0 * np.sin(0.5 * lam) ** 2)
        return log_const + log_filter + logS

    def _grad_log_f(self, theta, lam):
        H = float(theta[-1])
        _, dlogS = log_lattice_sum(lam, self._exponent(H))
        dconst = 2.0 * digamma(2 * H + 1) + np.pi / np.tan(np.pi * H)
        return (dconst + 2.0 * dlogS)[None, :]

    def _alpha(self, theta):
        return 2.0 * float(theta[-1]) - 1.0


@dataclass(frozen=True)
class FGNModel(_PeriodizedPowerModel):
    name: str = "fgn"
    dim_p: int = 1
    theta_box: tuple[tuple[float, float], ...] = (H_BOX,)
    order: int = 1

    def _unit_autocov(self, theta, k):
        H = float(theta[-1])
        return 0.5 * central_difference_power(k, 2.0 * H, 2)


@dataclass(frozen=True)
class FLangevinModel(_PeriodizedPowerModel):
    """
    Free fractional Langevin particle observed through its positions.

    The autocovariance carries the factor ``1 / ((2H+1)(2H+2))`` produced by
    the double time-average, which makes it the exact Fourier pair of the
    density.
    """

    name: str = "flangevin"
    dim_p: int = 1
    theta_box: tuple[tuple[float, float], ...] = (H_BOX,)
    order: int = 2

    def _unit_autocov(self, theta, k):
        H = float(theta[-1])
        norm = (2 * H + 1) * (2 * H + 2)
        return 0.5 * central_difference_power(k, 2.0 * H + 2.0, 4) / norm

    def printed_autocov(self, theta, k) -> np.ndarray:
        """Fourth-difference covariance without the time-average normalization."""
        H = float(theta[-1])
        return 0.5 * central_difference_power(k, 2.0 * H + 2.0, 4)


MODELS: dict[str, SpectralModel] = {}


def register_model(model: SpectralModel) -> SpectralModel:
    MODELS[model.name] = model
    return model


def get_model(name: str | SpectralModel) -> SpectralModel:
    if isinstance(name, SpectralModel):
        return name
    try:
        return MODELS[name]
    except KeyError:
        raise DomainError(f"unknown model {name!r}; available: {sorted(MODELS)}") from None


FGN = register_model(FGNModel())
FLANGEVIN = register_model(FLangevinModel())


# --------------------------------------------------------------------------- #
# Parameters and checked operations
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class ModelParams:
    """True parameters of a sampled series: theta = (psi, H), sigma and delta."""

    theta: tuple[float, ...]
    sigma: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in np.atleast_1d(self.theta)))
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        # delta = 1 is the unit-interval process used by the oracles
        if not (0 < self.delta <= 1):
            raise DomainError(f"delta must lie in (0, 1], got {self.delta}")

    @property
    def H(self) -> float:
        return self.theta[-1]

    @property
    def scale(self) -> float:
        """Standard-deviation factor sigma * delta**H."""
        return self.sigma * self.delta ** self.H


def _check_lambda(lam) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    a = np.abs(lam)
    if np.any(~np.isfinite(a)) or np.any(a < LAMBDA_MIN):
        raise DomainError(f"frequency must satisfy |lambda| >= {LAMBDA_MIN}")
    if np.any(a > np.pi * (1 + 1e-14)):
        raise DomainError("frequency must lie in [-pi, pi]")
    return np.minimum(a, np.pi)


def _squeeze(x, like):
    return float(x[0]) if np.ndim(like) == 0 else x


def eval_f(model, theta, lam):
    """Unit-scale spectral density f_theta(lam); scalar in, scalar out."""
    model = get_model(model)
    th = model.check_theta(theta)
    a = _check_lambda(lam)
    return _squeeze(np.exp(model._log_f(th, a)), lam)


def eval_dlogf(model, theta, lam, j: int):
    """Partial derivative of log f_theta(lam) in coordinate ``j`` (1-based)."""
    model = get_model(model)
    th = model.check_theta(theta)
    if not (1 <= j <= model.dim_p):
        raise DomainError(f"coordinate index {j} out of range 1..{model.dim_p}")
    a = _check_lambda(lam)
    return _squeeze(model._grad_log_f(th, a)[j - 1], lam)


def eval_autocov(model, params: ModelParams, k):
    """E[X_1 X_{1+k}] = sigma^2 delta^(2H) rho_theta(k)."""
    model = get_model(model)
    th = model.check_theta(params.theta)
    kk = np.atleast_1d(np.asarray(k))
    if np.any(kk < 0) or np.any(kk != np.round(kk)):
        raise DomainError("lag must be a nonnegative integer")
    var = params.sigma ** 2 * params.delta ** (2 * params.H)
    return _squeeze(var * model._unit_autocov(th, kk.astype(float)), k)


def alpha_exponent(model, theta) -> float:
    """Order of the singularity of f_theta at the origin: f ~ |lam|^(-alpha)."""
    model = get_model(model)
    return float(model._alpha(model.check_theta(theta)))


def fourier_autocov(model, theta, lags, integrate: Callable | None = None) -> np.ndarray:
    """Autocovariances recovered from the density by quadrature (oracle helper)."""
    from .quadrature import quad_singular

    model = get_model(model)
    th = model.check_theta(theta)
    alpha = model._alpha(th)
    quad = integrate or quad_singular
    return np.array([
        quad(lambda x, k=k: np.cos(k * x) * model.density(th, x), alpha) / TWO_PI
        for k in np.atleast_1d(lags)
    ])
