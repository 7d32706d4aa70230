"""
Information quantities of a spectral model at a parameter point.

All integrals here are continuous quadratures over [-pi, pi]; nothing in
this module touches data.

Notation (q = number of leading coordinates of theta kept):

- ``b(theta) = exp(mean log f_theta)`` and ``g_theta = f_theta / b(theta)``
- ``a_q[j]  = mean d_j log f``
- ``F_q[j,k] = (1 / 4 pi) int d_j log f * d_k log f``
- ``G_q[j,k] = (1 / 4 pi) int d_j log g * d_k log g``

where ``mean h = (1 / 2 pi) int_{-pi}^{pi} h``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .exceptions import DegenerateLimitError, SingularMatrixError
from .models import SpectralModel, get_model
from .quadrature import GL_NODES, quad_singular

INFO_TOL = 1e-12

TWO_PI = 2.0 * np.pi


class Regime(str, enum.Enum):
    H_KNOWN = "H_KNOWN"
    ALL_UNKNOWN = "ALL_UNKNOWN"
    SIGMA_KNOWN = "SIGMA_KNOWN"

    @classmethod
    def parse(cls, value) -> "Regime":
        if isinstance(value, Regime):
            return value
        aliases = {"h-known": cls.H_KNOWN, "all": cls.ALL_UNKNOWN, "sigma-known": cls.SIGMA_KNOWN}
        key = str(value)
        if key in aliases:
            return aliases[key]
        return cls(key.upper().replace("-", "_"))


# --------------------------------------------------------------------------- #
# b(theta)
# --------------------------------------------------------------------------- #

@lru_cache(maxsize=65536)
def _log_b_cached(model: SpectralModel, theta: tuple, nodes: int, split: int) -> float:
    th = np.array(theta)
    integral = quad_singular(lambda x: model.log_density(th, x), 0.0, tol=INFO_TOL, nodes=nodes, split=split)
    return integral / TWO_PI


def log_scale_b(model, theta, nodes: int = GL_NODES, split: int = 1) -> float:
    """log b(theta) = (1 / 2 pi) int log f_theta, memoized per theta."""
    model = get_model(model)
    th = model.check_theta(theta)
    return _log_b_cached(model, tuple(float(t) for t in th), nodes, split)


def scale_b(model, theta, **kwargs) -> float:
    """Geometric-mean scale b(theta) of the density."""
    return float(np.exp(log_scale_b(model, theta, **kwargs)))


def clear_caches() -> None:
    _log_b_cached.cache_clear()
    _log_b_gradient_cached.cache_clear()


@lru_cache(maxsize=65536)
def _log_b_gradient_cached(model: SpectralModel, theta: tuple) -> tuple:
    th = np.array(theta)
    return tuple(
        quad_singular(lambda x, j=j: model.grad_log_density(th, x)[j], 0.0, tol=INFO_TOL) / TWO_PI
        for j in range(model.dim_p)
    )


def log_b_gradient(model, theta) -> np.ndarray:
    """Gradient of log b(theta), which is the vector a_p(theta) = mean of grad log f."""
    model = get_model(model)
    th = model.check_theta(theta)
    return np.array(_log_b_gradient_cached(model, tuple(float(t) for t in th)))


def log_g(model, theta, lam) -> np.ndarray:
    model = get_model(model)
    th = model.check_theta(theta)
    return model.log_density(th, lam) - log_scale_b(model, th)


# --------------------------------------------------------------------------- #
# InfoPack
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class InfoPack:
    theta: np.ndarray
    b: float
    a: np.ndarray
    F: np.ndarray
    G: np.ndarray
    q: int

    def bordered(self) -> np.ndarray:
        """The (q+1)x(q+1) matrix [[F, a], [a^T, 2]]."""
        q = self.q
        out = np.empty((q + 1, q + 1))
        out[:q, :q] = self.F
        out[:q, q] = self.a
        out[q, :q] = self.a
        out[q, q] = 2.0
        return out

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "q": self.q,
            "b": self.b,
            "a": self.a.tolist(),
            "F": self.F.tolist(),
            "G": self.G.tolist(),
        }


def info_pack(model, theta, q: int | None = None, nodes: int = GL_NODES, split: int = 1) -> InfoPack:
    """Compute b, a_q, F_q and G_q for the first ``q`` coordinates of theta."""
    model = get_model(model)
    th = model.check_theta(theta)
    q = model.dim_p if q is None else int(q)
    if not 1 <= q <= model.dim_p:
        raise ValueError(f"q must lie in 1..{model.dim_p}")
    logb = log_scale_b(model, th, nodes=nodes, split=split)
    # quadrature of every needed product on a shared panel layout
    a = np.empty(q)
    F = np.empty((q, q))
    G = np.empty((q, q))

    def grad(x):
        return model.grad_log_density(th, x)[:q]

    for j in range(q):
        a[j] = quad_singular(lambda x: grad(x)[j], 0.0, tol=INFO_TOL, nodes=nodes, split=split) / TWO_PI
    for j in range(q):
        for k in range(j, q):
            F[j, k] = F[k, j] = quad_singular(
                lambda x: grad(x)[j] * grad(x)[k], 0.0, tol=INFO_TOL, nodes=nodes, split=split
            ) / (2 * TWO_PI)
            G[j, k] = G[k, j] = quad_singular(
                lambda x: (grad(x)[j] - a[j]) * (grad(x)[k] - a[k]), 0.0, tol=INFO_TOL, nodes=nodes, split=split
            ) / (2 * TWO_PI)
    return InfoPack(theta=th, b=float(np.exp(logb)), a=a, F=F, G=G, q=q)


def block_inverse_identity(pack: InfoPack, check_tol: float = 1e-8) -> np.ndarray:
    """
    Closed-form inverse of [[F, a], [a^T, 2]] built from G = F - a a^T / 2.

    Returns [[G^-1, -G^-1 a / 2], [-a^T G^-1 / 2, 1/2 + a^T G^-1 a / 4]] after
    checking that its product with the bordered matrix is the identity.
    """
    q = pack.q
    try:
        Ginv = np.linalg.inv(pack.G)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("G is singular") from exc
    if not np.all(np.isfinite(Ginv)) or np.linalg.cond(pack.G) > 1e14:
        raise SingularMatrixError("G is numerically singular")
    Ga = Ginv @ pack.a
    out = np.empty((q + 1, q + 1))
    out[:q, :q] = Ginv
    out[:q, q] = -0.5 * Ga
    out[q, :q] = -0.5 * Ga
    out[q, q] = 0.5 + 0.25 * pack.a @ Ga
    resid = np.max(np.abs(pack.bordered() @ out - np.eye(q + 1)))
    if resid > check_tol:
        raise SingularMatrixError(f"block inverse check failed, residual {resid:.3e}")
    return out


# --------------------------------------------------------------------------- #
# Asymptotic predictions
# --------------------------------------------------------------------------- #

@dataclass
class AsymptoticPrediction:
    regime: Regime
    rate_labels: list[str]
    covariance: np.ndarray
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "regime": self.regime.value,
            "rate_labels": list(self.rate_labels),
            "covariance": np.asarray(self.covariance).tolist(),
        }
        for key, val in self.extras.items():
            out[key] = np.asarray(val).tolist() if isinstance(val, np.ndarray) else val
        return out


def _safe_inv(m: np.ndarray, what: str) -> np.ndarray:
    if m.size == 0:
        return m.copy()
    if np.linalg.cond(m) > 1e14:
        raise SingularMatrixError(f"{what} is singular")
    return np.linalg.inv(m)


def _names(model: SpectralModel) -> list[str]:
    names = list(model.param_names)
    return names if len(names) == model.dim_p else [f"psi{i + 1}" for i in range(model.dim_p - 1)] + ["H"]


def predict_asymptotics(model, theta, sigma: float, regime, rate_family: "RateFamily | None" = None
                        ) -> AsymptoticPrediction:
    """
    Limit covariance of the rate-scaled estimation errors.

    H_KNOWN
        F(psi, sigma)^-1 for sqrt(N) (psi_bar - psi, sigma_bar - sigma).
    ALL_UNKNOWN
        diag(G_p^-1, sigma^2/2) for sqrt(N)(theta_hat - theta, sigma_tilde - sigma).
        Extras: ``A1`` = [[F_p, a_p], [a_p^T, 2]]^-1; ``J`` and ``J_inv`` for the
        supplied rate family (default: the efficient-sigma rate); and
        ``scaled_error_covariance`` for the vector produced by the Monte Carlo
        harness (theta errors at sqrt(N), sigma error at sqrt(N)/(sigma|log delta|),
        and the auxiliary combination).
    SIGMA_KNOWN
        I(theta)^-1, the efficiency bound for (sqrt(N)(psi - psi0), sqrt(N)|log delta|(H - H0)),
        with I = [[F_{p-1}, -a_{p-1}], [-a_{p-1}^T, 2]] (extra ``fisher``).  The extra
        ``estimator_covariance`` is the limit law of (psi_hat, H2); it equals the bound
        when p = 1 and has a larger psi block otherwise.
    """
    model = get_model(model)
    regime = Regime.parse(regime)
    th = model.check_theta(theta)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    p = model.dim_p
    names = _names(model)
    if regime is Regime.H_KNOWN:
        labels = [f"sqrt(N):{n}" for n in names[:-1]] + ["sqrt(N):sigma"]
        if p > 1:
            pk = info_pack(model, th, p - 1)
            F_psi, a_psi = pk.F, pk.a
        else:
            F_psi, a_psi = np.zeros((0, 0)), np.zeros(0)
        Fmat = np.empty((p, p))
        Fmat[: p - 1, : p - 1] = F_psi
        Fmat[: p - 1, p - 1] = a_psi / sigma
        Fmat[p - 1, : p - 1] = a_psi / sigma
        Fmat[p - 1, p - 1] = 2.0 / sigma ** 2
        cov = _safe_inv(Fmat, "F(psi, sigma)")
        return AsymptoticPrediction(regime, labels, cov, {"fisher": Fmat})

    pack = info_pack(model, th, p)
    if regime is Regime.ALL_UNKNOWN:
        Ginv = _safe_inv(pack.G, "G_p")
        labels = [f"sqrt(N):{n}" for n in names] + ["sqrt(N):sigma_tilde"]
        cov = np.zeros((p + 1, p + 1))
        cov[:p, :p] = Ginv
        cov[p, p] = sigma ** 2 / 2.0
        A1 = block_inverse_identity(pack)
        fam = rate_family or efficient_sigma_rate(sigma)
        D, E, J = rate_matrix_limits(fam, model, th, sigma)
        # (sqrt(N)(theta_hat - theta), sqrt(N)(sigma_acute - sigma)/sigma) ~ A1; the sigma
        # coordinate at rate sqrt(N)/|log delta| tracks sqrt(N)(H_hat - H), and the auxiliary
        # combination sqrt(N) log(delta)(H_hat - H) + sqrt(N)(sigma_hat - sigma)/sigma tracks
        # the sigma_acute coordinate.
        M = np.zeros((p + 2, p + 1))
        M[:p, :p] = np.eye(p)
        M[p, p - 1] = 1.0
        M[p + 1, p] = 1.0
        extras = {
            "A1": A1,
            "J": J,
            "J_inv": _safe_inv(J, "J"),
            "rate_family": fam.name,
            "scaled_error_labels": [f"sqrt(N):{n}" for n in names]
            + ["sqrt(N)/(sigma|log delta|):sigma", "sqrt(N)log(delta):H+sqrt(N)/sigma:sigma"],
            "scaled_error_covariance": M @ A1 @ M.T,
        }
        return AsymptoticPrediction(regime, labels, cov, extras)

    # SIGMA_KNOWN
    labels = [f"sqrt(N):{n}" for n in names[:-1]] + ["sqrt(N)|log delta|:H"]
    cov = np.empty((p, p))
    est = np.empty((p, p))
    fisher = np.empty((p, p))
    if p > 1:
        # efficiency bound: the H score at rate sqrt(N)|log delta| tends to the constant -2,
        # so I = [[F, -a], [-a^T, 2]] and the off-diagonal of its inverse is +G^-1 a / 2
        sub = info_pack(model, th, p - 1)
        fisher[: p - 1, : p - 1] = sub.F
        fisher[: p - 1, p - 1] = fisher[p - 1, : p - 1] = -sub.a
        fisher[p - 1, p - 1] = 2.0
        Gi = _safe_inv(sub.G, "G_{p-1}")
        Ga = Gi @ sub.a
        cov[: p - 1, : p - 1] = Gi
        cov[: p - 1, p - 1] = cov[p - 1, : p - 1] = 0.5 * Ga
        cov[p - 1, p - 1] = 0.5 + 0.25 * sub.a @ Ga
        # law of (psi_hat, H2) with psi_hat from the full Whittle fit: same shape with
        # G_{p-1}^-1 replaced by the psi block of G_p^-1
        V = _safe_inv(pack.G, "G_p")[: p - 1, : p - 1]
        Va = V @ sub.a
        est[: p - 1, : p - 1] = V
        est[: p - 1, p - 1] = est[p - 1, : p - 1] = 0.5 * Va
        est[p - 1, p - 1] = 0.5 + 0.25 * sub.a @ Va
    else:
        cov[0, 0] = est[0, 0] = 0.5
        fisher[0, 0] = 2.0
    return AsymptoticPrediction(regime, labels, cov, {"fisher": fisher, "estimator_covariance": est})


def weak_fisher(model, theta, sigma: float, check: bool = True) -> np.ndarray:
    """
    Singular Fisher matrix of the diagonal-rate expansion, coordinates (psi, H, sigma).

    [[F_{p-1}, a, a/sigma], [a^T, 2, 2/sigma], [a^T/sigma, 2/sigma, 2/sigma^2]]
    """
    model = get_model(model)
    th = model.check_theta(theta)
    p = model.dim_p
    if p > 1:
        sub = info_pack(model, th, p - 1)
        F, a = sub.F, sub.a
    else:
        F, a = np.zeros((0, 0)), np.zeros(0)
    m = np.empty((p + 1, p + 1))
    m[: p - 1, : p - 1] = F
    m[: p - 1, p - 1] = a
    m[p - 1, : p - 1] = a
    m[: p - 1, p] = a / sigma
    m[p, : p - 1] = a / sigma
    m[p - 1, p - 1] = 2.0
    m[p - 1, p] = m[p, p - 1] = 2.0 / sigma
    m[p, p] = 2.0 / sigma ** 2
    if check:
        sv = np.linalg.svd(m, compute_uv=False)
        if sv[-1] > 1e-8 * sv[0]:
            raise AssertionError(f"weak Fisher matrix unexpectedly regular: singular values {sv}")
    return m


# --------------------------------------------------------------------------- #
# Rate matrices
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class RateFamily:
    """
    Block rate matrix phi_N = blockdiag(phi_N1, phi_N2).

    ``phi1(N, delta)`` returns the diagonal entries d_N (length p-1);
    ``phi2(N, delta)`` returns [[alpha_N, alpha_hat_N], [beta_N, beta_hat_N]].
    """

    name: str
    phi2: Callable[[float, float], np.ndarray]
    phi1: Callable[[float, float], np.ndarray] | None = None


def efficient_theta_rate(sigma: float) -> RateFamily:
    """Non-diagonal rate under which (psi, H) are estimated at sqrt(N)."""
    return RateFamily(
        "efficient-theta",
        lambda N, d: np.array([[1.0, 0.0], [-sigma * np.log(d), sigma]]) / np.sqrt(N),
        lambda N, d: 1.0 / np.sqrt(N),
    )


def efficient_sigma_rate(sigma: float) -> RateFamily:
    """Rate under which sigma is estimated at sqrt(N) / |log delta|."""
    return RateFamily(
        "efficient-sigma",
        lambda N, d: np.array([[1.0 / np.log(d), 1.0], [0.0, -sigma * np.log(d)]]) / np.sqrt(N),
    )


def diagonal_rate(sigma: float) -> RateFamily:
    """The diagonal rate of the weak expansion: diag(1/(sqrt(N) log delta), 1/sqrt(N))."""
    return RateFamily(
        "diagonal",
        lambda N, d: np.array([[1.0 / (np.sqrt(N) * np.log(d)), 0.0], [0.0, 1.0 / np.sqrt(N)]]),
    )


RATE_SCHEDULE = tuple(2 ** k for k in range(10, 21))


def richardson_limit(h: np.ndarray, values: np.ndarray, tol: float = 1e-6) -> float:
    """
    Extrapolate ``values(h)`` to h = 0 with a Neville tableau.

    Returns the first diagonal entry that agrees with its predecessor to
    ``tol``; raises if the tableau never settles.
    """
    h = np.asarray(h, dtype=float)
    v = np.asarray(values, dtype=float)
    n = len(h)
    table = v.copy()
    prev = table[-1]
    for level in range(1, n):
        # table[i] <- extrapolation using points i-level..i
        for i in range(n - 1, level - 1, -1):
            table[i] = (h[i - level] * table[i] - h[i] * table[i - 1]) / (h[i - level] - h[i])
        cur = table[-1]
        if abs(cur - prev) < tol * max(1.0, abs(cur)):
            return float(cur)
        prev = cur
    raise DegenerateLimitError("rate-matrix sequence has no detectable limit on the schedule")


def rate_matrix_limits(family: RateFamily, model, theta, sigma: float,
                       schedule=RATE_SCHEDULE, delta_rule=lambda N: 1.0 / N, tol: float = 1e-6):
    """
    Limits (D, E, J) of a rate-matrix family along ``schedule`` with delta = delta_rule(N).

    The sequences are extrapolated in the variable 1 / |log delta|, the
    natural scale of the rates in this problem.
    """
    model = get_model(model)
    th = model.check_theta(theta)
    p = model.dim_p
    Ns = np.array(schedule, dtype=float)
    deltas = np.array([delta_rule(N) for N in Ns])
    rows = []
    drows = []
    for N, d in zip(Ns, deltas):
        m = np.asarray(family.phi2(N, d), dtype=float)
        a_, ah, b_, bh = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
        rn = np.sqrt(N)
        gamma = a_ * rn * np.log(d) + b_ * rn / sigma
        gamma_hat = ah * rn * np.log(d) + bh * rn / sigma
        rows.append([a_ * rn, ah * rn, gamma, gamma_hat])
        if p > 1:
            if family.phi1 is None:
                dn = np.full(p - 1, 1.0 / rn)
            else:
                dn = np.broadcast_to(np.asarray(family.phi1(N, d), dtype=float), (p - 1,))
            drows.append(dn * rn)
    rows = np.array(rows)
    h = 1.0 / np.abs(np.log(deltas))
    alpha, alpha_hat, gamma, gamma_hat = (richardson_limit(h, rows[:, i], tol) for i in range(4))
    dlim = np.array([richardson_limit(h, col, tol) for col in np.array(drows).T]) if p > 1 else np.zeros(0)
    if np.any(np.abs(dlim) < 1e-8):
        raise DegenerateLimitError("a psi-rate limit d^(j) vanishes")
    det = alpha * gamma_hat - alpha_hat * gamma
    if abs(det) < 1e-8:
        raise DegenerateLimitError(
            f"alpha*gamma_hat - alpha_hat*gamma = {det:.3e}: limit matrix E is singular"
        )
    D = np.diag(dlim)
    E = np.array([[alpha, gamma], [alpha_hat, gamma_hat]])
    B = np.zeros((p + 1, p + 1))
    B[: p - 1, : p - 1] = D
    B[p - 1:, p - 1:] = E
    pack = info_pack(model, th, p)
    J = B @ pack.bordered() @ B.T
    return D, E, J
