"""
Quadrature on [-pi, pi] for integrands with an integrable singularity at 0.

The half interval (0, pi] is split into dyadic panels
``[pi 2^-(m+1), pi 2^-m]``, each integrated with fixed-order Gauss-Legendre.
Refinement towards the origin stops once the remaining piece
``(0, pi 2^-(M+1)]`` is certified small by a power bound
``|h(lam)| <= C lam^-(alpha_hint + eta)`` whose constant is read off the
innermost panel.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

from .exceptions import QuadratureError

QUAD_TOL = 1e-10
GL_NODES = 24
MAX_LEVELS = 1000
_ETA = 0.02


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=64)
def panel_nodes(levels: int, nodes: int = GL_NODES, split: int = 1):
    """Nodes and weights on (pi 2^-levels, pi], ``split`` subpanels per dyadic panel."""
    x, w = _gauss_legendre(nodes)
    edges = np.pi * 2.0 ** -np.arange(levels + 1, dtype=float)  # pi, pi/2, ...
    hi, lo = edges[:-1], edges[1:]
    if split > 1:
        frac = np.arange(split + 1) / split
        sub = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
        lo, hi = sub[:, :-1].ravel(), sub[:, 1:].ravel()
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    lam = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return lam, wts


def _tail_bound(values: np.ndarray, lam: np.ndarray, eps: float, alpha: float) -> float:
    expo = alpha + _ETA
    if expo >= 1:
        return np.inf
    const = float(np.max(np.abs(values) * lam ** expo))
    return const * eps ** (1 - expo) / (1 - expo)


def quad_singular(
    integrand: Callable[[np.ndarray], np.ndarray],
    alpha_hint: float = 0.0,
    tol: float = QUAD_TOL,
    nodes: int = GL_NODES,
    split: int = 1,
    even: bool = True,
    return_bound: bool = False,
):
    """
    Integrate ``integrand`` over [-pi, pi].

    Parameters
    ----------
    integrand
        Vectorized function of the frequency. Only positive frequencies are
        sampled when ``even`` is true; otherwise both halves are evaluated.
    alpha_hint
        Singularity order at the origin, ``|h| <~ |lam|^-alpha_hint``; must be < 1.
        Log-type singularities are covered by the internal margin eta.
    tol
        Absolute target for the truncated piece near the origin.
    nodes, split
        Gauss-Legendre order and number of subpanels per dyadic panel.

    Returns
    -------
    float
        The integral (and the tail bound if ``return_bound``).
    """
    if alpha_hint + _ETA >= 1:
        raise QuadratureError("alpha_hint too close to 1 for an integrable bound", np.inf)

    def h(lam):
        v = np.asarray(integrand(lam), dtype=float)
        if not even:
            v = v + np.asarray(integrand(-lam), dtype=float)
        return v

    total = 0.0
    levels = 0
    chunk = 16
    bound = np.inf
    x, w = _gauss_legendre(nodes)
    while levels < MAX_LEVELS:
        hi_level = min(levels + chunk, MAX_LEVELS)
        lam, wts = panel_nodes(hi_level, nodes, split)
        start = levels * nodes * split
        lam, wts = lam[start:], wts[start:]
        vals = h(lam)
        if not np.all(np.isfinite(vals)):
            raise QuadratureError("integrand is not finite on the panel nodes", np.inf)
        # accumulate panel by panel in a fixed order
        per_panel = (vals * wts).reshape(hi_level - levels, -1).sum(axis=1)
        inner = vals.reshape(hi_level - levels, -1)
        inner_lam = lam.reshape(hi_level - levels, -1)
        for i in range(hi_level - levels):
            total += per_panel[i]
            eps = np.pi * 2.0 ** -(levels + i + 1)
            bound = _tail_bound(inner[i], inner_lam[i], eps, alpha_hint)
            if bound < tol / 10:
                result = 2.0 * total if even else total
                return (result, 2.0 * bound) if return_bound else result
        levels = hi_level
    raise QuadratureError("dyadic refinement exhausted before the tail bound met tolerance", 2.0 * bound)


def mean_over_circle(integrand, alpha_hint: float = 0.0, **kwargs) -> float:
    """(1 / 2 pi) * integral over [-pi, pi]."""
    return quad_singular(integrand, alpha_hint, **kwargs) / (2.0 * np.pi)
