"""
Box-constrained minimization used by the Whittle estimators.

One dimension: a 41-point grid scan followed by golden-section refinement
on the bracket around the best grid point, optionally polished to the
root of a supplied derivative.  Several dimensions: Nelder-Mead
(scipy, with bound clipping) restarted from 8 Halton points.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.stats import qmc

GRID_POINTS = 41
X_TOL = 1e-7
SCORE_XTOL = 1e-14
N_STARTS = 8
BOUNDARY_TOL = 1e-6
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OptimizerReport:
    iterations: int
    evaluations: int
    converged: bool
    at_boundary: bool
    method: str

    def to_dict(self) -> dict:
        return asdict(self)


def golden_section(fun: Callable[[float], float], lo: float, hi: float, xtol: float = X_TOL,
                   max_iter: int = 200):
    """Golden-section search on [lo, hi]. Returns (x, f(x), iterations, evaluations, converged)."""
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = fun(c), fun(d)
    evals = 2
    it = 0
    while hi - lo >= xtol and it < max_iter:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = fun(d)
        evals += 1
        it += 1
    x, fx = (c, fc) if fc <= fd else (d, fd)
    return x, fx, it, evals, hi - lo < xtol


def _near_edge(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> bool:
    return bool(np.any(x - lower < BOUNDARY_TOL) or np.any(upper - x < BOUNDARY_TOL))


def _score_root(gradient, objective, x, lo, hi):
    """
    Zero of ``gradient`` in the smallest bracket around ``x`` that shows a sign
    change, widened tenfold from 1e-6 up to ``[lo, hi]``.  None if there is none.
    """
    w = 1e-6
    while True:
        a, b = max(x - w, lo), min(x + w, hi)
        ga, gb = gradient(a), gradient(b)
        if ga < 0 < gb:
            r = brentq(gradient, a, b, xtol=SCORE_XTOL)
            return r, float(objective(np.array([r])))
        if ga == 0:
            return a, float(objective(np.array([a])))
        if gb == 0:
            return b, float(objective(np.array([b])))
        if a == lo and b == hi:
            return None
        w *= 10.0


def minimize_box(objective: Callable[[np.ndarray], float], box, xtol: float = X_TOL,
                 gradient: Callable[[float], float] | None = None):
    """
    Minimize ``objective`` over the box ``[(lo, hi), ...]``.

    Returns ``(argmin, fmin, report)``. Never raises on non-convergence; the
    report carries the flag instead.

    In one dimension an optional ``gradient`` polishes the golden-section
    point to the root of the derivative.  The bracket of width ``xtol`` is
    all that comparisons of a flat objective can resolve; the root of the
    derivative is well conditioned, so rescaling the objective by a constant
    leaves the polished argmin unchanged to rounding.
    """
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    lower, upper = box[:, 0], box[:, 1]
    dim = box.shape[0]

    if dim == 1:
        grid = np.linspace(lower[0], upper[0], GRID_POINTS)
        vals = np.array([objective(np.array([g])) for g in grid])
        i = int(np.argmin(vals))  # ties resolve to the lowest index
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]
        x, fx, it, ev, ok = golden_section(lambda t: objective(np.array([t])), lo, hi, xtol)
        # the golden bracket never reaches its own ends; compare with grid edges
        if (i == 0 or i == GRID_POINTS - 1) and vals[i] <= fx:
            x, fx = grid[i], vals[i]
        method = "grid+golden"
        if gradient is not None and not _near_edge(np.array([x]), lower, upper):
            polished = _score_root(gradient, objective, x, lo, hi)
            if polished is not None:
                x, fx = polished
                method = "grid+golden+score-root"
        xs = np.array([x])
        report = OptimizerReport(it, ev + GRID_POINTS, bool(ok), _near_edge(xs, lower, upper), method)
        return xs, float(fx), report

    def clipped(z):
        return objective(np.clip(z, lower, upper))

    starts = qmc.Halton(d=dim, scramble=False).random(N_STARTS + 1)[1:]
    starts = lower + starts * (upper - lower)
    best = None
    total_it = total_ev = 0
    all_ok = True
    for x0 in starts:
        res = minimize(
            clipped, x0, method="Nelder-Mead", bounds=list(zip(lower, upper)),
            options={"xatol": xtol, "fatol": np.inf, "maxiter": 4000 * dim, "adaptive": dim > 2},
        )
        total_it += int(res.nit)
        total_ev += int(res.nfev)
        all_ok = all_ok and bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    xs = np.clip(best.x, lower, upper)
    report = OptimizerReport(total_it, total_ev, bool(best.success), _near_edge(xs, lower, upper),
                             "nelder-mead-multistart")
    return xs, float(best.fun), report
