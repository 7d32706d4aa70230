"""Shared fixtures, including a two-parameter model used only by the tests."""

from dataclasses import dataclass

import numpy as np
import pytest

from hfwhittle.models import FGN, H_BOX, SpectralModel, register_model


@dataclass(frozen=True)
class FilteredFGN(SpectralModel):
    """
    fGn passed through the filter 1 + psi cos(lam).

    f = f_fgn(H) (1 + psi cos lam), rho(k) = rho_H(k) + psi/2 (rho_H(k-1) + rho_H(k+1)),
    and mean log(1 + psi cos lam) = log((1 + sqrt(1 - psi^2)) / 2), so
    b(psi, H) = b_fgn(H) (1 + sqrt(1 - psi^2)) / 2.
    """

    name: str = "filtered-fgn"
    dim_p: int = 2
    theta_box: tuple = ((-0.5, 0.5), H_BOX)
    param_names: tuple = ("psi", "H")

    def _log_f(self, theta, lam):
        return FGN._log_f(theta[-1:], lam) + np.log1p(theta[0] * np.cos(lam))

    def _grad_log_f(self, theta, lam):
        c = np.cos(lam)
        return np.vstack([c / (1.0 + theta[0] * c), FGN._grad_log_f(theta[-1:], lam)])

    def _unit_autocov(self, theta, k):
        k = np.asarray(k, dtype=float)
        rho = lambda m: FGN._unit_autocov(theta[-1:], np.abs(m))
        return rho(k) + 0.5 * theta[0] * (rho(k - 1) + rho(k + 1))

    def _alpha(self, theta):
        return FGN._alpha(theta[-1:])


FILTERED = register_model(FilteredFGN())


@pytest.fixture
def filtered_model():
    return FILTERED


@pytest.fixture
def rng():
    return np.random.default_rng(20240)


# acceptance verdicts, echoed in the terminal summary so they survive output capture
ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    def record(number, ok, detail):
        line = f"CRITERION {number:>2}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
