"""
Periodogram on the Fourier grid and the Fourier-sum form of Whittle integrals.

``I_N(lam) = |sum_j X_j exp(i j lam)|^2 / (2 pi N)`` at ``lam_k = 2 pi k / N``.
The returned grid is k = 1 .. floor((N-1)/2); the zero-frequency ordinate
and, for even N, the Nyquist ordinate are kept on the side.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DomainError
from .sampling import SampledSeries


class ScaleTag(str, enum.Enum):
    RAW = "RAW"
    H_KNOWN_SCALED = "H_KNOWN_SCALED"
    B_THETA_SCALED = "B_THETA_SCALED"


@dataclass(frozen=True)
class Periodogram:
    freqs: np.ndarray
    ordinates: np.ndarray
    n: int
    zero: float
    nyquist: float | None
    scale_tag: ScaleTag = ScaleTag.RAW

    def grid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Frequencies, ordinates and Fourier-sum weights over (0, pi].

        Weights are 2/N for interior frequencies and 1/N at pi, so that
        ``sum(w * h(lam))`` approximates ``(1 / 2 pi) int_{-pi}^{pi} h`` over
        the symmetric grid without k = 0.
        """
        w = np.full(self.freqs.size, 2.0 / self.n)
        if self.nyquist is None:
            return self.freqs, self.ordinates, w
        return (
            np.append(self.freqs, np.pi),
            np.append(self.ordinates, self.nyquist),
            np.append(w, 1.0 / self.n),
        )

    def parseval_lhs(self) -> float:
        """(2 pi / N) * sum of all N ordinates."""
        total = self.zero + 2.0 * self.ordinates.sum() + (self.nyquist or 0.0)
        return 2.0 * np.pi / self.n * total


def periodogram(series) -> Periodogram:
    x = series.values if isinstance(series, SampledSeries) else np.asarray(series, dtype=float)
    n = x.size
    if n < 2:
        raise DomainError("periodogram needs at least two observations")
    dft = np.fft.rfft(x)
    power = (dft.real ** 2 + dft.imag ** 2) / (2.0 * np.pi * n)
    m = (n - 1) // 2
    k = np.arange(1, m + 1)
    nyq = float(power[n // 2]) if n % 2 == 0 else None
    return Periodogram(2.0 * np.pi * k / n, power[1: m + 1].copy(), n, float(power[0]), nyq)


def rescale(pgram: Periodogram, factor: float, tag: ScaleTag | str) -> Periodogram:
    if not (np.isfinite(factor) and factor > 0):
        raise DomainError(f"rescale factor must be positive, got {factor}")
    return replace(
        pgram,
        ordinates=pgram.ordinates * factor,
        zero=pgram.zero * factor,
        nyquist=None if pgram.nyquist is None else pgram.nyquist * factor,
        scale_tag=ScaleTag(tag),
    )
