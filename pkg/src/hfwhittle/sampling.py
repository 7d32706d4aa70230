"""
Exact simulation of the stationary Gaussian sequences.

Random numbers come from numpy's PCG64 bit generator seeded through a
``SeedSequence``; normal variates use numpy's ziggurat sampler
(``Generator.standard_normal``).  Replication ``r`` of a study seeded with
``s`` uses ``SeedSequence(s, spawn_key=(r,))``, which is what
``SeedSequence(s).spawn`` would hand out, without needing the parent object.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import DomainError, EmbeddingError, FactorizationError
from .models import ModelParams, get_model

EMBED_NEG_TOL = 1e-10
DENSE_MAX_N = 8192


def make_rng(seed: int, replication: int | None = None) -> np.random.Generator:
    """PCG64 generator for ``seed`` (and optional replication index)."""
    if replication is None:
        ss = np.random.SeedSequence(int(seed))
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication),))
    return np.random.Generator(np.random.PCG64(ss))


def replication_seed(seed: int, replication: int) -> int:
    """64-bit integer seed for replication ``r`` derived from the study seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class SampledSeries:
    values: np.ndarray
    delta: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise DomainError("a series needs at least two observations")
        if not 0 < self.delta <= 1:
            raise DomainError(f"delta must lie in (0, 1], got {self.delta}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("series contains non-finite values")

    @property
    def n(self) -> int:
        return int(self.values.size)

    def scaled(self, c: float) -> "SampledSeries":
        return SampledSeries(c * self.values, self.delta, dict(self.meta))


def circulant_embed(autocov) -> np.ndarray:
    """
    Eigenvalues of the minimal circulant extension of a Toeplitz covariance.

    The first row is ``r_0, ..., r_{n-1}, r_{n-2}, ..., r_1`` (length 2(n-1)).
    Small negative eigenvalues down to ``-1e-10 * max`` are clamped to zero;
    anything more negative raises ``EmbeddingError``.
    """
    r = np.asarray(autocov, dtype=float)
    if r.size < 2:
        raise DomainError("need at least two lags")
    row = np.concatenate([r, r[-2:0:-1]])
    eig = np.fft.fft(row).real
    top = float(np.max(np.abs(eig)))
    if np.min(eig) < -EMBED_NEG_TOL * top:
        raise EmbeddingError(f"circulant embedding has negative eigenvalue {np.min(eig):.3e}")
    return np.maximum(eig, 0.0)


def _dense_sample(r: np.ndarray, z: np.ndarray) -> np.ndarray:
    n = r.size
    if n > DENSE_MAX_N:
        raise EmbeddingError(f"embedding failed and n={n} exceeds the dense fallback cap {DENSE_MAX_N}")
    try:
        L = scipy.linalg.cholesky(scipy.linalg.toeplitz(r), lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError("Toeplitz covariance is not numerically positive definite") from exc
    return L @ z


def sample_gaussian(autocov, rng: np.random.Generator) -> np.ndarray:
    """One draw of the centered stationary Gaussian vector with the given autocovariances."""
    r = np.asarray(autocov, dtype=float)
    n = r.size
    try:
        eig = circulant_embed(r)
    except EmbeddingError:
        return _dense_sample(r, rng.standard_normal(n))
    m = eig.size
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    z = np.fft.fft(np.sqrt(eig / m) * w)
    return z.real[:n]


def sample_path(model, params: ModelParams, n: int, seed: int, replication: int | None = None
                ) -> SampledSeries:
    """
    Simulate ``n`` observations of the model at ``params``.

    The unit-scale path is drawn first and multiplied by ``sigma * delta**H``,
    so paths for different (sigma, delta) with the same seed are exact
    multiples of each other.
    """
    model = get_model(model)
    if n < 2:
        raise DomainError("n must be at least 2")
    theta = model.check_theta(params.theta)
    r = model._unit_autocov(theta, np.arange(n, dtype=float))
    x = sample_gaussian(r, make_rng(seed, replication))
    meta = {
        "model": model.name,
        "theta": list(params.theta),
        "sigma": params.sigma,
        "delta": params.delta,
        "n": int(n),
        "seed": int(seed),
    }
    if replication is not None:
        meta["replication"] = int(replication)
    return SampledSeries(params.scale * x, params.delta, meta)
