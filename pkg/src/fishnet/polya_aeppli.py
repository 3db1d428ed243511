"""Geometric-Poisson (Polya-Aeppli) law of the damage count at peak load.

``N_c`` is a Poisson(lam) number of clusters, each of Geometric(theta) size
on {1, 2, ...}.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

from .strength import make_generator

__all__ = ["PolyaAeppli", "FitError", "fit_moments", "fit_sample", "sample_nc"]


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class PolyaAeppli:
    lam: float
    theta: float
    clamped: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")

    def pmf(self, k):
        """Probability of ``k`` damaged links (scalar or array of k)."""
        ka = np.asarray(k)
        if np.any(ka < 0):
            raise ValueError("k must be >= 0")
        table = self.pmf_table(int(ka.max()) if ka.size else 0)
        out = table[ka]
        return float(out) if ka.ndim == 0 else out

    def pmf_table(self, kmax: int) -> np.ndarray:
        """p_0 .. p_kmax by the recurrence

        ``(k+1) p_{k+1} = (2 q k + lam theta) p_k - q^2 (k-1) p_{k-1}``,
        with ``q = 1 - theta``, obtained from the probability generating function.
        """
        lam, th = self.lam, self.theta
        q = 1.0 - th
        p = np.zeros(kmax + 1)
        p[0] = np.exp(-lam)
        if kmax >= 1:
            p[1] = lam * th * p[0]
        for k in range(1, kmax):
            p[k + 1] = ((2 * q * k + lam * th) * p[k] - q * q * (k - 1) * p[k - 1]) / (k + 1)
        return p

    def pmf_direct(self, k: int) -> float:
        """Log-space evaluation of the defining finite sum (reference path)."""
        if k < 0:
            raise ValueError("k must be >= 0")
        if k == 0:
            return float(np.exp(-self.lam))
        s = np.arange(1, k + 1)
        log_binom = gammaln(k) - gammaln(s) - gammaln(k - s + 1)
        terms = (-self.lam + xlogy(s, self.lam) - gammaln(s + 1) + log_binom
                 + xlogy(s, self.theta) + xlog1py(k - s, -self.theta))
        return float(np.exp(logsumexp(terms)))

    def support_limit(self, mass: float = 1 - 1e-12, hard_max: int = 1_000_000) -> int:
        """Smallest K with p_0 + ... + p_K >= mass."""
        mean, var = self.moments()
        kmax = int(mean + 12 * np.sqrt(var) + 50)
        while True:
            cum = np.cumsum(self.pmf_table(kmax))
            hit = np.flatnonzero(cum >= mass)
            if len(hit) or kmax >= hard_max:
                return int(hit[0]) if len(hit) else kmax
            kmax *= 2

    def moments(self) -> tuple[float, float]:
        """(mean, variance)."""
        return self.lam / self.theta, self.lam * (2 - self.theta) / self.theta ** 2

    def sample(self, n: int, seed) -> np.ndarray:
        return sample_nc(self, n, seed)


def fit_moments(sample_mean: float, sample_variance: float) -> PolyaAeppli:
    """Invert the mean/variance relations.

    An under-dispersed sample (variance below the mean) cannot be matched; the
    fit then falls back to the Poisson boundary ``theta = 1`` and sets
    ``clamped``.
    """
    if not sample_mean > 0:
        raise FitError("sample mean must be positive")
    if sample_variance < sample_mean:
        warnings.warn("under-dispersed sample; clamping theta to 1", RuntimeWarning, stacklevel=2)
        return PolyaAeppli(float(sample_mean), 1.0, clamped=True)
    theta = 2 * sample_mean / (sample_mean + sample_variance)
    return PolyaAeppli(sample_mean * theta, theta)


def fit_sample(counts) -> PolyaAeppli:
    """Moment fit from raw counts (unbiased sample variance)."""
    c = np.asarray(counts, dtype=float)
    if c.size < 2:
        raise FitError("need at least two counts")
    return fit_moments(c.mean(), c.var(ddof=1))


def sample_nc(dist: PolyaAeppli, n: int, seed) -> np.ndarray:
    """Poisson many Geometric(theta) cluster sizes, summed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_generator(seed)
    clusters = rng.poisson(dist.lam, size=n)
    out = clusters.copy()
    pos = clusters > 0
    if dist.theta < 1:
        # sum of c geometrics on {1,..} = c + NegBin(c, theta) failures
        out[pos] += rng.negative_binomial(clusters[pos], dist.theta)
    return out
