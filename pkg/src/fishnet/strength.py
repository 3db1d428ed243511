"""Parent strength distribution of a single link and reproducible sampling.

The default constants give a Weibull lower tail grafted onto a Gaussian core
at 8.6 MPa.  The two branches do not meet exactly at the crossover; the jump
(about 4.3e-4 in probability) is kept as is.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

__all__ = ["StrengthDistribution", "make_generator", "sample_strengths"]

_BISECT_ITERS = 200


@dataclass(frozen=True)
class StrengthDistribution:
    """Piecewise Weibull/Gaussian CDF of link strength (MPa).

    For ``x <= crossover``::

        P1(x) = weibull_amplitude * (1 - exp(-(x / weibull_scale) ** weibull_exponent))

    and above it::

        P1(x) = gauss_offset - gauss_amplitude * erf(gauss_slope * (gauss_center - x))
    """

    weibull_amplitude: float = 2.55
    weibull_scale: float = 12.0
    weibull_exponent: float = 10.0
    crossover: float = 8.6
    gauss_offset: float = 0.526
    gauss_amplitude: float = 0.474
    gauss_slope: float = 0.884
    gauss_center: float = 10.0

    def lower_branch(self, x):
        x = np.asarray(x, dtype=float)
        return self.weibull_amplitude * -np.expm1(-((x / self.weibull_scale) ** self.weibull_exponent))

    def upper_branch(self, x):
        x = np.asarray(x, dtype=float)
        return self.gauss_offset - self.gauss_amplitude * erf(self.gauss_slope * (self.gauss_center - x))

    @property
    def crossover_gap(self) -> tuple[float, float]:
        """Values of the lower and upper branch at the crossover."""
        return float(self.lower_branch(self.crossover)), float(self.upper_branch(self.crossover))

    def cdf(self, x):
        """Evaluate P1 at stress ``x`` (scalar or array), clamped to [0, 1]."""
        xa = np.asarray(x, dtype=float)
        if np.any(xa < 0) or np.any(np.isnan(xa)):
            raise ValueError("strength CDF is defined for x >= 0 only")
        out = np.where(xa <= self.crossover, self.lower_branch(xa), self.upper_branch(xa))
        out = np.clip(out, 0.0, 1.0)
        return float(out) if np.ndim(x) == 0 else out

    def inverse_cdf(self, p):
        """Quantile function by bracketed bisection on each branch.

        Probabilities that fall inside the branch mismatch at the crossover
        map to the crossover itself.
        """
        pa = np.asarray(p, dtype=float)
        if np.any(pa < 0) or np.any(pa >= 1) or np.any(np.isnan(pa)):
            raise ValueError("inverse CDF needs p in [0, 1)")
        p_lo, p_hi = self.crossover_gap
        lower = pa <= p_lo
        upper = pa >= p_hi
        x = np.full(pa.shape, self.crossover)

        if np.any(lower):
            x[lower] = _bisect(self.lower_branch, pa[lower], 0.0, self.crossover)
        if np.any(upper):
            hi = self.gauss_center + 1.0
            while self.upper_branch(hi) < pa[upper].max() and hi < 1e6:
                hi = self.crossover + 2.0 * (hi - self.crossover)
            x[upper] = _bisect(self.upper_branch, pa[upper], self.crossover, hi)
        x[pa == 0] = 0.0
        return float(x) if np.ndim(p) == 0 else x

    def sample(self, n: int, seed) -> np.ndarray:
        return sample_strengths(n, seed, self)


def _bisect(f, target, lo, hi):
    """Vectorised bisection for the smallest x in [lo, hi] with f(x) >= target."""
    lo = np.full(target.shape, float(lo))
    hi = np.full(target.shape, float(hi))
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        below = f(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    # pick the bracket end whose value is closer; both are adjacent floats here
    return np.where(np.abs(f(lo) - target) < np.abs(f(hi) - target), lo, hi)


def make_generator(seed) -> np.random.Generator:
    """Counter-based (Philox) generator from an int or a ``SeedSequence``."""
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(ss))


def sample_strengths(n: int, seed, dist: StrengthDistribution | None = None) -> np.ndarray:
    """Draw ``n`` i.i.d. link strengths by inverse-transform sampling.

    The sequence depends only on ``(seed, n)``.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    dist = dist or StrengthDistribution()
    u = make_generator(seed).random(n)
    return dist.inverse_cdf(u)
