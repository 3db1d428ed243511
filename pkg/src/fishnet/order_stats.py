"""Finite-N distributions of the k-th smallest link strength.

Order ``k`` is 0-based throughout: ``wk(x, 0)`` is the CDF of the minimum,
``wk(x, k)`` the CDF of the (k+1)-th smallest of ``N`` i.i.d. strengths.

The default ``"exact"`` form counts how many of the ``N`` strengths fall
below ``x``::

    W_k(x) = P(Binomial(N, P1(x)) > k) = I_{P1(x)}(k + 1, N - k)

The ``"poisson"`` form is its large-N limit.  With ``t = -N log(1 - P1(x))``::

    W_k(x) = 1 - exp(-t) * sum_{s=0}^{k} t**s / s!

Both share ``W_0``; for ``k > 0`` the Poisson form overstates ``W_k`` by
O(k / N) (about 0.04 at N = 512, k = 20).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, gammaln, logsumexp

from .strength import StrengthDistribution

__all__ = ["OrderStatBasis", "poisson_upper_tail", "weibull_scale"]

FORMS = ("exact", "poisson")


@dataclass(frozen=True)
class OrderStatBasis:
    """Order-statistic CDFs of ``N`` i.i.d. draws from ``parent``.

    Parameters
    ----------
    N : int
    parent : StrengthDistribution
    form : {"exact", "poisson"}
        Binomial order statistic, or its Poisson limit.
    """

    N: int = 512
    parent: StrengthDistribution = field(default_factory=StrengthDistribution)
    form: str = "exact"

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}")

    def log_survival_min(self, x):
        """log(1 - W_0(x)) = N log(1 - P1(x))."""
        p1 = np.asarray(self.parent.cdf(x), dtype=float)
        with np.errstate(divide="ignore"):
            return self.N * np.log1p(-p1)

    def w0(self, x):
        """CDF of the minimum."""
        out = -np.expm1(self.log_survival_min(x))
        return float(out) if np.ndim(x) == 0 else out

    def wk(self, x, k: int):
        """CDF of the (k+1)-th smallest value."""
        k = int(k)
        if not 0 <= k < self.N:
            raise ValueError(f"order k={k} outside [0, {self.N - 1}]")
        if self.form == "exact":
            p1 = np.atleast_1d(np.asarray(self.parent.cdf(x), dtype=float))
            out = betainc(k + 1, self.N - k, p1)
        else:
            out = poisson_upper_tail(k, np.atleast_1d(-self.log_survival_min(x)))
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))

    def quantile(self, p: float, k: int = 0, tol: float = 1e-10) -> float:
        """Inverse of ``wk`` by bisection."""
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        lo, hi = 0.0, self.parent.gauss_center
        while self.wk(hi, k) < p:
            hi *= 2.0
        while hi - lo > tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if self.wk(mid, k) < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def poisson_upper_tail(k: int, t: np.ndarray) -> np.ndarray:
    """P(Poisson(t) > k), accurate in both tails.

    Below the mode the upper sum is accumulated directly in log space; above
    it the lower sum is and the result is taken as a complement with expm1.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    zero = t <= 0
    inf = np.isinf(t)
    out[zero] = 0.0
    out[inf] = 1.0
    rest = ~(zero | inf)
    tr = t[rest]
    if tr.size == 0:
        return out
    logt = np.log(tr)[:, None]
    res = np.empty_like(tr)

    small = tr <= k + 1
    if small.any():
        m = int(40 + 12 * np.sqrt(k + 1))
        s = np.arange(k + 1, k + 1 + m)
        terms = s * logt[small] - tr[small, None] - gammaln(s + 1)
        res[small] = np.exp(logsumexp(terms, axis=1))
    big = ~small
    if big.any():
        s = np.arange(0, k + 1)
        terms = s * logt[big] - tr[big, None] - gammaln(s + 1)
        res[big] = -np.expm1(logsumexp(terms, axis=1))
    out[rest] = np.clip(res, 0.0, 1.0)
    return out


def weibull_scale(p, x):
    """Weibull-paper coordinates ``(ln x, ln(-ln(1 - p)))``."""
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("Weibull scale needs 0 < p < 1")
    if np.any(x <= 0):
        raise ValueError("Weibull scale needs x > 0")
    a, o = np.log(x), np.log(-np.log1p(-p))
    if a.ndim == 0 and o.ndim == 0:
        return float(a), float(o)
    return a, o
