"""Failure probability as a Polya-Aeppli-weighted mixture of order statistics.

For a net of ``N`` links::

    P_f(x) = sum_{k >= k0} w_k * W_{m(k)}(gamma_{m(k)} * x),   m(k) = k - dk - 1

where ``w_k`` are the damage-count probabilities renormalized over
``k >= k0``, ``W_m`` is the 0-based order-statistic CDF (``W_0`` is the
minimum) and ``gamma_m`` scales the (m+1)-th smallest strength to the nominal
stress.  A peak reached with ``k`` damaged links is therefore governed by the
k-th smallest strength, shifted down by ``dk``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .order_stats import OrderStatBasis, weibull_scale
from .polya_aeppli import PolyaAeppli

__all__ = [
    "TailModel",
    "NoDefaultError",
    "gamma_default",
    "gamma_rational",
    "gamma_linear",
    "table1_defaults",
    "failure_probability",
    "strength_at_probability",
]

WEIGHT_MASS = 1 - 1e-10

_TABLE1 = {0.1: (5, 0), 0.2: (5, 2), 0.3: (5, 3), 0.5: (5, 3)}


class NoDefaultError(KeyError):
    """No tabulated (k0, dk) for the requested softening slope."""


def gamma_default(k, N: int):
    """Stress-to-order-statistic factor ``N / (N - k)``."""
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k >= N):
        raise ValueError(f"gamma needs 0 <= k < N={N}")
    out = N / (N - k)
    return float(out) if out.ndim == 0 else out


def gamma_rational(N: int, c: float = 1.0) -> Callable:
    """``k -> N / (N - c k)``; ``c = 1`` gives :func:`gamma_default`."""
    def gamma(k):
        return N / (N - c * np.asarray(k, dtype=float))
    return gamma


def gamma_linear(slope: float, intercept: float = 1.0) -> Callable:
    """``k -> intercept + slope * k``."""
    def gamma(k):
        return intercept + slope * np.asarray(k, dtype=float)
    return gamma


def table1_defaults(kt_ratio: float) -> tuple[int, int]:
    """Tabulated (k0, dk) for ``|Kt/K0|`` in {0.1, 0.2, 0.3, 0.5}."""
    key = round(abs(float(kt_ratio)), 6)
    if key not in _TABLE1:
        raise NoDefaultError(f"no tabulated (k0, dk) for |Kt/K0| = {kt_ratio}; pass them explicitly")
    return _TABLE1[key]


@dataclass(frozen=True)
class TailModel:
    """Order-statistic mixture model of the nominal strength.

    Parameters
    ----------
    basis : OrderStatBasis
    weights : PolyaAeppli
        Law of the number of damaged links at peak load.
    k0 : int
        Smallest damage count kept in the mixture (>= 1).
    dk : int
        Downward shift of the order index, ``0 <= dk <= k0``.
    gamma : callable, optional
        ``m -> factor`` on the 0-based order index; defaults to ``N / (N - m)``.
    """

    basis: OrderStatBasis
    weights: PolyaAeppli
    k0: int = 1
    dk: int = 0
    gamma: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.k0 < 1:
            raise ValueError("k0 must be >= 1")
        if self.dk < 0:
            raise ValueError("dk must be >= 0")
        if self.dk > self.k0:
            raise ValueError(f"shift dk={self.dk} exceeds truncation k0={self.k0}")

    def gamma_of(self, m):
        if self.gamma is None:
            return gamma_default(m, self.basis.N)
        return np.asarray(self.gamma(m), dtype=float)

    def terms(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(damage counts k, renormalized weights, 0-based orders m) of the mixture.

        Weights are cut where the cumulative mass reaches ``1 - 1e-10``;
        counts beyond ``N`` are folded into the last term.  An order pushed
        below the minimum by the shift is held at the minimum.
        """
        N = self.basis.N
        kmax = max(self.weights.support_limit(WEIGHT_MASS), self.k0)
        p = self.weights.pmf_table(kmax)
        if kmax > N:
            p[N] += p[N + 1:].sum()
            p = p[: N + 1]
            kmax = N
        ks = np.arange(self.k0, kmax + 1)
        w = p[self.k0:]
        total = w.sum()
        if not total > 0:
            raise ValueError("no weight left above the truncation order")
        m = np.maximum(ks - self.dk - 1, 0)
        return ks, w / total, m

    def cdf(self, x):
        return failure_probability(x, self)

    def weibull_curve(self, x):
        """(x, P_f, ln x, ln(-ln(1 - P_f))) on a grid of positive x."""
        x = np.asarray(x, dtype=float)
        pf = failure_probability(x, self)
        ok = (pf > 0) & (pf < 1)
        wx = np.full(x.shape, np.nan)
        wy = np.full(x.shape, np.nan)
        wx[ok], wy[ok] = weibull_scale(pf[ok], x[ok])
        return x, pf, wx, wy


def failure_probability(x, model: TailModel):
    """Mixture CDF of the nominal strength at stress ``x`` (MPa)."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xa < 0):
        raise ValueError("x must be >= 0")
    ks, w, m = model.terms()
    g = model.gamma_of(m)
    basis = model.basis
    out = np.zeros(xa.shape)
    for mi in np.unique(m):
        sel = m == mi
        # every term with the same order shares the gamma factor
        out += w[sel].sum() * basis.wk(g[sel][0] * xa, int(mi))
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if np.ndim(x) == 0 else out


def strength_at_probability(p: float, model: TailModel, tol: float = 1e-6) -> float:
    """Stress at which the mixture reaches failure probability ``p``.

    If ``p`` lies below the smallest probability the mixture can resolve the
    bracket's lower end (the numeric floor) is returned.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    lo, hi = 1e-6, model.basis.parent.gauss_center
    while failure_probability(hi, model) < p:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("probability not reached")
    if failure_probability(lo, model) >= p:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if failure_probability(mid, model) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
