"""Sequentially linear (event-by-event) simulation of a softening fishnet.

Every event reloads the net from the stress-free state with the current
secant stiffnesses, finds the load factor at which exactly one link reaches
its residual strength, records the nominal stress and applies one softening
jump to that link.  The event count, not load or displacement, drives the
analysis.

Conventions
-----------
``k`` of an event is the number of distinct damaged links once that event's
link is counted, so the first event has ``k = 1``.  ``k`` grows exactly on
events that hit a previously undamaged link (``localized`` is False).
``N_c`` is the ``k`` of the first event reaching the peak nominal stress.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from .mesh import FishnetTopology, PRESCRIBED, link_elongation, snapshot

__all__ = [
    "SeparationError",
    "DegenerateLoadError",
    "BudgetExhaustedError",
    "SimulationRecord",
    "BandedCholesky",
    "critical_event",
    "solve_linear",
    "run_simulation",
]

log = logging.getLogger(__name__)

REFACTOR_EVERY = 64


class SeparationError(RuntimeError):
    """The stiffness system is singular: the specimen has separated."""


class DegenerateLoadError(RuntimeError):
    """No link carries positive stress under the unit end displacement."""


class BudgetExhaustedError(RuntimeError):
    """Event budget ran out before a termination rule fired."""

    def __init__(self, msg, record=None):
        super().__init__(msg)
        self.record = record


@dataclass
class SimulationRecord:
    """Per-replica outcome of :func:`run_simulation`.

    Attributes
    ----------
    k, sigma, link, localized : ndarray
        Event log (distinct-damage count, nominal stress in MPa, critical
        link id, whether that link was already damaged).
    strengths : ndarray
        Link strengths used for the run.
    J : int
        Jumps to full failure per link.
    status : str
        ``"drop"``, ``"separated"`` or ``"budget"``.
    counters : dict
        Factorizations, rank-1 modifications and update fallbacks.
    check_error : ndarray or None
        Per-event relative gap between the updated and a fresh solution.
    """

    k: np.ndarray
    sigma: np.ndarray
    link: np.ndarray
    localized: np.ndarray
    strengths: np.ndarray
    J: int
    status: str
    counters: dict = field(default_factory=dict)
    check_error: np.ndarray | None = None

    @property
    def n_events(self) -> int:
        return len(self.sigma)

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.sigma))

    @property
    def sigma_max(self) -> float:
        return float(self.sigma[self.peak_index])

    @property
    def n_c(self) -> int:
        return int(self.k[self.peak_index])

    def ratio_trace(self, rule: str = "max") -> tuple[np.ndarray, np.ndarray]:
        """``(k, s_(k) / sigma_N)`` up to the peak, ``s_(k)`` the k-th smallest strength.

        Several events can share a ``k`` (a damaged link jumping again).
        ``rule="max"`` uses the largest nominal stress among them,
        ``rule="first"`` the event that brought ``k`` up to its value.
        """
        stop = self.peak_index + 1
        ks = self.k[:stop]
        if rule == "max":
            sig = np.zeros(ks[-1] + 1)
            np.maximum.at(sig, ks, self.sigma[:stop])
        elif rule == "first":
            sig = np.zeros(ks[-1] + 1)
            first = ~self.localized[:stop]
            sig[ks[first]] = self.sigma[:stop][first]
        else:
            raise ValueError(f"unknown rule {rule!r}")
        kk = np.unique(ks)
        s_sorted = np.sort(self.strengths)
        return kk, s_sorted[kk - 1] / sig[kk]

    def jumps_at(self, event: int) -> np.ndarray:
        """Per-link jump counts right after ``event`` was applied."""
        return np.bincount(self.link[: event + 1], minlength=len(self.strengths))

    def stage_events(self) -> dict:
        """Event indices of the four reporting stages.

        A is halfway to the peak, B the peak, C the first event below 80 % of
        the peak afterwards and D the last event.
        """
        p = self.peak_index
        after = np.flatnonzero(self.sigma[p:] < 0.8 * self.sigma_max)
        c = p + int(after[0]) if len(after) else self.n_events - 1
        return {"A": p // 2, "B": p, "C": c, "D": self.n_events - 1}

    def write_event_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["event", "k", "sigmaN", "link", "localized"])
            for i in range(self.n_events):
                w.writerow([i, int(self.k[i]), repr(float(self.sigma[i])),
                            int(self.link[i]), int(self.localized[i])])

    def snapshots(self, topology: FishnetTopology) -> dict:
        """JSON-ready damage fields keyed by stage label."""
        out = {}
        for label, ev in self.stage_events().items():
            snap = snapshot(topology, self.strengths, self.jumps_at(ev), self.J, label)
            snap["event"] = int(ev)
            snap["sigmaN"] = float(self.sigma[ev])
            out[label] = snap
        return out


class BandedCholesky:
    """Banded LL^T factor of the reduced stiffness with rank-1 modification.

    Parameters
    ----------
    band : (n, bw + 1) array
        Lower band of the symmetric matrix, ``band[i, d] = A[i, i - d]``.
    """

    def __init__(self, band):
        self.L = np.array(band, dtype=float, copy=True)
        self.n, w = self.L.shape
        self.bw = w - 1
        if not kern.band_factor(self.L, self.n, self.bw):
            raise SeparationError("non-positive pivot in Cholesky factorization")

    @classmethod
    def from_dense(cls, A, bw):
        A = np.asarray(A, dtype=float)
        n = len(A)
        band = np.zeros((n, bw + 1))
        for d in range(bw + 1):
            band[d:, d] = np.diagonal(A, -d)
        return cls(band)

    def solve(self, b):
        x = np.array(b, dtype=float, copy=True)
        kern.band_solve(self.L, x, self.n, self.bw, 0)
        return x

    def update(self, v, sign=1.0):
        """Refactor in place for ``A + sign * v v^T``; raises on a pivot alarm."""
        x = np.array(v, dtype=float, copy=True)
        nz = np.flatnonzero(x)
        if len(nz) == 0:
            return
        if not kern.band_rank1(self.L, x, float(sign), self.n, self.bw, int(nz[0])):
            raise SeparationError("rank-1 downdate lost positive definiteness")

    def to_dense(self):
        L = np.zeros((self.n, self.n))
        for d in range(self.bw + 1):
            idx = np.arange(d, self.n)
            L[idx, idx - d] = self.L[d:, d]
        return L


def band_system(topology: FishnetTopology, link_stiffness, pinned=None):
    """Banded reduced stiffness and unit-displacement load vector."""
    n, bw = topology.n_free, topology.bandwidth
    pinned = np.zeros(n, bool) if pinned is None else np.asarray(pinned, bool)
    band = np.zeros((n, bw + 1))
    f = np.zeros(n)
    da, db = topology.link_dofs.T
    kern.band_assemble(band, f, np.ascontiguousarray(da), np.ascontiguousarray(db),
                       np.asarray(link_stiffness, dtype=float), pinned, n)
    return band, f


def solve_linear(topology: FishnetTopology, link_stiffness, pinned=None) -> np.ndarray:
    """Free nodal displacements under a unit end displacement."""
    band, f = band_system(topology, link_stiffness, pinned)
    return BandedCholesky(band).solve(f)


def critical_event(topology: FishnetTopology, link_stiffness, residual) -> tuple[float, int]:
    """Load factor at which the first link reaches its residual strength.

    Returns ``(load_factor, link_id)``; the load factor multiplies the unit
    end displacement.  Exact ties go to the lowest link id.
    """
    residual = np.asarray(residual, dtype=float)
    stiff = np.asarray(link_stiffness, dtype=float)
    u = solve_linear(topology, stiff)
    stress = stiff * link_elongation(topology, u) / topology.area
    ok = (residual > 0) & (stress > 0)
    if not ok.any():
        raise DegenerateLoadError("no link is stressed in tension")
    ratio = np.full(len(stress), np.inf)
    ratio[ok] = residual[ok] / stress[ok]
    crit = int(np.argmin(ratio))
    return float(ratio[crit]), crit


def nominal_stress(topology: FishnetTopology, link_stiffness, u) -> float:
    """Nominal stress for free displacements ``u``: end reaction over the gap section."""
    stiff = np.asarray(link_stiffness, dtype=float)
    e = link_elongation(topology, u)
    right = topology.link_dofs[:, 1] == PRESCRIBED
    return float(np.sum(stiff[right] * e[right]) / (2 * topology.rows * topology.area))


_STATUS = {kern.STOP_DROP: "drop", kern.STOP_SEPARATED: "separated", kern.STOP_BUDGET: "budget"}


class _Arrays:
    """Contiguous topology arrays handed to the compiled kernel (cached per topology)."""

    _cache: dict = {}

    def __new__(cls, topology):
        key = id(topology)
        hit = cls._cache.get(key)
        if hit is not None and hit.topology is topology:
            return hit
        self = super().__new__(cls)
        self.topology = topology
        dofs = topology.link_dofs
        self.a_dof = np.ascontiguousarray(dofs[:, 0])
        self.b_dof = np.ascontiguousarray(dofs[:, 1])
        self.a_node = np.ascontiguousarray(topology.link_nodes[:, 0])
        self.b_node = np.ascontiguousarray(topology.link_nodes[:, 1])
        self.node_dof = np.ascontiguousarray(topology.node_dof)
        inc = np.concatenate([self.a_node, self.b_node])
        lid = np.concatenate([np.arange(topology.n_links)] * 2)
        order = np.argsort(inc, kind="stable")
        self.node_links = np.ascontiguousarray(lid[order])
        self.node_ptr = np.concatenate([[0], np.cumsum(np.bincount(inc, minlength=topology.n_nodes))])
        if len(cls._cache) > 64:
            cls._cache.clear()
        cls._cache[key] = self
        return self


def run_simulation(topology: FishnetTopology, strengths, kt_ratio: float, J: int,
                   termination: float = 0.05, max_events: int | None = None,
                   mode: str = "update", refactor_every: int = REFACTOR_EVERY) -> SimulationRecord:
    """Trace one replica from first damage past the peak.

    Parameters
    ----------
    topology : FishnetTopology
    strengths : (n_links,) array
        Link strengths in MPa.
    kt_ratio : float
        Softening slope as a fraction of the initial stiffness, ``Kt / K0``.
        Either sign is accepted; the slope is always taken as negative.
    J : int
        Softening jumps to full failure.
    termination : float
        Stop once the nominal stress falls below this fraction of the peak.
    max_events : int, optional
        Event budget, ``n_links * J`` by default.
    mode : {"update", "refactor", "check"}
        ``"update"`` reuses the factor through rank-1 downdates,
        ``"refactor"`` factorizes afresh at every event and ``"check"`` runs
        the update path while comparing against a fresh solve each event.
    """
    strengths = np.ascontiguousarray(strengths, dtype=float)
    if strengths.shape != (topology.n_links,):
        raise ValueError(f"need {topology.n_links} strengths, got {strengths.shape}")
    if np.any(strengths <= 0):
        raise ValueError("strengths must be positive")
    if J < 1:
        raise ValueError("J must be >= 1")
    if kt_ratio == 0 or not np.isfinite(kt_ratio):
        raise ValueError("softening slope must be finite and nonzero")
    modes = {"update": kern.MODE_UPDATE, "refactor": kern.MODE_REFACTOR, "check": kern.MODE_CHECK}
    if mode not in modes:
        raise ValueError(f"unknown solver mode {mode!r}")
    budget = topology.n_links * J if max_events is None else int(max_events)

    arr = _Arrays(topology)
    k0 = topology.k0
    ks, sig, links, loc, status, counters, chk = kern.run_events(
        arr.a_dof, arr.b_dof, arr.a_node, arr.b_node, arr.node_dof, arr.node_ptr, arr.node_links,
        topology.n_free, topology.bandwidth, 2.0 * topology.rows, topology.area,
        k0, abs(kt_ratio) * k0, int(J), strengths,
        float(termination), budget, int(refactor_every), modes[mode])

    if status == kern.STOP_DEGENERATE:
        raise DegenerateLoadError("no link carries tension")
    if status == kern.STOP_NUMERIC:
        raise SeparationError("factorization failed on a connected net")
    if len(sig) == 0:
        raise SeparationError("no event could be computed")
    rec = SimulationRecord(
        k=ks, sigma=sig, link=links, localized=loc, strengths=strengths, J=int(J),
        status=_STATUS[status],
        counters={"factorizations": int(counters[0]), "rank1": int(counters[1]),
                  "fallbacks": int(counters[2])},
        check_error=chk if mode == "check" else None,
    )
    if status == kern.STOP_BUDGET:
        raise BudgetExhaustedError(f"event budget {budget} exhausted", rec)
    return rec
