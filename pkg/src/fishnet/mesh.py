"""Collapsed (one dof per node) fishnet topology and the discrete softening law.

Nodes sit on an ``rows x (gaps + 1)`` grid.  Node ``(r, c)`` is linked to
``(r, c + 1)`` and ``((r + 1) % rows, c + 1)``, so every gap holds ``2 * rows``
links and the net wraps around transversely.  Column 0 is fixed (u = 0) and
the last column carries the prescribed end displacement.

Free dofs are numbered column by column, ``dof = (c - 1) * rows + r``, which
keeps the stiffness matrix banded with half-bandwidth ``rows + 1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "FIXED",
    "PRESCRIBED",
    "FishnetTopology",
    "LinkState",
    "build_topology",
    "residual_strength",
    "secant_stiffness",
    "assemble_stiffness",
    "snapshot",
    "write_snapshot",
]

FIXED = -1
PRESCRIBED = -2


@dataclass(frozen=True, eq=False)
class FishnetTopology:
    """Immutable description of the net.

    Attributes
    ----------
    rows, gaps : int
        Grid size; the number of links is ``2 * rows * gaps``.
    length, area, modulus : float
        Link length (mm), cross-section (mm^2) and Young's modulus (MPa).
    node_dof : (n_nodes,) int array
        Free dof of each node, or ``FIXED`` / ``PRESCRIBED``.
    link_nodes : (n_links, 2) int array
        Left and right node of every link.
    link_gap : (n_links,) int array
        Gap index of every link.
    """

    rows: int
    gaps: int
    length: float
    area: float
    modulus: float
    node_dof: np.ndarray = field(repr=False)
    link_nodes: np.ndarray = field(repr=False)
    link_gap: np.ndarray = field(repr=False)

    @property
    def n_links(self) -> int:
        return len(self.link_gap)

    @property
    def n_nodes(self) -> int:
        return len(self.node_dof)

    @property
    def n_free(self) -> int:
        return self.rows * (self.gaps - 1)

    @property
    def bandwidth(self) -> int:
        return max(0, min(self.rows + 1, self.n_free - 1))

    @property
    def k0(self) -> float:
        """Initial link stiffness E A / L."""
        return self.modulus * self.area / self.length

    @property
    def link_dofs(self) -> np.ndarray:
        """(n_links, 2) dof numbers of both link ends (negative for boundary)."""
        return self.node_dof[self.link_nodes]

    @property
    def left_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_dof == FIXED)

    @property
    def right_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_dof == PRESCRIBED)

    def node_index(self, row: int, col: int) -> int:
        return col * self.rows + row

    def node_position(self, node: int) -> tuple[int, int]:
        """(row, column) of a node."""
        return node % self.rows, node // self.rows

    def is_connected(self, active=None) -> bool:
        """True if the links (optionally only ``active`` ones) connect all nodes."""
        mask = np.ones(self.n_links, bool) if active is None else np.asarray(active, bool)
        a, b = self.link_nodes[mask].T
        g = sp.coo_matrix((np.ones(len(a)), (a, b)), shape=(self.n_nodes,) * 2)
        n_comp, _ = sp.csgraph.connected_components(g, directed=False)
        return n_comp == 1

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "gaps": self.gaps,
            "length": self.length,
            "area": self.area,
            "modulus": self.modulus,
            "nodes": [
                {"id": int(i), "row": int(i % self.rows), "column": int(i // self.rows), "dof": int(d)}
                for i, d in enumerate(self.node_dof)
            ],
            "links": [
                {"id": int(i), "nodes": [int(a), int(b)], "gap": int(g)}
                for i, ((a, b), g) in enumerate(zip(self.link_nodes, self.link_gap))
            ],
        }


def build_topology(rows: int = 16, gaps: int = 16, length: float = 0.01,
                   area: float = 1.0, modulus: float = 1.0) -> FishnetTopology:
    """Build the diagonally coupled, transversely periodic net."""
    if rows < 2 or gaps < 2:
        raise ValueError("fishnet needs rows >= 2 and gaps >= 2")
    if length <= 0 or area <= 0 or modulus <= 0:
        raise ValueError("length, area and modulus must be positive")
    n_nodes = rows * (gaps + 1)
    cols = np.arange(n_nodes) // rows
    node_dof = np.arange(n_nodes) - rows
    node_dof[cols == 0] = FIXED
    node_dof[cols == gaps] = PRESCRIBED

    links = []
    for c in range(gaps):
        for r in range(rows):
            a = c * rows + r
            links.append((a, (c + 1) * rows + r))
            links.append((a, (c + 1) * rows + (r + 1) % rows))
    link_nodes = np.array(links, dtype=np.int64)
    link_gap = np.repeat(np.arange(gaps), 2 * rows)
    return FishnetTopology(rows, gaps, float(length), float(area), float(modulus),
                           node_dof, link_nodes, link_gap)


@dataclass(frozen=True)
class LinkState:
    """Damage state of one link after ``j`` of ``J`` softening jumps."""

    strength: float
    j: int
    J: int
    k0: float
    kt: float

    @property
    def damage(self) -> float:
        return self.j / self.J


def residual_strength(state: LinkState) -> float:
    """Strength left after ``j`` equal drops of ``strength / J``."""
    if not 0 <= state.j <= state.J:
        raise ValueError(f"jump count {state.j} outside [0, {state.J}]")
    return state.strength * (state.J - state.j) / state.J


def secant_stiffness(state: LinkState) -> float:
    """Secant stiffness that keeps the state point on the linear softening line."""
    if state.kt >= 0:
        raise ValueError("softening stiffness kt must be negative")
    if not 0 <= state.j <= state.J:
        raise ValueError(f"jump count {state.j} outside [0, {state.J}]")
    return secant_stiffness_array(state.j, state.J, state.k0, state.kt)


def secant_stiffness_array(j, J, k0, kt):
    kt = abs(kt)
    return (J - np.asarray(j)) * k0 * kt / (J * kt + np.asarray(j) * k0)


def assemble_stiffness(topology: FishnetTopology, link_stiffness, pinned=None):
    """Reduced stiffness matrix and load vector for a unit end displacement.

    Parameters
    ----------
    topology : FishnetTopology
    link_stiffness : (n_links,) array
        Current secant stiffness of every link.
    pinned : (n_free,) bool array, optional
        Dofs detached from both boundaries; they get a unit diagonal and no
        coupling.

    Returns
    -------
    K : scipy.sparse.csr_matrix
        Symmetric reduced stiffness over the free dofs.
    f : ndarray
        Load vector produced by the prescribed unit displacement.
    """
    k = np.asarray(link_stiffness, dtype=float)
    if k.shape != (topology.n_links,):
        raise ValueError("need one stiffness per link")
    n = topology.n_free
    pinned = np.zeros(n, bool) if pinned is None else np.asarray(pinned, bool)
    da, db = topology.link_dofs.T
    skip = ((da >= 0) & pinned[np.maximum(da, 0)]) | ((db >= 0) & pinned[np.maximum(db, 0)])
    keep = (k != 0) & ~skip

    rows, cols, vals = [], [], []
    f = np.zeros(n)
    for a, b, kk in zip(da[keep], db[keep], k[keep]):
        if a >= 0:
            rows.append(a); cols.append(a); vals.append(kk)
        if b >= 0:
            rows.append(b); cols.append(b); vals.append(kk)
        if a >= 0 and b >= 0:
            rows += [a, b]; cols += [b, a]; vals += [-kk, -kk]
        if b == PRESCRIBED and a >= 0:
            f[a] += kk
    idx = np.flatnonzero(pinned)
    rows += list(idx); cols += list(idx); vals += [1.0] * len(idx)
    K = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return K, f


def link_elongation(topology: FishnetTopology, u: np.ndarray) -> np.ndarray:
    """Elongation of every link for free displacements ``u`` and unit end displacement."""
    full = np.concatenate([u, [1.0, 0.0]])  # index -2 -> prescribed, -1 -> fixed
    da, db = topology.link_dofs.T
    return full[db] - full[da]


def snapshot(topology: FishnetTopology, strengths, jumps, J: int, label: str = "") -> dict:
    """Damage field in the documented JSON layout: topology plus per-link s, j, damage."""
    jumps = np.asarray(jumps)
    out = topology.to_dict()
    out["label"] = label
    out["J"] = int(J)
    for rec, s, j in zip(out["links"], np.asarray(strengths), jumps):
        rec["s"] = float(s)
        rec["j"] = int(j)
        rec["damage"] = float(j) / J
    return out


def write_snapshot(path, topology, strengths, jumps, J, label=""):
    with open(path, "w") as fh:
        json.dump(snapshot(topology, strengths, jumps, J, label), fh, indent=1)
