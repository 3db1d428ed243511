import json

import numpy as np
import pytest

from fishnet.mesh import (
    FIXED,
    PRESCRIBED,
    LinkState,
    assemble_stiffness,
    build_topology,
    link_elongation,
    residual_strength,
    secant_stiffness,
    secant_stiffness_array,
    snapshot,
    write_snapshot,
)


def test_default_net_has_512_links():
    t = build_topology(16, 16)
    assert t.n_links == 512
    assert t.k0 == pytest.approx(100.0)


def test_smallest_net():
    t = build_topology(2, 2)
    assert t.n_links == 8
    assert t.n_nodes == 6
    assert t.is_connected()


@pytest.mark.parametrize("R,C", [(2, 2), (3, 5), (8, 8), (16, 16)])
def test_links_per_gap(R, C):
    t = build_topology(R, C)
    np.testing.assert_array_equal(np.bincount(t.link_gap), np.full(C, 2 * R))


@pytest.mark.parametrize("R,C", [(2, 2), (4, 3)])
def test_every_node_has_degree_four_inside(R, C):
    t = build_topology(R, C)
    deg = np.bincount(t.link_nodes.ravel(), minlength=t.n_nodes)
    col = np.arange(t.n_nodes) // R
    assert np.all(deg[(col > 0) & (col < C)] == 4)
    assert np.all(deg[(col == 0) | (col == C)] == 2)


def test_boundary_codes():
    t = build_topology(4, 3)
    assert np.all(t.node_dof[t.left_nodes] == FIXED)
    assert np.all(t.node_dof[t.right_nodes] == PRESCRIBED)
    free = t.node_dof[t.node_dof >= 0]
    np.testing.assert_array_equal(np.sort(free), np.arange(t.n_free))


@pytest.mark.parametrize("R,C", [(1, 4), (4, 1)])
def test_rejects_degenerate_grid(R, C):
    with pytest.raises(ValueError):
        build_topology(R, C)


def test_disconnected_when_gap_removed():
    t = build_topology(3, 3)
    assert not t.is_connected(t.link_gap != 1)


@pytest.mark.parametrize("j,expected", [(0, 10.0), (20, 0.0), (1, 9.5)])
def test_residual_strength(j, expected):
    assert residual_strength(LinkState(10.0, j, 20, 1.0, -1.0)) == pytest.approx(expected)


def test_residual_strength_rejects_overdamage():
    with pytest.raises(ValueError):
        residual_strength(LinkState(10.0, 21, 20, 1.0, -1.0))


def test_secant_undamaged_and_failed():
    assert secant_stiffness(LinkState(5.0, 0, 20, 100.0, -10.0)) == pytest.approx(100.0)
    assert secant_stiffness(LinkState(5.0, 20, 20, 100.0, -10.0)) == 0.0


def test_secant_half_damage_by_hand():
    # F0/2 on the softening line F = F0 - (u - F0) sits at u = 1.5 F0
    assert secant_stiffness(LinkState(1.0, 10, 20, 1.0, -1.0)) == pytest.approx(1 / 3)


@pytest.mark.parametrize("ratio", [0.01, 0.1, 0.5, 2.0])
def test_secant_point_lies_on_softening_line(ratio):
    K0, F0, J = 100.0, 7.0, 20
    kt = -ratio * K0
    for j in range(J + 1):
        kr = secant_stiffness(LinkState(F0, j, J, K0, kt))
        F = F0 * (J - j) / J
        if kr > 0:
            u = F / kr
            assert F == pytest.approx(F0 + kt * (u - F0 / K0), rel=1e-12, abs=1e-12)


def test_secant_rejects_hardening():
    with pytest.raises(ValueError):
        secant_stiffness(LinkState(1.0, 0, 20, 1.0, 0.5))


def test_secant_array_matches_scalar():
    j = np.arange(21)
    np.testing.assert_allclose(
        secant_stiffness_array(j, 20, 100.0, -10.0),
        [secant_stiffness(LinkState(1.0, int(v), 20, 100.0, -10.0)) for v in j], rtol=1e-15)


def _solve(t, k):
    K, f = assemble_stiffness(t, k)
    return np.linalg.solve(K.toarray(), f)


def test_undamaged_field_is_uniform():
    t = build_topology(5, 4)
    k = np.full(t.n_links, t.k0)
    e = link_elongation(t, _solve(t, k))
    np.testing.assert_allclose(e, 1.0 / t.gaps, rtol=1e-12)


def test_stiffness_symmetric_exactly():
    t = build_topology(4, 5)
    k = np.random.default_rng(0).uniform(1, 100, t.n_links)
    K = assemble_stiffness(t, k)[0].toarray()
    assert np.array_equal(K, K.T)


def test_failed_link_contributes_nothing():
    t = build_topology(3, 3)
    k = np.full(t.n_links, t.k0)
    base = assemble_stiffness(t, k)[0].toarray()
    lid = 7
    k[lid] = 0.0
    K = assemble_stiffness(t, k)[0].toarray()
    a, b = t.link_dofs[lid]
    diff = base - K
    touched = [d for d in (a, b) if d >= 0]
    mask = np.zeros_like(diff, bool)
    for p in touched:
        for q in touched:
            mask[p, q] = True
    assert np.all(diff[~mask] == 0)
    for p in touched:
        assert diff[p, p] == pytest.approx(t.k0)


def test_pinned_dofs_are_decoupled():
    t = build_topology(3, 3)
    pinned = np.zeros(t.n_free, bool)
    pinned[2] = True
    K = assemble_stiffness(t, np.full(t.n_links, t.k0), pinned)[0].toarray()
    assert K[2, 2] == 1.0
    assert np.count_nonzero(K[2]) == 1 and np.count_nonzero(K[:, 2]) == 1


def test_snapshot_layout(tmp_path):
    t = build_topology(2, 2)
    s = np.linspace(5, 8, t.n_links)
    j = np.arange(t.n_links) % 3
    snap = snapshot(t, s, j, 4, "B")
    assert snap["label"] == "B" and snap["J"] == 4
    assert len(snap["links"]) == 8 and len(snap["nodes"]) == 6
    assert snap["links"][2]["damage"] == pytest.approx(0.5)
    write_snapshot(tmp_path / "s.json", t, s, j, 4, "B")
    assert json.loads((tmp_path / "s.json").read_text()) == snap
