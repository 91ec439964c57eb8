import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from empsn import complex as cx
from empsn.errors import InvalidAdjacencyError
from empsn.geometry import RigidMotion, apply_motion
from empsn.invariants import (BOUNDARY_LAYOUT, UPPER_LAYOUT, Diagnostics, all_invariants,
                              batched_invariants, boundary_invariants, compile_plan, layout_width,
                              upper_invariants)
from empsn.nn.autodiff import Tensor

seeds = st.integers(0, 2**32 - 1)
KINDS = ("boundary", "coboundary", "upper")
UNIT_TET = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)


def random_complex(r, n=None, dim=3, max_dim=3):
    n = n or int(r.integers(3, 9))
    pts = r.standard_normal((n, dim))
    return cx.vietoris_rips(pts, float(r.uniform(1.0, 3.0)), max_dim)


def sorted_rows(a):
    a = np.round(a, 9)
    return a[np.lexsort(a.T[::-1])] if len(a) else a


# per-pair examples ----------------------------------------------------------------

def test_upper_node_pair():
    x = np.array([[0, 0, 0], [3, 4, 0]], dtype=float)
    assert upper_invariants((0,), (1,), (0, 1), x).tolist() == [0, 0, 0, 5, 0, 0, 0]


def test_upper_tetrahedron_faces():
    v = upper_invariants((0, 1, 2), (0, 1, 3), (0, 1, 2, 3), UNIT_TET)
    s2 = math.sqrt(2)
    expected = [(1 + s2) / 2, (1 + s2) / 2, 1.0, s2, 0.5, 0.5, math.pi / 2]
    assert v == pytest.approx(expected, abs=1e-14)


def test_upper_edge_pair_in_triangle():
    x = np.array([[0, 0], [1, 0], [0, 1]], dtype=float)
    v = upper_invariants((0, 1), (0, 2), (0, 1, 2), x)
    # a = 1, b = 2, shared = {0}
    assert v == pytest.approx([1, 1, 0, math.sqrt(2), 1, 1, math.pi / 2], abs=1e-14)


def test_upper_velocity_slots():
    x = np.array([[0, 0, 0], [1, 0, 0]], dtype=float)
    vel = np.array([[1, 2, 2], [0, 3, 4]], dtype=float)
    v = upper_invariants((0,), (1,), (0, 1), x, velocities=vel)
    assert v[7:].tolist() == [14.0, 3.0, 5.0]


def test_upper_precondition_errors():
    with pytest.raises(InvalidAdjacencyError):
        upper_invariants((0, 1), (2, 3), (0, 1, 2, 3), UNIT_TET)
    with pytest.raises(InvalidAdjacencyError):
        upper_invariants((0, 1), (0, 2), (0, 1, 3), UNIT_TET)
    with pytest.raises(InvalidAdjacencyError):
        upper_invariants((0,), (0,), (0,), UNIT_TET)


def test_boundary_edge_in_triangle():
    x = np.array([[0, 0], [1, 0], [0, 1]], dtype=float)
    v = boundary_invariants((0, 1), (0, 1, 2), x)
    assert v[:4] == pytest.approx([(1 + math.sqrt(2)) / 2, 1.0, 1.0, 0.5], abs=1e-14)
    # angles between edges inside the triangle: with face {0,1}: 90 and 45 degrees
    assert v[4] == pytest.approx((math.pi / 2 + math.pi / 4) / 2, abs=1e-14)
    assert v[5] == pytest.approx(math.pi / 4, abs=1e-14)


def test_boundary_vertex_in_edge():
    x = np.array([[0, 0, 0], [2, 0, 0]], dtype=float)
    assert boundary_invariants((0,), (0, 1), x).tolist() == [2, 0, 0, 2, 0, 0]


def test_boundary_precondition_error():
    with pytest.raises(InvalidAdjacencyError):
        boundary_invariants((0, 1), (0, 2, 3), UNIT_TET)


# tables ------------------------------------------------------------------------------

def test_single_edge_table():
    K = cx.vietoris_rips([[0, 0, 0], [0, 0, 2.5]], 3.0, 2)
    adj = cx.build_adjacency(K, KINDS)
    t = all_invariants(K, adj)
    assert t.values[("upper", 0, 0)].tolist() == [[0, 0, 0, 2.5, 0, 0, 0]] * 2
    assert len(t.values[("boundary", 0, 1)]) == 2
    assert len(t.values[("coboundary", 1, 0)]) == 2
    assert len(t.values[("upper", 1, 1)]) == 0


def test_full_tetrahedron_counts_and_values():
    K = cx.vietoris_rips(UNIT_TET, 2.0, 2)
    adj = cx.build_adjacency(K, KINDS)
    t = all_invariants(K, adj)
    # ordered pairs of faces per parent: 4 vertices in 6 edges, 6 edges in 4 triangles
    assert len(t.values[("upper", 0, 0)]) == 6 * 2
    assert len(t.values[("upper", 1, 1)]) == 4 * 6
    assert len(t.values[("boundary", 0, 1)]) == 6 * 2
    assert len(t.values[("boundary", 1, 2)]) == 4 * 3
    assert len(t.values[("coboundary", 2, 1)]) == 4 * 3
    # spot check the coboundary row of triangle {1,2,3} -> edge {1,2}
    a = adj[("coboundary", 2, 1)]
    tri, edge = K.index_of((1, 2, 3))[1], K.index_of((1, 2))[1]
    row = [i for i, (s, r) in enumerate(a.pairs()) if s == tri and r == edge][0]
    oracle = boundary_invariants((1, 2), (1, 2, 3), UNIT_TET)
    assert t.values[("coboundary", 2, 1)][row] == pytest.approx(oracle, abs=1e-15)
    assert oracle[0] == pytest.approx(math.sqrt(2)) and oracle[3] == pytest.approx(math.sqrt(3) / 2)


def test_coincident_points_degenerate():
    K = cx.vietoris_rips([[1.0, 1.0], [1.0, 1.0]], 1.0, 2)
    adj = cx.build_adjacency(K, KINDS)
    t = all_invariants(K, adj)
    for rows in t.values.values():
        assert np.all(rows == 0)
    assert t.diagnostics.total > 0


def test_degenerate_triangle_angle_sentinel():
    x = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]], dtype=float)
    diag = Diagnostics()
    v = upper_invariants((0, 1, 2), (0, 1, 3), (0, 1, 2, 3), x, diagnostics=diag)
    assert v[6] == 0.0 and v[4] == pytest.approx(0.0, abs=1e-12)
    assert diag.degenerate_angles >= 1 and diag.degenerate_volumes >= 1


# properties ----------------------------------------------------------------------------

@given(seeds)
def test_invariance_under_rigid_motion(seed):
    r = np.random.default_rng(seed)
    K = random_complex(r)
    adj = cx.build_adjacency(K, KINDS)
    ref = all_invariants(K, adj).values
    for _ in range(3):
        g = RigidMotion.random(r, 3, translation_scale=3.0)
        moved = all_invariants(K.with_positions(apply_motion(g, K.positions)), adj).values
        for key in ref:
            assert np.max(np.abs(moved[key] - ref[key]), initial=0.0) <= 1e-10


@given(seeds)
def test_permutation_safety(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(3, 8))
    pts = r.standard_normal((n, 3))
    delta = float(r.uniform(1.0, 3.0))
    perm = r.permutation(n)
    relabeled = np.empty_like(pts)
    relabeled[perm] = pts
    A = cx.vietoris_rips(pts, delta, 3)
    B = cx.vietoris_rips(relabeled, delta, 3)
    ta = all_invariants(A, cx.build_adjacency(A, KINDS)).values
    tb = all_invariants(B, cx.build_adjacency(B, KINDS)).values
    assert set(ta) == set(tb)
    for key in ta:
        assert np.allclose(sorted_rows(ta[key]), sorted_rows(tb[key]), atol=1e-8)


@given(seeds)
def test_layout_and_ranges(seed):
    r = np.random.default_rng(seed)
    K = random_complex(r)
    adj = cx.build_adjacency(K, KINDS)
    vel = r.standard_normal(K.positions.shape)
    t = all_invariants(K, adj, velocities=vel)
    for (kind, s, d), rows in t.values.items():
        assert rows.shape[1] == layout_width(kind, s, d, velocities=True)
        assert np.all(np.isfinite(rows))
        geo = rows[:, :7] if kind == "upper" else rows
        assert np.all(geo >= 0)
        angles = geo[:, 6:7] if kind == "upper" else geo[:, 4:6]
        assert np.all(angles <= math.pi / 2 + 1e-12)


@given(seeds)
def test_mean_distance_bounds(seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((4, 3))
    parent = (0, 1, 2, 3)
    v = upper_invariants((0, 1, 2), (0, 1, 3), parent, x)
    d = lambda i, j: np.linalg.norm(x[i] - x[j])
    for slot, pairs in ((0, [(0, 2), (1, 2)]), (1, [(0, 3), (1, 3)]), (2, [(0, 1)])):
        vals = [d(i, j) for i, j in pairs]
        assert min(vals) - 1e-12 <= v[slot] <= max(vals) + 1e-12


def test_layout_names():
    assert len(UPPER_LAYOUT) == 7 and len(BOUNDARY_LAYOUT) == 6
    assert layout_width("upper", 0, 0, velocities=True) == 10
    assert layout_width("upper", 1, 1, velocities=True) == 7
    with pytest.raises(InvalidAdjacencyError):
        layout_width("boundary", 0, 2)


# batched route ---------------------------------------------------------------------------

@given(seeds, st.integers(2, 4))
def test_batched_matches_exact(seed, dim):
    r = np.random.default_rng(seed)
    K = random_complex(r, dim=dim, max_dim=3)
    adj = cx.build_adjacency(K, KINDS)
    vel = r.standard_normal(K.positions.shape)
    exact = all_invariants(K, adj, velocities=vel).values
    batched = batched_invariants(Tensor(K.positions), compile_plan(K, adj), vel)
    for key, rows in exact.items():
        assert np.allclose(batched[key].data, rows, atol=1e-10, rtol=0), key


def test_flat_simplices_have_zero_angles():
    # tetrahedra squashed into the plane have no dihedral angles
    r = np.random.default_rng(4)
    K = cx.fully_connected(r.standard_normal((5, 2)), 3)
    adj = cx.build_adjacency(K, KINDS)
    t = all_invariants(K, adj)
    assert np.all(t.values[("boundary", 2, 3)][:, 3:] == 0)
    assert t.diagnostics.degenerate_angles > 0


def test_batched_degenerate_is_finite():
    x = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 0, 0]], dtype=float)
    K = cx.fully_connected(x, 3)
    adj = cx.build_adjacency(K, KINDS)
    out = batched_invariants(Tensor(x), compile_plan(K, adj))
    for key, t in out.items():
        assert np.all(np.isfinite(t.data)), key
