from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import shortest_path

from leotopo.evaluation import _graph
from leotopo.shell import AngularOffset, SatelliteState, max_separation, ShellConfig, Snapshot, d_stab, generate_synthetic_shell
from leotopo.stable import CandidateEdge, build_stable_link_set
from leotopo.topology import (
    DegreeViolation, InfeasibleDeployment, Provenance, Topology, build_plus_grid,
    build_theoretical_floor, build_three_isl_grid, connected_components,
)


def edge(a, b, w=100.0):
    return CandidateEdge(min(a, b), max(a, b), w, w, 0)


def ring(nodes):
    return [edge(a, b) for a, b in zip(nodes, nodes[1:] + nodes[:1])]


# -- graph basics ----------------------------------------------------------
def test_add_edge_examples():
    t = Topology([1, 2], 4)
    t.add_edge(edge(1, 2))
    assert t.num_edges == 1
    t.add_edge(edge(2, 1))
    assert t.num_edges == 1


def test_degree_violation_leaves_graph_unchanged():
    t = Topology(range(4), 2)
    t.add_edge(edge(0, 1))
    t.add_edge(edge(0, 2))
    before = t.edge_keys()
    with pytest.raises(DegreeViolation) as info:
        t.add_edge(edge(0, 3))
    assert info.value.saturated == [0]
    assert t.edge_keys() == before
    assert not t.try_add(edge(0, 3))


def test_bad_edges_rejected():
    t = Topology([1, 2], 4)
    with pytest.raises(ValueError):
        t.add_edge(edge(1, 1))
    with pytest.raises(KeyError):
        t.add_edge(edge(1, 7))


def test_component_examples():
    t = Topology(range(6), 4)
    for e in ring(list(range(6))):
        t.add_edge(e)
    assert len(connected_components(t)) == 1
    assert len(connected_components(Topology(range(6), 4))) == 6
    t = Topology(range(7), 4)
    for e in ring([0, 1, 2]) + ring([3, 4, 5, 6]):
        t.add_edge(e)
    comps = connected_components(t)
    assert comps == [{3, 4, 5, 6}, {0, 1, 2}]


@settings(max_examples=50)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 9), st.integers(0, 9)), max_size=200),
       st.integers(2, 4))
def test_budget_never_exceeded(ops, budget):
    t = Topology(range(10), budget)
    for add, a, b in ops:
        if a == b:
            continue
        if add:
            t.try_add(edge(a, b))
        elif t.has_edge(a, b):
            t.remove_edge(a, b)
        assert max(t.degrees().values()) <= budget
    assert sum(t.degrees().values()) == 2 * t.num_edges


def test_csv_round_trip(tmp_path, toy):
    snap, cand = toy
    t = build_plus_grid(snap, cand)
    t.to_csv(tmp_path / "t.csv")
    back = Topology.from_csv(tmp_path / "t.csv", snap)
    assert back.edge_keys() == t.edge_keys()
    assert back.provenance is Provenance.PLUS_GRID and back.degree_budget == 4
    for e in t.edges():
        f = back.edge(*e.key)
        assert f.worst_case_km == pytest.approx(e.worst_case_km, abs=1e-6)
        assert f.plane_span == e.plane_span


# -- +Grid -------------------------------------------------------------------------
def test_plus_grid_toy_is_four_regular(toy):
    snap, cand = toy
    t = build_plus_grid(snap, cand)
    assert t.num_edges == 288
    assert set(t.degrees().values()) == {4}
    assert t.edge_keys() == build_plus_grid(snap, cand).edge_keys()


def test_plus_grid_single_plane_is_a_ring():
    snap = generate_synthetic_shell(ShellConfig(1, 12, 550, 53))
    t = build_plus_grid(snap, build_stable_link_set(snap))
    assert t.num_edges == 12 and set(t.degrees().values()) == {2}
    assert t.is_connected()


def test_plus_grid_shell1_size(shell1):
    snap, cand = shell1
    t = build_plus_grid(snap, cand)
    assert t.num_edges == 3168
    assert set(t.degrees().values()) == {4}


def test_plus_grid_hops_match_torus_distance():
    n_planes, per = 12, 12
    cfg = ShellConfig(n_planes, per, 550, 53, phasing_offset_deg=0.0)
    snap = generate_synthetic_shell(cfg)
    t = build_plus_grid(snap, build_stable_link_set(snap))
    # the east partner is the slot shift with the smallest orbit worst case,
    # which turns the grid into a torus in sheared slot coordinates
    shift = min((-1, 0, 1), key=lambda d: max_separation(AngularOffset(30.0, d * 30.0), cfg))

    def coords(sat):
        p, k = divmod(sat, per)
        return p, (k - shift * p) % per

    hops = shortest_path(_graph(t), unweighted=True, directed=False)
    for a, b in itertools.product(range(n_planes * per), repeat=2):
        (pa, sa), (pb, sb) = coords(a), coords(b)
        dp, ds = abs(pa - pb), abs(sa - sb)
        assert hops[a, b] == min(dp, n_planes - dp) + min(ds, per - ds)


def test_plus_grid_partial_deployment_allows_lower_degree(toy):
    snap, _ = toy
    part = snap.subset([i for i in snap.ids if i % 7 != 3])
    t = build_plus_grid(part, build_stable_link_set(part))
    assert max(t.degrees().values()) <= 4
    assert min(t.degrees().values()) < 4


# -- 3-ISL-Grid ------------------------------------------------------------------------
def test_three_isl_grid_toy_is_three_regular(toy):
    snap, cand = toy
    t = build_three_isl_grid(snap, cand)
    assert set(t.degrees().values()) == {3}
    assert t.is_connected()


def test_three_isl_grid_rejects_uneven_planes(toy):
    snap, _ = toy
    part = snap.subset([i for i in snap.ids if i != 5])
    with pytest.raises(InfeasibleDeployment):
        build_three_isl_grid(part, build_stable_link_set(part))


# -- floor ---------------------------------------------------------------------------
def test_floor_two_satellites_in_range():
    cfg = ShellConfig(1, 2, 550, 53)
    snap = Snapshot(cfg, (SatelliteState(0, 0, 0, 0), SatelliteState(1, 0, 0, 10)))
    t = build_theoretical_floor(snap)
    assert t.num_edges == 1 and t.degree_budget is None


def test_floor_contains_every_pair_in_range(toy):
    snap, cand = toy
    t = build_theoretical_floor(snap)
    pos = snap.positions()
    d = np.linalg.norm(pos[:, None] - pos[None, :], axis=-1)
    expected = {(a, b) for a, b in itertools.combinations(range(len(snap)), 2) if d[a, b] <= d_stab(snap.config)}
    assert t.edge_keys() == {(snap.ids[a], snap.ids[b]) for a, b in expected}
    stable = build_theoretical_floor(snap, cand, stable_only=True)
    assert stable.edge_keys() == set(cand.keys())
