"""Small-network oracles: Laplacian solve, series-parallel reduction, random walk."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gw_electric import deterministic, point_mass, two_point
from gw_electric.errors import Disconnected, InvalidNetwork, InvalidOption, LeavesAtMixedDepth, NotATree
from gw_electric.oracles import (
    ExplicitNetwork,
    effective_conductance_laplacian,
    effective_resistance_laplacian,
    format_edge_list,
    parse_edge_list,
    random_walk_conductance,
    series_parallel_reduce,
)
from gw_electric.tree import export_tree, sample_tree_observables


def pinv_resistance(net):
    """Two-point resistance ``(e_s - e_t)^T L^+ (e_s - e_t)`` for a single sink."""
    V = net.n_vertices
    L = np.zeros((V, V))
    for (u, v), c in zip(net.edges, net.conductances):
        L[u, u] += c
        L[v, v] += c
        L[u, v] -= c
        L[v, u] -= c
    e = np.zeros(V)
    e[net.source], e[net.sinks[0]] = 1.0, -1.0
    return float(e @ np.linalg.pinv(L) @ e)


@st.composite
def connected_graphs(draw):
    V = draw(st.integers(2, 12))
    # random spanning tree plus extra edges, so every graph is connected
    edges = [(draw(st.integers(0, v - 1)), v) for v in range(1, V)]
    for _ in range(draw(st.integers(0, 10))):
        u, v = draw(st.integers(0, V - 1)), draw(st.integers(0, V - 1))
        if u != v:
            edges.append((u, v))
    r = [draw(st.floats(0.05, 20.0)) for _ in edges]
    sink = draw(st.integers(1, V - 1))
    return ExplicitNetwork(V, np.array(edges), np.array(r), 0, (sink,))


# --- examples ----------------------------------------------------------------


def test_series_and_parallel_examples():
    path = ExplicitNetwork(3, [(0, 1), (1, 2)], [1.0, 2.0], 0, (2,))
    assert effective_resistance_laplacian(path) == pytest.approx(3.0, rel=1e-14)
    par = ExplicitNetwork(2, [(0, 1), (0, 1)], [2.0, 2.0], 0, (1,))
    assert effective_resistance_laplacian(par) == pytest.approx(1.0, rel=1e-14)
    star = ExplicitNetwork(3, [(0, 1), (0, 2)], [2.0, 2.0], 0, (1, 2))
    assert effective_conductance_laplacian(star) == pytest.approx(1.0, rel=1e-14)
    assert series_parallel_reduce(star) == pytest.approx(1.0, rel=1e-14)


def test_reduction_examples():
    tree = export_tree(deterministic(2), point_mass(1.0), 3, 0)
    net = tree.to_network()
    assert sorted(set(net.resistances)) == [2.0, 4.0, 8.0]
    assert series_parallel_reduce(net) == pytest.approx(3.0, rel=1e-14)
    r1, r2 = 0.3, 1.7
    cherry = ExplicitNetwork(3, [(0, 1), (0, 2)], [r1, r2], 0, (1, 2))
    assert series_parallel_reduce(cherry) == pytest.approx(1 / (1 / r1 + 1 / r2), rel=1e-14)


def test_walk_single_edge_is_exact():
    net = ExplicitNetwork(2, [(0, 1)], [2.5], 0, (1,))
    w = random_walk_conductance(net, 10_000, seed=1)
    assert w.conductance == pytest.approx(0.4, rel=1e-15) and w.se == 0.0
    assert w.escape_probability == 1.0


def test_walk_symmetric_binary_depth_two():
    net = export_tree(deterministic(2), point_mass(1.0), 2, 0).to_network()
    w = random_walk_conductance(net, 100_000, seed=2)
    assert abs(w.conductance - 0.5) < 3 * w.se


@pytest.mark.parametrize("seed", [3, 4, 5])
def test_walk_on_sampled_tree(seed):
    from gw_electric import build_offspring_law

    off, res = build_offspring_law([1, 2, 4], [0.2, 0.5, 0.3]), two_point(0.5, 0.5, 1.5)
    net = export_tree(off, res, 4, seed).to_network()
    w = random_walk_conductance(net, 100_000, seed=seed)
    c = sample_tree_observables(off, res, 4, seed).c_n
    assert abs(w.conductance - c) < 3 * w.se


# --- errors ----------------------------------------------------------------


@pytest.mark.parametrize(
    "args",
    [
        (1, [], [], 0, (0,)),
        (3, [(0, 1), (1, 3)], [1.0, 1.0], 0, (2,)),
        (3, [(0, 0), (1, 2)], [1.0, 1.0], 0, (2,)),
        (3, [(0, 1), (1, 2)], [1.0, 0.0], 0, (2,)),
        (3, [(0, 1), (1, 2)], [1.0, np.inf], 0, (2,)),
        (3, [(0, 1), (1, 2)], [1.0, 1.0], 0, (0, 2)),
        (3, [(0, 1), (1, 2)], [1.0, 1.0], 0, ()),
        (3, [(0, 1), (1, 2)], [1.0], 0, (2,)),
    ],
)
def test_invalid_networks(args):
    with pytest.raises(InvalidNetwork):
        ExplicitNetwork(*args)


def test_disconnected():
    with pytest.raises(Disconnected):
        ExplicitNetwork(4, [(0, 1), (2, 3)], [1.0, 1.0], 0, (3,))


def test_reduction_rejects_non_trees():
    cycle = ExplicitNetwork(3, [(0, 1), (1, 2), (2, 0)], [1.0, 1.0, 1.0], 0, (2,))
    with pytest.raises(NotATree):
        series_parallel_reduce(cycle)
    mixed = ExplicitNetwork(4, [(0, 1), (0, 2), (2, 3)], [1.0, 1.0, 1.0], 0, (1, 3))
    with pytest.raises(LeavesAtMixedDepth):
        series_parallel_reduce(mixed)


def test_walk_needs_enough_trials():
    net = ExplicitNetwork(2, [(0, 1)], [1.0], 0, (1,))
    with pytest.raises(InvalidOption):
        random_walk_conductance(net, 9999, seed=0)


# --- edge-list format ------------------------------------------------------


def test_edge_list_round_trip():
    text = "# a small network\n0 1 1.5\n1 2 0.25\n1 3 2\n"
    net = parse_edge_list(text)
    assert net.source == 0 and net.sinks == (2, 3)
    again = parse_edge_list(format_edge_list(net))
    assert np.array_equal(again.edges, net.edges)
    assert np.array_equal(again.resistances, net.resistances)
    assert again.sinks == net.sinks
    assert effective_resistance_laplacian(again) == effective_resistance_laplacian(net)


def test_edge_list_directives_and_errors():
    net = parse_edge_list("# source: 2\n# sinks: 0\n0 1 1\n1 2 1\n")
    assert (net.source, net.sinks) == (2, (0,))
    for bad in ("0 1\n", "0 x 1\n", "", "# sinks: a\n0 1 1\n"):
        with pytest.raises(InvalidNetwork):
            parse_edge_list(bad)


# --- properties ------------------------------------------------------------


@given(connected_graphs())
def test_laplacian_matches_pseudo_inverse(net):
    assert effective_resistance_laplacian(net) == pytest.approx(pinv_resistance(net), rel=1e-8)


@given(connected_graphs(), st.floats(1e-3, 1e3))
def test_scaling(net, s):
    r = effective_resistance_laplacian(net)
    assert effective_resistance_laplacian(net.scaled(s)) == pytest.approx(s * r, rel=1e-12)


@given(connected_graphs(), st.data())
def test_rayleigh_monotonicity(net, data):
    i = data.draw(st.integers(0, len(net.edges) - 1))
    factor = data.draw(st.floats(1.0, 100.0))
    r = net.resistances.copy()
    r[i] *= factor
    bigger = ExplicitNetwork(net.n_vertices, net.edges, r, net.source, net.sinks)
    c0 = effective_conductance_laplacian(net)
    assert effective_conductance_laplacian(bigger) <= c0 * (1 + 1e-12)


@given(connected_graphs())
def test_parallel_duplicate_halves_resistance(net):
    doubled = ExplicitNetwork(
        net.n_vertices,
        np.concatenate([net.edges, net.edges]),
        np.concatenate([net.resistances, net.resistances]),
        net.source,
        net.sinks,
    )
    assert effective_resistance_laplacian(doubled) == pytest.approx(
        effective_resistance_laplacian(net) / 2, rel=1e-12
    )
