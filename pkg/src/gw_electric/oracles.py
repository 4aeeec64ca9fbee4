"""Ground-truth effective resistances on small explicit networks.

Three independent routes to the same number:

* a dense Kirchhoff solve with the sink set merged into one grounded node,
* leaf-up series/parallel reduction for rooted trees,
* a Monte Carlo estimate from the conductance-weighted random walk,
  ``C = pi(source) * P(hit sinks before returning to source)``.

None of them shares code with the streaming tree engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .errors import (
    Disconnected,
    InvalidNetwork,
    InvalidOption,
    LeavesAtMixedDepth,
    NotATree,
    SingularSystem,
)

MAX_DENSE_VERTICES = 20_000


@dataclass(frozen=True, eq=False)
class ExplicitNetwork:
    """Undirected resistor network with one source and a set of sinks.

    Parameters
    ----------
    n_vertices : int
        Vertices are ``0 .. n_vertices - 1``.
    edges : array_like, shape (E, 2)
        Endpoints of each edge; parallel edges are allowed.
    resistances : array_like, shape (E,)
        Strictly positive, finite.
    source : int
    sinks : tuple of int
    """

    n_vertices: int
    edges: np.ndarray
    resistances: np.ndarray
    source: int
    sinks: tuple[int, ...]

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        r = np.asarray(self.resistances, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "resistances", r)
        object.__setattr__(self, "sinks", tuple(sorted({int(s) for s in self.sinks})))
        V = int(self.n_vertices)
        if V < 2:
            raise InvalidNetwork("a network needs at least two vertices")
        if edges.shape[0] != r.shape[0]:
            raise InvalidNetwork("one resistance per edge is required")
        if edges.size and (edges.min() < 0 or edges.max() >= V):
            raise InvalidNetwork("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise InvalidNetwork("self-loops are not allowed")
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise InvalidNetwork("resistances must be positive and finite")
        if not 0 <= self.source < V:
            raise InvalidNetwork("source out of range")
        if not self.sinks:
            raise InvalidNetwork("sink set is empty")
        if any(not 0 <= s < V for s in self.sinks):
            raise InvalidNetwork("sink out of range")
        if self.source in self.sinks:
            raise InvalidNetwork("source lies in the sink set")
        n_comp, _ = connected_components(self._adjacency(), directed=False)
        if n_comp != 1:
            raise Disconnected(f"network has {n_comp} connected components")

    @property
    def conductances(self) -> np.ndarray:
        return 1.0 / self.resistances

    def _adjacency(self, weights=None):
        V = self.n_vertices
        w = np.ones(len(self.edges)) if weights is None else weights
        u, v = self.edges[:, 0], self.edges[:, 1]
        return coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
            shape=(V, V),
        ).tocsr()

    def vertex_weights(self) -> np.ndarray:
        """``pi(x)``, the total conductance at each vertex."""
        pi = np.zeros(self.n_vertices)
        np.add.at(pi, self.edges[:, 0], self.conductances)
        np.add.at(pi, self.edges[:, 1], self.conductances)
        return pi

    def scaled(self, s: float) -> "ExplicitNetwork":
        return ExplicitNetwork(self.n_vertices, self.edges, self.resistances * s, self.source, self.sinks)


def effective_resistance_laplacian(net: ExplicitNetwork) -> float:
    """Resistance between the source and the (merged) sink set.

    The sinks are collapsed into a single node which is grounded; a unit
    current is injected at the source and the reduced Kirchhoff system is
    solved densely (LU with partial pivoting). The source potential is the
    effective resistance.
    """
    V = net.n_vertices
    if V > MAX_DENSE_VERTICES:
        raise InvalidOption(f"dense oracle is capped at {MAX_DENSE_VERTICES} vertices")
    sink = np.zeros(V, dtype=bool)
    sink[list(net.sinks)] = True
    # relabel: free vertices get 0..F-1, every sink maps to F (ground)
    free = np.flatnonzero(~sink)
    label = np.full(V, len(free), dtype=np.int64)
    label[free] = np.arange(len(free))
    F = len(free)
    L = np.zeros((F + 1, F + 1))
    u, v = label[net.edges[:, 0]], label[net.edges[:, 1]]
    c = net.conductances
    np.add.at(L, (u, u), c)
    np.add.at(L, (v, v), c)
    np.add.at(L, (u, v), -c)
    np.add.at(L, (v, u), -c)
    A = L[:F, :F]
    b = np.zeros(F)
    b[label[net.source]] = 1.0
    try:
        phi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    out = float(phi[label[net.source]])
    if not math.isfinite(out) or out <= 0:
        raise SingularSystem("Kirchhoff solve returned a non-positive resistance")
    return out


def effective_conductance_laplacian(net: ExplicitNetwork) -> float:
    return 1.0 / effective_resistance_laplacian(net)


def _tree_order(net: ExplicitNetwork):
    """BFS order, parent pointers and hop depths of a tree rooted at the source."""
    if len(net.edges) != net.n_vertices - 1:
        raise NotATree(f"{len(net.edges)} edges on {net.n_vertices} vertices")
    order, pred = breadth_first_order(net._adjacency(), net.source, directed=False)
    depth = np.zeros(net.n_vertices, dtype=np.int64)
    for x in order[1:]:
        depth[x] = depth[pred[x]] + 1
    return order, pred, depth


def series_parallel_reduce(net: ExplicitNetwork) -> float:
    """Resistance of a rooted tree from its root to its leaves.

    ``R(x) = (sum over children y of 1 / (r(x, y) + R(y)))**-1`` with
    ``R = 0`` at the leaves, evaluated from the deepest level up.

    Raises
    ------
    NotATree
        If the network has a cycle, or its leaves are not exactly the sinks.
    LeavesAtMixedDepth
        If the leaves are not all at the same hop distance from the source.
    """
    order, pred, depth = _tree_order(net)
    V = net.n_vertices
    # resistance of the edge into each vertex from its parent
    r_in = np.zeros(V)
    for (a, b), r in zip(net.edges, net.resistances):
        if pred[b] == a:
            r_in[b] = r
        elif pred[a] == b:
            r_in[a] = r
        else:
            raise NotATree("edge joins two vertices that are not parent and child")
    n_child = np.zeros(V, dtype=np.int64)
    np.add.at(n_child, pred[order[1:]], 1)
    leaves = [int(x) for x in order[1:] if n_child[x] == 0]
    if len({int(depth[x]) for x in leaves}) > 1:
        raise LeavesAtMixedDepth("tree leaves sit at different depths")
    if tuple(sorted(leaves)) != net.sinks:
        raise NotATree("sinks must be exactly the leaves of the tree")

    conductance = np.zeros(V)  # sum over children of 1 / (r + R(child))
    for x in order[:0:-1]:
        R_x = 0.0 if n_child[x] == 0 else 1.0 / conductance[x]
        conductance[pred[x]] += 1.0 / (r_in[x] + R_x)
    return 1.0 / conductance[net.source]


@dataclass(frozen=True)
class WalkEstimate:
    conductance: float
    se: float
    escape_probability: float
    trials: int
    mean_steps: float

    @property
    def resistance(self) -> float:
        return 1.0 / self.conductance


def random_walk_conductance(
    net: ExplicitNetwork,
    trials: int,
    seed: int,
    max_steps: int = 10_000_000,
) -> WalkEstimate:
    """Monte Carlo effective conductance from escape probabilities.

    Each walker starts at the source and moves to a neighbour with
    probability proportional to the edge conductance. It succeeds if it
    reaches a sink before returning to the source. The estimate is
    ``pi(source)`` times the success frequency, with a binomial standard
    error.
    """
    if trials < 10_000:
        raise InvalidOption("random-walk oracle needs at least 1e4 trials")
    rng = np.random.default_rng(seed)
    V = net.n_vertices
    adj = net._adjacency(net.conductances)
    adj.sort_indices()
    ptr, nbr, w = adj.indptr, adj.indices, adj.data
    pi = np.add.reduceat(w, ptr[:-1]) if len(w) else np.zeros(V)
    # cumulative transition probabilities, shifted by the vertex id so that
    # one searchsorted over the whole array picks a neighbour for every walker
    cum = np.empty_like(w)
    for x in range(V):
        seg = w[ptr[x] : ptr[x + 1]]
        c = np.cumsum(seg) / pi[x]
        c[-1] = 1.0
        cum[ptr[x] : ptr[x + 1]] = x + c
    is_sink = np.zeros(V, dtype=bool)
    is_sink[list(net.sinks)] = True

    pos = np.full(trials, net.source, dtype=np.int64)
    alive = np.arange(trials)
    escaped = 0
    steps = 0
    total_steps = 0
    while alive.size:
        if steps >= max_steps:
            raise InvalidOption("random walk did not terminate within max_steps")
        x = pos[alive]
        u = rng.random(alive.size)
        j = np.searchsorted(cum, x + u, side="left")
        y = nbr[j]
        pos[alive] = y
        steps += 1
        total_steps += alive.size
        hit = is_sink[y]
        back = y == net.source
        escaped += int(hit.sum())
        alive = alive[~(hit | back)]
    p = escaped / trials
    se_p = math.sqrt(max(p * (1.0 - p), 0.0) / trials)
    return WalkEstimate(pi[net.source] * p, pi[net.source] * se_p, p, trials, total_steps / trials)


def default_sinks(n_vertices: int, edges: np.ndarray, source: int) -> tuple[int, ...]:
    """Vertices at maximal hop distance from the source."""
    w = np.ones(len(edges))
    u, v = edges[:, 0], edges[:, 1]
    adj = coo_matrix(
        (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
        shape=(n_vertices, n_vertices),
    ).tocsr()
    order, pred = breadth_first_order(adj, source, directed=False)
    if len(order) != n_vertices:
        raise Disconnected("network is not connected")
    depth = np.zeros(n_vertices, dtype=np.int64)
    for x in order[1:]:
        depth[x] = depth[pred[x]] + 1
    return tuple(int(x) for x in np.flatnonzero(depth == depth.max()))


def parse_edge_list(text: str) -> ExplicitNetwork:
    """Parse the ``u v r`` edge-list format.

    One edge per line; blank lines and ``#`` comments are ignored, except
    the directives ``# source: <id>`` and ``# sinks: <id> <id> ...``. The
    source defaults to vertex 0 and the sinks to the vertices farthest from
    it in hop count.
    """
    edges, rs = [], []
    source, sinks = 0, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, _, val = body.partition(":")
            key = key.strip().lower()
            try:
                if key == "source":
                    source = int(val)
                elif key == "sinks":
                    sinks = [int(t) for t in val.replace(",", " ").split()]
            except ValueError:
                raise InvalidNetwork(f"line {lineno}: bad directive {line!r}") from None
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InvalidNetwork(f"line {lineno}: expected 'u v r', got {line!r}")
        try:
            u, v, r = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise InvalidNetwork(f"line {lineno}: cannot parse {line!r}") from None
        if u < 0 or v < 0:
            raise InvalidNetwork(f"line {lineno}: negative vertex id")
        edges.append((u, v))
        rs.append(r)
    if not edges:
        raise InvalidNetwork("no edges found")
    e = np.array(edges, dtype=np.int64)
    V = int(max(e.max(), source)) + 1
    if sinks is None:
        sinks = default_sinks(V, e, source)
    return ExplicitNetwork(V, e, np.array(rs), source, tuple(sinks))


def read_edge_list(path) -> ExplicitNetwork:
    return parse_edge_list(Path(path).read_text())


def format_edge_list(net: ExplicitNetwork) -> str:
    lines = [f"# source: {net.source}", "# sinks: " + " ".join(map(str, net.sinks))]
    for (u, v), r in zip(net.edges, net.resistances):
        lines.append(f"{int(u)} {int(v)} {float(r)!r}")
    return "\n".join(lines) + "\n"
