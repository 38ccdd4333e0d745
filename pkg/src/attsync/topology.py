"""Undirected interaction trees with a virtual edge orientation.

Agent ids and edge indices are 1-based in the public functions (the way a
scenario file writes them); the stored arrays are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TopologyError(ValueError):
    """Base class for violations of the tree assumption."""


class SelfEdgeError(TopologyError):
    pass


class DuplicateEdgeError(TopologyError):
    pass


class CycleError(TopologyError):
    pass


class DisconnectedError(TopologyError):
    pass


class AgentIdError(TopologyError):
    pass


@dataclass(frozen=True)
class Topology:
    """Oriented tree on ``n_agents`` nodes.

    ``edges[k] = (i, j)`` (0-based) means edge ``k`` points from head ``i``
    to tail ``j``; the relative attitude carried by that edge is
    ``R_j R_i^T``.
    """

    n_agents: int
    edges: tuple
    adjacency: np.ndarray = field(repr=False)
    incidence: np.ndarray = field(repr=False)
    laplacian: np.ndarray = field(repr=False)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def heads(self):
        return np.array([e[0] for e in self.edges], dtype=int)

    @property
    def tails(self):
        return np.array([e[1] for e in self.edges], dtype=int)

    def degree(self, i):
        return int(self.adjacency[i - 1].sum())

    def edge_list(self):
        """Edges as 1-based ``(head, tail)`` pairs."""
        return [(i + 1, j + 1) for i, j in self.edges]


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def build_topology(n, edges):
    """Validate ``edges`` (1-based ``(head, tail)`` pairs) and build the tree.

    Raises a :class:`TopologyError` subclass naming the violated assumption:
    self-edge, duplicate edge, cycle, or disconnected graph.
    """
    n = int(n)
    if n < 1:
        raise AgentIdError(f"need at least one agent, got {n}")
    oriented = []
    seen = set()
    parent = list(range(n))
    for i, j in edges:
        i, j = int(i), int(j)
        for a in (i, j):
            if not 1 <= a <= n:
                raise AgentIdError(f"agent id {a} outside 1..{n}")
        if i == j:
            raise SelfEdgeError(f"self-edge ({i}, {i}) is not allowed")
        key = frozenset((i, j))
        if key in seen:
            raise DuplicateEdgeError(f"edge ({i}, {j}) listed twice")
        seen.add(key)
        ri, rj = _find(parent, i - 1), _find(parent, j - 1)
        if ri == rj:
            raise CycleError(f"edge ({i}, {j}) closes a cycle; the interaction graph must be a tree")
        parent[ri] = rj
        oriented.append((i - 1, j - 1))

    if len({_find(parent, a) for a in range(n)}) != 1:
        raise DisconnectedError(
            f"graph with {n} agents and {len(oriented)} edges is disconnected; "
            "the interaction graph must be a tree"
        )

    m = len(oriented)
    D = np.zeros((n, n))
    H = np.zeros((n, m))
    for k, (i, j) in enumerate(oriented):
        D[i, j] = D[j, i] = 1.0
        H[i, k] = 1.0
        H[j, k] = -1.0
    return Topology(n, tuple(oriented), D, H, H @ H.T)


def path(n):
    """Path ``1 -> 2 -> ... -> n``."""
    return build_topology(n, [(i, i + 1) for i in range(1, n)])


def star(n, center=1):
    return build_topology(n, [(center, j) for j in range(1, n + 1) if j != center])


def reoriented(t, k):
    """Copy of ``t`` with (1-based) edge ``k`` flipped."""
    edges = t.edge_list()
    i, j = edges[k - 1]
    edges[k - 1] = (j, i)
    return build_topology(t.n_agents, edges)


def neighbors(t, i):
    return {j + 1 for j in np.flatnonzero(t.adjacency[i - 1])}


def head_edges(t, i):
    """1-based indices of edges whose head is agent ``i``."""
    return {k + 1 for k in np.flatnonzero(t.incidence[i - 1] > 0)}


def tail_edges(t, i):
    """1-based indices of edges whose tail is agent ``i``."""
    return {k + 1 for k in np.flatnonzero(t.incidence[i - 1] < 0)}
