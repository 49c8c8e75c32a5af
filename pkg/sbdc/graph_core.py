"""
Weighted undirected graphs and their derived matrices.

Vertices are 1-based in every public signature (edges are ``(i, j)`` pairs
with ``i < j``); edge indices and matrix rows/columns are 0-based.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import networkx as nx
import numpy as np
from scipy import linalg

from sbdc.errors import (
    DisconnectedGraph,
    DuplicateEdge,
    EdgeOutOfRange,
    EmptyAttackSet,
    NonPositiveWeight,
    SingularTreeGram,
    UnknownEdge,
)
from utils.config import CONNECTIVITY_TOL

log = logging.getLogger(__name__)

Edge = tuple[int, int]


def canonical_edge(i: int, j: int) -> Edge:
    """Orient an edge so that the smaller endpoint comes first."""
    i, j = int(i), int(j)
    return (i, j) if i < j else (j, i)


def edge_key(edge: Edge) -> str:
    """JSON key for an edge, e.g. ``"1-2"``."""
    return f"{edge[0]}-{edge[1]}"


def parse_edge_key(key: str) -> Edge:
    i, j = key.split("-")
    return canonical_edge(int(i), int(j))


@dataclass(frozen=True)
class Graph:
    """Connected undirected graph with strictly positive edge weights.

    Build instances with :func:`build_graph`; the constructor does not validate.
    """
    n: int
    edges: tuple[Edge, ...]
    weights: tuple[float, ...]

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def weight_vector(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def is_tree(self) -> bool:
        return self.m == self.n - 1

    def index_of(self, edge: Edge) -> int:
        try:
            return self.edges.index(canonical_edge(*edge))
        except ValueError:
            raise UnknownEdge(f"edge {edge} is not in the graph") from None

    def weight_of(self, edge: Edge) -> float:
        return self.weights[self.index_of(edge)]

    def neighbors(self, node: int) -> list[tuple[int, int]]:
        """(neighbor, edge index) pairs of a node, in edge order."""
        result = []
        for k, (i, j) in enumerate(self.edges):
            if i == node:
                result.append((j, k))
            elif j == node:
                result.append((i, k))
        return result

    def to_networkx(self, weights: Sequence[float] | None = None) -> nx.Graph:
        """networkx view; edges are inserted in canonical order."""
        values = self.weights if weights is None else weights
        G = nx.Graph()
        G.add_nodes_from(range(1, self.n + 1))
        for k, (i, j) in enumerate(self.edges):
            G.add_edge(i, j, weight=float(values[k]), index=k)
        return G

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "edges": [[i, j, w] for (i, j), w in zip(self.edges, self.weights)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def build_graph(n: int, weighted_edges: Iterable[Sequence[float]]) -> Graph:
    """Validate a weighted edge list and return a canonically ordered Graph.

    Args:
        n: number of vertices (at least 2).
        weighted_edges: ``(i, j, w)`` triples with 1-based endpoints.

    Raises:
        EdgeOutOfRange, DuplicateEdge, NonPositiveWeight, DisconnectedGraph
    """
    n = int(n)
    if n < 2:
        raise EdgeOutOfRange(f"a graph needs at least 2 vertices, got n={n}")

    collected: dict[Edge, float] = {}
    for item in weighted_edges:
        if len(item) != 3:
            raise EdgeOutOfRange(f"edge entry {item!r} must be (i, j, w)")
        i, j, w = item
        if int(i) != i or int(j) != j:
            raise EdgeOutOfRange(f"edge endpoints must be integers, got ({i}, {j})")
        if not (1 <= i <= n and 1 <= j <= n) or i == j:
            raise EdgeOutOfRange(f"edge ({i}, {j}) is not a valid edge of a {n}-vertex graph")
        edge = canonical_edge(i, j)
        if edge in collected:
            raise DuplicateEdge(f"edge {edge} given more than once")
        w = float(w)
        if not np.isfinite(w) or w <= 0.0:
            raise NonPositiveWeight(f"edge {edge} has weight {w}; weights must be > 0")
        collected[edge] = w

    ordered = sorted(collected)
    g = Graph(n=n, edges=tuple(ordered), weights=tuple(collected[e] for e in ordered))

    # Structural check first, spectral cross-check second
    if not g.edges or not nx.is_connected(g.to_networkx()):
        raise DisconnectedGraph(f"graph on {n} vertices is not connected")
    lam2 = np.linalg.eigvalsh(laplacian(g))[1]
    if lam2 <= CONNECTIVITY_TOL:
        raise DisconnectedGraph(f"algebraic connectivity {lam2:.3e} below tolerance")
    return g


def graph_from_dict(data: dict) -> Graph:
    return build_graph(data["n"], [tuple(e) for e in data["edges"]])


def graph_from_json(text: str) -> Graph:
    return graph_from_dict(json.loads(text))


def incidence_matrix(g: Graph) -> np.ndarray:
    """n x m incidence matrix: column k has -1 at row i and +1 at row j."""
    E = np.zeros((g.n, g.m))
    for k, (i, j) in enumerate(g.edges):
        E[i - 1, k] = -1.0
        E[j - 1, k] = 1.0
    return E


def laplacian(g: Graph, weights: Sequence[float] | None = None) -> np.ndarray:
    """Weighted Laplacian, optionally with substitute (possibly signed) weights."""
    values = g.weights if weights is None else weights
    if len(values) != g.m:
        raise ValueError(f"expected {g.m} weights, got {len(values)}")
    G = g.to_networkx(values)
    return nx.laplacian_matrix(G, nodelist=range(1, g.n + 1), weight="weight").toarray().astype(float)


@dataclass(frozen=True)
class TreePartition:
    """Spanning tree / chord split of the edge set (0-based edge indices)."""
    tree_edges: tuple[int, ...]
    chord_edges: tuple[int, ...]

    @property
    def permutation(self) -> tuple[int, ...]:
        """Edge relabeling placing tree edges first."""
        return self.tree_edges + self.chord_edges

    @property
    def tau(self) -> int:
        return len(self.tree_edges)


def spanning_tree_partition(g: Graph) -> TreePartition:
    """Breadth-first spanning tree from node 1 over canonically ordered edges."""
    G = g.to_networkx()
    tree = sorted(G.edges[u, v]["index"] for u, v in nx.bfs_edges(G, 1))
    in_tree = set(tree)
    chords = [k for k in range(g.m) if k not in in_tree]
    return TreePartition(tree_edges=tuple(tree), chord_edges=tuple(chords))


def cutset_matrix(g: Graph, part: TreePartition) -> np.ndarray:
    """Cut-set matrix ``R = [I  T]`` in the partition's permuted edge order.

    ``T = (E_T' E_T)^-1 E_T' E_C`` expresses every chord column of the
    incidence matrix through the tree columns.
    """
    E = incidence_matrix(g)
    E_T = E[:, list(part.tree_edges)]
    identity = np.eye(part.tau)
    if not part.chord_edges:
        return identity
    E_C = E[:, list(part.chord_edges)]
    try:
        factor = linalg.cho_factor(E_T.T @ E_T)
    except linalg.LinAlgError as exc:
        raise SingularTreeGram("tree Gram matrix is singular; partition is not a spanning tree") from exc
    T = linalg.cho_solve(factor, E_T.T @ E_C)
    return np.hstack([identity, T])


@dataclass(frozen=True)
class EdgeSelector:
    support: tuple[int, ...]
    matrix: np.ndarray


def resolve_edges(g: Graph, attacked: Iterable[Edge]) -> tuple[int, ...]:
    """Sorted, de-duplicated edge indices of an edge subset."""
    return tuple(sorted({g.index_of(edge) for edge in attacked}))


def edge_selector(g: Graph, attacked: Iterable[Edge]) -> EdgeSelector:
    """m x |attacked| zero/one matrix selecting the attacked edges."""
    support = resolve_edges(g, attacked)
    if not support:
        raise EmptyAttackSet("edge selector needs at least one attacked edge")
    P = np.zeros((g.m, len(support)))
    for col, k in enumerate(support):
        P[k, col] = 1.0
    return EdgeSelector(support=support, matrix=P)


class DegreeProfile(NamedTuple):
    degrees: np.ndarray
    maximum: float
    node: int


def weighted_degrees(g: Graph) -> DegreeProfile:
    """Weighted degrees and their maximum (ties go to the smallest node)."""
    degrees = np.zeros(g.n)
    for (i, j), w in zip(g.edges, g.weights):
        degrees[i - 1] += abs(w)
        degrees[j - 1] += abs(w)
    top = int(np.argmax(degrees))
    return DegreeProfile(degrees=degrees, maximum=float(degrees[top]), node=top + 1)
