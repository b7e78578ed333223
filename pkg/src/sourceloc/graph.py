"""Undirected graph container, generators, ingestion and small graph algorithms."""

from __future__ import annotations

import csv
import hashlib
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

MAX_CONNECT_ATTEMPTS = 100


class GraphError(ValueError):
    pass


class EdgeListParseError(GraphError):
    def __init__(self, path, line_no: int, line: str):
        super().__init__(f"{path}:{line_no}: expected two node labels, got {line!r}")
        self.line_no = line_no


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph on nodes ``0..n_nodes-1``.

    Build instances with :meth:`from_edges`, which normalises the edge list
    (drops self-loops and duplicates, orders each pair). ``labels`` keeps the
    original node label for every id when the graph came from a file or was
    relabelled.
    """

    n_nodes: int
    edges: np.ndarray  # (m, 2) int64, u < v, lexicographically sorted
    labels: tuple | None = None
    dropped: int = 0
    _adj: tuple = field(default=(), repr=False)

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[Sequence[int]], labels=None) -> "Graph":
        n_nodes = int(n_nodes)
        if n_nodes < 0:
            raise GraphError("n_nodes must be nonnegative")
        pairs = set()
        dropped = 0
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise GraphError(f"edge ({u}, {v}) out of range for {n_nodes} nodes")
            if u == v:
                dropped += 1
                continue
            key = (u, v) if u < v else (v, u)
            if key in pairs:
                dropped += 1
                continue
            pairs.add(key)
        arr = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
        adj = [[] for _ in range(n_nodes)]
        for u, v in arr:
            adj[u].append(int(v))
            adj[v].append(int(u))
        adj = tuple(tuple(sorted(a)) for a in adj)
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != n_nodes:
                raise GraphError("labels must have one entry per node")
        return cls(n_nodes, arr, labels, dropped, adj)

    @classmethod
    def from_networkx(cls, nxg: nx.Graph) -> "Graph":
        nodes = sorted(nxg.nodes())
        index = {v: i for i, v in enumerate(nodes)}
        return cls.from_edges(len(nodes), ((index[u], index[v]) for u, v in nxg.edges()))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def adjacency(self) -> tuple:
        return self._adj

    def neighbors(self, v: int) -> tuple:
        return self._adj[v]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj], dtype=np.int64)

    @cached_property
    def sparse_adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency in CSR form (float64)."""
        m = len(self.edges)
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]]) if m else np.zeros(0, int)
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]]) if m else np.zeros(0, int)
        data = np.ones(2 * m)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_nodes, self.n_nodes))

    @cached_property
    def fingerprint(self) -> bytes:
        """SHA-256 over node count and the sorted edge array."""
        h = hashlib.sha256()
        h.update(np.int64(self.n_nodes).tobytes())
        h.update(np.ascontiguousarray(self.edges, dtype="<i8").tobytes())
        return h.digest()

    def is_connected(self) -> bool:
        if self.n_nodes == 0:
            return False
        n_comp, _ = connected_components(self.sparse_adjacency, directed=False)
        return n_comp == 1

    def subgraph(self, nodes: Sequence[int]) -> "Graph":
        """Induced subgraph; new id ``i`` corresponds to ``nodes[i]`` (kept in ``labels``)."""
        nodes = [int(v) for v in nodes]
        index = np.full(self.n_nodes, -1, dtype=np.int64)
        index[nodes] = np.arange(len(nodes))
        mapped = index[self.edges] if len(self.edges) else np.zeros((0, 2), np.int64)
        sub_edges = mapped[(mapped >= 0).all(axis=1)]
        return Graph.from_edges(len(nodes), sub_edges.tolist(), labels=self._relabel(nodes))

    def _relabel(self, nodes):
        if self.labels is None:
            return tuple(nodes)
        return tuple(self.labels[v] for v in nodes)

    def to_networkx(self) -> nx.Graph:
        nxg = nx.Graph()
        nxg.add_nodes_from(range(self.n_nodes))
        nxg.add_edges_from(map(tuple, self.edges.tolist()))
        return nxg

    def write_edge_list(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# nodes {self.n_nodes} edges {self.n_edges}\n")
            for u, v in self.edges:
                fh.write(f"{u} {v}\n")

    def write_label_map(self, path) -> None:
        """Two-column CSV ``node_id,label``."""
        labels = self.labels if self.labels is not None else range(self.n_nodes)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node_id", "label"])
            for i, lab in enumerate(labels):
                w.writerow([i, lab])


@dataclass(frozen=True)
class NodeSet:
    """A set of node ids in a graph of ``n_nodes`` nodes."""

    members: tuple
    n_nodes: int

    def __post_init__(self):
        members = tuple(sorted(int(v) for v in self.members))
        if len(set(members)) != len(members):
            raise GraphError(f"duplicate node ids in {members}")
        if members and not (0 <= members[0] and members[-1] < self.n_nodes):
            raise GraphError(f"node ids {members} out of range for {self.n_nodes} nodes")
        object.__setattr__(self, "members", members)

    @classmethod
    def from_indicator(cls, indicator) -> "NodeSet":
        indicator = np.asarray(indicator)
        return cls(tuple(np.flatnonzero(indicator).tolist()), len(indicator))

    @property
    def indicator(self) -> np.ndarray:
        x = np.zeros(self.n_nodes, dtype=np.float64)
        x[list(self.members)] = 1.0
        return x

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, v):
        return v in self.members


def generate_small_world(n: int, k_neighbors: int, rewire_p: float, seed: int) -> Graph:
    """Connected Watts-Strogatz graph; regenerated until connected."""
    if k_neighbors % 2 or k_neighbors < 2:
        raise GraphError("k_neighbors must be an even count >= 2")
    if k_neighbors >= n:
        raise GraphError("k_neighbors must be smaller than n")
    if not 0.0 <= rewire_p <= 1.0:
        raise GraphError("rewire_p must lie in [0, 1]")
    try:
        nxg = nx.connected_watts_strogatz_graph(
            n, k_neighbors, rewire_p, tries=MAX_CONNECT_ATTEMPTS, seed=seed
        )
    except nx.NetworkXError as exc:
        raise GraphError(
            f"no connected graph after {MAX_CONNECT_ATTEMPTS} attempts"
        ) from exc
    return Graph.from_networkx(nxg)


def generate_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    if not 0.0 <= p <= 1.0:
        raise GraphError("p must lie in [0, 1]")
    return Graph.from_networkx(nx.gnp_random_graph(n, p, seed=seed))


def load_edge_list(path) -> Graph:
    """Read a whitespace-separated edge list.

    Labels are mapped to ids in order of first appearance. Self-loops and
    repeated edges are dropped; the count is available as ``graph.dropped``.
    """
    index: dict[str, int] = {}
    edges = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise EdgeListParseError(path, line_no, line)
            ids = []
            for label in parts:
                if label not in index:
                    index[label] = len(index)
                ids.append(index[label])
            edges.append(ids)
    labels = list(index)
    return Graph.from_edges(len(labels), edges, labels=labels)


def largest_connected_component(g: Graph) -> Graph:
    """Largest component, ties broken by the smallest contained node id."""
    if g.n_nodes == 0:
        raise GraphError("empty graph has no components")
    _, comp = connected_components(g.sparse_adjacency, directed=False)
    sizes = np.bincount(comp)
    best = max(range(len(sizes)), key=lambda c: (sizes[c], -int(np.argmax(comp == c))))
    return g.subgraph(np.flatnonzero(comp == best).tolist())


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop counts from ``source`` as floats; unreachable nodes are ``inf``."""
    if not 0 <= source < g.n_nodes:
        raise GraphError(f"invalid node id {source}")
    dist = np.full(g.n_nodes, np.inf)
    dist[source] = 0
    queue = deque([source])
    adj = g.adjacency
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in adj[u]:
            if dist[v] == np.inf:
                dist[v] = du
                queue.append(v)
    return dist


def top_degree_nodes(g: Graph, a: int) -> list[int]:
    """The ``a`` highest-degree nodes, ordered by (degree desc, id asc)."""
    if a > g.n_nodes:
        raise GraphError(f"requested {a} nodes from a graph of {g.n_nodes}")
    order = np.lexsort((np.arange(g.n_nodes), -g.degrees))
    return order[:a].tolist()
