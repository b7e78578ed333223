"""Candidate source sets, k-means over their spectral signals, and stratified sampling."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .graph import Graph, NodeSet, top_degree_nodes
from .spectral import SpectralBasis, set_signals

MAX_CANDIDATES = 10**7
DEFAULT_TRUNCATE = 128


class CandidateLimitError(ValueError):
    pass


class ExhaustedError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CandidatePool:
    """All ``n``-subsets of a node pool, in lexicographic order of member ids.

    ``members`` holds node ids and ``local`` the matching positions within
    ``nodes``; ``signals`` has one row per set (truncated Fourier signal by
    default) and ``assignment`` the cluster id of each set once clustered.
    """

    nodes: tuple
    members: np.ndarray
    local: np.ndarray
    signals: np.ndarray
    n_nodes: int
    assignment: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.members)

    @property
    def n_clusters(self) -> int:
        return 0 if self.assignment is None else int(self.assignment.max()) + 1

    @cached_property
    def clusters(self) -> list:
        if self.assignment is None:
            raise ValueError("pool has not been clustered")
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.searchsorted(self.assignment[order], np.arange(self.n_clusters + 1))
        return [order[bounds[c] : bounds[c + 1]] for c in range(self.n_clusters)]

    def node_set(self, set_id: int) -> NodeSet:
        return NodeSet(tuple(self.members[set_id].tolist()), self.n_nodes)

    def pool_indicators(self, set_ids=None) -> np.ndarray:
        """0/1 rows over the pool nodes; distances equal those of full indicators."""
        local = self.local if set_ids is None else self.local[np.asarray(set_ids, dtype=np.int64)]
        out = np.zeros((len(local), len(self.nodes)))
        np.put_along_axis(out, local, 1.0, axis=1)
        return out

    def find(self, members) -> int:
        """Set id of the candidate with exactly these members."""
        target = np.sort(np.asarray(list(members)))
        hits = np.flatnonzero((self.members == target).all(axis=1))
        if not len(hits):
            raise KeyError(f"{tuple(target.tolist())} is not a candidate")
        return int(hits[0])


def enumerate_candidates(
    g: Graph,
    basis: SpectralBasis,
    a: int,
    n: int,
    truncate_to: int | None = DEFAULT_TRUNCATE,
    filter_adjacent: bool = False,
) -> CandidatePool:
    if not 1 <= n <= a <= g.n_nodes:
        raise ValueError(f"need 1 <= n <= a <= N, got n={n}, a={a}, N={g.n_nodes}")
    total = math.comb(a, n)
    if total > MAX_CANDIDATES:
        raise CandidateLimitError(
            f"C({a}, {n}) = {total} candidate sets exceeds the limit of {MAX_CANDIDATES}; use a smaller pool"
        )
    nodes = tuple(sorted(top_degree_nodes(g, a)))
    local = np.array(list(itertools.combinations(range(a), n)), dtype=np.int64).reshape(-1, n)
    if filter_adjacent:
        A = g.sparse_adjacency
        keep = np.ones(len(local), dtype=bool)
        for i, j in itertools.combinations(range(n), 2):
            u = np.asarray(nodes)[local[:, i]]
            v = np.asarray(nodes)[local[:, j]]
            keep &= np.asarray(A[u, v]).ravel() == 0
        local = local[keep]
        if not len(local):
            raise ValueError("no candidate set without adjacent members")
    members = np.asarray(nodes, dtype=np.int64)[local]
    signals = set_signals(basis, members, truncate_to)
    return CandidatePool(nodes, members, local, signals, g.n_nodes)


def kmeans(points, k: int, rng: np.random.Generator, max_iter: int = 300, tol: float = 1e-4):
    """Lloyd's algorithm with k-means++ seeding.

    Stops when the relative change of inertia drops below ``tol``. A cluster
    left empty receives the point farthest from its current centre.

    Returns ``(labels, centers, inertia)``.
    """
    X = np.asarray(points, dtype=np.float64)
    n = len(X)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    sq = (X * X).sum(1)

    def dist2(centers):
        d = sq[:, None] + (centers * centers).sum(1)[None, :] - 2.0 * X @ centers.T
        return np.maximum(d, 0.0)

    chosen = [int(rng.integers(n))]
    closest = dist2(X[chosen])[:, 0]
    for _ in range(1, k):
        closest[chosen] = 0.0
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(free[rng.integers(len(free))])
        chosen.append(nxt)
        closest = np.minimum(closest, dist2(X[[nxt]])[:, 0])
    centers = X[chosen].copy()

    prev = None
    for _ in range(max_iter):
        d = dist2(centers)
        labels = d.argmin(1)
        _repair_empty(labels, d, k)
        inertia = float(d[np.arange(n), labels].sum())
        counts = np.bincount(labels, minlength=k)
        centers = np.zeros_like(centers)
        np.add.at(centers, labels, X)
        centers /= counts[:, None]
        if prev is not None and (prev == 0 or abs(prev - inertia) / prev < tol):
            break
        prev = inertia
    d = dist2(centers)
    inertia = float(d[np.arange(n), labels].sum())
    return labels, centers, inertia


def _repair_empty(labels, d, k):
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        own = d[np.arange(len(labels)), labels]
        movable = counts[labels] > 1
        far = int(np.argmax(np.where(movable, own, -1.0)))
        counts[labels[far]] -= 1
        labels[far] = c
        counts[c] = 1


def cluster_candidates(pool: CandidatePool, b: int, seed: int) -> CandidatePool:
    if b > len(pool):
        raise ValueError(f"cannot form {b} clusters from {len(pool)} candidates")
    labels, _, _ = kmeans(pool.signals, b, np.random.default_rng(seed))
    return replace(pool, assignment=labels.astype(np.int64))


def _draw(ids: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    if size == 1:
        return ids[[rng.integers(len(ids))]]
    return rng.choice(ids, size=size, replace=False)


def _available(ids: np.ndarray, exclude: np.ndarray) -> np.ndarray:
    if not len(exclude):
        return ids
    return ids[~np.isin(ids, exclude)]


def gss_sample(pool: CandidatePool, per_cluster: int, rng: np.random.Generator, exclude=()) -> list:
    """Up to ``per_cluster`` ids drawn uniformly without replacement from each cluster.

    Ids in ``exclude`` are never drawn. Output is ordered by cluster, then draw.
    """
    if per_cluster < 1:
        raise ValueError("per_cluster must be >= 1")
    exclude = np.asarray(sorted(exclude), dtype=np.int64)
    out = []
    for ids in pool.clusters:
        avail = _available(ids, exclude)
        if len(avail):
            out.extend(_draw(avail, min(per_cluster, len(avail)), rng).tolist())
    if not out:
        raise ExhaustedError("every candidate has already been evaluated")
    return out


def random_sample(pool: CandidatePool, count: int, rng: np.random.Generator, exclude=()) -> list:
    """Simple random sample of ``count`` unexcluded ids (the non-stratified baseline)."""
    exclude = np.asarray(sorted(exclude), dtype=np.int64)
    avail = _available(np.arange(len(pool)), exclude)
    if not len(avail):
        raise ExhaustedError("every candidate has already been evaluated")
    return _draw(avail, min(count, len(avail)), rng).tolist()
