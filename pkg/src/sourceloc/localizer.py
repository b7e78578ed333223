"""Multi-source localization: Bayesian optimization over candidate sets, plus two baselines."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path

from . import surrogate
from .diffusion import DiffusionConfig, estimate_tau
from .graph import Graph, NodeSet
from .sampler import (
    DEFAULT_TRUNCATE,
    CandidatePool,
    cluster_candidates,
    enumerate_candidates,
    gss_sample,
    random_sample,
)
from .spectral import SpectralBasis, build_basis

log = logging.getLogger(__name__)

SAMPLING = ("gss", "random")
CLUSTER_SPACES = ("spectral", "indicator")
NOISE_MODES = ("fixed", "propagated")
_POSTERIOR_CHUNK = 100_000


@dataclass(frozen=True)
class BosoulConfig:
    n_sources: int = 3
    pool_size: int = 50
    clusters: int = 20
    per_cluster: int = 1
    budget: int = 70
    rounds: int = 100
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    seed: int = 0
    truncate_to: int = DEFAULT_TRUNCATE
    sampling: str = "gss"
    cluster_space: str = "spectral"
    noise: str = "fixed"
    noise_variance: float = surrogate.DEFAULT_NOISE
    filter_adjacent: bool = False
    laplacian: str = "combinatorial"
    cache_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        for name in ("n_sources", "pool_size", "clusters", "per_cluster", "budget", "rounds", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_sources > self.pool_size:
            raise ValueError("n_sources cannot exceed pool_size")
        if self.clusters > self.budget:
            raise ValueError(f"budget {self.budget} is smaller than the number of clusters {self.clusters}")
        if self.sampling not in SAMPLING:
            raise ValueError(f"sampling must be one of {SAMPLING}")
        if self.cluster_space not in CLUSTER_SPACES:
            raise ValueError(f"cluster_space must be one of {CLUSTER_SPACES}")
        if self.noise not in NOISE_MODES:
            raise ValueError(f"noise must be one of {NOISE_MODES}")


@dataclass
class LocalizationResult:
    sources: NodeSet
    evaluations: list  # (set id, tau) in evaluation order
    trace: list  # (set id, ei, tau) per acquisition step
    seconds: float
    predicted_tau: float | None = None
    pool: CandidatePool | None = field(default=None, repr=False)


def _derive_seeds(seed: int):
    cluster, sampling, tau = np.random.SeedSequence(int(seed)).spawn(3)
    return (
        int(cluster.generate_state(1, np.uint32)[0]),
        np.random.default_rng(sampling),
        int(tau.generate_state(1, np.uint64)[0]),
    )


def bosoul_localize(
    g: Graph,
    o_star,
    cfg: BosoulConfig,
    basis: SpectralBasis | None = None,
) -> LocalizationResult:
    """Locate ``cfg.n_sources`` sources by Bayesian optimization over candidate sets.

    The candidate sets are all ``n``-subsets of the ``pool_size`` highest
    degree nodes. They are clustered on their truncated Fourier signals, one
    set per cluster is simulated to seed the surrogate, and each further step
    simulates the sampled set with the largest expected improvement. Exactly
    ``budget`` sets are simulated. The answer is the candidate with the
    largest posterior mean.

    Every simulated set uses the same Monte-Carlo seed, so all candidates are
    compared under common random numbers.
    """
    start = time.perf_counter()
    o_star = np.asarray(o_star, dtype=np.int8)
    if o_star.shape != (g.n_nodes,):
        raise ValueError("snapshot length does not match graph")
    if not o_star.any():
        raise ValueError("snapshot has no infected node")

    if basis is None:
        basis = build_basis(g, cfg.laplacian, cfg.cache_dir)
    pool = enumerate_candidates(
        g, basis, cfg.pool_size, cfg.n_sources, cfg.truncate_to, cfg.filter_adjacent
    )
    if cfg.budget > len(pool):
        raise ValueError(f"budget {cfg.budget} exceeds the {len(pool)} candidate sets")
    if cfg.cluster_space == "indicator":
        pool = replace(pool, signals=pool.pool_indicators())
    cluster_seed, rng, tau_seed = _derive_seeds(cfg.seed)
    pool = cluster_candidates(pool, cfg.clusters, cluster_seed)

    evaluated: list[int] = []
    taus: list[float] = []
    variances: list[float] = []

    def evaluate(set_id):
        est = estimate_tau(
            g, pool.members[set_id], o_star, cfg.diffusion, cfg.rounds, tau_seed, cfg.workers
        )
        evaluated.append(int(set_id))
        taus.append(est.mean)
        variances.append(est.variance / est.rounds)
        return est.mean

    if cfg.sampling == "gss":
        initial = gss_sample(pool, 1, rng)
    else:
        initial = random_sample(pool, cfg.clusters, rng)
    for set_id in initial:
        evaluate(set_id)

    def refit():
        if len(evaluated) < 2:
            return None
        X = pool.pool_indicators(evaluated)
        if cfg.noise == "propagated":
            return surrogate.fit(X, taus, target_noise=variances)
        return surrogate.fit(X, taus, noise=cfg.noise_variance)

    model = refit()
    trace = []
    for _ in range(cfg.budget - len(evaluated)):
        if cfg.sampling == "gss":
            batch = gss_sample(pool, cfg.per_cluster, rng, exclude=evaluated)
        else:
            batch = random_sample(pool, cfg.clusters * cfg.per_cluster, rng, exclude=evaluated)
        if model is None:
            pick, ei = batch[0], float("nan")
        else:
            acq = surrogate.argmax_ei(model, pool.pool_indicators(batch), max(taus))
            pick, ei = batch[acq.index], acq.ei
        tau = evaluate(pick)
        trace.append((int(pick), ei, tau))
        model = refit()

    if model is None:
        best_id, predicted = evaluated[int(np.argmax(taus))], max(taus)
    else:
        means = np.concatenate(
            [
                surrogate.posterior(model, pool.pool_indicators(np.arange(lo, min(lo + _POSTERIOR_CHUNK, len(pool)))))[0]
                for lo in range(0, len(pool), _POSTERIOR_CHUNK)
            ]
        )
        best_id = int(np.argmax(means))
        predicted = float(means[best_id])

    return LocalizationResult(
        sources=pool.node_set(best_id),
        evaluations=list(zip(evaluated, taus)),
        trace=trace,
        seconds=time.perf_counter() - start,
        predicted_tau=predicted,
        pool=pool,
    )


# --- baselines -------------------------------------------------------------


def _infected_components(g: Graph, o_star):
    """Infected subgraph split into components, largest first (ties: smallest node id)."""
    infected = np.flatnonzero(np.asarray(o_star))
    if not len(infected):
        raise ValueError("snapshot has no infected node")
    sub = g.subgraph(infected.tolist())
    _, comp = connected_components(sub.sparse_adjacency, directed=False)
    groups = [np.flatnonzero(comp == c) for c in range(comp.max() + 1)]
    groups.sort(key=lambda idx: (-len(idx), infected[idx[0]]))
    return infected, sub, groups


def _round_robin_quota(sizes, n):
    quota = [0] * len(sizes)
    left = min(n, sum(sizes))
    while left:
        for i, size in enumerate(sizes):
            if left and quota[i] < size:
                quota[i] += 1
                left -= 1
    return quota


def _pad(g: Graph, chosen, infected, n):
    """Fill up to ``n`` nodes with high-degree uninfected neighbours of the infected set."""
    chosen = list(chosen)
    if len(chosen) >= n:
        return chosen
    inf = set(infected.tolist())
    frontier = {v for u in inf for v in g.neighbors(u)} - inf
    rest = set(range(g.n_nodes)) - inf - frontier
    deg = g.degrees
    for group in (frontier, rest):
        for v in sorted(group, key=lambda v: (-deg[v], v)):
            if len(chosen) == n:
                return chosen
            chosen.append(v)
    return chosen


def jordan_localize(g: Graph, o_star, n: int) -> NodeSet:
    """Nodes of smallest eccentricity within their component of the infected subgraph."""
    infected, sub, groups = _infected_components(g, o_star)
    quota = _round_robin_quota([len(c) for c in groups], n)
    chosen = []
    for idx, q in zip(groups, quota):
        if not q:
            continue
        dist = shortest_path(sub.sparse_adjacency[idx][:, idx], unweighted=True, directed=False)
        ecc = dist.max(axis=1)
        order = sorted(range(len(idx)), key=lambda i: (ecc[i], infected[idx[i]]))
        chosen.extend(int(infected[idx[i]]) for i in order[:q])
    return NodeSet(tuple(_pad(g, chosen, infected, n)), g.n_nodes)


def _netsleuth_scores(g: Graph, nodes: np.ndarray) -> np.ndarray:
    """|entries| of the eigenvector of the smallest eigenvalue of the Laplacian submatrix.

    The submatrix keeps full-graph degrees on the diagonal, so nodes with many
    uninfected neighbours are penalised.
    """
    A = g.sparse_adjacency[nodes][:, nodes].toarray()
    L = np.diag(g.degrees[nodes].astype(np.float64)) - A
    _, vecs = np.linalg.eigh(L)
    return np.abs(vecs[:, 0])


def netsleuth_localize(g: Graph, o_star, n: int) -> NodeSet:
    """Fixed-``n`` NetSleuth: repeatedly take the top-scoring infected node and remove it."""
    infected, _, groups = _infected_components(g, o_star)
    quota = _round_robin_quota([len(c) for c in groups], n)
    chosen = []
    for idx, q in zip(groups, quota):
        remaining = infected[idx]
        for _ in range(q):
            scores = _netsleuth_scores(g, remaining)
            best = max(range(len(remaining)), key=lambda i: (scores[i], -remaining[i]))
            chosen.append(int(remaining[best]))
            remaining = np.delete(remaining, best)
    return NodeSet(tuple(_pad(g, chosen, infected, n)), g.n_nodes)


LOCALIZERS = {
    "jordan": jordan_localize,
    "netsleuth": netsleuth_localize,
}


def n_candidates(cfg: BosoulConfig) -> int:
    return math.comb(cfg.pool_size, cfg.n_sources)
