"""Discrete-time SI / SIR / SIS / IC spreading and the simulation-based fitness score.

All models update synchronously. In a step every susceptible node with ``m``
infectious neighbours is infected with probability ``1 - (1 - beta)**m``,
which is the law of ``m`` independent per-edge attempts. Each step consumes
exactly two uniform vectors of length N from the generator (infection, then
recovery) whatever the model, so SI and SIR with ``gamma = 0`` follow the same
trajectory for the same stream.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graph import Graph

MODELS = ("SI", "SIR", "SIS", "IC")

SUSCEPTIBLE = 0
INFECTED = 1  # for IC: active
RECOVERED = 2


@dataclass(frozen=True)
class DiffusionConfig:
    model: str = "SIR"
    infection_rate: float = 0.1
    recovery_rate: float = 0.1
    max_steps: int = 50
    patience: int = 5

    def __post_init__(self):
        model = self.model.upper()
        if model not in MODELS:
            raise ValueError(f"unknown diffusion model {self.model!r}; choose from {MODELS}")
        object.__setattr__(self, "model", model)
        for name in ("infection_rate", "recovery_rate"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.max_steps < 1 or self.patience < 1:
            raise ValueError("max_steps and patience must be >= 1")


@dataclass(frozen=True, eq=False)
class DiffusionState:
    """Per-node status codes plus, for IC, the nodes activated last step."""

    status: np.ndarray
    frontier: np.ndarray

    @property
    def infected(self) -> np.ndarray:
        return self.status == INFECTED


@dataclass(frozen=True)
class TauEstimate:
    mean: float
    variance: float
    maxima: np.ndarray

    @property
    def rounds(self) -> int:
        return len(self.maxima)


def initial_state(n_nodes: int, sources) -> DiffusionState:
    status = np.zeros(n_nodes, dtype=np.int8)
    idx = np.asarray(list(sources), dtype=np.int64)
    status[idx] = INFECTED
    return DiffusionState(status, status == INFECTED)


def step(state: DiffusionState, g: Graph, cfg: DiffusionConfig, rng: np.random.Generator) -> DiffusionState:
    n = g.n_nodes
    u_inf = rng.random(n)
    u_rec = rng.random(n)
    status = state.status
    spreaders = state.frontier if cfg.model == "IC" else status == INFECTED
    pressure = g.sparse_adjacency @ spreaders.astype(np.float64)
    p_inf = 1.0 - (1.0 - cfg.infection_rate) ** pressure
    newly = (status == SUSCEPTIBLE) & (u_inf < p_inf)

    nxt = status.copy()
    if cfg.model in ("SIR", "SIS"):
        recovering = (status == INFECTED) & (u_rec < cfg.recovery_rate)
        nxt[recovering] = RECOVERED if cfg.model == "SIR" else SUSCEPTIBLE
    nxt[newly] = INFECTED
    return DiffusionState(nxt, newly)


def is_absorbing(state: DiffusionState, cfg: DiffusionConfig) -> bool:
    if cfg.model == "IC":
        return not state.frontier.any()
    if cfg.model in ("SIR", "SIS"):
        return not (state.status == INFECTED).any()
    return False


def snapshot_of(state: DiffusionState) -> np.ndarray:
    """Binary observation: infected (or ever-activated under IC) -> 1, otherwise 0."""
    return (state.status == INFECTED).astype(np.int8)


def similarity(o, o_star) -> int:
    """Number of nodes on which two snapshots agree (N minus Hamming distance)."""
    o = np.asarray(o)
    o_star = np.asarray(o_star)
    if o.shape != o_star.shape:
        raise ValueError(f"snapshot lengths differ: {o.shape} vs {o_star.shape}")
    return int(o.size - np.count_nonzero(o != o_star))


def simulate(g: Graph, sources, cfg: DiffusionConfig, steps: int, rng: np.random.Generator) -> DiffusionState:
    state = initial_state(g.n_nodes, sources)
    for _ in range(steps):
        state = step(state, g, cfg, rng)
    return state


def round_seed(seed: int, r: int) -> np.random.Generator:
    """Independent stream for round ``r``; depends only on (seed, r)."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(r)])


def _peak_similarity(g, sources, o_star, cfg, seed, r) -> int:
    rng = round_seed(seed, r)
    state = initial_state(g.n_nodes, sources)
    best = similarity(snapshot_of(state), o_star)
    stale = 0
    for _ in range(cfg.max_steps):
        state = step(state, g, cfg, rng)
        sim = similarity(snapshot_of(state), o_star)
        if sim > best:
            best, stale = sim, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
        if is_absorbing(state, cfg):
            break
    return best


def estimate_tau(
    g: Graph,
    sources,
    o_star,
    cfg: DiffusionConfig,
    rounds: int,
    seed: int,
    workers: int = 1,
) -> TauEstimate:
    """Monte-Carlo mean of the per-round peak similarity to ``o_star``.

    Each round runs from ``sources`` until ``cfg.patience`` consecutive steps
    fail to beat the round's best similarity (or ``cfg.max_steps``); the
    source-only configuration counts as step 0.
    """
    sources = list(sources)
    if not sources:
        raise ValueError("source set must be nonempty")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    o_star = np.asarray(o_star, dtype=np.int8)
    if o_star.shape != (g.n_nodes,):
        raise ValueError("snapshot length does not match graph")

    def one(r):
        return _peak_similarity(g, sources, o_star, cfg, seed, r)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            maxima = list(pool.map(one, range(rounds)))
    else:
        maxima = [one(r) for r in range(rounds)]
    maxima = np.asarray(maxima, dtype=np.float64)
    var = float(maxima.var(ddof=1)) if rounds > 1 else 0.0
    return TauEstimate(float(maxima.mean()), var, maxima)


def as_snapshot(states, n_nodes: int | None = None) -> np.ndarray:
    o = np.asarray(states)
    if o.ndim != 1 or (n_nodes is not None and len(o) != n_nodes):
        raise ValueError("snapshot must be a vector with one entry per node")
    if not np.isin(o, (0, 1)).all():
        raise ValueError("snapshot entries must be 0 or 1")
    return o.astype(np.int8)


def write_snapshot(path, o) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "state"])
        for v, s in enumerate(np.asarray(o).tolist()):
            w.writerow([v, int(s)])


def read_snapshot(path, n_nodes: int) -> np.ndarray:
    """Read a ``node_id,state`` CSV; nodes not listed are uninfected."""
    o = np.zeros(n_nodes, dtype=np.int8)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"node_id", "state"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns node_id,state")
        for row in reader:
            v, s = int(row["node_id"]), int(row["state"])
            if not 0 <= v < n_nodes:
                raise ValueError(f"{path}: node id {v} out of range")
            if s not in (0, 1):
                raise ValueError(f"{path}: state must be 0 or 1, got {s}")
            o[v] = s
    return o
