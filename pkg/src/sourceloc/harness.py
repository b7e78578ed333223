"""Experiment configuration, ground-truth generation and benchmark runners.

Configuration files are flat ``key = value`` text with namespaced keys
(``graph.n``, ``diffusion.model``, ``bosoul.budget`` ...); see ``CONFIG_KEYS``.
Blank lines and ``#`` comments are ignored and unknown keys are errors.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import time
import traceback
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .diffusion import DiffusionConfig, simulate, snapshot_of
from .graph import (
    Graph,
    NodeSet,
    generate_erdos_renyi,
    generate_small_world,
    largest_connected_component,
    load_edge_list,
    top_degree_nodes,
)
from .localizer import LOCALIZERS, BosoulConfig, bosoul_localize
from .metrics import source_distance
from .spectral import build_basis

log = logging.getLogger(__name__)

METHODS = ("bosoul", "jordan", "netsleuth")
RECORD_COLUMNS = ("run", "method", "seed", "distance", "seconds", "tau", "status")
SUMMARY_COLUMNS = ("method", "mean", "std")
SCALING_COLUMNS = ("size", "method", "run", "seconds", "status")
MAX_SOURCE_ATTEMPTS = 10_000
MAX_SNAPSHOT_ATTEMPTS = 20


class ConfigError(ValueError):
    pass


class GroundTruthError(RuntimeError):
    pass


@dataclass(frozen=True)
class GraphSpec:
    kind: str = "small_world"  # small_world | erdos_renyi | edgelist
    n: int = 1000
    k: int = 10
    p: float = 0.1
    path: str | None = None
    lcc: bool = True
    seed: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    graph: GraphSpec = field(default_factory=GraphSpec)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    bosoul: BosoulConfig = field(default_factory=BosoulConfig)
    observation_time: int = 10
    n_sources: int = 3
    repetitions: int = 10
    methods: tuple = METHODS
    seed: int = 0
    output: str | None = None
    timing: bool = False

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.observation_time < 1:
            raise ConfigError("observation_time must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")

    def bosoul_config(self, seed: int) -> BosoulConfig:
        return replace(self.bosoul, n_sources=self.n_sources, diffusion=self.diffusion, seed=seed)


@dataclass(frozen=True)
class RunRecord:
    run: int
    method: str
    seed: int
    distance: float | None
    seconds: float | None
    tau: float | None = None
    status: str = "ok"


# --- configuration ----------------------------------------------------------


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _methods(text):
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(m.strip().lower() for m in str(text).split(",") if m.strip())


def _kernel(text):
    mapping = {"gsg": "spectral", "rbf": "indicator", "spectral": "spectral", "indicator": "indicator"}
    try:
        return mapping[str(text).strip().lower()]
    except KeyError:
        raise ConfigError(f"bosoul.kernel must be gsg or rbf, got {text!r}") from None


def _optional_str(text):
    return None if text in (None, "", "none") else str(text)


def _optional_int(text):
    return None if text in (None, "", "none") else int(text)


# key -> (section, field name, parser, help)
CONFIG_KEYS = {
    "graph.type": ("graph", "kind", str, "small_world | erdos_renyi | edgelist"),
    "graph.n": ("graph", "n", int, "number of nodes for generated graphs"),
    "graph.k": ("graph", "k", int, "ring neighbours of the small-world generator"),
    "graph.p": ("graph", "p", float, "rewiring (small world) or edge (Erdos-Renyi) probability"),
    "graph.path": ("graph", "path", _optional_str, "edge-list file for graph.type=edgelist"),
    "graph.lcc": ("graph", "lcc", _bool, "keep only the largest connected component"),
    "graph.seed": ("graph", "seed", _optional_int, "generator seed (default: experiment.seed)"),
    "diffusion.model": ("diffusion", "model", str, "SI | SIR | SIS | IC"),
    "diffusion.beta": ("diffusion", "infection_rate", float, "infection probability per contact and step"),
    "diffusion.gamma": ("diffusion", "recovery_rate", float, "recovery probability per step (SIR/SIS)"),
    "diffusion.max_steps": ("diffusion", "max_steps", int, "step cap of one simulation round"),
    "diffusion.patience": ("diffusion", "patience", int, "non-improving steps before a round stops"),
    "experiment.observation_time": ("experiment", "observation_time", int, "steps simulated before the snapshot"),
    "experiment.sources": ("experiment", "n_sources", int, "number of true sources"),
    "experiment.repetitions": ("experiment", "repetitions", int, "independent ground truths"),
    "experiment.methods": ("experiment", "methods", _methods, "comma list of bosoul, jordan, netsleuth"),
    "experiment.seed": ("experiment", "seed", int, "master seed"),
    "experiment.output": ("experiment", "output", _optional_str, "results CSV path"),
    "experiment.timing": ("experiment", "timing", _bool, "fill the seconds column (breaks byte-identical reruns)"),
    "bosoul.pool_size": ("bosoul", "pool_size", int, "top-degree candidate pool size"),
    "bosoul.clusters": ("bosoul", "clusters", int, "number of clusters / initial evaluations"),
    "bosoul.per_cluster": ("bosoul", "per_cluster", int, "sets sampled per cluster each iteration"),
    "bosoul.budget": ("bosoul", "budget", int, "total simulated candidate sets"),
    "bosoul.rounds": ("bosoul", "rounds", int, "simulation rounds per evaluation"),
    "bosoul.truncate": ("bosoul", "truncate_to", int, "Fourier coefficients kept for clustering"),
    "bosoul.sampling": ("bosoul", "sampling", str, "gss | random"),
    "bosoul.kernel": ("bosoul", "cluster_space", _kernel, "gsg (cluster on spectral signals) | rbf (cluster on raw indicators)"),
    "bosoul.noise": ("bosoul", "noise", str, "fixed | propagated"),
    "bosoul.noise_variance": ("bosoul", "noise_variance", float, "GP noise on standardized targets"),
    "bosoul.filter_adjacent": ("bosoul", "filter_adjacent", _bool, "drop candidate sets with adjacent members"),
    "bosoul.laplacian": ("bosoul", "laplacian", str, "combinatorial | normalized"),
    "bosoul.cache_dir": ("bosoul", "cache_dir", _optional_str, "directory for cached eigenbases"),
    "bosoul.workers": ("bosoul", "workers", int, "threads for simulation rounds"),
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
        values[key] = value
    return values


def build_config(values: dict | None = None, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply ``key -> value`` settings (strings or typed values) to ``base``."""
    base = base or ExperimentConfig()
    sections = {"graph": {}, "diffusion": {}, "bosoul": {}, "experiment": {}}
    for key, value in (values or {}).items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        section, name, parser, _ = CONFIG_KEYS[key]
        try:
            sections[section][name] = parser(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    try:
        graph = replace(base.graph, **sections["graph"])
        diffusion = replace(base.diffusion, **sections["diffusion"])
        n_sources = sections["experiment"].get("n_sources", base.n_sources)
        bosoul = replace(base.bosoul, n_sources=n_sources, diffusion=diffusion, **sections["bosoul"])
        return replace(base, graph=graph, diffusion=diffusion, bosoul=bosoul, **sections["experiment"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8"), str(path))
    values.update(overrides or {})
    return build_config(values)


def config_items(cfg: ExperimentConfig) -> list:
    """Sorted ``(key, value)`` pairs describing ``cfg``."""
    objs = {"graph": cfg.graph, "diffusion": cfg.diffusion, "bosoul": cfg.bosoul, "experiment": cfg}
    items = []
    for key, (section, name, _, _) in sorted(CONFIG_KEYS.items()):
        if key in ("experiment.output", "bosoul.cache_dir"):
            continue
        value = getattr(objs[section], name)
        if key == "bosoul.kernel":
            value = "gsg" if value == "spectral" else "rbf"
        if isinstance(value, tuple):
            value = ",".join(value)
        items.append((key, value))
    return items


# --- graphs and ground truth -------------------------------------------------


def build_graph(spec: GraphSpec, seed: int = 0) -> Graph:
    gseed = seed if spec.seed is None else spec.seed
    if spec.kind == "small_world":
        g = generate_small_world(spec.n, spec.k, spec.p, gseed)
    elif spec.kind == "erdos_renyi":
        g = generate_erdos_renyi(spec.n, spec.p, gseed)
    elif spec.kind == "edgelist":
        if not spec.path:
            raise ConfigError("graph.type=edgelist needs graph.path")
        g = load_edge_list(spec.path)
    else:
        raise ConfigError(f"unknown graph.type {spec.kind!r}")
    if spec.lcc and spec.kind != "small_world":
        g = largest_connected_component(g)
    return g


def _non_adjacent(g: Graph, nodes) -> bool:
    return all(v not in g.neighbors(u) for u, v in itertools.combinations(nodes, 2))


def sample_sources(g: Graph, n: int, rng: np.random.Generator, pool_size: int = 50) -> NodeSet:
    """``n`` pairwise non-adjacent nodes drawn uniformly from the top-degree pool."""
    pool = np.asarray(top_degree_nodes(g, min(pool_size, g.n_nodes)))
    if n > len(pool):
        raise GroundTruthError(f"cannot draw {n} sources from a pool of {len(pool)}")
    for _ in range(MAX_SOURCE_ATTEMPTS):
        pick = rng.choice(pool, size=n, replace=False).tolist()
        if _non_adjacent(g, pick):
            return NodeSet(tuple(pick), g.n_nodes)
    raise GroundTruthError(f"no {n} pairwise non-adjacent pool nodes after {MAX_SOURCE_ATTEMPTS} draws")


def generate_ground_truth(
    g: Graph,
    n: int,
    cfg: DiffusionConfig,
    observation_time: int,
    rng: np.random.Generator,
    pool_size: int = 50,
):
    """Draw true sources and the snapshot observed ``observation_time`` steps later.

    Draws again (sources and spread) while the snapshot has fewer than ``n``
    infected nodes, at most 20 times.
    """
    for _ in range(MAX_SNAPSHOT_ATTEMPTS):
        truth = sample_sources(g, n, rng, pool_size)
        o_star = snapshot_of(simulate(g, truth.members, cfg, observation_time, rng))
        if o_star.sum() >= n:
            return truth, o_star
    raise GroundTruthError(
        f"snapshot had fewer than {n} infected nodes in {MAX_SNAPSHOT_ATTEMPTS} attempts"
    )


# --- running -----------------------------------------------------------------


def _rep_seeds(master: int, rep: int):
    gt, method = np.random.SeedSequence([int(master), int(rep)]).generate_state(2, np.uint32)
    return int(gt), int(method)


def run_method(method, g, o_star, n, bosoul_cfg, basis=None):
    """Returns (predicted NodeSet, tau or None, seconds)."""
    start = time.perf_counter()
    if method == "bosoul":
        res = bosoul_localize(g, o_star, bosoul_cfg, basis=basis)
        return res.sources, res.predicted_tau, time.perf_counter() - start
    pred = LOCALIZERS[method](g, o_star, n)
    return pred, None, time.perf_counter() - start


def run_experiment(cfg: ExperimentConfig, graph: Graph | None = None, write: bool = True) -> list:
    """Localize ``cfg.repetitions`` fresh ground truths with every method.

    Component failures are caught and recorded with a non-``ok`` status.
    """
    g = graph if graph is not None else build_graph(cfg.graph, cfg.seed)
    basis = build_basis(g, cfg.bosoul.laplacian, cfg.bosoul.cache_dir) if "bosoul" in cfg.methods else None
    records = []
    for rep in range(cfg.repetitions):
        gt_seed, method_seed = _rep_seeds(cfg.seed, rep)
        try:
            truth, o_star = generate_ground_truth(
                g, cfg.n_sources, cfg.diffusion, cfg.observation_time,
                np.random.default_rng(gt_seed), cfg.bosoul.pool_size,
            )
        except Exception as exc:
            log.warning("run %d: ground truth failed: %s", rep, exc)
            records.extend(
                RunRecord(rep, m, method_seed, None, None, None, f"error:{type(exc).__name__}")
                for m in cfg.methods
            )
            continue
        for method in cfg.methods:
            try:
                pred, tau, secs = run_method(
                    method, g, o_star, cfg.n_sources, cfg.bosoul_config(method_seed), basis
                )
                dist = source_distance(g, pred, truth).total
                records.append(RunRecord(rep, method, method_seed, dist, secs, tau))
            except Exception as exc:
                log.warning("run %d, %s failed: %s", rep, method, exc)
                log.debug("%s", traceback.format_exc())
                records.append(
                    RunRecord(rep, method, method_seed, None, None, None, f"error:{type(exc).__name__}")
                )
    records.sort(key=lambda r: (r.run, r.method))
    if write and cfg.output:
        write_records(cfg.output, records, cfg)
    return records


def summarize(records) -> list:
    """(method, mean, std) over successful runs; std uses ``ddof=1`` (0 for one run)."""
    out = []
    for method in sorted({r.method for r in records}):
        d = np.array([r.distance for r in records if r.method == method and r.status == "ok"], float)
        if not len(d):
            out.append((method, float("nan"), float("nan")))
            continue
        std = float(d.std(ddof=1)) if len(d) > 1 else 0.0
        out.append((method, float(d.mean()), std))
    return out


def _fmt(x, digits=4):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.{digits}f}"


def format_records(records, cfg: ExperimentConfig | None = None) -> str:
    buf = io.StringIO()
    if cfg is not None:
        for key, value in config_items(cfg):
            buf.write(f"# {key}={value}\n")
        buf.write("# bosoul.kernel selects the clustering space (gsg: truncated spectral signals, rbf: raw indicators)\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    show_time = cfg is None or cfg.timing
    for r in records:
        w.writerow([
            r.run, r.method, r.seed, _fmt(r.distance),
            _fmt(r.seconds, 3) if show_time else "", _fmt(r.tau), r.status,
        ])
    w.writerow(SUMMARY_COLUMNS)
    for method, mean, std in summarize(records):
        w.writerow([method, _fmt(mean), _fmt(std)])
    return buf.getvalue()


def write_records(path, records, cfg: ExperimentConfig | None = None) -> None:
    Path(path).write_text(format_records(records, cfg), encoding="utf-8")


def read_records(path) -> tuple:
    """Parse a results CSV back into (run rows, summary rows) as dicts."""
    rows, summary = [], []
    target = rows
    header = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#") or not line:
            continue
        cells = next(csv.reader([line]))
        if tuple(cells) == RECORD_COLUMNS:
            header, target = RECORD_COLUMNS, rows
            continue
        if tuple(cells) == SUMMARY_COLUMNS:
            header, target = SUMMARY_COLUMNS, summary
            continue
        target.append(dict(zip(header, cells)))
    return rows, summary


def run_scaling_bench(sizes, cfg: ExperimentConfig, repetitions: int = 1, output=None) -> list:
    """Time each method once per (size, repetition) on connected small-world graphs.

    BOSouL timings include the Laplacian eigendecomposition.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ConfigError("sizes must be ascending")
    rows = []
    for size in sizes:
        spec = replace(cfg.graph, kind="small_world", n=int(size))
        g = build_graph(spec, cfg.seed)
        for rep in range(repetitions):
            gt_seed, method_seed = _rep_seeds(cfg.seed, rep)
            truth, o_star = generate_ground_truth(
                g, cfg.n_sources, cfg.diffusion, cfg.observation_time,
                np.random.default_rng(gt_seed), cfg.bosoul.pool_size,
            )
            for method in cfg.methods:
                try:
                    _, _, secs = run_method(
                        method, g, o_star, cfg.n_sources,
                        replace(cfg.bosoul_config(method_seed), cache_dir=None),
                    )
                    rows.append((int(size), method, rep, secs, "ok"))
                except Exception as exc:
                    log.warning("size %d, %s failed: %s", size, method, exc)
                    rows.append((int(size), method, rep, None, f"error:{type(exc).__name__}"))
    if output:
        with open(output, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCALING_COLUMNS)
            for size, method, rep, secs, status in rows:
                w.writerow([size, method, rep, _fmt(secs, 3), status])
    return rows

