"""Command-line entry point: ``sourceloc {generate,simulate,localize,bench,scaling}``.

Every subcommand accepts ``--config FILE`` plus one flag per configuration
key (``--graph.n 500``, ``--diffusion.model SI`` ...); flags override the file.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .diffusion import read_snapshot, simulate, snapshot_of, write_snapshot
from .graph import NodeSet, load_edge_list
from .localizer import LOCALIZERS, bosoul_localize
from .metrics import source_distance

log = logging.getLogger("sourceloc")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value configuration file")
    group = p.add_argument_group("configuration keys")
    for key, (_, _, _, help_text) in harness.CONFIG_KEYS.items():
        group.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE", help=help_text)


def _config(args) -> harness.ExperimentConfig:
    overrides = {k: v for k, v in vars(args).items() if k in harness.CONFIG_KEYS and v is not None}
    if args.config:
        return harness.load_config(args.config, overrides)
    return harness.build_config(overrides)


def _parse_nodes(text: str) -> list:
    return [int(tok) for tok in text.replace(",", " ").split()]


def cmd_generate(args) -> int:
    cfg = _config(args)
    g = harness.build_graph(cfg.graph, cfg.seed)
    g.write_edge_list(args.out)
    if args.label_map:
        g.write_label_map(args.label_map)
    log.info("wrote %d nodes / %d edges to %s", g.n_nodes, g.n_edges, args.out)
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    g = load_edge_list(args.graph)
    rng = np.random.default_rng(cfg.seed)
    if args.sources:
        truth = NodeSet(tuple(_parse_nodes(args.sources)), g.n_nodes)
        o_star = snapshot_of(simulate(g, truth.members, cfg.diffusion, cfg.observation_time, rng))
    else:
        truth, o_star = harness.generate_ground_truth(
            g, cfg.n_sources, cfg.diffusion, cfg.observation_time, rng, cfg.bosoul.pool_size
        )
    write_snapshot(args.out, o_star)
    if args.truth_out:
        with open(args.truth_out, "w", encoding="utf-8") as fh:
            fh.write(" ".join(map(str, truth.members)) + "\n")
    log.info("sources %s -> %d infected", truth.members, int(o_star.sum()))
    return 0


def cmd_localize(args) -> int:
    cfg = _config(args)
    g = load_edge_list(args.graph)
    o_star = read_snapshot(args.snapshot, g.n_nodes)
    tau = None
    trace = []
    if args.method == "bosoul":
        res = bosoul_localize(g, o_star, cfg.bosoul_config(cfg.seed))
        pred, tau, trace = res.sources, res.predicted_tau, res.trace
    else:
        pred = LOCALIZERS[args.method](g, o_star, cfg.n_sources)
    distance = None
    if args.truth:
        with open(args.truth, encoding="utf-8") as fh:
            truth = NodeSet(tuple(_parse_nodes(fh.read())), g.n_nodes)
        distance = source_distance(g, pred, truth).total

    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["method", "seed", "sources", "tau", "distance", "status"])
        w.writerow([
            args.method, cfg.seed, " ".join(map(str, pred.members)),
            "" if tau is None else f"{tau:.4f}", "" if distance is None else distance, "ok",
        ])
    finally:
        if out is not sys.stdout:
            out.close()
    if args.trace and trace:
        with open(args.trace, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "set_id", "ei", "tau"])
            for i, (set_id, ei, t) in enumerate(trace):
                w.writerow([i, set_id, f"{ei:.6g}", f"{t:.4f}"])
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    if args.out:
        cfg = replace(cfg, output=args.out)
    records = harness.run_experiment(cfg, write=bool(cfg.output))
    if not cfg.output:
        sys.stdout.write(harness.format_records(records, cfg))
    return 0


def cmd_scaling(args) -> int:
    cfg = _config(args)
    sizes = [int(s) for s in args.sizes.split(",")]
    methods = tuple(args.methods.split(",")) if args.methods else cfg.methods
    cfg = replace(cfg, methods=methods)
    rows = harness.run_scaling_bench(sizes, cfg, args.repetitions, args.out)
    if not args.out:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(harness.SCALING_COLUMNS)
        for size, method, rep, secs, status in rows:
            w.writerow([size, method, rep, "" if secs is None else f"{secs:.3f}", status])
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    parser = argparse.ArgumentParser(prog="sourceloc", description="Locate diffusion sources from an infection snapshot.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a generated graph as an edge list")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--label-map", help="also write the node_id,label CSV")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", parents=[common], help="spread from sources and write the snapshot CSV")
    _add_config_flags(p)
    p.add_argument("--graph", required=True, help="edge-list file")
    p.add_argument("--sources", help="comma-separated source ids (default: draw experiment.sources)")
    p.add_argument("--out", required=True, help="snapshot CSV")
    p.add_argument("--truth-out", help="write the source ids here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("localize", parents=[common], help="locate sources from a snapshot")
    _add_config_flags(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--method", choices=harness.METHODS, default="bosoul")
    p.add_argument("--truth", help="file with the true source ids, to report the distance")
    p.add_argument("--out", help="report CSV (default: stdout)")
    p.add_argument("--trace", help="per-iteration trace CSV (bosoul only)")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("bench", parents=[common], help="run repeated experiments and write the results CSV")
    _add_config_flags(p)
    p.add_argument("--out", help="results CSV (overrides experiment.output)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("scaling", parents=[common], help="time the methods on small-world graphs of growing size")
    _add_config_flags(p)
    p.add_argument("--sizes", required=True, help="ascending comma list, e.g. 1000,2000,3000")
    p.add_argument("--methods", help="comma list (default: experiment.methods)")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--out", help="timing CSV (default: stdout)")
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (harness.ConfigError, ValueError, OSError) as exc:
        parser.exit(2, f"sourceloc: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
