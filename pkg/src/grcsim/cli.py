"""Command line entry point: ``grcsim <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from collections import Counter
from pathlib import Path

from . import harness
from .cutsim import random_cut, verify_round_equivalence
from .engine import ModelError, Simulation, dump_trace, run_until_halt
from .graph import GENERATOR_KINDS, GraphError, generate, load_graph, oracle_csv, save_graph
from .mst import MSTProgram, mst_construct, mst_is_optimal, port_weights
from .primitives import CountingProgram, LeaderElectionProgram, OrientProgram, OutgoingProgram
from .spanner import SpannerProgram, max_stretch, spanner_construct
from .verification import TASKS, oracle_predicate, verify


def _add_graph_args(p, required=False):
    src = p.add_argument_group("graph source")
    src.add_argument("--graph", help="graph file in the text format")
    src.add_argument("--kind", choices=GENERATOR_KINDS, help="generate instead of loading")
    src.add_argument("--n", type=int, help="node count for --kind")
    src.add_argument("--p", type=float, help="edge probability for gnp-connected")
    src.add_argument("--weights", default="none", choices=("none", "uniform", "all-equal", "distinct-random"))
    src.add_argument("--W", type=int, default=16, help="maximum weight")
    src.add_argument("--graph-seed", type=int, default=0)


def _graph(args):
    if args.graph:
        return load_graph(Path(args.graph).read_text())
    if not args.kind or args.n is None:
        raise SystemExit("error: give --graph FILE or --kind KIND --n N")
    return generate(args.kind, args.n, seed=args.graph_seed, p=args.p, weights=args.weights, W=args.W)


def _emit(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=lambda o: sorted(o) if isinstance(o, (set, frozenset)) else str(o)) + "\n"


def _seeds(args) -> list[int]:
    return list(range(args.seeds)) if args.seeds is not None else [args.seed]


def cmd_gen(args):
    g = _graph(args)
    _emit(oracle_csv(g) if args.oracle else save_graph(g), args.out)
    return 0


def _program(algo, args):
    if algo == "mst":
        return MSTProgram(args.c)
    return SpannerProgram(args.kappa, args.eps, args.c, args.low_memory)


def _run_detail(args, g, seed):
    if args.algo == "mst":
        r = mst_construct(g, args.c, seed, args.max_rounds)
        return {"algo": "mst", "seed": seed, "tree": [list(g.edges[e]) for e in sorted(r.edges)], "weight": r.weight,
                "rounds": r.rounds, "phases": r.phases, "timed_out": r.timed_out, "cycle": r.cycle,
                "tag_collision": r.tag_collision, "one_sided": sorted(r.one_sided),
                "optimal": mst_is_optimal(g, r)}
    r = spanner_construct(g, args.kappa, args.eps, args.c, seed, args.max_rounds, low_memory=args.low_memory)
    return {"algo": "spanner", "seed": seed, "H": [list(g.edges[e]) for e in sorted(r.edges)], "size": len(r.edges),
            "delta": r.deltas, "centers": sorted(r.centers), "cluster_of": r.cluster_of, "rounds": r.rounds,
            "timed_out": r.timed_out, "stretch": max_stretch(g, r.edges)}


def cmd_run(args):
    if args.config:
        try:
            cfg = harness.ExperimentConfig.from_dict(json.loads(Path(args.config).read_text()))
        except harness.ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        res = harness.run_batch(cfg, harness.out_dir(args.out))
        print(json.dumps(res.summary, sort_keys=True, default=str))
        return 0
    if args.algo is None:
        raise SystemExit("error: give --algo or --config")
    g = _graph(args)
    seeds = _seeds(args)
    if len(seeds) == 1 and args.format == "json":
        _emit(_json(_run_detail(args, g, seeds[0])), args.out)
        return 0
    params = {"c": args.c, "max_rounds": args.max_rounds}
    if args.algo == "spanner":
        params.update(kappa=args.kappa, eps=args.eps, low_memory=args.low_memory)
    source = {"file": args.graph} if args.graph else {"kind": args.kind, "n": args.n, "p": args.p,
                                                    "weights": args.weights, "W": args.W,
                                                    "graph_seed": args.graph_seed}
    cfg = harness.ExperimentConfig(args.algo, source, sorted(seeds), params, args.algo)
    rows = sorted((harness.run_one(cfg, s) for s in cfg.seeds), key=lambda r: r["seed"])
    if args.format == "csv":
        _emit(harness.rows_to_csv(rows), args.out)
    else:
        _emit(_json(harness.summarize(args.algo, rows, algo=args.algo, params=params)), args.out)
    return 0


def cmd_verify(args):
    g = _graph(args)
    changes = {key: getattr(args, key) for key in ("s", "t") if getattr(args, key) is not None}
    if args.edge is not None:
        changes["marked_edge"] = args.edge
    if args.subgraph is not None:
        changes["subgraph"] = frozenset(int(x) for x in args.subgraph.split(",") if x)
    g = g.replace(**changes) if changes else g
    try:
        r = verify(args.task, g, args.c, args.seed, args.max_rounds)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    detail = {"task": args.task, "seed": args.seed, "decision": r.decision, "unanimous": r.unanimous,
              "rounds": r.rounds, "timed_out": r.timed_out}
    if args.oracle:
        detail["oracle"] = oracle_predicate(args.task, g)
    _emit(_json(detail), args.out)
    return 0 if r.decision and r.unanimous else 1


def cmd_cutsim(args):
    g = _graph(args)
    if args.cut == "random":
        side = random_cut(g.n, random.Random(args.seed))
    else:
        side = {int(x) for x in Path(args.cut).read_text().split()}
    inputs = port_weights(g) if args.algo == "mst" else None
    rep = verify_round_equivalence(g, _program(args.algo, args), args.seed, side, args.rounds, inputs=inputs)
    lines = ["round,bits,bound,q"] + [f"{t},{b},{rep.bound},{rep.q}" for t, b in enumerate(rep.bits)]
    _emit("\n".join(lines) + "\n", args.out)
    if rep.mismatches:
        print(f"{len(rep.mismatches)} feedback mismatches", file=sys.stderr)
        return 1
    return 0


def cmd_fit(args):
    with open(args.csv, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r.get("rounds")]
    ns = [int(r["n"]) for r in rows]
    rounds = [float(r["rounds"]) for r in rows]
    kappas = None
    if args.model.startswith("kappa"):
        kappas = [int(dict(kv.split("=") for kv in r["param"].split(";"))["kappa"]) for r in rows]
    try:
        fit = harness.fit_rounds(ns, rounds, args.model, args.W, kappas)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(_json(fit.__dict__), args.out)
    return 0


def cmd_trace(args):
    g = _graph(args)
    inputs = port_weights(g) if args.algo == "mst" else None
    sim = Simulation(g, _program(args.algo, args), args.seed, inputs=inputs, trace=True)
    for _ in range(args.rounds):
        if not sim.step_round():
            break
    _emit(dump_trace(sim.trace, sim.k) + "\n", args.out)
    return 0


def cmd_prim(args):
    g = _graph(args)
    if args.name == "counting":
        durations = Counter()
        for seed in _seeds(args):
            res = run_until_halt(g, CountingProgram(args.repetitions), seed, args.max_rounds)
            durations.update(d for d in res.outputs[0])
        out = {"primitive": "counting", "n": g.n, "histogram": dict(sorted(durations.items()))}
    elif args.name == "leader":
        rng = random.Random(args.seed)
        cand = [rng.random() < args.fraction for _ in range(g.n)]
        res = run_until_halt(g, LeaderElectionProgram(args.c), args.seed, args.max_rounds,
                             inputs=[{"candidate": x} for x in cand])
        out = {"primitive": "leader", "candidates": [v for v in range(g.n) if cand[v]],
               "leaders": [v for v in range(g.n) if res.outputs[v][0]], "rounds": res.rounds}
    elif args.name == "orient":
        res = run_until_halt(g, OrientProgram(), args.seed, args.max_rounds)
        out = {"primitive": "orient", "phases": max(o[1] for o in res.outputs), "rounds": res.rounds}
    else:
        h = g.subgraph or frozenset()
        inputs = [{"in_h": [e in h for e in g.ports[v]]} for v in range(g.n)]
        res = run_until_halt(g, OutgoingProgram(args.c), args.seed, args.max_rounds, inputs=inputs)
        out = {"primitive": "outgoing", "rounds": res.rounds,
               "outgoing": {v: sorted(res.outputs[v]) for v in range(g.n)}}
    _emit(_json(out), args.out)
    return 0


def cmd_preset(args):
    if args.name == "list":
        print("\n".join(harness.PRESETS))
        return 0
    try:
        res = harness.run_preset(args.name, harness.out_dir(args.out))
    except harness.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for label, ok, detail in res.checks:
        print(f"{'PASS' if ok else 'FAIL'}  {label}  ({detail})")
    return 0 if res.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grcsim", description="Reconfigurable circuits simulator and experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graph=True):
        if graph:
            _add_graph_args(p)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--seeds", type=int, help="run seeds 0..N-1")
        p.add_argument("--c", type=int, default=3)
        p.add_argument("--max-rounds", type=int, default=200_000)
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="json")

    def algo(p):
        p.add_argument("--algo", choices=("mst", "spanner"))
        p.add_argument("--kappa", type=int, default=3)
        p.add_argument("--eps", type=float, default=0.5)
        p.add_argument("--low-memory", action="store_true")

    p = sub.add_parser("gen", help="generate a graph")
    _add_graph_args(p)
    p.add_argument("--oracle", action="store_true", help="write the oracle answers CSV instead")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run mst or spanner once or as a batch")
    common(p)
    algo(p)
    p.add_argument("--config", help="JSON experiment config (batch mode; --out is a directory)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="decide a predicate; exit 0 iff all nodes accept")
    common(p)
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--s", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--edge", type=int, help="index of the marked edge")
    p.add_argument("--subgraph", help="comma-separated edge indices of H")
    p.add_argument("--oracle", action="store_true", help="include the centralized answer")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cutsim", help="two-party replay across a cut; CSV of bits per round")
    common(p)
    algo(p)
    p.add_argument("--cut", default="random", help="'random' or a file of node ids on side A")
    p.add_argument("--rounds", type=int, default=50)
    p.set_defaults(func=cmd_cutsim, algo="mst")

    p = sub.add_parser("fit", help="fit mean rounds from a batch CSV")
    p.add_argument("csv")
    p.add_argument("--model", choices=harness.MODELS, default="log")
    p.add_argument("--W", type=float, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("trace", help="dump the per-round trace of a run")
    common(p)
    algo(p)
    p.add_argument("--rounds", type=int, default=20)
    p.set_defaults(func=cmd_trace, algo="mst")

    p = sub.add_parser("prim", help="run one primitive standalone")
    common(p)
    p.add_argument("name", choices=("counting", "leader", "orient", "outgoing"))
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--fraction", type=float, default=0.5, help="candidate probability for leader")
    p.set_defaults(func=cmd_prim)

    p = sub.add_parser("preset", help="run a named acceptance preset ('list' to show them)")
    p.add_argument("name")
    p.add_argument("--out", help="output directory (default $GRCSIM_OUT_DIR or ./grcsim-out)")
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
