"""Seeded experiment batches, round-count fits and the named acceptance presets."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import random
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean, pstdev

import numpy as np

from .engine import form_circuits, make_partition
from .graph import Graph, generate, load_graph
from .mst import mst_construct, mst_is_optimal
from .primitives import counting_duration, median_duration
from .spanner import (SamplerConfig, geomcap_pmf, max_stretch, sample_geomcap, size_bound,
                      spanner_construct)
from .verification import LOG_TASKS, TASKS, balanced_instances, oracle_predicate, verify

CSV_SCHEMA = 1
JSON_SCHEMA = 1
COLUMNS = ("schema", "algo", "param", "seed", "n", "m", "rounds", "timed_out",
           "size", "weight", "decision", "expected", "ok", "flags")
ALGOS = ("mst", "spanner", "verify")
DEFAULT_OUT = "grcsim-out"


class ConfigError(ValueError):
    pass


def out_dir(explicit=None) -> Path:
    return Path(explicit or os.environ.get("GRCSIM_OUT_DIR") or DEFAULT_OUT)


# -- configuration ------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    algo: str
    graph: dict
    seeds: list[int]
    params: dict = field(default_factory=dict)
    name: str = "batch"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config: expected a mapping")
        algo = data.get("algo")
        if algo not in ALGOS:
            raise ConfigError(f"algo: expected one of {', '.join(ALGOS)}, got {algo!r}")
        graph = data.get("graph")
        if not isinstance(graph, dict) or not ("file" in graph or "kind" in graph):
            raise ConfigError("graph: expected a mapping with 'file' or 'kind'")
        if "kind" in graph and not isinstance(graph.get("n"), int):
            raise ConfigError("graph.n: expected an integer")
        seeds = data.get("seeds")
        if isinstance(seeds, int) and not isinstance(seeds, bool):
            seeds = list(range(seeds))
        if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
            raise ConfigError("seeds: expected a list of integers or a count")
        if not seeds:
            raise ConfigError("seeds: no seeds")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("params: expected a mapping")
        for key in ("c", "kappa", "max_rounds"):
            if key in params and not (isinstance(params[key], int) and params[key] >= 1):
                raise ConfigError(f"params.{key}: expected a positive integer")
        if "eps" in params and not (isinstance(params["eps"], (int, float)) and 0 < params["eps"] < 1):
            raise ConfigError("params.eps: expected a number in (0, 1)")
        if algo == "verify" and params.get("task") not in TASKS:
            raise ConfigError(f"params.task: expected one of {', '.join(TASKS)}")
        if algo == "spanner" and "kappa" not in params:
            raise ConfigError("params.kappa: required for spanner")
        return cls(algo, graph, sorted(seeds), params, data.get("name", "batch"))


def build_graph(source: dict, seed: int) -> Graph:
    if "file" in source:
        return load_graph(Path(source["file"]).read_text())
    opts = {k: source[k] for k in ("p", "chords", "rows", "weights", "W") if source.get(k) is not None}
    # a fixed graph seed keeps one instance across the batch
    return generate(source["kind"], source["n"], seed=source.get("graph_seed", seed), **opts)


# -- batches --------------------------------------------------------------------------

def _row(algo, param, seed, g, **values):
    row = dict.fromkeys(COLUMNS, "")
    row.update(schema=CSV_SCHEMA, algo=algo, param=param, seed=seed, n=g.n, m=g.m)
    row.update(values)
    return row


def run_one(config: ExperimentConfig, seed: int) -> dict:
    p = config.params
    c = p.get("c", 3)
    max_rounds = p.get("max_rounds", 200_000)
    g = build_graph(config.graph, seed)
    if config.algo == "mst":
        r = mst_construct(g, c, seed, max_rounds)
        flags = [name for name, on in (("timeout", r.timed_out), ("cycle", r.cycle),
                                        ("collision", r.tag_collision), ("one-sided", bool(r.one_sided))) if on]
        return _row("mst", f"c={c}", seed, g, rounds=r.rounds, timed_out=int(r.timed_out),
                    size=len(r.edges), weight=r.weight, ok=int(mst_is_optimal(g, r)), flags="|".join(flags))
    if config.algo == "spanner":
        kappa, eps = p["kappa"], p.get("eps", 0.5)
        low = bool(p.get("low_memory", False))
        r = spanner_construct(g, kappa, eps, c, seed, max_rounds, low_memory=low)
        stretch = max_stretch(g, r.edges)
        flags = [name for name, on in (("timeout", r.timed_out), ("one-sided", bool(r.one_sided))) if on]
        return _row("spanner", f"kappa={kappa};eps={eps};c={c};low_memory={int(low)}", seed, g,
                    rounds=r.rounds, timed_out=int(r.timed_out), size=len(r.edges),
                    weight=stretch, ok=int(stretch <= 2 * kappa - 1 and not r.timed_out),
                    flags="|".join(flags))
    task = p["task"]
    r = verify(task, g, c, seed, max_rounds)
    expected = oracle_predicate(task, g)
    return _row("verify", f"task={task};c={c}", seed, g, rounds=r.rounds, timed_out=int(r.timed_out),
                size=len(g.subgraph or ()), decision="" if r.decision is None else int(r.decision),
                expected=int(expected), ok=int(r.decision == expected),
                flags="" if r.unanimous else "split")


@dataclass
class ExperimentResult:
    name: str
    rows: list[dict]
    summary: dict


def summarize(name: str, rows: list[dict], **extra) -> dict:
    ok = [r["ok"] for r in rows if r.get("ok", "") != ""]
    rounds = [r["rounds"] for r in rows if r.get("rounds", "") != ""]
    out = {
        "schema": JSON_SCHEMA,
        "name": name,
        "runs": len(rows),
        "success_rate": (sum(ok) / len(ok)) if ok else None,
        "timeouts": sum(1 for r in rows if r.get("timed_out") == 1),
        "mean_rounds": fmean(rounds) if rounds else None,
    }
    out.update(extra)
    return out


def run_batch(config: ExperimentConfig, out: Path | None = None) -> ExperimentResult:
    if not config.seeds:
        raise ConfigError("seeds: no seeds")
    rows = sorted((run_one(config, s) for s in config.seeds), key=lambda r: r["seed"])
    result = ExperimentResult(config.name, rows, summarize(config.name, rows, algo=config.algo,
                                                           params=config.params))
    if out is not None:
        write_outputs(result, out)
    return result


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_outputs(result: ExperimentResult, directory: Path) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{result.name}.csv"
    json_path = directory / f"{result.name}.json"
    csv_path.write_text(rows_to_csv(result.rows))
    json_path.write_text(json.dumps(result.summary, indent=2, sort_keys=True, default=str) + "\n")
    return csv_path, json_path


# -- fits -----------------------------------------------------------------------------

MODELS = ("log", "loglog", "kappa+log", "kappa*log")


def model_feature(model: str, n: float, W: float = 1, kappa: float = 1) -> float:
    log_n = math.log2(n)
    if model == "log":
        return log_n
    if model == "loglog":
        return log_n * math.log2(n + W)
    if model == "kappa+log":
        return kappa + log_n
    if model == "kappa*log":
        return kappa * log_n
    raise ValueError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")


@dataclass
class Fit:
    model: str
    a: float
    b: float
    rms: float
    relative_residual: float
    points: int


def fit_rounds(ns, rounds, model: str = "log", W: float = 1, kappas=None) -> Fit:
    """Least squares of mean rounds against a·f(n) + b.

    ``ns`` and ``rounds`` are parallel sequences of per-run values; runs are
    averaged per distinct ``(n, kappa)`` first.
    """
    kappas = list(kappas) if kappas is not None else [1] * len(ns)
    groups = {}
    for n, r, k in zip(ns, rounds, kappas):
        groups.setdefault((n, k), []).append(r)
    if len({n for n, _ in groups}) < 2 and len({k for _, k in groups}) < 2:
        raise ValueError("need at least 2 distinct sizes to fit")
    keys = sorted(groups)
    x = np.array([model_feature(model, n, W, k) for n, k in keys])
    y = np.array([fmean(groups[key]) for key in keys])
    design = np.column_stack([x, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (a * x + b)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    mean = float(np.mean(y))
    return Fit(model, float(a), float(b), rms, rms / mean if mean else math.inf, len(keys))


# -- brute-force closure oracle ----------------------------------------------------------

def closure_oracle(graph: Graph, k: int, partitions) -> list[frozenset[int]]:
    """Circuits by iterating R := R ∪ R∘R on an explicit pin relation until it stops growing."""
    size = graph.m * k
    reach = [1 << p for p in range(size)]
    for v, partition in enumerate(partitions):
        ids = [e * k + i for e in graph.ports[v] for i in range(k)]
        for part in partition:
            mask = 0
            for c in part:
                mask |= 1 << ids[c]
            for c in part:
                reach[ids[c]] |= mask
    changed = True
    while changed:
        changed = False
        for p in range(size):
            acc = reach[p]
            rest = acc
            while rest:
                low = rest & -rest
                acc |= reach[low.bit_length() - 1]
                rest ^= low
            if acc != reach[p]:
                reach[p] = acc
                changed = True
    return sorted({frozenset(q for q in range(size) if reach[p] >> q & 1) for p in range(size)}, key=min)


def random_partition(degree: int, k: int, rng: random.Random):
    codes = list(range(degree * k))
    rng.shuffle(codes)
    groups = []
    while codes:
        size = rng.randint(1, len(codes))
        groups.append(codes[:size])
        codes = codes[size:]
    return make_partition(degree, k, groups)


def random_small_graph(rng: random.Random, max_n: int = 12) -> Graph:
    n = rng.randint(2, max_n)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = [e for e in pairs if rng.random() < rng.choice((0.2, 0.4, 0.7))]
    return Graph(n, edges or [pairs[0]], k=rng.randint(1, 3))


# -- presets ------------------------------------------------------------------------------

@dataclass
class PresetResult:
    name: str
    passed: bool
    checks: list[tuple[str, bool, str]]
    rows: list[dict]
    summary: dict


def _check(checks, label, ok, detail):
    checks.append((label, bool(ok), detail))


def preset_circuits(cases: int = 10_000, seed: int = 1) -> PresetResult:
    rng = random.Random(seed)
    bad = 0
    rows = []
    for i in range(cases):
        g = random_small_graph(rng)
        parts = [random_partition(g.degree(v), g.k, rng) for v in range(g.n)]
        got = form_circuits(g, g.k, parts).classes
        want = closure_oracle(g, g.k, parts)
        same = got == want
        bad += not same
        if i < 200 or not same:
            rows.append(_row("circuits", f"k={g.k}", i, g, size=len(got), ok=int(same)))
    checks = []
    _check(checks, "form_circuits equals brute-force closure", bad == 0, f"{cases - bad}/{cases} cases equal")
    return PresetResult("circuits", bad == 0, checks, rows, summarize("circuits", rows, cases=cases, mismatches=bad))


def preset_counting(trials: int = 1000, r: int = 6, rho: float = 0.5, sizes=(64, 256), seed: int = 2) -> PresetResult:
    checks, rows = [], []
    rates = {}
    for n in sizes:
        rng = random.Random(f"counting:{seed}:{n}")
        lo, hi = (1 - rho) * math.log2(n), (1 + rho) * math.log2(n)
        miss = 0
        for t in range(trials):
            tau = median_duration([counting_duration(n, rng) for _ in range(2 * r - 1)], r)
            inside = lo <= tau <= hi
            miss += not inside
            rows.append({"schema": CSV_SCHEMA, "algo": "counting", "param": f"r={r}", "seed": t, "n": n,
                         "rounds": tau, "ok": int(inside)})
        rates[n] = miss / trials
        _check(checks, f"n={n}: Pr[median outside [{lo:g}, {hi:g}]] <= 0.05", rates[n] <= 0.05,
               f"observed {rates[n]:.4f}")
    passed = all(ok for _, ok, _ in checks)
    return PresetResult("counting", passed, checks, rows, summarize("counting", rows, miss_rates=rates))


def preset_mst(sizes=(16, 32, 64, 128), seeds: int = 200, c: int = 3, W: int = 16) -> PresetResult:
    rows = []
    for n in sizes:
        cfg = ExperimentConfig("mst", {"kind": "gnp-connected", "n": n, "weights": "uniform", "W": W},
                               list(range(seeds)), {"c": c}, f"mst-{n}")
        rows.extend(run_batch(cfg).rows)
    checks = []
    rates = {}
    for n in sizes:
        sub = [r for r in rows if r["n"] == n]
        rates[n] = sum(r["ok"] for r in sub) / len(sub)
        _check(checks, f"n={n}: w(T) equals Kruskal weight in >= 99% of runs", rates[n] >= 0.99,
               f"{rates[n]:.3f}")
    fit = fit_rounds([r["n"] for r in rows], [r["rounds"] for r in rows], "loglog", W)
    _check(checks, "rounds fit a*log n*log(n+W)+b with relative residual <= 0.25",
           fit.relative_residual <= 0.25 and fit.a > 0,
           f"a={fit.a:.3f} b={fit.b:.2f} rel={fit.relative_residual:.4f}")
    passed = all(ok for _, ok, _ in checks)
    return PresetResult("mst", passed, checks, rows, summarize("mst", rows, rates=rates, fit=fit.__dict__))


def preset_spanner(n: int = 128, kappa: int = 3, eps: float = 0.5, c: int = 3, seeds: int = 100,
                   p: float = 0.5, fit_sizes=(16, 32, 64, 128), fit_kappas=(2, 3, 4), fit_seeds: int = 3) -> PresetResult:
    checks, rows = [], []
    bound = size_bound(n, kappa, eps)
    stats = {}
    for low in (False, True):
        cfg = ExperimentConfig("spanner", {"kind": "gnp-connected", "n": n, "p": p}, list(range(seeds)),
                               {"kappa": kappa, "eps": eps, "c": c, "low_memory": low},
                               f"spanner-{'low' if low else 'std'}")
        sub = run_batch(cfg).rows
        rows.extend(sub)
        label = "low-memory" if low else "standard"
        rate = sum(r["ok"] for r in sub) / len(sub)
        mean_size = fmean(r["size"] for r in sub)
        stats[label] = {"stretch_rate": rate, "mean_size": mean_size,
                        "mean_m": fmean(r["m"] for r in sub)}
        _check(checks, f"{label}: stretch <= {2 * kappa - 1} in >= 95% of runs", rate >= 0.95, f"{rate:.3f}")
        _check(checks, f"{label}: mean |H| <= {bound:.1f}", mean_size <= bound,
               f"mean |H| = {mean_size:.1f} (mean m = {stats[label]['mean_m']:.1f})")
    fit_rows = []
    for size in fit_sizes:
        for k in fit_kappas:
            cfg = ExperimentConfig("spanner", {"kind": "gnp-connected", "n": size}, list(range(fit_seeds)),
                                   {"kappa": k, "eps": eps, "c": c, "low_memory": True}, "spanner-fit")
            fit_rows.extend(run_batch(cfg).rows)
    kappas = [int(r["param"].split(";")[0].split("=")[1]) for r in fit_rows]
    fit = fit_rounds([r["n"] for r in fit_rows], [r["rounds"] for r in fit_rows], "kappa*log", kappas=kappas)
    _check(checks, "low-memory rounds fit a*kappa*log n+b with relative residual <= 0.25",
           fit.relative_residual <= 0.25 and fit.a > 0,
           f"a={fit.a:.3f} b={fit.b:.2f} rel={fit.relative_residual:.4f}")
    rows.extend(fit_rows)
    passed = all(ok for _, ok, _ in checks)
    return PresetResult("spanner", passed, checks, rows,
                        summarize("spanner", rows, bound=bound, stats=stats, fit=fit.__dict__))


def capped_tail_size(phi: float, kappa: int, offsets, rng: random.Random) -> int:
    xs = [sample_geomcap(phi, kappa - 1, rng) for _ in offsets]
    shifted = [x - q for x, q in zip(xs, offsets)]
    top = max(shifted)
    return sum(1 for x, s in zip(xs, shifted) if x < kappa - 1 and s in (top - 1, top))


def preset_geomcap(samples: int = 10_000, phis=(0.5, 0.8), kappa: int = 6, n: int = 64, seed: int = 5) -> PresetResult:
    checks, rows = [], []
    for phi in phis:
        rng = random.Random(f"geomcap:{seed}:{phi}")
        sizes = []
        for i in range(samples):
            offsets = [rng.randrange(kappa) for _ in range(n)]
            sizes.append(capped_tail_size(phi, kappa, offsets, rng))
        mean = fmean(sizes)
        se = pstdev(sizes) / math.sqrt(samples)
        limit = 2 / (1 - phi)
        rows.append({"schema": CSV_SCHEMA, "algo": "geomcap", "param": f"phi={phi};kappa={kappa}",
                     "n": n, "size": f"{mean:.6f}", "ok": int(mean <= limit + 3 * se)})
        _check(checks, f"phi={phi}: mean |I| <= 2/(1-phi) + 3 sigma", mean <= limit + 3 * se,
               f"mean={mean:.4f} bound={limit:.4f} sigma={se:.4f}")
    passed = all(ok for _, ok, _ in checks)
    return PresetResult("geomcap", passed, checks, rows, summarize("geomcap", rows))


def preset_verification(count: int = 200, sizes=(16, 32, 64), c: int = 3, seed: int = 0) -> PresetResult:
    checks, rows = [], []
    for task in TASKS:
        for i, (n, want, g) in enumerate(balanced_instances(task, sizes, count, seed)):
            r = verify(task, g, c, seed=i)
            rows.append(_row("verify", f"task={task}", i, g, rounds=r.rounds, timed_out=int(r.timed_out),
                             decision="" if r.decision is None else int(r.decision), expected=int(want),
                             ok=int(r.decision == want), flags="" if r.unanimous else "split"))
    fits = {}
    for task in TASKS:
        sub = [r for r in rows if r["param"] == f"task={task}"]
        agree = sum(r["ok"] for r in sub) / len(sub)
        unanimous = all(r["flags"] == "" for r in sub)
        _check(checks, f"{task}: oracle agreement >= 99%", agree >= 0.99, f"{agree:.3f}")
        _check(checks, f"{task}: unanimous in every run", unanimous,
               f"{sum(r['flags'] == '' for r in sub)}/{len(sub)}")
        if task in LOG_TASKS:
            fit = fit_rounds([r["n"] for r in sub], [r["rounds"] for r in sub], "log")
            fits[task] = fit.__dict__
            _check(checks, f"{task}: rounds fit a*log n+b (a > 0, relative residual <= 0.25)",
                   fit.a > 0 and fit.relative_residual <= 0.25,
                   f"a={fit.a:.3f} b={fit.b:.2f} rel={fit.relative_residual:.4f}")
    passed = all(ok for _, ok, _ in checks)
    return PresetResult("verification", passed, checks, rows, summarize("verification", rows, fits=fits))


def preset_cutsim(n: int = 32, cuts: int = 10, rounds: int = 50, seed: int = 7) -> PresetResult:
    from .cutsim import random_cut, verify_round_equivalence
    from .mst import MSTProgram, port_weights
    from .spanner import SpannerProgram

    checks, rows = [], []
    bad = over = 0
    for algo in ("mst", "spanner"):
        for i in range(cuts):
            g = generate("gnp-connected", n, seed=seed + i, weights="uniform", W=16)
            if algo == "mst":
                prog, inputs = MSTProgram(3), port_weights(g)
            else:
                prog, inputs = SpannerProgram(3, 0.5, 3), None
            side = random_cut(n, random.Random(f"cut:{seed}:{i}"))
            rep = verify_round_equivalence(g, prog, i, side, rounds, inputs=inputs)
            bad += len(rep.mismatches)
            over += sum(b > rep.bound for b in rep.bits)
            for t, b in enumerate(rep.bits):
                rows.append(_row("cutsim", f"algo={algo};cut={i}", t, g, rounds=t, size=b, weight=rep.bound,
                                 ok=int(b <= rep.bound), flags=f"q={rep.q}"))
    _check(checks, "zero feedback mismatches", bad == 0, f"{bad} mismatching pins")
    _check(checks, "bits per round <= 2|Q|(ceil(log2|Q|)+1)", over == 0, f"{over} rounds over the bound")
    passed = bad == 0 and over == 0
    return PresetResult("cutsim", passed, checks, rows, summarize("cutsim", rows, mismatches=bad))


def preset_smoke(seeds: int = 5) -> PresetResult:
    """A quick MST batch used to demonstrate byte-identical reruns."""
    cfg = ExperimentConfig("mst", {"kind": "gnp-connected", "n": 24, "weights": "uniform", "W": 16},
                           list(range(seeds)), {"c": 3}, "smoke")
    res = run_batch(cfg)
    ok = all(r["ok"] for r in res.rows)
    return PresetResult("smoke", ok, [("smoke MST batch optimal", ok, f"{len(res.rows)} runs")], res.rows, res.summary)


def preset_determinism(name: str = "smoke") -> PresetResult:
    first = rows_to_csv(PRESETS[name]().rows)
    second = rows_to_csv(PRESETS[name]().rows)
    same = first == second
    return PresetResult("determinism", same, [(f"preset {name!r} rerun gives byte-identical CSV", same,
                                                f"{len(first)} bytes")], [], {"schema": JSON_SCHEMA, "same": same})


PRESETS = {
    "circuits": preset_circuits,
    "counting": preset_counting,
    "mst": preset_mst,
    "spanner": preset_spanner,
    "geomcap": preset_geomcap,
    "verification": preset_verification,
    "cutsim": preset_cutsim,
    "smoke": preset_smoke,
    "determinism": preset_determinism,
}
ACCEPTANCE = ("circuits", "counting", "mst", "spanner", "geomcap", "verification", "cutsim", "determinism")


def run_preset(name: str, directory: Path | None = None) -> PresetResult:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    res = PRESETS[name]()
    if directory is not None:
        summary = dict(res.summary, passed=res.passed,
                       checks=[{"check": c, "ok": ok, "detail": d} for c, ok, d in res.checks])
        write_outputs(ExperimentResult(name, res.rows, summary), directory)
    return res
