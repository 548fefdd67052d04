"""Command-line front end: ``qubo-forge {build,solve,census,oracle,decode,experiment}``.

Exit codes: 0 ran to completion (an invalid tour is a result, not a failure),
1 usage error, 2 parse or I/O error, 3 refused because of a size limit.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import qubo as qb
from .errors import ContractError, DegenerateNormalizationError, LimitExceededError, ParseError, QuboForgeError
from .graph import Graph, edge_census, load_graph
from .solve import (
    EXACT_LIMIT,
    AnnealSchedule,
    SolveReport,
    _thread_count,
    exact_ground_state,
    oracle_hcp,
    oracle_tsp,
    score,
    simulated_anneal,
)
from .tour import check, decode, encode

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_REFUSED = 0, 1, 2, 3

EXPERIMENT_SCHEMA = "experiment-v1"
EXPERIMENT_COLUMNS = (
    "instance", "n", "m", "k", "problem", "normalize", "seed",
    "best_energy", "cost", "valid", "success_rate", "wall_time_ms", "error",
)  # fmt: skip
SWEEP_COLUMNS = ("n", "m", "k", "census_total", "expected_total")


class UsageError(QuboForgeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    input: str
    problem: str = "tsp"
    c1: float = 1.0
    c2: float = 1.0
    normalize: bool = True
    method: str = "sa"
    schedule: AnnealSchedule = AnnealSchedule()
    output: Optional[str] = None
    format: str = "json"

    def __post_init__(self):
        if self.problem not in ("hcp", "tsp"):
            raise UsageError(f"unknown problem {self.problem!r}")
        if self.method not in ("sa", "exact", "oracle"):
            raise UsageError(f"unknown method {self.method!r}")
        if self.problem == "hcp" and self.normalize:
            raise UsageError("--normalize applies only to --problem tsp")

    @property
    def penalties(self):
        return qb.PenaltyConfig(self.c1, self.c2 if self.problem == "tsp" else 0)


# ----------------------------------------------------------------------------
# shared plumbing


def build_model(g: Graph, cfg: RunConfig, warn: bool = True) -> qb.QuboMatrix:
    if cfg.problem == "hcp":
        return qb.build_M_HCP(g, cfg.penalties)
    m = qb.build_M_TSP(g, cfg.penalties, normalize=cfg.normalize)
    if warn:
        _warn_if_cost_dominates(g, cfg)
    return m


def _warn_if_cost_dominates(g, cfg):
    top = 1.0 if cfg.normalize else float(g.weights.max(initial=0))
    if cfg.c2 * top > cfg.c1:
        warnings.warn(
            f"c2 * max weight = {cfg.c2 * top:g} exceeds c1 = {cfg.c1:g}; "
            "the annealer may trade constraint violations for cheaper tours",
            stacklevel=3,
        )


def _census_rows(g: Graph, cfg: RunConfig):
    """``(name, built, expected)`` for every Hamiltonian of the chosen problem."""
    n = g.n
    vp = qb.build_M_vp(n)
    built = {
        "Hvp": qb.census(vp),
        "Hpv": qb.census(qb.build_M_pv(n)),
        "HEc": _difference(qb.census(vp + qb.build_M_Ec(g)), qb.census(vp)),
        "HCP": qb.census(qb.build_M_HCP(g, qb.PenaltyConfig(cfg.c1))),
    }
    if cfg.problem == "tsp":
        built["HW"] = qb.census(qb.build_M_W(g))
        built["TSP"] = qb.census(qb.build_M_TSP(g, cfg.penalties))
    names = [h for h in qb.HAMILTONIANS if h in built]
    return [(h, built[h], qb.census_expected_for(g, h)) for h in names]


def _difference(a, b):
    return qb.ConstraintCensus(a.linear - b.linear, a.quadratic - b.quadratic)


def _format_census(rows, g):
    ec = edge_census(g)
    out = [f"instance {g.name or '-'}: n={ec.n} m={ec.m} k={ec.k}"]
    out.append(f"{'model':<6} {'linear':>8} {'quadratic':>10} {'total':>8}   {'expected':>8}  match")
    for name, got, want in rows:
        ok = "yes" if got == want else "NO"
        out.append(f"{name:<6} {got.linear:>8} {got.quadratic:>10} {got.total:>8}   {want.total:>8}  {ok}")
    return "\n".join(out)


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _info(text, path):
    # Side information goes to stderr whenever stdout carries the payload.
    stream = sys.stderr if path in (None, "-") else sys.stdout
    print(text, file=stream)


def _dump_json(doc):
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _schedule_from(args):
    return AnnealSchedule(
        t_start=args.t_start, t_end=args.t_end, sweeps=args.sweeps, restarts=args.restarts, seed=args.seed
    )


def _config_from(args, **overrides):
    g_problem = args.problem
    if g_problem == "hcp" and (args.c2 is not None or args.normalize):
        raise UsageError("--c2 and --normalize apply only to --problem tsp")
    normalize = args.normalize if args.normalize is not None else g_problem == "tsp"
    fields = dict(
        input=getattr(args, "input", ""),
        problem=g_problem,
        c1=args.c1,
        c2=args.c2 if args.c2 is not None else 1.0,
        normalize=normalize,
        method=getattr(args, "method", "sa"),
        schedule=_schedule_from(args) if hasattr(args, "sweeps") else AnnealSchedule(),
        output=args.output,
        format=getattr(args, "format", "json"),
    )
    fields.update(overrides)
    return RunConfig(**fields)


# ----------------------------------------------------------------------------
# solving


def run_solve(g: Graph, cfg: RunConfig, threads=None, warn: bool = True) -> SolveReport:
    """Solve one instance with the configured method and score the result against ``g``."""
    if cfg.method == "oracle":
        return _oracle_report(g, cfg)
    m = build_model(g, cfg, warn)
    if cfg.method == "exact":
        gs = exact_ground_state(m, EXACT_LIMIT)
        report = SolveReport(
            best_bits=gs.witness,
            best_energy=gs.energy,
            best_hamiltonian=qb.energy(m, gs.witness, include_offset=True),
            variables=m.dim,
            wall_time=0.0,
            schedule={"method": "exact", "optima": gs.count, "seed": None},
            rng="none",
        )
        return score(report, g)
    return simulated_anneal(m, cfg.schedule, g, threads=threads)


def _oracle_report(g, cfg):
    if cfg.problem == "hcp":
        exists, tour = oracle_hcp(g)
    else:
        opt = oracle_tsp(g)
        exists, tour = opt.feasible, opt.tour
    m = build_model(g, cfg, warn=False) if g.n <= 64 else None
    bits = encode(tour, g.n) if exists else np.zeros(g.n * g.n, dtype=np.int8)
    report = SolveReport(
        best_bits=bits,
        best_energy=qb.energy(m, bits) if m is not None else None,
        best_hamiltonian=qb.energy(m, bits, include_offset=True) if m is not None else None,
        variables=g.n * g.n,
        wall_time=0.0,
        schedule={"method": "oracle", "seed": None},
        rng="none",
    )
    return score(report, g)


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    report = fn(*args, **kwargs)
    if report.schedule.get("method") in ("exact", "oracle"):
        report.wall_time = time.perf_counter() - t0
    return report


def experiment_row(g: Graph, cfg: RunConfig, report: Optional[SolveReport] = None, error: str = ""):
    ec = edge_census(g)
    row = {
        "instance": g.name,
        "n": ec.n,
        "m": ec.m,
        "k": ec.k,
        "problem": cfg.problem,
        "normalize": int(cfg.normalize),
        "seed": cfg.schedule.seed,
        "best_energy": "",
        "cost": "",
        "valid": "",
        "success_rate": "",
        "wall_time_ms": "",
        "error": error,
    }
    if report is not None:
        row.update(
            best_energy=qb.format_number(report.best_energy),
            cost=qb.format_number(report.cost) if report.cost is not None else "",
            valid=int(bool(report.valid)),
            success_rate=qb.format_number(report.success_rate),
            wall_time_ms=f"{report.wall_time * 1000.0:.3f}",
        )
    return row


def _csv_text(rows, columns):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def run_experiment(cells, threads=None):
    """Solve every ``(graph, RunConfig)`` cell; rows come back in cell order.

    A failing cell is recorded with its error message and the rest still run.
    """

    def one(cell):
        g, cfg = cell
        try:
            report = _timed(run_solve, g, cfg, threads=1, warn=False)
        except QuboForgeError as exc:
            return experiment_row(g, cfg, error=f"{type(exc).__name__}: {exc}")
        return experiment_row(g, cfg, report)

    workers = threads if threads is not None else _thread_count(len(cells))
    if workers <= 1:
        return [one(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, cells))


def aggregate(rows):
    """Fraction of valid cells per ``(instance, problem, normalize)`` group."""
    groups = {}
    for r in rows:
        key = (r["instance"], r["problem"], r["normalize"])
        groups.setdefault(key, []).append(r["valid"] == 1)
    return {key: sum(v) / len(v) for key, v in groups.items()}


def connectivity_sweep(n, seed=0, c1=1.0):
    """Remove undirected edges of ``K_n`` one at a time in random order, recording the HCP census."""
    rng = random.Random(seed)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    rng.shuffle(pairs)
    g = Graph.complete(n, name=f"K{n}")
    rows = []
    for step in range(len(pairs) + 1):
        ec = edge_census(g)
        got = qb.census(qb.build_M_HCP(g, qb.PenaltyConfig(c1)))
        want = qb.census_expected(ec.n, ec.m, ec.k, "HCP", complete=ec.k == 0)
        rows.append({"n": n, "m": ec.m, "k": ec.k, "census_total": got.total, "expected_total": want.total})
        if step < len(pairs):
            g = g.without_edge(*pairs[step])
    return rows


def _parse_seeds(text):
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds or min(seeds) < 0:
        raise UsageError(f"bad seed list {text!r}")
    return seeds


# ----------------------------------------------------------------------------
# subcommands


def cmd_build(args):
    cfg = _config_from(args)
    g = load_graph(args.input)
    m = build_model(g, cfg)
    if cfg.format == "qubo":
        text = qb.to_qbsolv(m, comment=f"{cfg.problem} {g.name}")
    elif cfg.format == "csv":
        text = qb.to_csv(m)
    else:
        text = qb.to_json(m) + "\n"
    _emit(text, cfg.output)
    _info(_format_census(_census_rows(g, cfg), g), cfg.output)
    return EXIT_OK


def cmd_solve(args):
    cfg = _config_from(args)
    if cfg.format == "qubo":
        raise UsageError("solve writes json or csv reports")
    g = load_graph(args.input)
    report = _timed(run_solve, g, cfg, threads=args.threads)
    if cfg.format == "csv":
        text = _csv_text([experiment_row(g, cfg, report)], EXPERIMENT_COLUMNS)
    else:
        doc = report.to_dict(instance=g.name, problem=cfg.problem)
        doc["normalize"] = cfg.normalize
        doc["c1"], doc["c2"] = cfg.c1, (cfg.c2 if cfg.problem == "tsp" else None)
        doc["method"] = cfg.method
        text = _dump_json(doc)
    _emit(text, cfg.output)
    return EXIT_OK


def cmd_census(args):
    cfg = _config_from(args, normalize=False)
    g = load_graph(args.input)
    rows = _census_rows(g, cfg)
    if args.format == "json":
        ec = edge_census(g)
        doc = {
            "instance": g.name,
            "n": ec.n,
            "m": ec.m,
            "k": ec.k,
            "census": {name: {"built": got.as_dict(), "expected": want.as_dict()} for name, got, want in rows},
        }
        _emit(_dump_json(doc), args.output)
    else:
        _emit(_format_census(rows, g) + "\n", args.output)
    return EXIT_OK


def cmd_oracle(args):
    g = load_graph(args.input)
    if args.problem == "hcp":
        exists, tour = oracle_hcp(g)
        doc = {"instance": g.name, "problem": "hcp", "exists": exists, "tour": list(tour.order) if exists else None}
    else:
        opt = oracle_tsp(g, method=args.method)
        doc = {
            "instance": g.name,
            "problem": "tsp",
            "method": args.method,
            "feasible": opt.feasible,
            "cost": opt.cost if opt.feasible else None,
            "tour": list(opt.tour.order) if opt.feasible else None,
        }
    _emit(_dump_json(doc), args.output)
    return EXIT_OK


def _read_bits(text, dim):
    line = "".join(text.split())
    if len(line) != dim or set(line) - {"0", "1"}:
        raise ParseError(f"expected {dim} characters of 0/1, got {len(line)}")
    return np.frombuffer(line.encode(), dtype=np.uint8) - ord("0")


def cmd_decode(args):
    g = load_graph(args.input)
    if args.bits is not None:
        raw = args.bits
    elif args.bits_file == "-":
        raw = sys.stdin.read()
    else:
        with open(args.bits_file, encoding="utf-8") as fh:
            raw = fh.read()
    x = _read_bits(raw, g.n * g.n).astype(np.int8)
    out = decode(x, g)
    report = check(x, g)
    doc = {
        "instance": g.name,
        "valid": report.valid,
        "tour": list(out.order) if report.valid else None,
        "cost": out.cost if report.valid else None,
        "violations": report.as_dict(),
    }
    _emit(_dump_json(doc), args.output)
    return EXIT_OK


def cmd_experiment(args):
    if args.connectivity is not None:
        if args.inputs:
            raise UsageError("--connectivity generates its own graphs; drop the instance arguments")
        rows = connectivity_sweep(args.connectivity, seed=args.seed, c1=args.c1)
        _emit(_csv_text(rows, SWEEP_COLUMNS), args.output)
        return EXIT_OK
    if not args.inputs:
        raise UsageError("experiment needs at least one instance (or --connectivity N)")
    if args.problem == "hcp" and args.normalize != "off":
        raise UsageError("--normalize applies only to --problem tsp; pass --normalize off")
    modes = {"on": [True], "off": [False], "both": [True, False]}[args.normalize]
    seeds = _parse_seeds(args.seeds)
    graphs = [load_graph(p) for p in args.inputs]
    cells = []
    for g in graphs:
        for norm in modes:
            for seed in seeds:
                sched = AnnealSchedule(
                    t_start=args.t_start, t_end=args.t_end, sweeps=args.sweeps, restarts=args.restarts, seed=seed
                )
                cfg = RunConfig(
                    input=g.name,
                    problem=args.problem,
                    c1=args.c1,
                    c2=args.c2 if args.c2 is not None else 1.0,
                    normalize=norm,
                    method=args.method,
                    schedule=sched,
                )
                cells.append((g, cfg))
            if cfg.problem == "tsp":
                _warn_if_cost_dominates(g, cfg)
    rows = run_experiment(cells, threads=args.threads)
    _emit(_csv_text(rows, EXPERIMENT_COLUMNS), args.output)
    lines = [f"schema {EXPERIMENT_SCHEMA}"]
    for (inst, problem, norm), rate in aggregate(rows).items():
        lines.append(f"{inst} {problem} normalize={norm}: valid in {rate:.0%} of {len(seeds)} seeds")
    _info("\n".join(lines), args.output)
    return EXIT_OK


# ----------------------------------------------------------------------------
# argument parsing


def _add_model_flags(p, formats=None):
    p.add_argument("--problem", choices=("hcp", "tsp"), default="tsp")
    p.add_argument("--c1", type=float, default=1.0, help="constraint penalty multiplier (default 1)")
    p.add_argument("--c2", type=float, default=None, help="tour-cost multiplier, tsp only (default 1)")
    p.add_argument(
        "--normalize",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="min-max normalise weights (tsp default: on)",
    )
    p.add_argument("-o", "--output", default=None, help="output path (default stdout)")
    if formats:
        p.add_argument("--format", choices=formats, default=formats[0])


def _add_schedule_flags(p):
    p.add_argument("--t-start", type=float, default=None, help="initial temperature (default 10 x max |coeff|)")
    p.add_argument("--t-end", type=float, default=0.01)
    p.add_argument("--sweeps", type=int, default=2000)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default QUBO_FORGE_THREADS or cpu count)")


def make_parser():
    parser = _Parser(prog="qubo-forge", description="Build, solve and score QUBO models of HCP and TSP instances.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build", help="write the QUBO matrix of an instance")
    p.add_argument("input")
    _add_model_flags(p, formats=("json", "qubo", "csv"))
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("solve", help="solve an instance and write a JSON report")
    p.add_argument("input")
    _add_model_flags(p, formats=("json", "csv"))
    p.add_argument("--method", choices=("sa", "exact", "oracle"), default="sa")
    _add_schedule_flags(p)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("census", help="count QUBO terms and compare with the closed forms")
    p.add_argument("input")
    _add_model_flags(p, formats=("text", "json"))
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("oracle", help="exact tour or Hamiltonian-cycle search")
    p.add_argument("input")
    p.add_argument("--problem", choices=("hcp", "tsp"), default="tsp")
    p.add_argument("--method", choices=("held_karp", "permutation"), default="held_karp")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("decode", help="decode a 0/1 solution line into a tour")
    p.add_argument("input", help="graph file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("bits_file", nargs="?", help="file holding one line of n*n characters ('-' for stdin)")
    src.add_argument("--bits", help="the bit string itself")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("experiment", help="batch runs over instances x normalisation x seeds, as CSV")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--problem", choices=("hcp", "tsp"), default="tsp")
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=None)
    p.add_argument("--normalize", choices=("on", "off", "both"), default="both")
    p.add_argument("--method", choices=("sa", "exact", "oracle"), default="sa")
    p.add_argument("--seeds", default="1-10", help="comma list or ranges, e.g. 1-10 or 1,3,5")
    _add_schedule_flags(p)
    p.add_argument("--connectivity", type=int, metavar="N", default=None, help="census sweep over subgraphs of K_N")
    p.add_argument("--seed", type=int, default=0, help="edge-removal order for --connectivity")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UserWarning)
        code = _dispatch(args)
    for w in caught:
        print(f"qubo-forge: warning: {w.message}", file=sys.stderr)
    return code


def _dispatch(args):
    try:
        return args.func(args)
    except (UsageError, ContractError, DegenerateNormalizationError) as exc:
        print(f"qubo-forge: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LimitExceededError as exc:
        print(f"qubo-forge: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ParseError, OSError, UnicodeDecodeError) as exc:
        where = getattr(args, "input", None) or ""
        prefix = f"{where}: " if where and not isinstance(exc, OSError) else ""
        print(f"qubo-forge: {prefix}{exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
