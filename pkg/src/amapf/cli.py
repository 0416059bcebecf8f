"""Command-line entry point: solve, bench, oracle-check, validate, plotdata."""
from __future__ import annotations

import argparse
import csv
import json
import os
import random
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

from .cbs import ALL_VARIANTS, STAT_FIELDS, VARIANT_RE, Solution, Solver
from .grid import Instance, InstanceError, ParseError, parse_map, parse_scen, random_instance
from .oracle import OracleSizeError, brute_optimal, partition_optimal
from .validation import validate_solution

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_TIMEOUT, EXIT_CHECK_FAILED = 0, 1, 2, 3, 4
STATUS_EXIT = {"solved": EXIT_OK, "infeasible": EXIT_INFEASIBLE, "timeout": EXIT_TIMEOUT}


class CliError(Exception):
    """User-facing failure; reported on stderr with exit code 1."""


@dataclass(frozen=True)
class RunConfig:
    source: str  # "random", "file" or "movingai"
    variant: str = "h1m1p1"
    timeout: float | None = None
    seed: int = 0
    random: tuple | None = None  # (W, H, OD, N)
    instance: str | None = None
    map: str | None = None
    scen: str | None = None
    agents: int | None = None

    def __post_init__(self):
        if not VARIANT_RE.match(self.variant):
            raise CliError(f"variant must match h[01]m[01]p[01], got {self.variant!r}")
        if self.timeout is not None and not self.timeout > 0:
            raise CliError("timeout must be positive")


@dataclass
class BenchRow:
    instance: str
    seed: int
    variant: str
    repeat: int
    robots: int
    status: str
    cost: int | None
    wall_time: float
    timeout: float | None
    nodes_expanded: int = 0
    nodes_generated: int = 0
    roots_created: int = 0
    conflicts_found: int = 0
    conflict_records: int = 0
    assignments_computed: int = 0
    assignments_postponed: int = 0
    assignments_revoked: int = 0
    actual_entries: int = 0
    astar_calls: int = 0
    cache_hits: int = 0
    error: str = ""


BENCH_FIELDS = tuple(BenchRow.__dataclass_fields__)


# -- instance loading -------------------------------------------------------


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from exc


def load_instance(cfg: RunConfig) -> Instance:
    try:
        if cfg.source == "random":
            w, h, od, n = cfg.random
            return random_instance(cfg.seed, w, h, od, n)
        if cfg.source == "file":
            return Instance.from_json(_read(cfg.instance))
        if cfg.agents is None:
            raise CliError("--agents is required with --scen")
        ws = parse_map(_read(cfg.map))
        return parse_scen(_read(cfg.scen), cfg.agents, ws)
    except (ParseError, InstanceError) as exc:
        raise CliError(str(exc)) from exc
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CliError(f"malformed instance: {exc}") from exc


def instance_id(cfg: RunConfig) -> str:
    if cfg.source == "random":
        w, h, od, n = cfg.random
        return f"random-{w}x{h}-od{od:g}-n{n}-s{cfg.seed}"
    if cfg.source == "file":
        return Path(cfg.instance).stem
    return f"{Path(cfg.map).stem}:{Path(cfg.scen).stem}:{cfg.agents}"


def _source_from_args(args) -> dict:
    chosen = [name for name in ("random", "instance", "map") if getattr(args, name, None)]
    if len(chosen) != 1:
        raise CliError("give exactly one of --random, --instance or --map/--scen")
    if args.random:
        w, h, od, n = args.random
        return {"source": "random", "random": (int(w), int(h), float(od), int(n))}
    if args.instance:
        return {"source": "file", "instance": args.instance}
    if not args.scen:
        raise CliError("--map needs --scen")
    return {"source": "movingai", "map": args.map, "scen": args.scen, "agents": args.agents}


def _write_output(text: str, out) -> None:
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise CliError(f"cannot write {out}: {exc.strerror or exc}") from exc
    else:
        sys.stdout.write(text)


# -- solve ------------------------------------------------------------------


def cmd_solve(args) -> int:
    cfg = RunConfig(
        variant=args.variant, timeout=args.timeout, seed=args.seed, **_source_from_args(args)
    )
    inst = load_instance(cfg)
    solver = Solver(inst, cfg.variant, cfg.timeout)
    sol = solver.solve()
    if args.dump_matrix and solver.C is not None:
        print(solver.C.dump(), file=sys.stderr)
    _write_output(json.dumps(sol.to_dict(), indent=2) + "\n", args.out)
    return STATUS_EXIT[sol.status]


# -- bench ------------------------------------------------------------------


def default_timeout(robots: int) -> float:
    return 900.0 if robots <= 50 else 1800.0


def load_presets() -> dict:
    return json.loads(resources.files("amapf").joinpath("presets.json").read_text())


def run_one(cfg: RunConfig, repeat: int = 0) -> BenchRow:
    """Solve one configuration; failures become a status, never an exception."""
    ident = instance_id(cfg)
    try:
        inst = load_instance(cfg)
    except CliError as exc:
        return BenchRow(ident, cfg.seed, cfg.variant, repeat, 0, "error", None, 0.0,
                        cfg.timeout, error=str(exc))
    timeout = cfg.timeout if cfg.timeout is not None else default_timeout(inst.num_robots)
    try:
        sol = Solver(inst, cfg.variant, timeout).solve()
    except Exception as exc:  # recorded, the matrix goes on
        return BenchRow(ident, cfg.seed, cfg.variant, repeat, inst.num_robots, "error",
                        None, 0.0, timeout, error=f"{type(exc).__name__}: {exc}")
    counters = {k: sol.stats[k] for k in STAT_FIELDS if k != "wall_time"}
    return BenchRow(ident, cfg.seed, cfg.variant, repeat, inst.num_robots, sol.status,
                    sol.cost, sol.stats["wall_time"], timeout, **counters)


def _run_task(task) -> BenchRow:
    return run_one(*task)


def bench_tasks(sources: list[dict], seeds: list[int], variants, repeat: int, timeout):
    tasks = []
    for src in sources:
        for seed in seeds if src["source"] == "random" else seeds[:1]:
            for v in variants:
                for k in range(repeat):
                    tasks.append((RunConfig(variant=v, timeout=timeout, seed=seed, **src), k))
    return tasks


def _threads() -> int:
    raw = os.environ.get("AMAPF_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise CliError(f"AMAPF_THREADS must be an integer, got {raw!r}") from None


def _row_dict(row: BenchRow) -> dict:
    d = asdict(row)
    d["wall_time"] = round(d["wall_time"], 6)
    return d


def cmd_bench(args) -> int:
    variants = _variant_list(args.variant)
    timeout = args.timeout
    count = args.instances
    if args.preset:
        presets = load_presets()
        if args.preset not in presets:
            raise CliError(f"unknown preset {args.preset!r}; have {', '.join(presets)}")
        p = presets[args.preset]
        sources = [{"source": "random", "random": tuple(p["random"])}]
        variants = variants if args.variant else p["variants"]
        timeout = timeout if timeout is not None else p.get("timeout")
        count = count if count is not None else p["instances"]
    else:
        sources = [_source_from_args(args)]
        variants = variants or ["h0m0p0", "h1m1p1"]
    count = 25 if count is None else count
    seeds = [args.seed + i for i in range(count)]
    tasks = bench_tasks(sources, seeds, variants, args.repeat, timeout)

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = None
        if args.format == "csv":
            writer = csv.DictWriter(out, fieldnames=BENCH_FIELDS)
            writer.writeheader()
            out.flush()

        def emit(row):
            if writer is not None:
                writer.writerow(_row_dict(row))
            else:
                out.write(json.dumps(_row_dict(row)) + "\n")
            out.flush()

        workers = _threads()
        if workers == 1:
            for task in tasks:
                emit(_run_task(task))
        else:
            with ProcessPoolExecutor(workers) as pool:
                for row in pool.map(_run_task, tasks):
                    emit(row)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _variant_list(values) -> list[str]:
    out = []
    for v in values or ():
        for part in v.split(","):
            part = part.strip()
            if part == "all":
                out.extend(ALL_VARIANTS)
            elif part:
                if not VARIANT_RE.match(part):
                    raise CliError(f"variant must match h[01]m[01]p[01], got {part!r}")
                out.append(part)
    return out


# -- oracle-check -----------------------------------------------------------


def oracle_instance(seed: int, sizes, densities, robots) -> Instance:
    """Seeded small instance; shape drawn from the given ranges."""
    rng = random.Random(seed)
    side = rng.choice(list(sizes))
    od = rng.choice(list(densities))
    n = rng.choice(list(robots))
    return random_instance(seed, side, side, od, n)


def check_instance(inst: Instance, variants, solve_fn=None, timeout=None) -> dict:
    """Compare each variant with the brute-force optimum.

    Also checks every postponed partition's lower bound against the
    partition's true collision-free optimum.
    """
    if solve_fn is None:
        def solve_fn(instance, variant, timeout):
            return Solver(instance, variant, timeout).solve()
    truth = brute_optimal(inst)
    expected = truth.cost if truth is not None else None
    results, failures, bound_checks = {}, [], 0
    for v in variants:
        sol: Solution = solve_fn(inst, v, timeout)
        results[v] = sol.cost
        if sol.status == "timeout":
            failures.append(f"{v}: timeout")
            continue
        if sol.cost != expected:
            failures.append(f"{v}: cost {sol.cost}, oracle {expected}")
        if sol.solved:
            for err in validate_solution(inst, sol.M, sol.paths, sol.cost):
                failures.append(f"{v}: {err}")
        for lb, omit, include, _revoked in sol.postponed:
            bound_checks += 1
            best = partition_optimal(inst, omit, include)
            if best is not None and best < lb:
                failures.append(f"{v}: postponed partition optimum {best} below bound {lb}")
    return {
        "oracle_cost": expected,
        "results": results,
        "bound_checks": bound_checks,
        "failures": failures,
        "pass": not failures,
    }


def cmd_oracle_check(args, solve_fn=None) -> int:
    variants = _variant_list(args.variant) or list(ALL_VARIANTS)
    if args.instance:
        cases = [(Path(p).stem, None, load_instance(RunConfig("file", instance=p)))
                 for p in args.instance]
    else:
        cases = []
        for i in range(args.instances):
            seed = args.seed + i
            try:
                inst = oracle_instance(seed, range(args.min_size, args.max_size + 1),
                                       args.density, args.robots)
            except InstanceError as exc:
                raise CliError(f"seed {seed}: {exc}") from exc
            cases.append((f"oracle-{seed}", seed, inst))
    passed = 0
    lines = []
    for name, seed, inst in cases:
        try:
            report = check_instance(inst, variants, solve_fn, args.timeout)
        except OracleSizeError as exc:
            raise CliError(str(exc)) from exc
        report = {"instance": name, "seed": seed, **report}
        passed += report["pass"]
        lines.append(json.dumps(report))
    _write_output("".join(line + "\n" for line in lines), args.out)
    print(f"oracle-check: {passed}/{len(cases)} instances pass", file=sys.stderr)
    return EXIT_OK if passed == len(cases) else EXIT_CHECK_FAILED


# -- validate ---------------------------------------------------------------


def cmd_validate(args) -> int:
    inst = load_instance(RunConfig("file", instance=args.instance_file))
    try:
        data = json.loads(_read(args.solution_file))
        M = [0] * len(data["assignment"])
        for item in data["assignment"]:
            M[item["robot"]] = item["goal"]
        paths = data["paths"]
        cost = data.get("cost")
    except (json.JSONDecodeError, KeyError, TypeError, IndexError) as exc:
        raise CliError(f"malformed solution: {exc}") from exc
    errors = validate_solution(inst, M, paths, cost)
    report = {"valid": not errors, "errors": errors}
    _write_output(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK if not errors else EXIT_CHECK_FAILED


# -- plotdata ---------------------------------------------------------------


def _clamped_time(row: dict) -> tuple[float, bool]:
    timed_out = row["status"] == "timeout"
    t = float(row["wall_time"])
    if timed_out and row.get("timeout"):
        t = float(row["timeout"])
    return t, timed_out


def cmd_plotdata(args) -> int:
    text = _read(args.csv)
    rows = list(csv.DictReader(text.splitlines())) if text.strip() else []
    if rows:
        missing = {"instance", "seed", "variant", "repeat", "status", "wall_time",
                   "timeout"} - set(rows[0])
        if missing:
            raise CliError(f"not a bench CSV, missing columns: {', '.join(sorted(missing))}")
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    baseline = args.baseline

    key = lambda r: (r["instance"], r["seed"], r["repeat"])  # noqa: E731
    by_variant: dict[str, dict] = {}
    for r in rows:
        by_variant.setdefault(r["variant"], {})[key(r)] = r
    base = by_variant.get(baseline, {})

    written = []
    for v, runs in sorted(by_variant.items()):
        dist = out_dir / f"distribution_{v}.csv"
        with open(dist, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance", "seed", "repeat", "wall_time", "timed_out"])
            for k, r in runs.items():
                t, to = _clamped_time(r)
                w.writerow([*k, f"{t:.6f}", int(to)])
        written.append(dist)
        if v == baseline:
            continue
        scatter = out_dir / f"scatter_{v}_vs_{baseline}.csv"
        with open(scatter, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance", "seed", "repeat", "baseline_time", "variant_time",
                        "baseline_timed_out", "variant_timed_out"])
            for k, r in runs.items():
                if k not in base:
                    continue
                bt, bto = _clamped_time(base[k])
                vt, vto = _clamped_time(r)
                w.writerow([*k, f"{bt:.6f}", f"{vt:.6f}", int(bto), int(vto)])
        written.append(scatter)
    for path in written:
        print(path, file=sys.stderr)
    if args.summary and rows:
        for v, runs in sorted(by_variant.items()):
            times = [_clamped_time(r)[0] for r in runs.values()]
            print(f"{v}: median {statistics.median(times):.4f}s over {len(times)} runs",
                  file=sys.stderr)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--random", nargs=4, metavar=("W", "H", "OD", "N"),
                   help="random W x H workspace with obstacle density OD and N robots")
    p.add_argument("--instance", help="instance JSON file")
    p.add_argument("--map", help="MovingAI .map file")
    p.add_argument("--scen", help="MovingAI .scen file")
    p.add_argument("--agents", type=int, help="robots to take from --scen")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amapf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance")
    _add_source(p)
    p.add_argument("--variant", default="h1m1p1")
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--out")
    p.add_argument("--format", choices=["json"], default="json")
    p.add_argument("--dump-matrix", action="store_true",
                   help="print the final cost matrix (h/a/x per entry) to stderr")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run instances x variants and emit rows")
    _add_source(p)
    p.add_argument("--preset", help="named configuration from presets.json")
    p.add_argument("--instances", type=int, default=None,
                   help="random instances, seeds --seed .. --seed+K-1 (default 25)")
    p.add_argument("--variant", action="append",
                   help="comma list or 'all'; repeatable (default h0m0p0,h1m1p1)")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--timeout", type=float, default=None,
                   help="per run; default 900 s up to 50 robots, else 1800 s")
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle-check", help="cross-check variants against brute force")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--instance", action="append", help="instance JSON file(s) instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-size", type=int, default=6)
    p.add_argument("--max-size", type=int, default=8)
    p.add_argument("--density", type=float, nargs="+", default=[0.1, 0.15, 0.2, 0.25])
    p.add_argument("--robots", type=int, nargs="+", default=[3, 4])
    p.add_argument("--variant", action="append")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("validate", help="re-check a solution against its instance")
    p.add_argument("instance_file")
    p.add_argument("solution_file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plotdata", help="scatter and distribution CSVs from bench output")
    p.add_argument("csv")
    p.add_argument("--baseline", default="h0m0p0")
    p.add_argument("--out", help="output directory (default: current)")
    p.add_argument("--summary", action="store_true")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "random", None):
            try:
                w, h, od, n = args.random
                args.random = (int(w), int(h), float(od), int(n))
            except ValueError:
                raise CliError("--random expects integers W H N and a float OD") from None
        return args.func(args)
    except CliError as exc:
        print(f"amapf: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
