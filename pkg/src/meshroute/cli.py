"""``meshroute`` command line.

Exit codes: 0 success, 1 usage or parse error, 2 destination unreachable,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

from . import __version__
from .bbbc import BbbcConfig, NoPathError, optimize_path
from .fuzzy import FuzzyError, RuleBase, default_system, link_cost
from .oracle import dijkstra
from .sim import (
    ConfigError,
    derive_seed,
    compare_with_oracle,
    comparison_to_csv,
    cost_all_links,
    load_scenario_config,
    records_to_csv,
    run_scenario,
)
from .topology import LinkMetrics, TopologyError, dumps, generate_random_topology, read_topology

EXIT_OK, EXIT_USAGE, EXIT_UNREACHABLE, EXIT_IO = 0, 1, 2, 3
SEED_ENV = "MESHROUTE_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _env_seed() -> int | None:
    env = os.environ.get(SEED_ENV)
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _seed(args) -> int:
    """Flag, then environment, then 0."""
    if args.seed is not None:
        return args.seed
    env = _env_seed()
    return 0 if env is None else env


def _system(args):
    if getattr(args, "rules", None):
        with open(args.rules, encoding="utf-8") as fh:
            return default_system(RuleBase.loads(fh.read()))
    return default_system()


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _bbbc(args, seed: int) -> BbbcConfig:
    try:
        return BbbcConfig(
            population_size=args.population,
            max_generations=args.generations,
            time_budget=args.time_budget,
            stagnation_limit=getattr(args, "stagnation", None),
            seed=seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_gen(args) -> int:
    topo = generate_random_topology(args.n, (args.width, args.height), args.range, _seed(args))
    _emit(dumps(topo), args.out)
    stream = sys.stderr if args.out in (None, "-") else sys.stdout
    print(f"nodes={len(topo)} edges={len(topo.edges)}", file=stream)
    return EXIT_OK


def cmd_cost(args) -> int:
    system = _system(args)
    with open(args.input, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["throughput", "delay_ms", "jitter_ms", "energy", "cost"])
    for i, row in enumerate(rows, start=2):
        try:
            m = LinkMetrics(float(row["throughput"]), float(row["delay_ms"]), float(row["jitter_ms"]))
            energy = float(row["energy"])
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"{args.input} line {i}: {exc}") from None
        c = link_cost(system, m, energy)
        w.writerow([row["throughput"], row["delay_ms"], row["jitter_ms"], row["energy"], repr(c)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _endpoints(args, topo):
    s = args.source
    t = args.terminal if args.terminal is not None else max(topo.nodes)
    return s, t


def cmd_route(args) -> int:
    topo = read_topology(args.topology)
    s, t = _endpoints(args, topo)
    costed = cost_all_links(topo, _system(args))
    path, trace = optimize_path(costed, s, t, None, _bbbc(args, _seed(args)))
    elapsed = trace.wall_time if args.timing else 0.0
    print(f"cost={path.cost:.4f} time={elapsed:.6f} path={path.label()}")
    print(f"generations={trace.generations} reason={trace.reason}")
    if args.trace_out:
        _emit(trace.to_csv(timing=args.timing), args.trace_out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    topo = read_topology(args.topology)
    s, t = _endpoints(args, topo)
    costed = cost_all_links(topo, _system(args))
    path = dijkstra(costed, s, t)
    print(f"cost={path.cost:.4f} path={path.label()} hops={path.hops}")
    return EXIT_OK


def cmd_bench(args) -> int:
    system = _system(args)
    base = _seed(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["nodes", "generations", "path_cost", "time_sec", "path", "gap"])
    for n in args.sizes:
        for rep in range(args.seeds):
            topo = generate_random_topology(n, (args.width, args.height), args.range, derive_seed(base, n, rep))
            costed = cost_all_links(topo, system)
            for gens in args.generations:
                cfg = BbbcConfig(args.population, gens, args.time_budget, seed=derive_seed(base, n, rep, gens))
                try:
                    path, trace = optimize_path(costed, 1, n, None, cfg)
                except NoPathError:
                    w.writerow([n, gens, "", "0", "unreachable", ""])
                    continue
                gap = path.cost - dijkstra(costed, 1, n).cost
                sec = f"{trace.wall_time:.6f}" if args.timing else "0"
                w.writerow([n, gens, repr(path.cost), sec, path.label(), repr(gap)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_sim(args) -> int:
    seed = args.seed if args.seed is not None else _env_seed()
    config = load_scenario_config(args.config, seed=seed)
    system = _system(args)
    if args.compare:
        text = comparison_to_csv(compare_with_oracle(config, system), timing=args.timing)
    else:
        records, _ = run_scenario(config, system)
        text = records_to_csv(records, timing=args.timing)
    _emit(text, args.out)
    return EXIT_OK


def cmd_rules(args) -> int:
    if args.action == "dump":
        _emit(RuleBase.generated().dumps(), args.out)
        return EXIT_OK
    if not args.file:
        raise UsageError("rules load needs a FILE")
    with open(args.file, encoding="utf-8") as fh:
        rb = RuleBase.loads(fh.read())
    print(f"rules={len(rb.rules)} complete=yes monotone=yes")
    if args.out:
        _emit(rb.dumps(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="meshroute", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"meshroute {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def seeded(sp):
        sp.add_argument("--seed", type=int, default=None, help=f"RNG seed (default ${SEED_ENV} or 0)")

    def timing(sp):
        sp.add_argument("--no-timing", dest="timing", action="store_false",
                        help="write 0 for wall-clock fields so output is byte-stable")

    def rules(sp):
        sp.add_argument("--rules", help="rule-base file to use instead of the generated one")

    def search(sp, generations=True):
        sp.add_argument("--population", type=int, default=20)
        if generations:
            sp.add_argument("--generations", type=int, default=100)
        sp.add_argument("--time-budget", type=float, default=None, help="seconds")

    sp = sub.add_parser("gen", help="generate a random topology file")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--width", type=float, default=500.0)
    sp.add_argument("--height", type=float, default=500.0)
    sp.add_argument("--range", type=float, default=250.0)
    sp.add_argument("--out", default=None)
    seeded(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("cost", help="score a link-metrics CSV with the fuzzy system")
    sp.add_argument("input", help="CSV with throughput,delay_ms,jitter_ms,energy columns")
    sp.add_argument("--out", default=None)
    rules(sp)
    sp.set_defaults(func=cmd_cost)

    sp = sub.add_parser("route", help="BB-BC route on a topology file")
    sp.add_argument("topology")
    sp.add_argument("--source", type=int, default=1)
    sp.add_argument("--terminal", type=int, default=None, help="default: highest node id")
    search(sp)
    sp.add_argument("--stagnation", type=int, default=None)
    sp.add_argument("--trace-out", default=None)
    seeded(sp)
    timing(sp)
    rules(sp)
    sp.set_defaults(func=cmd_route)

    sp = sub.add_parser("oracle", help="exact Dijkstra route on a topology file")
    sp.add_argument("topology")
    sp.add_argument("--source", type=int, default=1)
    sp.add_argument("--terminal", type=int, default=None)
    rules(sp)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("bench", help="sweep node counts and generation counts, one CSV row per run")
    sp.add_argument("--sizes", type=int, nargs="+", default=[25, 50, 100])
    sp.add_argument("--generations", type=int, nargs="+", default=[100, 200])
    sp.add_argument("--seeds", type=int, default=1, help="repetitions per cell")
    sp.add_argument("--width", type=float, default=500.0)
    sp.add_argument("--height", type=float, default=500.0)
    sp.add_argument("--range", type=float, default=250.0)
    search(sp, generations=False)
    sp.add_argument("--out", default=None)
    seeded(sp)
    timing(sp)
    rules(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("sim", help="run a key=value scenario file")
    sp.add_argument("config")
    sp.add_argument("--compare", action="store_true", help="report BB-BC against Dijkstra per epoch")
    sp.add_argument("--out", default=None)
    seeded(sp)
    timing(sp)
    rules(sp)
    sp.set_defaults(func=cmd_sim)

    sp = sub.add_parser("rules", help="dump or check a fuzzy rule base")
    sp.add_argument("action", choices=["dump", "load"])
    sp.add_argument("file", nargs="?")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_rules)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoPathError as exc:
        print(f"meshroute: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except (UsageError, ConfigError, FuzzyError, TopologyError, ValueError) as exc:
        print(f"meshroute: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"meshroute: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
