"""Command-line front end.

Every command writes one table (CSV by default, JSON records with
``--format json``) to ``--output``, to ``$STUBBORN_MINING_OUTPUT_DIR/<command>.<ext>``
when only the directory variable is set, or to stdout otherwise.

Exit codes: 0 success, 1 usage error, 2 numerical non-convergence,
3 cross-validation failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from typing import Any, Dict, Iterable, List, Optional, Sequence

from . import __version__
from .crossval import GRID_ALPHAS, GRID_GAMMAS, run_grid, summarize
from .domain import (
    MALICIOUS_STRATEGIES,
    UNCLE_SCHEDULES,
    ChainConfig,
    ParameterError,
    canonical_name,
    make_params,
    strategy_flags,
)
from .markov import DEFAULT_DELTA_MAX, DEFAULT_TOL, NonConvergence, ReducibleChain
from .metrics import SdsScenario, double_spend_probability, race_formula, simulate_race, stale_ratio, tps
from .montecarlo import SimConfig, simulate
from .rewards import analyze
from .sweep import (
    ALL_STRATEGIES,
    SweepGrid,
    default_workers,
    metric_curves,
    optimal_metric_curve,
    optimal_strategy_map,
    profit_threshold,
)

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENCE, EXIT_CROSSVAL = 0, 1, 2, 3
OUTPUT_DIR_ENV = "STUBBORN_MINING_OUTPUT_DIR"
FLOAT_FMT = "{:.12g}"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- parsing helpers

def _float_list(text: str) -> List[float]:
    """``a,b,c`` or an inclusive ``start:stop:step`` range."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise ValueError
            lo, hi, step = parts
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return [round(lo + i * step, 12) for i in range(n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list or start:stop:step, got {text!r}")


def _strategies(text: str, allow_honest: bool = True) -> List[str]:
    text = str(text).strip()
    if text.lower() == "all":
        return list(ALL_STRATEGIES if allow_honest else MALICIOUS_STRATEGIES)
    if text.lower() == "malicious":
        return list(MALICIOUS_STRATEGIES)
    try:
        names = [canonical_name(x) for x in text.split(",") if x.strip()]
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    if not names:
        raise argparse.ArgumentTypeError("no strategy given")
    return names


def _unit(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is outside [0, 1]")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _common(p: argparse.ArgumentParser, *, chain=True, solver=True) -> None:
    p.add_argument("--config", help="flat key = value file; command-line flags take precedence")
    if chain:
        p.add_argument("--chain", default="btc", type=str.lower, choices=("btc", "eth"))
        p.add_argument("--uncle-schedule", default="distance", choices=UNCLE_SCHEDULES,
                       help="uncle reward d/8 (distance) or (8-d)/8 (protocol)")
    if solver:
        p.add_argument("--delta-max", type=int, default=DEFAULT_DELTA_MAX)
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--output", "-o", help="output file (default: stdout)")
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--workers", type=_positive_int, default=None,
                   help="worker processes (default: available cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stubborn-mining", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="exact rewards and metrics for one or more strategies")
    p.add_argument("--strategy", type=_strategies, default=["SM"], help="name, comma list or 'all'")
    p.add_argument("--alpha", type=_float_list, required=True)
    p.add_argument("--gamma", type=_float_list, default=[0.5])
    _common(p)

    p = sub.add_parser("simulate", help="Monte Carlo run of one strategy")
    p.add_argument("--strategy", type=_strategies, default=["SM"])
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--gamma", type=_unit, default=0.5)
    p.add_argument("--events", type=_positive_int, default=1_000_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--seeds", type=_positive_int, default=1, help="independent runs seed, seed+1, ...")
    p.add_argument("--batches", type=_positive_int, default=100)
    _common(p, solver=False)

    p = sub.add_parser("sweep", help="metric table over an (alpha, gamma) grid")
    p.add_argument("--metric", default="R_p", choices=("R_p", "stale", "tps", "P_ds", "best"))
    p.add_argument("--strategy", default="all",
                   help="name, comma list, 'all', or 'optimal' for the revenue-optimal strategy per cell")
    p.add_argument("--alpha", type=_float_list, default=_float_list("0:0.45:0.01"))
    p.add_argument("--gamma", type=_float_list, default=[0.5])
    p.add_argument("--h-ds", type=float, default=None)
    p.add_argument("--p-g2", type=float, default=None)
    p.add_argument("--n-v", type=_positive_int, default=None)
    _common(p)

    p = sub.add_parser("threshold", help="profitability threshold per strategy")
    p.add_argument("--strategy", type=lambda t: _strategies(t, False), default=list(MALICIOUS_STRATEGIES))
    p.add_argument("--gamma", type=_float_list, default=[0.5])
    p.add_argument("--width", type=float, default=1e-4, help="final bracket width")
    _common(p)

    p = sub.add_parser("doublespend", help="double-spend success probability")
    p.add_argument("--strategy", type=_strategies, default=["SM"])
    p.add_argument("--alpha", type=_float_list, required=True)
    p.add_argument("--gamma", type=_float_list, default=[0.5])
    p.add_argument("--h-ds", type=float, default=None, help="double-spender hash power (G1 = 1)")
    p.add_argument("--p-g2", type=float, default=None, help="double-spender share of all hash power")
    p.add_argument("--n-v", type=_positive_int, default=None, help="confirmations (default: per chain)")
    p.add_argument("--oracle-trials", type=int, default=0, help="also run a race simulation")
    p.add_argument("--seed", type=_seed, default=0)
    _common(p)

    p = sub.add_parser("crossval", help="Markov model versus Monte Carlo over a grid")
    p.add_argument("--strategy", type=lambda t: _strategies(t, False), default=list(MALICIOUS_STRATEGIES))
    p.add_argument("--alpha", type=_float_list, default=list(GRID_ALPHAS))
    p.add_argument("--gamma", type=_float_list, default=list(GRID_GAMMAS))
    p.add_argument("--events", type=_positive_int, default=1_000_000)
    p.add_argument("--seed", type=_seed, default=0, help="offset added to every per-cell seed")
    p.add_argument("--min-visits", type=_positive_int, default=1000)
    _common(p, chain=False)
    return parser


# ---------------------------------------------------------------- config files

def read_config(path: str) -> Dict[str, str]:
    """Flat ``key = value`` pairs; ``#`` starts a comment."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_string("[run]\n" + fh.read(), source=path)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    return {k.replace("-", "_"): v for k, v in cp["run"].items()}


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        if isinstance(action, argparse._SubParsersAction):  # noqa: SLF001
            return action.choices[command]
    raise KeyError(command)


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        first = next((a for a in argv if not a.startswith("-")), None)
        if first in _subparser_names(parser):
            values = read_config(known.config)
            values.pop("command", None)
            sp = _subparser(parser, first)
            dests = {a.dest for a in sp._actions}  # noqa: SLF001
            unknown = sorted(set(values) - dests)
            if unknown:
                raise UsageError(f"unknown config keys for {first}: {', '.join(unknown)}")
            sp.set_defaults(**values)
            for action in sp._actions:  # noqa: SLF001
                if action.dest in values:
                    action.required = False
    args = parser.parse_args(argv)
    return args


def _subparser_names(parser) -> Iterable[str]:
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        if isinstance(action, argparse._SubParsersAction):  # noqa: SLF001
            return list(action.choices)
    return []


# ---------------------------------------------------------------- output

def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return FLOAT_FMT.format(v)
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, float):
        return None if math.isnan(v) or math.isinf(v) else float(FLOAT_FMT.format(v))
    return v


def render(rows: List[Dict[str, Any]], header: Sequence[str], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{k: _json_value(r.get(k, "")) for k in header} for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(k, "")) for k in header])
    return buf.getvalue()


def emit(args, rows: List[Dict[str, Any]], header: Sequence[str]) -> None:
    text = render(rows, header, args.format)
    target = args.output
    out_dir = os.environ.get(OUTPUT_DIR_ENV)
    if target is None and out_dir:
        target = os.path.join(out_dir, f"{args.command}.{args.format}")
    elif target is not None and out_dir and not os.path.isabs(target):
        target = os.path.join(out_dir, target)
    if target is None or target == "-":
        sys.stdout.write(text)
        return
    os.makedirs(os.path.dirname(os.path.abspath(target)), exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------- commands

def _chain(args) -> ChainConfig:
    return ChainConfig.named(args.chain, uncle_schedule=args.uncle_schedule)


def _workers(args) -> int:
    return args.workers or default_workers()


ANALYZE_HEADER = ("strategy", "chain", "alpha", "gamma", "r_p_b", "r_h_b", "r_p_u", "r_h_u", "r_p_n",
                  "r_h_n", "b_u", "stale", "tps", "R_p", "R_h", "tail_mass", "flagged")


def cmd_analyze(args) -> int:
    chain = _chain(args)
    rows = []
    for name in args.strategy:
        for a in args.alpha:
            for g in args.gamma:
                rb = analyze(strategy_flags(name), make_params(a, g), chain, delta_max=args.delta_max,
                             tol=args.tol)
                st = stale_ratio(rb.r_p_b, rb.r_h_b)
                rows.append(dict(strategy=name, chain=chain.chain, alpha=a, gamma=g, r_p_b=rb.r_p_b,
                                 r_h_b=rb.r_h_b, r_p_u=rb.r_p_u, r_h_u=rb.r_h_u, r_p_n=rb.r_p_n,
                                 r_h_n=rb.r_h_n, b_u=rb.b_u, stale=st, tps=tps(st, chain), R_p=rb.R_p,
                                 R_h=rb.R_h, tail_mass=rb.tail_mass, flagged=rb.flagged))
    emit(args, rows, ANALYZE_HEADER)
    return EXIT_OK


SIM_TALLIES = ("mp_static", "honest_static", "mp_uncle", "honest_uncle", "honest_nephew",
               "stale_frequency", "uncle_frequency")


def _sim_job(job):
    name, alpha, gamma, chain, events, seed, batches = job
    rep = simulate(SimConfig(strategy_flags(name), make_params(alpha, gamma), chain, events=events,
                             seed=seed, batches=batches))
    return rep.record()


def cmd_simulate(args) -> int:
    chain = _chain(args)
    jobs = [(name, args.alpha, args.gamma, chain, args.events, args.seed + i, args.batches)
            for name in args.strategy for i in range(args.seeds)]
    workers = min(_workers(args), len(jobs))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            recs = list(pool.map(_sim_job, jobs))
    else:
        recs = [_sim_job(j) for j in jobs]
    header = ["strategy", "alpha", "gamma", "seed", "events", "chain"]
    for t in SIM_TALLIES:
        header += [t, t + "_se"]
    header.append("mp_share")
    rows = []
    for job, rec in zip(jobs, recs):
        rows.append(dict(rec, strategy=job[0], alpha=job[1], gamma=job[2], seed=job[5]))
    emit(args, rows, header)
    return EXIT_OK


def _scenario(args, chain: ChainConfig) -> Optional[SdsScenario]:
    n_v = args.n_v or chain.confirmations
    if args.h_ds is not None and args.p_g2 is not None:
        raise UsageError("give either --h-ds or --p-g2, not both")
    if args.h_ds is not None:
        return SdsScenario(args.h_ds, n_v)
    if args.p_g2 is not None:
        return SdsScenario.from_share(args.p_g2, n_v)
    return None


def cmd_sweep(args) -> int:
    chain = _chain(args)
    optimal = str(args.strategy).strip().lower() == "optimal"
    names = list(ALL_STRATEGIES) if optimal else _strategies(args.strategy)
    grid = SweepGrid(tuple(args.alpha), tuple(args.gamma), tuple(names), chain)
    scenario = _scenario(args, chain)
    kw = dict(delta_max=args.delta_max, tol=args.tol, workers=_workers(args))
    if args.metric == "best":
        cells = optimal_strategy_map(grid, **kw)
        header = ["alpha", "gamma", "best", "R_p"] + [f"R_p[{s}]" for s in grid.strategies]
        rows = []
        for c in cells:
            row = dict(alpha=c.alpha, gamma=c.gamma, best=c.best, R_p=c.revenue)
            row.update({f"R_p[{s}]": c.revenues.get(s, math.nan) for s in grid.strategies})
            rows.append(row)
        emit(args, rows, header)
        return EXIT_OK
    if optimal:
        cells = optimal_metric_curve(grid, args.metric, scenario, **kw)
    else:
        cells = metric_curves(grid, args.metric, scenario, **kw)
    rows = [dict(alpha=c.alpha, gamma=c.gamma, strategy=c.strategy, chain=chain.chain, metric=args.metric,
                 value=c.value, error=c.error) for c in cells]
    emit(args, rows, ("alpha", "gamma", "strategy", "chain", "metric", "value", "error"))
    return EXIT_OK


def cmd_threshold(args) -> int:
    chain = _chain(args)
    rows = []
    for name in args.strategy:
        for g in args.gamma:
            r = profit_threshold(name, g, chain, args.width, delta_max=args.delta_max, solver_tol=args.tol)
            rows.append(dict(strategy=r.strategy, chain=r.chain, gamma=r.gamma, alpha_star=r.alpha_star,
                             width=r.width, status=r.status))
    emit(args, rows, ("strategy", "chain", "gamma", "alpha_star", "width", "status"))
    return EXIT_OK


def cmd_doublespend(args) -> int:
    chain = _chain(args)
    scenario = _scenario(args, chain)
    if scenario is None:
        raise UsageError("doublespend needs --h-ds or --p-g2")
    header = ["strategy", "chain", "alpha", "gamma", "h_ds", "p_g1", "p_g2", "n_v", "stale", "q_g1", "q_g2",
              "P_ds"]
    if args.oracle_trials:
        header += ["oracle", "oracle_se", "oracle_z"]
    rows = []
    for name in args.strategy:
        for a in args.alpha:
            for g in args.gamma:
                flags, params = strategy_flags(name), make_params(a, g)
                rb = analyze(flags, params, chain, delta_max=args.delta_max, tol=args.tol)
                st = stale_ratio(rb.r_p_b, rb.r_h_b)
                q1, q2 = scenario.q(st)
                p = double_spend_probability(flags, params, scenario, st)
                row = dict(strategy=name, chain=chain.chain, alpha=a, gamma=g, h_ds=scenario.h_ds,
                           p_g1=scenario.p_g1, p_g2=scenario.p_g2, n_v=scenario.n_v, stale=st, q_g1=q1,
                           q_g2=q2, P_ds=p)
                if args.oracle_trials:
                    est = simulate_race(q1, scenario.n_v, args.oracle_trials, args.seed)
                    row.update(oracle=est.mean, oracle_se=est.se, oracle_z=est.z(race_formula(q1, q2, scenario.n_v)))
                rows.append(row)
    emit(args, rows, header)
    return EXIT_OK


def cmd_crossval(args) -> int:
    rows = run_grid(args.strategy, args.alpha, args.gamma, workers=_workers(args), events=args.events,
                    seed=None, delta_max=args.delta_max, tol=args.tol, min_visits=args.min_visits,
                    seed_offset=args.seed)
    header = ("strategy", "alpha", "gamma", "kind", "name", "expected", "observed", "se", "z", "pass")
    out = [dict(strategy=r.strategy, alpha=r.alpha, gamma=r.gamma, kind=r.kind, name=r.name,
                expected=r.expected, observed=r.observed, se=r.se, z=r.z, **{"pass": r.passed}) for r in rows]
    emit(args, out, header)
    s = summarize(rows)
    print(f"crossval: {s['comparisons']} comparisons, {s['failures']} beyond 3 SE "
          f"(about {s['expected_failures_if_exact']:.1f} expected by chance), max |z| {s['max_abs_z']:.2f}",
          file=sys.stderr)
    return EXIT_OK if s["failures"] == 0 else EXIT_CROSSVAL


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "threshold": cmd_threshold,
    "doublespend": cmd_doublespend,
    "crossval": cmd_crossval,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        try:
            args = parse_args(argv)
        except SystemExit as exc:  # argparse usage errors, --help, --version
            return int(exc.code or 0)
        if getattr(args, "delta_max", DEFAULT_DELTA_MAX) < 4:
            raise UsageError("--delta-max must be >= 4")
        if getattr(args, "tol", DEFAULT_TOL) <= 0:
            raise UsageError("--tol must be > 0")
        return COMMANDS[args.command](args)
    except (UsageError, ParameterError) as exc:
        print(f"stubborn-mining: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergence, ReducibleChain) as exc:
        print(f"stubborn-mining: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
