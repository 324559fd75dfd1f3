"""Markov model versus Monte Carlo: per-state and per-tally z-scores.

States whose expected visit count is below ``min_visits`` are pooled into a
single ``rest`` bin so that every comparison has enough batches with visits
for the batch-means standard error to be meaningful; no mass is dropped.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from .domain import ChainConfig, MiningParams, StrategyFlags, make_params, strategy_flags
from .markov import DEFAULT_DELTA_MAX, DEFAULT_TOL, build_transitions, solve_stationary
from .montecarlo import SimConfig, Tally, simulate
from .montecarlo.simulator import DEFAULT_OCC_CAP
from .rewards import analyze
from .uncles import uncle_rates, unit_reward_fn

Z_LIMIT = 3.0
MIN_VISITS = 1000
GRID_ALPHAS = (0.1, 0.2, 0.3, 0.4)
GRID_GAMMAS = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class Comparison:
    strategy: str
    alpha: float
    gamma: float
    kind: str  # "state" or "tally"
    name: str
    expected: float
    observed: float
    se: float

    @property
    def z(self) -> float:
        if self.se == 0.0:
            return 0.0 if abs(self.observed - self.expected) < 1e-12 else math.inf
        return (self.observed - self.expected) / self.se

    @property
    def passed(self) -> bool:
        return abs(self.z) <= Z_LIMIT


def cell_seed(strategy: str, alpha: float, gamma: float, base: int = 0) -> int:
    """Fixed per-cell seed, independent of evaluation order."""
    return (zlib.crc32(f"{strategy}|{alpha:.6f}|{gamma:.6f}".encode()) + base) % 2**63


def compare_cell(flags: StrategyFlags, params: MiningParams, *, events: int = 1_000_000,
                 seed: Optional[int] = None, batches: int = 100, delta_max: int = DEFAULT_DELTA_MAX,
                 tol: float = DEFAULT_TOL, min_visits: int = MIN_VISITS,
                 uncles: bool = True, seed_offset: int = 0) -> List[Comparison]:
    """All comparisons for one strategy and parameter point."""
    if seed is None:
        seed = cell_seed(flags.name, params.alpha, params.gamma, seed_offset)
    chain = ChainConfig.eth()
    rep = simulate(SimConfig(flags, params, chain, events=events, seed=seed, batches=batches,
                             occ_cap=max(delta_max, DEFAULT_OCC_CAP)))
    ts = build_transitions(flags, params, delta_max)
    st = solve_stationary(ts, tol)
    rb = analyze(flags, params, chain, delta_max=delta_max, tol=tol, pi=st)
    tag = dict(strategy=flags.name, alpha=params.alpha, gamma=params.gamma)
    out: List[Comparison] = []

    kept = sorted(s for s, w in st.pi.items() if w * events >= min_visits and not ts.is_tail(s))
    for s in kept:
        t = rep.occupancy.get(s, Tally(0.0, 0.0))
        out.append(Comparison(kind="state", name=str(s), expected=st.pi[s], observed=t.mean, se=t.se, **tag))
    rest_expected = max(0.0, 1.0 - sum(st.pi[s] for s in kept))
    rest = rep.occupancy_rest(kept)
    if rest_expected * events >= min_visits:
        out.append(Comparison(kind="state", name="rest", expected=rest_expected, observed=rest.mean,
                              se=rest.se, **tag))

    def tally(name: str, expected: float, t: Tally) -> None:
        out.append(Comparison(kind="tally", name=name, expected=expected, observed=t.mean, se=t.se, **tag))

    tally("r_p_b", rb.r_p_b, rep.mp_static)
    tally("r_h_b", rb.r_h_b, rep.honest_static)
    tally("stale", rb.stale, rep.stale_frequency)
    if uncles:
        b_u = uncle_rates(ts, tol, unit_reward_fn).uncle_count
        tally("r_p_u", rb.r_p_u, rep.mp_uncle)
        tally("r_h_u", rb.r_h_u, rep.honest_uncle)
        tally("r_h_n", rb.r_h_n, rep.honest_nephew)
        tally("b_u", b_u, rep.uncle_frequency)
    return out


def _cell_job(job) -> List[Comparison]:
    name, alpha, gamma, kw = job
    return compare_cell(strategy_flags(name), make_params(alpha, gamma), **kw)


def run_grid(strategies: Sequence[str], alphas: Sequence[float] = GRID_ALPHAS,
             gammas: Sequence[float] = GRID_GAMMAS, workers: int = 1, **kw) -> List[Comparison]:
    jobs = [(s, a, g, kw) for s in strategies for a in alphas for g in gammas]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_cell_job, jobs))
    else:
        parts = [_cell_job(j) for j in jobs]
    return [c for part in parts for c in part]


def summarize(rows: Sequence[Comparison]) -> Dict[str, float]:
    """Counts and the tail of the z distribution, with its null expectation."""
    n = len(rows)
    zs = [abs(r.z) for r in rows]
    fails = sum(1 for r in rows if not r.passed)
    return {
        "comparisons": n,
        "failures": fails,
        "expected_failures_if_exact": n * math.erfc(Z_LIMIT / math.sqrt(2.0)),
        "max_abs_z": max(zs) if zs else 0.0,
        "rms_z": math.sqrt(sum(z * z for z in zs) / n) if n else 0.0,
    }


__all__ = ["Comparison", "Z_LIMIT", "cell_seed", "compare_cell", "run_grid", "summarize"]
