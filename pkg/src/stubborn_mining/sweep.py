"""Parameter sweeps: profitability thresholds, optimal-strategy maps, metric tables."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from .domain import (
    MALICIOUS_STRATEGIES,
    ChainConfig,
    ParameterError,
    canonical_name,
    make_params,
    strategy_flags,
)
from .markov import DEFAULT_DELTA_MAX, DEFAULT_TOL, NonConvergence, ReducibleChain
from .metrics import SdsScenario, double_spend_probability, stale_ratio, tps
from .rewards import analyze

SCAN_STEP = 0.01
TIE_TOL = 1e-12
METRICS = ("R_p", "stale", "tps", "P_ds")
ALL_STRATEGIES = ("HONEST",) + tuple(MALICIOUS_STRATEGIES)


def _tie_rank(name: str) -> Tuple[int, str]:
    return (0 if name == "HONEST" else 1 if name == "SM" else 2, name)


@dataclass(frozen=True)
class SweepGrid:
    alphas: Tuple[float, ...]
    gammas: Tuple[float, ...]
    strategies: Tuple[str, ...] = ALL_STRATEGIES
    chain: ChainConfig = field(default_factory=ChainConfig.btc)

    def __post_init__(self) -> None:
        a = tuple(sorted({float(x) for x in self.alphas}))
        g = tuple(sorted({float(x) for x in self.gammas}))
        s = tuple(dict.fromkeys(canonical_name(x) for x in self.strategies))
        if not a or not g or not s:
            raise ParameterError("alphas, gammas and strategies must be non-empty")
        if a[0] < 0.0 or a[-1] >= 0.5:
            raise ParameterError("every alpha must lie in [0, 0.5)")
        if g[0] < 0.0 or g[-1] > 1.0:
            raise ParameterError("every gamma must lie in [0, 1]")
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "strategies", s)

    @classmethod
    def from_ranges(cls, alpha: Tuple[float, float, float], gammas: Iterable[float],
                    strategies: Iterable[str] = ALL_STRATEGIES, chain: Optional[ChainConfig] = None):
        """Build a grid from an inclusive ``(start, stop, step)`` alpha range."""
        lo, hi, step = alpha
        if step <= 0 or hi < lo:
            raise ParameterError("alpha range needs start <= stop and step > 0")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        alphas = [round(lo + i * step, 12) for i in range(n)]
        return cls(tuple(alphas), tuple(gammas), tuple(strategies), chain or ChainConfig.btc())

    def cells(self) -> List[Tuple[float, float, str]]:
        return [(a, g, s) for a in self.alphas for g in self.gammas for s in self.strategies]


@dataclass(frozen=True)
class ThresholdResult:
    strategy: str
    gamma: float
    chain: str
    alpha_star: float
    width: float
    status: str  # "crossing", "never" or "always"

    @property
    def profitable_somewhere(self) -> bool:
        return self.status != "never"


def _revenue(name: str, alpha: float, gamma: float, chain: ChainConfig,
             delta_max: int, tol: float) -> float:
    flags = strategy_flags(name)
    if flags.is_honest or alpha == 0.0:
        return alpha
    return analyze(flags, make_params(alpha, gamma), chain, delta_max=delta_max, tol=tol).R_p


def profit_threshold(strategy: str, gamma: float, chain: Optional[ChainConfig] = None,
                     tol: float = 1e-4, *, delta_max: int = DEFAULT_DELTA_MAX,
                     solver_tol: float = DEFAULT_TOL) -> ThresholdResult:
    """Smallest alpha at which ``strategy`` out-earns honest mining."""
    if tol <= 0:
        raise ParameterError("tol must be > 0")
    chain = chain or ChainConfig.btc()
    name = canonical_name(strategy)
    if name == "HONEST":
        raise ParameterError("HONEST has no profitability threshold")
    gain = lambda a: _revenue(name, a, gamma, chain, delta_max, solver_tol) - a  # noqa: E731
    grid = np.round(np.arange(SCAN_STEP, 0.5, SCAN_STEP), 10)
    values = [gain(a) for a in grid]
    if values[0] > 0:
        return ThresholdResult(name, gamma, chain.chain, 0.0, float(grid[0]), "always")
    for lo, hi, vlo, vhi in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if vlo <= 0 < vhi:
            root = bisect(gain, lo, hi, xtol=tol / 2, maxiter=200)
            return ThresholdResult(name, gamma, chain.chain, float(root), tol, "crossing")
    return ThresholdResult(name, gamma, chain.chain, 0.5, 0.0, "never")


@dataclass(frozen=True)
class Cell:
    alpha: float
    gamma: float
    strategy: str
    value: float
    error: str = ""


def _evaluate(job) -> Cell:
    (alpha, gamma, name, metric, chain, scenario, delta_max, tol) = job
    flags = strategy_flags(name)
    try:
        if metric == "R_p":
            value = _revenue(name, alpha, gamma, chain, delta_max, tol)
        else:
            params = make_params(alpha, gamma)
            rb = analyze(flags, params, chain, delta_max=delta_max, tol=tol)
            stale = stale_ratio(rb.r_p_b, rb.r_h_b)
            if metric == "stale":
                value = stale
            elif metric == "tps":
                value = tps(stale, chain)
            else:
                value = double_spend_probability(flags, params, scenario, stale)
    except (NonConvergence, ReducibleChain, ParameterError) as exc:
        return Cell(alpha, gamma, name, math.nan, f"{type(exc).__name__}: {exc}")
    return Cell(alpha, gamma, name, float(value))


def _run(jobs: Sequence, workers: int) -> List[Cell]:
    if workers <= 1 or len(jobs) < 2:
        return [_evaluate(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def metric_curves(grid: SweepGrid, metric: str = "R_p", scenario: Optional[SdsScenario] = None, *,
                  delta_max: int = DEFAULT_DELTA_MAX, tol: float = DEFAULT_TOL,
                  workers: int = 1) -> List[Cell]:
    """One row per (alpha, gamma, strategy), sorted by that key."""
    if metric not in METRICS:
        raise ParameterError(f"metric must be one of {METRICS}")
    if metric == "P_ds" and scenario is None:
        raise ParameterError("P_ds needs a double-spend scenario")
    jobs = [(a, g, s, metric, grid.chain, scenario, delta_max, tol) for a, g, s in grid.cells()]
    cells = _run(jobs, workers)
    return sorted(cells, key=lambda c: (c.alpha, c.gamma, c.strategy))


@dataclass(frozen=True)
class MapCell:
    alpha: float
    gamma: float
    best: str
    revenue: float
    revenues: Dict[str, float]
    errors: Dict[str, str]


def pick_best(revenues: Dict[str, float], tie_tol: float = TIE_TOL) -> Tuple[str, float]:
    """Argmax with ties going to HONEST, then SM, then by name."""
    finite = {k: v for k, v in revenues.items() if not math.isnan(v)}
    if not finite:
        return "", math.nan
    top = max(finite.values())
    tied = [k for k, v in finite.items() if v >= top - tie_tol * max(1.0, abs(top))]
    best = min(tied, key=_tie_rank)
    return best, finite[best]


def optimal_strategy_map(grid: SweepGrid, *, delta_max: int = DEFAULT_DELTA_MAX,
                         tol: float = DEFAULT_TOL, workers: int = 1) -> List[MapCell]:
    """Revenue-maximizing strategy at each ``(alpha, gamma)`` of ``grid``."""
    cells = metric_curves(grid, "R_p", delta_max=delta_max, tol=tol, workers=workers)
    by_key: Dict[Tuple[float, float], List[Cell]] = {}
    for c in cells:
        by_key.setdefault((c.alpha, c.gamma), []).append(c)
    out = []
    for (a, g), group in sorted(by_key.items()):
        revs = {c.strategy: c.value for c in group}
        errs = {c.strategy: c.error for c in group if c.error}
        best, rev = pick_best(revs)
        out.append(MapCell(a, g, best, rev, revs, errs))
    return out


def optimal_metric_curve(grid: SweepGrid, metric: str, scenario: Optional[SdsScenario] = None, *,
                         delta_max: int = DEFAULT_DELTA_MAX, tol: float = DEFAULT_TOL,
                         workers: int = 1) -> List[Cell]:
    """``metric`` at each cell when the pool plays its revenue-optimal strategy."""
    best = optimal_strategy_map(grid, delta_max=delta_max, tol=tol, workers=workers)
    if metric == "R_p":
        return [Cell(c.alpha, c.gamma, c.best, c.revenue) for c in best]
    if metric not in METRICS:
        raise ParameterError(f"metric must be one of {METRICS}")
    if metric == "P_ds" and scenario is None:
        raise ParameterError("P_ds needs a double-spend scenario")
    jobs = [(c.alpha, c.gamma, c.best, metric, grid.chain, scenario, delta_max, tol) for c in best if c.best]
    return sorted(_run(jobs, workers), key=lambda c: (c.alpha, c.gamma))


def switching_points(cells: Sequence[MapCell]) -> List[Tuple[float, str, str]]:
    """``(alpha, before, after)`` wherever the best strategy changes along alpha."""
    out = []
    ordered = sorted(cells, key=lambda c: c.alpha)
    for prev, cur in zip(ordered[:-1], ordered[1:]):
        if prev.best != cur.best:
            out.append(((prev.alpha + cur.alpha) / 2.0, prev.best, cur.best))
    return out


__all__ = [
    "ALL_STRATEGIES",
    "Cell",
    "MapCell",
    "SweepGrid",
    "ThresholdResult",
    "default_workers",
    "metric_curves",
    "optimal_metric_curve",
    "optimal_strategy_map",
    "pick_best",
    "profit_threshold",
    "switching_points",
]
