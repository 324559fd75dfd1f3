"""System-level metrics: stale-block ratio, throughput and double-spend risk.

The double-spend model splits the network into two groups. G1 holds the
honest miners and the withholding pool and behaves like an independent
system that loses a fraction ``stale`` of its blocks to forks. G2 is a
separate double-spending pool racing G1 to ``n_v`` confirmations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import gammaln

from .domain import ChainConfig, MiningParams, ParameterError, StrategyFlags
from .markov import DEFAULT_DELTA_MAX, DEFAULT_TOL
from .rewards import analyze

ENVELOPE = 1e-12


def stale_ratio(r_p_b: float, r_h_b: float) -> float:
    """Fraction of generated blocks that end up off the main chain."""
    for name, v in (("r_p_b", r_p_b), ("r_h_b", r_h_b)):
        if not (-ENVELOPE <= v <= 1.0 + ENVELOPE) or math.isnan(v):
            raise ParameterError(f"{name}={v} outside [0, 1]")
    total = r_p_b + r_h_b
    if total > 1.0 + ENVELOPE:
        raise ParameterError(f"r_p_b + r_h_b = {total} exceeds 1")
    return min(1.0, max(0.0, 1.0 - total))


def tps(stale: float, chain: ChainConfig) -> float:
    """Transactions per second of the main chain."""
    if not 0.0 <= stale <= 1.0:
        raise ParameterError(f"stale ratio {stale} outside [0, 1]")
    return (1.0 - stale) * chain.tx_per_block / chain.block_time


@dataclass(frozen=True)
class SdsScenario:
    """A double-spending pool of hash power ``h_ds`` (total of G1 is 1)."""

    h_ds: float
    n_v: int = 6

    def __post_init__(self) -> None:
        if not (self.h_ds >= 0.0 and math.isfinite(self.h_ds)):
            raise ParameterError("h_ds must be a finite value >= 0")
        if int(self.n_v) != self.n_v or self.n_v < 1:
            raise ParameterError("n_v must be an integer >= 1")

    @classmethod
    def from_share(cls, p_g2: float, n_v: int = 6) -> "SdsScenario":
        """Scenario where the double-spending pool holds ``p_g2`` of all hash power."""
        if not 0.0 <= p_g2 < 1.0:
            raise ParameterError("p_g2 must lie in [0, 1)")
        return cls(p_g2 / (1.0 - p_g2), n_v)

    @property
    def p_g1(self) -> float:
        return 1.0 / (1.0 + self.h_ds)

    @property
    def p_g2(self) -> float:
        return self.h_ds / (1.0 + self.h_ds)

    def q(self, stale: float) -> Tuple[float, float]:
        """Per-block win probabilities of G1 and G2 once G1's stale blocks are removed."""
        if not 0.0 <= stale <= 1.0:
            raise ParameterError(f"stale ratio {stale} outside [0, 1]")
        eff = self.p_g1 * (1.0 - stale)
        den = eff + self.p_g2
        if den == 0.0:
            return 0.0, 1.0
        q1 = eff / den
        return q1, 1.0 - q1


def race_formula(q_g1: float, q_g2: float, n_v: int) -> float:
    """Success probability of a private double-spend race after ``n_v`` confirmations."""
    if n_v < 1:
        raise ParameterError("n_v must be >= 1")
    if q_g2 >= q_g1:
        return 1.0
    if q_g2 == 0.0:
        return 0.0
    l1, l2 = math.log(q_g1), math.log(q_g2)
    acc = 0.0
    for m in range(n_v + 1):
        logc = gammaln(m + n_v) - gammaln(m + 1) - gammaln(n_v)
        acc += math.exp(logc + n_v * l1 + m * l2) - math.exp(logc + m * l1 + n_v * l2)
    return min(1.0, max(0.0, 1.0 - acc))


def double_spend_probability(flags: StrategyFlags, params: MiningParams, scenario: SdsScenario,
                             stale: Optional[float] = None, *, chain: Optional[ChainConfig] = None,
                             delta_max: int = DEFAULT_DELTA_MAX, tol: float = DEFAULT_TOL) -> float:
    """Double-spend success when G1's forks come from ``flags`` at ``params``.

    ``stale`` may be supplied directly; otherwise it is solved for G1 alone,
    since the double-spending pool does not take part in G1's forks.
    """
    if stale is None:
        rb = analyze(flags, params, chain, delta_max=delta_max, tol=tol)
        stale = stale_ratio(rb.r_p_b, rb.r_h_b)
    q1, q2 = scenario.q(stale)
    return race_formula(q1, q2, scenario.n_v)


@dataclass(frozen=True)
class RaceEstimate:
    mean: float
    se: float
    trials: int

    def z(self, expected: float) -> float:
        if self.se == 0.0:
            return 0.0 if self.mean == expected else math.inf
        return (self.mean - expected) / self.se


def simulate_race(q_g1: float, n_v: int, trials: int = 200_000, seed: int = 0,
                  give_up: int = 60, strict: bool = False) -> RaceEstimate:
    """Block-by-block race between G1 and the double-spending pool.

    The pool mines in secret until G1 has ``n_v`` blocks on top of the
    payment, then keeps mining until its branch catches up with G1's (or,
    with ``strict``, overtakes it by one block). It gives up once it trails
    by ``give_up`` blocks. Catching up counts as success by default, which is
    the usual convention that the pool has one block pre-mined.
    """
    if n_v < 1 or trials < 2:
        raise ParameterError("n_v >= 1 and trials >= 2 required")
    need = 1 if strict else 0
    rng = np.random.Generator(np.random.PCG64(seed))
    g1 = np.zeros(trials, dtype=np.int64)
    g2 = np.zeros(trials, dtype=np.int64)
    # phase one: wait for n_v confirmations
    active = np.ones(trials, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        win1 = rng.random(idx.size) < q_g1
        g1[idx[win1]] += 1
        g2[idx[~win1]] += 1
        active[idx] = g1[idx] < n_v
    # phase two: catch-up walk
    lead = g2 - g1
    success = lead >= need
    open_ = ~success & (lead > -give_up)
    while open_.any():
        idx = np.flatnonzero(open_)
        lead[idx] += np.where(rng.random(idx.size) < q_g1, -1, 1)
        won = lead[idx] >= need
        success[idx[won]] = True
        open_[idx] = ~won & (lead[idx] > -give_up)
    p = float(success.mean())
    return RaceEstimate(p, math.sqrt(max(p * (1.0 - p), 0.0) / trials), trials)
