"""Static, uncle and nephew rewards and the resulting relative revenues.

Rewards are long-run amounts per block-generation event, in units of one
static block reward. The static rewards come from block fates on the
``(delta, n)`` chain; uncle and nephew rewards from the augmented chain in
:mod:`stubborn_mining.uncles`. Both are exact up to floating point, and the
tail aggregation in :mod:`stubborn_mining.markov` makes them insensitive to
the truncation level.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

from .domain import ChainConfig, MiningParams, ParameterError, StrategyFlags
from .fates import regular_block_rates
from .markov import DEFAULT_DELTA_MAX, DEFAULT_TOL, StationaryDistribution, build_transitions, solve_stationary
from .uncles import MAX_DISTANCE, uncle_rates, uncle_reward_fn, unit_reward_fn

__all__ = [
    "AuxiliaryProbabilities",
    "RewardBreakdown",
    "analyze",
    "aux_probs",
    "nephew_rewards",
    "relative_revenue",
    "static_rewards",
    "uncle_reward_fn",
    "uncle_rewards",
    "unit_reward_fn",
]

NEPHEW_REWARD = 1.0 / 32.0


@dataclass(frozen=True)
class AuxiliaryProbabilities:
    """Helper probabilities of the look-ahead reward expressions."""

    p_t1: float
    p_t2: float
    p_le: float
    p_e: float
    flags: StrategyFlags
    params: MiningParams

    def p_ls(self, delta: int) -> float:
        """Chance that a lead-stubborn race entered at lead ``delta`` is lost."""
        p = self.params
        return p.p_beta ** delta * p.p_beta_h * self.p_t2 / self.p_le


def aux_probs(flags: StrategyFlags, params: MiningParams) -> AuxiliaryProbabilities:
    if flags.is_honest:
        raise ParameterError("auxiliary probabilities are defined for malicious strategies only")
    pa, pb, pbp, pbh = params.p_alpha, params.p_beta, params.p_beta_p, params.p_beta_h
    f = flags
    p_t1 = pa / (1.0 - pa * pb)
    p_t2 = f.s0t + f.st * pb / (1.0 - pa * pb)
    p_le = 1.0 - pa * pbh
    p_ls2 = pb ** 2 * pbh * p_t2 / p_le
    p_e = (pa * (f.s0l + f.sl * (1.0 - p_ls2)) + pb * pbp + f.st * pa * pb * pbh * p_t1) / (1.0 - pa * pb)
    out = AuxiliaryProbabilities(p_t1, p_t2, p_le, p_e, flags, params)
    for name in ("p_t1", "p_t2", "p_le", "p_e"):
        v = getattr(out, name)
        if not -1e-12 <= v <= 1.0 + 1e-12:
            raise AssertionError(f"{name}={v} outside [0, 1]")
    return out


@dataclass(frozen=True)
class RewardBreakdown:
    """Reward components per block-generation event and relative revenues."""

    strategy: str
    chain: str
    alpha: float
    gamma: float
    r_p_b: float
    r_h_b: float
    r_p_u: float = 0.0
    r_h_u: float = 0.0
    r_p_n: float = 0.0
    r_h_n: float = 0.0
    b_u: float = 0.0
    tail_mass: float = 0.0
    flagged: bool = False

    @property
    def stale(self) -> float:
        return max(0.0, 1.0 - self.r_p_b - self.r_h_b)

    @property
    def total(self) -> float:
        return self.r_p_b + self.r_h_b + self.r_p_u + self.r_h_u + self.r_p_n + self.r_h_n

    @property
    def R_p(self) -> float:
        return (self.r_p_b + self.r_p_u + self.r_p_n) / self.total

    @property
    def R_h(self) -> float:
        return (self.r_h_b + self.r_h_u + self.r_h_n) / self.total

    def scaled(self, c: float) -> "RewardBreakdown":
        """Every reward component multiplied by ``c`` (revenues unchanged)."""
        return replace(
            self,
            r_p_b=self.r_p_b * c, r_h_b=self.r_h_b * c, r_p_u=self.r_p_u * c, r_h_u=self.r_h_u * c,
            r_p_n=self.r_p_n * c, r_h_n=self.r_h_n * c, b_u=self.b_u * c,
        )


def _require_system(flags, params, pi: Optional[StationaryDistribution], delta_max, tol):
    if pi is not None and pi.system is not None:
        ts = pi.system
        if ts.flags != flags or ts.params != params:
            raise ParameterError("stationary distribution was solved for different inputs")
        return ts, pi
    ts = build_transitions(flags, params, delta_max)
    return ts, solve_stationary(ts, tol)


def static_rewards(flags: StrategyFlags, params: MiningParams,
                   pi: Optional[StationaryDistribution] = None, *,
                   delta_max: int = DEFAULT_DELTA_MAX, tol: float = DEFAULT_TOL) -> Tuple[float, float]:
    """Regular pool and honest blocks per block-generation event."""
    if params.alpha == 0.0:
        return 0.0, 1.0
    if flags.is_honest:
        return params.alpha, params.beta
    ts, pi = _require_system(flags, params, pi, delta_max, tol)
    r_p, r_h = regular_block_rates(ts, pi.vector)
    return float(r_p), float(r_h)


def uncle_rewards(flags: StrategyFlags, params: MiningParams,
                  pi: Optional[StationaryDistribution] = None, *,
                  reward_fn: Callable[[int], float] = uncle_reward_fn,
                  delta_max: int = DEFAULT_DELTA_MAX, tol: float = DEFAULT_TOL) -> Tuple[float, float]:
    """Uncle rewards ``(r_p_u, r_h_u)``; with ``unit_reward_fn`` they count uncles."""
    if params.alpha == 0.0 or flags.is_honest:
        return 0.0, 0.0
    ts, pi = _require_system(flags, params, pi, delta_max, tol)
    u = uncle_rates(ts, tol, reward_fn)
    return u.mp_uncle, u.honest_uncle


def nephew_rewards(b_u: float, reward: float = NEPHEW_REWARD) -> Tuple[float, float]:
    """Nephew rewards ``(r_p_n, r_h_n)``; the pool never references uncles."""
    if b_u < 0:
        raise ParameterError("expected uncle count must be >= 0")
    return 0.0, b_u * reward


def analyze(flags: StrategyFlags, params: MiningParams, chain: Optional[ChainConfig] = None, *,
            delta_max: int = DEFAULT_DELTA_MAX, tol: float = DEFAULT_TOL,
            pi: Optional[StationaryDistribution] = None) -> RewardBreakdown:
    """Full reward breakdown for one strategy, parameter point and chain."""
    chain = ChainConfig.btc() if chain is None else chain
    base = dict(strategy=flags.name, chain=chain.chain, alpha=params.alpha, gamma=params.gamma)
    if flags.is_honest or params.alpha == 0.0:
        if flags.is_honest:
            return RewardBreakdown(r_p_b=params.alpha, r_h_b=params.beta, **base)
        return RewardBreakdown(r_p_b=0.0, r_h_b=1.0, **base)
    ts, pi = _require_system(flags, params, pi, delta_max, tol)
    r_p_b, r_h_b = map(float, regular_block_rates(ts, pi.vector))
    out = RewardBreakdown(r_p_b=r_p_b, r_h_b=r_h_b, tail_mass=pi.tail_mass, flagged=pi.flagged, **base)
    if not chain.has_uncles:
        return out
    u = uncle_rates(ts, tol, chain.uncle_reward)
    _, r_h_n = nephew_rewards(u.nephew_count, chain.nephew_reward)
    return replace(out, r_p_u=u.mp_uncle, r_h_u=u.honest_uncle, r_h_n=r_h_n, b_u=u.uncle_count)


def relative_revenue(flags: StrategyFlags, params: MiningParams, chain: Optional[ChainConfig] = None,
                     pi: Optional[StationaryDistribution] = None, **kw) -> Tuple[float, float]:
    """``(R_p, R_h)``; the honest strategy earns exactly its hash share."""
    if flags.is_honest:
        return params.alpha, params.beta
    rb = analyze(flags, params, chain, pi=pi, **kw)
    return rb.R_p, rb.R_h


assert MAX_DISTANCE == 6
