"""Look-ahead closed-form reward expressions.

These sum over the stationary distribution with per-state look-ahead
probabilities instead of tracking every block's fate. They agree with the
exact engine in :mod:`stubborn_mining.rewards` for strategies without lead
or equal-fork stubbornness (SM, T-s) and drift from it otherwise; the uncle
expressions are coarser still. They are kept as a reference and for
cross-checks, never as the source of reported numbers.

The state ``(0', 1)`` used below is the trail-equal state ``(0'', 1)`` of
:mod:`stubborn_mining.domain`, and ``(0, 2)`` is read as the equal fork.
"""

from __future__ import annotations

from typing import Callable, Mapping

from .domain import CONSENSUS, EQUAL_FORK, TRAIL, TRAIL_EQUAL, MiningParams, StrategyFlags, SystemState
from .rewards import aux_probs
from .uncles import uncle_reward_fn

Pi = Mapping[SystemState, float]
TERMS = 200  # f_u vanishes past distance 6, so at most 5 terms ever count


def _leads(pi: Pi, n: int):
    return sorted((s.delta, w) for s, w in pi.items() if s.mark == 0 and s.delta >= 1 and s.n == n)


def _get(pi: Pi, s: SystemState) -> float:
    return float(pi.get(s, 0.0))


def _lead(pi: Pi, delta: int, n: int) -> float:
    return _get(pi, SystemState(delta, n))


def mp_static(flags: StrategyFlags, params: MiningParams, pi: Pi) -> float:
    f = flags
    a = aux_probs(flags, params)
    pa, pb, pbp, pbh = params.p_alpha, params.p_beta, params.p_beta_p, params.p_beta_h
    out = pa * (f.s0e + f.se * a.p_e) * _get(pi, EQUAL_FORK)
    for delta, w in _leads(pi, 1) + _leads(pi, 2):
        out += pa * (f.s0l + f.sl * (1.0 - a.p_ls(delta + 1))) * w
    out += pa * _get(pi, CONSENSUS) * (
        pa * (f.s0l + f.sl * (1.0 - a.p_ls(2))) + pb * pbp
        + pa * pb * (f.s0e + f.se * a.p_e) + f.st * pa * pb * pbh * a.p_t1
    )
    out += f.st * (pa * _get(pi, TRAIL_EQUAL) + pa * a.p_t1 * _get(pi, TRAIL))
    return out


def honest_static(flags: StrategyFlags, params: MiningParams, pi: Pi) -> float:
    f = flags
    a = aux_probs(flags, params)
    pb, pbh, g = params.p_beta, params.p_beta_h, params.gamma
    out = pb * _get(pi, CONSENSUS) + f.st * pb * (_get(pi, TRAIL) + a.p_t2 * _get(pi, TRAIL_EQUAL))
    out += pb * (f.s0t + f.st * (g + (1.0 - g) * a.p_t2)) * _get(pi, EQUAL_FORK)
    out += pb * pbh * a.p_t2 * (_lead(pi, 1, 1) + _lead(pi, 1, 2)) / (f.s0e + f.se * a.p_le)
    for delta, w in _leads(pi, 1) + _leads(pi, 2):
        if delta >= 2:
            out += f.sl * pb * pbh ** delta * a.p_t2 * w / a.p_le
    return out


def mp_uncle(flags: StrategyFlags, params: MiningParams, pi: Pi,
             reward_fn: Callable[[int], float] = uncle_reward_fn) -> float:
    f = flags
    a = aux_probs(flags, params)
    pa, pb, pbh = params.p_alpha, params.p_beta, params.p_beta_h
    f1 = reward_fn(1)
    out = pa * (pb * pbh + f.sle * pa * pb * pbh ** 2 / a.p_le) * f1 * a.p_t2 * _get(pi, CONSENSUS)
    out += f.se * pa * pb * pbh * a.p_t2 * f1 * _get(pi, EQUAL_FORK) / a.p_le
    for delta, w in _leads(pi, 1) + _leads(pi, 2):
        out += f.sl * pa * pb ** (delta + 1) * pbh * a.p_t2 * f1 * w / a.p_le
    return out


def _h(i: int, pbh: float, pbp: float) -> float:
    return pbh ** i + pbh ** max(0, i - 1) * pbp


def _p_uhl(delta: int, d: int, params: MiningParams, p_le: float) -> float:
    pbh, pbp = params.p_beta_h, params.p_beta_p
    if d == 1:
        return pbh ** (delta - 1) * pbp / p_le
    # the free exponent index is taken to be the reference distance
    return params.alpha ** max(d - delta, 0) * pbh ** (max(delta - 1, d - 1) - 1) * pbp * pbp / p_le


def honest_uncle(flags: StrategyFlags, params: MiningParams, pi: Pi,
                 reward_fn: Callable[[int], float] = uncle_reward_fn, terms: int = TERMS) -> float:
    f = flags
    a = aux_probs(flags, params)
    pa, pb, pbp, pbh = params.p_alpha, params.p_beta, params.p_beta_p, params.p_beta_h
    den = f.s0e + f.se * a.p_le
    out = pb * pbh * reward_fn(1) * (_lead(pi, 1, 1) + _lead(pi, 1, 2))
    for n, lead_p in ((1, pb), (2, pbp)):
        for delta, w in _leads(pi, n):
            if delta < 2:
                continue
            look = sum((pa * pbh) ** t * (pb + pa * pbh * pb * a.p_t2 / den) * reward_fn(delta + t)
                       for t in range(min(terms, 7 - delta)))
            term = look * lead_p * f.s0l * _h(delta - 2, pbh, pbp)
            term += lead_p * f.sl * sum(_p_uhl(delta, d, params, a.p_le) * a.p_t2 * reward_fn(d)
                                        for d in range(1, 7))
            out += term * w
    return out


def selfish_mining_revenue(alpha: float, gamma: float) -> float:
    """Classic selfish-mining relative revenue for a pool of share ``alpha``."""
    a, g = alpha, gamma
    num = a * (1 - a) ** 2 * (4 * a + g * (1 - 2 * a)) - a ** 3
    return num / (1 - a * (1 + (2 - a) * a))
