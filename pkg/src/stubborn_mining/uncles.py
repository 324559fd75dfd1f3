"""Exact uncle and nephew accounting for Ethereum-style reward rules.

The ``(delta, n)`` chain does not remember which stale blocks are still
eligible as uncles, so it is augmented with the few facts that matter:

``h``
    public branch length above the fork point, capped at 7 (beyond that the
    first block of the branch is too old to be an uncle);
``fork_open``
    eligible stale blocks hanging off the settled chain, i.e. candidates for
    a nephew that sits on the pool's published branch;
``pub_open``
    the same for a nephew on the public tip: ``fork_open`` minus whatever the
    public branch already referenced, plus the pool's revealed first block.

Candidates are ``(age, owner)`` pairs where ``age`` is the height gap to the
public tip, so a nephew mined on that tip sees the uncle at distance
``age + 1``. Honest nephews reference the two oldest candidates; the pool
never references. Rewards are credited when the nephew is mined, weighted
by the probability that the nephew ends up on the main chain.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np
import scipy.sparse as sp

from .domain import SystemState
from .fates import honest_block_fate, public_win
from .markov import Event, TransitionSystem, _stationary_of_matrix

HONEST_OWNER, MP_OWNER = 0, 1
MAX_DISTANCE = 6
MAX_AGE = MAX_DISTANCE - 1
H_CAP = MAX_DISTANCE + 1

Cands = Tuple[Tuple[int, int], ...]


def _norm(items) -> Cands:
    kept = sorted((c for c in items if c[0] <= MAX_AGE), reverse=True)
    ages = [c[0] for c in kept]
    if len(set(ages)) != len(ages):
        raise AssertionError(f"two uncle candidates share a height: {kept}")
    return tuple(kept)


def _shift(c: Cands, by: int) -> Cands:
    return _norm((age + by, own) for age, own in c)


@dataclass(frozen=True)
class Aux:
    h: int
    fork_open: Cands
    pub_open: Cands

    def first_honest(self) -> Cands:
        return ((self.h - 1, HONEST_OWNER),) if self.h >= 1 else ()


EMPTY = Aux(0, (), ())


def _honest_win(x: Aux) -> Aux:
    return Aux(0, x.pub_open, x.pub_open)


def _mp_win(x: Aux, shift: int) -> Aux:
    c = _shift(_norm(x.fork_open + x.first_honest()), shift)
    return Aux(0, c, c)


def _reveal(x: Aux) -> Aux:
    return Aux(x.h, x.fork_open, _norm(x.pub_open + ((x.h - 1, MP_OWNER),)))


@dataclass
class UncleTotals:
    """Long-run rates per block-generation event."""

    mp_uncle: float
    honest_uncle: float
    uncle_count: float
    nephew_count: float
    marginal: Dict[SystemState, float]
    n_states: int


def uncle_reward_fn(d: int) -> float:
    """Reward (in static-block units) for an uncle at reference distance ``d``."""
    return d / 8.0 if 1 <= d <= MAX_DISTANCE else 0.0


def unit_reward_fn(d: int) -> float:
    return 1.0 if 1 <= d <= MAX_DISTANCE else 0.0


def uncle_rates(ts: TransitionSystem, tol: float = 1e-12,
                reward_fn: Callable[[int], float] = uncle_reward_fn) -> UncleTotals:
    """Solve the augmented chain and accumulate uncle/nephew credits."""
    g = public_win(ts)
    key_index: Dict[Tuple[SystemState, Aux], int] = {}
    keys: List[Tuple[SystemState, Aux]] = []
    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    # per augmented state: expected (mp uncle reward, honest uncle reward, uncles, nephews)
    credit: List[np.ndarray] = []

    def intern(k) -> int:
        i = key_index.get(k)
        if i is None:
            i = len(keys)
            key_index[k] = i
            keys.append(k)
            queue.append(k)
        return i

    queue: deque = deque()
    start = (ts.states[0], EMPTY)
    intern(start)
    while queue:
        s, x = queue.popleft()
        i = key_index[(s, x)]
        cr = np.zeros(4)
        for t in ts.transitions[s]:
            p = t.probability
            if t.event is Event.MP_MINES:
                if t.resolves == "mp":
                    # the new block is one above an equal-length contest
                    nx = _mp_win(x, 1)
                else:
                    nx = x
            else:
                fate = honest_block_fate(t, g)
                if t.event is Event.HONEST_MINES_PRIVATE:
                    pool = _norm(x.fork_open + x.first_honest())
                    refs, rest = pool[:2], pool[2:]
                    nx = Aux(1, _shift(pool, 1), _shift(rest, 1))
                else:
                    refs, rest = x.pub_open[:2], x.pub_open[2:]
                    nx = Aux(min(x.h + 1, H_CAP), _shift(x.fork_open, 1), _shift(rest, 1))
                if fate > 0.0 and refs:
                    w = p * fate
                    for age, own in refs:
                        r = reward_fn(age + 1)
                        cr[1 if own == HONEST_OWNER else 0] += w * r
                    cr[2] += w * len(refs)
                    cr[3] += w * len(refs)
                # pool reaction
                if t.resolves == "honest":
                    nx = _honest_win(nx)
                elif t.resolves == "mp":
                    # the whole withheld branch lands one above the honest tip
                    nx = _mp_win(nx, s.delta - 1)
                elif t.reveal:
                    nx = _reveal(nx)
            j = intern((t.target, nx))
            rows.append(i)
            cols.append(j)
            vals.append(p)
        credit.append(cr)

    n = len(keys)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    pi, _, _ = _stationary_of_matrix(P, tol)
    tot = np.maximum(pi @ np.vstack(credit), 0.0)  # clip solver roundoff
    marginal: Dict[SystemState, float] = {}
    for w, (s, _) in zip(pi, keys):
        marginal[s] = marginal.get(s, 0.0) + float(w)
    return UncleTotals(float(tot[0]), float(tot[1]), float(tot[2]), float(tot[3]), marginal, n)
