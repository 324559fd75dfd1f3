"""Eventual fate of individual blocks, computed from the tagged transitions.

A block's reward is decided long after it is mined, when its race settles.
Instead of carrying block counts in the state, we ask for each newly mined
block the probability that it ends on the main chain. Summing those
probabilities against the stationary law gives the long-run number of
regular blocks per event for each miner class.

``public_win`` is the probability that the currently contested public
blocks win. Pool blocks are followed in a small product chain ``(state, j)``
where ``j`` counts pool blocks mined on top of the tagged one; the tagged
block is published as soon as ``j`` reaches the number of withheld blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .domain import SystemState
from .markov import Event, Transition, TransitionSystem

PUB = -1


def _solve(rows, cols, vals, rhs, n) -> np.ndarray:
    A = sp.identity(n, format="csr") - sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return np.asarray(spsolve(A.tocsc(), np.asarray(rhs, dtype=float)), dtype=float).reshape(n)


def public_win(ts: TransitionSystem) -> Dict[SystemState, float]:
    """Probability that the public side of the current contest prevails."""
    idx = ts.index
    n = len(ts.states)
    rows, cols, vals, rhs = [], [], [], np.zeros(n)
    for i, s in enumerate(ts.states):
        for t in ts.transitions[s]:
            if t.prefix or t.resolves == "mp":
                continue
            if t.resolves == "honest":
                rhs[i] += t.probability
                continue
            rows.append(i)
            cols.append(idx[t.target])
            vals.append(t.probability)
    g = _solve(rows, cols, vals, rhs, n)
    return {s: float(g[i]) for i, s in enumerate(ts.states)}


def honest_block_fate(t: Transition, g: Dict[SystemState, float]) -> float:
    """Probability that the honest block created by ``t`` ends up regular."""
    if t.resolves == "honest":
        return 1.0
    if t.resolves == "mp":
        return 0.0
    return g[t.target]


@dataclass
class PoolFate:
    """Value table of the tagged pool-block chain."""

    ts: TransitionSystem
    g: Dict[SystemState, float]
    values: Dict[Tuple[SystemState, int], float]

    def at(self, state: SystemState, j: int) -> float:
        u = self.ts.unpublished(state)
        if u is None:
            return 1.0 - self.g[state]
        if j == PUB or j >= u:
            return self.values[(state, PUB)]
        return self.values[(state, j)]

    def new_block(self, t: Transition) -> float:
        """Fate of the pool block created by the ``MP_MINES`` transition ``t``."""
        if t.resolves == "mp":
            return 1.0
        if t.resolves == "honest":
            return 0.0
        return self.at(t.target, 0)


def pool_fate(ts: TransitionSystem, g: Optional[Dict[SystemState, float]] = None) -> PoolFate:
    g = public_win(ts) if g is None else g
    keys: List[Tuple[SystemState, int]] = []
    for s in ts.states:
        u = ts.unpublished(s)
        if u is None:
            continue
        keys.extend((s, j) for j in range(u))
        keys.append((s, PUB))
    kidx = {k: i for i, k in enumerate(keys)}
    n = len(keys)
    rows, cols, vals, rhs = [], [], [], np.zeros(n)
    for i, (s, j) in enumerate(keys):
        for t in ts.transitions[s]:
            p = t.probability
            if t.prefix and j == PUB:
                rhs[i] += p
                continue
            if t.resolves == "mp":
                rhs[i] += p
                continue
            if t.resolves == "honest":
                continue
            nj = j if j == PUB or t.event is not Event.MP_MINES else j + 1
            u = ts.unpublished(t.target)
            if u is None:
                rhs[i] += p * (1.0 - g[t.target])
                continue
            if nj != PUB and nj >= u:
                nj = PUB
            rows.append(i)
            cols.append(kidx[(t.target, nj)])
            vals.append(p)
    v = _solve(rows, cols, vals, rhs, n) if n else np.zeros(0)
    return PoolFate(ts, g, {k: float(v[i]) for i, k in enumerate(keys)})


def regular_block_rates(ts: TransitionSystem, pi_vector: np.ndarray) -> Tuple[float, float]:
    """Long-run regular pool and honest blocks per block-generation event."""
    g = public_win(ts)
    pf = pool_fate(ts, g)
    r_p = r_h = 0.0
    for w, s in zip(pi_vector, ts.states):
        for t in ts.transitions[s]:
            if t.event is Event.MP_MINES:
                r_p += w * t.probability * pf.new_block(t)
            else:
                r_h += w * t.probability * honest_block_fate(t, g)
    # solver roundoff can leave a vanishing negative where the true rate is 0
    return max(float(r_p), 0.0), max(float(r_h), 0.0)
