"""The (delta, n) Markov model of the pool/honest race and its stationary law.

The chain is the embedded jump chain of block-generation events: every step
is one new block, found by the pool with probability ``alpha`` or by honest
miners with probability ``beta`` (split ``gamma``/``1 - gamma`` between the
private and public tips while a published fork is live).

Besides the target state, every transition carries three outcome tags that
the reward engine needs to follow individual blocks:

``resolves``
    ``"mp"`` when the step settles the contest in the pool's favor (all its
    withheld blocks are published and win), ``"honest"`` when the public
    branch wins and the pool abandons its branch.
``prefix``
    an honest block landed on the pool's published tip, so the published
    part of the private branch becomes the main chain and the contested
    public blocks go stale.
``reveal``
    the pool publishes its lowest withheld block against a fresh honest
    block, opening a race at a new fork point. (Publishing one more block
    to keep an existing race level is not tagged.)

Levels ``delta >= delta_max`` are aggregated into a single tail state
``(delta_max, n)``. Above lead two the lead performs a plain +1/-1 random
walk, so the stationary masses of the aggregated levels form a geometric
sequence with ratio ``alpha / beta``; the tail therefore keeps a fraction
``alpha / beta`` of the honest probability and leaks the rest to level
``delta_max - 1``. The stationary law of every state below the tail is then
exact rather than approximate. When ``alpha >= beta`` the geometric series
diverges and the tail falls back to a plain self-loop.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

from .domain import (
    CONSENSUS,
    EQUAL_FORK,
    TRAIL,
    TRAIL_EQUAL,
    MiningParams,
    ParameterError,
    StrategyFlags,
    SystemState,
)

DEFAULT_DELTA_MAX = 40
DEFAULT_TOL = 1e-12
MAX_ITERATIONS = 1_000_000


class NonConvergence(RuntimeError):
    """The stationary solve did not reach the requested residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ReducibleChain(RuntimeError):
    def __init__(self, states: Sequence[SystemState]):
        names = ", ".join(str(s) for s in states)
        super().__init__(f"chain is reducible; states outside the recurrent class: {names}")
        self.states = list(states)


class Event(enum.Enum):
    MP_MINES = "MP_MINES"
    HONEST_MINES_PUBLIC = "HONEST_MINES_PUBLIC"
    HONEST_MINES_PRIVATE = "HONEST_MINES_PRIVATE"

    @property
    def is_honest(self) -> bool:
        return self is not Event.MP_MINES


@dataclass(frozen=True)
class Transition:
    target: SystemState
    probability: float
    event: Event
    resolves: Optional[str] = None
    prefix: bool = False
    reveal: bool = False


@dataclass
class TransitionSystem:
    flags: StrategyFlags
    params: MiningParams
    delta_max: int
    states: List[SystemState]
    transitions: Dict[SystemState, List[Transition]]
    tail_exact: bool
    index: Dict[SystemState, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.index = {s: i for i, s in enumerate(self.states)}

    def __len__(self) -> int:
        return len(self.states)

    def is_tail(self, state: SystemState) -> bool:
        return state.delta == self.delta_max

    def unpublished(self, state: SystemState) -> Optional[int]:
        """Withheld pool blocks in ``state``, or None when it is irrelevant.

        None means the fate of every pool block on the private branch is the
        fate of the branch itself (trailing states, and lead >= 2 for a
        pool that overrides, which always wins).
        """
        f = self.flags
        if state.is_trail:
            return None
        if state == EQUAL_FORK:
            return 0
        if state.delta == 0:
            return 0
        if self.is_tail(state):
            return None
        if state.n == 1 and state.delta >= 2 and f.s0l:
            return None
        return state.delta

    def matrix(self) -> sp.csr_matrix:
        n = len(self.states)
        rows, cols, vals = [], [], []
        for i, s in enumerate(self.states):
            for t in self.transitions[s]:
                rows.append(i)
                cols.append(self.index[t.target])
                vals.append(t.probability)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def dump(self) -> str:
        """Sorted line-oriented text form: ``state event probability target``."""
        lines = []
        for s in sorted(self.states):
            for t in sorted(self.transitions[s], key=lambda t: (t.event.value, t.target, t.probability)):
                tags = []
                if t.resolves:
                    tags.append(f"resolves={t.resolves}")
                if t.prefix:
                    tags.append("prefix")
                if t.reveal:
                    tags.append("reveal")
                lines.append(
                    f"{s}\t{t.event.value}\t{t.probability:.17g}\t{t.target}\t{','.join(tags) or '-'}"
                )
        return "\n".join(lines) + "\n"


def _honest_events(state: SystemState, params: MiningParams) -> List[Tuple[Event, float]]:
    if state.n == 2:
        return [
            (Event.HONEST_MINES_PRIVATE, params.p_beta_p),
            (Event.HONEST_MINES_PUBLIC, params.p_beta_h),
        ]
    return [(Event.HONEST_MINES_PUBLIC, params.p_beta)]


def _lead_after_honest(delta: int, new_race: bool, f: StrategyFlags, prefix: bool) -> Transition:
    """Pool reaction once honest miners cut its lead to ``delta`` >= 1.

    The selfish reaction either wins outright (lead one) or publishes just
    enough to stay ahead and leave the honest block orphaned (lead two and
    more). A lead-stubborn pool instead publishes a single block, so a race
    stays live; ``new_race`` says whether that block opens a new fork.
    """
    if f.s0l:
        if delta == 1:
            return Transition(CONSENSUS, 0.0, Event.MP_MINES, resolves="mp", prefix=prefix)
        return Transition(SystemState(delta, 1), 0.0, Event.MP_MINES, prefix=prefix)
    return Transition(SystemState(delta, 2), 0.0, Event.MP_MINES, prefix=prefix, reveal=new_race)


def _successors(s: SystemState, f: StrategyFlags, p: MiningParams) -> List[Transition]:
    """One-step moves of the untruncated chain (targets may exceed delta_max)."""
    a = p.p_alpha
    out: List[Transition] = []

    def add(target, prob, event, resolves=None, prefix=False, reveal=False):
        out.append(Transition(target, prob, event, resolves, prefix, reveal))

    if s == CONSENSUS:
        add(SystemState(1, 1), a, Event.MP_MINES)
        add(CONSENSUS, p.p_beta, Event.HONEST_MINES_PUBLIC, resolves="honest")
        return out

    if s == EQUAL_FORK:
        # pool extends its own published block: publish and win, or hide it
        if f.s0e:
            add(CONSENSUS, a, Event.MP_MINES, resolves="mp")
        else:
            add(SystemState(1, 2), a, Event.MP_MINES)
        # honest block on the pool's branch settles the fork; the new block
        # is the common tip, so it is already on the main chain
        add(CONSENSUS, p.p_beta_p, Event.HONEST_MINES_PRIVATE, resolves="honest", prefix=True)
        # honest block on the public branch: adopt it, or keep mining one behind
        if f.s0t:
            add(CONSENSUS, p.p_beta_h, Event.HONEST_MINES_PUBLIC, resolves="honest")
        else:
            add(TRAIL, p.p_beta_h, Event.HONEST_MINES_PUBLIC)
        return out

    if s == TRAIL:
        add(TRAIL_EQUAL, a, Event.MP_MINES)
        add(CONSENSUS, p.p_beta, Event.HONEST_MINES_PUBLIC, resolves="honest")
        return out

    if s == TRAIL_EQUAL:
        # caught up while trailing: the new block is published and wins
        add(CONSENSUS, a, Event.MP_MINES, resolves="mp")
        add(TRAIL, p.p_beta, Event.HONEST_MINES_PUBLIC)
        return out

    d, n = s.delta, s.n
    add(SystemState(d + 1, n), a, Event.MP_MINES)

    if n == 1:
        if d == 1:
            # lead of one is matched: publish it, start a fork race
            add(EQUAL_FORK, p.p_beta, Event.HONEST_MINES_PUBLIC, reveal=True)
            return out
        t = _lead_after_honest(d - 1, True, f, prefix=False)
        add(t.target, p.p_beta, Event.HONEST_MINES_PUBLIC, t.resolves, False, t.reveal)
        return out

    # n == 2: a race is live on top of ``d`` withheld blocks
    if d == 1:
        # honest block on the pool's published tip: that prefix wins and the
        # single withheld block is published against the new block
        add(EQUAL_FORK, p.p_beta_p, Event.HONEST_MINES_PRIVATE, prefix=True, reveal=True)
        # honest block on the public tip: publish the withheld block to tie
        add(EQUAL_FORK, p.p_beta_h, Event.HONEST_MINES_PUBLIC)
        return out
    t = _lead_after_honest(d - 1, True, f, prefix=True)
    add(t.target, p.p_beta_p, Event.HONEST_MINES_PRIVATE, t.resolves, True, t.reveal)
    t = _lead_after_honest(d - 1, False, f, prefix=False)
    add(t.target, p.p_beta_h, Event.HONEST_MINES_PUBLIC, t.resolves, False, t.reveal)
    return out


def build_transitions(
    flags: StrategyFlags, params: MiningParams, delta_max: int = DEFAULT_DELTA_MAX
) -> TransitionSystem:
    """Enumerate the reachable states and their outgoing transitions."""
    if flags.is_honest:
        raise ParameterError("the honest strategy has no withholding chain; its revenue is alpha")
    if int(delta_max) != delta_max or delta_max < 4:
        raise ParameterError(f"delta_max must be an integer >= 4, got {delta_max}")
    delta_max = int(delta_max)
    a, b = params.p_alpha, params.p_beta
    tail_exact = a < b
    ratio = a / b if tail_exact else 1.0
    tail_n = 1 if flags.s0l else 2
    tail = SystemState(delta_max, tail_n)

    def close(t: Transition) -> List[Transition]:
        return [t] if t.target.delta < delta_max else [
            Transition(tail, t.probability, t.event, t.resolves, t.prefix, t.reveal)
        ]

    def tail_moves() -> List[Transition]:
        moves = [Transition(tail, a, Event.MP_MINES)]
        for event, prob in _honest_events(tail, params):
            prefix = event is Event.HONEST_MINES_PRIVATE
            exit_t = _lead_after_honest(delta_max - 1, prefix, flags, prefix)
            stay = prob * ratio if tail_exact else 0.0
            moves.append(Transition(tail, stay, event, None, prefix, exit_t.reveal))
            moves.append(Transition(exit_t.target, prob - stay, event, None, prefix, exit_t.reveal))
        return moves

    states: List[SystemState] = []
    transitions: Dict[SystemState, List[Transition]] = {}
    queue = deque([CONSENSUS])
    seen = {CONSENSUS}
    while queue:
        s = queue.popleft()
        states.append(s)
        raw = tail_moves() if s == tail else [c for t in _successors(s, flags, params) for c in close(t)]
        moves = [t for t in raw if t.probability > 0.0]
        transitions[s] = moves
        for t in moves:
            if t.target not in seen:
                seen.add(t.target)
                queue.append(t.target)

    for s in states:
        total = sum(t.probability for t in transitions[s])
        if abs(total - 1.0) > 1e-12:
            raise AssertionError(f"row {s} sums to {total!r}")
    return TransitionSystem(flags, params, delta_max, states, transitions, tail_exact)


@dataclass
class StationaryDistribution:
    states: List[SystemState]
    vector: np.ndarray
    tail_mass: float
    residual: float
    tail_exact: bool = True
    method: str = "direct"
    system: Optional[TransitionSystem] = field(default=None, repr=False)

    @property
    def flagged(self) -> bool:
        """True when the truncated tail is an approximation and holds real mass."""
        return (not self.tail_exact) and self.tail_mass > DEFAULT_TOL

    @property
    def pi(self) -> Dict[SystemState, float]:
        return {s: float(v) for s, v in zip(self.states, self.vector)}

    def __getitem__(self, state: SystemState) -> float:
        return self.get(state)

    def get(self, state: SystemState, default: float = 0.0) -> float:
        try:
            return float(self.vector[self.states.index(state)])
        except ValueError:
            return default


def _stationary_of_matrix(P: sp.csr_matrix, tol: float) -> Tuple[np.ndarray, float, str]:
    n = P.shape[0]
    if n == 1:
        return np.ones(1), 0.0, "direct"
    A = (P.T - sp.identity(n, format="csr")).tolil()
    A[0, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[0] = 1.0
    pi = np.asarray(spsolve(A.tocsc(), rhs), dtype=float)
    res = float(np.abs(P.T @ pi - pi).sum()) if np.all(np.isfinite(pi)) else np.inf
    if res <= tol and pi.min() > -tol:
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
        return pi, float(np.abs(P.T @ pi - pi).sum()), "direct"

    # fall back to damped power iteration (laziness removes periodicity)
    PT = P.T.tocsr()
    pi = np.full(n, 1.0 / n)
    for it in range(MAX_ITERATIONS):
        nxt = 0.5 * (pi + PT @ pi)
        nxt /= nxt.sum()
        if it % 64 == 0:
            res = float(np.abs(PT @ nxt - nxt).sum())
            if res <= tol:
                return nxt, res, "power"
        pi = nxt
    res = float(np.abs(PT @ pi - pi).sum())
    raise NonConvergence("stationary solve hit the iteration cap", res)


def solve_stationary(ts: TransitionSystem, tol: float = DEFAULT_TOL) -> StationaryDistribution:
    """Stationary distribution of ``ts`` with residual ``|pi P - pi|_1 <= tol``."""
    if not tol > 0:
        raise ParameterError("tol must be positive")
    P = ts.matrix()
    ncomp, labels = csgraph.connected_components(P, directed=True, connection="strong")
    if ncomp > 1:
        home = labels[ts.index[CONSENSUS]]
        raise ReducibleChain([s for s, lab in zip(ts.states, labels) if lab != home])
    pi, res, method = _stationary_of_matrix(P, tol)
    tail = sum(pi[i] for i, s in enumerate(ts.states) if ts.is_tail(s))
    return StationaryDistribution(list(ts.states), pi, float(tail), res, ts.tail_exact, method, ts)


def stationary_from_matrix(P, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Stationary vector of an arbitrary irreducible row-stochastic matrix."""
    M = sp.csr_matrix(np.asarray(P, dtype=float) if not sp.issparse(P) else P)
    if not np.allclose(np.asarray(M.sum(axis=1)).ravel(), 1.0, atol=1e-12):
        raise ParameterError("matrix rows must sum to one")
    ncomp, _ = csgraph.connected_components(M, directed=True, connection="strong")
    if ncomp > 1:
        raise ParameterError("matrix is reducible")
    return _stationary_of_matrix(M, tol)[0]


def solve(flags: StrategyFlags, params: MiningParams, delta_max: int = DEFAULT_DELTA_MAX,
          tol: float = DEFAULT_TOL) -> Tuple[TransitionSystem, StationaryDistribution]:
    ts = build_transitions(flags, params, delta_max)
    return ts, solve_stationary(ts, tol)
