from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Union

import numpy as np

from ..domain import (
    CONSENSUS,
    EQUAL_FORK,
    HONEST,
    TRAIL,
    TRAIL_EQUAL,
    ChainConfig,
    MiningParams,
    ParameterError,
    StrategyFlags,
    SystemState,
)
from . import _kernel_py as K

MIN_EVENTS = 10_000
DEFAULT_BATCHES = 100
DEFAULT_OCC_CAP = 40


class Ev(enum.IntEnum):
    MP = K.EV_MP
    HONEST_PUBLIC = K.EV_PUBLIC
    HONEST_PRIVATE = K.EV_PRIVATE


_EV_NAMES = {
    "MP": Ev.MP,
    "MP_MINES": Ev.MP,
    "H": Ev.HONEST_PUBLIC,
    "HONEST": Ev.HONEST_PUBLIC,
    "HONEST_PUBLIC": Ev.HONEST_PUBLIC,
    "HONEST_MINES_PUBLIC": Ev.HONEST_PUBLIC,
    "H_PUB": Ev.HONEST_PUBLIC,
    "HP": Ev.HONEST_PRIVATE,
    "H_PRIV": Ev.HONEST_PRIVATE,
    "HONEST_PRIVATE": Ev.HONEST_PRIVATE,
    "HONEST_MINES_PRIVATE": Ev.HONEST_PRIVATE,
}


def event_codes(script: Iterable[Union[str, int, Ev]]) -> np.ndarray:
    out = []
    for e in script:
        if isinstance(e, str):
            key = e.strip().upper().replace("-", "_")
            if key not in _EV_NAMES:
                raise ParameterError(f"unknown event {e!r}; use MP, HONEST_PUBLIC or HONEST_PRIVATE")
            out.append(int(_EV_NAMES[key]))
        else:
            out.append(int(Ev(int(e))))
    return np.asarray(out, dtype=np.int8)


def occupancy_state(code: int, occ_cap: int) -> SystemState:
    if code == K.OCC_CONSENSUS:
        return CONSENSUS
    if code == K.OCC_EQUAL_FORK:
        return EQUAL_FORK
    if code == K.OCC_TRAIL:
        return TRAIL
    if code == K.OCC_TRAIL_EQUAL:
        return TRAIL_EQUAL
    lead, race = divmod(code - 4, 2)
    if lead + 1 > occ_cap:
        raise ParameterError(f"occupancy code {code} beyond cap {occ_cap}")
    return SystemState(lead + 1, 2 if race else 1)


@dataclass(frozen=True)
class SimConfig:
    flags: StrategyFlags
    params: MiningParams
    chain: ChainConfig = field(default_factory=ChainConfig.btc)
    events: int = 1_000_000
    seed: int = 0
    batches: int = DEFAULT_BATCHES
    occ_cap: int = DEFAULT_OCC_CAP

    def __post_init__(self) -> None:
        if self.events < MIN_EVENTS:
            raise ParameterError(f"events must be >= {MIN_EVENTS}")
        if not 2 <= self.batches <= self.events:
            raise ParameterError("batches must lie in [2, events]")
        if self.occ_cap < 2:
            raise ParameterError("occ_cap must be >= 2")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Tally:
    mean: float
    se: float

    def z(self, expected: float) -> float:
        if self.se == 0.0:
            return 0.0 if self.mean == expected else float("inf")
        return (self.mean - expected) / self.se


def _batch_tally(counts: np.ndarray, sizes: np.ndarray, scale: float = 1.0) -> Tally:
    total_events = sizes.sum()
    if total_events == 0:
        return Tally(0.0, 0.0)
    mean = float(counts.sum()) * scale / float(total_events)
    if len(sizes) < 2:
        return Tally(mean, 0.0)
    rates = counts * scale / sizes
    se = float(np.std(rates, ddof=1) / np.sqrt(len(rates)))
    return Tally(mean, se)


@dataclass
class SimReport:
    """Per-event tallies of one simulation run (rewards in static-block units)."""

    events: int
    chain: str
    mp_static: Tally
    honest_static: Tally
    mp_uncle: Tally
    honest_uncle: Tally
    honest_nephew: Tally
    stale_frequency: Tally
    uncle_frequency: Tally
    occupancy: Dict[SystemState, Tally]
    counts: Dict[str, int]
    kernel: str = "python"
    occupancy_batches: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    batch_sizes: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    occ_cap: int = DEFAULT_OCC_CAP

    @property
    def mp_revenue(self) -> float:
        return self.mp_static.mean + self.mp_uncle.mean

    @property
    def honest_revenue(self) -> float:
        return self.honest_static.mean + self.honest_uncle.mean + self.honest_nephew.mean

    @property
    def mp_share(self) -> float:
        total = self.mp_revenue + self.honest_revenue
        return self.mp_revenue / total if total > 0 else 0.0

    def occupancy_rest(self, keep: Iterable[SystemState]) -> Tally:
        """Pooled occupancy of every state not in ``keep``."""
        keep = set(keep)
        cols = [c for c in range(self.occupancy_batches.shape[1])
                if occupancy_state(c, self.occ_cap) not in keep]
        counts = self.occupancy_batches[:, cols].sum(axis=1).astype(float)
        return _batch_tally(counts, self.batch_sizes)

    def record(self) -> Dict[str, float]:
        """Flat key/value view used by serializers."""
        rec: Dict[str, float] = {"events": self.events, "chain": self.chain}
        for name in ("mp_static", "honest_static", "mp_uncle", "honest_uncle", "honest_nephew",
                     "stale_frequency", "uncle_frequency"):
            t: Tally = getattr(self, name)
            rec[name] = t.mean
            rec[name + "_se"] = t.se
        rec["mp_share"] = self.mp_share
        return rec


_COUNT_NAMES = ("mp_regular", "honest_regular", "stale", "uncles", "uncle_distance_mp",
                "uncle_distance_honest", "nephews", "uncles_mp")


def _report(tallies, occ, sizes, chain: ChainConfig, occ_cap: int, kernel: str) -> SimReport:
    sizes = np.asarray(sizes, dtype=float)
    eth = chain.has_uncles
    nephew = chain.nephew_reward
    col = lambda c: tallies[:, c].astype(float)  # noqa: E731
    zero = Tally(0.0, 0.0)
    occupancy = {}
    for code in range(occ.shape[1]):
        if occ[:, code].sum() > 0:
            occupancy[occupancy_state(code, occ_cap)] = _batch_tally(occ[:, code].astype(float), sizes)
    den = chain.uncle_reward_denominator
    if chain.uncle_schedule == "distance":
        mp_u, h_u = col(K.T_UNCLE8_MP), col(K.T_UNCLE8_H)
    else:
        # sum of (den - d) over uncles = den * count - sum of d
        mp_u = den * col(K.T_UNCLES_MP) - col(K.T_UNCLE8_MP)
        h_u = den * (col(K.T_UNCLES) - col(K.T_UNCLES_MP)) - col(K.T_UNCLE8_H)
    return SimReport(
        events=int(sizes.sum()),
        chain=chain.chain,
        mp_static=_batch_tally(col(K.T_MP_REG), sizes),
        honest_static=_batch_tally(col(K.T_H_REG), sizes),
        mp_uncle=_batch_tally(mp_u, sizes, 1.0 / den) if eth else zero,
        honest_uncle=_batch_tally(h_u, sizes, 1.0 / den) if eth else zero,
        honest_nephew=_batch_tally(col(K.T_NEPHEWS), sizes, nephew) if eth else zero,
        stale_frequency=_batch_tally(col(K.T_STALE), sizes),
        uncle_frequency=_batch_tally(col(K.T_UNCLES), sizes) if eth else zero,
        occupancy=occupancy,
        counts={name: int(tallies[:, i].sum()) for i, name in enumerate(_COUNT_NAMES)},
        kernel=kernel,
        occupancy_batches=occ,
        batch_sizes=sizes,
        occ_cap=occ_cap,
    )


def draw_events(params: MiningParams, n: int, seed: int) -> np.ndarray:
    """One uniform per event: pool, honest-on-pool-tip (if a race is live), honest."""
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    u = rng.random(n)
    a = params.p_alpha
    ev = np.full(n, K.EV_PUBLIC, dtype=np.int8)
    ev[u < a + params.p_beta_p] = K.EV_PRIVATE
    ev[u < a] = K.EV_MP
    return ev


def _flag_tuple(flags: StrategyFlags):
    return np.asarray([flags.s0l, flags.s0e, flags.s0t, flags.sl, flags.se, flags.st], dtype=np.int64)


def simulate(config: SimConfig, kernel=None) -> SimReport:
    """Run ``config.events`` random block-generation events."""
    from . import KERNEL, run_kernel

    fn = run_kernel if kernel is None else kernel
    name = KERNEL if kernel is None else getattr(kernel, "__module__", "custom")
    ev = draw_events(config.params, config.events, config.seed)
    bs = config.events // config.batches
    tallies, occ, status = fn(ev, _flag_tuple(config.flags), int(config.flags.is_honest), 0, 0,
                              bs, config.batches, config.occ_cap)
    if status != 0:
        raise RuntimeError("kernel rejected a random event sequence")
    sizes = np.full(config.batches, bs)
    sizes[-1] += config.events - bs * config.batches
    return _report(np.asarray(tallies), np.asarray(occ), sizes, config.chain, config.occ_cap, name)


def replay(script: Sequence[Union[str, int, Ev]], flags: StrategyFlags = HONEST,
           chain: Optional[ChainConfig] = None, settle: bool = True, kernel=None) -> SimReport:
    """Deterministically evolve the ledger through a scripted event list.

    With ``settle`` the contest still open at the end is decided in favor of
    the longer branch (an exact tie stays unresolved and is not counted).
    Tallies are per scripted event; ``counts`` holds the raw block counts.
    """
    from . import KERNEL, run_kernel

    fn = run_kernel if kernel is None else kernel
    chain = ChainConfig.btc() if chain is None else chain
    ev = event_codes(script)
    n = len(ev)
    tallies, occ, status = fn(ev, _flag_tuple(flags), int(flags.is_honest), 1, int(settle),
                              max(n, 1), 1, DEFAULT_OCC_CAP)
    if status < 0:
        raise ParameterError(f"event {-status - 1} lands on the pool's tip but no race is live")
    return _report(np.asarray(tallies), np.asarray(occ), np.array([n]), chain, DEFAULT_OCC_CAP,
                   KERNEL if kernel is None else "custom")
