"""Shared value types: strategies, mining parameters, chain constants, states.

Every type here is an immutable value, so instances can be shared freely
between worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple


class ParameterError(ValueError):
    """An input lies outside the domain the model is defined on."""


@dataclass(frozen=True)
class StrategyFlags:
    """Binary coefficients selecting the malicious pool's behavior.

    ``s0l``/``sl``: at lead two (or more) when honest miners find a block,
    publish the whole private branch (selfish) or only enough to tie (lead
    stubborn). ``s0e``/``se``: at an equal-length published fork when the
    pool finds a block, publish and win (selfish) or keep it secret
    (equal-fork stubborn). ``s0t``/``st``: when honest miners extend the
    public side of such a fork, adopt it (selfish) or keep mining one block
    behind (trail stubborn).
    """

    name: str
    s0l: int
    s0e: int
    s0t: int
    sl: int
    se: int
    st: int

    def __post_init__(self) -> None:
        bits = (self.s0l, self.s0e, self.s0t, self.sl, self.se, self.st)
        if any(b not in (0, 1) for b in bits):
            raise ParameterError(f"strategy flags must be 0/1, got {bits}")
        if self.name == "HONEST":
            return
        for a, b, label in ((self.s0l, self.sl, "L"), (self.s0e, self.se, "E"), (self.s0t, self.st, "T")):
            if a + b != 1:
                raise ParameterError(f"flag pair {label} of {self.name} is not complementary")

    @property
    def sle(self) -> int:
        return 1 if (self.sl or self.se) else 0

    @property
    def is_honest(self) -> bool:
        return self.name == "HONEST"

    def as_tuple(self) -> Tuple[int, ...]:
        return (self.s0l, self.s0e, self.s0t, self.sl, self.se, self.st, self.sle)

    def __str__(self) -> str:
        return self.name


HONEST = StrategyFlags("HONEST", 0, 0, 0, 0, 0, 0)

_TABLE: Dict[str, Tuple[int, int, int, int, int, int]] = {
    "SM": (1, 1, 1, 0, 0, 0),
    "L-s": (0, 1, 1, 1, 0, 0),
    "F-s": (1, 0, 1, 0, 1, 0),
    "T-s": (1, 1, 0, 0, 0, 1),
    "LT-s": (0, 1, 0, 1, 0, 1),
    "LF-s": (0, 0, 1, 1, 1, 0),
    "TF-s": (1, 0, 0, 0, 1, 1),
    "LFT-s": (0, 0, 0, 1, 1, 1),
}

MALICIOUS_STRATEGIES: Tuple[str, ...] = tuple(_TABLE)
STRATEGY_NAMES: Tuple[str, ...] = ("HONEST",) + MALICIOUS_STRATEGIES

_ALIASES = {"FT-S": "TF-s", "LTF-S": "LFT-s", "FLT-S": "LFT-s"}


def canonical_name(name: str) -> str:
    key = name.strip().upper()
    if key in _ALIASES:
        return _ALIASES[key]
    for candidate in STRATEGY_NAMES:
        if candidate.upper() == key or candidate.upper() == key + "-S":
            return candidate
    raise ParameterError(
        f"unknown strategy {name!r}; valid names: {', '.join(STRATEGY_NAMES)}"
    )


def strategy_flags(name: str) -> StrategyFlags:
    """Look up the flag tuple for a strategy name (case-insensitive).

    >>> strategy_flags("L-s").as_tuple()
    (0, 1, 1, 1, 0, 0, 1)
    """
    canon = canonical_name(name)
    if canon == "HONEST":
        return HONEST
    return StrategyFlags(canon, *_TABLE[canon])


@dataclass(frozen=True)
class MiningParams:
    """Hash-power shares and the network-capacity ratio.

    ``gamma`` is the fraction of honest hash power that mines on the
    pool's branch during an equal-height published fork.
    """

    alpha: float
    gamma: float
    beta: float = field(init=False)

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha < 1.0 and 0.0 <= self.gamma <= 1.0):
            raise ParameterError(f"need 0 <= alpha < 1 and 0 <= gamma <= 1, got {self.alpha}, {self.gamma}")
        object.__setattr__(self, "beta", 1.0 - self.alpha)

    @property
    def p_alpha(self) -> float:
        return self.alpha

    @property
    def p_beta(self) -> float:
        return self.beta

    @property
    def p_beta_p(self) -> float:
        """Honest block lands on the pool's (private) branch tip."""
        return self.beta * self.gamma

    @property
    def p_beta_h(self) -> float:
        """Honest block lands on the public branch tip."""
        return self.beta * (1.0 - self.gamma)


def make_params(alpha: float, gamma: float = 0.5, *, allow_majority: bool = False) -> MiningParams:
    """Validate and build :class:`MiningParams`.

    ``alpha`` in [0.5, 1) is only accepted with ``allow_majority=True``;
    the analytical results are not meaningful there.
    """
    alpha = float(alpha)
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise ParameterError(f"gamma must lie in [0, 1], got {gamma}")
    if alpha < 0.0:
        raise ParameterError(f"alpha must be >= 0, got {alpha}")
    upper = 1.0 if allow_majority else 0.5
    if alpha >= upper:
        bound = "alpha < 1" if allow_majority else "alpha < 0.5 (pass allow_majority to override)"
        raise ParameterError(f"alpha={alpha} violates {bound}")
    return MiningParams(alpha, gamma)


UNCLE_SCHEDULES = ("distance", "protocol")


@dataclass(frozen=True)
class ChainConfig:
    """Per-chain constants used by the reward and throughput formulas."""

    chain: str
    tx_per_block: int = 2137
    block_time: float = 600.0
    confirmations: int = 6
    uncle_max_distance: int = 6
    uncle_reward_denominator: int = 8
    nephew_reward: float = 1.0 / 32.0
    uncle_schedule: str = "distance"

    def __post_init__(self) -> None:
        if self.uncle_schedule not in UNCLE_SCHEDULES:
            raise ParameterError(f"uncle_schedule must be one of {UNCLE_SCHEDULES}")
        if self.chain not in ("BTC", "ETH"):
            raise ParameterError(f"chain must be BTC or ETH, got {self.chain!r}")
        if self.confirmations < 1:
            raise ParameterError("confirmations must be >= 1")
        if self.block_time <= 0 or self.tx_per_block < 0:
            raise ParameterError("block_time must be > 0 and tx_per_block >= 0")

    @property
    def has_uncles(self) -> bool:
        return self.chain == "ETH"

    def uncle_reward(self, d: int) -> float:
        """Reward of an uncle referenced at distance ``d``.

        ``distance`` pays ``d/8``; ``protocol`` pays ``(8 - d)/8`` as the
        deployed Ethereum rules do. Both pay nothing beyond the window.
        """
        if not 1 <= d <= self.uncle_max_distance:
            return 0.0
        den = self.uncle_reward_denominator
        return d / den if self.uncle_schedule == "distance" else (den - d) / den

    @classmethod
    def btc(cls, **overrides) -> "ChainConfig":
        return cls("BTC", **overrides)

    @classmethod
    def eth(cls, **overrides) -> "ChainConfig":
        kw = {"confirmations": 12, "block_time": 13.0}
        kw.update(overrides)
        return cls("ETH", **kw)

    @classmethod
    def named(cls, chain: str, **overrides) -> "ChainConfig":
        key = chain.strip().upper()
        if key == "BTC":
            return cls.btc(**overrides)
        if key == "ETH":
            return cls.eth(**overrides)
        raise ParameterError(f"chain must be btc or eth, got {chain!r}")


PLAIN, EQUAL_FORK_MARK, TRAIL_EQUAL_MARK = 0, 1, 2


@dataclass(frozen=True, order=True)
class SystemState:
    """One ``(delta, n)`` state of the pool/honest race.

    ``delta`` is the private branch length minus the public one. The two
    zero-lead special cases are told apart by ``mark``: an equal-length
    published fork (labelled ``0'``, honest miners split) and an
    equal-length branch reached by trailing (labelled ``0''``, all honest
    miners stay on the public side).
    """

    delta: int
    n: int
    mark: int = PLAIN

    def __post_init__(self) -> None:
        d, n, m = self.delta, self.n, self.mark
        if n not in (1, 2):
            raise ParameterError(f"branch count must be 1 or 2, got {n}")
        if m == EQUAL_FORK_MARK:
            ok = d == 0 and n == 2
        elif m == TRAIL_EQUAL_MARK:
            ok = d == 0 and n == 1
        elif m == PLAIN:
            ok = (d == 0 and n == 1) or (d == -1 and n == 1) or d >= 1
        else:
            ok = False
        if not ok:
            raise ParameterError(f"meaningless state delta={d}, n={n}, mark={m}")

    @property
    def label(self) -> str:
        return {PLAIN: str(self.delta), EQUAL_FORK_MARK: "0'", TRAIL_EQUAL_MARK: "0''"}[self.mark]

    @property
    def branches(self) -> int:
        return self.n

    @property
    def is_trail(self) -> bool:
        return self.delta == -1 or self.mark == TRAIL_EQUAL_MARK

    def __str__(self) -> str:
        return f"({self.label},{self.n})"

    @classmethod
    def parse(cls, text: str) -> "SystemState":
        body = text.strip().strip("()")
        label, n = (part.strip() for part in body.split(","))
        if label == "0'":
            return cls(0, int(n), EQUAL_FORK_MARK)
        if label == "0''":
            return cls(0, int(n), TRAIL_EQUAL_MARK)
        return cls(int(label), int(n))


CONSENSUS = SystemState(0, 1)
EQUAL_FORK = SystemState(0, 2, EQUAL_FORK_MARK)
TRAIL = SystemState(-1, 1)
TRAIL_EQUAL = SystemState(0, 1, TRAIL_EQUAL_MARK)


def lead(k: int, n: int = 1) -> SystemState:
    return SystemState(k, n)
