"""Revenue, stale-block and double-spend analysis of selfish and stubborn mining.

Exact Markov-chain evaluation of eight withholding strategies on Bitcoin-
and Ethereum-style reward rules, with a block-tree Monte Carlo simulator as
an independent check.
"""

from .domain import (
    HONEST,
    MALICIOUS_STRATEGIES,
    ChainConfig,
    MiningParams,
    ParameterError,
    StrategyFlags,
    SystemState,
    make_params,
    strategy_flags,
)
from .markov import NonConvergence, ReducibleChain, build_transitions, solve, solve_stationary
from .metrics import SdsScenario, double_spend_probability, stale_ratio, tps
from .rewards import RewardBreakdown, analyze, relative_revenue

__version__ = "0.1.0"

__all__ = [
    "HONEST",
    "MALICIOUS_STRATEGIES",
    "ChainConfig",
    "MiningParams",
    "NonConvergence",
    "ParameterError",
    "ReducibleChain",
    "RewardBreakdown",
    "SdsScenario",
    "StrategyFlags",
    "SystemState",
    "analyze",
    "build_transitions",
    "double_spend_probability",
    "make_params",
    "relative_revenue",
    "solve",
    "solve_stationary",
    "stale_ratio",
    "strategy_flags",
    "tps",
]
