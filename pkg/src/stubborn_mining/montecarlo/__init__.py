"""Block-tree Monte Carlo simulation of honest miners racing a withholding pool.

The simulator keeps an explicit ledger (fork point, public branch, private
branch and its published prefix) and applies each strategy's publish,
withhold and adopt rules directly. It never consults the Markov model, which
makes it an independent check on it.

The hot loop lives in a compiled extension; a pure-Python twin is used when
the extension is not built, or when ``STUBBORN_MINING_PURE_PYTHON`` is set.
"""

from __future__ import annotations

import os

from . import _kernel_py

KERNEL = "python"
run_kernel = _kernel_py.run_kernel

if not os.environ.get("STUBBORN_MINING_PURE_PYTHON"):
    try:
        from ._kernel import run_kernel  # type: ignore[no-redef]  # noqa: F401

        KERNEL = "cython"
    except ImportError:  # extension not compiled
        pass

from .simulator import (  # noqa: E402
    Ev,
    SimConfig,
    SimReport,
    Tally,
    event_codes,
    occupancy_state,
    replay,
    simulate,
)

__all__ = [
    "KERNEL",
    "Ev",
    "SimConfig",
    "SimReport",
    "Tally",
    "event_codes",
    "occupancy_state",
    "replay",
    "run_kernel",
    "simulate",
]
