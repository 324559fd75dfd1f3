"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) to get just the lines.
"""

import functools
import math
import sys

import numpy as np
import pytest

from stubborn_mining import closed_form
from stubborn_mining.crossval import GRID_ALPHAS, GRID_GAMMAS, run_grid, summarize
from stubborn_mining.domain import HONEST, MALICIOUS_STRATEGIES, ChainConfig, make_params, strategy_flags
from stubborn_mining.metrics import SdsScenario, double_spend_probability, race_formula, simulate_race, stale_ratio
from stubborn_mining.montecarlo import replay
from stubborn_mining.rewards import analyze, relative_revenue, uncle_rewards, unit_reward_fn
from stubborn_mining.sweep import SweepGrid, optimal_strategy_map, profit_threshold, switching_points

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

BTC, ETH = ChainConfig.btc(), ChainConfig.eth()


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    assert ok, line


@functools.lru_cache(maxsize=1)
def grid_comparisons():
    return tuple(run_grid(MALICIOUS_STRATEGIES, GRID_ALPHAS, GRID_GAMMAS, events=1_000_000))


def test_criterion_1_selfish_threshold():
    r = profit_threshold("SM", 0.5, BTC, tol=1e-4)
    ok = r.status == "crossing" and abs(r.alpha_star - 0.25) <= 0.002
    report(1, ok, f"SM threshold at gamma=0.5 (BTC) = {r.alpha_star:.5f} (target 0.25 +/- 0.002)")


@pytest.mark.slow
def test_criterion_2_switching_points():
    grid = SweepGrid.from_ranges((0.0025, 0.4975, 0.0025), [0.5])
    cells = optimal_strategy_map(grid)
    sw = switching_points(cells)
    seq = " -> ".join([cells[0].best] + [f"{b} @ {a:.4f}" for a, _, b in sw])
    ok = (len(sw) == 2 and sw[0][1:] == ("HONEST", "SM") and abs(sw[0][0] - 0.25) <= 0.005
          and sw[1][1:] == ("SM", "LFT-s") and abs(sw[1][0] - 0.3322) <= 0.005)
    report(2, ok, f"optimal strategy along alpha (gamma=0.5, BTC): {seq}; "
                  f"expected HONEST -> SM @ ~0.25 -> LFT-s @ 0.3322 +/- 0.005")


def test_criterion_3_classic_selfish_closed_form():
    worst = 0.0
    for a in np.round(np.arange(0.10, 0.451, 0.05), 2):
        for g in (0.0, 0.5, 1.0):
            r_p, _ = relative_revenue(strategy_flags("SM"), make_params(a, g), BTC)
            worst = max(worst, abs(r_p - closed_form.selfish_mining_revenue(a, g)))
    report(3, worst < 1e-6, f"max |R_p - classic closed form| over 24 points = {worst:.2e} (limit 1e-6)")


@pytest.mark.slow
def test_criterion_4_markov_matches_monte_carlo():
    rows = grid_comparisons()
    s = summarize(rows)
    bad = [r for r in rows if not r.passed]
    detail = (f"{s['comparisons']} comparisons (states, r_p_b, r_h_b, stale, ETH uncle/nephew) over 96 cells, "
              f"{s['failures']} beyond 3 SE, max |z| = {s['max_abs_z']:.2f}")
    if bad:
        detail += "; first: " + ", ".join(f"{r.strategy}@{r.alpha},{r.gamma}:{r.name} z={r.z:.2f}" for r in bad[:3])
    report(4, not bad, detail)


def test_criterion_5_stale_ordering():
    p = make_params(0.3, 0.5)
    sm = analyze(strategy_flags("SM"), p).stale
    others = {n: analyze(strategy_flags(n), p).stale for n in MALICIOUS_STRATEGIES if n != "SM"}
    low = min(others, key=others.get)
    ok = all(v > sm for v in others.values())
    report(5, ok, f"stale(SM) = {sm:.6f}; smallest stubborn = {low} {others[low]:.6f}")


def test_criterion_6_worked_examples():
    def share(script, flags):
        c = replay(script, flags).counts
        return c["mp_regular"] / (c["mp_regular"] + c["honest_regular"])

    ex1 = ["MP", "MP", "MP", "H", "H"]
    ex3 = ["MP", "H", "H", "MP", "MP"]
    got = (share(ex1, strategy_flags("SM")), share(ex1, HONEST),
           share(ex3, strategy_flags("T-s")), share(ex3, strategy_flags("SM")))
    ok = got == (1.0, 0.6, 1.0, 0.5)
    report(6, ok, "example 1: malicious {:.0%} vs honest {:.0%}; example 2: stubborn {:.0%} vs selfish {:.0%}"
           .format(*got))


@pytest.mark.slow
def test_criterion_7_uncle_count_identity():
    rows = [r for r in grid_comparisons() if r.name == "b_u"]
    worst = 0.0
    fails = []
    for r in rows:
        r_p, r_h = uncle_rewards(strategy_flags(r.strategy), make_params(r.alpha, r.gamma),
                                 reward_fn=unit_reward_fn)
        z = (r.observed - (r_p + r_h)) / r.se if r.se > 0 else (0.0 if r.observed == r_p + r_h else math.inf)
        worst = max(worst, abs(z))
        if abs(z) > 3:
            fails.append(f"{r.strategy}@{r.alpha},{r.gamma} z={z:.2f}")
    report(7, not fails and len(rows) == 96,
           f"uncle reward with unit schedule vs simulated uncles per event, {len(rows)} cells, max |z| = {worst:.2f}"
           + (f"; failing: {fails[:3]}" if fails else ""))


def test_criterion_8_double_spend():
    problems = []
    lf, lft = strategy_flags("LF-s"), strategy_flags("LFT-s")
    if double_spend_probability(lf, make_params(0.3, 0.5), SdsScenario(0.0, 6)) != 0.0:
        problems.append("h_ds=0 not 0")
    sc = SdsScenario(0.9, 6)
    q1, q2 = sc.q(analyze(lf, make_params(0.3, 0.5)).stale)
    if not (q2 >= q1 and double_spend_probability(lf, make_params(0.3, 0.5), sc) == 1.0):
        problems.append("q_g2 >= q_g1 not 1")
    alphas = [0.05 * k for k in range(1, 10)]
    for flags, chain in ((lf, BTC), (lft, ETH)):
        for p_g2 in (0.1, 0.2):
            scen = SdsScenario.from_share(p_g2, chain.confirmations)
            vals = [double_spend_probability(flags, make_params(a, 0.5), scen, chain=chain) for a in alphas]
            if not all(b > a for a, b in zip(vals, vals[1:])):
                problems.append(f"{flags.name}/{chain.chain} p_g2={p_g2} not increasing")
    zs = []
    for flags, chain, n_v in ((lf, BTC, 6), (lft, ETH, 12), (lf, BTC, 12), (lft, ETH, 6)):
        for a in (0.2, 0.35):
            q1, q2 = SdsScenario.from_share(0.25, n_v).q(analyze(flags, make_params(a, 0.5), chain).stale)
            est = simulate_race(q1, n_v, trials=200_000, seed=len(zs))
            zs.append(est.z(race_formula(q1, q2, n_v)))
    if max(abs(z) for z in zs) > 3:
        problems.append(f"race simulation disagrees (z = {[round(z, 2) for z in zs]})")
    report(8, not problems, "P_ds(h_ds=0)=0, P_ds=1 when q_g2>=q_g1, strictly rising in alpha "
           f"(LF-s/BTC, LFT-s/ETH), race simulation max |z| = {max(abs(z) for z in zs):.2f}"
           + (f"; problems: {problems}" if problems else ""))


@pytest.mark.slow
def test_criterion_9_truncation_stability():
    worst = {"R_p BTC": 0.0, "R_p ETH": 0.0, "stale": 0.0, "P_ds": 0.0}
    for name in MALICIOUS_STRATEGIES:
        f = strategy_flags(name)
        for a in GRID_ALPHAS:
            for g in GRID_GAMMAS:
                p = make_params(a, g)
                vals = {}
                for k in (40, 80):
                    b = analyze(f, p, BTC, delta_max=k)
                    e = analyze(f, p, ETH, delta_max=k)
                    st = stale_ratio(b.r_p_b, b.r_h_b)
                    pds = double_spend_probability(f, p, SdsScenario.from_share(0.2, 6), st)
                    vals[k] = {"R_p BTC": b.R_p, "R_p ETH": e.R_p, "stale": st, "P_ds": pds}
                for key in worst:
                    worst[key] = max(worst[key], abs(vals[40][key] - vals[80][key]))
    ok = all(v < 1e-8 for v in worst.values())
    report(9, ok, "max change 40 -> 80: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


if __name__ == "__main__":
    failures = 0
    for fn in [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]:
        try:
            fn()
        except AssertionError:
            failures += 1
    sys.exit(1 if failures else 0)
