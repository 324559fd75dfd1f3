import math
import random

import pytest

from stubborn_mining.domain import ChainConfig, ParameterError
from stubborn_mining.metrics import SdsScenario
from stubborn_mining.sweep import (
    SweepGrid,
    metric_curves,
    optimal_metric_curve,
    optimal_strategy_map,
    pick_best,
    profit_threshold,
    switching_points,
)


def test_selfish_threshold():
    r = profit_threshold("SM", 0.5, tol=1e-4)
    assert r.status == "crossing"
    assert r.alpha_star == pytest.approx(0.25, abs=2e-3)
    assert r.width <= 1e-4


def test_selfish_threshold_extremes():
    assert profit_threshold("SM", 1.0).alpha_star < 0.02
    assert profit_threshold("SM", 0.0).alpha_star == pytest.approx(1 / 3, abs=1e-3)


def test_stubborn_thresholds_above_selfish():
    sm = profit_threshold("SM", 0.5, tol=1e-3).alpha_star
    for name in ("L-s", "F-s", "T-s", "LT-s", "LF-s", "TF-s", "LFT-s"):
        r = profit_threshold(name, 0.5, tol=1e-3)
        assert r.alpha_star > sm


def test_never_profitable_is_a_result():
    r = profit_threshold("LFT-s", 0.0, tol=1e-3)
    assert r.status == "never" and not r.profitable_somewhere


def test_threshold_bracket_invariant():
    from stubborn_mining.domain import make_params, strategy_flags
    from stubborn_mining.rewards import relative_revenue

    r = profit_threshold("T-s", 0.5, tol=1e-4)
    lo, hi = r.alpha_star - r.width, r.alpha_star + r.width
    f = strategy_flags("T-s")
    assert relative_revenue(f, make_params(lo, 0.5))[0] <= lo
    assert relative_revenue(f, make_params(hi, 0.5))[0] > hi


def test_grid_validation():
    with pytest.raises(ParameterError):
        SweepGrid((0.2, 0.5), (0.5,))
    with pytest.raises(ParameterError):
        SweepGrid((), (0.5,))
    g = SweepGrid((0.3, 0.1, 0.3), (0.5,), ("sm", "SM", "honest"))
    assert g.alphas == (0.1, 0.3) and g.strategies == ("SM", "HONEST")


def test_map_anchor_points():
    cells = optimal_strategy_map(SweepGrid((0.2, 0.3, 0.4), (0.5,)))
    assert [c.best for c in cells] == ["HONEST", "SM", "LFT-s"]


def test_ties_prefer_honest_then_selfish():
    assert pick_best({"LFT-s": 0.3, "HONEST": 0.3, "SM": 0.3})[0] == "HONEST"
    assert pick_best({"LFT-s": 0.3, "SM": 0.3, "F-s": 0.3})[0] == "SM"
    assert pick_best({"LFT-s": 0.3, "F-s": 0.3})[0] == "F-s"
    assert pick_best({"SM": math.nan, "F-s": 0.1})[0] == "F-s"


def test_argmax_invariant_under_scaling():
    revs = {"HONEST": 0.3, "SM": 0.316, "LFT-s": 0.3, "F-s": 0.3139}
    assert pick_best(revs)[0] == pick_best({k: 3.7 * v for k, v in revs.items()})[0]


def test_cell_order_does_not_matter():
    alphas = [0.1, 0.25, 0.33, 0.41]
    a = metric_curves(SweepGrid(tuple(alphas), (0.0, 0.5), ("SM", "LF-s")), "stale")
    random.Random(4).shuffle(alphas)
    b = metric_curves(SweepGrid(tuple(alphas), (0.5, 0.0), ("LF-s", "SM")), "stale")
    assert a == b


def test_worker_pool_gives_identical_table():
    g = SweepGrid((0.2, 0.3), (0.5,), ("SM", "T-s"))
    assert metric_curves(g, "R_p", workers=1) == metric_curves(g, "R_p", workers=2)


def test_tps_with_no_attacker():
    cells = metric_curves(SweepGrid((0.0,), (0.5,), ("SM",)), "tps")
    assert cells[0].value == pytest.approx(3.5617, abs=1e-4)


def test_stale_ordering_in_table():
    cells = {c.strategy: c.value for c in metric_curves(SweepGrid((0.3,), (0.5,)), "stale")}
    assert all(v > cells["SM"] for k, v in cells.items() if k not in ("SM", "HONEST"))


def test_double_spend_rises_when_pool_turns_stubborn():
    sc = SdsScenario.from_share(0.2, 6)
    cells = {c.strategy: c.value for c in metric_curves(SweepGrid((0.3,), (0.5,), ("HONEST", "LF-s")), "P_ds", sc)}
    assert cells["LF-s"] > cells["HONEST"]
    with pytest.raises(ParameterError):
        metric_curves(SweepGrid((0.3,), (0.5,)), "P_ds")


def test_optimal_metric_curve_uses_best_strategy():
    cells = optimal_metric_curve(SweepGrid((0.2, 0.4), (0.5,), chain=ChainConfig.btc()), "tps")
    assert [c.strategy for c in cells] == ["HONEST", "LFT-s"]
    assert cells[0].value == pytest.approx(3.5617, abs=1e-4)


def test_switching_points():
    from stubborn_mining.sweep import MapCell

    cells = [MapCell(a, 0.5, b, 0.0, {}, {}) for a, b in [(0.1, "HONEST"), (0.2, "HONEST"), (0.3, "SM")]]
    assert switching_points(cells) == [(0.25, "HONEST", "SM")]
