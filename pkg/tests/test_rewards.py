import math

import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from stubborn_mining import closed_form as cf
from stubborn_mining.domain import HONEST, MALICIOUS_STRATEGIES, ChainConfig, make_params, strategy_flags
from stubborn_mining.markov import solve
from stubborn_mining.rewards import (
    analyze,
    aux_probs,
    nephew_rewards,
    relative_revenue,
    static_rewards,
    uncle_reward_fn,
    uncle_rewards,
    unit_reward_fn,
)
from stubborn_mining.uncles import uncle_rates

BTC, ETH = ChainConfig.btc(), ChainConfig.eth()


def test_aux_examples():
    a = aux_probs(strategy_flags("SM"), make_params(0.3, 0.5))
    assert a.p_t1 == pytest.approx(0.3 / 0.79)
    assert a.p_t2 == 1.0
    assert a.p_le == pytest.approx(0.895)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(MALICIOUS_STRATEGIES), st.floats(0.0, 0.49), st.floats(0.0, 1.0))
def test_aux_in_unit_interval(name, a, g):
    aux = aux_probs(strategy_flags(name), make_params(a, g))
    for v in (aux.p_t1, aux.p_t2, aux.p_le, aux.p_e, aux.p_ls(2), aux.p_ls(7)):
        assert -1e-12 <= v <= 1 + 1e-12


@pytest.mark.parametrize("d,want", [(1, 0.125), (6, 0.75), (7, 0.0), (0, 0.0)])
def test_uncle_reward_fn(d, want):
    assert uncle_reward_fn(d) == want


@pytest.mark.parametrize("b_u,want", [(0.0, (0.0, 0.0)), (0.32, (0.0, 0.01))])
def test_nephew_rewards(b_u, want):
    assert nephew_rewards(b_u) == pytest.approx(want)


@pytest.mark.parametrize("name", MALICIOUS_STRATEGIES)
def test_no_attacker_no_forks(name):
    f, p = strategy_flags(name), make_params(0.0, 0.5)
    assert static_rewards(f, p) == (0.0, 1.0)
    assert uncle_rewards(f, p) == (0.0, 0.0)


def test_selfish_break_even_at_quarter():
    r_p, r_h = static_rewards(strategy_flags("SM"), make_params(0.25, 0.5))
    assert r_p / (r_p + r_h) == pytest.approx(0.25, abs=2e-3)


@pytest.mark.parametrize("a", [0.1, 0.2, 0.3, 0.35, 0.45])
@pytest.mark.parametrize("g", [0.0, 0.5, 1.0])
def test_selfish_matches_classic_closed_form(a, g):
    r_p, _ = relative_revenue(strategy_flags("SM"), make_params(a, g), BTC)
    assert r_p == pytest.approx(cf.selfish_mining_revenue(a, g), abs=1e-9)


@pytest.mark.parametrize("chain", [BTC, ETH])
def test_honest_earns_its_share(chain):
    assert relative_revenue(HONEST, make_params(0.3, 0.5), chain) == pytest.approx((0.3, 0.7))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(MALICIOUS_STRATEGIES), st.floats(0.01, 0.45), st.floats(0.0, 1.0),
       st.sampled_from(["BTC", "ETH"]))
@example("LF-s", 0.0625, 0.0, "BTC")  # true pool rate is 0; solver once returned -4.5e-59
def test_breakdown_invariants(name, a, g, chain):
    rb = analyze(strategy_flags(name), make_params(a, g), ChainConfig.named(chain))
    assert rb.R_p + rb.R_h == pytest.approx(1.0, abs=1e-12)
    assert rb.r_p_n == 0.0
    for v in (rb.r_p_b, rb.r_h_b, rb.r_p_u, rb.r_h_u, rb.r_h_n, rb.b_u):
        assert v >= 0.0
    assert rb.r_p_b + rb.r_h_b <= 1.0 + 1e-12
    assert rb.r_h_n == pytest.approx(rb.b_u / 32)
    assert not rb.flagged


@pytest.mark.parametrize("name", MALICIOUS_STRATEGIES)
@pytest.mark.parametrize("g", [0.0, 0.5, 1.0])
def test_revenue_monotone_in_alpha(name, g):
    revs = [relative_revenue(strategy_flags(name), make_params(0.05 * k, g))[0] for k in range(1, 10)]
    assert all(b >= a - 1e-12 for a, b in zip(revs, revs[1:]))


@pytest.mark.parametrize("name", ["SM", "LFT-s", "TF-s"])
def test_unit_uncle_reward_counts_uncles(name):
    f, p = strategy_flags(name), make_params(0.3, 0.5)
    r_p, r_h = uncle_rewards(f, p, reward_fn=unit_reward_fn)
    assert r_p + r_h == pytest.approx(analyze(f, p, ETH).b_u, rel=1e-10)


@pytest.mark.parametrize("name", MALICIOUS_STRATEGIES)
def test_uncle_marginal_is_stationary_distribution(name):
    f, p = strategy_flags(name), make_params(0.35, 0.3)
    ts, pi = solve(f, p)
    u = uncle_rates(ts)
    for s, w in pi.pi.items():
        assert u.marginal.get(s, 0.0) == pytest.approx(w, abs=1e-12)


def test_scaling_leaves_revenue_unchanged():
    rb = analyze(strategy_flags("LF-s"), make_params(0.3, 0.5), ETH)
    sc = rb.scaled(7.5)
    assert sc.R_p == pytest.approx(rb.R_p, abs=1e-15)


def test_pi_reuse_must_match_inputs():
    _, pi = solve(strategy_flags("SM"), make_params(0.3, 0.5))
    assert static_rewards(strategy_flags("SM"), make_params(0.3, 0.5), pi) == pytest.approx(
        static_rewards(strategy_flags("SM"), make_params(0.3, 0.5)))
    with pytest.raises(ValueError):
        static_rewards(strategy_flags("T-s"), make_params(0.3, 0.5), pi)


@pytest.mark.parametrize("name", ["SM", "T-s"])
@pytest.mark.parametrize("a,g", [(0.2, 0.0), (0.3, 0.5), (0.42, 1.0)])
def test_lookahead_forms_agree_without_stubborn_races(name, a, g):
    f, p = strategy_flags(name), make_params(a, g)
    _, pi = solve(f, p)
    rb = analyze(f, p, ETH, pi=pi)
    assert cf.mp_static(f, p, pi.pi) == pytest.approx(rb.r_p_b, abs=1e-12)
    assert cf.honest_static(f, p, pi.pi) == pytest.approx(rb.r_h_b, abs=1e-12)
    assert cf.mp_uncle(f, p, pi.pi) == pytest.approx(rb.r_p_u, abs=1e-12)


def test_lookahead_forms_drift_for_lead_stubborn():
    # documented limitation: they ignore races that continue after a lead-stubborn reveal
    f, p = strategy_flags("L-s"), make_params(0.3, 0.5)
    _, pi = solve(f, p)
    assert abs(cf.mp_static(f, p, pi.pi) - analyze(f, p).r_p_b) > 1e-5


def test_protocol_schedule_lowers_ethereum_threshold():
    from scipy.optimize import brentq

    eth = ChainConfig.eth(uncle_schedule="protocol")
    rp = lambda a: relative_revenue(strategy_flags("SM"), make_params(a, 0.5), eth)[0] - a  # noqa: E731
    assert brentq(rp, 0.1, 0.3) < 0.25


def test_uncle_rewards_flat_in_truncation():
    f, p = strategy_flags("LFT-s"), make_params(0.4, 0.5)
    a = uncle_rewards(f, p, delta_max=40)
    b = uncle_rewards(f, p, delta_max=80)
    assert a == pytest.approx(b, abs=1e-12)
    assert not math.isnan(a[0])
