import pytest

from stubborn_mining.domain import (
    CONSENSUS,
    EQUAL_FORK,
    HONEST,
    MALICIOUS_STRATEGIES,
    TRAIL,
    TRAIL_EQUAL,
    ChainConfig,
    MiningParams,
    ParameterError,
    StrategyFlags,
    SystemState,
    canonical_name,
    make_params,
    strategy_flags,
)

TABLE = {
    "SM": (1, 1, 1, 0, 0, 0),
    "L-s": (0, 1, 1, 1, 0, 0),
    "F-s": (1, 0, 1, 0, 1, 0),
    "T-s": (1, 1, 0, 0, 0, 1),
    "LT-s": (0, 1, 0, 1, 0, 1),
    "LF-s": (0, 0, 1, 1, 1, 0),
    "TF-s": (1, 0, 0, 0, 1, 1),
    "LFT-s": (0, 0, 0, 1, 1, 1),
}


@pytest.mark.parametrize("name", sorted(TABLE))
def test_flag_table(name):
    f = strategy_flags(name)
    assert f.as_tuple()[:6] == TABLE[name]
    assert f.sle == (1 if f.sl or f.se else 0)


def test_every_strategy_listed():
    assert set(MALICIOUS_STRATEGIES) == set(TABLE)


@pytest.mark.parametrize("alias,canon", [("sm", "SM"), ("lft-S", "LFT-s"), ("LTF-s", "LFT-s"),
                                         ("FT-s", "TF-s"), ("honest", "HONEST"), ("lf", "LF-s")])
def test_aliases(alias, canon):
    assert canonical_name(alias) == canon


def test_unknown_strategy_lists_domain():
    with pytest.raises(ParameterError, match="valid names"):
        strategy_flags("greedy")


def test_non_complementary_flags_rejected():
    with pytest.raises(ParameterError):
        StrategyFlags("X", 1, 1, 1, 1, 0, 0)
    with pytest.raises(ParameterError):
        StrategyFlags("Y", 2, 0, 0, 0, 1, 1)


def test_honest_sentinel():
    assert HONEST.is_honest and strategy_flags("HONEST") is HONEST


def test_params_split():
    p = make_params(0.3, 0.5)
    assert p.beta == pytest.approx(0.7)
    assert p.p_beta_p + p.p_beta_h == pytest.approx(p.p_beta)
    assert p.p_beta_h == pytest.approx(0.35)


@pytest.mark.parametrize("alpha,gamma", [(-0.1, 0.5), (0.5, 0.5), (0.3, 1.2), (0.3, -0.01)])
def test_params_rejected(alpha, gamma):
    with pytest.raises(ParameterError):
        make_params(alpha, gamma)


def test_majority_needs_opt_in():
    assert make_params(0.6, 0.5, allow_majority=True).beta == pytest.approx(0.4)
    with pytest.raises(ParameterError):
        MiningParams(1.0, 0.5)


def test_chain_constants():
    btc, eth = ChainConfig.btc(), ChainConfig.eth()
    assert (btc.tx_per_block, btc.block_time, btc.confirmations) == (2137, 600.0, 6)
    assert (eth.block_time, eth.confirmations) == (13.0, 12)
    assert eth.has_uncles and not btc.has_uncles
    assert ChainConfig.named("Eth") == eth
    with pytest.raises(ParameterError):
        ChainConfig.named("ltc")


@pytest.mark.parametrize("d,want", [(0, 0.0), (1, 0.125), (6, 0.75), (7, 0.0)])
def test_uncle_schedule_distance(d, want):
    assert ChainConfig.eth().uncle_reward(d) == want


def test_uncle_schedule_protocol():
    eth = ChainConfig.eth(uncle_schedule="protocol")
    assert [eth.uncle_reward(d) for d in range(8)] == [0, 7 / 8, 6 / 8, 5 / 8, 4 / 8, 3 / 8, 2 / 8, 0]
    with pytest.raises(ParameterError):
        ChainConfig.eth(uncle_schedule="flat")


def test_special_states():
    assert str(CONSENSUS) == "(0,1)"
    assert str(EQUAL_FORK) == "(0',2)"
    assert str(TRAIL) == "(-1,1)"
    assert str(TRAIL_EQUAL) == "(0'',1)"
    assert TRAIL.is_trail and TRAIL_EQUAL.is_trail and not EQUAL_FORK.is_trail
    assert EQUAL_FORK.branches == 2


@pytest.mark.parametrize("s", [CONSENSUS, EQUAL_FORK, TRAIL, TRAIL_EQUAL, SystemState(5, 2)])
def test_state_parse_roundtrip(s):
    assert SystemState.parse(str(s)) == s


@pytest.mark.parametrize("args", [(0, 2), (-1, 2), (-2, 1), (1, 3), (1, 1, 1)])
def test_meaningless_states(args):
    with pytest.raises(ParameterError):
        SystemState(*args)
