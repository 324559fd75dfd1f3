import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from stubborn_mining.domain import HONEST, MALICIOUS_STRATEGIES, ChainConfig, ParameterError, make_params, strategy_flags
from stubborn_mining.montecarlo import SimConfig, event_codes, replay, simulate
from stubborn_mining.montecarlo.simulator import _flag_tuple
from stubborn_mining.rewards import analyze

ETH = ChainConfig.eth()


def _share(rep, chain="BTC"):
    c = rep.counts
    return c["mp_regular"] / (c["mp_regular"] + c["honest_regular"])


@pytest.fixture(params=["python", "compiled"])
def kernel(request, python_kernel):
    if request.param == "python":
        return python_kernel
    return request.getfixturevalue("compiled_kernel")


def test_example_one_malicious_versus_honest(kernel):
    script = ["MP", "MP", "MP", "H", "H"]
    assert _share(replay(script, strategy_flags("SM"), kernel=kernel)) == 1.0
    assert _share(replay(script, HONEST, kernel=kernel)) == pytest.approx(0.6)


def test_stubborn_continuation_beats_selfish(kernel):
    script = ["MP", "H", "H", "MP", "MP"]
    assert _share(replay(script, strategy_flags("T-s"), kernel=kernel)) == 1.0
    assert _share(replay(script, strategy_flags("SM"), kernel=kernel)) == pytest.approx(0.5)


def test_selfish_ethereum_share_of_the_same_script(kernel):
    rep = replay(["MP", "H", "H", "MP", "MP"], strategy_flags("SM"), chain=ETH, kernel=kernel)
    # two regular blocks each side, one honest-referenced pool uncle at distance 1
    assert rep.counts["uncles"] == 1 and rep.counts["uncles_mp"] == 1
    mp = 2 + 1 / 8
    assert rep.mp_revenue / (rep.mp_revenue + rep.honest_revenue) == pytest.approx(mp / (mp + 2 + 1 / 32))


def test_empty_script(kernel):
    rep = replay([], strategy_flags("SM"), kernel=kernel)
    assert all(v == 0 for v in rep.counts.values())


def test_private_event_without_race_is_rejected(kernel):
    with pytest.raises(ParameterError):
        replay(["HONEST_PRIVATE"], strategy_flags("SM"), kernel=kernel)
    with pytest.raises(ParameterError):
        event_codes(["MINER"])


def test_private_event_in_race_builds_on_pool_branch(kernel):
    rep = replay(["MP", "H", "HP"], strategy_flags("SM"), kernel=kernel)
    assert rep.counts["mp_regular"] == 1 and rep.counts["stale"] == 1


def test_honest_never_stale():
    rep = simulate(SimConfig(HONEST, make_params(0.3, 0.5), events=200_000, seed=5))
    assert rep.stale_frequency.mean == 0.0
    assert abs(rep.mp_static.z(0.3)) < 3


def test_bit_reproducible():
    cfg = SimConfig(strategy_flags("LFT-s"), make_params(0.35, 0.5), ETH, events=100_000, seed=9)
    a, b = simulate(cfg), simulate(cfg)
    assert a.record() == b.record() and a.counts == b.counts


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(MALICIOUS_STRATEGIES + ("HONEST",)),
       st.lists(st.integers(0, 2), min_size=0, max_size=300), st.booleans())
def test_kernels_agree_on_any_event_stream(name, events, settle):
    pytest.importorskip("stubborn_mining.montecarlo._kernel")
    from stubborn_mining.montecarlo import _kernel, _kernel_py

    f = strategy_flags(name)
    ev = np.asarray(events, dtype=np.int8)
    args = (ev, _flag_tuple(f), int(f.is_honest), 0, int(settle), max(len(ev), 1), 1, 8)
    a = _kernel_py.run_kernel(*args)
    b = _kernel.run_kernel(*args)
    assert np.array_equal(a[0], np.asarray(b[0])) and np.array_equal(a[1], np.asarray(b[1]))


@pytest.mark.parametrize("name", ["SM", "LFT-s", "TF-s"])
def test_conservation(name):
    cfg = SimConfig(strategy_flags(name), make_params(0.3, 0.5), events=50_000, seed=1)
    rep = simulate(cfg)
    c = rep.counts
    classified = c["mp_regular"] + c["honest_regular"] + c["stale"]
    assert cfg.events - 200 <= classified <= cfg.events
    assert c["nephews"] == c["uncles"]
    occ = sum(t.mean for t in rep.occupancy.values())
    assert occ == pytest.approx(1.0, abs=1e-12)


def test_seed_scatter_matches_standard_errors():
    f, p = strategy_flags("SM"), make_params(0.3, 0.5)
    want = analyze(f, p).r_p_b
    z = [simulate(SimConfig(f, p, events=100_000, seed=s)).mp_static.z(want) for s in range(24)]
    chi2 = float(np.sum(np.square(z)))
    assert stats.chi2.sf(chi2, len(z)) > 1e-3
    assert stats.chi2.cdf(chi2, len(z)) > 1e-3


def test_config_validation():
    f, p = strategy_flags("SM"), make_params(0.3, 0.5)
    with pytest.raises(ParameterError):
        SimConfig(f, p, events=100)
    with pytest.raises(ParameterError):
        SimConfig(f, p, seed=-1)
