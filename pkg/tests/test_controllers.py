import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from powlab.chain import HashRateScenario, SimulationConfig, run_simulation
from powlab.controllers import (ETHEREUM_CAP, BitcoinRule, ConstantOne,
                                EthereumRule, EveryN, GeneralController,
                                NeuralIndicator, bitcoin_controller,
                                bitcoin_update, ethereum_controller,
                                ethereum_update)
from powlab.errors import ConfigurationError
from powlab.training import solved_ethereum_target

from conftest import TINY_FEATURES


def test_ethereum_update_examples():
    assert ethereum_update(13.0) == 0.0
    assert ethereum_update(5.0) == -1.0 / 2048.0
    assert ethereum_update(1200.0) == 99.0 / 2048.0
    # boundary: floor(900/9) - 1 = 99, continuous with the cap
    assert ethereum_update(900.0) == 99.0 / 2048.0
    assert ethereum_update(899.9) == 98.0 / 2048.0
    with pytest.raises(ConfigurationError):
        ethereum_update(0.0)
    with pytest.raises(ConfigurationError):
        ethereum_update(-3.0)


def test_bitcoin_update_examples():
    assert bitcoin_update(2016 * 600.0) == 0.0
    assert bitcoin_update(1008 * 600.0) == -1.0
    with pytest.raises(ConfigurationError):
        bitcoin_update(0.0)


def test_retarget_indicator_epochs():
    ind = EveryN(2016)
    values = [ind.observe(1.0) for _ in range(4033)]
    assert values[2016 - 1] == 1.0
    assert values[4032 - 1] == 1.0
    assert values[4033 - 1] == 0.0
    assert sum(values) == 2.0


def test_general_recursion_examples():
    # one observed block time drives one multiplicative step
    ctrl = GeneralController(ConstantOne(), EthereumRule(), min_difficulty=1e-9)
    ctrl.reset(1000.0)
    d = ctrl.observe(1200.0)  # f = 99/2048
    assert d == pytest.approx(1000.0 * (1.0 - 99.0 / 2048.0))
    assert d == pytest.approx(951.66, abs=0.01)

    ctrl.reset(1000.0)
    d = ctrl.observe(5.0)  # f = -1/2048, difficulty rises
    assert d == pytest.approx(1000.0 + 1000.0 / 2048.0)
    assert d == pytest.approx(1000.4883, abs=1e-4)

    # a zero gate freezes difficulty regardless of the update value
    ctrl = GeneralController(EveryN(2), EthereumRule(), min_difficulty=1e-9)
    ctrl.reset(1000.0)
    assert ctrl.observe(1200.0) == 1000.0


def test_recursion_matches_direct_transcription_exactly():
    rng = np.random.default_rng(42)
    times = np.concatenate([
        rng.uniform(0.5, 120.0, size=4000),
        rng.uniform(850.0, 1500.0, size=50),
    ])
    rng.shuffle(times)

    ctrl = ethereum_controller(min_difficulty=1e-12)
    ctrl.reset(1e6)
    ours = []
    for t in times:
        ours.append(ctrl.observe(float(t)))

    d = 1e6
    expected = []
    for t in times:
        if t <= 900.0:
            f = (math.floor(t / 9.0) - 1.0) / 2048.0
        else:
            f = 99.0 / 2048.0
        d = d - d * f
        expected.append(d)

    assert ours == expected  # bit-for-bit


def test_bitcoin_controller_changes_only_at_epochs():
    n = 50
    ctrl = bitcoin_controller(retarget_blocks=n, target_block_time=600.0,
                              min_difficulty=1e-12)
    ctrl.reset(1000.0)
    rng = np.random.default_rng(1)
    previous = 1000.0
    for k in range(1, 501):
        d = ctrl.observe(float(rng.uniform(200.0, 1200.0)))
        if k % n == 0:
            previous = d
        else:
            assert d == previous


def test_bitcoin_epoch_update_value():
    # constant 300 s blocks over a 4-block epoch: T_prev = 1200, beta = 600
    ctrl = bitcoin_controller(retarget_blocks=4, target_block_time=600.0,
                              min_difficulty=1e-12)
    ctrl.reset(100.0)
    for _ in range(3):
        assert ctrl.observe(300.0) == 100.0  # warm-up plus zero gate
    d = ctrl.observe(300.0)
    # f = 1 - 4*600/1200 = -1, so difficulty doubles
    assert d == pytest.approx(200.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=1e-3, max_value=5000.0), min_size=1, max_size=60))
def test_relative_step_is_bounded(times):
    ctrl = ethereum_controller(min_difficulty=1e-300)
    ctrl.reset(1.0)
    previous = 1.0
    for t in times:
        d = ctrl.observe(t)
        assert abs(d / previous - 1.0) <= ETHEREUM_CAP + 1e-15
        assert d > 0.0
        previous = d


def test_steady_state_tracks_solved_equilibrium():
    # physics check at the solved zero-drift mean (the honest setpoint)
    beta = solved_ethereum_target()
    rate = 1.455e14
    scenario = HashRateScenario(initial_rate=rate, length=200_000)
    trace = run_simulation(scenario, ethereum_controller(), SimulationConfig(seed=42),
                           rate * beta)
    assert trace.block_times.mean() == pytest.approx(beta, rel=0.01)


def test_update_interval_restricts_heights():
    ctrl = GeneralController(ConstantOne(), EthereumRule(), update_interval=5,
                             min_difficulty=1e-12)
    ctrl.reset(1000.0)
    previous = 1000.0
    for k in range(1, 26):
        d = ctrl.observe(100.0)
        if k % 5 == 0:
            assert d != previous
            previous = d
        else:
            assert d == previous


def test_neural_indicator_warm_up_holds_difficulty(tiny_model):
    record = []
    ctrl = GeneralController(
        NeuralIndicator(tiny_model, TINY_FEATURES, record=record),
        EthereumRule(), min_difficulty=1e-12)
    ctrl.reset(500.0)
    rng = np.random.default_rng(3)
    history = TINY_FEATURES.history_required
    for k in range(1, history + 10):
        d = ctrl.observe(float(rng.exponential(13.0)))
        if k < history:
            assert d == 500.0
    assert len(record) == history + 9
    assert all(math.isnan(v) for v in record[:history - 1])
    assert all(0.0 <= v <= 1.0 for v in record[history - 1:])


def test_neural_indicator_rejects_mismatched_feature_count(tiny_model):
    from powlab.features import FeatureConfig

    with pytest.raises(ConfigurationError):
        NeuralIndicator(tiny_model, FeatureConfig(stride=5, count=4, window=20))


def test_controller_validation():
    with pytest.raises(ConfigurationError):
        GeneralController(ConstantOne(), EthereumRule(), window=0)
    with pytest.raises(ConfigurationError):
        GeneralController(ConstantOne(), EthereumRule(), min_difficulty=0.0)
    with pytest.raises(ConfigurationError):
        EveryN(0)
    ctrl = ethereum_controller()
    with pytest.raises(ConfigurationError):
        ctrl.reset(-1.0)
