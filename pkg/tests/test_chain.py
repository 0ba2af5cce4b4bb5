import math

import numpy as np
import pytest
from scipy import stats

from powlab.chain import (HashRateScenario, SimulationConfig, Trace, as_trace,
                          make_rng, run_simulation, sample_block_time)
from powlab.controllers import ConstantDifficulty, ethereum_controller
from powlab.errors import ConfigurationError


class StubRng:
    """Degenerate uniform source for inverse-transform identities."""

    def __init__(self, value):
        self.value = value

    def random(self):
        return self.value


def test_inverse_transform_identity():
    # u = e^-1 with mean 1 must give exactly T = 1
    t = sample_block_time(10.0, 10.0, 0.0, StubRng(math.exp(-1.0)))
    assert t == pytest.approx(1.0, abs=1e-15)


def test_sample_mean_matches_published_quotient():
    # difficulty / rate for the published period-1 operating point
    difficulty, rate = 2.255e15, 1.455e14
    expected = difficulty / rate
    assert expected == pytest.approx(15.498, abs=5e-4)
    rng = make_rng(123)
    draws = np.array([sample_block_time(difficulty, rate, 0.0, rng)
                      for _ in range(200_000)])
    se = draws.std() / math.sqrt(len(draws))
    assert abs(draws.mean() - expected) < 4.0 * se


def test_delay_is_additive_lower_bound():
    rng = make_rng(5)
    draws = [sample_block_time(1.0, 1.0, 5.0, rng) for _ in range(1000)]
    assert min(draws) >= 5.0


def test_sample_rejects_bad_domain():
    rng = make_rng(0)
    with pytest.raises(ConfigurationError):
        sample_block_time(0.0, 1.0, 0.0, rng)
    with pytest.raises(ConfigurationError):
        sample_block_time(1.0, -2.0, 0.0, rng)
    with pytest.raises(ConfigurationError):
        sample_block_time(1.0, 1.0, -0.1, rng)


def test_constant_difficulty_mean_block_time():
    rate = 1.455e14
    scenario = HashRateScenario(initial_rate=rate, length=10_000)
    trace = run_simulation(scenario, ConstantDifficulty(), SimulationConfig(seed=11),
                           rate * 13.5)
    assert trace.block_times.mean() == pytest.approx(13.5, rel=0.02)


def test_rate_doubling_halves_block_times():
    rate = 1e12
    scenario = HashRateScenario(initial_rate=rate, length=20_000,
                                events=[(10_000, 2.0 * rate)])
    trace = run_simulation(scenario, ConstantDifficulty(), SimulationConfig(seed=3),
                           rate * 20.0)
    pre = trace.block_times[:10_000].mean()
    post = trace.block_times[10_000:].mean()
    assert post / pre == pytest.approx(0.5, rel=0.06)
    # the event at height c takes effect from block c+1 on
    assert np.all(trace.scheduled_rates[:10_000] == rate)
    assert np.all(trace.scheduled_rates[10_000:] == 2.0 * rate)


def test_zero_length_scenario():
    scenario = HashRateScenario(initial_rate=1.0, length=0)
    trace = run_simulation(scenario, ConstantDifficulty(), SimulationConfig(), 1.0)
    assert len(trace) == 0
    assert trace.records() == []


def test_trace_determinism_is_byte_exact():
    rate = 1.455e14
    scenario = HashRateScenario(initial_rate=rate, length=20_000,
                                events=[(5_000, 1.3 * rate)])
    runs = []
    for _ in range(2):
        trace = run_simulation(scenario, ethereum_controller(),
                               SimulationConfig(seed=99), rate * 13.0)
        runs.append(trace)
    for attr in ("timestamps", "block_times", "difficulties", "scheduled_rates"):
        assert getattr(runs[0], attr).tobytes() == getattr(runs[1], attr).tobytes()


def test_block_time_distribution_ks():
    # identity controller at constant rate: T ~ Exponential(D/H)
    rate, mean = 1.455e14, 13.5
    scenario = HashRateScenario(initial_rate=rate, length=100_000)
    trace = run_simulation(scenario, ConstantDifficulty(), SimulationConfig(seed=7),
                           rate * mean)
    result = stats.kstest(trace.block_times, "expon", args=(0.0, mean))
    assert result.pvalue > 0.01


def test_timestamp_consistency_and_monotonicity():
    rate = 1e12
    scenario = HashRateScenario(initial_rate=rate, length=5_000)
    trace = run_simulation(scenario, ethereum_controller(), SimulationConfig(seed=1),
                           rate * 13.0)
    ts = np.concatenate(([0.0], trace.timestamps))
    assert np.all(np.diff(ts) >= 0.0)
    assert np.array_equal(np.diff(ts), trace.block_times)
    assert np.all(trace.block_times >= 0.0)


def test_difficulty_floor_holds():
    rate = 1.0
    scenario = HashRateScenario(initial_rate=rate, length=3_000)
    config = SimulationConfig(seed=2, min_difficulty=0.5)
    # target far below equilibrium so the controller keeps cutting difficulty
    trace = run_simulation(scenario, ethereum_controller(min_difficulty=0.5),
                           config, 1e6)
    assert trace.difficulties.min() >= 0.5


def test_integer_timestamps_strictly_increase():
    rate = 1e12
    scenario = HashRateScenario(initial_rate=rate, length=5_000)
    config = SimulationConfig(seed=4, integer_timestamps=True)
    trace = run_simulation(scenario, ethereum_controller(), config, rate * 2.0)
    assert np.all(trace.timestamps == np.floor(trace.timestamps))
    assert np.all(np.diff(np.concatenate(([0.0], trace.timestamps))) >= 1.0)
    assert np.all(trace.block_times >= 1.0)


def test_initial_difficulty_below_floor_rejected():
    scenario = HashRateScenario(initial_rate=1.0, length=1)
    with pytest.raises(ConfigurationError):
        run_simulation(scenario, ConstantDifficulty(),
                       SimulationConfig(min_difficulty=2.0), 1.0)


def test_scenario_validation():
    with pytest.raises(ConfigurationError):
        HashRateScenario(initial_rate=0.0, length=10).validate()
    with pytest.raises(ConfigurationError):
        HashRateScenario(initial_rate=1.0, length=10,
                         events=[(5, 1.0), (5, 2.0)]).validate()
    with pytest.raises(ConfigurationError):
        HashRateScenario(initial_rate=1.0, length=10, events=[(11, 1.0)]).validate()
    with pytest.raises(ConfigurationError):
        HashRateScenario(initial_rate=1.0, length=10, events=[(3, -1.0)]).validate()


def test_as_trace_round_trip():
    rate = 1e12
    scenario = HashRateScenario(initial_rate=rate, length=50)
    trace = run_simulation(scenario, ConstantDifficulty(), SimulationConfig(seed=0),
                           rate * 10.0)
    rebuilt = as_trace(trace.records())
    assert np.array_equal(rebuilt.difficulties, trace.difficulties)
    assert np.array_equal(rebuilt.timestamps, trace.timestamps)
    assert isinstance(rebuilt, Trace)
    assert trace[0].height == 1
