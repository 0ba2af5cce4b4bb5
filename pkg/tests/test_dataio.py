import json

import numpy as np
import pytest

from powlab.chain import HashRateScenario, SimulationConfig, run_simulation
from powlab.controllers import ethereum_controller
from powlab.dataio import (DEFAULT_PERIODS, ExperimentConfig, load_chain_csv,
                           load_experiment, load_trace_csv, write_json_report,
                           write_synthetic_chain_csv, write_trace_csv)
from powlab.errors import ConfigurationError, DataValidationError

MINIMAL = {
    "scenario": {"initial_rate": 1e12, "length": 100},
    "controller": {"kind": "ethereum"},
}


def test_trace_round_trip_is_exact(tmp_path):
    rate = 1.455e14
    scenario = HashRateScenario(initial_rate=rate, length=500,
                                events=[(100, 1.25 * rate)])
    trace = run_simulation(scenario, ethereum_controller(), SimulationConfig(seed=8),
                           rate * 13.0)
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    loaded = load_trace_csv(path)
    assert np.array_equal(loaded.heights, trace.heights)
    for attr in ("timestamps", "block_times", "difficulties", "scheduled_rates"):
        assert getattr(loaded, attr).tobytes() == getattr(trace, attr).tobytes()


def test_trace_loader_rejects_garbage(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("height,timestamp\n1,2\n")
    with pytest.raises(DataValidationError):
        load_trace_csv(path)
    with pytest.raises(ConfigurationError):
        load_trace_csv(tmp_path / "missing.csv")


def test_chain_csv_block_time_derivation(tmp_path):
    path = tmp_path / "chain.csv"
    path.write_text("height,timestamp,difficulty\n"
                    "7,0,100\n8,13,100\n9,27,100\n")
    trace = load_chain_csv(path)
    assert trace.heights.tolist() == [8, 9]
    assert trace.block_times.tolist() == [13.0, 14.0]
    assert trace.difficulties.tolist() == [100.0, 100.0]


def test_chain_csv_validation_errors(tmp_path):
    decreasing = tmp_path / "dec.csv"
    decreasing.write_text("height,timestamp,difficulty\n"
                          "1,10,5\n2,9,5\n")
    with pytest.raises(DataValidationError) as err:
        load_chain_csv(decreasing)
    assert "2" in str(err.value)  # names the offending height

    gap = tmp_path / "gap.csv"
    gap.write_text("height,timestamp,difficulty\n1,0,5\n3,1,5\n")
    with pytest.raises(DataValidationError):
        load_chain_csv(gap)

    malformed = tmp_path / "mal.csv"
    malformed.write_text("height,timestamp,difficulty\n1,0,5\n2,x,5\n")
    with pytest.raises(DataValidationError) as err:
        load_chain_csv(malformed)
    assert ":3" in str(err.value)  # line number

    nonpositive = tmp_path / "np.csv"
    nonpositive.write_text("height,timestamp,difficulty\n1,0,5\n2,1,0\n")
    with pytest.raises(DataValidationError):
        load_chain_csv(nonpositive)


def test_synthetic_chain_generator_round_trips(tmp_path):
    path = tmp_path / "synthetic.csv"
    write_synthetic_chain_csv(path, n_blocks=500, seed=3)
    trace = load_chain_csv(path)
    assert len(trace) == 499
    assert np.all(trace.block_times >= 0.0)
    assert np.all(trace.difficulties > 0.0)
    # deterministic for a fixed seed
    path2 = tmp_path / "synthetic2.csv"
    write_synthetic_chain_csv(path2, n_blocks=500, seed=3)
    assert path.read_bytes() == path2.read_bytes()


def test_minimal_experiment_gets_defaults(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(MINIMAL))
    cfg = load_experiment(path)
    assert cfg.sim.seed == 0
    assert cfg.sim.min_difficulty == 1.0
    assert cfg.controller.update_interval == 1
    assert [(p.name, p.start, p.end) for p in cfg.analysis.periods] == \
        list(DEFAULT_PERIODS)


def test_unknown_keys_rejected(tmp_path):
    payload = dict(MINIMAL)
    payload["extra_knob"] = 1
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ConfigurationError) as err:
        load_experiment(path)
    assert "extra_knob" in str(err.value)


def test_missing_and_invalid_configs(tmp_path):
    with pytest.raises(ConfigurationError):
        load_experiment(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{]")
    with pytest.raises(ConfigurationError):
        load_experiment(bad)
    missing_model = tmp_path / "model.json"
    payload = dict(MINIMAL)
    payload["controller"] = {"kind": "arctan", "indicator": "neural",
                             "model_path": str(missing_model),
                             "arctan": {"scale": 1e-3, "slope": 1e-2, "center": 11.0}}
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ConfigurationError):
        load_experiment(path)


def test_bundled_fig4_config_lists_six_events():
    cfg = load_experiment("fig4")
    heights = [e.height for e in cfg.scenario.events]
    assert heights == [50_000, 100_000, 150_000, 155_000, 200_000, 250_000]
    assert cfg.scenario.length == 300_000
    base = cfg.scenario.initial_rate
    assert base == pytest.approx(1.455e14)
    rates = [e.rate for e in cfg.scenario.events]
    assert rates[0] == pytest.approx(1.2 * base)
    assert rates[2] == rates[4] == pytest.approx(1.4 * base)
    assert rates[1] == rates[3] == rates[5] == pytest.approx(base)


def test_experiment_validates_types(tmp_path):
    payload = {"scenario": {"initial_rate": -5, "length": 10},
               "controller": {"kind": "ethereum"}}
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ConfigurationError) as err:
        load_experiment(path)
    assert "initial_rate" in str(err.value)


def test_json_report_round_trip(tmp_path):
    from powlab.dataio import load_json

    payload = {"a": 1.5, "nested": {"b": [1, 2, 3]}}
    path = tmp_path / "report.json"
    write_json_report(payload, path)
    assert load_json(path) == payload


def test_experiment_config_is_strict_model():
    cfg = ExperimentConfig.model_validate(MINIMAL)
    echo = cfg.model_dump()
    assert echo["scenario"]["length"] == 100
    assert echo["sim"]["seed"] == 0
