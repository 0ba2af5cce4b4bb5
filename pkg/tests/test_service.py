import json
import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from powlab.service.app import create_app

from conftest import TINY_FEATURES


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


SMALL_EXPERIMENT = {
    "scenario": {"initial_rate": 1e12, "length": 2000,
                 "events": [{"height": 1000, "rate": 1.2e12}]},
    "controller": {"kind": "ethereum"},
    "sim": {"seed": 5},
    "analysis": {"periods": [{"name": "head", "start": 100, "end": 900}],
                 "window_lengths": []},
}


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


def test_simulate_inline_config(client, tmp_path):
    out = tmp_path / "trace.csv"
    resp = client.post("/simulate", json={
        "config": SMALL_EXPERIMENT, "out_trace": str(out)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["n_blocks"] == 2000
    assert body["trace_path"] == str(out)
    assert out.exists()
    assert "head" in body["periods"]
    # resolved config and seed echoed for reproducibility
    assert body["config"]["sim"]["seed"] == 5
    assert body["seed"] == 5


def test_simulate_seed_override_changes_trace(client):
    means = []
    for seed in (1, 2):
        resp = client.post("/simulate", json={
            "config": SMALL_EXPERIMENT, "seed": seed})
        means.append(resp.json()["mean_block_time"])
    assert means[0] != means[1]


def test_simulate_requires_exactly_one_config_source(client):
    resp = client.post("/simulate", json={})
    assert resp.status_code == 400
    assert resp.json()["detail"]["exit_code"] == 2
    resp = client.post("/simulate", json={
        "config": SMALL_EXPERIMENT, "config_path": "fig4"})
    assert resp.status_code == 400


def test_simulate_missing_config_file(client):
    resp = client.post("/simulate", json={"config_path": "does-not-exist.json"})
    assert resp.status_code == 400
    assert resp.json()["detail"]["exit_code"] == 2


def test_request_schema_is_strict(client):
    resp = client.post("/simulate", json={"config": SMALL_EXPERIMENT,
                                          "unknown_field": True})
    assert resp.status_code == 422


def test_calibrate_solves_shift(client, tmp_path):
    out = tmp_path / "calibration.json"
    resp = client.post("/calibrate", json={
        "scale": 1e-3, "slope": 1e-2, "center": 11.0,
        "distribution": {"kind": "exponential",
                         "block_mean": 9.0 / math.log(2.0)},
        "out_report": str(out)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["shift"] == pytest.approx(-0.0183155517011, abs=1e-9)
    assert abs(body["residual"]) < 1e-10
    assert body["amplitude"] < 1.0
    saved = json.loads(out.read_text())
    assert saved["shift"] == body["shift"]


def test_calibrate_solves_center(client):
    resp = client.post("/calibrate", json={
        "scale": 1e-3, "slope": 1e-2, "center": 0.0, "shift": 0.0,
        "solve_for": "center",
        "distribution": {"kind": "exponential",
                         "block_mean": 9.0 / math.log(2.0)}})
    assert resp.status_code == 200
    body = resp.json()
    assert 0.0 < body["center"] < 13.0
    assert abs(body["residual"]) < 1e-10


def test_calibrate_rejects_bad_scale(client):
    resp = client.post("/calibrate", json={
        "scale": -1.0, "slope": 1e-2, "center": 11.0,
        "distribution": {"kind": "exponential", "block_mean": 13.0}})
    assert resp.status_code == 400
    assert resp.json()["detail"]["exit_code"] == 2


def test_classify_with_features_and_block_times(client, tiny_model_file):
    model_path = str(tiny_model_file)
    feats = [100.0] * TINY_FEATURES.count
    resp = client.post("/classify", json={"model_path": model_path,
                                          "features": feats})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["probabilities"]) == 3
    assert sum(body["probabilities"]) == pytest.approx(1.0, abs=1e-9)
    assert body["indicator"] == pytest.approx(body["probabilities"][1])

    rng = np.random.default_rng(0)
    times = rng.exponential(13.0, TINY_FEATURES.history_required).tolist()
    resp = client.post("/classify", json={
        "model_path": model_path, "block_times": times,
        "feature_stride": TINY_FEATURES.stride,
        "feature_count": TINY_FEATURES.count,
        "feature_window": TINY_FEATURES.window})
    assert resp.status_code == 200

    resp = client.post("/classify", json={
        "model_path": model_path, "block_times": times[:10],
        "feature_stride": TINY_FEATURES.stride,
        "feature_count": TINY_FEATURES.count,
        "feature_window": TINY_FEATURES.window})
    assert resp.status_code == 400  # not enough history


def test_train_endpoint_smoke(client, tmp_path):
    model_path = tmp_path / "model.json"
    report_path = tmp_path / "report.json"
    resp = client.post("/train", json={
        "out_model": str(model_path), "out_report": str(report_path),
        "target_block_time": 13.0,
        "samples_per_class": 10, "eval_samples_per_class": 4,
        "epochs": 40, "augment_offsets": [10, 20],
        "feature_stride": TINY_FEATURES.stride,
        "feature_count": TINY_FEATURES.count,
        "feature_window": TINY_FEATURES.window,
        "seed": 3})
    assert resp.status_code == 200
    body = resp.json()
    assert model_path.exists() and report_path.exists()
    assert set(body["accuracy_by_blocks_elapsed"]) == {"1000", "5000"}
    assert 0.0 <= body["train_accuracy"] <= 1.0


def test_analyze_identical_traces_show_zero_reduction(client, tmp_path):
    trace_path = tmp_path / "t.csv"
    resp = client.post("/simulate", json={
        "config": SMALL_EXPERIMENT, "out_trace": str(trace_path)})
    assert resp.status_code == 200
    copy_path = tmp_path / "t2.csv"
    copy_path.write_bytes(trace_path.read_bytes())
    resp = client.post("/analyze", json={
        "traces": [str(trace_path), str(copy_path)],
        "periods": [{"name": "head", "start": 100, "end": 900}],
        "window_lengths": [200],
        "target_time": 13.0})
    assert resp.status_code == 200
    report = resp.json()["report"]
    comparison = report["comparison"]["periods"]["head"]
    assert comparison["mse_reduction_percent"] == 0.0
    assert comparison["mean_difference_percent"] == 0.0
    windows = report["traces"]["t"]["rate_change_windows"]
    assert "200" in windows and "median" in windows["200"]


def test_analyze_missing_trace(client):
    resp = client.post("/analyze", json={"traces": ["nope.csv"]})
    assert resp.status_code == 400
    assert resp.json()["detail"]["exit_code"] == 2
