"""One-shot replication pipeline: the six-event hash-rate scenario, both
controllers, and the difficulty-quality comparison.

Scenario (full scale, 300k blocks at a 1.455e14 hash/s base): +20% injected at
block 50k and withdrawn at 100k (normal-sized changes bracketing two
constant-rate periods), +40% injected at 150k and withdrawn at 155k (a short
abnormal spike), +40% injected at 200k and withdrawn at 250k (a sustained
abnormal shift).

The baseline run uses the Ethereum block-time rule; the proposed run gates a
drift-calibrated arctan rule with the trained variance-pattern indicator.
Both difficulty rules are calibrated to the same setpoint (the solved
zero-drift mean of the baseline rule), so steady-state period means agree.

Period bounds: the loosely-defined "constant-rate stretches" are reported in
two flavors.  The reference bounds start 5k blocks after the rate change; the
headline comparison uses converged bounds that start 30k/25k after it,
because the gated arctan rule's closed-loop gain is ~5x lower than the
baseline's near the setpoint (slope 1e-5/s vs 5.4e-5/s) and its indicator
gate averages well below 1 during a transition, so its transient lasts
10k-20k blocks and would otherwise dominate the within-period statistics.
"""

from __future__ import annotations

import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .chain import HashRateScenario, SimulationConfig, run_simulation
from .controllers import (ConstantOne, EthereumRule, GeneralController,
                          NeuralIndicator)
from .dataio import (AnalysisModel, ControllerModel, ExperimentConfig,
                     PeriodModel, ScenarioModel, SimModel, fmt,
                     write_json_report, write_trace_csv)
from .errors import ConfigurationError
from .estimators import (convergence_blocks, mse_reduction_percent,
                         period_metrics, relative_step_magnitudes)
from .features import FeatureConfig
from .mlp import MlpModel
from .training import TrainingConfig, solved_ethereum_target, train_indicator
from .updatefn import (ArctanUpdate, amplitude_ratio, condition1_report,
                       exponential_distribution, solve_shift)

BASE_RATE = 1.455e14
FULL_LENGTH = 300_000

# (height, relative rate multiplier) applied from the next block on
RATE_STEPS = (
    (50_000, 1.20),   # +20% injected (normal-sized)
    (100_000, 1.00),  # withdrawn
    (150_000, 1.40),  # +40% injected (abnormal spike)
    (155_000, 1.00),  # withdrawn after 5k blocks
    (200_000, 1.40),  # +40% injected (sustained)
    (250_000, 1.00),  # withdrawn
)

# Constant-rate stretches between the normal-sized changes.  Reference bounds
# start 5k blocks after the change; converged bounds skip the gated
# controller's longer transient (see module docstring).
REFERENCE_PERIODS = (("period1", 55_000, 100_000), ("period2", 105_000, 150_000))
CONVERGED_PERIODS = (("period1", 80_000, 100_000), ("period2", 130_000, 150_000))

# Stretches running at the abnormal +40% rate.
ABNORMAL_WINDOWS = (("spike", 150_000, 155_000), ("sustained", 200_000, 250_000))

# Default arctan responsiveness: the published Ethereum-replacement values;
# the vertical shift is solved against the setpoint distribution at run time.
ARCTAN_SCALE = 1e-3
ARCTAN_SLOPE = 1e-2
ARCTAN_CENTER = 11.0


def fig4_scenario(scale: int = 1, base_rate: float = BASE_RATE) -> HashRateScenario:
    """The six-event scenario, optionally height-scaled down by `scale`."""
    if scale < 1:
        raise ConfigurationError("scale must be >= 1")
    events = [(h // scale, base_rate * mult) for h, mult in RATE_STEPS]
    return HashRateScenario(initial_rate=base_rate, length=FULL_LENGTH // scale,
                            events=events)


def fig4_experiment(seed: int = 0, base_rate: float = BASE_RATE) -> ExperimentConfig:
    """Baseline experiment config (Ethereum rule on the six-event scenario)."""
    scenario = fig4_scenario(base_rate=base_rate)
    return ExperimentConfig(
        scenario=ScenarioModel(
            initial_rate=scenario.initial_rate,
            length=scenario.length,
            events=[{"height": h, "rate": r} for h, r in scenario.events],
        ),
        controller=ControllerModel(kind="ethereum"),
        sim=SimModel(seed=seed),
        analysis=AnalysisModel(
            periods=[PeriodModel(name=n, start=s, end=e)
                     for n, s, e in REFERENCE_PERIODS],
        ),
    )


def _scaled(periods, scale):
    return [(name, start // scale, end // scale) for name, start, end in periods]


def run_replication(out_dir, *, seed: int = 0, quick: bool = False,
                    model_path=None, samples_per_class: int = 1200,
                    train_seed: int = 2718) -> dict:
    """Run the full pipeline and write traces, series, and the metrics report.

    quick mode scales all heights by 1/10 and trains a smaller model; it is a
    smoke configuration, not a statistics-grade run.  A pre-trained model can
    be supplied to skip training.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scale = 10 if quick else 1
    fcfg = FeatureConfig()

    # Setpoint and drift-free arctan calibration.
    target = solved_ethereum_target()
    dist = exponential_distribution(target)
    shift = solve_shift(ARCTAN_SCALE, ARCTAN_SLOPE, ARCTAN_CENTER, dist)
    arctan = ArctanUpdate(ARCTAN_SCALE, ARCTAN_SLOPE, ARCTAN_CENTER, shift)
    calibration = condition1_report(arctan, dist)

    # Indicator model: load or train.
    if model_path is not None:
        model = MlpModel.load(model_path)
        training_report = {"loaded_from": str(model_path)}
    else:
        tcfg = TrainingConfig(
            base_rate=BASE_RATE,
            target_block_time=target,
            samples_per_class=max(60, samples_per_class // 10) if quick
            else samples_per_class,
            eval_samples_per_class=60 if quick else 300,
            augment_offsets=(1000, 2000, 5000),
            epochs=2000 if quick else 8000,
            learning_rate=0.03,
            seed=train_seed,
        )
        model, training_report = train_indicator(tcfg, fcfg)
        model_file = out / "indicator_model.json"
        model.save(model_file)
        training_report["model_path"] = str(model_file)

    scenario = fig4_scenario(scale=scale)
    sim = SimulationConfig(seed=seed)
    initial_difficulty = BASE_RATE * target

    baseline_ctrl = GeneralController(ConstantOne(), EthereumRule())
    baseline = run_simulation(scenario, baseline_ctrl, sim, initial_difficulty)

    indicator_series: list[float] = []
    proposed_ctrl = GeneralController(
        NeuralIndicator(model, fcfg, record=indicator_series), arctan)
    proposed = run_simulation(scenario, proposed_ctrl, sim, initial_difficulty)
    gate = np.asarray(indicator_series)

    write_trace_csv(baseline, out / "baseline_trace.csv")
    write_trace_csv(proposed, out / "proposed_trace.csv")
    _write_series(out / "indicator_series.csv", "height,indicator",
                  proposed.heights, gate)
    _write_series(out / "difficulty_baseline.csv", "height,difficulty",
                  baseline.heights, baseline.difficulties)
    _write_series(out / "difficulty_proposed.csv", "height,difficulty",
                  proposed.heights, proposed.difficulties)

    report = _metrics_report(baseline, proposed, gate, target, scale)
    report["calibration"] = {
        "target_block_time": target,
        "arctan": {"scale": ARCTAN_SCALE, "slope": ARCTAN_SLOPE,
                   "center": ARCTAN_CENTER, "shift": shift},
        **calibration,
    }
    report["amplitude"] = {
        "ratio_baseline_over_proposed": amplitude_ratio(
            EthereumRule(), ArctanUpdate(ARCTAN_SCALE, ARCTAN_SLOPE, ARCTAN_CENTER)),
        "note": "exact value with the published parameters; the rounded "
                "folklore figure 99/pi = {:.4f} overstates it".format(99.0 / math.pi),
    }
    report["training"] = training_report
    report["config"] = {
        "powlab_version": __version__,
        "seed": seed,
        "quick": quick,
        "scale": scale,
        "scenario": {"initial_rate": scenario.initial_rate,
                     "length": scenario.length,
                     "events": [[h, r] for h, r in scenario.events]},
        "feature_config": asdict(fcfg),
        "initial_difficulty": initial_difficulty,
    }
    report["outputs"] = {name: str(out / name) for name in (
        "baseline_trace.csv", "proposed_trace.csv", "indicator_series.csv",
        "difficulty_baseline.csv", "difficulty_proposed.csv", "metrics.json")}
    write_json_report(report, out / "metrics.json")
    return report


def _write_series(path, header, heights, values) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for h, v in zip(heights, values):
            fh.write(f"{int(h)},{fmt(v)}\n")


def _period_entry(trace, start, end, target):
    m = period_metrics(trace, start, end, target)
    return {"start": start, "end": end, "mean_difficulty": m.mean_difficulty,
            "mse": m.mse, "convergence_blocks": m.convergence_blocks}


def _metrics_report(baseline, proposed, gate, target, scale) -> dict:
    report: dict = {
        "mean_block_time": {
            "baseline": float(baseline.block_times.mean()),
            "proposed": float(proposed.block_times.mean()),
        },
        "periods": {},
        "comparison": {},
    }

    for flavor, bounds in (("reference", REFERENCE_PERIODS),
                           ("converged", CONVERGED_PERIODS)):
        periods = {}
        comparison = {}
        for name, start, end in _scaled(bounds, scale):
            b = _period_entry(baseline, start, end, target)
            p = _period_entry(proposed, start, end, target)
            periods[name] = {"baseline": b, "proposed": p}
            comparison[name] = {
                "mse_reduction_percent": mse_reduction_percent(b["mse"], p["mse"]),
                "mean_difference_percent": 100.0 * abs(
                    p["mean_difficulty"] / b["mean_difficulty"] - 1.0),
            }
        report["periods"][flavor] = periods
        report["comparison"][flavor] = comparison

    # Convergence after each scheduled change, both controllers.
    convergence = {}
    for height, _ in RATE_STEPS:
        h = height // scale
        convergence[str(h)] = {
            "baseline": convergence_blocks(baseline.block_times, h, target),
            "proposed": convergence_blocks(proposed.block_times, h, target),
        }
    report["convergence_after_change"] = convergence

    # Suppression during the abnormal +-40% windows: per-block difficulty
    # churn of both controllers, and the gate level against its period-1 mean.
    churn_b = relative_step_magnitudes(baseline.difficulties)
    churn_p = relative_step_magnitudes(proposed.difficulties)
    p1_start, p1_end = REFERENCE_PERIODS[0][1] // scale, REFERENCE_PERIODS[0][2] // scale
    gate_p1 = float(np.nanmean(gate[p1_start - 1:p1_end - 1]))
    suppression = {"gate_period1_mean": gate_p1, "windows": {}}
    for name, start, end in _scaled(ABNORMAL_WINDOWS, scale):
        # steps between consecutive blocks that both lie inside the window
        steps = slice(start - 1, end - 2)
        suppression["windows"][name] = {
            "start": start, "end": end,
            "mean_step_baseline": float(churn_b[steps].mean()),
            "mean_step_proposed": float(churn_p[steps].mean()),
            "gate_mean": float(np.nanmean(gate[start - 1:end - 1])),
        }
    report["suppression"] = suppression
    return report
