"""Assemble controllers from experiment configs, run them, analyze traces."""

from __future__ import annotations

import numpy as np

from . import controllers as ctl
from .chain import Trace, run_simulation
from .dataio import (AnalysisModel, ControllerModel, ExperimentConfig,
                     write_trace_csv)
from .errors import ConfigurationError
from .estimators import (mse_reduction_percent, nominal_hash_rate,
                         period_metrics, periodic_hash_rate)
from .features import FeatureConfig
from .mlp import MlpModel
from .training import solved_ethereum_target
from .updatefn import ArctanUpdate, equilibrium_mean, exponential_distribution


def build_update_function(cfg: ControllerModel):
    if cfg.kind == "ethereum":
        return ctl.EthereumRule()
    if cfg.kind == "bitcoin":
        return ctl.BitcoinRule(cfg.retarget_blocks, cfg.target_block_time)
    if cfg.kind == "arctan":
        if cfg.arctan is None:
            raise ConfigurationError("arctan controller needs an 'arctan' parameter block")
        p = cfg.arctan
        return ArctanUpdate(p.scale, p.slope, p.center, p.shift)
    return None  # constant


def equilibrium_block_time(cfg: ControllerModel) -> float:
    """Setpoint block time implied by the controller's update rule."""
    if cfg.kind == "ethereum":
        return solved_ethereum_target()
    if cfg.kind == "bitcoin":
        return cfg.target_block_time
    if cfg.kind == "arctan":
        fn = build_update_function(cfg)
        guess = max(cfg.arctan.center, 1.0)
        return equilibrium_mean(fn, lo=guess * 0.05, hi=guess * 20.0)
    raise ConfigurationError("a constant controller has no implied setpoint")


def build_controller(cfg: ControllerModel, min_difficulty: float,
                     indicator_record: list | None = None):
    """Instantiate the configured controller (optionally recording I_k)."""
    if cfg.kind == "constant":
        return ctl.ConstantDifficulty()
    if cfg.kind == "bitcoin":
        if cfg.indicator == "neural":
            raise ConfigurationError(
                "the bitcoin controller is paired with its retarget-epoch "
                "indicator, not a neural one"
            )
        return ctl.GeneralController(
            ctl.EveryN(cfg.retarget_blocks),
            ctl.BitcoinRule(cfg.retarget_blocks, cfg.target_block_time),
            window=cfg.retarget_blocks, min_difficulty=min_difficulty,
        )
    update_fn = build_update_function(cfg)
    if cfg.indicator == "neural":
        if not cfg.model_path:
            raise ConfigurationError("neural indicator needs controller.model_path")
        model = MlpModel.load(cfg.model_path)
        fcfg = FeatureConfig(cfg.feature.stride, cfg.feature.count, cfg.feature.window)
        indicator = ctl.NeuralIndicator(model, fcfg, record=indicator_record)
    else:
        indicator = ctl.ConstantOne()
    return ctl.GeneralController(
        indicator, update_fn, window=1, min_difficulty=min_difficulty,
        update_interval=cfg.update_interval,
    )


def resolve_initial_difficulty(cfg: ExperimentConfig) -> float:
    if cfg.controller.initial_difficulty is not None:
        return cfg.controller.initial_difficulty
    if cfg.controller.kind == "constant":
        raise ConfigurationError(
            "a constant controller requires controller.initial_difficulty"
        )
    return cfg.scenario.initial_rate * equilibrium_block_time(cfg.controller)


def run_experiment(cfg: ExperimentConfig, out_trace=None, seed: int | None = None,
                   indicator_record: list | None = None):
    """Run one configured simulation; returns (trace, summary dict)."""
    scenario = cfg.scenario.to_scenario()
    sim = cfg.sim.to_config()
    if seed is not None:
        sim.seed = seed
    initial = resolve_initial_difficulty(cfg)
    controller = build_controller(cfg.controller, sim.min_difficulty,
                                  indicator_record=indicator_record)
    trace = run_simulation(scenario, controller, sim, initial)
    if out_trace is not None:
        write_trace_csv(trace, out_trace)

    target = cfg.analysis.target_time
    if target is None and cfg.controller.kind != "constant":
        target = equilibrium_block_time(cfg.controller)
    summary = {
        "n_blocks": len(trace),
        "mean_block_time": float(trace.block_times.mean()) if len(trace) else None,
        "initial_difficulty": initial,
        "final_difficulty": float(trace.difficulties[-1]) if len(trace) else None,
        "seed": sim.seed,
        "target_block_time": target,
        "periods": _period_summaries(trace, cfg.analysis, target),
        "config": cfg.model_dump(),
    }
    return trace, summary


def _period_summaries(trace: Trace, analysis: AnalysisModel, target) -> dict:
    out = {}
    for period in analysis.periods:
        if period.end - 1 > len(trace) or target is None:
            continue
        m = period_metrics(trace, period.start, period.end, target)
        out[period.name] = {
            "start": m.start, "end": m.end,
            "mean_difficulty": m.mean_difficulty,
            "mse": m.mse,
            "convergence_blocks": m.convergence_blocks,
        }
    return out


def analyze_traces(named_traces: list[tuple[str, Trace]], analysis: AnalysisModel,
                   target_time: float | None = None) -> dict:
    """Per-trace period metrics and windowed rate-change summaries; when two
    traces are given, the second is compared against the first as baseline."""
    if not 1 <= len(named_traces) <= 2:
        raise ConfigurationError("analyze expects one or two traces")
    target = target_time if target_time is not None else analysis.target_time
    report: dict = {"traces": {}, "analysis_config": analysis.model_dump()}
    if target is not None:
        report["target_block_time"] = target

    for name, trace in named_traces:
        entry = {
            "n_blocks": len(trace),
            "mean_block_time": float(trace.block_times.mean()) if len(trace) else None,
            "periods": {},
            "rate_change_windows": {},
        }
        if target is not None:
            entry["periods"] = _period_summaries(trace, analysis, target)
        for window in analysis.window_lengths:
            if len(trace) < 3 * window:
                continue
            rates = nominal_hash_rate(trace, window)[window - 1:]
            finite = rates[np.isfinite(rates)]
            if len(finite) < 2 * window:
                continue
            periodic = periodic_hash_rate(finite, window)
            entry["rate_change_windows"][str(window)] = periodic.summary
        report["traces"][name] = entry

    if len(named_traces) == 2:
        (base_name, base_trace), (cand_name, cand_trace) = named_traces
        comparison = {"baseline": base_name, "candidate": cand_name, "periods": {}}
        if target is not None:
            base_p = _period_summaries(base_trace, analysis, target)
            cand_p = _period_summaries(cand_trace, analysis, target)
            for pname in base_p.keys() & cand_p.keys():
                b, c = base_p[pname], cand_p[pname]
                comparison["periods"][pname] = {
                    "mse_baseline": b["mse"],
                    "mse_candidate": c["mse"],
                    "mse_reduction_percent": mse_reduction_percent(b["mse"], c["mse"]),
                    "mean_baseline": b["mean_difficulty"],
                    "mean_candidate": c["mean_difficulty"],
                    "mean_difference_percent": 100.0 * abs(
                        c["mean_difficulty"] / b["mean_difficulty"] - 1.0),
                }
        report["comparison"] = comparison
    return report
