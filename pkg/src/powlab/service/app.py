"""FastAPI service wrapping the lab.

Every operation the CLI exposes is a POST endpoint here; the CLI is a thin
client over this app (in-process by default).  Library errors map onto HTTP
statuses and carry the process exit code in the payload so clients can
propagate it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..dataio import load_experiment, load_trace_csv, write_json_report
from ..errors import (ConfigurationError, DataValidationError, NumericalError,
                      PowlabError)
from ..experiments import analyze_traces, run_experiment
from ..features import FeatureConfig, FeatureState
from ..mlp import MlpModel
from ..replicate import run_replication
from ..training import CLASS_NAMES, TrainingConfig, train_indicator
from ..updatefn import (ArctanUpdate, BlockTimeSumDistribution,
                        condition1_report, solve_center, solve_shift)
from . import schemas as s

_STATUS = {
    ConfigurationError: 400,
    DataValidationError: 422,
    NumericalError: 500,
}


def create_app() -> FastAPI:
    app = FastAPI(
        title="powlab",
        version=__version__,
        description="Proof-of-work difficulty-control laboratory",
    )

    @app.exception_handler(PowlabError)
    async def powlab_error_handler(request: Request, exc: PowlabError):
        status = _STATUS.get(type(exc), 500)
        detail = s.ErrorDetail(error=type(exc).__name__, message=str(exc),
                               exit_code=exc.exit_code)
        return JSONResponse(status_code=status,
                            content={"detail": detail.model_dump()})

    @app.get("/health", response_model=s.HealthResponse)
    def health():
        return s.HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=s.SimulateResponse)
    def simulate(req: s.SimulateRequest):
        if (req.config is None) == (req.config_path is None):
            raise ConfigurationError("provide exactly one of config, config_path")
        cfg = req.config if req.config is not None else load_experiment(req.config_path)
        trace, summary = run_experiment(cfg, out_trace=req.out_trace, seed=req.seed)
        return s.SimulateResponse(
            n_blocks=summary["n_blocks"],
            mean_block_time=summary["mean_block_time"],
            initial_difficulty=summary["initial_difficulty"],
            final_difficulty=summary["final_difficulty"],
            seed=summary["seed"],
            target_block_time=summary["target_block_time"],
            periods={name: s.PeriodMetricsOut(**vals)
                     for name, vals in summary["periods"].items()},
            trace_path=str(req.out_trace) if req.out_trace else None,
            config=summary["config"],
        )

    @app.post("/calibrate", response_model=s.CalibrateResponse)
    def calibrate(req: s.CalibrateRequest):
        dist = BlockTimeSumDistribution(req.distribution.kind,
                                        req.distribution.block_mean,
                                        req.distribution.shape)
        if req.solve_for == "shift":
            shift = solve_shift(req.scale, req.slope, req.center, dist)
            fn = ArctanUpdate(req.scale, req.slope, req.center, shift)
        else:
            fixed_shift = req.shift if req.shift is not None else 0.0
            center = solve_center(req.scale, req.slope, fixed_shift, dist)
            fn = ArctanUpdate(req.scale, req.slope, center, fixed_shift)
        diag = condition1_report(fn, dist)
        resp = s.CalibrateResponse(
            scale=fn.scale, slope=fn.slope, center=fn.center, shift=fn.shift,
            residual=diag["residual"],
            quadrature_error=diag["quadrature_error"],
            tail_cutoff=diag["tail_cutoff"],
            amplitude=fn.amplitude(),
            supremum=fn.supremum(),
            distribution=req.distribution,
            solved_for=req.solve_for,
            report_path=str(req.out_report) if req.out_report else None,
        )
        if req.out_report:
            write_json_report(resp.model_dump(), req.out_report)
        return resp

    @app.post("/train", response_model=s.TrainResponse)
    def train(req: s.TrainRequest):
        fcfg = FeatureConfig(req.feature_stride, req.feature_count,
                             req.feature_window)
        cfg = TrainingConfig(
            base_rate=req.base_rate,
            target_block_time=req.target_block_time,
            change_low=req.change_low, change_high=req.change_high,
            anomaly_bound=req.anomaly_bound,
            samples_per_class=req.samples_per_class,
            eval_samples_per_class=req.eval_samples_per_class,
            augment_offsets=tuple(req.augment_offsets),
            n_hidden=req.n_hidden,
            epochs=req.epochs, learning_rate=req.learning_rate,
            momentum=req.momentum, seed=req.seed,
        )
        model, report = train_indicator(cfg, fcfg)
        model.save(req.out_model)
        report["model_path"] = str(req.out_model)
        if req.out_report:
            write_json_report(report, req.out_report)
        return s.TrainResponse(
            model_path=str(req.out_model),
            report_path=str(req.out_report) if req.out_report else None,
            train_accuracy=report["train_accuracy"],
            accuracy_by_blocks_elapsed=report["accuracy_by_blocks_elapsed"],
            report=report,
        )

    @app.post("/classify", response_model=s.ClassifyResponse)
    def classify(req: s.ClassifyRequest):
        model = MlpModel.load(req.model_path)
        if (req.features is None) == (req.block_times is None):
            raise ConfigurationError("provide exactly one of features, block_times")
        if req.features is not None:
            feats = np.asarray(req.features, dtype=float)
            if len(feats) != model.n_inputs:
                raise ConfigurationError(
                    f"model expects {model.n_inputs} features, got {len(feats)}"
                )
        else:
            fcfg = FeatureConfig(req.feature_stride, req.feature_count,
                                 req.feature_window)
            state = FeatureState(fcfg)
            for t in req.block_times:
                state.push(t)
            if not state.ready:
                raise ConfigurationError(
                    f"need at least {fcfg.history_required} block times, "
                    f"got {len(req.block_times)}"
                )
            feats = state.feature_vector()
        probs = model.class_probabilities(feats)
        return s.ClassifyResponse(
            probabilities=[float(p) for p in probs],
            indicator=float(probs[1]),
            predicted_class=int(probs.argmax()),
            class_names=list(CLASS_NAMES),
        )

    @app.post("/analyze", response_model=s.AnalyzeResponse)
    def analyze(req: s.AnalyzeRequest):
        named = []
        for path in req.traces:
            name = Path(path).stem
            if any(n == name for n, _ in named):
                name = f"{name}_{len(named)}"
            named.append((name, load_trace_csv(path)))
        report = analyze_traces(named, req.to_analysis(),
                                target_time=req.target_time)
        if req.out_report:
            write_json_report(report, req.out_report)
        return s.AnalyzeResponse(
            report=report,
            report_path=str(req.out_report) if req.out_report else None,
        )

    @app.post("/replicate", response_model=s.ReplicateResponse)
    def replicate(req: s.ReplicateRequest):
        report = run_replication(
            req.out_dir, seed=req.seed, quick=req.quick,
            model_path=req.model_path,
            samples_per_class=req.samples_per_class,
            train_seed=req.train_seed,
        )
        return s.ReplicateResponse(report=report, out_dir=str(req.out_dir))

    return app


app = create_app()
