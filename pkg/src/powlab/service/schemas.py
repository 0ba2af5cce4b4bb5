"""Request/response models for the lab service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..dataio import AnalysisModel, ExperimentConfig, PeriodModel


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorDetail(BaseModel):
    error: str
    message: str
    exit_code: int


# ------------------------------------------------------------------ simulate

class SimulateRequest(StrictModel):
    config: Optional[ExperimentConfig] = None
    config_path: Optional[str] = None     # file path or bundled name (e.g. "fig4")
    out_trace: Optional[str] = None
    seed: Optional[int] = None            # overrides the config's seed


class PeriodMetricsOut(BaseModel):
    start: int
    end: int
    mean_difficulty: float
    mse: float
    convergence_blocks: Optional[int]


class SimulateResponse(BaseModel):
    n_blocks: int
    mean_block_time: Optional[float]
    initial_difficulty: float
    final_difficulty: Optional[float]
    seed: int
    target_block_time: Optional[float]
    periods: dict[str, PeriodMetricsOut]
    trace_path: Optional[str]
    config: dict


# ----------------------------------------------------------------- calibrate

class DistributionModel(StrictModel):
    kind: Literal["exponential", "erlang"] = "exponential"
    block_mean: float = Field(gt=0.0)
    shape: int = Field(default=1, ge=1)


class CalibrateRequest(StrictModel):
    scale: float                            # CLI flag -A
    slope: float                            # CLI flag -B
    center: float                           # CLI flag -C
    shift: Optional[float] = None           # fixed when solving for the center
    distribution: DistributionModel
    solve_for: Literal["shift", "center"] = "shift"
    out_report: Optional[str] = None


class CalibrateResponse(BaseModel):
    scale: float
    slope: float
    center: float
    shift: float
    residual: float
    quadrature_error: float
    tail_cutoff: float
    amplitude: float
    supremum: float
    distribution: DistributionModel
    solved_for: str
    report_path: Optional[str]


# --------------------------------------------------------------------- train

class TrainRequest(StrictModel):
    out_model: str
    out_report: Optional[str] = None
    base_rate: float = Field(default=1.455e14, gt=0.0)
    target_block_time: Optional[float] = Field(default=None, gt=0.0)
    change_low: float = -0.60
    change_high: float = 0.60
    anomaly_bound: float = Field(default=0.20, gt=0.0)
    samples_per_class: int = Field(default=1200, ge=1)
    eval_samples_per_class: int = Field(default=300, ge=0)
    augment_offsets: tuple[int, ...] = (1000, 2000, 5000)
    epochs: int = Field(default=8000, ge=1)
    learning_rate: float = Field(default=0.03, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0)
    n_hidden: int = Field(default=25, ge=1)
    seed: int = 2718
    feature_stride: int = Field(default=200, ge=1)
    feature_count: int = Field(default=11, ge=2)
    feature_window: int = Field(default=2000, ge=2)


class TrainResponse(BaseModel):
    model_path: str
    report_path: Optional[str]
    train_accuracy: float
    accuracy_by_blocks_elapsed: dict
    report: dict


# ------------------------------------------------------------------ classify

class ClassifyRequest(StrictModel):
    model_path: str
    features: Optional[list[float]] = None      # raw window variances
    block_times: Optional[list[float]] = None   # or enough times to fill them
    feature_stride: int = Field(default=200, ge=1)
    feature_count: int = Field(default=11, ge=2)
    feature_window: int = Field(default=2000, ge=2)


class ClassifyResponse(BaseModel):
    probabilities: list[float]      # (no change, normal change, abnormal change)
    indicator: float                # the normal-change probability
    predicted_class: int
    class_names: list[str]


# ------------------------------------------------------------------- analyze

class AnalyzeRequest(StrictModel):
    traces: list[str] = Field(min_length=1, max_length=2)
    periods: Optional[list[PeriodModel]] = None
    window_lengths: Optional[list[int]] = None
    target_time: Optional[float] = Field(default=None, gt=0.0)
    out_report: Optional[str] = None

    def to_analysis(self) -> AnalysisModel:
        kwargs = {}
        if self.periods is not None:
            kwargs["periods"] = self.periods
        if self.window_lengths is not None:
            kwargs["window_lengths"] = self.window_lengths
        if self.target_time is not None:
            kwargs["target_time"] = self.target_time
        return AnalysisModel(**kwargs)


class AnalyzeResponse(BaseModel):
    report: dict
    report_path: Optional[str]


# ----------------------------------------------------------------- replicate

class ReplicateRequest(StrictModel):
    out_dir: str
    seed: int = 0
    quick: bool = False
    model_path: Optional[str] = None
    samples_per_class: int = Field(default=1200, ge=1)
    train_seed: int = 2718


class ReplicateResponse(BaseModel):
    report: dict
    out_dir: str
