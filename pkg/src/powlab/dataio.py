"""File formats: trace CSV, real-chain CSV, experiment configs, JSON reports.

CSV columns are rendered with 17 significant digits so every float round-trips
exactly through its own loader.  Experiment configs are strict JSON (unknown
keys rejected); loaders raise ConfigurationError / DataValidationError, which
carry the process exit codes (2 and 3).
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .chain import TRACE_HEADER, HashRateScenario, SimulationConfig, Trace
from .errors import ConfigurationError, DataValidationError

CHAIN_HEADER = "height,timestamp,difficulty"

# Default period bounds: the two constant-rate stretches of the reference
# scenario as read from its schedule (see replicate.fig4_experiment for the
# post-convergence bounds that replication reports use).
DEFAULT_PERIODS = (("period1", 55_000, 100_000), ("period2", 105_000, 150_000))


def fmt(x: float) -> str:
    """17-significant-digit rendering; round-trip exact for float64."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------- trace CSV

def write_trace_csv(trace: Trace, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        for i in range(len(trace)):
            fh.write(
                f"{int(trace.heights[i])},{fmt(trace.timestamps[i])},"
                f"{fmt(trace.block_times[i])},{fmt(trace.difficulties[i])},"
                f"{fmt(trace.scheduled_rates[i])}\n"
            )


def load_trace_csv(path) -> Trace:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"trace file not found: {path}")
    heights, timestamps, block_times, difficulties, rates = [], [], [], [], []
    with path.open("r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != TRACE_HEADER:
            raise DataValidationError(
                f"{path}:1: expected header {TRACE_HEADER!r}, got {header!r}"
            )
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 5:
                raise DataValidationError(f"{path}:{lineno}: expected 5 fields")
            try:
                heights.append(int(parts[0]))
                timestamps.append(float(parts[1]))
                block_times.append(float(parts[2]))
                difficulties.append(float(parts[3]))
                rates.append(float(parts[4]))
            except ValueError as exc:
                raise DataValidationError(f"{path}:{lineno}: {exc}")
    return Trace(
        np.array(heights, dtype=np.int64), np.array(timestamps),
        np.array(block_times), np.array(difficulties), np.array(rates),
    )


# ----------------------------------------------------------- real chain CSV

def load_chain_csv(path) -> Trace:
    """Load `height,timestamp,difficulty` rows, deriving block times.

    The first row only anchors the timestamp difference (its own block time is
    undefined), so the returned trace starts at the second row.  Heights must
    be contiguous ascending and timestamps non-decreasing.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"chain file not found: {path}")
    rows = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file")
        if [h.strip() for h in header] != CHAIN_HEADER.split(","):
            raise DataValidationError(
                f"{path}:1: expected header {CHAIN_HEADER!r}"
            )
        for lineno, parts in enumerate(reader, start=2):
            if not parts:
                continue
            if len(parts) != 3:
                raise DataValidationError(f"{path}:{lineno}: expected 3 fields")
            try:
                rows.append((int(parts[0]), float(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise DataValidationError(f"{path}:{lineno}: {exc}")
    if len(rows) < 2:
        raise DataValidationError(f"{path}: need at least 2 rows to derive block times")

    bad_heights = [rows[i + 1][0] for i in range(len(rows) - 1)
                   if rows[i + 1][0] != rows[i][0] + 1]
    if bad_heights:
        raise DataValidationError(
            f"{path}: heights not contiguous ascending at {bad_heights[:10]}"
        )
    non_monotone = [rows[i + 1][0] for i in range(len(rows) - 1)
                    if rows[i + 1][1] < rows[i][1]]
    if non_monotone:
        raise DataValidationError(
            f"{path}: timestamps decrease at heights {non_monotone[:10]}"
        )
    non_positive = [h for h, _, d in rows if d <= 0.0]
    if non_positive:
        raise DataValidationError(
            f"{path}: non-positive difficulty at heights {non_positive[:10]}"
        )

    heights = np.array([h for h, _, _ in rows[1:]], dtype=np.int64)
    timestamps = np.array([t for _, t, _ in rows[1:]])
    difficulties = np.array([d for _, _, d in rows[1:]])
    prev = np.array([t for _, t, _ in rows[:-1]])
    return Trace(heights, timestamps, timestamps - prev, difficulties,
                 np.full(len(heights), np.nan))


def write_synthetic_chain_csv(path, n_blocks: int = 20_000, seed: int = 7,
                              base_rate: float = 1.455e14,
                              target_time: float = 13.0) -> None:
    """Stand-in generator for the real-chain CSV schema.

    Emits a plausible chain (a few random +-10% rate steps, constant
    difficulty-to-rate ratio) purely for exercising the ingestion and
    windowed-analysis paths; it is not a controller simulation.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    rate = base_rate
    difficulty = base_rate * target_time
    t = 0.0
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(CHAIN_HEADER + "\n")
        for h in range(n_blocks):
            if h and h % 2500 == 0:
                rate *= 1.0 + rng.uniform(-0.1, 0.1)
                difficulty = rate * target_time
            t += -difficulty / rate * np.log(1.0 - rng.random())
            fh.write(f"{h},{fmt(t)},{fmt(difficulty)}\n")


# ------------------------------------------------------- experiment configs

class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RateEventModel(StrictModel):
    height: int = Field(ge=1)
    rate: float = Field(gt=0.0)


class ScenarioModel(StrictModel):
    initial_rate: float = Field(gt=0.0)
    length: int = Field(ge=0)
    events: list[RateEventModel] = Field(default_factory=list)

    def to_scenario(self) -> HashRateScenario:
        scenario = HashRateScenario(
            initial_rate=self.initial_rate,
            length=self.length,
            events=[(e.height, e.rate) for e in self.events],
        )
        scenario.validate()
        return scenario


class ArctanParamsModel(StrictModel):
    scale: float = Field(gt=0.0)
    slope: float = Field(gt=0.0)
    center: float
    shift: float = 0.0


class FeatureConfigModel(StrictModel):
    stride: int = Field(default=200, ge=1)
    count: int = Field(default=11, ge=2)
    window: int = Field(default=2000, ge=2)


class ControllerModel(StrictModel):
    kind: Literal["ethereum", "bitcoin", "arctan", "constant"]
    initial_difficulty: Optional[float] = Field(default=None, gt=0.0)
    # bitcoin
    retarget_blocks: int = Field(default=2016, ge=1)
    target_block_time: float = Field(default=600.0, gt=0.0)
    # arctan
    arctan: Optional[ArctanParamsModel] = None
    indicator: Literal["constant", "neural"] = "constant"
    model_path: Optional[str] = None
    feature: FeatureConfigModel = Field(default_factory=FeatureConfigModel)
    update_interval: int = Field(default=1, ge=1)


class SimModel(StrictModel):
    seed: int = 0
    propagation_delay: float = Field(default=0.0, ge=0.0)
    min_difficulty: float = Field(default=1.0, gt=0.0)
    integer_timestamps: bool = False

    def to_config(self) -> SimulationConfig:
        return SimulationConfig(
            seed=self.seed,
            propagation_delay=self.propagation_delay,
            min_difficulty=self.min_difficulty,
            integer_timestamps=self.integer_timestamps,
        )


class PeriodModel(StrictModel):
    name: str
    start: int = Field(ge=1)
    end: int = Field(ge=2)


class AnalysisModel(StrictModel):
    window_lengths: list[int] = Field(default_factory=lambda: [2000, 5000, 50000])
    periods: list[PeriodModel] = Field(
        default_factory=lambda: [
            PeriodModel(name=name, start=start, end=end)
            for name, start, end in DEFAULT_PERIODS
        ]
    )
    target_time: Optional[float] = Field(default=None, gt=0.0)


class ExperimentConfig(StrictModel):
    scenario: ScenarioModel
    controller: ControllerModel
    sim: SimModel = Field(default_factory=SimModel)
    analysis: AnalysisModel = Field(default_factory=AnalysisModel)


def _bundled_config(name: str) -> Optional[Path]:
    candidate = resources.files("powlab.data") / f"{name}.json"
    return Path(str(candidate)) if candidate.is_file() else None


def load_experiment(path) -> ExperimentConfig:
    """Parse and validate an experiment file (or a bundled config name)."""
    p = Path(path)
    if not p.exists():
        bundled = _bundled_config(str(path))
        if bundled is None:
            raise ConfigurationError(f"experiment config not found: {path}")
        p = bundled
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{p} is not valid JSON: {exc}")
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(part) for part in first["loc"])
        raise ConfigurationError(f"{p}: invalid field {loc!r}: {first['msg']}")
    if cfg.controller.model_path and not Path(cfg.controller.model_path).exists():
        raise ConfigurationError(
            f"{p}: controller.model_path does not exist: {cfg.controller.model_path}"
        )
    return cfg


# ------------------------------------------------------------- JSON reports

def write_json_report(payload: dict, path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n",
                          encoding="utf-8")


def load_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{p} is not valid JSON: {exc}")
