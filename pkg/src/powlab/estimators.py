"""Hash-rate estimation and difficulty-quality metrics over chain traces.

The nominal hash rate at height k is the sliding-window ratio
sum(difficulties)/sum(block times); averaging it over disjoint windows gives
the periodically-changing rate whose increments show where the underlying
rate actually moved.  Period metrics (difficulty mean and MSE about the
period's own mean, plus a convergence time) quantify how well a controller
holds difficulty steady between rate changes.

All heights are 1-based chain heights; arrays are aligned so index i holds
height i + 1.  Everything here is pure over its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import as_trace
from .errors import ConfigurationError, DataValidationError


@dataclass(frozen=True)
class PeriodicRates:
    window: int
    period_means: np.ndarray   # one constant per disjoint window
    expanded: np.ndarray       # period_means repeated to block resolution
    deltas: np.ndarray         # consecutive-period differences
    summary: dict              # five-number summary of deltas


@dataclass(frozen=True)
class PeriodMetrics:
    start: int                 # first height in the period (inclusive)
    end: int                   # one past the last height
    mean_difficulty: float
    mse: float                 # mean squared deviation about the period mean
    convergence_blocks: int | None


def nominal_hash_rate(records, window: int) -> np.ndarray:
    """Per-block nominal rate; NaN until a full window exists (height < window).

    Prefix sums give O(1) per block.  A window whose block times sum to zero
    (possible with quantized timestamps) yields NaN for that block.
    """
    trace = as_trace(records)
    if window < 1:
        raise ConfigurationError("window must be >= 1")
    n = len(trace)
    if n < window:
        raise ConfigurationError(f"need at least {window} records, have {n}")
    cs_d = np.concatenate(([0.0], np.cumsum(trace.difficulties)))
    cs_t = np.concatenate(([0.0], np.cumsum(trace.block_times)))
    out = np.full(n, np.nan)
    num = cs_d[window:] - cs_d[:-window]
    den = cs_t[window:] - cs_t[:-window]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[window - 1:] = np.where(den != 0.0, num / den, np.nan)
    return out


def periodic_hash_rate(rates: np.ndarray, window: int) -> PeriodicRates:
    """Average `rates` over disjoint windows and difference consecutive periods."""
    rates = np.asarray(rates, dtype=float)
    if window < 1:
        raise ConfigurationError("window must be >= 1")
    n_periods = len(rates) // window
    if n_periods < 2:
        raise DataValidationError(
            f"need at least two full windows of {window}, have {len(rates)} rates"
        )
    if not np.all(np.isfinite(rates[:n_periods * window])):
        raise DataValidationError("rate series contains non-finite values")
    means = rates[:n_periods * window].reshape(n_periods, window).mean(axis=1)
    deltas = np.diff(means)
    q = np.percentile(deltas, [0, 25, 50, 75, 100])
    summary = {"min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4],
               "mean": float(deltas.mean()), "n_periods": int(n_periods)}
    return PeriodicRates(window, means, np.repeat(means, window), deltas, summary)


def convergence_blocks(block_times: np.ndarray, from_height: int, target: float,
                       ma_window: int = 1000, band: float = 0.05) -> int | None:
    """Blocks after `from_height` until the trailing moving average of block
    times re-enters target * (1 +- band).

    "Re-enters" requires the average to leave the band first; 0 means the
    change never pushed it out (the trailing window lags the disturbance, so
    the scan starts at the first average that left).  None means it left and
    never came back within the trace.
    """
    bt = np.asarray(block_times, dtype=float)
    n = len(bt)
    if not 1 <= from_height <= n:
        raise ConfigurationError(f"from_height {from_height} outside trace")
    cs = np.concatenate(([0.0], np.cumsum(bt)))
    first = max(from_height, ma_window)      # earliest height with a full window
    heights = np.arange(first, n + 1)
    if len(heights) == 0:
        return None
    ma = (cs[heights] - cs[heights - ma_window]) / ma_window
    inside = np.abs(ma - target) <= band * target
    out = np.flatnonzero(~inside)
    if len(out) == 0:
        return 0
    back = np.flatnonzero(inside[out[0]:])
    if len(back) == 0:
        return None
    return int(heights[out[0] + back[0]] - from_height)


def period_metrics(records, start: int, end: int, target_time: float,
                   ma_window: int = 1000, band: float = 0.05) -> PeriodMetrics:
    """Difficulty mean and MSE over heights [start, end), plus convergence time.

    The MSE is taken about the period's own mean, i.e. it equals the
    population variance of the difficulty within the period.
    """
    trace = as_trace(records)
    n = len(trace)
    if not (1 <= start < end <= n + 1):
        raise ConfigurationError(f"period [{start}, {end}) not within trace of {n}")
    d = trace.difficulties[start - 1:end - 1]
    if len(d) == 0:
        raise ConfigurationError("empty period")
    mean = float(d.mean())
    mse = float(np.mean((d - mean) ** 2))
    conv = convergence_blocks(trace.block_times, start, target_time,
                              ma_window=ma_window, band=band)
    return PeriodMetrics(start, end, mean, mse, conv)


def mse_reduction_percent(mse_baseline: float, mse_new: float) -> float:
    """Percentage by which `mse_new` undercuts `mse_baseline`."""
    if mse_baseline <= 0.0:
        raise ConfigurationError("baseline MSE must be > 0 to compare")
    return 100.0 * (1.0 - mse_new / mse_baseline)


def relative_step_magnitudes(difficulties: np.ndarray) -> np.ndarray:
    """|D_k / D_{k-1} - 1| for k >= 2; the per-block difficulty churn."""
    d = np.asarray(difficulties, dtype=float)
    if len(d) < 2:
        return np.empty(0)
    return np.abs(d[1:] / d[:-1] - 1.0)
