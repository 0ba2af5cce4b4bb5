"""Sliding-window variance features of block produce times.

Feature j is the population variance (E[T^2] - E[T]^2, divide by the window
length) of the `window` block times ending `j * stride` blocks before the
newest one, for j = 0 .. count-1.  Only the newest window is maintained
incrementally; older features are served from a ring of stored snapshots, so

    feature_j_at(k) is the same stored float as feature_{j-1}_at(k - stride)

holds bit-exactly and one push costs O(1) regardless of count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class FeatureConfig:
    """stride: blocks between consecutive features; count: number of features;
    window: block times per variance."""

    stride: int = 200
    count: int = 11
    window: int = 2000

    def __post_init__(self):
        if self.stride < 1:
            raise ConfigurationError("stride must be >= 1")
        if self.count < 2:
            raise ConfigurationError("count must be >= 2")
        if self.window < 2:
            raise ConfigurationError("window must be >= 2")

    @property
    def history_required(self) -> int:
        """Block times needed before a full feature vector exists."""
        return (self.count - 1) * self.stride + self.window


class FeatureState:
    """Incremental state: newest-window running sums plus a variance-snapshot ring."""

    def __init__(self, config: FeatureConfig):
        self.config = config
        self._times = np.zeros(config.window)
        self._t_idx = 0
        self._sum = 0.0
        self._sumsq = 0.0
        self._snaps = np.zeros((config.count - 1) * config.stride + 1)
        self._s_idx = 0
        self.n_seen = 0
        self.n_snaps = 0

    def push(self, t: float) -> None:
        w = self.config.window
        if self.n_seen >= w:
            old = self._times[self._t_idx]
            self._sum += t - old
            self._sumsq += t * t - old * old
        else:
            self._sum += t
            self._sumsq += t * t
        self._times[self._t_idx] = t
        self._t_idx += 1
        if self._t_idx == w:
            self._t_idx = 0
        self.n_seen += 1
        if self.n_seen >= w:
            mean = self._sum / w
            var = self._sumsq / w - mean * mean
            self._snaps[self._s_idx] = var if var > 0.0 else 0.0
            self._s_idx += 1
            if self._s_idx == len(self._snaps):
                self._s_idx = 0
            self.n_snaps += 1

    @property
    def ready(self) -> bool:
        return self.n_snaps >= len(self._snaps)

    def feature_vector(self) -> np.ndarray:
        """[A_0, ..., A_{count-1}], newest window first; raises until ready."""
        if not self.ready:
            raise ConfigurationError(
                f"need {self.config.history_required} block times, "
                f"have {self.n_seen}"
            )
        cap = len(self._snaps)
        base = self._s_idx - 1
        out = np.empty(self.config.count)
        for j in range(self.config.count):
            out[j] = self._snaps[(base - j * self.config.stride) % cap]
        return out


def batch_feature_vector(times: np.ndarray, end: int, config: FeatureConfig) -> np.ndarray:
    """Two-pass reference: feature vector at 0-based position `end` of `times`.

    Feature j is np.var over times[end - j*stride - window + 1 : end - j*stride + 1].
    Independent of the incremental path; used as the test oracle.
    """
    if end - config.history_required + 1 < 0:
        raise ConfigurationError("not enough history before `end`")
    out = np.empty(config.count)
    for j in range(config.count):
        hi = end - j * config.stride + 1
        out[j] = np.var(times[hi - config.window:hi])
    return out


def windowed_variances(times: np.ndarray, ends, config: FeatureConfig) -> np.ndarray:
    """Feature vectors at several 0-based end positions, via prefix sums.

    Uses the same plug-in form as the incremental path (sumsq/w - mean^2),
    vectorized for training-set and evaluation extraction.
    """
    times = np.asarray(times, dtype=float)
    ends = np.asarray(ends, dtype=np.int64)
    if ends.size and (ends.min() - config.history_required + 1 < 0
                      or ends.max() >= len(times)):
        raise ConfigurationError("feature end positions out of range")
    cs = np.concatenate(([0.0], np.cumsum(times)))
    cs2 = np.concatenate(([0.0], np.cumsum(times * times)))
    w = config.window
    offsets = np.arange(config.count) * config.stride
    hi = ends[:, None] - offsets[None, :] + 1
    lo = hi - w
    mean = (cs[hi] - cs[lo]) / w
    var = (cs2[hi] - cs2[lo]) / w - mean * mean
    return np.maximum(var, 0.0)
