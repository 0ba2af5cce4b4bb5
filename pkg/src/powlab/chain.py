"""Stochastic block-production traces.

Block k is produced after an exponentially distributed time with mean
difficulty/rate (plus an optional constant propagation delay); after every
block the difficulty controller observes the recorded block time and emits the
difficulty under which the next block is mined.  Heights are 1-based; the
implicit genesis block sits at height 0 with timestamp 0.

Sampling is inverse-transform, T = -mean * ln(u) with u uniform on (0, 1)
drawn from a seeded PCG64 stream, so traces are reproducible bit for bit from
(scenario, controller, config, initial difficulty) alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

TRACE_HEADER = "height,timestamp,block_time,difficulty,scheduled_rate"


@dataclass(frozen=True)
class ChainRecord:
    """One block: height k, timestamp t_k, block time t_k - t_{k-1}, difficulty."""

    height: int
    timestamp: float
    block_time: float
    difficulty: float


@dataclass
class HashRateScenario:
    """Piecewise-constant nominal hash-rate schedule.

    An event (height, rate) takes effect for the block after that height: the
    change lands between block h and block h+1.
    """

    initial_rate: float
    length: int
    events: list[tuple[int, float]] = field(default_factory=list)

    def validate(self) -> None:
        if self.initial_rate <= 0.0:
            raise ConfigurationError("initial_rate must be > 0")
        if self.length < 0:
            raise ConfigurationError("length must be >= 0")
        prev = 0
        for height, rate in self.events:
            if height <= prev:
                raise ConfigurationError(
                    f"event heights must be strictly increasing, got {height} after {prev}"
                )
            if not 1 <= height <= max(self.length, 1):
                raise ConfigurationError(
                    f"event height {height} outside [1, {self.length}]"
                )
            if rate <= 0.0:
                raise ConfigurationError(f"event rate {rate} must be > 0")
            prev = height

    def schedule(self) -> np.ndarray:
        """Per-block rates; entry i is the rate in force for height i + 1."""
        self.validate()
        rates = np.full(self.length, self.initial_rate, dtype=float)
        for height, rate in self.events:
            rates[height:] = rate
        return rates


@dataclass
class SimulationConfig:
    seed: int = 0
    propagation_delay: float = 0.0
    min_difficulty: float = 1.0
    integer_timestamps: bool = False

    def validate(self) -> None:
        if self.propagation_delay < 0.0:
            raise ConfigurationError("propagation_delay must be >= 0")
        if self.min_difficulty <= 0.0:
            raise ConfigurationError("min_difficulty must be > 0")


@dataclass
class Trace:
    """Columnar trace; indexing yields ChainRecord views."""

    heights: np.ndarray
    timestamps: np.ndarray
    block_times: np.ndarray
    difficulties: np.ndarray
    scheduled_rates: np.ndarray

    def __len__(self) -> int:
        return len(self.heights)

    def __getitem__(self, i: int) -> ChainRecord:
        return ChainRecord(
            int(self.heights[i]),
            float(self.timestamps[i]),
            float(self.block_times[i]),
            float(self.difficulties[i]),
        )

    def records(self) -> list[ChainRecord]:
        return [self[i] for i in range(len(self))]


def as_trace(records) -> Trace:
    """Coerce a list of ChainRecord (or a Trace) to columnar form."""
    if isinstance(records, Trace):
        return records
    n = len(records)
    heights = np.empty(n, dtype=np.int64)
    timestamps = np.empty(n)
    block_times = np.empty(n)
    difficulties = np.empty(n)
    for i, r in enumerate(records):
        heights[i] = r.height
        timestamps[i] = r.timestamp
        block_times[i] = r.block_time
        difficulties[i] = r.difficulty
    return Trace(heights, timestamps, block_times, difficulties,
                 np.full(n, np.nan))


def make_rng(seed: int) -> np.random.Generator:
    """The trace RNG: PCG64 seeded once per run."""
    return np.random.Generator(np.random.PCG64(seed))


def sample_block_time(difficulty: float, rate: float, delay: float, rng) -> float:
    """One block-production time: Exponential(mean=difficulty/rate) + delay.

    Inverse transform on u = rng.random(): T = -(difficulty/rate) * ln(u).
    u = 0 (probability 2^-53 per draw) is rejected and redrawn.
    """
    if difficulty <= 0.0:
        raise ConfigurationError(f"difficulty must be > 0, got {difficulty}")
    if rate <= 0.0:
        raise ConfigurationError(f"rate must be > 0, got {rate}")
    if delay < 0.0:
        raise ConfigurationError(f"delay must be >= 0, got {delay}")
    u = rng.random()
    while u <= 0.0:
        u = rng.random()
    return -(difficulty / rate) * math.log(u) + delay


def run_simulation(scenario: HashRateScenario, controller, config: SimulationConfig,
                   initial_difficulty: float) -> Trace:
    """Simulate `scenario.length` blocks under the given difficulty controller.

    The controller sees each recorded block time right after the block lands
    and returns the difficulty for the next one; its output is floored at
    config.min_difficulty.  Block times always equal the recorded timestamp
    differences, also in integer-timestamp mode (where timestamps are whole
    seconds and strictly increasing, as on real chains).
    """
    scenario.validate()
    config.validate()
    if initial_difficulty < config.min_difficulty:
        raise ConfigurationError(
            f"initial difficulty {initial_difficulty} below floor {config.min_difficulty}"
        )

    n = scenario.length
    rates = scenario.schedule()
    rng = make_rng(config.seed)
    controller.reset(initial_difficulty)

    timestamps = np.empty(n)
    block_times = np.empty(n)
    difficulties = np.empty(n)

    difficulty = initial_difficulty
    clock = 0.0      # exact continuous time
    prev_ts = 0.0    # recorded (possibly quantized) timestamp
    floor = config.min_difficulty
    quantize = config.integer_timestamps
    delay = config.propagation_delay

    for i in range(n):
        clock += sample_block_time(difficulty, rates[i], delay, rng)
        if quantize:
            ts = max(math.floor(clock), prev_ts + 1.0)
        else:
            ts = clock
        bt = ts - prev_ts
        timestamps[i] = ts
        block_times[i] = bt
        difficulties[i] = difficulty
        prev_ts = ts
        difficulty = controller.observe(bt)
        if difficulty < floor:
            difficulty = floor

    return Trace(
        heights=np.arange(1, n + 1, dtype=np.int64),
        timestamps=timestamps,
        block_times=block_times,
        difficulties=difficulties,
        scheduled_rates=rates,
    )
