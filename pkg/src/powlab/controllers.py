"""Difficulty controllers: indicator-gated multiplicative update recursion.

Every controller follows the same recursion.  After block k lands with block
time T_k, the trailing window sum T_prev is formed (window 1 for an
Ethereum-style rule, 2016 for a Bitcoin-style retarget), an indicator I_k in
[0, 1] gates the step, and

    D_k = D_{k-1} - D_{k-1} * I_k * f(T_prev)

with the result floored at min_difficulty.  Until enough history exists for
the window sum and for the indicator's features, the difficulty is held
constant (warm-up rule).
"""

from __future__ import annotations

import math
from collections import deque

from .errors import ConfigurationError
from .features import FeatureConfig, FeatureState
from .mlp import MlpModel

ETHEREUM_CAP = 99.0 / 2048.0


def ethereum_update(t: float) -> float:
    """Ethereum block-time rule: (floor(t/9) - 1)/2048, capped at 99/2048 past 900 s."""
    if t <= 0.0:
        raise ConfigurationError(f"block time must be > 0, got {t}")
    if t > 900.0:
        return ETHEREUM_CAP
    return (math.floor(t / 9.0) - 1.0) / 2048.0


def bitcoin_update(t_previous: float, retarget_blocks: int = 2016,
                   target_block_time: float = 600.0) -> float:
    """Bitcoin retarget rule: 1 - N*beta / T_prev, applied once per N blocks.

    Equivalent to the production rescale D_new = D_old * N*beta / T_prev.
    """
    if t_previous <= 0.0:
        raise ConfigurationError(f"window time sum must be > 0, got {t_previous}")
    return 1.0 - retarget_blocks * target_block_time / t_previous


class EthereumRule:
    """Callable wrapper exposing the bound and the floor discontinuities."""

    breakpoints = tuple(float(b) for b in range(9, 901, 9))

    def __call__(self, t: float) -> float:
        return ethereum_update(t)

    def supremum(self) -> float:
        return ETHEREUM_CAP


class BitcoinRule:
    def __init__(self, retarget_blocks: int = 2016, target_block_time: float = 600.0):
        if retarget_blocks < 1:
            raise ConfigurationError("retarget_blocks must be >= 1")
        if target_block_time <= 0.0:
            raise ConfigurationError("target_block_time must be > 0")
        self.retarget_blocks = retarget_blocks
        self.target_block_time = target_block_time

    def __call__(self, t: float) -> float:
        return bitcoin_update(t, self.retarget_blocks, self.target_block_time)

    def supremum(self) -> float:
        return 1.0


class ConstantOne:
    """Indicator that never gates: I_k = 1 for all k."""

    def reset(self):
        pass

    def observe(self, block_time: float) -> float:
        return 1.0


class EveryN:
    """Retarget-epoch indicator: I_k = 1 iff k mod n == 0."""

    def __init__(self, n: int):
        if n < 1:
            raise ConfigurationError("indicator period must be >= 1")
        self.n = n
        self.height = 0

    def reset(self):
        self.height = 0

    def observe(self, block_time: float) -> float:
        self.height += 1
        return 1.0 if self.height % self.n == 0 else 0.0


class NeuralIndicator:
    """Classifier-backed indicator: I_k = P(normal change | variance features).

    Returns None until the sliding-variance feature state has filled, which
    the controller treats as "hold difficulty".  When `record` is set, every
    emitted value (NaN during warm-up) is appended for later analysis.
    """

    def __init__(self, model: MlpModel, feature_config: FeatureConfig,
                 record: list | None = None):
        if model.n_inputs != feature_config.count:
            raise ConfigurationError(
                f"model expects {model.n_inputs} features, "
                f"feature config produces {feature_config.count}"
            )
        self.model = model
        self.feature_config = feature_config
        self.state = FeatureState(feature_config)
        self.record = record

    def reset(self):
        self.state = FeatureState(self.feature_config)
        if self.record is not None:
            self.record.clear()

    def observe(self, block_time: float) -> float | None:
        self.state.push(block_time)
        if not self.state.ready:
            if self.record is not None:
                self.record.append(math.nan)
            return None
        value = self.model.indicator_value(self.state.feature_vector())
        if self.record is not None:
            self.record.append(value)
        return value


class GeneralController:
    """The indicator-gated recursion with a trailing window sum.

    update_interval > 1 restricts difficulty changes to heights divisible by
    it (the indicator still observes every block so its features stay fresh).
    """

    def __init__(self, indicator, update_fn, window: int = 1,
                 min_difficulty: float = 1.0, update_interval: int = 1):
        if window < 1:
            raise ConfigurationError("window must be >= 1")
        if min_difficulty <= 0.0:
            raise ConfigurationError("min_difficulty must be > 0")
        if update_interval < 1:
            raise ConfigurationError("update_interval must be >= 1")
        self.indicator = indicator
        self.update_fn = update_fn
        self.window = window
        self.min_difficulty = min_difficulty
        self.update_interval = update_interval
        self.difficulty = min_difficulty
        self.height = 0
        self._times = deque(maxlen=window) if window > 1 else None

    def reset(self, initial_difficulty: float):
        if initial_difficulty <= 0.0:
            raise ConfigurationError("initial difficulty must be > 0")
        self.difficulty = initial_difficulty
        self.height = 0
        if self._times is not None:
            self._times.clear()
        self.indicator.reset()

    def observe(self, block_time: float) -> float:
        if block_time < 0.0:
            raise ConfigurationError(f"block time must be >= 0, got {block_time}")
        self.height += 1
        gate = self.indicator.observe(block_time)
        if self._times is not None:
            self._times.append(block_time)
            if len(self._times) < self.window:
                return self.difficulty
        if gate is None or gate == 0.0:
            return self.difficulty
        if self.height % self.update_interval != 0:
            return self.difficulty
        t_prev = block_time if self._times is None else math.fsum(self._times)
        step = self.update_fn(t_prev)
        d = self.difficulty - self.difficulty * gate * step
        self.difficulty = d if d > self.min_difficulty else self.min_difficulty
        return self.difficulty


class ConstantDifficulty:
    """Identity controller: difficulty never moves."""

    def __init__(self):
        self.difficulty = 1.0

    def reset(self, initial_difficulty: float):
        self.difficulty = initial_difficulty

    def observe(self, block_time: float) -> float:
        return self.difficulty


def ethereum_controller(min_difficulty: float = 1.0) -> GeneralController:
    return GeneralController(ConstantOne(), EthereumRule(), window=1,
                             min_difficulty=min_difficulty)


def bitcoin_controller(retarget_blocks: int = 2016, target_block_time: float = 600.0,
                       min_difficulty: float = 1.0) -> GeneralController:
    rule = BitcoinRule(retarget_blocks, target_block_time)
    return GeneralController(EveryN(retarget_blocks), rule,
                             window=retarget_blocks, min_difficulty=min_difficulty)
