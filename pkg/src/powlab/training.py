"""Monte-Carlo training and evaluation of the variance-pattern classifier.

Each sample is a constant-difficulty chain excerpt at a known hash rate with
one step change of relative size delta injected after the change block: block
times are exponential with mean tau0 before and tau0/(1+delta) after.  The
pre-change window yields a no-change example; the window ending
stride*(count-1) blocks after the change yields a normal-change example when
|delta| <= anomaly_bound, an abnormal-change example otherwise.  Classes are
balanced by rejection against per-class quotas.

Held-out accuracy is reported as a function of blocks elapsed since the
change (default checkpoints: 1000 and 5000 blocks).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .controllers import EthereumRule
from .errors import ConfigurationError
from .features import FeatureConfig, windowed_variances
from .mlp import ABNORMAL_CHANGE, NO_CHANGE, NORMAL_CHANGE, MlpModel, fit, new_model
from .updatefn import equilibrium_mean

_STREAM_TRAIN = 0
_STREAM_EVAL = 1
_STREAM_SPLIT = 2
_LOG_FLOOR = 1e-300

CLASS_NAMES = ("no_change", "normal_change", "abnormal_change")


@dataclass
class TrainingConfig:
    base_rate: float = 1.455e14
    target_block_time: float | None = None   # None: solved Ethereum-rule equilibrium
    change_low: float = -0.60
    change_high: float = 0.60
    anomaly_bound: float = 0.20
    samples_per_class: int = 700
    eval_samples_per_class: int = 300
    change_height: int | None = None         # None: the feature history requirement
    case1_zero_change_chains: bool = False
    augment_offsets: tuple[int, ...] = ()
    n_hidden: int = 25
    epochs: int = 4000
    learning_rate: float = 0.05
    momentum: float = 0.9
    validation_fraction: float = 0.15
    eval_checkpoints: tuple[int, ...] = (1000, 5000)
    seed: int = 2718

    def validate(self, fcfg: FeatureConfig) -> None:
        if self.base_rate <= 0.0:
            raise ConfigurationError("base_rate must be > 0")
        if not self.change_low < self.change_high:
            raise ConfigurationError("change_low must be < change_high")
        if self.change_low <= -1.0:
            raise ConfigurationError("change_low must be > -1 (rate stays positive)")
        if self.anomaly_bound <= 0.0:
            raise ConfigurationError("anomaly_bound must be > 0")
        if self.anomaly_bound >= max(abs(self.change_low), abs(self.change_high)):
            raise ConfigurationError(
                "anomaly_bound must sit inside the change range or the "
                "abnormal class is unreachable"
            )
        if self.samples_per_class < 1 or self.eval_samples_per_class < 0:
            raise ConfigurationError("sample counts must be positive")
        c = self.change_height
        if c is not None and c < fcfg.history_required:
            raise ConfigurationError(
                f"change_height {c} leaves no room for the pre-change window "
                f"({fcfg.history_required} block times needed)"
            )
        if min(self.eval_checkpoints, default=1) < 1:
            raise ConfigurationError("eval checkpoints must be >= 1")
        if self.augment_offsets and min(self.augment_offsets) < 1:
            raise ConfigurationError("augment offsets must be >= 1")

    def resolved_target(self) -> float:
        if self.target_block_time is not None:
            return self.target_block_time
        return solved_ethereum_target()


_solved_target_cache: dict[str, float] = {}


def solved_ethereum_target() -> float:
    """Zero-drift block-time mean of the Ethereum rule (root-found, cached)."""
    if "value" not in _solved_target_cache:
        _solved_target_cache["value"] = equilibrium_mean(EthereumRule(), lo=5.0, hi=50.0)
    return _solved_target_cache["value"]


def _chain_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(stream, index))
    return np.random.Generator(np.random.PCG64(seq))


def step_change_block_times(tau0: float, tau1: float, n_pre: int, n_post: int,
                            rng: np.random.Generator) -> np.ndarray:
    """n_pre draws at mean tau0 followed by n_post at mean tau1 (inverse transform)."""
    u = rng.random(n_pre + n_post)
    zero = u <= 0.0
    while zero.any():
        u[zero] = rng.random(int(zero.sum()))
        zero = u <= 0.0
    t = -np.log(u)
    t[:n_pre] *= tau0
    t[n_pre:] *= tau1
    return t


def generate_training_set(cfg: TrainingConfig, fcfg: FeatureConfig):
    """Balanced (features, labels) arrays, quotas filled by rejection.

    By default every change sample contributes its post-change example at the
    canonical offset stride*(count-1) after the change.  When augment_offsets
    is set, accepted chains cycle through those elapsed offsets instead, so
    the classifier also sees partially and fully elapsed change patterns (a
    live controller gates at every offset, not just the canonical one).
    """
    cfg.validate(fcfg)
    tau0 = cfg.resolved_target()
    n_pre = cfg.change_height or fcfg.history_required
    canonical = fcfg.history_required - fcfg.window  # stride * (count - 1)
    offsets = tuple(sorted(set(cfg.augment_offsets))) or (canonical,)
    n_post = max(offsets)
    m = cfg.samples_per_class

    rows, labels = [], []
    need = {NO_CHANGE: m, NORMAL_CHANGE: m, ABNORMAL_CHANGE: m}

    def post_offset(label):
        return offsets[(m - need[label]) % len(offsets)]

    if cfg.case1_zero_change_chains:
        for i in range(m):
            rng = _chain_rng(cfg.seed, _STREAM_TRAIN + 10, i)
            times = step_change_block_times(tau0, tau0, n_pre, n_post, rng)
            end = n_pre + offsets[i % len(offsets)] - 1
            rows.append(windowed_variances(times, [end], fcfg)[0])
            labels.append(NO_CHANGE)
        need[NO_CHANGE] = 0

    attempt = 0
    max_attempts = 60 * m + 1000
    while (need[NO_CHANGE] or need[NORMAL_CHANGE] or need[ABNORMAL_CHANGE]):
        if attempt >= max_attempts:
            raise ConfigurationError(
                f"could not balance classes within {max_attempts} attempts; "
                f"remaining quotas {need}"
            )
        rng = _chain_rng(cfg.seed, _STREAM_TRAIN, attempt)
        attempt += 1
        delta = rng.uniform(cfg.change_low, cfg.change_high)
        label = NORMAL_CHANGE if abs(delta) <= cfg.anomaly_bound else ABNORMAL_CHANGE
        want_post = need[label] > 0
        want_pre = need[NO_CHANGE] > 0
        if not (want_post or want_pre):
            continue
        times = step_change_block_times(tau0, tau0 / (1.0 + delta), n_pre, n_post, rng)
        if want_pre:
            rows.append(windowed_variances(times, [n_pre - 1], fcfg)[0])
            labels.append(NO_CHANGE)
            need[NO_CHANGE] -= 1
        if want_post:
            end = n_pre + post_offset(label) - 1
            rows.append(windowed_variances(times, [end], fcfg)[0])
            labels.append(label)
            need[label] -= 1

    return np.array(rows), np.array(labels, dtype=np.int64)


def generate_eval_set(cfg: TrainingConfig, fcfg: FeatureConfig):
    """Held-out sets per checkpoint: {blocks_elapsed: (features, labels)}.

    No-change examples come from zero-change chains evaluated at the same
    elapsed positions, so every checkpoint set is balanced.
    """
    cfg.validate(fcfg)
    tau0 = cfg.resolved_target()
    n_pre = cfg.change_height or fcfg.history_required
    checkpoints = tuple(cfg.eval_checkpoints)
    n_post = max(checkpoints)
    m = cfg.eval_samples_per_class

    per_ckpt = {c: ([], []) for c in checkpoints}

    def harvest(times, label):
        ends = [n_pre + c - 1 for c in checkpoints]
        feats = windowed_variances(times, ends, fcfg)
        for c, row in zip(checkpoints, feats):
            per_ckpt[c][0].append(row)
            per_ckpt[c][1].append(label)

    for i in range(m):
        rng = _chain_rng(cfg.seed, _STREAM_EVAL + 10, i)
        harvest(step_change_block_times(tau0, tau0, n_pre, n_post, rng), NO_CHANGE)

    need = {NORMAL_CHANGE: m, ABNORMAL_CHANGE: m}
    attempt = 0
    max_attempts = 60 * m + 1000
    while need[NORMAL_CHANGE] or need[ABNORMAL_CHANGE]:
        if attempt >= max_attempts:
            raise ConfigurationError("could not balance evaluation classes")
        rng = _chain_rng(cfg.seed, _STREAM_EVAL, attempt)
        attempt += 1
        delta = rng.uniform(cfg.change_low, cfg.change_high)
        label = NORMAL_CHANGE if abs(delta) <= cfg.anomaly_bound else ABNORMAL_CHANGE
        if need[label] == 0:
            continue
        harvest(step_change_block_times(tau0, tau0 / (1.0 + delta), n_pre, n_post, rng),
                label)
        need[label] -= 1

    return {c: (np.array(x), np.array(y, dtype=np.int64))
            for c, (x, y) in per_ckpt.items()}


def evaluate_accuracy(model: MlpModel, cfg: TrainingConfig, fcfg: FeatureConfig) -> dict:
    """Held-out accuracy by blocks elapsed since the change."""
    out = {}
    for ckpt, (x, y) in sorted(generate_eval_set(cfg, fcfg).items()):
        pred = model.probabilities_batch(x).argmax(axis=1)
        per_class = [float(np.mean(pred[y == k] == k)) for k in range(3)]
        out[str(ckpt)] = {
            "overall": float(np.mean(pred == y)),
            "per_class": per_class,
            "n": int(len(y)),
        }
    return out


def _stratified_split(labels: np.ndarray, val_fraction: float, seed: int):
    rng = _chain_rng(seed, _STREAM_SPLIT, 0)
    train_idx, val_idx = [], []
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        rng.shuffle(idx)
        n_val = int(round(len(idx) * val_fraction))
        val_idx.extend(idx[:n_val])
        train_idx.extend(idx[n_val:])
    return np.sort(np.array(train_idx)), np.sort(np.array(val_idx))


def train_indicator(cfg: TrainingConfig, fcfg: FeatureConfig | None = None):
    """Generate data, fit the classifier, report held-out accuracy.

    Returns (model, report).  Standardization statistics are fit on the
    training split only and frozen into the model.
    """
    fcfg = fcfg or FeatureConfig()
    cfg.validate(fcfg)
    x_raw, y = generate_training_set(cfg, fcfg)
    train_idx, val_idx = _stratified_split(y, cfg.validation_fraction, cfg.seed)

    logx = np.log(np.maximum(x_raw, _LOG_FLOOR))
    mu = logx[train_idx].mean(axis=0)
    sd = logx[train_idx].std(axis=0)
    sd[sd == 0.0] = 1.0

    model = new_model(fcfg.count, cfg.n_hidden, seed=cfg.seed)
    model.log_mean = mu
    model.log_std = sd

    x = (logx - mu) / sd
    history = fit(
        model, x[train_idx], y[train_idx], x[val_idx], y[val_idx],
        epochs=cfg.epochs, learning_rate=cfg.learning_rate, momentum=cfg.momentum,
    )
    train_pred = model.probabilities_batch(x_raw[train_idx]).argmax(axis=1)
    accuracy = evaluate_accuracy(model, cfg, fcfg) if cfg.eval_samples_per_class else {}

    cfg_echo = asdict(cfg)
    cfg_echo["target_block_time"] = cfg.resolved_target()
    report = {
        "training_config": cfg_echo,
        "feature_config": asdict(fcfg),
        "n_train": int(len(train_idx)),
        "n_validation": int(len(val_idx)),
        "fit": history,
        "train_accuracy": float(np.mean(train_pred == y[train_idx])),
        "accuracy_by_blocks_elapsed": accuracy,
        "class_names": list(CLASS_NAMES),
    }
    return model, report
