"""Two-layer classifier over variance features.

Architecture: count inputs -> tanh hidden layer -> softmax over the three
block-time patterns (no change, normal change, abnormal change).  Variances
span orders of magnitude, so inputs are log-transformed and z-scored with
statistics frozen at training time; the standardization is part of the model.

Everything is plain numpy with float64 weights; training is full-batch
gradient descent with momentum, so a fixed seed reproduces weights exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, NumericalError

# Classes, in output order.
NO_CHANGE, NORMAL_CHANGE, ABNORMAL_CHANGE = 0, 1, 2
N_CLASSES = 3

_MODEL_FORMAT = "powlab-mlp"
_MODEL_VERSION = 1
_LOG_FLOOR = 1e-300  # keeps log() finite on an exactly-zero variance


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class MlpModel:
    hidden_w: np.ndarray   # (n_hidden, n_inputs)
    hidden_b: np.ndarray   # (n_hidden,)
    out_w: np.ndarray      # (N_CLASSES, n_hidden)
    out_b: np.ndarray      # (N_CLASSES,)
    log_mean: np.ndarray   # (n_inputs,) standardization in log-variance space
    log_std: np.ndarray    # (n_inputs,)

    @property
    def n_inputs(self) -> int:
        return self.hidden_w.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.hidden_w.shape[0]

    def standardize(self, features: np.ndarray) -> np.ndarray:
        x = np.log(np.maximum(features, _LOG_FLOOR))
        return (x - self.log_mean) / self.log_std

    def class_probabilities(self, features: np.ndarray) -> np.ndarray:
        """(P_no_change, P_normal, P_abnormal) for one raw feature vector."""
        features = np.asarray(features, dtype=float)
        if not np.all(np.isfinite(features)):
            raise ConfigurationError("features must be finite")
        x = self.standardize(features)
        h = np.tanh(self.hidden_w @ x + self.hidden_b)
        return softmax(self.out_w @ h + self.out_b)

    def probabilities_batch(self, features: np.ndarray) -> np.ndarray:
        """(n, 3) probabilities for raw feature rows."""
        features = np.asarray(features, dtype=float)
        if not np.all(np.isfinite(features)):
            raise ConfigurationError("features must be finite")
        x = (np.log(np.maximum(features, _LOG_FLOOR)) - self.log_mean) / self.log_std
        h = np.tanh(x @ self.hidden_w.T + self.hidden_b)
        return softmax(h @ self.out_w.T + self.out_b)

    def indicator_value(self, features: np.ndarray) -> float:
        """Probability of the normal-change pattern; the controller gate."""
        return float(self.class_probabilities(features)[NORMAL_CHANGE])

    def save(self, path) -> None:
        payload = {
            "format": _MODEL_FORMAT,
            "version": _MODEL_VERSION,
            "n_inputs": self.n_inputs,
            "n_hidden": self.n_hidden,
            "n_classes": N_CLASSES,
            "feature_log_mean": self.log_mean.tolist(),
            "feature_log_std": self.log_std.tolist(),
            "hidden_weights": self.hidden_w.tolist(),
            "hidden_bias": self.hidden_b.tolist(),
            "output_weights": self.out_w.tolist(),
            "output_bias": self.out_b.tolist(),
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "MlpModel":
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"model file not found: {path}")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"model file {path} is not valid JSON: {exc}")
        if payload.get("format") != _MODEL_FORMAT:
            raise ConfigurationError(f"{path} is not a {_MODEL_FORMAT} file")
        if payload.get("version") != _MODEL_VERSION:
            raise ConfigurationError(
                f"unsupported model version {payload.get('version')}"
            )
        model = cls(
            hidden_w=np.array(payload["hidden_weights"], dtype=float),
            hidden_b=np.array(payload["hidden_bias"], dtype=float),
            out_w=np.array(payload["output_weights"], dtype=float),
            out_b=np.array(payload["output_bias"], dtype=float),
            log_mean=np.array(payload["feature_log_mean"], dtype=float),
            log_std=np.array(payload["feature_log_std"], dtype=float),
        )
        if model.out_w.shape != (N_CLASSES, model.n_hidden):
            raise ConfigurationError(f"inconsistent layer shapes in {path}")
        return model


def new_model(n_inputs: int, n_hidden: int = 25, seed: int = 0) -> MlpModel:
    """Fresh model with fan-in-scaled uniform weights and identity standardization."""
    rng = np.random.Generator(np.random.PCG64(seed))
    lim1 = 1.0 / np.sqrt(n_inputs)
    lim2 = 1.0 / np.sqrt(n_hidden)
    return MlpModel(
        hidden_w=rng.uniform(-lim1, lim1, size=(n_hidden, n_inputs)),
        hidden_b=np.zeros(n_hidden),
        out_w=rng.uniform(-lim2, lim2, size=(N_CLASSES, n_hidden)),
        out_b=np.zeros(N_CLASSES),
        log_mean=np.zeros(n_inputs),
        log_std=np.ones(n_inputs),
    )


def loss_and_gradients(model: MlpModel, x: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradients on standardized inputs x (n, q)."""
    n = len(x)
    z1 = x @ model.hidden_w.T + model.hidden_b
    h = np.tanh(z1)
    z2 = h @ model.out_w.T + model.out_b
    zmax = z2.max(axis=1, keepdims=True)
    log_norm = zmax[:, 0] + np.log(np.exp(z2 - zmax).sum(axis=1))
    loss = float(np.mean(log_norm - z2[np.arange(n), labels]))

    p = softmax(z2)
    p[np.arange(n), labels] -= 1.0
    p /= n
    grad_out_w = p.T @ h
    grad_out_b = p.sum(axis=0)
    dh = (p @ model.out_w) * (1.0 - h * h)
    grad_hidden_w = dh.T @ x
    grad_hidden_b = dh.sum(axis=0)
    return loss, (grad_hidden_w, grad_hidden_b, grad_out_w, grad_out_b)


def mean_cross_entropy(model: MlpModel, x: np.ndarray, labels: np.ndarray) -> float:
    z1 = x @ model.hidden_w.T + model.hidden_b
    z2 = np.tanh(z1) @ model.out_w.T + model.out_b
    zmax = z2.max(axis=1, keepdims=True)
    log_norm = zmax[:, 0] + np.log(np.exp(z2 - zmax).sum(axis=1))
    return float(np.mean(log_norm - z2[np.arange(len(x)), labels]))


def fit(model: MlpModel, x_train: np.ndarray, y_train: np.ndarray,
        x_val: np.ndarray | None = None, y_val: np.ndarray | None = None, *,
        epochs: int = 4000, learning_rate: float = 0.05, momentum: float = 0.9,
        check_every: int = 25, patience: int = 40) -> dict:
    """Full-batch gradient descent with momentum; early stop on validation loss.

    Mutates `model` in place, restoring the best validation snapshot at the
    end (training-loss snapshot when no validation split is given).  Returns a
    small history dict for reports.
    """
    params = [model.hidden_w, model.hidden_b, model.out_w, model.out_b]
    velocity = [np.zeros_like(p) for p in params]
    use_val = x_val is not None and len(x_val) > 0
    best_loss = np.inf
    best_params = [p.copy() for p in params]
    best_epoch = 0
    strikes = 0
    final_train = np.nan

    for epoch in range(1, epochs + 1):
        loss, grads = loss_and_gradients(model, x_train, y_train)
        if not np.isfinite(loss):
            raise NumericalError(f"training diverged at epoch {epoch} (loss={loss})")
        final_train = loss
        for p, v, g in zip(params, velocity, grads):
            v *= momentum
            v -= learning_rate * g
            p += v
        if epoch % check_every == 0 or epoch == epochs:
            monitored = mean_cross_entropy(model, x_val, y_val) if use_val else loss
            if monitored < best_loss - 1e-6:
                best_loss = monitored
                best_params = [p.copy() for p in params]
                best_epoch = epoch
                strikes = 0
            else:
                strikes += 1
                if strikes >= patience:
                    break

    for p, best in zip(params, best_params):
        p[...] = best
    return {
        "epochs_run": epoch,
        "best_epoch": best_epoch,
        "train_loss": final_train,
        "monitored_loss": best_loss,
        "early_stopped": epoch < epochs,
    }
