"""Training loop, position-error loss, evaluation, and the copy-last baseline.

The loss is the mean per-joint Euclidean distance between predicted and
true coordinates, averaged over batch, frames, and joints. Evaluation
reports the same distance at single target frames (the benchmark
convention for per-horizon columns), averaged over windows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, DimensionError, adam_step

__all__ = [
    "TrainConfig",
    "EpochRecord",
    "EvalReport",
    "NumericalError",
    "mpjpe_loss",
    "mpjpe_value",
    "train",
    "evaluate",
    "zero_velocity_baseline",
    "baseline_report",
]


class NumericalError(RuntimeError):
    """Non-finite loss during training; message carries diagnostics."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr_initial: float = 0.01
    lr_decay_epochs: tuple = (20, 35, 45)
    lr_decay_factor: float = 0.1
    clip_norm: float | None = 1.0
    seed: int = 0

    def __post_init__(self):
        decays = tuple(self.lr_decay_epochs)
        if list(decays) != sorted(set(decays)):
            raise ValueError(f"decay epochs must be strictly increasing: {decays}")
        if any(e >= self.epochs for e in decays) and self.epochs > 0:
            raise ValueError(
                f"decay epochs {decays} must all be < epochs ({self.epochs})"
            )
        object.__setattr__(self, "lr_decay_epochs", decays)


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    lr: float


@dataclass
class EvalReport:
    horizons: dict                     # frame offset -> mean error
    per_action: dict = field(default_factory=dict)

    def format_table(self, extra_rows=None):
        """Plain-text table: one column per horizon, one row per entry."""
        offsets = sorted(self.horizons)
        lines = ["horizon  " + "  ".join(f"{h:>8d}" for h in offsets)]
        lines.append("model    " + "  ".join(f"{self.horizons[h]:8.3f}" for h in offsets))
        for label, values in (extra_rows or {}).items():
            lines.append(f"{label:<8} " + "  ".join(f"{values[h]:8.3f}" for h in offsets))
        for action in sorted(self.per_action):
            vals = self.per_action[action]
            lines.append(f"{action:<8} " + "  ".join(f"{vals[h]:8.3f}" for h in offsets))
        return "\n".join(lines)


def mpjpe_loss(pred, truth):
    """Differentiable mean per-joint position error.

    pred: [batch, K, V, 3] tensor; truth: same-shape array or tensor.
    """
    truth = truth if isinstance(truth, ad.Tensor) else ad.constant(truth)
    if pred.shape != truth.shape:
        raise DimensionError(
            f"prediction {pred.shape} and truth {truth.shape} disagree"
        )
    diff = ad.sub(pred, truth)
    sq_norm = ad.tensor_sum(ad.mul(diff, diff), axis=-1)
    per_joint = ad.sqrt(sq_norm)                      # [batch, K, V]
    total = ad.tensor_sum(per_joint)
    return ad.mul(total, ad.constant(1.0 / per_joint.values.size))


def mpjpe_value(pred, truth):
    """Same metric on plain arrays, computed directly."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    return float(np.linalg.norm(pred - truth, axis=-1).mean())


def _clip_gradients(params, max_norm):
    total = np.sqrt(sum(float((p.grad * p.grad).sum()) for p in params))
    if total > max_norm:
        scale = max_norm / total
        for p in params:
            p.grad *= scale


def train(model, windows, config):
    """Minibatch Adam over the window set; returns per-epoch records.

    Parameters update in place. The learning rate multiplies by the decay
    factor exactly at the configured epoch indices. All shuffling comes
    from the config seed.
    """
    if len(windows) == 0:
        raise ValueError("cannot train on an empty window set")
    params = model.parameters()
    state = AdamState(params)
    rng = np.random.default_rng(config.seed)
    lr = config.lr_initial
    log = []
    for epoch in range(config.epochs):
        if epoch in config.lr_decay_epochs:
            lr *= config.lr_decay_factor
        order = rng.permutation(len(windows))
        losses = []
        for start in range(0, len(order), config.batch_size):
            idx = order[start: start + config.batch_size]
            out = model.forward(windows.inputs[idx])
            loss = mpjpe_loss(out.predictions, windows.targets[idx])
            value = loss.item()
            if not np.isfinite(value):
                norms = [float(np.linalg.norm(p.values)) for p in params]
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}; "
                    f"parameter norms {norms}"
                )
            for p in params:
                p.zero_grad()
            loss.backward()
            if config.clip_norm is not None:
                _clip_gradients(params, config.clip_norm)
            adam_step(params, state, lr)
            losses.append(value)
        log.append(EpochRecord(epoch=epoch, mean_loss=float(np.mean(losses)), lr=lr))
    return log


def _predictions(model, windows, batch_size=256):
    preds = []
    for start in range(0, len(windows), batch_size):
        preds.append(model.predict(windows.inputs[start: start + batch_size]))
    return np.concatenate(preds)


def evaluate(model, windows, horizons):
    """Per-horizon error at the single target frame, averaged over windows.

    Horizons are 1-based frame offsets into the prediction (horizon h is
    predicted frame h).
    """
    k = windows.targets.shape[1]
    for h in horizons:
        if not 1 <= h <= k:
            raise ValueError(f"horizon {h} outside prediction range [1, {k}]")
    preds = _predictions(model, windows)
    report = {}
    for h in horizons:
        report[h] = mpjpe_value(preds[:, h - 1], windows.targets[:, h - 1])
    return EvalReport(horizons=report)


def zero_velocity_baseline(inputs, k_out):
    """Repeat each window's last observed frame for all k_out future frames."""
    inputs = np.asarray(inputs)
    last = inputs[:, -1:]
    return np.repeat(last, k_out, axis=1)


def baseline_report(windows, horizons):
    k = windows.targets.shape[1]
    preds = zero_velocity_baseline(windows.inputs, k)
    return EvalReport(
        horizons={h: mpjpe_value(preds[:, h - 1], windows.targets[:, h - 1])
                  for h in horizons}
    )
