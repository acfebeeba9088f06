"""Generative pre-training: next-value cross-entropy minimized with Adam."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .data import QuantizedSequence, quantize
from .errors import ConfigError, NonFiniteGradient, NonFiniteLoss, ShapeMismatch, TargetOutOfRange
from .model import ModelConfig, backward, forward, init_params, param_shapes, softmax_probs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    step_size: float = 1e-3
    batch_size: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: Optional[float] = None
    shuffle: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("train.epochs", "must be >= 1")
        if not self.step_size > 0:
            raise ConfigError("train.step_size", "must be > 0")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size", "must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("train.beta1", "Adam betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ConfigError("train.eps", "must be > 0")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ConfigError("train.grad_clip", "must be > 0 when set")
        if self.seed < 0:
            raise ConfigError("train.seed", "must be unsigned")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LossRecord:
    epoch_means: list = field(default_factory=list)
    sequence_totals: Optional[np.ndarray] = None   # (N,)   L_n after training
    per_timestamp: Optional[np.ndarray] = None     # (N, T-1)


def cross_entropy(logits_row, target: int) -> float:
    """``-log softmax(logits_row)[target]`` via log-sum-exp."""
    z = np.asarray(logits_row, dtype=np.float64)
    if not 0 <= target < z.shape[-1]:
        raise TargetOutOfRange(f"target {target} outside [0, {z.shape[-1]})")
    m = z.max()
    return float(m + np.log(np.exp(z - m).sum()) - z[target])


def _log_softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def sequence_loss(logits, targets):
    """Per-timestamp cross-entropy and its sum.

    ``logits`` is ``(L, r)`` or ``(B, L, r)`` (a ``ForwardOutput`` is accepted);
    ``targets`` holds the classes of positions ``2..T``. Returns
    ``(per_timestamp, total)`` with matching leading axes.
    """
    logits = getattr(logits, "logits", logits)
    classes = targets.classes if isinstance(targets, QuantizedSequence) else np.asarray(targets)
    if logits.shape[:-1] != classes.shape:
        raise ShapeMismatch(f"logits {logits.shape} vs targets {classes.shape}")
    r = logits.shape[-1]
    if classes.size and (classes.min() < 0 or classes.max() >= r):
        raise TargetOutOfRange(f"targets must lie in [0, {r})")
    logp = _log_softmax(logits)
    per_t = -np.take_along_axis(logp, classes[..., None].astype(np.int64), axis=-1)[..., 0]
    return per_t, per_t.sum(axis=-1)


def split_inputs(values, resolution: int):
    """Model inputs (positions 1..T-1) and next-value targets (positions 2..T)."""
    v = np.asarray(values, dtype=np.float64)
    return v[..., :-1], quantize(v[..., 1:], resolution).classes


def loss_and_grads(params, config: ModelConfig, inputs, targets, reduction: str = "mean"):
    """Scalar training loss and its parameter gradients for one batch.

    ``reduction="mean"`` averages over all timesteps; ``"sum"`` returns the
    summed sequence losses.
    """
    out = forward(inputs, params, config, keep_cache=True)
    logits = out.logits if out.logits.ndim == 3 else out.logits[None]
    t = np.asarray(targets).reshape(logits.shape[:-1])
    per_t, _ = sequence_loss(logits, t)
    dlogits = softmax_probs(logits)
    np.put_along_axis(dlogits, t[..., None], np.take_along_axis(dlogits, t[..., None], -1) - 1.0, -1)
    if reduction == "mean":
        loss = per_t.mean()
        dlogits /= per_t.size
    elif reduction == "sum":
        loss = per_t.sum()
    else:
        raise ValueError(f"unknown reduction {reduction!r}")
    return float(loss), backward(dlogits, params, config, out.cache)


@dataclass
class AdamState:
    step: int
    m: dict
    v: dict

    @classmethod
    def zeros_like(cls, params: dict) -> "AdamState":
        return cls(0, {k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict, grads: dict, state: AdamState, config: TrainConfig) -> AdamState:
    """One bias-corrected Adam descent step. Updates ``params`` and ``state`` in place."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient in {name}")
    if config.grad_clip is not None:
        norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        if norm > config.grad_clip:
            grads = {k: g * (config.grad_clip / norm) for k, g in grads.items()}
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        params[name] -= config.step_size * (m / c1) / (np.sqrt(v / c2) + config.eps)
    return state


def evaluate_losses(params, config: ModelConfig, values, chunk: int = 256):
    """Per-timestamp and total losses for a ``(N, T)`` normalized matrix, in eval mode."""
    inputs, targets = split_inputs(np.atleast_2d(values), config.resolution)
    per_t = np.empty(targets.shape)
    for s in range(0, len(inputs), chunk):
        out = forward(inputs[s:s + chunk], params, config)
        per_t[s:s + chunk], _ = sequence_loss(out.logits, targets[s:s + chunk])
    return per_t, per_t.sum(axis=-1)


def train(values, model_config: ModelConfig, train_config: TrainConfig = TrainConfig(),
          params: Optional[dict] = None):
    """Pre-train on a normalized ``(N, T)`` value matrix. Labels are never seen.

    Sequences are visited in order (or a seeded shuffle), ``batch_size`` at a
    time, with one Adam step per batch. Returns ``(params, LossRecord)``; the
    record's per-sequence losses are recomputed after the final epoch.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != model_config.seq_len:
        raise ShapeMismatch(f"expected (N, {model_config.seq_len}) values, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise NonFiniteLoss(0, -1, "non-finite input")
    params = init_params(model_config) if params is None else {k: v.copy() for k, v in params.items()}
    inputs, targets = split_inputs(values, model_config.resolution)
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(train_config.seed)
    record = LossRecord()
    n, bs = len(inputs), train_config.batch_size
    for epoch in range(train_config.epochs):
        order = rng.permutation(n) if train_config.shuffle else np.arange(n)
        total, count = 0.0, 0
        for s in range(0, n, bs):
            idx = order[s:s + bs]
            loss, grads = loss_and_grads(params, model_config, inputs[idx], targets[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss(epoch, int(idx[0]), loss)
            adam_step(params, grads, state, train_config)
            total += loss * len(idx)
            count += len(idx)
        record.epoch_means.append(total / count)
        log.debug("epoch %d mean loss %.6f", epoch, record.epoch_means[-1])
    record.per_timestamp, record.sequence_totals = evaluate_losses(params, model_config, values)
    return params, record


@dataclass
class GradCheckResult:
    max_rel_error: float
    per_tensor: dict
    n_checked: int
    n_params: int


def grad_check(config: ModelConfig, values, epsilon: float = 1e-5, params: Optional[dict] = None) -> GradCheckResult:
    """Compare the analytic gradient of the summed sequence loss against central differences.

    Every scalar parameter is perturbed. The per-tensor error is
    ``||g_analytic - g_numeric|| / max(||g_analytic|| + ||g_numeric||, 1e-12)``.
    """
    params = init_params(config) if params is None else {k: v.copy() for k, v in params.items()}
    inputs, targets = split_inputs(np.asarray(values, dtype=np.float64)[None], config.resolution)

    def total_loss():
        out = forward(inputs, params, config)
        return float(sequence_loss(out.logits, targets)[1].sum())

    _, analytic = loss_and_grads(params, config, inputs, targets, reduction="sum")
    per_tensor, checked = {}, 0
    for name in param_shapes(config):
        p = params[name]
        numeric = np.zeros_like(p)
        flat, nflat = p.reshape(-1), numeric.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + epsilon
            up = total_loss()
            flat[j] = orig - epsilon
            down = total_loss()
            flat[j] = orig
            nflat[j] = (up - down) / (2 * epsilon)
            checked += 1
        a = analytic[name]
        denom = max(np.linalg.norm(a) + np.linalg.norm(numeric), 1e-12)
        per_tensor[name] = float(np.linalg.norm(a - numeric) / denom)
    return GradCheckResult(max(per_tensor.values()), per_tensor, checked,
                           int(sum(p.size for p in params.values())))
