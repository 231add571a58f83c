"""Training loop: Adam with global L2 gradient clipping, per-epoch
validation, best-validation-loss checkpointing. Bit-deterministic given
(seed, config, data)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import cross_entropy, forward, loss_and_grads, make_batch
from .params import ModelConfig, init_params, zeros_like_params

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls(m=zeros_like_params(params), v=zeros_like_params(params))


def clip_global_norm(grads: dict, max_norm: float) -> float:
    """Scale all gradients jointly when their global L2 norm exceeds
    ``max_norm``; returns the pre-clip norm."""
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> None:
    state.t += 1
    bc1 = 1.0 - ADAM_BETA1 ** state.t
    bc2 = 1.0 - ADAM_BETA2 ** state.t
    for name in sorted(params):
        g = grads[name]
        state.m[name] = ADAM_BETA1 * state.m[name] + (1.0 - ADAM_BETA1) * g
        state.v[name] = ADAM_BETA2 * state.v[name] + (1.0 - ADAM_BETA2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        params[name] -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    valid_loss: float
    valid_accuracy: float


@dataclass
class TrainResult:
    params: dict
    config: ModelConfig
    log: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_valid_loss(self) -> float:
        return self.log[self.best_epoch - 1].valid_loss


def evaluate_loss(params, cfg: ModelConfig, examples, batch_size: int = 64):
    """Mean loss and accuracy over ``examples`` in eval mode."""
    total_nll = 0.0
    n_correct = 0
    for start in range(0, len(examples), batch_size):
        batch = make_batch(examples[start:start + batch_size], cfg.uses_dialogue)
        logits, _ = forward(params, cfg, batch, train=False)
        loss, _, _ = cross_entropy(logits, batch.labels)
        total_nll += loss * batch.size
        n_correct += int((logits.argmax(axis=1) == batch.labels).sum())
    n = len(examples)
    return total_nll / n, n_correct / n


def train(train_examples, valid_examples, cfg: ModelConfig,
          stop_at_accuracy: float | None = None) -> TrainResult:
    """Train one model; returns the checkpoint with the best validation
    loss plus the per-epoch log. Aborts on a non-finite loss.
    ``stop_at_accuracy`` ends training early once the validation accuracy
    reaches the given level (used by capacity sanity runs)."""
    if not train_examples or not valid_examples:
        raise ValueError("need non-empty train and valid sets")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg, rng)
    adam = AdamState.for_params(params)
    result = TrainResult(params={}, config=cfg)
    best_loss = np.inf

    n = len(train_examples)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        epoch_nll = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch = make_batch([train_examples[i] for i in idx], cfg.uses_dialogue)
            loss, grads, _ = loss_and_grads(params, cfg, batch, train=True, rng=rng)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, batch offset {start}")
            clip_global_norm(grads, cfg.grad_clip_l2)
            adam_step(params, grads, adam, cfg.lr)
            epoch_nll += loss * batch.size
        valid_loss, valid_acc = evaluate_loss(params, cfg, valid_examples)
        result.log.append(EpochLog(epoch, epoch_nll / n, valid_loss, valid_acc))
        if valid_loss < best_loss:
            best_loss = valid_loss
            result.best_epoch = epoch
            result.params = {k: v.copy() for k, v in params.items()}
        if stop_at_accuracy is not None and valid_acc >= stop_at_accuracy:
            result.params = {k: v.copy() for k, v in params.items()}
            result.best_epoch = epoch
            break
    return result
