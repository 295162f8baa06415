"""Training loop (Adam, linearly decayed step size), greedy decoding, gradient checking."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ChartsumError
from .masks import LsgConfig
from .model import TinyModel, _decode, _encode, loss_and_grads, zero_grads
from .vocab import BOS_ID, EOS_ID

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


class EmptyTrainingSet(ChartsumError):
    pass


class NonFiniteLoss(ChartsumError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}: loss is {loss}")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True)
class TrainConfig:
    """Step size decays linearly from initial_lr toward 0 over epochs × batches."""

    initial_lr: float = 5e-5
    epochs: int = 20
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self):
        # lr 0 is allowed so a no-op training run stays expressible.
        if self.initial_lr < 0:
            raise ValueError(f"initial_lr must be >= 0, got {self.initial_lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def _encode_pairs(model: TinyModel, pairs, lsg: LsgConfig) -> list[tuple[list[int], list[int]]]:
    encoded = []
    for src_text, tgt_text in pairs:
        src = model.vocab.encode(src_text)[: lsg.max_input_tokens]
        tgt = model.vocab.encode(tgt_text)
        encoded.append((src, tgt))
    return encoded


def train(
    model: TinyModel,
    pairs: Sequence[tuple[str, str]],
    tc: TrainConfig,
    lsg: LsgConfig,
    log: Callable[[str], None] | None = None,
) -> tuple[TinyModel, list[float]]:
    """Teacher-forced cross-entropy training; returns (updated model, per-epoch mean loss).

    The input model is left untouched; sources longer than the input cap are
    truncated rather than rejected.
    """
    if not pairs:
        raise EmptyTrainingSet("no (source, target) pairs to train on")
    examples = _encode_pairs(model, pairs, lsg)
    params = {name: value.copy() for name, value in model.params.items()}
    working = TinyModel(config=model.config, vocab=model.vocab, params=params)
    m_state = zero_grads(params)
    v_state = zero_grads(params)
    order = list(range(len(examples)))
    rng = random.Random(tc.seed)
    n_batches = math.ceil(len(examples) / tc.batch_size)
    total_steps = tc.epochs * n_batches
    history: list[float] = []
    step = 0
    for epoch in range(tc.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        epoch_tokens = 0
        for start in range(0, len(order), tc.batch_size):
            batch = order[start : start + tc.batch_size]
            grads = zero_grads(params)
            batch_loss = 0.0
            batch_tokens = 0
            for idx in batch:
                src, tgt = examples[idx]
                loss_sum, n_tokens, _ = loss_and_grads(working, src, tgt, lsg, grads)
                batch_loss += loss_sum
                batch_tokens += n_tokens
            if not math.isfinite(batch_loss):
                raise NonFiniteLoss(epoch, batch_loss)
            lr = tc.initial_lr * (1.0 - step / total_steps)
            step += 1
            inv_tokens = 1.0 / batch_tokens
            bias1 = 1.0 - _ADAM_BETA1**step
            bias2 = 1.0 - _ADAM_BETA2**step
            for name, value in params.items():
                g = grads[name] * inv_tokens
                m_state[name] = _ADAM_BETA1 * m_state[name] + (1.0 - _ADAM_BETA1) * g
                v_state[name] = _ADAM_BETA2 * v_state[name] + (1.0 - _ADAM_BETA2) * g**2
                value -= lr * (m_state[name] / bias1) / (np.sqrt(v_state[name] / bias2) + _ADAM_EPS)
            epoch_loss += batch_loss
            epoch_tokens += batch_tokens
        history.append(epoch_loss / epoch_tokens)
        if log is not None:
            log(f"epoch {epoch + 1}/{tc.epochs}: loss {history[-1]:.6f}")
    return working, history


def generate(model: TinyModel, src: Sequence[int], max_len: int, lsg: LsgConfig) -> list[int]:
    """Greedy decode from BOS until EOS or max_len tokens; argmax ties pick the lowest id."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    enc_out, _ = _encode(model.params, src, model.config, lsg)
    prefix = [BOS_ID]
    emitted: list[int] = []
    while len(emitted) < max_len:
        logits, _ = _decode(model.params, enc_out, prefix, model.config)
        nxt = int(np.argmax(logits[-1]))
        if nxt == EOS_ID:
            break
        emitted.append(nxt)
        prefix.append(nxt)
    return emitted


def summarize_ids(model: TinyModel, text: str, max_len: int, lsg: LsgConfig) -> list[int]:
    """Encode text (truncated to the input cap) and greedy-decode a summary."""
    return generate(model, model.vocab.encode(text)[: lsg.max_input_tokens], max_len, lsg)


def _mean_loss(model: TinyModel, src, tgt, lsg: LsgConfig) -> float:
    loss_sum, n_tokens, _ = loss_and_grads(model, src, tgt, lsg)
    return loss_sum / n_tokens


def grad_check(
    model: TinyModel,
    example: tuple[Sequence[int], Sequence[int]],
    epsilon: float = 1e-5,
    n_params_sampled: int = 200,
    seed: int = 0,
    lsg: LsgConfig | None = None,
) -> float:
    """Max discrepancy between analytic gradients and central finite differences.

    Relative error per sampled parameter, falling back to absolute error when
    both gradients are below 1e-8 in magnitude.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if lsg is None:
        lsg = LsgConfig()
    src, tgt = list(example[0]), list(example[1])
    loss_sum, n_tokens, grads = loss_and_grads(model, src, tgt, lsg)
    names = sorted(model.params)
    sizes = [model.params[name].size for name in names]
    offsets = np.cumsum([0] + sizes)
    total = int(offsets[-1])
    rng = np.random.default_rng(seed)
    chosen = rng.choice(total, size=min(n_params_sampled, total), replace=False)
    worst = 0.0
    for flat in sorted(int(c) for c in chosen):
        slot = int(np.searchsorted(offsets, flat, side="right") - 1)
        name, offset = names[slot], flat - int(offsets[slot])
        flat_view = model.params[name].reshape(-1)
        original = flat_view[offset]
        flat_view[offset] = original + epsilon
        loss_plus = _mean_loss(model, src, tgt, lsg)
        flat_view[offset] = original - epsilon
        loss_minus = _mean_loss(model, src, tgt, lsg)
        flat_view[offset] = original
        numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
        analytic = grads[name].reshape(-1)[offset] / n_tokens
        scale = max(abs(analytic), abs(numeric))
        err = abs(analytic - numeric) if scale < 1e-8 else abs(analytic - numeric) / scale
        worst = max(worst, err)
    return worst
