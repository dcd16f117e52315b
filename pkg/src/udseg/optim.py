"""Initialization, Adagrad with per-epoch decay, global-norm clipping, dropout."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .autograd import Parameter, Tensor, mul

ADAGRAD_EPS = 1e-8


@dataclass
class TrainConfig:
    char_embedding_size: int = 50
    rnn_state_size: int = 200
    initial_lr_main: float = 0.1
    decay_rate: float = 0.05
    grad_clip_norm: float = 5.0
    initial_lr_encdec: float = 0.3
    dropout_rate: float = 0.5
    batch_size: int = 10
    main_epochs: int = 30
    encdec_epochs: int = 50
    seed: int = 1
    share_encdec_weights: bool = True
    adagrad_initial_accumulator: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.decay_rate < 0 or self.initial_lr_main <= 0 or self.initial_lr_encdec <= 0:
            raise ValueError("learning rates must be positive and decay non-negative")
        if min(self.char_embedding_size, self.rnn_state_size, self.batch_size) < 1:
            raise ValueError("sizes must be positive")
        if self.main_epochs < 0 or self.encdec_epochs < 0:
            raise ValueError("epoch counts must be non-negative")

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                continue
            default = getattr(cls, key)
            if isinstance(default, bool):
                kwargs[key] = raw if isinstance(raw, bool) else str(raw).lower() == "true"
            else:
                kwargs[key] = type(default)(raw)
        return cls(**kwargs)


def glorot_init(shape, rng):
    """Uniform in [-b, b] with b = sqrt(6 / (fan_in + fan_out)).

    fan_in/fan_out are the last two dimensions; a vector uses fan_out = 1.
    """
    shape = tuple(shape)
    if not shape:
        raise ValueError("shape needs at least one dimension")
    if len(shape) == 1:
        fan_in, fan_out = shape[0], 1
    else:
        fan_in, fan_out = shape[-2], shape[-1]
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def lr_schedule(epoch, cfg: TrainConfig, encdec=False):
    """Learning rate for a 0-based epoch: eta0 / (1 + decay * epoch)."""
    eta0 = cfg.initial_lr_encdec if encdec else cfg.initial_lr_main
    return eta0 / (1.0 + cfg.decay_rate * epoch)


def adagrad_step(p: Parameter, lr):
    g = p.grad
    if g is None:
        return p
    p.accumulator += g * g
    p.data -= lr * g / (np.sqrt(p.accumulator) + ADAGRAD_EPS)
    p.grad = None
    return p


def clip_global_norm(grads, max_norm=5.0):
    """Return (scaled copies of grads, original global norm)."""
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads], norm
    return [g for g in grads], norm


def dropout(x: Tensor, rate, training, rng):
    """Inverted dropout; identity at inference time."""
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, keep)


class Adagrad:
    """Applies clipping then one Adagrad step to every parameter with a gradient."""

    def __init__(self, params, cfg: TrainConfig, encdec=False):
        self.params = list(params)
        self.cfg = cfg
        self.encdec = encdec
        for p in self.params:
            if not p.accumulator.any():
                p.accumulator[...] = cfg.adagrad_initial_accumulator

    def step(self, epoch):
        live = [p for p in self.params if p.grad is not None]
        clipped, norm = clip_global_norm([p.grad for p in live], self.cfg.grad_clip_norm)
        lr = lr_schedule(epoch, self.cfg, self.encdec)
        for p, g in zip(live, clipped):
            p.grad = g
            adagrad_step(p, lr)
        return norm
