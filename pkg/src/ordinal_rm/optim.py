"""Plain numpy Adam/SGD and the cosine-with-warmup schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class AdamMoments:
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "AdamMoments":
        return cls(np.zeros(n), np.zeros(n))


def adam_step(moments: AdamMoments, grad, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, t: int = 1):
    """One bias-corrected Adam update. Returns ``(delta, new_moments)``; apply as ``p += delta``."""
    if t < 1:
        raise ValueError("Adam step counter starts at 1")
    g = np.asarray(grad, dtype=float)
    m = beta1 * moments.m + (1.0 - beta1) * g
    v = beta2 * moments.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return -lr * m_hat / (np.sqrt(v_hat) + eps), AdamMoments(m, v)


def cosine_warmup_lr(step: int, total: int, warmup_frac: float, base_lr: float) -> float:
    """Linear ramp from 0 over the warmup steps, then half-cosine decay to 0 at ``total``."""
    if not 0 <= step <= total:
        raise ValueError(f"step {step} outside [0, {total}]")
    warmup = int(round(warmup_frac * total))
    if step < warmup:
        return base_lr * step / warmup
    if total == warmup:
        return base_lr
    progress = (step - warmup) / (total - warmup)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


class Optimizer:
    """Stateful wrapper used by the trainer: SGD or Adam over one flat vector."""

    def __init__(self, kind: str, n: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {kind!r}")
        self.kind = kind
        self.betas = (beta1, beta2)
        self.eps = eps
        self.moments = AdamMoments.zeros(n)
        self.t = 0

    def delta(self, grad, lr: float) -> np.ndarray:
        self.t += 1
        if self.kind == "sgd":
            return -lr * np.asarray(grad, dtype=float)
        d, self.moments = adam_step(self.moments, grad, lr, *self.betas, self.eps, self.t)
        return d
