"""Toy reward functions over response feature vectors.

A scorer maps a ``d``-dimensional feature vector to a scalar reward.  The
predictor used by every loss is the reward difference of two responses.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np


class ScorerKind(str, Enum):
    LINEAR = "linear"
    MLP = "mlp"


def n_params(kind: ScorerKind | str, d: int, h: int = 0) -> int:
    if ScorerKind(kind) is ScorerKind.LINEAR:
        return d + 1
    return d * h + h + h + 1


@dataclass
class RewardScorer:
    """Flat parameter vector plus its layout.

    Linear: ``[w (d), b]``.  MLP: ``[W (h*d, row-major), c (h), v (h), b]`` with
    reward ``v . tanh(W f + c) + b``.
    """

    kind: ScorerKind
    d: int
    params: np.ndarray
    h: int = 0

    def __post_init__(self):
        self.kind = ScorerKind(self.kind)
        self.params = np.asarray(self.params, dtype=float)
        if self.kind is ScorerKind.LINEAR:
            self.h = 0
        elif self.h < 1:
            raise ValueError("MLP scorer needs hidden width h >= 1")
        expected = n_params(self.kind, self.d, self.h)
        if self.params.shape != (expected,):
            raise ValueError(f"{self.kind.value} scorer with d={self.d}, h={self.h} "
                             f"needs {expected} parameters, got {self.params.shape}")
        if not np.all(np.isfinite(self.params)):
            raise ValueError("scorer parameters must be finite")

    @classmethod
    def init(cls, kind, d: int, h: int = 32, seed: int = 0) -> "RewardScorer":
        """Gaussian init with variance 1/fan_in, zero biases."""
        kind = ScorerKind(kind)
        rng = np.random.default_rng(seed)
        if kind is ScorerKind.LINEAR:
            return cls(kind, d, np.concatenate([rng.normal(0, 1 / np.sqrt(d), d), [0.0]]))
        W = rng.normal(0, 1 / np.sqrt(d), h * d)
        v = rng.normal(0, 1 / np.sqrt(h), h)
        return cls(kind, d, np.concatenate([W, np.zeros(h), v, [0.0]]), h)

    def copy(self, params=None) -> "RewardScorer":
        return RewardScorer(self.kind, self.d, self.params.copy() if params is None else params, self.h)

    def _unpack(self):
        p, d, h = self.params, self.d, self.h
        W = p[: h * d].reshape(h, d)
        c = p[h * d: h * d + h]
        v = p[h * d + h: h * d + 2 * h]
        return W, c, v, p[-1]

    def _features(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[-1] != self.d:
            raise ValueError(f"feature dimension {f.shape[-1]} does not match scorer d={self.d}")
        return f

    def score(self, f):
        """Reward for one feature vector ``(d,)`` or a batch ``(n, d)``."""
        f = self._features(f)
        if self.kind is ScorerKind.LINEAR:
            return f @ self.params[:-1] + self.params[-1]
        W, c, v, b = self._unpack()
        return np.tanh(f @ W.T + c) @ v + b

    def score_diff(self, fy, fy2):
        fy, fy2 = self._features(fy), self._features(fy2)
        if fy.shape != fy2.shape:
            raise ValueError("paired feature arrays must have equal shapes")
        if self.kind is ScorerKind.LINEAR:
            # bias cancels exactly
            return (fy - fy2) @ self.params[:-1]
        return self.score(fy) - self.score(fy2)

    def backprop_score_diff(self, fy, fy2, upstream) -> np.ndarray:
        """``sum_i upstream_i * d s_i / d params`` for a batch (or a single pair)."""
        fy, fy2 = np.atleast_2d(self._features(fy)), np.atleast_2d(self._features(fy2))
        u = np.atleast_1d(np.asarray(upstream, dtype=float))
        if self.kind is ScorerKind.LINEAR:
            return np.concatenate([u @ (fy - fy2), [0.0]])
        W, c, v, _ = self._unpack()
        Ha = np.tanh(fy @ W.T + c)
        Hb = np.tanh(fy2 @ W.T + c)
        Ga = u[:, None] * v * (1.0 - Ha**2)
        Gb = u[:, None] * v * (1.0 - Hb**2)
        dW = Ga.T @ fy - Gb.T @ fy2
        dc = Ga.sum(axis=0) - Gb.sum(axis=0)
        dv = u @ (Ha - Hb)
        return np.concatenate([dW.ravel(), dc, dv, [0.0]])

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "d": self.d, "h": self.h,
                "params": [float(x) for x in self.params]}

    @classmethod
    def from_dict(cls, d: dict) -> "RewardScorer":
        return cls(ScorerKind(d["kind"]), int(d["d"]), np.asarray(d["params"], dtype=float), int(d.get("h", 0)))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict()).encode()).hexdigest()
