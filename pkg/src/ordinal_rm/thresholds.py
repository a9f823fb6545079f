"""Ordered cut-points for signed preference levels.

Levels run over ``{-K, ..., K}``.  There are ``2K`` thresholds stored in
ascending order ``t_1 < ... < t_{2K}``, which correspond to
``zeta_{-K}, ..., zeta_{-1}, zeta_1, ..., zeta_K`` (there is no ``zeta_0``).
Level ``z`` has rank ``z + K + 1`` and occupies the half-open interval
``[t_{rank-1}, t_rank)`` with ``t_0 = -inf`` and ``t_{2K+1} = +inf``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np


class Mode(str, Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


class LevelError(ValueError):
    """A preference level outside ``{-K..K}``."""


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    K: int
    mode: Mode
    zeta: np.ndarray

    def __post_init__(self):
        zeta = np.asarray(self.zeta, dtype=float)
        if zeta.shape != (2 * self.K,):
            raise DimensionError(f"expected {2 * self.K} thresholds, got shape {zeta.shape}")
        if not np.all(np.isfinite(zeta)):
            raise ValueError("thresholds must be finite")
        if np.any(np.diff(zeta) <= 0):
            raise ValueError(f"thresholds not strictly increasing: {zeta}")
        zeta.setflags(write=False)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "mode", Mode(self.mode))

    def __eq__(self, other):
        if not isinstance(other, Thresholds):
            return NotImplemented
        return (self.K, self.mode) == (other.K, other.mode) and np.array_equal(self.zeta, other.zeta)

    @property
    def levels(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def signed(self, k: int) -> float:
        """Return ``zeta_k`` by its signed index ``k`` in ``{-K..-1, 1..K}``."""
        if k == 0 or abs(k) > self.K:
            raise LevelError(f"no threshold with index {k}")
        return float(self.zeta[k + self.K if k < 0 else k + self.K - 1])

    def to_dict(self) -> dict:
        return {"K": self.K, "mode": self.mode.value, "zeta": [float(t) for t in self.zeta]}

    @classmethod
    def from_dict(cls, d: dict) -> "Thresholds":
        return cls(int(d["K"]), Mode(d["mode"]), np.asarray(d["zeta"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class ThresholdParams:
    """Unconstrained parameterization; ``alpha`` has length K (symmetric) or 2K."""

    mode: Mode
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))

    @property
    def K(self) -> int:
        n = self.alpha.shape[0]
        return n if self.mode is Mode.SYMMETRIC else n // 2


def _check_alpha(params: ThresholdParams, K: int | None = None) -> int:
    n = params.alpha.shape[0] if params.alpha.ndim == 1 else -1
    if n < 1 or (params.mode is Mode.ASYMMETRIC and n % 2):
        raise DimensionError(f"alpha of shape {params.alpha.shape} invalid for {params.mode.value} mode")
    k = params.K
    if K is not None and k != K:
        raise DimensionError(f"alpha encodes K={k}, expected K={K}")
    return k


def build_thresholds(params: ThresholdParams, K: int | None = None) -> Thresholds:
    """Map ``alpha`` to strictly increasing thresholds via exponentiated increments."""
    K = _check_alpha(params, K)
    a = params.alpha
    if params.mode is Mode.SYMMETRIC:
        pos = np.cumsum(np.exp(a))
        zeta = np.concatenate([-pos[::-1], pos])
    else:
        zeta = a[0] + np.concatenate([[0.0], np.cumsum(np.exp(a[1:]))])
    return Thresholds(K, params.mode, zeta)


def backprop_thresholds(params: ThresholdParams, grad_zeta) -> np.ndarray:
    """Chain rule through :func:`build_thresholds`: dL/dalpha from dL/dzeta (sorted order)."""
    K = _check_alpha(params)
    g = np.asarray(grad_zeta, dtype=float)
    if g.shape != (2 * K,):
        raise DimensionError(f"grad_zeta must have {2 * K} entries, got {g.shape}")
    a = params.alpha
    if params.mode is Mode.SYMMETRIC:
        # zeta_{-k} = -zeta_k, so the negative half enters with a minus sign.
        g_pos = g[K:] - g[:K][::-1]
        tail = np.cumsum(g_pos[::-1])[::-1]
        return np.exp(a) * tail
    tail = np.cumsum(g[::-1])[::-1]
    return np.concatenate([[tail[0]], np.exp(a[1:]) * tail[1:]])


def params_from_zeta(zeta, mode: Mode | str) -> ThresholdParams:
    """Inverse of :func:`build_thresholds` for a valid threshold vector."""
    mode = Mode(mode)
    zeta = np.asarray(zeta, dtype=float)
    K = zeta.shape[0] // 2
    if np.any(np.diff(zeta) <= 0):
        raise ValueError("zeta must be strictly increasing")
    if mode is Mode.SYMMETRIC:
        pos = zeta[K:]
        if pos[0] <= 0:
            raise ValueError("symmetric thresholds need zeta_1 > 0")
        return ThresholdParams(mode, np.log(np.diff(np.concatenate([[0.0], pos]))))
    return ThresholdParams(mode, np.concatenate([[zeta[0]], np.log(np.diff(zeta))]))


def default_params(K: int, mode: Mode | str) -> ThresholdParams:
    """Thresholds uniformly spaced on ``[-K/2, K/2]``."""
    return params_from_zeta(np.linspace(-K / 2, K / 2, 2 * K), mode)


def _check_levels(z, K: int) -> np.ndarray:
    z = np.asarray(z)
    if z.size and (not np.issubdtype(z.dtype, np.integer) and np.any(z != np.round(z))):
        raise LevelError("levels must be integers")
    z = z.astype(np.int64)
    if np.any(np.abs(z) > K):
        bad = z[np.abs(z) > K].ravel()[0]
        raise LevelError(f"level {bad} outside [-{K}, {K}]")
    return z


def interval_of(z, th: Thresholds):
    """Return ``(lo, hi)`` bounds of level ``z`` (vectorized), using +-inf sentinels."""
    z = _check_levels(z, th.K)
    padded = np.concatenate([[-np.inf], th.zeta, [np.inf]])
    rank = z + th.K + 1
    lo, hi = padded[rank - 1], padded[rank]
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def predict_level(s, th: Thresholds):
    """Level whose half-open interval ``[lo, hi)`` contains ``s``."""
    s = np.asarray(s, dtype=float)
    z = np.searchsorted(th.zeta, s, side="right") - th.K
    return int(z) if z.ndim == 0 else z


def pava(y) -> np.ndarray:
    """Unweighted pool-adjacent-violators: the nondecreasing least-squares fit to ``y``."""
    y = np.asarray(y, dtype=float)
    means: list[float] = []
    sizes: list[int] = []
    for v in y:
        means.append(float(v))
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            n = sizes[-2] + sizes[-1]
            m = (means[-2] * sizes[-2] + means[-1] * sizes[-1]) / n
            means.pop()
            sizes.pop()
            means[-1], sizes[-1] = m, n
    return np.repeat(means, sizes)


def project_zeta(raw, eps: float) -> np.ndarray:
    """Euclidean projection onto ``{zeta : zeta_{j+1} >= zeta_j + eps}``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    raw = np.asarray(raw, dtype=float)
    if np.all(raw[1:] >= raw[:-1] + eps):
        return raw.copy()
    shift = eps * np.arange(raw.shape[0])
    out = pava(raw - shift) + shift
    # pooled blocks come back with spacing exactly eps up to rounding; enforce it.
    for j in range(1, out.shape[0]):
        if out[j] < out[j - 1] + eps:
            out[j] = out[j - 1] + eps
    return out


def project_thresholds(raw, eps: float, mode: Mode | str = Mode.ASYMMETRIC) -> Thresholds:
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or raw.shape[0] % 2:
        raise DimensionError("raw thresholds must have even length 2K")
    mode = Mode(mode)
    out = project_zeta(raw, eps)
    if mode is Mode.SYMMETRIC:
        # the feasible set is reflection-invariant, so a symmetric input projects to a symmetric point
        out = 0.5 * (out - out[::-1])
    return Thresholds(raw.shape[0] // 2, mode, out)
