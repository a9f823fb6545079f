"""Per-example losses with analytic gradients in the score difference ``s``
and the thresholds ``zeta``.

Every loss takes arrays (or scalars) ``s`` and ``z`` of matching shape and
returns a :class:`LossValueGrad` whose ``value`` and ``d_s`` share that shape
and whose ``d_zeta`` has an extra trailing axis of length ``2K``.  All values
are evaluated in log space so no loss ever returns NaN for finite inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .thresholds import Thresholds, _check_levels, interval_of


class LossKind(str, Enum):
    SIMPLE_BT = "simple_bt"
    MARGIN_BT = "margin_bt"
    SCALED_BT = "scaled_bt"
    SOFT_LABEL = "soft_label"
    ORDINAL_NLL = "ordinal_nll"
    ORDINAL_AT = "ordinal_at"
    ORDINAL_IT = "ordinal_it"

    @property
    def ordinal(self) -> bool:
        return self in (LossKind.ORDINAL_NLL, LossKind.ORDINAL_AT, LossKind.ORDINAL_IT)


DEFAULT_MARGINS = (1.0, 2.0, 3.0)
DEFAULT_WEIGHTS = (1.0, 2.0, 3.0)
DEFAULT_SOFT_PROBS = (0.75, 0.85, 0.95)


class ContractError(ValueError):
    """A loss received an example it is not defined for (e.g. a tie for margin BT)."""


@dataclass
class LossSpec:
    """Loss choice plus the per-strength tables used by the BT-family baselines.

    Tables are indexed by strength ``|z| = 1..K``.
    """

    kind: LossKind = LossKind.ORDINAL_NLL
    margin_table: tuple = DEFAULT_MARGINS
    weight_table: tuple = DEFAULT_WEIGHTS
    prob_table: tuple = DEFAULT_SOFT_PROBS

    def __post_init__(self):
        self.kind = LossKind(self.kind)
        self.margin_table = tuple(float(v) for v in self.margin_table)
        self.weight_table = tuple(float(v) for v in self.weight_table)
        self.prob_table = tuple(float(v) for v in self.prob_table)
        if any(w < 0 for w in self.weight_table):
            raise ValueError("weight_table entries must be nonnegative")
        if any(not 0 < p <= 1 for p in self.prob_table):
            raise ValueError("prob_table entries must lie in (0, 1]")

    def check_K(self, K: int) -> None:
        table = {
            LossKind.MARGIN_BT: self.margin_table,
            LossKind.SCALED_BT: self.weight_table,
            LossKind.SOFT_LABEL: self.prob_table,
        }.get(self.kind)
        if table is not None and len(table) < K:
            raise ValueError(f"{self.kind.value} table has {len(table)} entries, need K={K}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "margin_table": list(self.margin_table),
            "weight_table": list(self.weight_table),
            "prob_table": list(self.prob_table),
        }


@dataclass
class LossValueGrad:
    value: np.ndarray
    d_s: np.ndarray
    d_zeta: np.ndarray = field(default=None)


def log_sigmoid(t):
    """``log(sigmoid(t))`` computed as ``-softplus(-t)``."""
    return -np.logaddexp(0.0, -np.asarray(t, dtype=float))


def sigmoid(t):
    t = np.asarray(t, dtype=float)
    return np.exp(log_sigmoid(t))


def _log1mexp(x):
    """``log(1 - exp(x))`` for ``x <= 0``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > -np.log(2.0), np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


def log_prob_level(s, th: Thresholds, z):
    """Log-probability of level ``z`` given score difference ``s`` under the ordered logit.

    Uses ``sigma(a) - sigma(b) = sigma(a) sigma(-b) (1 - exp(b - a))`` with
    ``a = hi - s`` and ``b = lo - s``, which stays accurate when the two
    sigmoids nearly cancel and when either bound is infinite.
    """
    s = np.asarray(s, dtype=float)
    lo, hi = interval_of(z, th)
    a, b = hi - s, lo - s
    return log_sigmoid(a) + log_sigmoid(-b) + _log1mexp(lo - hi)


def prob_level(s, th: Thresholds, z):
    return np.exp(log_prob_level(s, th, z))


def _scatter(K: int, shape, index, values) -> np.ndarray:
    """Dense ``d_zeta`` array with ``values`` placed at sorted-threshold ``index`` (-1 = none)."""
    out = np.zeros(shape + (2 * K,))
    index = np.broadcast_to(index, shape)
    values = np.broadcast_to(values, shape)
    mask = index >= 0
    flat = out.reshape(-1, 2 * K)
    rows = np.flatnonzero(mask.ravel())
    flat[rows, index.ravel()[rows]] += values.ravel()[rows]
    return out


def _bound_indices(z, K: int):
    rank = z + K + 1
    lo_idx = np.where(rank - 2 >= 0, rank - 2, -1)
    hi_idx = np.where(rank - 1 <= 2 * K - 1, rank - 1, -1)
    return lo_idx, hi_idx


def ordinal_nll(s, th: Thresholds, z) -> LossValueGrad:
    s = np.asarray(s, dtype=float)
    z = np.broadcast_to(_check_levels(z, th.K), s.shape)
    lo, hi = interval_of(z, th)
    logp = log_prob_level(s, th, z)
    a, b = hi - s, lo - s
    # sigma'(t)/p evaluated in log space; zero at infinite bounds.
    with np.errstate(invalid="ignore"):
        ra = np.exp(log_sigmoid(a) + log_sigmoid(-a) - logp)
        rb = np.exp(log_sigmoid(b) + log_sigmoid(-b) - logp)
    ra = np.where(np.isinf(hi), 0.0, ra)
    rb = np.where(np.isinf(lo), 0.0, rb)
    lo_idx, hi_idx = _bound_indices(z, th.K)
    d_zeta = _scatter(th.K, s.shape, hi_idx, -ra) + _scatter(th.K, s.shape, lo_idx, rb)
    return LossValueGrad(-logp, ra - rb, d_zeta)


def ordinal_at(s, th: Thresholds, z) -> LossValueGrad:
    """All-threshold loss: one logistic penalty per threshold, sign set by the target rank."""
    s = np.asarray(s, dtype=float)
    z = np.broadcast_to(_check_levels(z, th.K), s.shape)
    K = th.K
    rank = (z + K + 1)[..., None]
    j = np.arange(1, 2 * K + 1)
    nu = np.where(j < rank, -1.0, 1.0)
    u = nu * (th.zeta - s[..., None])
    value = -log_sigmoid(u).sum(axis=-1)
    w = nu * sigmoid(-u)
    return LossValueGrad(value, w.sum(axis=-1), -w)


def ordinal_it(s, th: Thresholds, z) -> LossValueGrad:
    """Immediate-threshold loss: penalties at the two bounds of the target interval only."""
    s = np.asarray(s, dtype=float)
    z = np.broadcast_to(_check_levels(z, th.K), s.shape)
    lo, hi = interval_of(z, th)
    value = -log_sigmoid(s - lo) - log_sigmoid(hi - s)
    g_lo = sigmoid(lo - s)
    g_hi = sigmoid(s - hi)
    lo_idx, hi_idx = _bound_indices(z, th.K)
    d_zeta = _scatter(th.K, s.shape, lo_idx, g_lo) + _scatter(th.K, s.shape, hi_idx, -g_hi)
    return LossValueGrad(value, g_hi - g_lo, d_zeta)


def simple_bt(s, z_sign) -> LossValueGrad:
    s = np.asarray(s, dtype=float)
    sign = np.broadcast_to(np.asarray(z_sign, dtype=float), s.shape)
    if np.any(np.abs(sign) != 1):
        raise ContractError("simple_bt needs an orientation of +1 or -1")
    return LossValueGrad(-log_sigmoid(sign * s), -sign * sigmoid(-sign * s))


def _strength(z, table, name: str):
    z = np.asarray(z)
    if np.any(z == 0):
        raise ContractError(f"{name} is undefined for tied (z=0) examples")
    k = np.abs(z).astype(np.int64)
    if np.any(k > len(table)):
        raise ContractError(f"{name} table has no entry for strength {int(k.max())}")
    return np.sign(z).astype(float), np.asarray(table, dtype=float)[k - 1]


def margin_bt(s, z, table=DEFAULT_MARGINS) -> LossValueGrad:
    """``-log sigmoid(s - m(|z|))`` after orienting the pair so the preferred side comes first."""
    s = np.asarray(s, dtype=float)
    sign, m = _strength(np.broadcast_to(z, s.shape), table, "margin_bt")
    u = sign * s - m
    return LossValueGrad(-log_sigmoid(u), -sign * sigmoid(-u))


def scaled_bt(s, z, table=DEFAULT_WEIGHTS) -> LossValueGrad:
    s = np.asarray(s, dtype=float)
    sign, w = _strength(np.broadcast_to(z, s.shape), table, "scaled_bt")
    base = simple_bt(s, sign)
    return LossValueGrad(w * base.value, w * base.d_s)


def soft_target(z, table=DEFAULT_SOFT_PROBS):
    """Soft preference target with ``p(-k) = 1 - p(k)`` and ``p(0) = 0.5``."""
    z = np.asarray(z).astype(np.int64)
    k = np.abs(z)
    if np.any(k > len(table)):
        raise ContractError(f"soft_label table has no entry for strength {int(k.max())}")
    padded = np.concatenate([[0.5], np.asarray(table, dtype=float)])
    p = padded[k]
    return np.where(z < 0, 1.0 - p, p)


def soft_label(s, z, table=DEFAULT_SOFT_PROBS) -> LossValueGrad:
    s = np.asarray(s, dtype=float)
    p = soft_target(np.broadcast_to(z, s.shape), table)
    value = -p * log_sigmoid(s) - (1.0 - p) * log_sigmoid(-s)
    return LossValueGrad(value, sigmoid(s) - p)


def reg_penalty(th: Thresholds, lam: float):
    """``lam * ||zeta||^2`` and its gradient."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return float(lam * np.dot(th.zeta, th.zeta)), 2.0 * lam * th.zeta


def skips_ties(kind: LossKind) -> bool:
    """BT losses that need an orientation drop z=0 examples."""
    return LossKind(kind) in (LossKind.SIMPLE_BT, LossKind.MARGIN_BT, LossKind.SCALED_BT)


def evaluate(spec: LossSpec, s, z, th: Thresholds | None = None) -> LossValueGrad:
    """Dispatch on ``spec.kind``; BT-family results get an all-zero ``d_zeta`` when ``th`` is given."""
    kind = spec.kind
    if kind.ordinal:
        if th is None:
            raise ValueError(f"{kind.value} needs thresholds")
        fn = {LossKind.ORDINAL_NLL: ordinal_nll, LossKind.ORDINAL_AT: ordinal_at,
              LossKind.ORDINAL_IT: ordinal_it}[kind]
        return fn(s, th, z)
    if kind is LossKind.SIMPLE_BT:
        z = np.asarray(z)
        if np.any(z == 0):
            raise ContractError("simple_bt is undefined for tied (z=0) examples")
        out = simple_bt(s, np.sign(z))
    elif kind is LossKind.MARGIN_BT:
        out = margin_bt(s, z, spec.margin_table)
    elif kind is LossKind.SCALED_BT:
        out = scaled_bt(s, z, spec.weight_table)
    else:
        out = soft_label(s, z, spec.prob_table)
    if th is not None:
        out.d_zeta = np.zeros(np.shape(out.value) + (2 * th.K,))
    return out
