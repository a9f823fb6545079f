"""Joint minibatch training of a reward scorer and ordinal thresholds.

Each step minimizes the batch-mean loss plus ``lam * ||zeta||^2`` (added once
per step).  Thresholds are optimized either through the exponential
reparameterization or directly with a projection onto the eps-separated set.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import losses as L
from .data import PreferenceData, make_rng
from .optim import Optimizer, cosine_warmup_lr
from .scorer import RewardScorer, ScorerKind
from .thresholds import (Mode, ThresholdParams, Thresholds, backprop_thresholds, build_thresholds,
                         default_params, project_thresholds)


class NumericalError(RuntimeError):
    def __init__(self, step: int, index: int, detail: str):
        super().__init__(f"non-finite {detail} at step {step}, example index {index}")
        self.step = step
        self.index = index


@dataclass
class TrainConfig:
    loss: L.LossSpec = field(default_factory=L.LossSpec)
    mode: Mode = Mode.SYMMETRIC
    K: int = 3
    epochs: int = 5
    batch_size: int = 64
    optimizer: str = "adam"
    lr_phi: float | None = None
    lr_alpha: float = 1e-3
    sched_phi: str = "cosine"
    warmup_frac: float = 0.1
    lam: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    async_interval: int = 1
    threshold_opt: str = "reparam"
    proj_eps: float = 1e-3
    seed: int = 0
    init_alpha: Any = "default"
    scorer_kind: ScorerKind = ScorerKind.LINEAR
    hidden: int = 32
    freeze_scorer: bool = False
    log_every: int = 1
    transition_window: float = 0.05
    transition_tol: float = 0.05
    val_loss_percentile: float | None = None

    def __post_init__(self):
        if isinstance(self.loss, dict):
            self.loss = L.LossSpec(**self.loss)
        elif isinstance(self.loss, str):
            self.loss = L.LossSpec(self.loss)
        self.mode = Mode(self.mode)
        self.scorer_kind = ScorerKind(self.scorer_kind)
        if self.lr_phi is None:
            self.lr_phi = 1e-3 if self.optimizer == "adam" else 1e-2
        self.validate()

    def validate(self) -> None:
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr_phi <= 0 or self.lr_alpha <= 0:
            raise ValueError("learning rates must be positive")
        if not 0 <= self.warmup_frac < 1:
            raise ValueError("warmup_frac must lie in [0, 1)")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.async_interval < 1:
            raise ValueError("async_interval must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.sched_phi not in ("cosine", "constant"):
            raise ValueError(f"sched_phi must be 'cosine' or 'constant', got {self.sched_phi!r}")
        if self.threshold_opt not in ("reparam", "projected"):
            raise ValueError(f"threshold_opt must be 'reparam' or 'projected', got {self.threshold_opt!r}")
        if self.proj_eps <= 0:
            raise ValueError("proj_eps must be positive")
        self.loss.check_K(self.K)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss"] = self.loss.to_dict()
        d["mode"] = self.mode.value
        d["scorer_kind"] = self.scorer_kind.value
        if isinstance(self.init_alpha, np.ndarray):
            d["init_alpha"] = self.init_alpha.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


class TrainState:
    """Mutable trainer state; ``thresholds`` is None for BT-family losses."""

    def __init__(self, scorer: RewardScorer, cfg: TrainConfig):
        self.scorer = scorer
        self.cfg = cfg
        self.step = 0
        self.ordinal = cfg.loss.kind.ordinal
        self.alpha = None
        self.free_zeta = None
        if self.ordinal:
            if isinstance(cfg.init_alpha, str):
                if cfg.init_alpha != "default":
                    raise ValueError(f"init_alpha must be 'default' or a vector, got {cfg.init_alpha!r}")
                params = default_params(cfg.K, cfg.mode)
            else:
                params = ThresholdParams(cfg.mode, np.asarray(cfg.init_alpha, dtype=float))
            th = build_thresholds(params, cfg.K)
            if cfg.threshold_opt == "reparam":
                self.alpha = params.alpha.copy()
            else:
                self.free_zeta = self._free_from(project_thresholds(th.zeta, cfg.proj_eps, cfg.mode).zeta)
        self.opt_phi = Optimizer(cfg.optimizer, scorer.params.size, cfg.beta1, cfg.beta2, cfg.adam_eps)
        n_th = 0 if not self.ordinal else (self.alpha.size if self.alpha is not None else self.free_zeta.size)
        self.opt_th = Optimizer(cfg.optimizer, n_th, cfg.beta1, cfg.beta2, cfg.adam_eps)
        self._acc = np.zeros(n_th)
        self._acc_count = 0

    def _free_from(self, zeta: np.ndarray) -> np.ndarray:
        # symmetric projected mode keeps only the positive half
        return zeta[self.cfg.K:].copy() if self.cfg.mode is Mode.SYMMETRIC else zeta.copy()

    @property
    def thresholds(self) -> Thresholds | None:
        if not self.ordinal:
            return None
        if self.alpha is not None:
            return build_thresholds(ThresholdParams(self.cfg.mode, self.alpha), self.cfg.K)
        if self.cfg.mode is Mode.SYMMETRIC:
            zeta = np.concatenate([-self.free_zeta[::-1], self.free_zeta])
        else:
            zeta = self.free_zeta
        return Thresholds(self.cfg.K, self.cfg.mode, zeta)

    def threshold_grad(self, grad_zeta: np.ndarray) -> np.ndarray:
        """Map dL/dzeta to the gradient of whatever vector the optimizer owns."""
        if self.alpha is not None:
            return backprop_thresholds(ThresholdParams(self.cfg.mode, self.alpha), grad_zeta)
        if self.cfg.mode is Mode.SYMMETRIC:
            K = self.cfg.K
            return grad_zeta[K:] - grad_zeta[:K][::-1]
        return grad_zeta

    def apply_threshold_grad(self, grad: np.ndarray) -> None:
        cfg = self.cfg
        self._acc += grad
        self._acc_count += 1
        if self.step % cfg.async_interval:
            return
        g = self._acc / self._acc_count
        self._acc[:] = 0.0
        self._acc_count = 0
        delta = self.opt_th.delta(g, cfg.lr_alpha)
        if self.alpha is not None:
            self.alpha = self.alpha + delta
        else:
            self.projected_update(delta)

    def projected_update(self, delta: np.ndarray) -> None:
        """Take the raw step on zeta, then project onto the eps-separated set."""
        cfg = self.cfg
        raw = self.free_zeta + delta
        if cfg.mode is Mode.SYMMETRIC:
            full = np.concatenate([-raw[::-1], raw])
        else:
            full = raw
        self.free_zeta = self._free_from(project_thresholds(full, cfg.proj_eps, cfg.mode).zeta)


@dataclass
class Checkpoint:
    epoch: int
    step: int
    val_accuracy: float
    val_loss: float
    in_transition: bool
    scorer: RewardScorer
    thresholds: Thresholds | None


@dataclass
class TrainReport:
    loss_history: list = field(default_factory=list)
    trajectory_steps: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    epoch_objective: list = field(default_factory=list)
    n_used: int = 0
    n_skipped_ties: int = 0
    total_steps: int = 0
    checkpoints: list = field(default_factory=list)
    best: Checkpoint | None = None

    def trajectory_array(self) -> np.ndarray:
        return np.asarray(self.trajectory, dtype=float)

    def metadata(self) -> dict:
        return {
            "n_used": self.n_used,
            "n_skipped_ties": self.n_skipped_ties,
            "total_steps": self.total_steps,
            "epoch_objective": self.epoch_objective,
            "best_checkpoint": None if self.best is None else {
                "epoch": self.best.epoch, "step": self.best.step,
                "val_accuracy": self.best.val_accuracy, "val_loss": self.best.val_loss},
            "checkpoints": [{"epoch": c.epoch, "step": c.step, "val_accuracy": c.val_accuracy,
                             "val_loss": c.val_loss, "in_transition": c.in_transition}
                            for c in self.checkpoints],
        }


def usable(ds: PreferenceData, spec: L.LossSpec) -> np.ndarray:
    """Indices of examples the loss is defined on (BT-family losses drop ties)."""
    if L.skips_ties(spec.kind):
        return np.flatnonzero(ds.z != 0)
    return np.arange(len(ds))


def objective(scorer: RewardScorer, th: Thresholds | None, ds: PreferenceData, spec: L.LossSpec,
              lam: float = 0.0) -> float:
    """Mean per-example loss over usable examples plus the threshold penalty."""
    idx = usable(ds, spec)
    s = scorer.score_diff(ds.a[idx], ds.b[idx])
    value = float(np.mean(L.evaluate(spec, s, ds.z[idx], th).value)) if idx.size else 0.0
    if th is not None:
        value += L.reg_penalty(th, lam)[0]
    return value


def batch_loss(state: TrainState, a, b, z, th: Thresholds | None = None) -> float:
    """Value of the per-step objective only (batch-mean loss plus the penalty).

    ``th`` may be passed to skip rebuilding the current thresholds.
    """
    th = state.thresholds if th is None else th
    loss = float(np.mean(L.evaluate(state.cfg.loss, state.scorer.score_diff(a, b), z, th).value))
    return loss + (L.reg_penalty(th, state.cfg.lam)[0] if th is not None else 0.0)


def batch_gradients(state: TrainState, a, b, z):
    """Loss value, scorer gradient and zeta gradient for one batch (regularizer included)."""
    cfg = state.cfg
    th = state.thresholds
    s = state.scorer.score_diff(a, b)
    out = L.evaluate(cfg.loss, s, z, th)
    n = s.shape[0]
    loss = float(np.sum(out.value)) / n
    g_phi = state.scorer.backprop_score_diff(a, b, out.d_s / n)
    g_zeta = None
    if th is not None:
        reg, g_reg = L.reg_penalty(th, cfg.lam)
        loss += reg
        g_zeta = out.d_zeta.sum(axis=0) / n + g_reg
    return loss, g_phi, g_zeta, out


def _transition(report: TrainReport, total: int, window: float, tol: float) -> bool:
    if not report.trajectory:
        return False
    back = max(1, int(math.ceil(window * total)))
    steps = np.asarray(report.trajectory_steps)
    traj = report.trajectory_array()
    ref = np.searchsorted(steps, steps[-1] - back)
    seg = traj[ref:]
    return bool(np.max(np.abs(seg - seg[-1])) > tol)


def train(ds: PreferenceData, cfg: TrainConfig, scorer: RewardScorer | None = None,
          val: PreferenceData | None = None):
    """Run ``epochs * ceil(n_used / batch_size)`` optimization steps.

    ``scorer`` overrides the seeded initialization (e.g. to freeze a known
    scorer).  With ``val`` given, a checkpoint is evaluated at each epoch end
    and the best one by validation binary accuracy is reported, skipping
    checkpoints taken while thresholds were still moving.
    """
    if len(ds) == 0:
        raise ValueError("cannot train on an empty dataset")
    if ds.K != cfg.K:
        raise ValueError(f"dataset K={ds.K} does not match config K={cfg.K}")
    if scorer is None:
        scorer = RewardScorer.init(cfg.scorer_kind, ds.d, cfg.hidden, seed=cfg.seed)
    else:
        scorer = scorer.copy()
    if scorer.d != ds.d:
        raise ValueError(f"scorer d={scorer.d} does not match data d={ds.d}")
    state = TrainState(scorer, cfg)
    report = TrainReport()

    idx_all = usable(ds, cfg.loss)
    report.n_used = int(idx_all.size)
    report.n_skipped_ties = len(ds) - report.n_used
    if idx_all.size == 0:
        raise ValueError(f"no examples usable by {cfg.loss.kind.value}")
    per_epoch = math.ceil(idx_all.size / cfg.batch_size)
    total = cfg.epochs * per_epoch
    report.total_steps = total

    def record():
        th = state.thresholds
        if th is not None:
            report.trajectory_steps.append(state.step)
            report.trajectory.append(th.zeta.copy())

    record()
    for epoch in range(cfg.epochs):
        order = idx_all[make_rng(cfg.seed, 100, epoch).permutation(idx_all.size)]
        for start in range(0, order.size, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, g_phi, g_zeta, out = batch_gradients(state, ds.a[batch], ds.b[batch], ds.z[batch])
            bad = ~np.isfinite(out.value) | ~np.isfinite(out.d_s)
            if np.any(bad) or not np.isfinite(loss):
                where = int(batch[np.flatnonzero(bad)[0]]) if np.any(bad) else int(batch[0])
                raise NumericalError(state.step, where, "loss")
            if not cfg.freeze_scorer:
                lr = cfg.lr_phi if cfg.sched_phi == "constant" else cosine_warmup_lr(
                    state.step, total, cfg.warmup_frac, cfg.lr_phi)
                state.scorer.params = state.scorer.params + state.opt_phi.delta(g_phi, lr)
            if g_zeta is not None:
                state.apply_threshold_grad(state.threshold_grad(g_zeta))
            state.step += 1
            report.loss_history.append(loss)
            if state.step % cfg.log_every == 0 or state.step == total:
                record()
        report.epoch_objective.append(objective(state.scorer, state.thresholds, ds, cfg.loss,
                                                cfg.lam if state.ordinal else 0.0))
        if val is not None:
            _checkpoint(state, report, val, epoch, total)
    if report.checkpoints:
        report.best = _select(report.checkpoints, cfg.val_loss_percentile)
    return state, report


def _checkpoint(state: TrainState, report: TrainReport, val: PreferenceData, epoch: int, total: int):
    from .evaluation import binary_accuracy, UndefinedMetricError

    try:
        acc = binary_accuracy(state.scorer, val)
    except UndefinedMetricError:
        acc = float("nan")
    cfg = state.cfg
    report.checkpoints.append(Checkpoint(
        epoch=epoch, step=state.step, val_accuracy=acc,
        val_loss=objective(state.scorer, state.thresholds, val, cfg.loss, 0.0),
        in_transition=_transition(report, total, cfg.transition_window, cfg.transition_tol),
        scorer=state.scorer.copy(), thresholds=state.thresholds))


def _select(checkpoints: list, percentile: float | None) -> Checkpoint | None:
    pool = [c for c in checkpoints if not c.in_transition and np.isfinite(c.val_accuracy)]
    if percentile is not None and pool:
        cut = np.percentile([c.val_loss for c in pool], percentile)
        pool = [c for c in pool if c.val_loss <= cut]
    if not pool:
        return None
    return max(pool, key=lambda c: (c.val_accuracy, c.step))
