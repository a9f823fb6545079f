"""Central finite-difference checks for every analytic gradient in the package.

Relative error is ``||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||, 1e-8)``
per draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import losses as L
from .data import make_rng
from .scorer import RewardScorer, ScorerKind
from .thresholds import Mode, ThresholdParams, Thresholds, backprop_thresholds, build_thresholds
from .train import TrainConfig, TrainState, batch_gradients, batch_loss

H = 1e-6
TOL = 1e-5
K_CHOICES = (1, 2, 3, 5)


@dataclass
class CheckResult:
    name: str
    n_draws: int
    max_rel_err: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def rel_err(analytic, numeric) -> float:
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-8)
    return float(np.linalg.norm(a - n) / scale)


def numeric_grad(f: Callable[[np.ndarray], float], x, h: float = H) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        g.flat[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def _random_thresholds(rng, K: int, mode: Mode) -> Thresholds:
    n = K if mode is Mode.SYMMETRIC else 2 * K
    alpha = rng.normal(-0.3, 0.5, n)
    if mode is Mode.ASYMMETRIC:
        alpha[0] = rng.normal(-1.0, 0.5)
    return build_thresholds(ThresholdParams(mode, alpha), K)


def _loss_fn(kind: L.LossKind, overrides: dict | None):
    if overrides and kind in overrides:
        return overrides[kind]
    spec = L.LossSpec(kind, margin_table=(1, 2, 3, 4, 5), weight_table=(1, 2, 3, 4, 5),
                      prob_table=(0.6, 0.7, 0.8, 0.9, 0.95))
    return lambda s, th, z: L.evaluate(spec, s, z, th)


def check_loss(kind: L.LossKind, rng, n_draws: int, tol: float, overrides=None) -> CheckResult:
    fn = _loss_fn(kind, overrides)
    worst, failures = 0.0, []
    for i in range(n_draws):
        K = int(rng.choice(K_CHOICES))
        th = _random_thresholds(rng, K, Mode.SYMMETRIC if i % 2 else Mode.ASYMMETRIC)
        s = float(rng.normal(0.0, 2.0))
        z = int(rng.integers(-K, K + 1))
        if kind in (L.LossKind.SIMPLE_BT, L.LossKind.MARGIN_BT, L.LossKind.SCALED_BT) and z == 0:
            z = 1
        out = fn(np.float64(s), th, z)
        num_s = (float(fn(np.float64(s + H), th, z).value) - float(fn(np.float64(s - H), th, z).value)) / (2 * H)
        analytic, numeric = [float(out.d_s)], [num_s]
        if kind.ordinal:
            def f(zeta):
                return float(fn(np.float64(s), Thresholds(K, Mode.ASYMMETRIC, zeta), z).value)
            analytic += list(np.ravel(out.d_zeta))
            numeric += list(numeric_grad(f, th.zeta))
        err = rel_err(analytic, numeric)
        worst = max(worst, err)
        if not err <= tol:
            failures.append(i)
    return CheckResult(f"loss:{kind.value}", n_draws, worst, failures)


def check_scorer(kind: ScorerKind, rng, n_draws: int, tol: float) -> CheckResult:
    worst, failures = 0.0, []
    for i in range(n_draws):
        d = int(rng.integers(1, 6))
        h = int(rng.integers(1, 6))
        sc = RewardScorer(kind, d, rng.normal(0, 0.7, 1 + d if kind is ScorerKind.LINEAR else d * h + 2 * h + 1), h)
        a, b = rng.normal(size=(3, d)), rng.normal(size=(3, d))
        u = rng.normal(size=3)
        analytic = sc.backprop_score_diff(a, b, u)
        numeric = numeric_grad(lambda p: float(u @ sc.copy(p).score_diff(a, b)), sc.params)
        err = rel_err(analytic, numeric)
        worst = max(worst, err)
        if not err <= tol:
            failures.append(i)
    return CheckResult(f"scorer:{kind.value}", n_draws, worst, failures)


def check_thresholds(mode: Mode, rng, n_draws: int, tol: float) -> CheckResult:
    worst, failures = 0.0, []
    for i in range(n_draws):
        K = int(rng.choice(K_CHOICES))
        n = K if mode is Mode.SYMMETRIC else 2 * K
        alpha = rng.normal(0.0, 0.5, n)
        w = rng.normal(size=2 * K)
        c = rng.uniform(0.1, 1.0)

        def f(al):
            zeta = build_thresholds(ThresholdParams(mode, al), K).zeta
            return float(w @ np.sin(zeta) + c * zeta @ zeta)

        zeta = build_thresholds(ThresholdParams(mode, alpha), K).zeta
        analytic = backprop_thresholds(ThresholdParams(mode, alpha), w * np.cos(zeta) + 2 * c * zeta)
        err = rel_err(analytic, numeric_grad(f, alpha))
        worst = max(worst, err)
        if not err <= tol:
            failures.append(i)
    return CheckResult(f"thresholds:{mode.value}", n_draws, worst, failures)


def check_training_objective(kind: L.LossKind, scorer_kind: ScorerKind, mode: Mode, rng,
                             n_draws: int, tol: float) -> CheckResult:
    """Gradient of one regularized batch objective w.r.t. scorer params and alpha."""
    worst, failures = 0.0, []
    for i in range(n_draws):
        K = int(rng.choice((1, 2, 3)))
        d = 3
        cfg = TrainConfig(loss=L.LossSpec(kind), mode=mode, K=K, lam=float(rng.uniform(0, 1)),
                          scorer_kind=scorer_kind, hidden=3)
        sc = RewardScorer.init(scorer_kind, d, 3, seed=int(rng.integers(1 << 30)))
        state = TrainState(sc, cfg)
        if state.alpha is not None:
            state.alpha = state.alpha + rng.normal(0, 0.3, state.alpha.size)
        a, b = rng.normal(size=(4, d)), rng.normal(size=(4, d))
        z = rng.integers(-K, K + 1, 4)
        if L.skips_ties(kind):
            z = np.where(z == 0, 1, z)
        _, g_phi, g_zeta, _ = batch_gradients(state, a, b, z)
        analytic = [g_phi] if g_zeta is None else [g_phi, state.threshold_grad(g_zeta)]
        base_phi = sc.params.copy()
        base_alpha = None if state.alpha is None else state.alpha.copy()

        th = state.thresholds

        def f_phi(p):
            state.scorer = sc.copy(p)
            return batch_loss(state, a, b, z, th)

        numeric = [numeric_grad(f_phi, base_phi)]
        state.scorer = sc.copy(base_phi)
        if base_alpha is not None:
            def f_alpha(al):
                state.alpha = al
                return batch_loss(state, a, b, z)

            numeric.append(numeric_grad(f_alpha, base_alpha))
            state.alpha = base_alpha
        err = rel_err(np.concatenate(analytic), np.concatenate(numeric))
        worst = max(worst, err)
        if not err <= tol:
            failures.append(i)
    return CheckResult(f"objective:{kind.value}/{scorer_kind.value}/{mode.value}", n_draws, worst, failures)


def run_gradcheck(seed: int = 0, n_draws: int = 100, tol: float = TOL, loss_overrides=None,
                  objective_draws: int = 25) -> list[CheckResult]:
    """Run every suite; ``loss_overrides`` maps LossKind to a replacement ``fn(s, th, z)``."""
    results = []
    for j, kind in enumerate(L.LossKind):
        results.append(check_loss(kind, make_rng(seed, 10, j), n_draws, tol, loss_overrides))
    for j, kind in enumerate(ScorerKind):
        results.append(check_scorer(kind, make_rng(seed, 20, j), n_draws, tol))
    for j, mode in enumerate(Mode):
        results.append(check_thresholds(mode, make_rng(seed, 30, j), n_draws, tol))
    if objective_draws:
        j = 0
        for kind in L.LossKind:
            for sk in ScorerKind:
                for mode in (Mode if kind.ordinal else (Mode.SYMMETRIC,)):
                    results.append(check_training_objective(kind, sk, mode, make_rng(seed, 40, j),
                                                            objective_draws, tol))
                    j += 1
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  draws  max_rel_err  status"]
    for r in results:
        status = "PASS" if r.passed else f"FAIL draws={r.failures[:10]}"
        lines.append(f"{r.name:<{width}}  {r.n_draws:5d}  {r.max_rel_err:11.3e}  {status}")
    return "\n".join(lines)
