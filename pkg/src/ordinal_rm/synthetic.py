"""The standard synthetic task used by the demos and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .data import GenConfig, PreferenceData, generate, make_rng
from .scorer import RewardScorer, ScorerKind
from .thresholds import Mode, Thresholds

TRUE_ZETA = (-2.0, -1.2, -0.4, 0.4, 1.2, 2.0)


def true_thresholds(zeta=TRUE_ZETA, mode: Mode = Mode.SYMMETRIC) -> Thresholds:
    return Thresholds(len(zeta) // 2, mode, np.asarray(zeta, dtype=float))


def linear_truth(d: int = 16, diff_std: float = 2.0, seed: int = 0) -> RewardScorer:
    """Linear scorer with a random direction, scaled so ``std(s*) = diff_std`` for unit features."""
    w = make_rng(seed, 7).normal(size=d)
    w *= diff_std / (np.sqrt(2.0) * np.linalg.norm(w))
    return RewardScorer(ScorerKind.LINEAR, d, np.concatenate([w, [0.0]]))


def standard_task(n_train: int, n_test: int = 0, seed: int = 0, d: int = 16, zeta=TRUE_ZETA,
                  diff_std: float = 2.0, deterministic: bool = False, margin: float = 0.0):
    """Return ``(truth, thresholds, train, test)`` drawn from the ordered-logit model."""
    truth = linear_truth(d, diff_std, seed)
    th = true_thresholds(zeta)
    K = th.K
    train = generate(GenConfig(n_train, d, K, truth, th, seed=seed, deterministic=deterministic,
                               margin=margin))
    test = None
    if n_test:
        test = generate(GenConfig(n_test, d, K, truth, th, seed=seed + 10_000,
                                  deterministic=deterministic, margin=margin))
    return truth, th, train, test


def split(ds: PreferenceData, frac: float, seed: int = 0):
    perm = make_rng(seed, 50).permutation(len(ds))
    cut = int(round(frac * len(ds)))
    return ds.subset(np.sort(perm[:cut])), ds.subset(np.sort(perm[cut:]))
