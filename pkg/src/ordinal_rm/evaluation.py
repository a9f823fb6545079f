"""Binary and ordinal metrics, error margins, and post-hoc threshold fitting."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .data import PreferenceData
from .losses import ordinal_nll, sigmoid
from .optim import Optimizer
from .scorer import RewardScorer
from .thresholds import Mode, ThresholdParams, Thresholds, backprop_thresholds, build_thresholds, \
    params_from_zeta, predict_level

HIST_WIDTH = 0.5


class UndefinedMetricError(ValueError):
    pass


def _oriented_diffs(scorer: RewardScorer, ds: PreferenceData):
    """Score differences oriented so the preferred response comes first; ties dropped."""
    keep = ds.z != 0
    s = scorer.score_diff(ds.a[keep], ds.b[keep])
    return np.where(ds.z[keep] > 0, s, -s), int((~keep).sum())


def binary_accuracy(scorer: RewardScorer, ds: PreferenceData) -> float:
    """Fraction of non-tied pairs where the preferred response scores strictly higher."""
    s, _ = _oriented_diffs(scorer, ds)
    if s.size == 0:
        raise UndefinedMetricError("binary accuracy undefined: every pair is a tie (z=0)")
    return float(np.mean(s > 0))


@dataclass
class ErrorMargins:
    margins: list
    count: int
    mean: float | None
    max: float | None
    histogram: list
    n_correct: int
    n_zero_diff: int
    n_ties_excluded: int

    def to_dict(self, include_list: bool = True) -> dict:
        d = {"count": self.count, "mean": self.mean, "max": self.max, "histogram": self.histogram,
             "n_correct": self.n_correct, "n_zero_diff": self.n_zero_diff,
             "n_ties_excluded": self.n_ties_excluded}
        if include_list:
            d["margins"] = self.margins
        return d


def margin_histogram(margins) -> list:
    """Counts in bins ``[0, 0.5), [0.5, 1.0), ...``, as ``[{lo, hi, count}]``."""
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        return []
    nbins = int(np.floor(margins.max() / HIST_WIDTH)) + 1
    counts = np.bincount(np.floor(margins / HIST_WIDTH).astype(int), minlength=nbins)
    return [{"lo": i * HIST_WIDTH, "hi": (i + 1) * HIST_WIDTH, "count": int(c)} for i, c in enumerate(counts)]


def error_margins(scorer: RewardScorer, ds: PreferenceData) -> ErrorMargins:
    s, n_ties = _oriented_diffs(scorer, ds)
    wrong = s < 0
    margins = (-s[wrong]).tolist()
    return ErrorMargins(
        margins=margins,
        count=len(margins),
        mean=float(np.mean(margins)) if margins else None,
        max=float(np.max(margins)) if margins else None,
        histogram=margin_histogram(margins),
        n_correct=int((s > 0).sum()),
        n_zero_diff=int((s == 0).sum()),
        n_ties_excluded=n_ties,
    )


@dataclass
class MetricsReport:
    n_pairs: int
    binary_accuracy: float | None
    n_ties_excluded: int
    n_zero_diff: int
    degenerate: bool
    error_margins: ErrorMargins
    mae: float | None = None
    acc_within: dict | None = None
    confusion: np.ndarray | None = None
    levels: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "n_pairs": self.n_pairs,
            "binary_accuracy": self.binary_accuracy,
            "n_ties_excluded": self.n_ties_excluded,
            "n_zero_diff": self.n_zero_diff,
            "degenerate": self.degenerate,
            "error_margins": self.error_margins.to_dict(include_list=False),
        }
        if self.mae is not None:
            d["mae"] = self.mae
            d["acc_within"] = {str(k): v for k, v in self.acc_within.items()}
            d["levels"] = self.levels
            d["confusion"] = self.confusion.tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred"] + self.levels)
        for lvl, row in zip(self.levels, self.confusion):
            w.writerow([lvl] + [int(c) for c in row])
        return buf.getvalue()

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lo", "hi", "count"])
        for b in self.error_margins.histogram:
            w.writerow([b["lo"], b["hi"], b["count"]])
        return buf.getvalue()

    def summary(self) -> str:
        rows = [("pairs", self.n_pairs),
                ("binary accuracy", "n/a" if self.binary_accuracy is None else f"{self.binary_accuracy:.4f}"),
                ("ties excluded", self.n_ties_excluded),
                ("error count", self.error_margins.count),
                ("mean error margin", "n/a" if self.error_margins.mean is None else f"{self.error_margins.mean:.4f}")]
        if self.mae is not None:
            rows.append(("MAE", f"{self.mae:.4f}"))
            rows += [(f"Acc@{k}", f"{v:.4f}") for k, v in self.acc_within.items()]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def level_metrics(pred, labels, K: int) -> tuple[float, dict, np.ndarray]:
    """MAE, Acc@{0,1,2} and the (true x predicted) confusion matrix."""
    pred = np.asarray(pred, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if pred.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    n = labels.size
    confusion = np.zeros((2 * K + 1, 2 * K + 1), dtype=np.int64)
    np.add.at(confusion, (labels + K, pred + K), 1)
    if n == 0:
        return float("nan"), {k: float("nan") for k in (0, 1, 2)}, confusion
    err = np.abs(pred - labels)
    mae = float(err.sum() / n)
    acc = {k: float(np.count_nonzero(err <= k) / n) for k in (0, 1, 2)}
    return mae, acc, confusion


def ordinal_metrics(scorer: RewardScorer, th: Thresholds | None, ds: PreferenceData) -> MetricsReport:
    """Full report; the ordinal fields are filled only when thresholds are given."""
    s_or, n_ties = _oriented_diffs(scorer, ds)
    acc = float(np.mean(s_or > 0)) if s_or.size else None
    margins = error_margins(scorer, ds)
    report = MetricsReport(
        n_pairs=len(ds), binary_accuracy=acc, n_ties_excluded=n_ties,
        n_zero_diff=margins.n_zero_diff,
        degenerate=bool(s_or.size == 0 or margins.n_zero_diff == s_or.size),
        error_margins=margins, levels=list(range(-ds.K, ds.K + 1)))
    if th is not None:
        if th.K != ds.K:
            raise ValueError(f"thresholds K={th.K} do not match data K={ds.K}")
        pred = predict_level(scorer.score_diff(ds.a, ds.b), th)
        report.mae, report.acc_within, report.confusion = level_metrics(pred, ds.z, ds.K)
    return report


@dataclass
class CalibrationResult:
    thresholds: Thresholds
    history: list
    low_information: bool


def _marginal_init(diffs: np.ndarray, labels: np.ndarray, K: int) -> np.ndarray:
    """Thresholds whose implied level marginals match the observed label frequencies."""
    n = diffs.size
    cum = np.cumsum(np.bincount(labels + K, minlength=2 * K + 1))[:-1] / n
    cum = np.clip(cum, 0.5 / n, 1 - 0.5 / n)
    lo, hi = diffs.min() - 50.0, diffs.max() + 50.0
    zeta = np.array([brentq(lambda t: np.mean(sigmoid(t - diffs)) - c, lo, hi) for c in cum])
    for j in range(1, zeta.size):
        zeta[j] = max(zeta[j], zeta[j - 1] + 1e-3)
    return zeta


def posthoc_calibrate(diffs, labels, K: int, epochs: int = 100, lr: float = 0.01) -> CalibrationResult:
    """Fit asymmetric thresholds to frozen score differences by full-batch Adam on the mean NLL.

    Starts from the thresholds that reproduce the empirical label marginals.
    """
    diffs = np.asarray(diffs, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if diffs.shape != labels.shape or diffs.ndim != 1:
        raise ValueError("diffs and labels must be 1-d and of equal length")
    if diffs.size < 2 * K + 1:
        raise ValueError(f"need at least {2 * K + 1} examples to calibrate K={K}")
    if np.any(np.abs(labels) > K):
        raise ValueError(f"labels outside [-{K}, {K}]")
    alpha = params_from_zeta(_marginal_init(diffs, labels, K), Mode.ASYMMETRIC).alpha
    opt = Optimizer("adam", alpha.size)
    history = []
    for _ in range(epochs):
        params = ThresholdParams(Mode.ASYMMETRIC, alpha)
        out = ordinal_nll(diffs, build_thresholds(params, K), labels)
        history.append(float(out.value.mean()))
        alpha = alpha + opt.delta(backprop_thresholds(params, out.d_zeta.mean(axis=0)), lr)
    th = build_thresholds(ThresholdParams(Mode.ASYMMETRIC, alpha), K)
    history.append(float(ordinal_nll(diffs, th, labels).value.mean()))
    low_info = bool(np.ptp(diffs) == 0)
    return CalibrationResult(th, history, low_info)


def calibrate_scorer(scorer: RewardScorer, ds: PreferenceData, **kw) -> CalibrationResult:
    return posthoc_calibrate(scorer.score_diff(ds.a, ds.b), ds.z, ds.K, **kw)
