"""Synthetic ordinal preference data, label noise, and JSONL I/O.

A dataset is stored column-wise: ``a`` and ``b`` are ``(n, d)`` feature
arrays for the two responses and ``z[i]`` is the signed level meaning
"response a is preferred to b at level z".
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .scorer import RewardScorer
from .thresholds import Thresholds, predict_level

RNG_NAME = "numpy.Philox4x64-10(SeedSequence)"


class SchemaError(ValueError):
    """Malformed or inconsistent dataset content."""


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *stream])))


@dataclass
class PreferenceData:
    a: np.ndarray
    b: np.ndarray
    z: np.ndarray
    K: int
    z_clean: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.z = np.asarray(self.z, dtype=np.int64)
        if self.z_clean is not None:
            self.z_clean = np.asarray(self.z_clean, dtype=np.int64)
        if self.a.ndim != 2 or self.a.shape != self.b.shape or self.a.shape[0] != self.z.shape[0]:
            raise SchemaError(f"inconsistent shapes a={self.a.shape} b={self.b.shape} z={self.z.shape}")
        if np.any(np.abs(self.z) > self.K):
            raise SchemaError(f"labels outside [-{self.K}, {self.K}]")

    def __len__(self) -> int:
        return self.z.shape[0]

    @property
    def d(self) -> int:
        return self.a.shape[1]

    def subset(self, idx) -> "PreferenceData":
        return replace(self, a=self.a[idx], b=self.b[idx], z=self.z[idx],
                       z_clean=None if self.z_clean is None else self.z_clean[idx], meta=dict(self.meta))

    def with_labels(self, z, **meta) -> "PreferenceData":
        z_clean = self.z.copy() if self.z_clean is None else self.z_clean
        return replace(self, z=np.asarray(z, dtype=np.int64), z_clean=z_clean, meta={**self.meta, **meta})

    def equals(self, other: "PreferenceData") -> bool:
        same_clean = (self.z_clean is None and other.z_clean is None) or (
            self.z_clean is not None and other.z_clean is not None and np.array_equal(self.z_clean, other.z_clean))
        return (self.K == other.K and np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b)
                and np.array_equal(self.z, other.z) and same_clean)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.a, self.b, self.z, self.z_clean if self.z_clean is not None else np.empty(0)):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


@dataclass
class GenConfig:
    n: int
    d: int
    K: int
    true_scorer: RewardScorer
    true_thresholds: Thresholds
    feature_scale: float = 1.0
    seed: int = 0
    # Label = level of the noise-free score difference (a separable dataset).
    deterministic: bool = False
    # With deterministic labels, reject pairs whose s* lies within margin of a threshold.
    margin: float = 0.0

    def validate(self) -> None:
        if self.n <= 0:
            raise ValueError("n must be positive")
        if self.d <= 0:
            raise ValueError("d must be positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.feature_scale <= 0:
            raise ValueError("feature_scale must be positive")
        if self.true_thresholds.K != self.K:
            raise ValueError("true_thresholds K does not match K")
        if self.true_scorer.d != self.d:
            raise ValueError("true_scorer dimension does not match d")
        if self.margin < 0 or (self.margin > 0 and not self.deterministic):
            raise ValueError("margin must be >= 0 and needs deterministic labels")


def generate(cfg: GenConfig) -> PreferenceData:
    """Sample pairs and ordinal labels from the ordered-logit preference model.

    The label is the level containing ``s* + eps`` with ``eps`` standard
    logistic, which gives ``P(z <= level) = sigmoid(zeta_upper - s*)`` exactly.
    """
    cfg.validate()
    feats = make_rng(cfg.seed, 0)
    if cfg.margin > 0:
        a, b, s_true = _separated_pairs(cfg, feats)
    else:
        a = feats.normal(0.0, cfg.feature_scale, (cfg.n, cfg.d))
        b = feats.normal(0.0, cfg.feature_scale, (cfg.n, cfg.d))
        s_true = cfg.true_scorer.score_diff(a, b)
    latent = s_true if cfg.deterministic else s_true + make_rng(cfg.seed, 1).logistic(0.0, 1.0, cfg.n)
    z = np.asarray(predict_level(latent, cfg.true_thresholds), dtype=np.int64)
    meta = {
        "n": cfg.n, "d": cfg.d, "K": cfg.K, "seed": cfg.seed, "rng": RNG_NAME,
        "feature_scale": cfg.feature_scale, "deterministic": cfg.deterministic, "margin": cfg.margin,
        "noise": None,
        "true_thresholds": [float(t) for t in cfg.true_thresholds.zeta],
        "true_threshold_mode": cfg.true_thresholds.mode.value,
        "true_scorer_digest": cfg.true_scorer.digest(),
    }
    return PreferenceData(a, b, z, cfg.K, z_clean=z.copy(), meta=meta)


def _separated_pairs(cfg: GenConfig, rng: np.random.Generator):
    """Draw pairs in rounds, keeping those at least ``margin`` away from every threshold."""
    a_parts, b_parts, s_parts, have = [], [], [], 0
    for _ in range(1000):
        a = rng.normal(0.0, cfg.feature_scale, (cfg.n, cfg.d))
        b = rng.normal(0.0, cfg.feature_scale, (cfg.n, cfg.d))
        s = cfg.true_scorer.score_diff(a, b)
        keep = np.min(np.abs(s[:, None] - cfg.true_thresholds.zeta), axis=1) >= cfg.margin
        a_parts.append(a[keep])
        b_parts.append(b[keep])
        s_parts.append(s[keep])
        have += int(keep.sum())
        if have >= cfg.n:
            return (np.concatenate(a_parts)[: cfg.n], np.concatenate(b_parts)[: cfg.n],
                    np.concatenate(s_parts)[: cfg.n])
    raise ValueError(f"margin {cfg.margin} leaves too few admissible pairs")


def _check_rate(rate: float) -> None:
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"noise rate must lie in [0, 1], got {rate}")


def inject_shift_noise(ds: PreferenceData, rate: float, seed: int) -> PreferenceData:
    """Shift a Bernoulli(rate) subset of labels by +-1 with equal odds, clamped to [-K, K]."""
    _check_rate(rate)
    rng = make_rng(seed, 2)
    selected = rng.random(len(ds)) < rate
    step = np.where(rng.random(len(ds)) < 0.5, 1, -1)
    z = np.where(selected, np.clip(ds.z + step, -ds.K, ds.K), ds.z)
    info = {"kind": "shift", "rate": rate, "seed": seed, "selected": int(selected.sum()),
            "changed": int((z != ds.z).sum())}
    return ds.with_labels(z, noise=info)


def inject_random_noise(ds: PreferenceData, rate: float, seed: int) -> PreferenceData:
    """Replace a Bernoulli(rate) subset of labels by a uniform draw from {-K..K}."""
    _check_rate(rate)
    rng = make_rng(seed, 3)
    selected = rng.random(len(ds)) < rate
    draw = rng.integers(-ds.K, ds.K + 1, len(ds))
    z = np.where(selected, draw, ds.z)
    info = {"kind": "random", "rate": rate, "seed": seed, "selected": int(selected.sum()),
            "changed": int((z != ds.z).sum())}
    return ds.with_labels(z, noise=info)


def canonicalize(ds: PreferenceData):
    """Orient every pair so that ``z >= 0``; returns the new data and the swap mask."""
    swapped = ds.z < 0
    a = np.where(swapped[:, None], ds.b, ds.a)
    b = np.where(swapped[:, None], ds.a, ds.b)
    z_clean = None if ds.z_clean is None else np.where(swapped, -ds.z_clean, ds.z_clean)
    return replace(ds, a=a, b=b, z=np.abs(ds.z), z_clean=z_clean, meta=dict(ds.meta)), swapped


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_jsonl(ds: PreferenceData, path, meta: bool = True) -> None:
    """One JSON object per line; floats use shortest round-trip repr."""
    lines = []
    for i in range(len(ds)):
        rec = {"a": ds.a[i].tolist(), "b": ds.b[i].tolist(), "z": int(ds.z[i]),
               "z_clean": None if ds.z_clean is None else int(ds.z_clean[i])}
        lines.append(json.dumps(rec))
    path = Path(path)
    _atomic_write(path, "".join(line + "\n" for line in lines))
    if meta:
        _atomic_write(sidecar_path(path), json.dumps({**ds.meta, "K": ds.K, "n": len(ds)}, indent=2, sort_keys=True) + "\n")


def read_jsonl(path, K: int | None = None) -> PreferenceData:
    """Read a dataset; K comes from the argument, else the sidecar, else ``max |z|``."""
    path = Path(path)
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
        if K is None and "K" in meta:
            K = int(meta["K"])
    a, b, z, zc = [], [], [], []
    d = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                fa = [float(x) for x in rec["a"]]
                fb = [float(x) for x in rec["b"]]
                label = rec["z"]
                clean = rec.get("z_clean")
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: malformed record ({exc})") from exc
            if not isinstance(label, int) or (clean is not None and not isinstance(clean, int)):
                raise SchemaError(f"{path}:{lineno}: labels must be integers")
            if d is None:
                d = len(fa)
            if len(fa) != d or len(fb) != d:
                raise SchemaError(f"{path}:{lineno}: feature dimension differs from first record ({d})")
            if not all(math.isfinite(x) for x in fa + fb):
                raise SchemaError(f"{path}:{lineno}: non-finite feature value")
            if K is not None and (abs(label) > K or (clean is not None and abs(clean) > K)):
                raise SchemaError(f"{path}:{lineno}: level {label} outside [-{K}, {K}]")
            a.append(fa)
            b.append(fb)
            z.append(label)
            zc.append(clean)
    if K is None:
        K = max([abs(v) for v in z], default=1) or 1
    n = len(z)
    has_clean = n > 0 and all(v is not None for v in zc)
    shape = (n, d or 0)
    return PreferenceData(np.array(a, dtype=float).reshape(shape), np.array(b, dtype=float).reshape(shape),
                          np.array(z, dtype=np.int64), K,
                          z_clean=np.array(zc, dtype=np.int64) if has_clean else None, meta=meta)
