"""
Synthetic ordinal preferences
=============================

Pairs are drawn from an ordered-logit model around a known linear reward, so
every quantity learned later can be compared with the truth.  Two label-noise
models perturb the labels afterwards.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from ordinal_rm.data import canonicalize, inject_random_noise, inject_shift_noise, read_jsonl, write_jsonl
from ordinal_rm.losses import prob_level
from ordinal_rm.synthetic import standard_task

truth, th, ds, _ = standard_task(20_000, seed=0, d=16)
print(len(ds), "pairs, d =", ds.d, "K =", ds.K)
print("true thresholds", th.zeta)
print("rng:", ds.meta["rng"])

# %% Empirical level frequencies against the model's average level probabilities.
s_true = truth.score_diff(ds.a, ds.b)
emp = np.bincount(ds.z + ds.K, minlength=2 * ds.K + 1) / len(ds)
ana = [prob_level(s_true, th, np.full(len(ds), z)).mean() for z in range(-ds.K, ds.K + 1)]
for z, e, a in zip(range(-ds.K, ds.K + 1), emp, ana):
    print(f"z={z:+d}  empirical {e:.4f}  model {a:.4f}")

# %% Shift noise moves a label one step (clamped at the ends); random noise redraws it.
shift = inject_shift_noise(ds, 0.3, seed=1)
rand = inject_random_noise(ds, 0.3, seed=1)
for name, noisy in (("shift", shift), ("random", rand)):
    info = noisy.meta["noise"]
    dist = np.abs(noisy.z - noisy.z_clean)
    print(f"{name:6s} selected {info['selected']}  changed {info['changed']}  "
          f"mean |dz| among changed {dist[dist > 0].mean():.2f}")

# %% Canonical orientation puts the preferred response first.
canon, swapped = canonicalize(ds)
print("swapped", int(swapped.sum()), "pairs; min z after:", canon.z.min())

# %% JSONL round trip with a metadata sidecar.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "train.jsonl"
    write_jsonl(shift, path)
    back = read_jsonl(path)
    print("round trip equal:", back.equals(shift), "| sidecar noise:", back.meta["noise"]["kind"])
