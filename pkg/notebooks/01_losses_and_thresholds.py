"""
Ordinal losses on a reward difference
=====================================

A reward model scores two responses; the difference s = r(a) - r(b) is cut
into 2K+1 preference levels by 2K ordered thresholds.  This walk-through
builds thresholds, looks at the level probabilities and compares the three
ordinal losses with the Bradley-Terry style baselines.
"""

# %%
import numpy as np

from ordinal_rm import losses as L
from ordinal_rm.gradcheck import format_table, run_gradcheck
from ordinal_rm.thresholds import ThresholdParams, build_thresholds, predict_level, project_thresholds

np.set_printoptions(precision=4, suppress=True)

# %% Thresholds come from unconstrained parameters, so ordering is automatic.
sym = build_thresholds(ThresholdParams("symmetric", np.log([0.5, 0.5, 1.0])))
asym = build_thresholds(ThresholdParams("asymmetric", [-2.0, 0.0, -0.5, 0.0, -0.5, 0.0]))
print("symmetric  ", sym.zeta)
print("asymmetric ", asym.zeta)

# %% Level probabilities across a range of score differences (rows sum to one).
K = sym.K
levels = np.arange(-K, K + 1)
for s in (-3.0, -0.7, 0.0, 0.7, 3.0):
    p = L.prob_level(np.full(levels.size, s), sym, levels)
    print(f"s={s:+.1f}  p={p}  sum={p.sum():.15f}  predicted level {predict_level(s, sym):+d}")

# %% Loss of each kind for a single pair labelled z=+2 as s sweeps across the scale.
spec = {k: L.LossSpec(k) for k in L.LossKind}
grid = np.linspace(-4, 4, 9)
print("s      " + "  ".join(f"{k.value:>11s}" for k in L.LossKind))
for s in grid:
    row = [float(L.evaluate(spec[k], s, 2, sym).value) for k in L.LossKind]
    print(f"{s:+.1f}  " + "  ".join(f"{v:11.4f}" for v in row))

# %% Scaling a correctly ordered example together with its thresholds keeps lowering
# the loss, which is why unregularized thresholds drift outward during training.
s, z = 1.5, 1
for c in (1, 2, 4, 8, 16):
    th_c = build_thresholds(ThresholdParams("symmetric", np.log([0.5, 0.5, 1.0]) + np.log(c)))
    print(f"c={c:2d}  nll={float(L.ordinal_nll(c * s, th_c, z).value):.3e}  "
          f"at={float(L.ordinal_at(c * s, th_c, z).value):.3e}")

# %% Projection is the alternative to the exponential parameterization.
raw = np.array([0.3, -0.2, 0.1, 0.9])
print("raw", raw, "->", project_thresholds(raw, 0.1).zeta)

# %% Every analytic gradient is checked against central differences.
print(format_table(run_gradcheck(seed=0, n_draws=20, objective_draws=5)))
