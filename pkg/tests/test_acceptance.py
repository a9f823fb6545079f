"""Acceptance criteria, one test per criterion.

Each test records a single ``AC<n> PASS|FAIL`` line with the measured
quantities; the lines are echoed in the pytest terminal summary.  Run alone
with ``pytest tests/test_acceptance.py -v``.
"""

import json
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from ordinal_rm import losses as L
from ordinal_rm.cli import main as cli
from ordinal_rm.data import inject_random_noise, inject_shift_noise
from ordinal_rm.evaluation import calibrate_scorer, error_margins, ordinal_metrics
from ordinal_rm.gradcheck import format_table, run_gradcheck
from ordinal_rm.synthetic import TRUE_ZETA, standard_task
from ordinal_rm.thresholds import Mode, ThresholdParams, Thresholds, build_thresholds, project_thresholds, \
    project_zeta
from ordinal_rm.train import TrainConfig, train

import oracles

RESULTS = []


def record(n: int, ok: bool, detail: str) -> None:
    line = f"AC{n:<2d} {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)


# 1. gradient suite

def test_ac01_gradients():
    t0 = time.perf_counter()
    results = run_gradcheck(seed=0, n_draws=100, objective_draws=100)
    dt = time.perf_counter() - t0
    worst = max(r.max_rel_err for r in results)
    ok = all(r.passed for r in results) and min(r.n_draws for r in results) >= 100 and dt < 10
    record(1, ok, f"{len(results)} checks x >=100 draws, max rel err {worst:.2e} (tol 1e-5), {dt:.1f}s (<10s)")
    assert ok, format_table(results)


# 2. normalization

def test_ac02_normalization():
    rng = np.random.default_rng(20)
    worst = 0.0
    for _ in range(10_000):
        K = int(rng.choice([1, 2, 3, 5]))
        mode = Mode.SYMMETRIC if rng.random() < 0.5 else Mode.ASYMMETRIC
        n = K if mode is Mode.SYMMETRIC else 2 * K
        th = build_thresholds(ThresholdParams(mode, rng.normal(0, 1, n)), K)
        s = float(rng.normal(0, 5))
        total = float(np.sum(L.prob_level(np.full(2 * K + 1, s), th, np.arange(-K, K + 1))))
        worst = max(worst, abs(total - 1.0))
    ok = worst <= 1e-12
    record(2, ok, f"max |sum_z p - 1| = {worst:.1e} over 10^4 draws (tol 1e-12)")
    assert ok


# 3. scaling behaviour

SEP_TH = np.array([-2.0, -1.0, 1.0, 2.0])
# score differences well inside their target intervals (margin >= 0.5 to every bound)
SEP_S = np.array([-3.0, -2.5, -1.5, -0.5, 0.0, 0.5, 1.5, 1.5, 2.5, 3.5])
SEP_Z = np.array([-2, -2, -1, 0, 0, 0, 1, 1, 2, 2])


def _total(fn, s, z, c):
    return float(np.sum(fn(c * s, Thresholds(2, Mode.ASYMMETRIC, c * SEP_TH), z).value))


def test_ac03_scaling():
    # fixture check against the high-precision oracle
    for s, z in zip(SEP_S, SEP_Z):
        assert float(L.ordinal_nll(s, Thresholds(2, "asymmetric", SEP_TH), z).value) == pytest.approx(
            oracles.nll(s, SEP_TH, z), rel=1e-12)
    parts, ok = [], True
    for name, fn in (("nll", L.ordinal_nll), ("at", L.ordinal_at)):
        vals = [_total(fn, SEP_S, SEP_Z, c) for c in (1, 2, 4, 8)]
        dec = all(a > b for a, b in zip(vals, vals[1:]))
        at64 = _total(fn, SEP_S, SEP_Z, 64)
        bad_s = SEP_S.copy()
        bad_s[4] = 3.0  # z=0 example pushed into the top interval
        grow = [_total(fn, bad_s, SEP_Z, c) for c in (4, 8, 16, 32, 64)]
        inc = all(a < b for a, b in zip(grow, grow[1:]))
        ok &= dec and at64 < 1e-6 and inc
        parts.append(f"{name}: decreasing={dec} L(64)={at64:.1e} misclassified increasing={inc}")
    record(3, ok, "; ".join(parts))
    assert ok


# 4. divergence without regularization, convergence with it

def _ac4_run(lam):
    _, _, ds, _ = standard_task(4096, seed=0, deterministic=True, margin=0.1)
    cfg = TrainConfig(loss="ordinal_nll", mode="symmetric", K=3, epochs=120, batch_size=64, lr_phi=3e-2,
                      lr_alpha=1e-3, sched_phi="constant", lam=lam, seed=0, log_every=8)
    _, rep = train(ds, cfg)
    return np.asarray(rep.trajectory_steps), rep.trajectory_array(), rep.total_steps


def test_ac04_threshold_dynamics():
    t0 = time.perf_counter()
    steps, traj, total = _ac4_run(0.0)
    i20 = int(np.searchsorted(steps, round(0.2 * total)))
    norm = np.max(np.abs(traj), axis=1)
    ratio = norm[-1] / norm[i20]
    steps1, traj1, total1 = _ac4_run(1.0)
    tail = traj1[np.searchsorted(steps1, total1 - round(0.1 * total1)):]
    move = float(np.max(np.abs(tail - tail[-1])))
    dt = time.perf_counter() - t0
    ok = ratio >= 5 and move <= 0.01 and dt < 60
    record(4, ok, f"lam=0: max|zeta| end/20% = {ratio:.2f} (>=5); lam=1: last-10% sup move {move:.1e} "
                  f"(<=0.01); {dt:.0f}s for both runs at n=4096")
    assert ok


# 5 and 6. threshold recovery with the scorer frozen at the truth

@pytest.fixture(scope="module")
def mle_data():
    truth, _, ds, _ = standard_task(50_000, seed=0)
    return truth, ds


def _fit_thresholds(truth, ds, mode):
    cfg = TrainConfig(loss="ordinal_nll", mode=mode, K=3, epochs=10, batch_size=1024, lr_alpha=1e-2,
                      lam=1e-4, freeze_scorer=True, seed=0)
    st, _ = train(ds, cfg, scorer=truth)
    return st.thresholds.zeta


def test_ac05_mle_recovery(mle_data):
    t0 = time.perf_counter()
    zeta = _fit_thresholds(*mle_data, "symmetric")
    err = float(np.max(np.abs(zeta - np.array(TRUE_ZETA))))
    dt = time.perf_counter() - t0
    ok = err <= 0.05 and dt < 300
    record(5, ok, f"max |zeta - truth| = {err:.4f} (<=0.05), zeta={np.round(zeta, 3).tolist()}, {dt:.1f}s")
    assert ok


def test_ac06_symmetry_recovery(mle_data):
    zeta = _fit_thresholds(*mle_data, "asymmetric")
    gap = float(np.max(np.abs(zeta + zeta[::-1])))
    ok = gap <= 0.1
    record(6, ok, f"asymmetric fit: max_k |zeta_-k + zeta_k| = {gap:.4f} (<=0.1)")
    assert ok


# 7 and 8. joint ordinal training against BT + post-hoc thresholds

JOINT = dict(K=3, epochs=10, batch_size=64, lr_phi=1e-2, lr_alpha=1e-2, lam=1e-3)
JOINT_D = 128


@pytest.fixture(scope="module")
def joint_runs():
    runs = []
    for seed in (0, 1, 2):
        _, _, tr, te = standard_task(20_000, 2_000, seed=seed, d=JOINT_D)
        nll, _ = train(tr, TrainConfig(loss="ordinal_nll", mode="symmetric", seed=seed, **JOINT))
        bt, _ = train(tr, TrainConfig(loss="simple_bt", seed=seed, **JOINT))
        cal = calibrate_scorer(bt.scorer, tr).thresholds
        runs.append(dict(seed=seed, test=te, nll=nll, bt=bt, cal=cal))
    return runs


def test_ac07_joint_beats_posthoc(joint_runs):
    rows = []
    for r in joint_runs:
        m_nll = ordinal_metrics(r["nll"].scorer, r["nll"].thresholds, r["test"]).mae
        m_bt = ordinal_metrics(r["bt"].scorer, r["cal"], r["test"]).mae
        rows.append((r["seed"], m_nll, m_bt))
    ok = all(a < b for _, a, b in rows)
    record(7, ok, "test MAE nll vs bt+posthoc: " + ", ".join(f"s{s} {a:.4f}<{b:.4f}" for s, a, b in rows))
    assert ok


def test_ac08_error_margins(joint_runs):
    rows = []
    for r in joint_runs:
        a = error_margins(r["nll"].scorer, r["test"]).mean
        b = error_margins(r["bt"].scorer, r["test"]).mean
        rows.append((r["seed"], a, b))
    ok = all(a <= b for _, a, b in rows)
    record(8, ok, "mean error margin nll vs bt: " + ", ".join(f"s{s} {a:.3f}<={b:.3f}" for s, a, b in rows))
    assert ok


# 9. label noise

def test_ac09_noise_robustness():
    t0 = time.perf_counter()
    rows, ok = [], True
    for seed in (0, 1, 2):
        _, _, tr, te = standard_task(20_000, 2_000, seed=seed)
        cfg = TrainConfig(loss="ordinal_nll", mode="symmetric", seed=seed, **JOINT)

        def fit(ds):
            st, _ = train(ds, cfg)
            return ordinal_metrics(st.scorer, st.thresholds, te)

        clean = fit(tr)
        shift = fit(inject_shift_noise(tr, 1.0, seed))
        rand = fit(inject_random_noise(tr, 1.0, seed))
        rand25 = fit(inject_random_noise(tr, 0.25, seed))
        gap = shift.acc_within[1] - rand.acc_within[1]
        drift = abs(rand25.binary_accuracy - clean.binary_accuracy)
        ok &= gap >= 0.1 and drift <= 0.05
        rows.append(f"s{seed} Acc@1 shift-random={gap:.3f} (>=0.1) |dAcc| 25% random={drift:.4f} (<=0.05)")
    dt = time.perf_counter() - t0
    ok &= dt < 600
    record(9, ok, "; ".join(rows) + f"; {dt:.0f}s")
    assert ok


# 10. projection

def test_ac10_projection():
    rng = np.random.default_rng(10)
    worst, idem = 0.0, True
    for i in range(100):
        n = 2 + i % 5
        raw = rng.normal(0, 1.5, n)
        eps = float(rng.uniform(0.01, 0.6))
        out = project_thresholds(raw, eps).zeta if n % 2 == 0 else project_zeta(raw, eps)
        worst = max(worst, float(np.max(np.abs(out - oracles.project_active_sets(raw, eps)))))
        again = project_thresholds(out, eps).zeta if n % 2 == 0 else project_zeta(out, eps)
        idem &= bool(np.array_equal(again, out))
    ok = worst <= 1e-6 and idem
    record(10, ok, f"max deviation from exhaustive active-set oracle {worst:.1e} (<=1e-6), "
                   f"idempotent exactly: {idem}")
    assert ok


# 11. CLI determinism

def _snapshot(root: Path) -> dict:
    out = {}
    for p in sorted(root.rglob("*")):
        if not p.is_file():
            continue
        rel = str(p.relative_to(root))
        if p.name.endswith("manifest.json"):
            body = json.loads(p.read_text())
            body.pop("timing")
            out[rel] = json.dumps(body, sort_keys=True)
        else:
            out[rel] = p.read_bytes()
    return out


def test_ac11_determinism(tmp_path):
    cfg = tmp_path / "cfg"
    cfg.mkdir()
    (cfg / "gen.json").write_text(json.dumps({"n": 512, "d": 8, "K": 3, "seed": 11}))
    (cfg / "train.json").write_text(json.dumps({"K": 3, "epochs": 3, "batch_size": 32, "lr_phi": 0.01, "seed": 5}))
    work = tmp_path / "work"

    def pipeline():
        codes = [
            cli(["gen", str(cfg / "gen.json"), str(work / "data.jsonl")]),
            cli(["train", str(cfg / "train.json"), str(work / "data.jsonl"), str(work / "run")]),
            cli(["eval", str(work / "run" / "model.json"), str(work / "data.jsonl"), "--thresholds",
                 str(work / "run" / "thresholds.json"), "--ordinal", "--out", str(work / "eval.json")]),
        ]
        assert codes == [0, 0, 0]
        snap = _snapshot(work)
        shutil.rmtree(work)
        return snap

    first, second = pipeline(), pipeline()
    differing = sorted(k for k in first if first[k] != second.get(k)) + sorted(set(second) - set(first))
    ok = not differing and len(first) >= 10
    record(11, ok, f"{len(first)} artifacts from gen/train/eval byte-identical across reruns"
                   + (f"; differing: {differing}" if differing else ""))
    assert ok
