"""``ordinal-rm`` command-line front end.

All numeric settings live in JSON config files; flags carry only paths,
seeds and a few overrides.  Exit codes: 0 success, 2 usage, 3 schema/data,
4 numeric failure.  Every artifact is written to a temp file and renamed, and
each run writes a manifest whose digest is embedded in the JSON artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import GenConfig, PreferenceData, SchemaError, _atomic_write, generate, inject_random_noise, \
    inject_shift_noise, read_jsonl, sidecar_path, write_jsonl
from .evaluation import calibrate_scorer, ordinal_metrics
from .gradcheck import format_table, run_gradcheck
from .losses import LossKind
from .scorer import RewardScorer
from .synthetic import TRUE_ZETA, linear_truth
from .thresholds import Mode, Thresholds, build_thresholds, default_params
from .train import NumericalError, TrainConfig, train

EXIT_OK, EXIT_USAGE, EXIT_SCHEMA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc


class Manifest:
    """Run record.  The digest covers what determines the outputs, not paths or timing."""

    def __init__(self, command: str, argv: list, config: dict, datasets: dict, seeds: dict):
        self.started = time.perf_counter()
        self.core = {"command": command, "config_digest": _digest(config), "dataset_digests": datasets,
                     "seeds": seeds, "version": __version__}
        self.argv = list(argv)
        self.started_utc = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.outputs = {}

    @property
    def digest(self) -> str:
        return _digest(self.core)

    def write(self, path: Path, name: str, text: str) -> None:
        _atomic_write(path, text)
        self.outputs[name] = hashlib.sha256(text.encode()).hexdigest()

    def finish(self, path: Path) -> None:
        body = {**self.core, "manifest_digest": self.digest, "command_echo": self.argv,
                "outputs": dict(sorted(self.outputs.items())),
                "timing": {"started_utc": self.started_utc,
                           "elapsed_s": round(time.perf_counter() - self.started, 3)}}
        _atomic_write(path, _dumps(body))


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


# gen

GEN_KEYS = {"n", "d", "K", "seed", "feature_scale", "deterministic", "margin", "true_thresholds", "true_scorer"}


def gen_config_from_dict(cfg: dict) -> GenConfig:
    """Build a GenConfig; the truth defaults to a random linear scorer and evenly spread thresholds."""
    unknown = set(cfg) - GEN_KEYS
    if unknown:
        raise ValueError(f"unknown gen config keys: {sorted(unknown)}")
    for key in ("n", "d", "K"):
        if key not in cfg:
            raise ValueError(f"gen config needs '{key}'")
    n, d, K, seed = int(cfg["n"]), int(cfg["d"]), int(cfg["K"]), int(cfg.get("seed", 0))
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    if d <= 0 or K < 1:
        raise ValueError("d must be positive and K at least 1")
    th = cfg.get("true_thresholds")
    if th is None:
        th = Thresholds(K, Mode.SYMMETRIC, TRUE_ZETA) if K == 3 else build_thresholds(default_params(K, "symmetric"))
    elif isinstance(th, dict):
        th = Thresholds.from_dict(th)
    else:
        zeta = np.asarray(th, dtype=float)
        mode = Mode.SYMMETRIC if np.allclose(zeta, -zeta[::-1]) else Mode.ASYMMETRIC
        th = Thresholds(zeta.size // 2, mode, zeta)
    sc = cfg.get("true_scorer")
    if sc is None or "params" not in sc:
        sc = sc or {}
        if sc.get("kind", "linear") != "linear":
            raise ValueError("a non-linear true_scorer needs explicit params")
        sc = linear_truth(d, float(sc.get("diff_std", 2.0)), int(sc.get("seed", seed)))
    else:
        sc = RewardScorer.from_dict(sc)
    return GenConfig(n, d, K, sc, th, feature_scale=float(cfg.get("feature_scale", 1.0)), seed=seed,
                     deterministic=bool(cfg.get("deterministic", False)), margin=float(cfg.get("margin", 0.0)))


def _write_dataset(ds: PreferenceData, out: Path, man: Manifest) -> None:
    ds.meta["manifest_digest"] = man.digest
    write_jsonl(ds, out)
    for p in (out, sidecar_path(out)):
        man.outputs[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    man.finish(_manifest_path(out))


def cmd_gen(args) -> int:
    raw = _load_json(args.config)
    try:
        cfg = gen_config_from_dict(raw)
        cfg.validate()
    except (ValueError, KeyError, TypeError) as exc:
        raise SchemaError(f"bad gen config: {exc}") from exc
    ds = generate(cfg)
    man = Manifest("gen", args.argv, raw, {}, {"seed": cfg.seed})
    out = Path(args.out)
    _write_dataset(ds, out, man)
    print(f"wrote {len(ds)} examples to {out}")
    return EXIT_OK


# noise

def cmd_noise(args) -> int:
    if not 0.0 <= args.rate <= 1.0:
        raise UsageError(f"--rate must lie in [0, 1], got {args.rate}")
    ds = read_jsonl(args.data)
    fn = inject_shift_noise if args.kind == "shift" else inject_random_noise
    noisy = fn(ds, args.rate, args.seed)
    man = Manifest("noise", args.argv, {"kind": args.kind, "rate": args.rate}, {"input": ds.digest()},
                   {"seed": args.seed})
    _write_dataset(noisy, Path(args.out), man)
    info = noisy.meta["noise"]
    print(f"{args.kind} noise rate={args.rate}: selected {info['selected']}, changed {info['changed']} "
          f"of {len(ds)}")
    return EXIT_OK


# train

def _train_config(path, loss_override: str | None, seed: int | None) -> tuple[dict, TrainConfig]:
    raw = _load_json(path)
    if loss_override:
        loss = raw.get("loss", {})
        loss = dict(loss) if isinstance(loss, dict) else {}
        loss["kind"] = loss_override
        raw["loss"] = loss
    if seed is not None:
        raw["seed"] = seed
    try:
        return raw, TrainConfig.from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"bad train config: {exc}") from exc


def _trajectory_csv(report, K: int) -> str:
    cols = ["step"] + [f"zeta_{k}" for k in list(range(-K, 0)) + list(range(1, K + 1))]
    lines = [",".join(cols)]
    for step, zeta in zip(report.trajectory_steps, report.trajectory):
        lines.append(",".join([str(step)] + [repr(float(v)) for v in zeta]))
    return "\n".join(lines) + "\n"


def _loss_csv(report) -> str:
    return "step,loss\n" + "".join(f"{i + 1},{v!r}\n" for i, v in enumerate(report.loss_history))


def _run_one(cfg: TrainConfig, ds: PreferenceData, val: PreferenceData | None, out: Path,
             argv: list) -> None:
    datasets = {"train": ds.digest()}
    if val is not None:
        datasets["val"] = val.digest()
    man = Manifest("train", argv, cfg.to_dict(), datasets, {"seed": cfg.seed})
    state, report = train(ds, cfg, val=val)
    tag = {"manifest_digest": man.digest}
    man.write(out / "model.json", "model.json",
              _dumps({"scorer": state.scorer.to_dict(), "loss": cfg.loss.to_dict(), **tag}))
    th = state.thresholds
    if th is not None:
        man.write(out / "thresholds.json", "thresholds.json", _dumps({**th.to_dict(), **tag}))
    man.write(out / "trajectory.csv", "trajectory.csv", _trajectory_csv(report, cfg.K))
    man.write(out / "loss.csv", "loss.csv", _loss_csv(report))
    run = {**report.metadata(), "config": cfg.to_dict(), "seed": cfg.seed, **tag}
    if report.best is not None:
        run["best_scorer"] = report.best.scorer.to_dict()
        run["best_thresholds"] = None if report.best.thresholds is None else report.best.thresholds.to_dict()
    man.write(out / "run.json", "run.json", _dumps(run))
    man.finish(out / "manifest.json")
    print(f"{out}: {report.total_steps} steps, final batch loss {report.loss_history[-1]:.6f}, "
          f"skipped ties {report.n_skipped_ties}")


def cmd_train(args) -> int:
    if args.resume_from is not None:
        raise UsageError("--resume-from is not supported; training always starts from the seeded init")
    seeds = [None]
    if args.seeds:
        try:
            seeds = [int(s) for s in args.seeds.split(",")]
        except ValueError as exc:
            raise UsageError(f"--seeds expects comma-separated integers, got {args.seeds!r}") from exc
    configs = [_train_config(args.config, args.loss, s) for s in seeds]
    ds = read_jsonl(args.data)
    val = read_jsonl(args.val) if args.val else None
    for _, cfg in configs:
        for name, d in (("data", ds), ("val", val)):
            if d is not None and d.K != cfg.K:
                raise SchemaError(f"{name} K={d.K} does not match config K={cfg.K}")
        out = Path(args.out)
        if args.seeds:
            out = out / f"seed-{cfg.seed}"
        _run_one(cfg, ds, val, out, args.argv)
    return EXIT_OK


# eval / calibrate

def _load_scorer(path) -> RewardScorer:
    obj = _load_json(path)
    try:
        return RewardScorer.from_dict(obj.get("scorer", obj))
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaError(f"{path}: not a scorer file ({exc})") from exc


def _load_thresholds(path) -> Thresholds:
    obj = _load_json(path)
    try:
        return Thresholds.from_dict(obj)
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaError(f"{path}: not a thresholds file ({exc})") from exc


def cmd_eval(args) -> int:
    if args.ordinal and not args.thresholds:
        raise UsageError("--ordinal needs --thresholds")
    scorer = _load_scorer(args.model)
    th = _load_thresholds(args.thresholds) if args.thresholds else None
    ds = read_jsonl(args.data)
    if scorer.d != ds.d:
        raise SchemaError(f"model d={scorer.d} does not match data d={ds.d}")
    if th is not None and th.K != ds.K:
        raise SchemaError(f"thresholds K={th.K} do not match data K={ds.K}")
    report = ordinal_metrics(scorer, th, ds)
    print(report.summary())
    if args.out:
        out = Path(args.out)
        man = Manifest("eval", args.argv, {"ordinal": th is not None},
                       {"data": ds.digest(), "model": scorer.digest(),
                        "thresholds": None if th is None else _digest(th.to_dict())}, {})
        body = {**report.to_dict(), "manifest_digest": man.digest}
        man.write(out, out.name, _dumps(body))
        if report.confusion is not None:
            p = out.with_name(out.stem + ".confusion.csv")
            man.write(p, p.name, report.confusion_csv())
        p = out.with_name(out.stem + ".margins.csv")
        man.write(p, p.name, report.histogram_csv())
        man.finish(_manifest_path(out))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    scorer = _load_scorer(args.model)
    ds = read_jsonl(args.data)
    if args.K is not None and args.K != ds.K:
        raise SchemaError(f"requested K={args.K} does not match data K={ds.K}")
    if scorer.d != ds.d:
        raise SchemaError(f"model d={scorer.d} does not match data d={ds.d}")
    res = calibrate_scorer(scorer, ds, epochs=args.epochs, lr=args.lr)
    out = Path(args.out)
    man = Manifest("calibrate", args.argv, {"epochs": args.epochs, "lr": args.lr},
                   {"data": ds.digest()}, {})
    body = {**res.thresholds.to_dict(), "frozen_scorer_digest": scorer.digest(),
            "final_nll": res.history[-1], "low_information": res.low_information,
            "manifest_digest": man.digest}
    man.write(out, out.name, _dumps(body))
    man.finish(_manifest_path(out))
    if res.low_information:
        print("warning: score differences are constant; thresholds reflect label marginals only",
              file=sys.stderr)
    print("calibrated thresholds: " + " ".join(f"{t:.4f}" for t in res.thresholds.zeta))
    return EXIT_OK


# gradcheck

def cmd_gradcheck(args) -> int:
    results = run_gradcheck(seed=args.seed, n_draws=args.draws)
    print(format_table(results))
    failed = [(r.name, i) for r in results for i in r.failures]
    if failed:
        print("gradient check FAILED for (check, draw): " + ", ".join(f"({n}, {i})" for n, i in failed),
              file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ordinal-rm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset from a JSON config")
    g.add_argument("config")
    g.add_argument("out")
    g.set_defaults(func=cmd_gen)

    n = sub.add_parser("noise", help="inject label noise into a dataset")
    n.add_argument("data")
    n.add_argument("--kind", choices=("shift", "random"), required=True)
    n.add_argument("--rate", type=float, required=True)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--out", required=True)
    n.set_defaults(func=cmd_noise)

    t = sub.add_parser("train", help="train a scorer (and thresholds) from a JSON config")
    t.add_argument("config")
    t.add_argument("data")
    t.add_argument("out", help="output directory")
    t.add_argument("--loss", choices=[k.value for k in LossKind], help="override the config loss kind")
    t.add_argument("--val", help="validation dataset for checkpoint selection")
    t.add_argument("--seeds", help="comma-separated seeds; each run goes to OUT/seed-<s>")
    t.add_argument("--resume-from", dest="resume_from", help=argparse.SUPPRESS)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="binary and ordinal metrics for a trained scorer")
    e.add_argument("model")
    e.add_argument("data")
    e.add_argument("--thresholds")
    e.add_argument("--ordinal", action="store_true", help="require ordinal metrics")
    e.add_argument("--out", help="write the report JSON (and CSV exports) here")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("calibrate", help="fit thresholds to a frozen scorer")
    c.add_argument("model")
    c.add_argument("data")
    c.add_argument("out")
    c.add_argument("--K", type=int)
    c.add_argument("--epochs", type=int, default=100)
    c.add_argument("--lr", type=float, default=0.01)
    c.set_defaults(func=cmd_calibrate)

    k = sub.add_parser("gradcheck", help="finite-difference check of every analytic gradient")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--draws", type=int, default=100)
    k.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    args.argv = ["ordinal-rm", *argv]
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SchemaError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
