"""
The ordinal-rm command line
===========================

The same pipeline driven through the CLI entry point: generate, corrupt,
train two models, calibrate the baseline and evaluate.  Each step writes a
manifest next to its outputs.
"""

# %%
import json
import tempfile
from pathlib import Path

from ordinal_rm.cli import main

work = Path(tempfile.mkdtemp(prefix="ordinal-rm-"))
(work / "gen.json").write_text(json.dumps({"n": 2000, "d": 16, "K": 3, "seed": 0}))
(work / "train.json").write_text(json.dumps({"K": 3, "epochs": 5, "lr_phi": 0.01, "lr_alpha": 0.01, "lam": 0.001}))


def run(*args):
    print("$ ordinal-rm", " ".join(str(a) for a in args))
    code = main([str(a) for a in args])
    print("exit", code, "\n")


# %%
run("gen", work / "gen.json", work / "data" / "train.jsonl")
run("noise", work / "data" / "train.jsonl", "--kind", "shift", "--rate", "0.2", "--seed", "1",
    "--out", work / "data" / "shift.jsonl")
run("train", work / "train.json", work / "data" / "train.jsonl", work / "nll")
run("train", work / "train.json", work / "data" / "train.jsonl", work / "bt", "--loss", "simple_bt")
run("calibrate", work / "bt" / "model.json", work / "data" / "train.jsonl", work / "bt" / "calibrated.json")
run("eval", work / "nll" / "model.json", work / "data" / "train.jsonl", "--thresholds",
    work / "nll" / "thresholds.json", "--ordinal", "--out", work / "eval" / "nll.json")

# %% Failures map to exit codes: 2 usage, 3 schema or data, 4 numeric.
run("eval", work / "bt" / "model.json", work / "data" / "train.jsonl", "--ordinal")
run("train", work / "train.json", work / "data" / "train.jsonl", work / "x", "--resume-from", "ckpt")

# %%
for p in sorted(work.rglob("*")):
    if p.is_file():
        print(p.relative_to(work))
