"""Drive the whole pipeline through the command-line interface.

Every stage of the toolkit is also a CLI subcommand writing plain-file
artifacts (CSV traces, npy window stacks, binary checkpoints, metric
tables).  This script runs the full chain into a scratch directory with a
deliberately tiny configuration and prints what lands on disk at each
step.  The same chain scales to the full recipe by editing the config.

Takes a couple of minutes.  python demos/cli_walkthrough.py [--out DIR]
"""

import argparse
import pathlib
import shutil
import tempfile

from aeroguard.cli import main as aeroguard

SMALL = """\
# desk-scale settings; delete a line to fall back to the full default
sim_runs = 16
sim_classes = 1,2,4,8
sim_hover_s = 4
det_epochs = 3
det_hidden = 8
det_conv_filters = 4,6,8
cls_epochs = 8
cls_hidden = 12
cls_dense = 24
cls_conv_filters = 4,6,8
cls_window = 60
profile_repeats = 20
profile_warmup = 3
"""


def show(out, pattern, note):
    print(f"\n  {note}")
    for p in sorted(out.glob(pattern)):
        size = p.stat().st_size
        print(f"    {p.relative_to(out)}  ({size} bytes)")


def head(path, n=4):
    lines = path.read_text().splitlines()
    for line in lines[:n]:
        print(f"    | {line}")
    if len(lines) > n:
        print(f"    | ... {len(lines) - n} more lines")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=None,
                    help="artifact directory (default: a fresh temp dir)")
    ap.add_argument("--keep", action="store_true",
                    help="leave the artifact directory behind")
    args = ap.parse_args()

    out = pathlib.Path(args.out or tempfile.mkdtemp(prefix="aeroguard_demo_"))
    out.mkdir(parents=True, exist_ok=True)
    cfg = out / "small.cfg"
    cfg.write_text(SMALL)
    base = ["--config", str(cfg), "--out", str(out)]
    print(f"artifacts land in {out}")

    steps = [
        ("simulate", "fault-injection campaign, one CSV trace per flight"),
        ("prepare", "windowed, normalized training stacks"),
        ("train-detector", "autoencoder checkpoint plus loss curve"),
        ("score", "Gaussian error model, threshold, ROC"),
        ("train-classifier", "classifier checkpoint plus history"),
        ("evaluate", "held-out confusion matrix"),
        ("profile", "inference latency by channel count"),
    ]
    for cmd, note in steps:
        print(f"\n$ aeroguard {cmd} --config small.cfg --out {out.name}")
        rc = aeroguard([cmd] + base)
        assert rc == 0, f"{cmd} exited {rc}"
        if cmd == "simulate":
            show(out, "traces/run_000*.csv", note)
            print("    manifest:")
            head(out / "traces" / "manifest.csv")
        elif cmd == "prepare":
            show(out, "prepared/*.npy", note)
        elif cmd == "train-detector":
            show(out, "detector.ckpt", note)
            head(out / "metrics" / "detector_loss.csv")
        elif cmd == "score":
            show(out, "scores/*", note)
            print("    metrics:")
            head(out / "scores" / "metrics.csv")
        elif cmd == "train-classifier":
            show(out, "classifier.ckpt", note)
            head(out / "metrics" / "classifier_history.csv", n=3)
        elif cmd == "evaluate":
            show(out, "eval/*.csv", note)
            print("    accuracy:")
            head(out / "eval" / "accuracy.csv")
        elif cmd == "profile":
            print(f"\n  {note}")
            head(out / "profile.csv", n=5)

    print("\nend-to-end gate: classifier windows only count when the "
          "detector flagged the same stretch of flight")
    rc = aeroguard(["evaluate", "--pipeline"] + base)
    assert rc == 0
    head(out / "eval" / "pipeline.csv")

    if args.keep or args.out:
        print(f"\nartifacts kept in {out}")
    else:
        shutil.rmtree(out)
        print("\nscratch directory removed (pass --keep to inspect it)")


if __name__ == "__main__":
    main()
