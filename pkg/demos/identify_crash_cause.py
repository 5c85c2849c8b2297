"""Teach the classifier to name which rotors failed, from gyro data alone.

Second pipeline stage, desk scale: simulate crashes drawn from a few
rotor-failure classes, train the convolutional Bi-LSTM classifier on the
fault-transition windows, and read its confusion matrix.  Also repeats
the evaluation with single gyro axes knocked out to show how much each
channel carries.

Takes a few minutes.  python demos/identify_crash_cause.py
"""

import argparse
import time

import numpy as np

from aeroguard.classifier import (
    ClassifierConfig,
    channel_ablation,
    evaluate,
    train_classifier,
)
from aeroguard.datapipe import (
    apply_normalization,
    fit_normalization,
    label_windows,
    segment,
    select_channels,
    split_flights,
    stack_windows,
)
from aeroguard.flightsim import run_campaign

GYROS = ("gyro_x", "gyro_y", "gyro_z")
CLASSES = (1, 2, 4, 8, 5, 10)  # four single-rotor failures plus two pairs


def fault_windows(traces):
    ws = []
    for tr in traces:
        sub = select_channels(tr, GYROS)
        ws.extend(w for w in label_windows(segment(sub, 100, 10), sub)
                  if w.kind == "fault")
    values, labels = stack_windows(ws)
    dense = {c: i for i, c in enumerate(sorted(set(labels.tolist())))}
    return values, np.array([dense[int(l)] for l in labels]), dense


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=48)
    ap.add_argument("--epochs", type=int, default=8)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    print(f"simulating {args.runs} crashes over classes {CLASSES}...")
    traces = run_campaign(args.runs, classes=CLASSES, seed=args.seed).traces
    train_tr, test_tr = split_flights(traces, 0.7, seed=args.seed)
    xtr, ytr, dense = fault_windows(train_tr)
    xte, yte, _ = fault_windows(test_tr)
    stats = fit_normalization(xtr)
    xtr = apply_normalization(xtr, stats)
    xte = apply_normalization(xte, stats)
    names = [c for c, _ in sorted(dense.items(), key=lambda kv: kv[1])]
    print(f"{len(xtr)} training and {len(xte)} held-out transition windows, "
          f"100 gyro samples each")

    cfg = ClassifierConfig(window=100, channels=3, num_classes=len(names),
                           conv_filters=(12, 16, 24), conv_kernels=(5, 5, 3),
                           hidden=24, dense_hidden=48, dropout=0.2,
                           epochs=args.epochs, batch_size=128, seed=args.seed)
    t0 = time.perf_counter()
    model = train_classifier(cfg, xtr, ytr)
    first, last = model.info.history[0], model.info.history[-1]
    print(f"trained {args.epochs} epochs in {time.perf_counter() - t0:.0f}s, "
          f"loss {first['train_loss']:.3f} -> {last['train_loss']:.3f}, "
          f"train acc {last['train_acc']:.3f}")

    acc, cm = evaluate(model, xte, yte)
    print(f"\nheld-out accuracy: {acc:.3f} "
          f"(random guessing: {1.0 / len(names):.3f})")
    print("\nconfusion matrix (rows true class, columns predicted):")
    print("        " + " ".join(f"c{c:<4}" for c in names))
    for c, row in zip(names, cm.counts):
        print(f"  c{c:<4} " + " ".join(f"{int(v):<5}" for v in row))

    print("\nsingle-axis ablation (train and test on one gyro channel):")
    for subset, a in channel_ablation(cfg, xtr, ytr, xte, yte,
                                      [(0,), (1,), (2,)]):
        print(f"  {GYROS[subset[0]]} only: accuracy {a:.3f}")


if __name__ == "__main__":
    main()
