"""Train the detection autoencoder on healthy hover and score a crash.

A pocket edition of the first pipeline stage: simulate a small campaign,
train the convolutional Bi-LSTM autoencoder on normal-phase windows only,
fit a Gaussian to its reconstruction errors, and watch the Mahalanobis
score separate held-out fault windows from healthy ones.

Runs in about a minute.  python demos/train_and_score_detector.py
"""

import argparse
import time

import numpy as np

from aeroguard.datapipe import (
    apply_normalization,
    fit_normalization,
    label_windows,
    segment,
    select_channels,
    split_flights,
    stack_windows,
)
from aeroguard.detector import DetectorConfig, reconstruction_error, train_detector
from aeroguard.flightsim import run_campaign
from aeroguard.scorer import fit_gaussian, roc_auc, score_errors, train_threshold

SENSORS = ("acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z")


def windows_of(traces, window, stride):
    out = []
    for tr in traces:
        sub = select_channels(tr, SENSORS)
        out.extend(label_windows(segment(sub, window, stride), sub))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--epochs", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"simulating {args.runs} flights...")
    # a handful of classes keeps every class populated enough to stratify
    traces = run_campaign(args.runs, classes=(1, 2, 4, 8, 15),
                          seed=args.seed).traces
    train_tr, test_tr = split_flights(traces, 0.7, seed=args.seed)

    train_w = [w for w in windows_of(train_tr, 25, 10) if w.kind == "normal"]
    test_w = [w for w in windows_of(test_tr, 25, 10)
              if w.kind in ("normal", "fault")]
    xtr, _ = stack_windows(train_w)
    xte, te_labels = stack_windows(test_w)
    stats = fit_normalization(xtr)
    xtr = apply_normalization(xtr, stats)
    xte = apply_normalization(xte, stats)
    yte = (te_labels > 0).astype(int)
    print(f"training on {len(xtr)} normal windows "
          f"({len(SENSORS)} channels, 25 samples each); "
          f"holding out {len(xte)} windows, {int(yte.sum())} of them faulty")

    cfg = DetectorConfig(window=25, channels=6, conv_filters=(8, 12, 16),
                         conv_kernels=(5, 5, 3), hidden=16,
                         epochs=args.epochs, batch_size=256, seed=args.seed)
    t0 = time.perf_counter()
    model = train_detector(cfg, xtr)
    hist = model.info.history
    print(f"trained {args.epochs} epochs in {time.perf_counter() - t0:.0f}s, "
          f"loss {hist[0]:.4f} -> {hist[-1]:.4f}")

    gauss = fit_gaussian(reconstruction_error(model, xtr))
    train_scores = score_errors(gauss, reconstruction_error(model, xtr))
    tau = train_threshold(train_scores, percentile=99.0)
    scores = score_errors(gauss, reconstruction_error(model, xte),
                          labels=yte.tolist())
    curve = roc_auc(scores)

    flagged = sum(1 for s in scores if s.score > tau)
    hits = sum(1 for s in scores if s.score > tau and s.label == 1)
    print(f"\nheld-out ROC AUC: {curve.auc:.4f}")
    print(f"threshold at the 99th training percentile: {tau:.2f}")
    print(f"flagged {flagged} windows, {hits} of them truly faulty")

    ranked = sorted(scores, key=lambda s: -s.score)
    print("\nhighest anomaly scores:")
    print(f"  {'score':>10}  truth")
    for s in ranked[:5]:
        print(f"  {s.score:>10.2f}  {'fault' if s.label else 'normal'}")
    print("lowest:")
    for s in ranked[-3:]:
        print(f"  {s.score:>10.2f}  {'fault' if s.label else 'normal'}")


if __name__ == "__main__":
    main()
