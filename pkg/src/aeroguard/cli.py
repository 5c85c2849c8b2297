"""Command-line front end tying the pipeline stages together.

    aeroguard simulate         run a fault-injection campaign, write traces
    aeroguard prepare          window, label, normalize, split train/test
    aeroguard train-detector   fit the autoencoder on normal windows
    aeroguard score            fit the error model, score held-out windows
    aeroguard train-classifier fit the crash-cause classifier
    aeroguard evaluate         confusion matrix; --pipeline adds the gate
    aeroguard profile          single-window inference latency table

Every command reads one flat config file, writes its fully-resolved copy to
<out>/config/<command>.txt, and puts artifacts under fixed paths inside the
output directory so the stages find each other without extra flags.

Exit codes: 0 success, 2 configuration or usage error, 3 missing or
incompatible input artifact, 4 numeric failure during training.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys
import time

import numpy as np

from . import flightsim
from .checkpoint import load_checkpoint, require_digest, save_checkpoint
from .classifier import (
    ClassifierConfig,
    FaultClassifier,
    evaluate,
    predict,
    train_classifier,
    write_history_csv,
)
from .config import SCHEMA, load_config, resolved_text
from .datapipe import (
    fit_normalization,
    label_windows,
    load_trace,
    normalize_windows,
    save_trace,
    segment,
    select_channels,
    split_flights,
)
from .detector import DetectorConfig, SequenceAutoencoder, reconstruction_error, train_detector
from .errors import (
    ChannelError,
    CompatibilityError,
    ConfigError,
    ContractError,
    DependencyError,
    DegenerateChannelError,
    DimensionError,
    FormatError,
    LabelError,
    NumericError,
)
from .scorer import (
    fit_gaussian,
    mahalanobis,
    rebuild_gaussian,
    roc_auc,
    score_errors,
    train_threshold,
    write_roc_csv,
    write_scores_csv,
)

USAGE_ERRORS = (
    ConfigError,
    ContractError,
    DimensionError,
    LabelError,
    ChannelError,
    DegenerateChannelError,
)
DEPENDENCY_ERRORS = (DependencyError, CompatibilityError, FormatError)


def _write_text(path, text):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _require(path, producer):
    if not os.path.exists(path):
        raise DependencyError(f"{path} not found; run `aeroguard {producer}` first")
    return path


def _log_config(cfg, out, command):
    _write_text(os.path.join(out, "config", f"{command}.txt"), resolved_text(cfg))


def _f17(x):
    return f"{float(x):.17g}"


# --------------------------------------------------------------- simulate

def _params_from(cfg) -> flightsim.QuadrotorParams:
    n = cfg
    noise = (
        (n["sim_noise_acc"],) * 3
        + (n["sim_noise_gyro"],) * 3
        + (n["sim_noise_angacc"],) * 3
        + (n["sim_noise_vel"],) * 3
        + (n["sim_noise_pos"],) * 3
        + (n["sim_noise_att"],) * 3
    )
    return flightsim.QuadrotorParams(
        mass=cfg["sim_mass"],
        arm_length=cfg["sim_arm_length"],
        thrust_coeff=cfg["sim_thrust_coeff"],
        torque_coeff=cfg["sim_torque_coeff"],
        rotor_tau=cfg["sim_rotor_tau"],
        linear_drag=cfg["sim_linear_drag"],
        angular_drag=cfg["sim_angular_drag"],
        max_rotor_speed=cfg["sim_max_rotor_speed"],
        noise_std=noise,
        init_perturbation=cfg["sim_init_perturbation"],
        disturbance_force_std=cfg["sim_disturbance_force"],
        disturbance_torque_std=cfg["sim_disturbance_torque"],
        disturbance_tau=cfg["sim_disturbance_tau"],
    )


def _profile_from(cfg) -> flightsim.FlightProfile:
    return flightsim.FlightProfile(
        climb_s=cfg["sim_climb_s"],
        hover_s=cfg["sim_hover_s"],
        post_fault_s=cfg["sim_post_fault_s"],
        transition_s=cfg["sim_transition_s"],
        hover_altitude=cfg["sim_hover_altitude"],
    )


def _trace_name(index):
    return f"run_{index:04d}.csv"


def cmd_simulate(cfg, out):
    result = flightsim.run_campaign(
        cfg["sim_runs"],
        classes=cfg["sim_classes"],
        seed=cfg["seed"],
        params=_params_from(cfg),
        profile=_profile_from(cfg),
    )
    traces_dir = os.path.join(out, "traces")
    os.makedirs(traces_dir, exist_ok=True)
    rows = ["run,crash_class,seed,status,file,reason"]
    n_ok = 0
    for rec in result.records:
        fname = ""
        if rec.status == "ok":
            fname = _trace_name(rec.index)
            save_trace(rec.trace, os.path.join(traces_dir, fname))
            n_ok += 1
        rows.append(
            f"{rec.index},{rec.crash_class},{rec.seed},{rec.status},{fname},{rec.reason}"
        )
    _write_text(os.path.join(traces_dir, "manifest.csv"), "\n".join(rows) + "\n")
    print(f"simulate: {n_ok}/{len(result.records)} runs ok -> {traces_dir}")
    return 0


def _read_manifest(traces_dir):
    path = _require(os.path.join(traces_dir, "manifest.csv"), "simulate")
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "run,crash_class,seed,status,file,reason":
        raise FormatError(f"{path}: unexpected manifest header")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",", 5)
        if len(cells) != 6:
            raise FormatError(f"{path}: line {lineno}: expected 6 fields")
        rows.append(
            {
                "run": int(cells[0]),
                "crash_class": int(cells[1]),
                "seed": int(cells[2]),
                "status": cells[3],
                "file": cells[4],
                "reason": cells[5],
            }
        )
    return rows


# ---------------------------------------------------------------- prepare

def _windows_for(traces, channels, window, stride):
    """Segment and label each trace on the given channel subset."""
    out = []
    for tr in traces:
        sub = select_channels(tr, channels)
        out.extend(label_windows(segment(sub, window, stride), sub))
    return out


def _stack(windows):
    return np.stack([w.values for w in windows]).astype(np.float32)


def _meta_rows(windows):
    rows = ["flight,start,kind,label"]
    rows += [f"{w.flight_id},{w.start},{w.kind},{w.label}" for w in windows]
    return "\n".join(rows) + "\n"


def cmd_prepare(cfg, out):
    traces_dir = os.path.join(out, "traces")
    manifest = _read_manifest(traces_dir)
    traces = []
    for row in manifest:
        if row["status"] != "ok":
            continue
        path = os.path.join(traces_dir, row["file"])
        if not os.path.exists(path):
            raise DependencyError(f"manifest names {path} but the file is missing")
        traces.append(load_trace(path, trace_id=row["run"]))
    if len(traces) < 2:
        raise DependencyError(
            f"only {len(traces)} usable trace(s) in {traces_dir}; need at least 2"
        )
    train_traces, test_traces = split_flights(
        traces, fraction=cfg["split_fraction"], seed=cfg["seed"]
    )

    prep = os.path.join(out, "prepared")
    os.makedirs(prep, exist_ok=True)
    summary = ["set,count"]

    # detector stream: train on pre-fault windows, test on normal + fault mix
    det_train_w = [
        w
        for w in _windows_for(train_traces, cfg["det_channels"],
                              cfg["det_window"], cfg["det_stride"])
        if w.kind == "normal"
    ]
    if not det_train_w:
        raise ContractError("no normal-phase training windows; campaign too short")
    det_stats = fit_normalization(_stack(det_train_w), cfg["det_channels"])
    normalize_windows(det_train_w, det_stats)
    np.save(os.path.join(prep, "det_train.npy"), _stack(det_train_w))

    det_test_w = [
        w
        for w in _windows_for(test_traces, cfg["det_channels"],
                              cfg["det_window"], cfg["det_stride"])
        if w.kind in ("normal", "fault")
    ]
    if not det_test_w:
        raise ContractError("no held-out detector windows")
    normalize_windows(det_test_w, det_stats)
    np.save(os.path.join(prep, "det_test.npy"), _stack(det_test_w))
    np.save(
        os.path.join(prep, "det_test_labels.npy"),
        np.array([1 if w.kind == "fault" else 0 for w in det_test_w], dtype=np.int64),
    )
    _write_text(os.path.join(prep, "det_test_meta.csv"), _meta_rows(det_test_w))
    _write_stats(os.path.join(prep, "det_stats.csv"), det_stats)
    summary.append(f"det_train,{len(det_train_w)}")
    summary.append(f"det_test,{len(det_test_w)}")

    # classifier stream: fault-transition windows only, labels remapped to
    # a dense 0..K-1 index recorded in class_map.csv
    cls_train_w = [
        w
        for w in _windows_for(train_traces, cfg["cls_channels"],
                              cfg["cls_window"], cfg["cls_stride"])
        if w.kind == "fault"
    ]
    cls_test_w = [
        w
        for w in _windows_for(test_traces, cfg["cls_channels"],
                              cfg["cls_window"], cfg["cls_stride"])
        if w.kind == "fault"
    ]
    if not cls_train_w or not cls_test_w:
        raise ContractError(
            "no fault-transition windows for the classifier; simulate a "
            "campaign with crash classes or a longer transition"
        )
    classes = sorted({w.label for w in cls_train_w} | {w.label for w in cls_test_w})
    index_of = {c: i for i, c in enumerate(classes)}
    cls_stats = fit_normalization(_stack(cls_train_w), cfg["cls_channels"])
    normalize_windows(cls_train_w, cls_stats)
    normalize_windows(cls_test_w, cls_stats)
    np.save(os.path.join(prep, "cls_train.npy"), _stack(cls_train_w))
    np.save(
        os.path.join(prep, "cls_train_labels.npy"),
        np.array([index_of[w.label] for w in cls_train_w], dtype=np.int64),
    )
    np.save(os.path.join(prep, "cls_test.npy"), _stack(cls_test_w))
    np.save(
        os.path.join(prep, "cls_test_labels.npy"),
        np.array([index_of[w.label] for w in cls_test_w], dtype=np.int64),
    )
    _write_text(os.path.join(prep, "cls_test_meta.csv"), _meta_rows(cls_test_w))
    _write_stats(os.path.join(prep, "cls_stats.csv"), cls_stats)
    _write_text(
        os.path.join(prep, "class_map.csv"),
        "\n".join(["index,crash_class"] + [f"{i},{c}" for c, i in index_of.items()])
        + "\n",
    )
    summary.append(f"cls_train,{len(cls_train_w)}")
    summary.append(f"cls_test,{len(cls_test_w)}")
    summary.append(f"classes,{len(classes)}")
    _write_text(os.path.join(prep, "summary.csv"), "\n".join(summary) + "\n")
    print(
        f"prepare: det {len(det_train_w)}/{len(det_test_w)} train/test, "
        f"cls {len(cls_train_w)}/{len(cls_test_w)}, {len(classes)} classes -> {prep}"
    )
    return 0


def _write_stats(path, stats):
    rows = ["channel,mean,std"]
    for name, m, s in zip(stats.channel_names, stats.mean, stats.std):
        rows.append(f"{name},{_f17(m)},{_f17(s)}")
    _write_text(path, "\n".join(rows) + "\n")


# --------------------------------------------------------- train-detector

def _detector_config(cfg) -> DetectorConfig:
    return DetectorConfig(
        window=cfg["det_window"],
        channels=len(cfg["det_channels"]),
        conv_filters=cfg["det_conv_filters"],
        conv_kernels=cfg["det_conv_kernels"],
        hidden=cfg["det_hidden"],
        epochs=cfg["det_epochs"],
        batch_size=cfg["det_batch"],
        learning_rate=cfg["det_lr"],
        adam_eps=cfg["det_adam_eps"],
        seed=cfg["seed"],
    )


def _load_windows(path, producer):
    arr = np.load(_require(path, producer))
    if arr.ndim != 3:
        raise FormatError(f"{path}: expected a [N, W, C] array, got {arr.shape}")
    return arr.astype(np.float32)


def cmd_train_detector(cfg, out):
    windows = _load_windows(os.path.join(out, "prepared", "det_train.npy"), "prepare")
    dc = _detector_config(cfg)
    if windows.shape[1:] != (dc.window, dc.channels):
        raise CompatibilityError(
            f"prepared windows are {windows.shape[1]}x{windows.shape[2]} but the "
            f"config asks for {dc.window}x{dc.channels}; re-run `aeroguard prepare`"
        )
    model = train_detector(dc, windows)
    save_checkpoint(os.path.join(out, "detector.ckpt"), "detector", dc,
                    model.parameter_arrays())
    rows = ["epoch,train_loss"]
    rows += [f"{i},{loss:.9g}" for i, loss in enumerate(model.info.history)]
    _write_text(os.path.join(out, "metrics", "detector_loss.csv"),
                "\n".join(rows) + "\n")
    print(
        f"train-detector: {model.info.epochs_run} epochs, "
        f"final loss {model.info.final_loss:.6g} -> {os.path.join(out, 'detector.ckpt')}"
    )
    return 0


def _load_detector(cfg, out) -> SequenceAutoencoder:
    ck = load_checkpoint(_require(os.path.join(out, "detector.ckpt"), "train-detector"))
    if ck.kind != "detector":
        raise CompatibilityError(f"detector.ckpt holds a {ck.kind} model")
    dc = _detector_config(cfg)
    require_digest(ck, dc, what="detector checkpoint")
    model = SequenceAutoencoder(dc)
    model.load_parameter_arrays(ck.arrays)
    return model


# ------------------------------------------------------------------ score

def cmd_score(cfg, out):
    prep = os.path.join(out, "prepared")
    train_windows = _load_windows(os.path.join(prep, "det_train.npy"), "prepare")
    test_windows = _load_windows(os.path.join(prep, "det_test.npy"), "prepare")
    test_labels = np.load(_require(os.path.join(prep, "det_test_labels.npy"), "prepare"))
    model = _load_detector(cfg, out)

    train_err = reconstruction_error(model, train_windows)
    gauss = fit_gaussian(train_err, ridge=cfg["score_ridge"])
    train_scores = mahalanobis(gauss, train_err)
    threshold = cfg["score_threshold"]
    if threshold is None:
        threshold = train_threshold(train_scores, percentile=cfg["score_percentile"])

    test_err = reconstruction_error(model, test_windows)
    test_records = score_errors(gauss, test_err, labels=[int(v) for v in test_labels])
    curve = roc_auc(test_records)
    flagged = float(np.mean(mahalanobis(gauss, test_err) > threshold))

    scores_dir = os.path.join(out, "scores")
    os.makedirs(scores_dir, exist_ok=True)
    write_scores_csv(os.path.join(scores_dir, "train_scores.csv"),
                     score_errors(gauss, train_err))
    write_scores_csv(os.path.join(scores_dir, "test_scores.csv"), test_records)
    write_roc_csv(os.path.join(scores_dir, "roc.csv"), curve)
    np.save(os.path.join(scores_dir, "gaussian_mean.npy"), gauss.mean)
    np.save(os.path.join(scores_dir, "gaussian_cov.npy"), gauss.cov)
    _write_text(os.path.join(scores_dir, "ridge.txt"), _f17(gauss.ridge) + "\n")
    _write_text(os.path.join(scores_dir, "threshold.txt"), _f17(threshold) + "\n")
    _write_text(
        os.path.join(scores_dir, "metrics.csv"),
        "auc,threshold,test_flagged_fraction\n"
        f"{curve.auc:.9g},{threshold:.9g},{flagged:.9g}\n",
    )
    print(f"score: auc {curve.auc:.4f}, threshold {threshold:.4g} -> {scores_dir}")
    return 0


# ------------------------------------------------------- train-classifier

def _read_class_map(prep):
    path = _require(os.path.join(prep, "class_map.csv"), "prepare")
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "index,crash_class":
        raise FormatError(f"{path}: unexpected header")
    pairs = []
    for line in lines[1:]:
        if line:
            i, c = line.split(",")
            pairs.append((int(i), int(c)))
    if not pairs or [i for i, _ in pairs] != list(range(len(pairs))):
        raise FormatError(f"{path}: class indices must be dense from 0")
    return [c for _, c in pairs]


def _classifier_config(cfg, num_classes) -> ClassifierConfig:
    return ClassifierConfig(
        window=cfg["cls_window"],
        channels=len(cfg["cls_channels"]),
        num_classes=num_classes,
        conv_filters=cfg["cls_conv_filters"],
        conv_kernels=cfg["cls_conv_kernels"],
        hidden=cfg["cls_hidden"],
        dense_hidden=cfg["cls_dense"],
        dropout=cfg["cls_dropout"],
        epochs=cfg["cls_epochs"],
        batch_size=cfg["cls_batch"],
        learning_rate=cfg["cls_lr"],
        adam_eps=cfg["cls_adam_eps"],
        seed=cfg["seed"],
    )


def cmd_train_classifier(cfg, out):
    prep = os.path.join(out, "prepared")
    windows = _load_windows(os.path.join(prep, "cls_train.npy"), "prepare")
    labels = np.load(_require(os.path.join(prep, "cls_train_labels.npy"), "prepare"))
    test_windows = _load_windows(os.path.join(prep, "cls_test.npy"), "prepare")
    test_labels = np.load(_require(os.path.join(prep, "cls_test_labels.npy"), "prepare"))
    classes = _read_class_map(prep)
    cc = _classifier_config(cfg, num_classes=len(classes))
    if windows.shape[1:] != (cc.window, cc.channels):
        raise CompatibilityError(
            f"prepared windows are {windows.shape[1]}x{windows.shape[2]} but the "
            f"config asks for {cc.window}x{cc.channels}; re-run `aeroguard prepare`"
        )
    model = train_classifier(cc, windows, labels, test_windows, test_labels)
    save_checkpoint(os.path.join(out, "classifier.ckpt"), "classifier", cc,
                    model.parameter_arrays())
    write_history_csv(os.path.join(out, "metrics", "classifier_history.csv"),
                      model.info.history)
    last = model.info.history[-1]
    print(
        f"train-classifier: {model.info.epochs_run} epochs, "
        f"test acc {last.get('test_acc', float('nan')):.4f} -> "
        f"{os.path.join(out, 'classifier.ckpt')}"
    )
    return 0


# --------------------------------------------------------------- evaluate

def _read_meta(path):
    with open(_require(path, "prepare"), "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "flight,start,kind,label":
        raise FormatError(f"{path}: unexpected header")
    rows = []
    for line in lines[1:]:
        if line:
            f, s, k, l = line.split(",")
            rows.append({"flight": int(f), "start": int(s), "kind": k, "label": int(l)})
    return rows


def cmd_evaluate(cfg, out, pipeline=False):
    prep = os.path.join(out, "prepared")
    test_windows = _load_windows(os.path.join(prep, "cls_test.npy"), "prepare")
    test_labels = np.load(_require(os.path.join(prep, "cls_test_labels.npy"), "prepare"))
    classes = _read_class_map(prep)
    cc = _classifier_config(cfg, num_classes=len(classes))
    ck = load_checkpoint(_require(os.path.join(out, "classifier.ckpt"),
                                  "train-classifier"))
    if ck.kind != "classifier":
        raise CompatibilityError(f"classifier.ckpt holds a {ck.kind} model")
    require_digest(ck, cc, what="classifier checkpoint")
    model = FaultClassifier(cc)
    model.load_parameter_arrays(ck.arrays)

    acc, cm = evaluate(model, test_windows, test_labels)
    eval_dir = os.path.join(out, "eval")
    os.makedirs(eval_dir, exist_ok=True)
    cm.write_csv(os.path.join(eval_dir, "confusion.csv"))
    _write_text(
        os.path.join(eval_dir, "accuracy.csv"),
        f"accuracy,windows\n{acc:.9g},{len(test_labels)}\n",
    )
    print(f"evaluate: accuracy {acc:.4f} on {len(test_labels)} windows")
    if not pipeline:
        return 0

    # pipeline mode: a transition window reaches the classifier only if a
    # detector window inside its sample range scores above the threshold
    det_windows = _load_windows(os.path.join(prep, "det_test.npy"), "prepare")
    det_meta = _read_meta(os.path.join(prep, "det_test_meta.csv"))
    cls_meta = _read_meta(os.path.join(prep, "cls_test_meta.csv"))
    if len(det_meta) != len(det_windows) or len(cls_meta) != len(test_windows):
        raise FormatError("window metadata does not align with prepared arrays")
    detector = _load_detector(cfg, out)
    scores_dir = os.path.join(out, "scores")
    mean = np.load(_require(os.path.join(scores_dir, "gaussian_mean.npy"), "score"))
    cov = np.load(_require(os.path.join(scores_dir, "gaussian_cov.npy"), "score"))
    with open(_require(os.path.join(scores_dir, "ridge.txt"), "score")) as fh:
        ridge = float(fh.read())
    with open(_require(os.path.join(scores_dir, "threshold.txt"), "score")) as fh:
        threshold = float(fh.read())
    gauss = rebuild_gaussian(mean, cov, ridge)
    det_scores = mahalanobis(gauss, reconstruction_error(detector, det_windows))

    w_det = det_windows.shape[1]
    w_cls = test_windows.shape[1]
    by_flight = {}
    for meta, s in zip(det_meta, det_scores):
        by_flight.setdefault(meta["flight"], []).append((meta["start"], float(s)))

    preds, _ = predict(model, test_windows)
    forwarded = np.zeros(len(cls_meta), dtype=bool)
    for i, meta in enumerate(cls_meta):
        lo, hi = meta["start"], meta["start"] + w_cls - w_det
        best = max(
            (s for start, s in by_flight.get(meta["flight"], ())
             if lo <= start <= hi),
            default=float("-inf"),
        )
        forwarded[i] = best > threshold
    n_fwd = int(forwarded.sum())
    correct_fwd = int(np.sum((preds == test_labels) & forwarded))
    acc_fwd = correct_fwd / n_fwd if n_fwd else float("nan")
    acc_end = correct_fwd / len(test_labels)
    _write_text(
        os.path.join(eval_dir, "pipeline.csv"),
        "windows,forwarded,gate_recall,accuracy_forwarded,accuracy_end_to_end\n"
        f"{len(test_labels)},{n_fwd},{n_fwd / len(test_labels):.9g},"
        f"{'' if n_fwd == 0 else format(acc_fwd, '.9g')},{acc_end:.9g}\n",
    )
    print(
        f"evaluate --pipeline: {n_fwd}/{len(test_labels)} windows passed the "
        f"gate, end-to-end accuracy {acc_end:.4f}"
    )
    return 0


# ---------------------------------------------------------------- profile

def cmd_profile(cfg, out):
    base = _detector_config(cfg)
    names = cfg["profile_channels"]
    rng = np.random.default_rng(cfg["seed"])
    rows = ["channels,median_ms,p95_ms"]
    printed = []
    for k in range(1, len(names) + 1):
        dc = DetectorConfig(
            window=cfg["profile_window"],
            channels=k,
            conv_filters=base.conv_filters,
            conv_kernels=base.conv_kernels,
            hidden=base.hidden,
            seed=cfg["seed"],
        )
        model = SequenceAutoencoder(dc)
        x = rng.standard_normal((dc.window, k)).astype(np.float32)
        for _ in range(cfg["profile_warmup"]):
            reconstruction_error(model, x)
        times = []
        for _ in range(cfg["profile_repeats"]):
            t0 = time.perf_counter()
            reconstruction_error(model, x)
            times.append((time.perf_counter() - t0) * 1000.0)
        med = statistics.median(times)
        p95 = float(np.percentile(times, 95))
        rows.append(f"{k},{med:.6g},{p95:.6g}")
        printed.append(f"  {k} channel(s): median {med:.2f} ms, p95 {p95:.2f} ms")
    _write_text(os.path.join(out, "profile.csv"), "\n".join(rows) + "\n")
    print("profile: single-window inference latency")
    print("\n".join(printed))
    return 0


# ------------------------------------------------------------------- main

def build_parser():
    parser = argparse.ArgumentParser(
        prog="aeroguard",
        description="UAV sensor-fault detection and crash-cause identification",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (
        "simulate",
        "prepare",
        "train-detector",
        "score",
        "train-classifier",
        "evaluate",
        "profile",
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="path to a key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="out", help="artifact directory (default: out)")
        if name == "simulate":
            p.add_argument("--runs", type=int, default=None,
                           help="override sim_runs")
            p.add_argument("--classes", default=None,
                           help="override sim_classes ('all' or comma list)")
        if name == "evaluate":
            p.add_argument("--pipeline", action="store_true",
                           help="gate windows through the detector first")
    return parser


def _dispatch(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "runs", None) is not None:
        overrides["sim_runs"] = args.runs
    if getattr(args, "classes", None) is not None:
        overrides["sim_classes"] = SCHEMA["sim_classes"].parse(args.classes)
    cfg = load_config(args.config, overrides)
    out = args.out
    os.makedirs(out, exist_ok=True)
    _log_config(cfg, out, args.command)
    if args.command == "simulate":
        return cmd_simulate(cfg, out)
    if args.command == "prepare":
        return cmd_prepare(cfg, out)
    if args.command == "train-detector":
        return cmd_train_detector(cfg, out)
    if args.command == "score":
        return cmd_score(cfg, out)
    if args.command == "train-classifier":
        return cmd_train_classifier(cfg, out)
    if args.command == "evaluate":
        return cmd_evaluate(cfg, out, pipeline=args.pipeline)
    if args.command == "profile":
        return cmd_profile(cfg, out)
    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except USAGE_ERRORS as exc:
        print(f"aeroguard: configuration error: {exc}", file=sys.stderr)
        return 2
    except DEPENDENCY_ERRORS as exc:
        print(f"aeroguard: dependency error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"aeroguard: numeric fault: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
