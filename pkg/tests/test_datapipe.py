"""Unit tests for trace I/O, windowing, labeling, normalization, splits."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeroguard.datapipe import (
    CHANNELS,
    FlightTrace,
    NormStats,
    apply_normalization,
    fit_normalization,
    label_windows,
    load_trace,
    normalize_windows,
    save_trace,
    segment,
    select_channels,
    split_flights,
    stack_windows,
    window_count,
)
from aeroguard.errors import (
    ChannelError,
    ContractError,
    DegenerateChannelError,
    FormatError,
    NumericError,
)


def make_trace(n=150, channels=("a", "b", "c"), crash_class=0, phases=None,
               trace_id=0, seed=99, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    samples = rng.normal(size=(n, len(channels))).astype(np.float32)
    if phases is None:
        phase = np.array(["H"] * n)
    else:
        phase = np.asarray(phases)
    return FlightTrace(
        trace_id=trace_id,
        rate_hz=100,
        channel_names=tuple(channels),
        samples=samples,
        phase=phase,
        crash_class=crash_class,
        seed=seed,
    )


def fault_phases(n, onset, trans_end):
    ph = np.array(["H"] * n)
    ph[:20] = "U"
    ph[onset:trans_end] = "F"
    ph[trans_end:] = "P"
    return ph


def test_trace_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(4)
    samples = rng.normal(scale=123.0, size=(40, 18)).astype(np.float32)
    samples[3, 5] = np.float32(1.0e-38)  # tiny magnitude survives too
    tr = FlightTrace(
        trace_id=7,
        rate_hz=100,
        channel_names=CHANNELS,
        samples=samples,
        phase=np.array(["U"] * 10 + ["H"] * 20 + ["F"] * 6 + ["P"] * 4),
        crash_class=11,
        seed=123456789,
    )
    path = tmp_path / "t.csv"
    save_trace(tr, path)
    back = load_trace(path, trace_id=7)
    np.testing.assert_array_equal(back.samples, tr.samples)
    assert back.samples.dtype == np.float32
    assert back.channel_names == CHANNELS
    assert back.crash_class == 11
    assert back.seed == 123456789
    assert back.rate_hz == 100
    assert list(back.phase) == list(tr.phase)


def test_trace_file_shape(tmp_path):
    tr = make_trace(n=5, crash_class=3)
    path = tmp_path / "t.csv"
    save_trace(tr, path)
    raw = path.read_bytes().decode("utf-8")
    lines = raw.split("\n")
    assert lines[0] == "# aeroguard-trace v1; rate_hz=100; crash_class=3; seed=99"
    assert lines[1] == "t,a,b,c,phase"
    assert lines[2].startswith("0.000000,")
    assert lines[3].startswith("0.010000,")
    assert "\r" not in raw


def test_load_trace_error_lines(tmp_path):
    path = tmp_path / "bad.csv"
    good = "# aeroguard-trace v1; rate_hz=100; crash_class=0; seed=1\nt,a,phase\n"

    path.write_text("nonsense\n")
    with pytest.raises(FormatError, match="line 1"):
        load_trace(path)

    path.write_text("# aeroguard-trace v1; rate_hz=100\nt,a,phase\n0.0,1.0,H\n")
    with pytest.raises(FormatError, match="line 1"):
        load_trace(path)

    path.write_text(good.replace("t,a,phase", "a,b"))
    with pytest.raises(FormatError, match="line 2"):
        load_trace(path)

    path.write_text(good + "0.0,1.0,Q\n")
    with pytest.raises(FormatError, match="line 3.*phase"):
        load_trace(path)

    path.write_text(good + "0.0,1.0,H\n0.01,oops,H\n")
    with pytest.raises(FormatError, match="line 4"):
        load_trace(path)

    path.write_text(good + "0.0,1.0,2.0,H\n")
    with pytest.raises(FormatError, match="line 3"):
        load_trace(path)

    path.write_text(good)
    with pytest.raises(FormatError, match="no data rows"):
        load_trace(path)


def test_select_channels_projects_in_order():
    tr = make_trace(channels=("a", "b", "c"))
    sub = select_channels(tr, ["c", "a"])
    assert sub.channel_names == ("c", "a")
    np.testing.assert_array_equal(sub.samples[:, 0], tr.samples[:, 2])
    np.testing.assert_array_equal(sub.samples[:, 1], tr.samples[:, 0])
    with pytest.raises(ChannelError, match="bogus"):
        select_channels(tr, ["bogus"])


def test_window_count_formula():
    assert window_count(1000, 100, 10) == 91
    assert window_count(100, 100, 10) == 1
    assert window_count(109, 100, 10) == 1
    assert window_count(110, 100, 10) == 2


@settings(max_examples=60, deadline=None)
@given(
    length=st.integers(1, 400),
    window=st.integers(1, 400),
    stride=st.integers(1, 30),
)
def test_segment_count_and_coverage(length, window, stride):
    if length < window:
        with pytest.raises(ContractError):
            segment(make_trace(n=length), window, stride)
        return
    wins = segment(make_trace(n=length), window, stride)
    assert len(wins) == (length - window) // stride + 1
    assert wins[-1].start + window <= length
    # one more window would overrun
    assert wins[-1].start + stride + window > length
    for j, w in enumerate(wins):
        assert w.start == j * stride
        assert w.values.shape == (window, 3)


def test_segment_values_match_source():
    tr = make_trace(n=60)
    wins = segment(tr, 20, 10)
    np.testing.assert_array_equal(wins[2].values, tr.samples[20:40])
    # windows own their data
    wins[0].values[0, 0] = 1e9
    assert tr.samples[0, 0] != np.float32(1e9)


def test_label_windows_fifty_percent_rule():
    # 150 samples: U 0..19, H 20..99, F 100..139, P 140..149, class 6
    tr = make_trace(n=150, crash_class=6, phases=fault_phases(150, 100, 140))
    wins = label_windows(segment(tr, 40, 10), tr)
    by_start = {w.start: w for w in wins}
    assert by_start[0].kind == "normal" and by_start[0].label == 0
    assert by_start[50].kind == "normal"      # 50..89, all H
    assert by_start[70].kind == "mixed"       # 10 fault samples = 25%
    assert by_start[80].kind == "fault"       # exactly 20 = 50%
    assert by_start[80].label == 6
    assert by_start[100].kind == "fault"      # fully inside F
    assert by_start[110].kind == "fault"      # 30 F + 10 P
    # start beyond half the transition: 20 F samples exactly at start 120?
    # 120..139 F (20), 140..149 P -> 50% -> fault
    if 120 in by_start:
        assert by_start[120].kind == "fault"


def test_label_windows_class_zero_with_fault_phase_rejected():
    tr = make_trace(n=150, crash_class=0, phases=fault_phases(150, 100, 140))
    with pytest.raises(ContractError):
        label_windows(segment(tr, 40, 10), tr)


def test_normalization_population_std():
    # values 0 and 2: mean 1, population std 1 (sample std would be sqrt(2))
    vals = np.array([[[0.0], [2.0]]])
    stats = fit_normalization(vals)
    assert stats.mean[0] == pytest.approx(1.0)
    assert stats.std[0] == pytest.approx(1.0)
    out = apply_normalization(vals, stats)
    np.testing.assert_allclose(out, [[[-1.0], [1.0]]])
    assert out.dtype == np.float32


def test_normalization_uses_train_stats_only():
    rng = np.random.default_rng(0)
    train = rng.normal(loc=5.0, scale=2.0, size=(50, 10, 2))
    test = rng.normal(loc=-1.0, scale=0.5, size=(20, 10, 2))
    stats = fit_normalization(train)
    zt = apply_normalization(train, stats)
    zs = apply_normalization(test, stats)
    assert abs(zt.mean()) < 1e-6
    assert abs(zt.std() - 1.0) < 1e-6
    # test set keeps its shift relative to training stats
    assert zs.mean() < -2.0


def test_normalization_degenerate_channel():
    vals = np.zeros((4, 5, 3))
    vals[..., 0] = np.random.default_rng(0).normal(size=(4, 5))
    vals[..., 2] = np.random.default_rng(1).normal(size=(4, 5))
    with pytest.raises(DegenerateChannelError, match="gyro_x"):
        fit_normalization(vals, channel_names=("acc_x", "gyro_x", "acc_y"))
    with pytest.raises(NumericError):
        fit_normalization(np.array([[[np.nan]]]))


def test_normalize_windows_marks_flag():
    tr = make_trace(n=50)
    wins = segment(tr, 10, 10)
    stats = fit_normalization(stack_windows(wins)[0])
    normalize_windows(wins, stats)
    assert all(w.normalized for w in wins)


def test_split_global_21_9():
    traces = [make_trace(trace_id=i, rng_seed=i) for i in range(30)]
    train, test = split_flights(traces, 0.7, seed=5)
    assert len(train) == 21 and len(test) == 9
    ids = sorted(t.trace_id for t in train + test)
    assert ids == list(range(30))


def test_split_stratified_300_runs():
    traces = [
        make_trace(trace_id=i, crash_class=(i % 15) + 1, rng_seed=i,
                   phases=fault_phases(150, 100, 140))
        for i in range(300)
    ]
    train, test = split_flights(traces, 0.7, seed=2)
    assert len(train) == 210 and len(test) == 90
    for cls in range(1, 16):
        assert sum(t.crash_class == cls for t in train) == 14
        assert sum(t.crash_class == cls for t in test) == 6


def test_split_30_runs_15_classes_hits_global_target():
    traces = [
        make_trace(trace_id=i, crash_class=(i % 15) + 1, rng_seed=i,
                   phases=fault_phases(150, 100, 140))
        for i in range(30)
    ]
    train, test = split_flights(traces, 0.7, seed=3)
    assert len(train) == 21 and len(test) == 9
    for cls in range(1, 16):
        n = sum(t.crash_class == cls for t in train)
        assert n in (1, 2)  # within one flight of 1.4


def test_split_deterministic_and_seed_sensitive():
    traces = [make_trace(trace_id=i, rng_seed=i) for i in range(30)]
    a1 = [t.trace_id for t in split_flights(traces, 0.7, seed=11)[0]]
    a2 = [t.trace_id for t in split_flights(traces, 0.7, seed=11)[0]]
    b = [t.trace_id for t in split_flights(traces, 0.7, seed=12)[0]]
    assert a1 == a2
    assert a1 != b


def test_split_warns_on_thin_class():
    traces = [make_trace(trace_id=i, rng_seed=i) for i in range(10)]
    lone = make_trace(trace_id=10, crash_class=3, rng_seed=10,
                      phases=fault_phases(150, 100, 140))
    with pytest.warns(UserWarning, match="fewer than two"):
        train, test = split_flights(traces + [lone], 0.7, seed=0)
    assert len(train) + len(test) == 11


def test_split_rejects_bad_fraction():
    traces = [make_trace(trace_id=i) for i in range(4)]
    with pytest.raises(ContractError):
        split_flights(traces, 1.0)
    with pytest.raises(ContractError):
        split_flights(traces[:1], 0.5)


def test_stack_windows():
    tr = make_trace(n=60, crash_class=0)
    wins = segment(tr, 20, 10)
    vals, labels = stack_windows(wins)
    assert vals.shape == (5, 20, 3)
    assert labels.shape == (5,)
    with pytest.raises(ContractError):
        stack_windows([])
