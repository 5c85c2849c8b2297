"""Simulator physics, controller, fault injection, and campaign tests."""

import itertools
import math

import numpy as np
import pytest

from aeroguard import flightsim as fs
from aeroguard.datapipe import CHANNELS
from aeroguard.errors import ConfigError, ContractError, NumericError
from aeroguard.flightsim import (
    CrashScenario,
    FlightProfile,
    HoverSetpoint,
    PidHoverController,
    QuadrotorParams,
    compute_accelerations,
    hover_state,
    inject_fault,
    level_state,
    mechanical_energy,
    quat_rotate,
    quat_rotate_inv,
    quat_to_euler,
    run_campaign,
    run_seed,
    simulate_run,
    step_dynamics,
    synthesize_sensors,
    worker_count,
)

DT = 1e-3
NO_DRAG = QuadrotorParams(linear_drag=0.0, angular_drag=0.0)
QUIET = QuadrotorParams(noise_std=(0.0,) * 18, init_perturbation=0.0,
                        disturbance_force_std=0.0, disturbance_torque_std=0.0)


def quat_about(axis, angle):
    q = np.zeros(4)
    q[0] = math.cos(angle / 2.0)
    q[1 + axis] = math.sin(angle / 2.0)
    return q


class TestQuaternions:
    def test_rotate_90_about_z_maps_x_to_y(self):
        q = quat_about(2, math.pi / 2.0)
        v = quat_rotate(q, np.array([1.0, 0.0, 0.0]))
        assert np.allclose(v, [0.0, 1.0, 0.0], atol=1e-12)

    def test_rotate_inverse_round_trips(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            v = rng.normal(size=3)
            back = quat_rotate_inv(q, quat_rotate(q, v))
            assert np.allclose(back, v, atol=1e-12)

    def test_euler_recovers_single_axis_angles(self):
        roll, pitch, yaw = quat_to_euler(quat_about(0, 0.3))
        assert np.allclose([roll, pitch, yaw], [0.3, 0.0, 0.0], atol=1e-12)
        roll, pitch, yaw = quat_to_euler(quat_about(1, -0.2))
        assert np.allclose([roll, pitch, yaw], [0.0, -0.2, 0.0], atol=1e-12)
        roll, pitch, yaw = quat_to_euler(quat_about(2, 1.1))
        assert np.allclose([roll, pitch, yaw], [0.0, 0.0, 1.1], atol=1e-12)


class TestDynamics:
    def test_hover_equilibrium_accelerations_vanish(self):
        state = hover_state(NO_DRAG, altitude=4.0)
        lin, ang = compute_accelerations(state, NO_DRAG)
        assert np.abs(lin).max() < 1e-12
        assert np.abs(ang).max() == 0.0

    def test_hover_persists_open_loop(self):
        params = QuadrotorParams()  # drag is irrelevant at zero velocity
        state = hover_state(params, altitude=4.0)
        cmd = np.full(4, params.hover_rotor_speed())
        for _ in range(1000):
            state = step_dynamics(state, cmd, params, DT)
        assert np.abs(state.position - [0.0, 0.0, 4.0]).max() < 1e-9

    def test_free_fall_is_exactly_gravity(self):
        state = level_state(altitude=10.0)
        lin, ang = compute_accelerations(state, NO_DRAG)
        assert np.abs(lin - [0.0, 0.0, -9.81]).max() < 1e-9
        assert np.abs(ang).max() == 0.0

    def test_torques_match_arm_cross_product(self):
        # each rotor alone: torque must equal r x F plus the spin reaction
        kt = NO_DRAG.thrust_coeff
        kq = NO_DRAG.torque_coeff
        arm = NO_DRAG.arm_length
        inertia = np.array(NO_DRAG.inertia)
        positions = [(arm, 0, 0), (0, arm, 0), (-arm, 0, 0), (0, -arm, 0)]
        for i in range(4):
            state = level_state()
            state.rotor_speed[i] = 300.0
            _, ang = compute_accelerations(state, NO_DRAG)
            torque = ang * inertia  # omega = 0, so no gyroscopic term
            force = kt * 300.0**2
            expect = np.cross(positions[i], [0.0, 0.0, force])
            expect[2] = -fs.SPIN_DIR[i] * kq * 300.0**2
            assert np.allclose(torque, expect, rtol=1e-12, atol=1e-15)

    def test_energy_and_angular_momentum_ballistic_tumble(self):
        state = level_state(altitude=40.0)
        state.velocity[:] = [2.0, 1.0, 3.0]
        state.angular_velocity[:] = [1.0, 0.5, 0.25]
        inertia = np.array(NO_DRAG.inertia)
        e0 = mechanical_energy(state, NO_DRAG)
        l0 = quat_rotate(state.orientation, inertia * state.angular_velocity)
        for _ in range(1000):
            state = step_dynamics(state, np.zeros(4), NO_DRAG, DT)
        e1 = mechanical_energy(state, NO_DRAG)
        l1 = quat_rotate(state.orientation, inertia * state.angular_velocity)
        assert abs(e1 - e0) / abs(e0) < 1e-3
        assert np.linalg.norm(l1 - l0) / np.linalg.norm(l0) < 1e-3

    def test_quaternion_stays_normalized(self):
        state = level_state()
        state.angular_velocity[:] = [3.0, -2.0, 1.0]
        for _ in range(2000):
            state = step_dynamics(state, np.zeros(4), NO_DRAG, DT)
        assert abs(np.linalg.norm(state.orientation) - 1.0) < 1e-9

    def test_position_update_uses_new_velocity(self):
        # semi-implicit: one step from rest moves z by -g*dt^2, not zero
        state = level_state(altitude=5.0)
        state = step_dynamics(state, np.zeros(4), NO_DRAG, DT)
        expect = 5.0 + DT * (DT * -9.81)
        assert state.position[2] == expect
        assert state.velocity[2] == DT * -9.81

    def test_rotor_lag_follows_discrete_first_order_curve(self):
        params = QuadrotorParams()
        state = level_state()
        target = 500.0
        cmd = np.full(4, target)
        a = DT / params.rotor_tau
        for n in range(1, 101):
            state = step_dynamics(state, cmd, params, DT)
            expect = target * (1.0 - (1.0 - a) ** n)
            assert abs(state.rotor_speed[0] - expect) < 1e-9
            # forward-Euler lag rises at least as fast as the continuous curve
            assert state.rotor_speed[0] >= target * (1.0 - math.exp(-a * n)) - 1e-9

    def test_batched_step_matches_single(self):
        rng = np.random.default_rng(11)
        singles = []
        for r in range(3):
            st = level_state(altitude=float(r))
            st.velocity[:] = rng.normal(size=3)
            st.angular_velocity[:] = rng.normal(size=3) * 0.5
            st.rotor_speed[:] = rng.uniform(0, 600, size=4)
            singles.append(st)
        batch = level_state((3,))
        for r, st in enumerate(singles):
            batch.position[r] = st.position
            batch.velocity[r] = st.velocity
            batch.orientation[r] = st.orientation
            batch.angular_velocity[r] = st.angular_velocity
            batch.rotor_speed[r] = st.rotor_speed
        cmd = rng.uniform(0, 700, size=(3, 4))
        params = QuadrotorParams()
        for _ in range(50):
            batch = step_dynamics(batch, cmd, params, DT)
            singles = [
                step_dynamics(st, cmd[r], params, DT) for r, st in enumerate(singles)
            ]
        for r, st in enumerate(singles):
            assert np.array_equal(batch.position[r], st.position)
            assert np.array_equal(batch.orientation[r], st.orientation)
            assert np.array_equal(batch.rotor_speed[r], st.rotor_speed)


class TestController:
    def test_exact_hover_commands_hover_speed(self):
        params = QuadrotorParams()
        ctrl = PidHoverController(params)
        state = hover_state(params, altitude=4.0)
        cmd = ctrl.update(state, HoverSetpoint(4.0), DT)
        assert np.allclose(cmd, params.hover_rotor_speed(), rtol=1e-12)
        assert cmd.min() == cmd.max()

    def test_below_setpoint_raises_collective(self):
        params = QuadrotorParams()
        ctrl = PidHoverController(params)
        state = hover_state(params, altitude=3.0)
        cmd = ctrl.update(state, HoverSetpoint(4.0), DT)
        assert cmd.min() > params.hover_rotor_speed()

    def test_roll_tilt_produces_righting_command_split(self):
        params = QuadrotorParams()
        ctrl = PidHoverController(params)
        state = hover_state(params, altitude=4.0)
        state.orientation = quat_about(0, 0.1)  # rolled left-side-up
        cmd = ctrl.update(state, HoverSetpoint(4.0), DT)
        # righting torque is -x: rotor 3 must outpull rotor 1
        assert cmd[3] > cmd[1]
        assert np.isclose(cmd[0], cmd[2])

    def test_commands_clamped_to_rotor_range(self):
        params = QuadrotorParams()
        ctrl = PidHoverController(params)
        state = hover_state(params, altitude=0.0)
        high = ctrl.update(state, HoverSetpoint(100.0), DT)
        assert high.max() <= params.max_rotor_speed
        ctrl.reset(())
        state = hover_state(params, altitude=50.0)
        low = ctrl.update(state, HoverSetpoint(0.0), DT)
        assert low.min() >= 0.0

    def test_integral_respects_clamp(self):
        params = QuadrotorParams()
        ctrl = PidHoverController(params)
        ctrl.reset(())
        state = hover_state(params, altitude=0.0)
        for _ in range(200):
            ctrl.update(state, HoverSetpoint(1000.0), dt=1.0)
        assert np.abs(ctrl.integral).max() <= ctrl.gains.integral_limit

    def test_hover_drift_under_closed_loop(self):
        # noise-free, perfectly initialized hover must hold position
        params = QuadrotorParams()
        ctrl = PidHoverController(params)
        ctrl.reset(())
        state = hover_state(params, altitude=4.0)
        setpoint = HoverSetpoint(4.0)
        worst = 0.0
        for _ in range(5000):
            cmd = ctrl.update(state, setpoint, DT)
            state = step_dynamics(state, cmd, params, DT)
            err = np.abs(state.position - [0.0, 0.0, 4.0]).max()
            worst = max(worst, err)
        assert worst < 1e-6

    def test_altitude_step_settles_within_band(self):
        params = QuadrotorParams()
        ctrl = PidHoverController(params)
        ctrl.reset(())
        state = hover_state(params, altitude=3.0)
        setpoint = HoverSetpoint(4.0)
        settled_at = None
        for step in range(4000):
            cmd = ctrl.update(state, setpoint, DT)
            state = step_dynamics(state, cmd, params, DT)
            if abs(state.position[2] - 4.0) > 0.02:
                settled_at = None
            elif settled_at is None:
                settled_at = (step + 1) * DT
        assert settled_at is not None and settled_at < 4.0


class TestFaultInjection:
    def test_classes_enumerate_all_nonempty_rotor_subsets(self):
        subsets = set()
        for cls in range(1, 16):
            rotors = CrashScenario(cls, onset_time=1.0).failed_rotors
            assert rotors
            subsets.add(rotors)
        every = {
            tuple(sorted(c))
            for n in range(1, 5)
            for c in itertools.combinations(range(4), n)
        }
        assert subsets == every

    def test_commands_untouched_before_onset(self):
        cmd = np.array([100.0, 200.0, 300.0, 400.0])
        out = inject_fault(cmd, CrashScenario(5, onset_time=2.0), t=1.999)
        assert out is cmd

    def test_failed_rotors_zeroed_after_onset(self):
        cmd = np.array([100.0, 200.0, 300.0, 400.0])
        out = inject_fault(cmd, CrashScenario(5, onset_time=2.0), t=2.0)
        assert np.array_equal(out, [0.0, 200.0, 0.0, 400.0])

    def test_all_four_class_silences_everything(self):
        cmd = np.full(4, 550.0)
        out = inject_fault(cmd, CrashScenario(15, onset_time=0.5), t=3.0)
        assert np.array_equal(out, np.zeros(4))

    def test_class_zero_never_touches_commands(self):
        cmd = np.full(4, 550.0)
        assert inject_fault(cmd, CrashScenario(0), t=99.0) is cmd

    def test_failed_rotor_decays_along_lag_curve(self):
        # injection happens every tick, so the rotor can only spin down
        params = QuadrotorParams()
        scenario = CrashScenario(8, onset_time=0.0)  # rotor 3
        state = hover_state(params, altitude=4.0)
        w0 = state.rotor_speed[3]
        a = DT / params.rotor_tau
        for n in range(1, 51):
            cmd = inject_fault(np.full(4, w0), scenario, t=n * DT)
            state = step_dynamics(state, cmd, params, DT)
            assert state.rotor_speed[3] <= w0 * (1.0 - a) ** n + 1e-12
        assert state.rotor_speed[3] < 0.1 * w0

    def test_scenario_validation(self):
        with pytest.raises(ContractError):
            CrashScenario(16, onset_time=1.0)
        with pytest.raises(ContractError):
            CrashScenario(-1, onset_time=1.0)
        with pytest.raises(ContractError):
            CrashScenario(3)  # fault without an onset


class TestParamsValidation:
    def test_rejects_nonpositive_constants(self):
        with pytest.raises(ConfigError):
            QuadrotorParams(mass=0.0)
        with pytest.raises(ConfigError):
            QuadrotorParams(rotor_tau=-0.01)
        with pytest.raises(ConfigError):
            QuadrotorParams(inertia=(1e-3, -1e-3, 1e-3))
        with pytest.raises(ConfigError):
            QuadrotorParams(linear_drag=-1.0)

    def test_rejects_incompatible_rates(self):
        with pytest.raises(ConfigError):
            QuadrotorParams(physics_hz=1000, sensor_hz=300)
        with pytest.raises(ConfigError):
            QuadrotorParams(physics_hz=500, control_hz=1000)

    def test_rejects_bad_noise_vector(self):
        with pytest.raises(ConfigError):
            QuadrotorParams(noise_std=(0.1,) * 17)
        with pytest.raises(ConfigError):
            QuadrotorParams(noise_std=(-0.1,) + (0.1,) * 17)

    def test_rejects_bad_disturbance_settings(self):
        with pytest.raises(ConfigError):
            QuadrotorParams(disturbance_force_std=-0.1)
        with pytest.raises(ConfigError):
            QuadrotorParams(disturbance_torque_std=-0.1)
        with pytest.raises(ConfigError):
            QuadrotorParams(disturbance_tau=0.0)

    def test_profile_rejects_transition_longer_than_capture(self):
        with pytest.raises(ConfigError):
            FlightProfile(post_fault_s=1.0, transition_s=2.0)


class TestSensorSynthesis:
    def test_specific_force_frames(self):
        # hover reads +g up, free fall reads zero, rolled hover reads +g on y
        n = 3
        quat = np.stack(
            [quat_about(0, 0.0), quat_about(0, 0.0), quat_about(0, math.pi / 2)]
        )
        lin = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -9.81], [0.0, 0.0, 0.0]])
        history = fs.StateHistory(
            times=np.arange(n) / 100.0,
            position=np.zeros((n, 3)),
            velocity=np.zeros((n, 3)),
            orientation=quat,
            angular_velocity=np.zeros((n, 3)),
            lin_acc=lin,
            ang_acc=np.zeros((n, 3)),
            crash_class=0,
            onset_time=None,
            transition_s=2.0,
            climb_s=0.0,
            seed=1,
            trace_id=0,
        )
        trace = synthesize_sensors(history, QUIET, np.random.default_rng(0))
        acc = trace.samples[:, 0:3]
        assert np.allclose(acc[0], [0.0, 0.0, 9.81], atol=1e-6)
        assert np.allclose(acc[1], [0.0, 0.0, 0.0], atol=1e-6)
        assert np.allclose(acc[2], [0.0, 9.81, 0.0], atol=1e-6)

    def test_ten_second_flight_gives_thousand_samples(self):
        profile = FlightProfile(climb_s=2.0, hover_s=8.0, post_fault_s=0.0, transition_s=0.0)
        trace = simulate_run(CrashScenario(0), QUIET, profile, seed=4)
        assert trace.samples.shape == (1000, len(CHANNELS))
        assert trace.channel_names == CHANNELS

    def test_hover_accelerometer_reads_plus_g(self):
        trace = simulate_run(CrashScenario(0), QUIET, FlightProfile(), seed=4)
        tail = trace.samples[900:1000]  # settled hover before t=10
        assert np.allclose(tail[:, 0:3].mean(axis=0), [0.0, 0.0, 9.81], atol=5e-3)
        assert np.abs(tail[:, 0:3] - [0.0, 0.0, 9.81]).max() < 0.05

    def test_phase_layout_default_profile(self):
        trace = simulate_run(CrashScenario(1, onset_time=10.0), QUIET, seed=2)
        counts = {ph: int((trace.phase == ph).sum()) for ph in "UHFP"}
        assert counts == {"U": 200, "H": 800, "F": 200, "P": 100}
        # phases come in one contiguous block each
        joined = "".join(trace.phase)
        assert joined == "U" * 200 + "H" * 800 + "F" * 200 + "P" * 100

    def test_class_zero_has_no_fault_phases(self):
        trace = simulate_run(CrashScenario(0), QUIET, seed=2)
        assert set(trace.phase) == {"U", "H"}
        assert trace.crash_class == 0

    def test_noise_follows_run_seed(self):
        a = simulate_run(CrashScenario(0), seed=9)
        b = simulate_run(CrashScenario(0), seed=9)
        c = simulate_run(CrashScenario(0), seed=10)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)


class TestDisturbance:
    """Correlated gusts shake the hover without destabilizing it."""

    def _hover_slice(self, params, seed=5):
        trace = simulate_run(CrashScenario(0), params, seed=seed)
        cols = {n: i for i, n in enumerate(trace.channel_names)}
        hover = trace.samples[400:1000]
        return trace, hover, cols

    def test_gusts_dominate_quiet_hover(self):
        gusty = QuadrotorParams(noise_std=(0.0,) * 18, init_perturbation=0.0)
        _, hover, cols = self._hover_slice(gusty)
        _, still, _ = self._hover_slice(QUIET)
        for ch in ("acc_x", "acc_y", "gyro_x", "gyro_y", "gyro_z"):
            assert hover[:, cols[ch]].var() > 1e-4
            assert still[:, cols[ch]].var() < 1e-12

    def test_gust_response_is_smooth(self):
        # OU correlation time 0.3 s vs the 10 ms sample interval: successive
        # samples must be strongly correlated, unlike white sensor noise
        gusty = QuadrotorParams(noise_std=(0.0,) * 18, init_perturbation=0.0)
        _, hover, cols = self._hover_slice(gusty)
        for ch in ("acc_x", "gyro_y"):
            x = hover[:, cols[ch]].astype(np.float64)
            x = x - x.mean()
            r1 = (x[1:] * x[:-1]).mean() / x.var()
            assert r1 > 0.8, (ch, r1)

    def test_hover_altitude_still_held(self):
        gusty = QuadrotorParams(noise_std=(0.0,) * 18, init_perturbation=0.0)
        _, hover, cols = self._hover_slice(gusty)
        assert np.abs(hover[:, cols["pos_z"]] - 4.0).max() < 0.5


@pytest.fixture(scope="module")
def small_campaign():
    return run_campaign(30, seed=7)


class TestCampaign:
    def test_round_robin_class_assignment(self, small_campaign):
        per_class = {c: 0 for c in range(1, 16)}
        for rec in small_campaign.records:
            per_class[rec.crash_class] += 1
        assert all(n == 2 for n in per_class.values())
        assert [r.index for r in small_campaign.records] == list(range(30))

    def test_all_runs_complete(self, small_campaign):
        assert all(r.status == "ok" for r in small_campaign.records)
        assert len(small_campaign.traces) == 30

    def test_traces_carry_reproducible_seeds(self, small_campaign):
        rec = small_campaign.records[4]
        again = simulate_run(
            CrashScenario(rec.crash_class, onset_time=10.0),
            seed=rec.seed,
            trace_id=rec.index,
        )
        assert np.array_equal(again.samples, rec.trace.samples)

    def test_crash_signature_variance_jump(self, small_campaign):
        # single-rotor fault: acceleration and attitude channels blow up
        rec = next(r for r in small_campaign.records if r.crash_class == 1)
        tr = rec.trace
        hover = tr.samples[tr.phase == "H"]
        post = tr.samples[(tr.phase == "F") | (tr.phase == "P")]
        for name in ("acc_x", "acc_y", "acc_z", "roll", "pitch", "yaw"):
            i = CHANNELS.index(name)
            assert post[:, i].var() > 10.0 * hover[:, i].var(), name

    def test_campaign_bytes_deterministic(self):
        profile = FlightProfile(climb_s=1.0, hover_s=2.0, post_fault_s=2.0)
        a = run_campaign(8, classes=[1, 2, 3], seed=5, profile=profile)
        b = run_campaign(8, classes=[1, 2, 3], seed=5, profile=profile)
        c = run_campaign(8, classes=[1, 2, 3], seed=5, profile=profile, chunk=3)
        for x, y in zip(a.records, b.records):
            assert np.array_equal(x.trace.samples, y.trace.samples)
        for x, y in zip(a.records, c.records):
            assert np.array_equal(x.trace.samples, y.trace.samples)

    def test_thread_count_leaves_bytes_alone(self, monkeypatch):
        profile = FlightProfile(climb_s=1.0, hover_s=2.0, post_fault_s=2.0)
        a = run_campaign(6, classes=[1, 4], seed=5, profile=profile, chunk=2)
        monkeypatch.setenv("AEROGUARD_THREADS", "3")
        b = run_campaign(6, classes=[1, 4], seed=5, profile=profile, chunk=2)
        for x, y in zip(a.records, b.records):
            assert np.array_equal(x.trace.samples, y.trace.samples)

    def test_run_seed_is_stable_and_distinct(self):
        seeds = [run_seed(7, i) for i in range(100)]
        assert seeds == [run_seed(7, i) for i in range(100)]
        assert len(set(seeds)) == 100
        assert run_seed(8, 0) != run_seed(7, 0)

    def test_diverging_run_is_recorded_not_raised(self, monkeypatch):
        def poisoned(state, params):
            shape = state.position.shape
            return np.full(shape, np.nan), np.full(shape, np.nan)

        monkeypatch.setattr(fs, "compute_accelerations", poisoned)
        profile = FlightProfile(climb_s=1.0, hover_s=1.0, post_fault_s=1.0, transition_s=1.0)
        result = run_campaign(3, classes=[1], seed=0, profile=profile)
        assert all(r.status == "failed" for r in result.records)
        assert "non-finite" in result.records[0].reason
        assert result.traces == []

    def test_diverging_single_run_raises(self, monkeypatch):
        def poisoned(state, params):
            shape = state.position.shape
            return np.full(shape, np.nan), np.full(shape, np.nan)

        monkeypatch.setattr(fs, "compute_accelerations", poisoned)
        with pytest.raises(NumericError, match="non-finite"):
            simulate_run(CrashScenario(0), seed=1)

    def test_argument_validation(self):
        with pytest.raises(ContractError):
            run_campaign(0)
        with pytest.raises(ContractError):
            run_campaign(2, classes=[16])

    def test_worker_count_parsing(self, monkeypatch):
        monkeypatch.delenv("AEROGUARD_THREADS", raising=False)
        assert worker_count() == 1
        monkeypatch.setenv("AEROGUARD_THREADS", "4")
        assert worker_count() == 4
        monkeypatch.setenv("AEROGUARD_THREADS", "0")
        assert worker_count() == 1
        monkeypatch.setenv("AEROGUARD_THREADS", "lots")
        with pytest.raises(ConfigError):
            worker_count()


class TestTraceIntegration:
    def test_simulated_trace_survives_disk_round_trip(self, tmp_path):
        from aeroguard.datapipe import load_trace, save_trace

        trace = simulate_run(CrashScenario(9, onset_time=10.0), seed=21, trace_id=3)
        path = tmp_path / "run3.csv"
        save_trace(trace, path)
        back = load_trace(path, trace_id=3)
        assert np.array_equal(back.samples, trace.samples)
        assert np.array_equal(back.phase, trace.phase)
        assert back.crash_class == 9
        assert back.seed == trace.seed
