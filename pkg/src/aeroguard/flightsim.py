"""Quadrotor fault-injection simulator.

Rigid-body Newton-Euler dynamics integrated with semi-implicit Euler at a
1 kHz physics rate, a cascaded PID hover controller, per-rotor fault
injection, and sensor synthesis decimated to 100 Hz with additive Gaussian
noise.

Geometry is a plus configuration, body frame x forward / y left / z up:

    rotor 0 at (+L, 0)   spin +z
    rotor 1 at (0, +L)   spin -z
    rotor 2 at (-L, 0)   spin +z
    rotor 3 at (0, -L)   spin -z

Thrust of rotor i is k_t * w_i^2 along body z; the air drag reaction of a
rotor spinning in direction d_i contributes -d_i * k_q * w_i^2 of body yaw
torque, so at hover the four reactions cancel.

There is no ground plane: the post-fault capture window follows the vehicle
through its tumbling fall, which is where the crash signature lives.

Every state function is written to broadcast over leading axes, so the same
code advances one vehicle (shape [3] vectors) or a whole campaign in
lockstep (shape [runs, 3]).  Campaign randomness is limited to per-run
initial perturbations and sensor noise, both drawn from a per-run generator
derived from the campaign seed, so a run's bytes do not depend on how the
campaign was batched.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .datapipe import CHANNELS, FlightTrace
from .errors import ConfigError, ContractError, NumericError

# rotor spin directions; opposite pairs rotate the same way
SPIN_DIR = np.array([1.0, -1.0, 1.0, -1.0])


@dataclass
class QuadrotorParams:
    """Physical constants, loop rates, and sensor noise levels."""

    mass: float = 0.5                 # kg
    arm_length: float = 0.12          # m, hub to rotor axis
    inertia: tuple = (2.5e-3, 2.5e-3, 4.5e-3)  # kg m^2, body-axis diagonal
    thrust_coeff: float = 4.0e-6      # N / (rad/s)^2
    torque_coeff: float = 6.5e-8      # N m / (rad/s)^2
    gravity: float = 9.81             # m/s^2
    rotor_tau: float = 0.02           # s, first-order rotor lag
    linear_drag: float = 0.25         # N s/m
    angular_drag: float = 2.0e-3      # N m s/rad
    max_rotor_speed: float = 950.0    # rad/s command clamp
    physics_hz: int = 1000
    control_hz: int = 1000
    sensor_hz: int = 100
    noise_std: tuple = (
        0.05, 0.05, 0.05,       # acc, m/s^2
        0.02, 0.02, 0.02,       # gyro, rad/s
        0.5, 0.5, 0.5,          # angular acceleration, rad/s^2
        0.02, 0.02, 0.02,       # velocity, m/s
        0.01, 0.01, 0.01,       # position, m
        0.005, 0.005, 0.005,    # attitude, rad
    )
    init_perturbation: float = 0.02   # std of initial xy offset (m) and tilt (rad)
    # turbulence: an Ornstein-Uhlenbeck gust force (world frame, N) and
    # torque (body frame, N*m) with a shared correlation time
    disturbance_force_std: float = 0.15
    disturbance_torque_std: float = 0.004
    disturbance_tau: float = 0.3

    def __post_init__(self):
        positive = {
            "mass": self.mass,
            "arm_length": self.arm_length,
            "thrust_coeff": self.thrust_coeff,
            "torque_coeff": self.torque_coeff,
            "gravity": self.gravity,
            "rotor_tau": self.rotor_tau,
            "max_rotor_speed": self.max_rotor_speed,
            "physics_hz": self.physics_hz,
            "control_hz": self.control_hz,
            "sensor_hz": self.sensor_hz,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if len(self.inertia) != 3 or any(i <= 0 for i in self.inertia):
            raise ConfigError("inertia needs three positive diagonal entries")
        if self.linear_drag < 0 or self.angular_drag < 0:
            raise ConfigError("drag coefficients cannot be negative")
        if self.physics_hz % self.sensor_hz:
            raise ConfigError("physics_hz must be a multiple of sensor_hz")
        if self.physics_hz % self.control_hz:
            raise ConfigError("physics_hz must be a multiple of control_hz")
        if len(self.noise_std) != len(CHANNELS):
            raise ConfigError(
                f"noise_std needs {len(CHANNELS)} entries, got {len(self.noise_std)}"
            )
        if any(s < 0 for s in self.noise_std) or self.init_perturbation < 0:
            raise ConfigError("noise levels cannot be negative")
        if self.disturbance_force_std < 0 or self.disturbance_torque_std < 0:
            raise ConfigError("disturbance levels cannot be negative")
        if self.disturbance_tau <= 0:
            raise ConfigError("disturbance_tau must be positive")

    def hover_rotor_speed(self):
        """Rotor speed at which four rotors exactly carry the weight."""
        return math.sqrt(self.mass * self.gravity / (4.0 * self.thrust_coeff))


@dataclass
class QuadrotorState:
    """World-frame position/velocity, body orientation quaternion (w,x,y,z),
    body-frame angular velocity, rotor speeds."""

    position: np.ndarray
    velocity: np.ndarray
    orientation: np.ndarray
    angular_velocity: np.ndarray
    rotor_speed: np.ndarray


def level_state(batch_shape=(), altitude=0.0, rotor_speed=0.0):
    """A motionless, level state (optionally batched)."""
    shape = tuple(batch_shape)
    pos = np.zeros(shape + (3,))
    pos[..., 2] = altitude
    quat = np.zeros(shape + (4,))
    quat[..., 0] = 1.0
    return QuadrotorState(
        position=pos,
        velocity=np.zeros(shape + (3,)),
        orientation=quat,
        angular_velocity=np.zeros(shape + (3,)),
        rotor_speed=np.full(shape + (4,), float(rotor_speed)),
    )


def hover_state(params: QuadrotorParams, altitude, batch_shape=()):
    """Exact hover equilibrium at the given altitude."""
    return level_state(batch_shape, altitude, params.hover_rotor_speed())


# ---------------------------------------------------------------------------
# quaternion helpers (broadcast over leading axes; scalar-first convention)


def quat_normalize(q):
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_conj(q):
    out = q.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def quat_rotate(q, v):
    """Rotate body-frame vector v into the world frame."""
    w = q[..., :1]
    qv = q[..., 1:]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_rotate_inv(q, v):
    """Rotate world-frame vector v into the body frame."""
    return quat_rotate(quat_conj(q), v)


def quat_derivative(q, omega):
    """dq/dt = q (x) (0, omega) / 2 for body-frame angular velocity."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    p, r, s = omega[..., 0], omega[..., 1], omega[..., 2]
    return 0.5 * np.stack(
        [
            -x * p - y * r - z * s,
            w * p + y * s - z * r,
            w * r + z * p - x * s,
            w * s + x * r - y * p,
        ],
        axis=-1,
    )


def body_z_world(q):
    """Third column of the rotation matrix: body z axis in world frame."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y)],
        axis=-1,
    )


def quat_to_euler(q):
    """Roll, pitch, yaw (ZYX convention) from a unit quaternion."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    roll = np.arctan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    pitch = np.arcsin(np.clip(2.0 * (w * y - z * x), -1.0, 1.0))
    yaw = np.arctan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return roll, pitch, yaw


# ---------------------------------------------------------------------------
# dynamics


def compute_accelerations(state: QuadrotorState, params: QuadrotorParams):
    """World-frame linear acceleration (gravity included) and body-frame
    angular acceleration from the current state."""
    kt = params.thrust_coeff
    thrusts = kt * state.rotor_speed**2  # [..., 4]
    total = thrusts.sum(axis=-1, keepdims=True)
    up = body_z_world(state.orientation)
    lin = (total * up - params.linear_drag * state.velocity) / params.mass
    lin = lin + np.array([0.0, 0.0, -params.gravity])

    arm = params.arm_length
    # plus geometry: roll from rotors 1/3, pitch from rotors 2/0
    tau_x = arm * (thrusts[..., 1] - thrusts[..., 3])
    tau_y = arm * (thrusts[..., 2] - thrusts[..., 0])
    tau_z = -params.torque_coeff * (SPIN_DIR * state.rotor_speed**2).sum(axis=-1)
    torque = np.stack([tau_x, tau_y, tau_z], axis=-1)
    torque = torque - params.angular_drag * state.angular_velocity

    inertia = np.asarray(params.inertia)
    omega = state.angular_velocity
    gyro = np.cross(omega, inertia * omega)  # omega x (I omega)
    ang = (torque - gyro) / inertia
    return lin, ang


def step_dynamics(state: QuadrotorState, commands, params: QuadrotorParams, dt,
                  extra_lin=None, extra_ang=None):
    """One semi-implicit Euler step; returns the new state.

    Forces come from the pre-step rotor speeds; velocities update first and
    the new velocities advance the positions.  The quaternion is
    renormalized every step.  ``extra_lin``/``extra_ang`` add external
    (disturbance) accelerations on top of the rigid-body ones.
    """
    lin, ang = compute_accelerations(state, params)
    if extra_lin is not None:
        lin = lin + extra_lin
    if extra_ang is not None:
        ang = ang + extra_ang
    rotor = state.rotor_speed + (dt / params.rotor_tau) * (
        commands - state.rotor_speed
    )
    vel = state.velocity + dt * lin
    pos = state.position + dt * vel
    omega = state.angular_velocity + dt * ang
    quat = quat_normalize(state.orientation + dt * quat_derivative(state.orientation, omega))
    return QuadrotorState(
        position=pos,
        velocity=vel,
        orientation=quat,
        angular_velocity=omega,
        rotor_speed=rotor,
    )


def mechanical_energy(state: QuadrotorState, params: QuadrotorParams):
    """Kinetic plus potential energy (rotors excluded)."""
    m = params.mass
    ke = 0.5 * m * (state.velocity**2).sum(axis=-1)
    pe = m * params.gravity * state.position[..., 2]
    inertia = np.asarray(params.inertia)
    rot = 0.5 * (inertia * state.angular_velocity**2).sum(axis=-1)
    return ke + pe + rot


# ---------------------------------------------------------------------------
# control


@dataclass
class PidGains:
    """Default gains are tuned for the default airframe: a 1 m altitude step
    settles within 2 cm in under 4 s."""

    kp_z: float = 4.0
    kd_z: float = 4.0
    ki_z: float = 0.05
    integral_limit: float = 2.0
    kp_rp: float = 0.55
    kd_rp: float = 0.09
    kp_yaw: float = 0.2
    kd_yaw: float = 0.04


@dataclass
class HoverSetpoint:
    altitude: float


class PidHoverController:
    """Cascaded hover PID.

    Altitude error maps to a desired vertical acceleration and from there to
    collective thrust (with exact weight feedforward, so a perfectly
    initialized hover produces exactly the hover rotor speed).  Quaternion
    attitude error maps to desired body torques, which the plus-geometry mix
    turns into differential per-rotor thrusts.
    """

    def __init__(self, params: QuadrotorParams, gains: PidGains = None):
        self.params = params
        self.gains = gains or PidGains()
        self.integral = 0.0
        p = params
        scale = p.thrust_coeff / (4.0 * p.torque_coeff)
        inv2l = 1.0 / (2.0 * p.arm_length)
        # columns: per-rotor weight of roll, pitch, yaw torque demands
        self.mix_roll = np.array([0.0, inv2l, 0.0, -inv2l])
        self.mix_pitch = np.array([-inv2l, 0.0, inv2l, 0.0])
        self.mix_yaw = -SPIN_DIR * scale
        self.f_max = p.thrust_coeff * p.max_rotor_speed**2

    def reset(self, batch_shape=()):
        self.integral = np.zeros(tuple(batch_shape))

    def update(self, state: QuadrotorState, setpoint: HoverSetpoint, dt):
        """Returns commanded rotor speeds, clamped to [0, max_rotor_speed]."""
        g = self.gains
        p = self.params
        err = setpoint.altitude - state.position[..., 2]
        lim = g.integral_limit
        self.integral = np.clip(self.integral + err * dt, -lim, lim)
        a_des = g.kp_z * err - g.kd_z * state.velocity[..., 2] + g.ki_z * self.integral
        f_total = np.maximum(p.mass * (p.gravity + a_des), 0.0)

        # attitude error to identity (level, yaw zero): small-angle axis-angle
        q = state.orientation
        sign = np.where(q[..., :1] >= 0.0, 1.0, -1.0)
        e_att = 2.0 * sign * q[..., 1:]
        omega = state.angular_velocity
        kp = np.array([g.kp_rp, g.kp_rp, g.kp_yaw])
        kd = np.array([g.kd_rp, g.kd_rp, g.kd_yaw])
        tau_des = -kp * e_att - kd * omega

        thrust = (
            f_total[..., None] / 4.0
            + tau_des[..., 0:1] * self.mix_roll
            + tau_des[..., 1:2] * self.mix_pitch
            + tau_des[..., 2:3] * self.mix_yaw
        )
        thrust = np.clip(thrust, 0.0, self.f_max)
        return np.sqrt(thrust / p.thrust_coeff)


# ---------------------------------------------------------------------------
# fault injection


@dataclass
class CrashScenario:
    """Which rotors fail and when.

    ``crash_class`` encodes the failed subset bitwise: rotor i is failed iff
    bit i of the class is set, so classes 1..15 enumerate every non-empty
    subset of four rotors and 0 means no fault.
    """

    crash_class: int
    onset_time: float = None

    def __post_init__(self):
        if not 0 <= self.crash_class <= 15:
            raise ContractError(f"crash_class {self.crash_class} outside 0..15")
        if self.crash_class and self.onset_time is None:
            raise ContractError("faulted scenario needs an onset time")

    @property
    def failed_rotors(self):
        return tuple(i for i in range(4) if self.crash_class >> i & 1)

    def keep_mask(self):
        mask = np.ones(4)
        for i in self.failed_rotors:
            mask[i] = 0.0
        return mask


def inject_fault(commands, scenario: CrashScenario, t):
    """Zero the commanded speed of failed rotors once the fault is active.

    Applied every control tick, so failed rotors decay along the rotor lag
    curve and stay at zero no matter what the controller asks for.
    """
    if scenario.crash_class == 0 or t < scenario.onset_time:
        return commands
    return commands * scenario.keep_mask()


# ---------------------------------------------------------------------------
# flight profile and sensor synthesis


@dataclass
class FlightProfile:
    """Timeline of a campaign run: climb, hover, fault, post-fault capture.

    The transition region (phase F) spans ``transition_s`` seconds from
    onset; the rest of the post-fault capture is labeled post-crash (P).
    """

    climb_s: float = 2.0
    hover_s: float = 8.0
    post_fault_s: float = 3.0
    transition_s: float = 2.0
    hover_altitude: float = 4.0

    def __post_init__(self):
        if self.transition_s > self.post_fault_s:
            raise ConfigError("transition_s cannot exceed post_fault_s")

    @property
    def onset_time(self):
        return self.climb_s + self.hover_s

    @property
    def duration(self):
        return self.climb_s + self.hover_s + self.post_fault_s


@dataclass
class StateHistory:
    """Ground truth recorded at the sensor rate for one run."""

    times: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    orientation: np.ndarray
    angular_velocity: np.ndarray
    lin_acc: np.ndarray
    ang_acc: np.ndarray
    crash_class: int
    onset_time: float  # None for class 0
    transition_s: float
    climb_s: float
    seed: int
    trace_id: int


def phase_labels(times, climb_s, onset_time, transition_s):
    ph = np.full(len(times), "H", dtype="<U1")
    ph[times < climb_s] = "U"
    if onset_time is not None:
        ph[(times >= onset_time) & (times < onset_time + transition_s)] = "F"
        ph[times >= onset_time + transition_s] = "P"
    return ph


def synthesize_sensors(history: StateHistory, params: QuadrotorParams, rng) -> FlightTrace:
    """Build the 18-channel trace from recorded ground truth.

    The accelerometer measures specific force in the body frame (kinematic
    acceleration minus gravity, rotated into the body), so hover reads
    (0, 0, +g) and free fall reads zero.  Gaussian noise per channel comes
    from the run's own generator.
    """
    q = history.orientation
    g_vec = np.array([0.0, 0.0, -params.gravity])
    spec_force = quat_rotate_inv(q, history.lin_acc - g_vec)
    vel_body = history.velocity  # logged in world frame
    roll, pitch, yaw = quat_to_euler(q)
    clean = np.concatenate(
        [
            spec_force,
            history.angular_velocity,
            history.ang_acc,
            vel_body,
            history.position,
            np.stack([roll, pitch, yaw], axis=-1),
        ],
        axis=-1,
    )
    noisy = clean + rng.standard_normal(clean.shape) * np.asarray(params.noise_std)
    return FlightTrace(
        trace_id=history.trace_id,
        rate_hz=params.sensor_hz,
        channel_names=CHANNELS,
        samples=noisy.astype(np.float32),
        phase=phase_labels(
            history.times, history.climb_s, history.onset_time, history.transition_s
        ),
        crash_class=history.crash_class,
        seed=history.seed,
    )


# ---------------------------------------------------------------------------
# campaign driver


def run_seed(campaign_seed, index):
    """Stable per-run seed derived from the campaign seed."""
    ss = np.random.SeedSequence(entropy=int(campaign_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def _simulate_lockstep(classes, seeds, trace_ids, params, profile):
    """Advance a batch of runs in lockstep; returns per-run StateHistory.

    Content per run depends only on its own seed and class, never on the
    batch composition.
    """
    nrun = len(classes)
    dt = 1.0 / params.physics_hz
    decim = params.physics_hz // params.sensor_hz
    ctrl_every = params.physics_hz // params.control_hz
    n_steps = int(round(profile.duration * params.physics_hz))
    n_samp = (n_steps + decim - 1) // decim

    state = level_state((nrun,))
    rngs = []
    for r, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        jitter = rng.normal(0.0, params.init_perturbation, size=4)
        state.position[r, 0:2] = jitter[0:2]
        tilt = np.array([1.0, jitter[2] / 2.0, jitter[3] / 2.0, 0.0])
        state.orientation[r] = tilt / np.linalg.norm(tilt)
        rngs.append(rng)

    # correlated gust force/torque, one independent draw stream per run so
    # a run's content never depends on which batch it landed in
    s_f = params.disturbance_force_std
    s_t = params.disturbance_torque_std
    dist_lin = dist_ang = None
    if s_f > 0.0 or s_t > 0.0:
        rho = math.exp(-dt / params.disturbance_tau)
        innov = math.sqrt(1.0 - rho * rho)
        dist = np.stack([rng.standard_normal((n_steps, 6)) for rng in rngs])
        prev = np.zeros((nrun, 6))
        for step in range(n_steps):
            prev = rho * prev + innov * dist[:, step]
            dist[:, step] = prev
        dist *= np.array([s_f, s_f, s_f, s_t, s_t, s_t])
        dist_lin = dist[:, :, :3] / params.mass
        dist_ang = dist[:, :, 3:] / np.asarray(params.inertia)

    keep = np.ones((nrun, 4))
    any_fault = False
    for r, cls in enumerate(classes):
        if cls:
            any_fault = True
            for i in range(4):
                if cls >> i & 1:
                    keep[r, i] = 0.0
    onset = profile.onset_time

    ctrl = PidHoverController(params)
    ctrl.reset((nrun,))
    setpoint = HoverSetpoint(profile.hover_altitude)

    rec = {
        "pos": np.empty((nrun, n_samp, 3)),
        "vel": np.empty((nrun, n_samp, 3)),
        "quat": np.empty((nrun, n_samp, 4)),
        "omega": np.empty((nrun, n_samp, 3)),
        "lin": np.empty((nrun, n_samp, 3)),
        "ang": np.empty((nrun, n_samp, 3)),
    }
    times = np.arange(n_samp) * (decim * dt)

    commands = np.zeros((nrun, 4))
    # a diverging run turns NaN and is flagged afterward; don't warn en route
    with np.errstate(invalid="ignore", over="ignore"):
        for step in range(n_steps):
            t = step * dt
            if step % ctrl_every == 0:
                commands = ctrl.update(state, setpoint, ctrl_every * dt)
            cmd = commands * keep if (any_fault and t >= onset) else commands
            ex_lin = dist_lin[:, step] if dist_lin is not None else None
            ex_ang = dist_ang[:, step] if dist_ang is not None else None
            if step % decim == 0:
                k = step // decim
                lin, ang = compute_accelerations(state, params)
                if ex_lin is not None:
                    lin = lin + ex_lin
                    ang = ang + ex_ang
                rec["pos"][:, k] = state.position
                rec["vel"][:, k] = state.velocity
                rec["quat"][:, k] = state.orientation
                rec["omega"][:, k] = state.angular_velocity
                rec["lin"][:, k] = lin
                rec["ang"][:, k] = ang
            state = step_dynamics(state, cmd, params, dt, ex_lin, ex_ang)

    histories = []
    for r in range(nrun):
        histories.append(
            (
                StateHistory(
                    times=times,
                    position=rec["pos"][r],
                    velocity=rec["vel"][r],
                    orientation=rec["quat"][r],
                    angular_velocity=rec["omega"][r],
                    lin_acc=rec["lin"][r],
                    ang_acc=rec["ang"][r],
                    crash_class=classes[r],
                    onset_time=onset if classes[r] else None,
                    transition_s=profile.transition_s,
                    climb_s=profile.climb_s,
                    seed=seeds[r],
                    trace_id=trace_ids[r],
                ),
                rngs[r],
            )
        )
    return histories


def simulate_run(
    scenario: CrashScenario,
    params: QuadrotorParams = None,
    profile: FlightProfile = None,
    seed: int = 0,
    trace_id: int = 0,
) -> FlightTrace:
    """Simulate a single run; raises NumericError if the state blows up."""
    params = params or QuadrotorParams()
    profile = profile or FlightProfile()
    if scenario.crash_class and scenario.onset_time != profile.onset_time:
        if scenario.onset_time <= profile.climb_s:
            raise ContractError("fault onset must come after the climb phase")
        profile = replace(profile, hover_s=scenario.onset_time - profile.climb_s)
    (history, rng), = _simulate_lockstep(
        [scenario.crash_class], [seed], [trace_id], params, profile
    )
    bad = _first_bad_sample(history)
    if bad is not None:
        raise NumericError(f"non-finite state at t={history.times[bad]:.2f}s")
    return synthesize_sensors(history, params, rng)


def _first_bad_sample(history: StateHistory):
    ok = (
        np.isfinite(history.position).all(axis=-1)
        & np.isfinite(history.velocity).all(axis=-1)
        & np.isfinite(history.orientation).all(axis=-1)
        & np.isfinite(history.angular_velocity).all(axis=-1)
        & np.isfinite(history.lin_acc).all(axis=-1)
        & np.isfinite(history.ang_acc).all(axis=-1)
    )
    bad = np.flatnonzero(~ok)
    return int(bad[0]) if bad.size else None


@dataclass
class RunRecord:
    index: int
    crash_class: int
    seed: int
    status: str  # "ok" or "failed"
    reason: str = ""
    trace: FlightTrace = None


@dataclass
class CampaignResult:
    records: list

    @property
    def traces(self):
        return [r.trace for r in self.records if r.status == "ok"]


def worker_count():
    """Simulation parallelism cap from AEROGUARD_THREADS (default 1)."""
    raw = os.environ.get("AEROGUARD_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"AEROGUARD_THREADS={raw!r} is not an integer") from exc
    return max(1, n)


def run_campaign(
    n_runs,
    classes=None,
    seed=0,
    params: QuadrotorParams = None,
    profile: FlightProfile = None,
    chunk=64,
) -> CampaignResult:
    """Simulate ``n_runs`` flights, assigning classes round-robin.

    ``classes`` defaults to all fifteen fault classes.  A run whose state
    goes non-finite is marked failed in its record and the campaign
    continues.  Worker threads (chunks of runs) are capped by the
    AEROGUARD_THREADS environment variable; output bytes do not depend on
    the worker count.
    """
    if n_runs < 1:
        raise ContractError("campaign needs at least one run")
    params = params or QuadrotorParams()
    profile = profile or FlightProfile()
    classes = list(classes) if classes is not None else list(range(1, 16))
    for c in classes:
        if not 0 <= c <= 15:
            raise ContractError(f"crash class {c} outside 0..15")
    assigned = [classes[i % len(classes)] for i in range(n_runs)]
    seeds = [run_seed(seed, i) for i in range(n_runs)]

    chunks = [
        (lo, min(lo + chunk, n_runs)) for lo in range(0, n_runs, chunk)
    ]

    def do_chunk(bounds):
        lo, hi = bounds
        out = []
        histories = _simulate_lockstep(
            assigned[lo:hi], seeds[lo:hi], list(range(lo, hi)), params, profile
        )
        for history, rng in histories:
            bad = _first_bad_sample(history)
            if bad is not None:
                out.append(
                    RunRecord(
                        index=history.trace_id,
                        crash_class=history.crash_class,
                        seed=history.seed,
                        status="failed",
                        reason=f"non-finite state at t={history.times[bad]:.2f}s",
                    )
                )
            else:
                out.append(
                    RunRecord(
                        index=history.trace_id,
                        crash_class=history.crash_class,
                        seed=history.seed,
                        status="ok",
                        trace=synthesize_sensors(history, params, rng),
                    )
                )
        return out

    workers = worker_count()
    if workers == 1 or len(chunks) == 1:
        results = [do_chunk(b) for b in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(do_chunk, chunks))
    records = [r for group in results for r in group]
    records.sort(key=lambda r: r.index)
    return CampaignResult(records=records)
