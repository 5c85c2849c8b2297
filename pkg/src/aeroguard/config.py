"""Flat key-value run configuration.

A config file is plain text: one ``key = value`` per line, ``#`` starts a
comment, blank lines are ignored.  Every key has a typed default below;
unknown or duplicate keys are rejected with the offending line number so a
typo cannot silently fall back to a default.  ``resolved_text`` renders the
fully-merged configuration back into the same format, which every command
writes next to its outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


def _int(s):
    return int(s, 10)


def _float(s):
    v = float(s)
    if v != v:
        raise ValueError("nan is not a valid setting")
    return v


def _csv_ints(s):
    parts = [p.strip() for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of integers")
    return tuple(int(p, 10) for p in parts)


def _csv_names(s):
    parts = [p.strip() for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of names")
    return tuple(parts)


def _auto_or_float(s):
    if s.strip().lower() == "auto":
        return None
    return _float(s)


def _classes(s):
    if s.strip().lower() == "all":
        return None
    return _csv_ints(s)


def _render(value):
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _render_classes(value):
    return "all" if value is None else _render(value)


@dataclass(frozen=True)
class Key:
    name: str
    parse: callable
    default: object
    render: callable = _render


_KEYS = [
    Key("seed", _int, 0),
    # simulation campaign
    Key("sim_runs", _int, 30),
    Key("sim_classes", _classes, None, _render_classes),
    Key("sim_mass", _float, 0.5),
    Key("sim_arm_length", _float, 0.12),
    Key("sim_thrust_coeff", _float, 4.0e-6),
    Key("sim_torque_coeff", _float, 6.5e-8),
    Key("sim_rotor_tau", _float, 0.02),
    Key("sim_linear_drag", _float, 0.25),
    Key("sim_angular_drag", _float, 0.002),
    Key("sim_max_rotor_speed", _float, 950.0),
    Key("sim_climb_s", _float, 2.0),
    Key("sim_hover_s", _float, 8.0),
    Key("sim_post_fault_s", _float, 3.0),
    Key("sim_transition_s", _float, 2.0),
    Key("sim_hover_altitude", _float, 4.0),
    Key("sim_noise_acc", _float, 0.05),
    Key("sim_noise_gyro", _float, 0.02),
    Key("sim_noise_angacc", _float, 0.5),
    Key("sim_noise_vel", _float, 0.02),
    Key("sim_noise_pos", _float, 0.01),
    Key("sim_noise_att", _float, 0.005),
    Key("sim_init_perturbation", _float, 0.02),
    Key("sim_disturbance_force", _float, 0.15),
    Key("sim_disturbance_torque", _float, 0.004),
    Key("sim_disturbance_tau", _float, 0.3),
    # dataset preparation
    Key("split_fraction", _float, 0.7),
    Key("det_window", _int, 25),
    Key("det_stride", _int, 10),
    Key("det_channels", _csv_names,
        ("acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z")),
    Key("cls_window", _int, 100),
    Key("cls_stride", _int, 10),
    Key("cls_channels", _csv_names, ("gyro_x", "gyro_y", "gyro_z")),
    # detector training
    Key("det_conv_filters", _csv_ints, (16, 24, 32)),
    Key("det_conv_kernels", _csv_ints, (5, 5, 3)),
    Key("det_hidden", _int, 32),
    Key("det_epochs", _int, 30),
    Key("det_batch", _int, 256),
    Key("det_lr", _float, 0.01),
    Key("det_adam_eps", _float, 0.01),
    # anomaly scoring
    Key("score_ridge", _auto_or_float, None),
    Key("score_percentile", _float, 99.0),
    Key("score_threshold", _auto_or_float, None),
    # crash-cause classifier
    Key("cls_conv_filters", _csv_ints, (16, 24, 32)),
    Key("cls_conv_kernels", _csv_ints, (5, 5, 3)),
    Key("cls_hidden", _int, 32),
    Key("cls_dense", _int, 64),
    Key("cls_dropout", _float, 0.2),
    Key("cls_epochs", _int, 15),
    Key("cls_batch", _int, 256),
    Key("cls_lr", _float, 0.01),
    Key("cls_adam_eps", _float, 0.01),
    # latency profiling
    Key("profile_window", _int, 100),
    Key("profile_channels", _csv_names, ("acc_x", "acc_y", "acc_z")),
    Key("profile_repeats", _int, 100),
    Key("profile_warmup", _int, 10),
]

SCHEMA = {k.name: k for k in _KEYS}


def default_config():
    return {k.name: k.default for k in _KEYS}


def parse_config_text(text, source="<config>"):
    """Parse config file text into a {key: typed value} dict of overrides."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        name, _, value = line.partition("=")
        name = name.strip()
        value = value.strip()
        if name not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {name!r}")
        if name in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {name!r}")
        if not value:
            raise ConfigError(f"{source}:{lineno}: empty value for {name!r}")
        try:
            out[name] = SCHEMA[name].parse(value)
        except ValueError as exc:
            raise ConfigError(
                f"{source}:{lineno}: bad value for {name!r}: {exc}"
            ) from None
    return out


def load_config(path=None, overrides=None):
    """Defaults, then the file at ``path``, then explicit overrides."""
    cfg = default_config()
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        cfg.update(parse_config_text(text, source=str(path)))
    for name, value in (overrides or {}).items():
        if name not in SCHEMA:
            raise ConfigError(f"unknown config key {name!r}")
        cfg[name] = value
    return cfg


def resolved_text(cfg):
    """Canonical rendering of a full config; parses back to the same values."""
    missing = set(SCHEMA) - set(cfg)
    if missing:
        raise ConfigError(f"config missing keys: {sorted(missing)}")
    extra = set(cfg) - set(SCHEMA)
    if extra:
        raise ConfigError(f"config has unknown keys: {sorted(extra)}")
    lines = [f"{name} = {SCHEMA[name].render(cfg[name])}" for name in sorted(cfg)]
    return "\n".join(lines) + "\n"
