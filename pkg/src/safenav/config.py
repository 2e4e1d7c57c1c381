"""Flat run configuration: namespaced keys, defaults, file parsing and hashing.

Config files are UTF-8 text, one `key = value` per line, `#` starts a comment.
Unknown keys are errors; types come from the defaults table.
"""

from __future__ import annotations

import hashlib

METHODS = ("ours", "sac", "sac_lag", "sac_pid", "mpc_tuned")

DEFAULTS: dict[str, object] = {
    # run
    "run.method": "ours",
    "run.env_id": 1,
    "run.seed": 0,
    "run.total_steps": 150_000,
    "run.warmup_steps": 1000,
    "run.ablation_goal_info": False,
    # world
    "world.dt": 0.2,
    "world.arena_half": 5.0,
    "world.pillar_radius": 0.3,
    "world.lwall_arm_len": 1.2,
    "world.lwall_arm_width": 0.15,
    "world.robot_radius": 0.25,
    "world.v_min": 0.0,
    "world.v_max": 0.5,
    "world.w_max": 1.0,
    "world.goal_radius": 0.3,
    "world.eps_motion": 0.005,
    "world.stuck_steps": 30,
    "world.max_episode_steps": 500,
    "world.lidar_beams": 100,
    "world.lidar_max_range": 5.0,
    "world.min_clearance": 0.8,
    "world.place_attempts": 1000,
    # shield
    "shield.horizon": 10,
    "shield.m_sectors": 4,
    "shield.r_effort": 0.1,
    "shield.d_floor": 0.05,
    "shield.state_penalty": 50.0,
    "shield.delta": 0.3,
    "shield.max_iters": 60,
    "shield.g_tol": 1e-4,
    "shield.c_tol": 1e-8,
    "shield.armijo_c": 1e-4,
    "shield.backtrack": 0.5,
    "shield.mpc_tuned_r0": 1.0,
    # sac
    "sac.hidden": 128,
    "sac.gamma": 0.99,
    "sac.tau": 0.005,
    "sac.batch_size": 256,
    "sac.buffer_capacity": 1_000_000,
    "sac.lr": 3e-4,
    "sac.alpha_init": 0.2,
    "sac.task_updates": 1,
    "sac.sup_updates": 4,
    "sac.sup_lr_final": 3e-5,
    # rewards / weight mapping
    "agents.r_collision": 10.0,
    "agents.r_goal": 20.0,
    "agents.w_min": 0.01,
    "agents.w_max": 5.0,
    # constrained baselines
    "lag.cost_limit": 0.0025,
    "lag.lr": 0.05,
    "lag.kp": 0.1,
    "lag.ki": 0.01,
    "lag.kd": 0.0,
    # harness
    "harness.log_every": 500,
    "harness.checkpoint_every": 25_000,
}


class ConfigError(ValueError):
    pass


def default_config() -> dict[str, object]:
    return dict(DEFAULTS)


def _parse_value(key: str, text: str) -> object:
    kind = type(DEFAULTS[key])
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError
            return low == "true"
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as {kind.__name__} for key {key!r}") from None


def parse_config_text(text: str) -> dict[str, object]:
    """Parse `key = value` lines into typed overrides."""
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        out[key] = _parse_value(key, value)
    return out


def load_config(path=None, overrides: dict[str, object] | None = None) -> dict[str, object]:
    """Defaults, then file values, then explicit overrides."""
    cfg = default_config()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            cfg.update(parse_config_text(fh.read()))
    if overrides:
        for key in overrides:
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
        cfg.update(overrides)
    if cfg["run.method"] not in METHODS:
        raise ConfigError(f"run.method must be one of {METHODS}, got {cfg['run.method']!r}")
    if cfg["run.env_id"] not in (1, 2, 3):
        raise ConfigError(f"run.env_id must be 1, 2 or 3, got {cfg['run.env_id']!r}")
    return cfg


def format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def canonical_text(cfg: dict[str, object]) -> str:
    """Stable rendering used for snapshots and hashing."""
    return "".join(f"{key} = {format_value(cfg[key])}\n" for key in sorted(cfg))


def config_hash(cfg: dict[str, object]) -> str:
    return hashlib.sha256(canonical_text(cfg).encode("utf-8")).hexdigest()
