"""Run configuration: JSON file with sections vehicle, controller, cem,
scenarios and rng.  Missing keys fall back to documented defaults with a
logged warning; malformed values raise ConfigError.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
from pathlib import Path

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_DT = 0.05  # 20 Hz control loop

DEFAULT_CONFIG: dict = {
    "vehicle": {},  # empty -> default desk-scale model
    "controller": {
        "u_max": None,             # symmetric thruster clamp, off by default
        "naive_epsilon": 1e-3,     # epsilon in the alpha formula of the naive PID
        "state_scale": None,       # 18 normalization constants; None -> derived
        "deterministic_actions": False,
        "dt": DEFAULT_DT,
    },
    "cem": {
        "population": 25,
        "elite_fraction": 0.2,
        "noise_var": 0.1,
        "init_var": 1.0,
        "epochs": 200,
        "checkpoint_every": 10,
        "workers": 1,
    },
    "scenarios": {
        "train": {
            "episode_steps": 200,
            "init_pose_bounds": [[-2.0, 2.0], [-2.0, 2.0], [-2.0, 2.0],
                                 [-0.3, 0.3], [-0.3, 0.3],
                                 [-math.pi, math.pi]],
        },
        "eval": {
            "episode_steps": 2000,
            "episodes": 10,
            "init_pose_bounds": [[-2.0, 2.0], [-2.0, 2.0], [-2.0, 2.0],
                                 [-0.3, 0.3], [-0.3, 0.3],
                                 [-math.pi, math.pi]],
            "sensor_noise_std": [0.05, 0.05, 0.05, 0.02, 0.02, 0.02],
            "actuator_noise_std": [50.0, 50.0, 50.0, 20.0, 20.0, 20.0],
            "current": {"v_c": 0.5, "h_c": math.pi / 4, "j_c": 0.0},
        },
    },
    "rng": {
        "master_seed": 0,
        "basis_seed": 42,
    },
}


def _merge_defaults(user: dict, defaults: dict, path: str = "") -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        if key not in defaults:
            logger.warning("unknown config key %s%s (ignored)", path, key)
            continue
        if isinstance(defaults[key], dict) and isinstance(value, dict) \
                and key != "vehicle":
            merged[key] = _merge_defaults(value, defaults[key], f"{path}{key}.")
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(path: str | Path | None = None) -> dict:
    """Read and resolve a config file; None gives the pure defaults."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    resolved = _merge_defaults(raw, DEFAULT_CONFIG)
    validate_config(resolved)
    return resolved


def validate_config(cfg: dict) -> None:
    """Raise ConfigError on structurally invalid values."""
    try:
        cem = cfg["cem"]
        if cem["population"] < 1:
            raise ConfigError("cem.population must be >= 1")
        if not 0.0 < cem["elite_fraction"] <= 1.0:
            raise ConfigError("cem.elite_fraction must be in (0, 1]")
        if math.floor(cem["population"] * cem["elite_fraction"]) < 1:
            raise ConfigError("cem.population * cem.elite_fraction rounds to 0 elites")
        if cem["noise_var"] < 0.0:
            raise ConfigError("cem.noise_var must be >= 0")
        if cem["init_var"] <= 0.0:
            raise ConfigError("cem.init_var must be > 0")
        if cem["epochs"] < 1:
            raise ConfigError("cem.epochs must be >= 1")
        if cfg["controller"]["dt"] <= 0.0:
            raise ConfigError("controller.dt must be > 0")
        for section in ("train", "eval"):
            sc = cfg["scenarios"][section]
            if sc["episode_steps"] < 1:
                raise ConfigError(f"scenarios.{section}.episode_steps must be >= 1")
            bounds = sc["init_pose_bounds"]
            if len(bounds) != 6 or any(len(b) != 2 or b[0] > b[1] for b in bounds):
                raise ConfigError(
                    f"scenarios.{section}.init_pose_bounds must be 6 [lo, hi] pairs")
        ev = cfg["scenarios"]["eval"]
        if ev["episodes"] < 1:
            raise ConfigError("scenarios.eval.episodes must be >= 1")
        if any(s < 0 for s in ev["sensor_noise_std"]) \
                or any(s < 0 for s in ev["actuator_noise_std"]):
            raise ConfigError("noise standard deviations must be >= 0")
        if ev["current"]["v_c"] < 0:
            raise ConfigError("current speed must be >= 0")
        if cfg["rng"]["master_seed"] < 0 or cfg["rng"]["basis_seed"] < 0:
            raise ConfigError("seeds must be >= 0")
    except (KeyError, TypeError) as err:
        raise ConfigError(f"malformed config: {err}") from err


def config_digest(cfg: dict) -> str:
    """Stable hash of the resolved configuration."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
