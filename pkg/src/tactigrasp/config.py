"""Tunable defaults.

None of these values come from measured hardware; they are simulator and
skill knobs. Scene files may override any field by name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace


class ConfigError(ValueError):
    """Invalid scene or campaign configuration.

    ``where`` carries a field path (``objects[2].mass``) or a ``line:col``
    location for syntax errors.
    """

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


def _override(obj, values: dict | None, where: str):
    if not values:
        return obj
    known = {f.name for f in fields(obj)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", where)
    return replace(obj, **values)


@dataclass(frozen=True)
class ControllerConfig:
    dt: float = 0.002
    max_linear: float = 0.5  # m/s, every translational axis
    max_angular: float = 1.0  # rad/s, every rotational axis
    force_gain: float = 0.01  # (m/s)/N on force-controlled translational axes
    torque_gain: float = 0.2  # (rad/s)/(N m) on force-controlled rotational axes
    filter_cutoff_hz: float = 50.0
    alert_fraction: float = 0.25

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive", "controller.dt")
        if not 0 < self.alert_fraction <= 1:
            raise ConfigError("alert_fraction must be in (0, 1]", "controller.alert_fraction")
        if self.force_gain <= 0 or self.torque_gain <= 0:
            raise ConfigError("gains must be positive", "controller")

    def with_overrides(self, values: dict | None) -> "ControllerConfig":
        return _override(self, values, "controller")


@dataclass(frozen=True)
class ContactConfig:
    stiffness: float = 1.0e4  # N/m per contact patch
    pad_stiffness: float = 3.0e4  # N/m over a whole finger pad
    force_cap: float = 50.0  # N per contact patch
    hold_stiffness: float = 2.0e3  # N/m, gripper-to-held-object coupling
    hold_rot_stiffness: float = 20.0  # N m/rad, rigid-fixture torsion
    rotary_friction: float = 0.05  # N m to turn an engaged rotary fixture
    cup_stiffness: float = 1500.0  # N/m, bellows of one suction cup
    seal_gap: float = 0.0015  # m, largest rim gap a cup still pulls shut
    cup_stroke: float = 0.02  # m, bellows travel before the rim is crushed
    cup_max_tilt: float = math.radians(15.0)  # cup axis to surface normal
    cup_hold_force: float = 60.0  # N per sealed cup
    leak_success: dict = field(
        default_factory=lambda: {"flat": 1.0, "laminated": 0.0, "curved": 0.3}
    )
    gravity: float = 9.81

    def with_overrides(self, values: dict | None) -> "ContactConfig":
        return _override(self, values, "contact")


@dataclass(frozen=True)
class SensorConfig:
    sigma_force: float = 0.1  # N per axis
    sigma_torque: float = 0.005  # N m per axis

    def with_overrides(self, values: dict | None) -> "SensorConfig":
        return _override(self, values, "sensor")


@dataclass(frozen=True)
class StrategyConfig:
    # approach and contact
    approach_speed: float = 0.08
    contact_threshold: float = 3.0
    overshoot: float = 0.005
    approach_margin: float = 0.04  # extra travel past the goal for B/C descents
    cup_press_force: float = 10.0  # C descends until the cups push this hard
    protective_force: float = 40.0  # robot-side collision stop for position moves
    free_speed: float = 0.5
    free_angular_speed: float = 1.0
    # strategy A
    settle_force_diff: float = 1.0
    settle_ft_force: float = 1.5
    settle_time: float = 0.5
    readvance: float = 0.01
    reopen: float = 0.005
    max_readvances: int = 3
    pull_force: float = 6.0
    rotation_step: float = math.radians(2.0)
    rotation_max: float = math.radians(30.0)
    rotation_speed: float = 0.5
    torque_block: float = 0.4
    # strategy B
    search_factor: float = 1.2
    search_speed: float = 0.03
    search_depth: float = 0.02
    # strategy C
    cup_rotation: float = math.radians(45.0)
    rotations_both: int = 3
    rotations_single: int = 7
    # weight check
    weight_samples: int = 50
    weight_tolerance: float = 0.05
    # budget
    timeout: float = 30.0

    def with_overrides(self, values: dict | None) -> "StrategyConfig":
        return _override(self, values, "strategy")
