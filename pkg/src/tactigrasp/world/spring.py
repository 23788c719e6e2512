"""One-dimensional spring contact: a flat plane pushing back on the EE origin.

A minimal world for checking the control law in isolation.  The plane
``z = height`` (base frame) resists penetration of the EE origin with
``stiffness * depth``, capped at ``force_cap``.  The reported wrench is the
force the tool exerts on the plane, in EE axes, so pressing down reads a
negative base-z force.
"""

from __future__ import annotations

import math

import numpy as np

from ..geometry import Pose


class SpringPlane:
    def __init__(self, stiffness: float = 1.0e4, height: float = 0.0, force_cap: float = math.inf,
                 ee_pose: Pose | None = None, sigma_force: float = 0.0, seed: int = 0):
        self.stiffness = stiffness
        self.height = height
        self.force_cap = force_cap
        self.ee_pose = ee_pose if ee_pose is not None else Pose.from_translation([0.0, 0.0, 0.01], "B", "EE")
        self.sigma_force = sigma_force
        self.rng = np.random.default_rng(seed)
        self.frozen = False
        self.held = None
        self.actuator = None
        self.t = 0.0

    @property
    def depth(self) -> float:
        return max(0.0, self.height - float(self.ee_pose.translation[2]))

    @property
    def in_contact(self) -> bool:
        return self.depth > 0.0

    @property
    def quiescent(self) -> bool:
        return not self.frozen

    def freeze(self) -> None:
        self.frozen = True

    def unfreeze(self) -> None:
        self.frozen = False

    def advance(self, pose: Pose, dt: float) -> None:
        self.t += dt
        self.ee_pose = pose

    def wrench_vector(self, ee_pose: Pose | None = None) -> np.ndarray:
        pose = ee_pose or self.ee_pose
        depth = max(0.0, self.height - float(pose.translation[2]))
        f_base = np.array([0.0, 0.0, -min(self.stiffness * depth, self.force_cap)])
        return np.concatenate([np.zeros(3), pose.rotation.T @ f_base])

    def sensor_noise(self) -> np.ndarray:
        if self.sigma_force == 0.0:
            return np.zeros(6)
        return np.concatenate([np.zeros(3), self.rng.normal(0.0, self.sigma_force, 3)])

    def measure(self) -> np.ndarray:
        return self.wrench_vector() + self.sensor_noise()

    def measure_filtered(self, alpha: float) -> np.ndarray:
        return self.wrench_vector()

    def clear_distance(self, direction, margin: float = 0.0) -> float:
        d = np.asarray(direction, dtype=float)
        gap = float(self.ee_pose.translation[2]) - self.height - margin
        if gap <= 0.0:
            return 0.0
        return gap / -d[2] if d[2] < 0 else math.inf


__all__ = ["SpringPlane"]
