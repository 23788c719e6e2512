"""FT sensor readings, finger pressure arrays and the center of pressure.

Pressure-array layout: ``pressures[r, c]`` with the row index increasing
from the finger base towards the tip.  Cell ``(r, c)`` is centred at
``(r * pitch, c * pitch)`` in the array plane, so the tip edge of the array
sits at ``(rows - 0.5) * pitch`` and coincides with the fingertip (the TCP
plane).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Pose, Wrench6

DEFAULT_ROWS = 8
DEFAULT_COLS = 4
DEFAULT_PITCH = 0.004


class NoContact(ValueError):
    """No cell of the pressure image is loaded."""


@dataclass(frozen=True, eq=False)
class PressureImage:
    pressures: np.ndarray
    cell_pitch: float = DEFAULT_PITCH

    def __post_init__(self):
        p = np.array(self.pressures, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("pressure image must be a non-empty 2-D array")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("pressures must be finite and non-negative")
        if self.cell_pitch <= 0:
            raise ValueError("cell pitch must be positive")
        object.__setattr__(self, "pressures", p)

    @property
    def rows(self) -> int:
        return self.pressures.shape[0]

    @property
    def cols(self) -> int:
        return self.pressures.shape[1]

    @property
    def total(self) -> float:
        return float(self.pressures.sum())

    @classmethod
    def empty(cls, rows: int = DEFAULT_ROWS, cols: int = DEFAULT_COLS, pitch: float = DEFAULT_PITCH):
        return cls(np.zeros((rows, cols)), pitch)


@dataclass(frozen=True)
class CoP:
    position_in_finger: tuple[float, float]  # (along finger, across finger), m
    total_force: float
    z_offset_tcp: float  # distance from the fingertip back to the CoP, m
    lateral_offset: float = 0.0  # across-finger offset from the array centre line, m


@dataclass(frozen=True, eq=False)
class FingerPair:
    left: PressureImage
    right: PressureImage
    opening_width: float

    def __post_init__(self):
        if self.opening_width < 0:
            raise ValueError("opening width must be non-negative")


def compute_cop(img: PressureImage) -> CoP:
    p = img.pressures
    total = float(p.sum())
    if total <= 0.0:
        raise NoContact("pressure image has no loaded cells")
    rows, cols = p.shape
    pitch = img.cell_pitch
    along = float(p.sum(axis=1) @ np.arange(rows)) * pitch / total
    across = float(p.sum(axis=0) @ np.arange(cols)) * pitch / total
    tip_edge = (rows - 0.5) * pitch
    return CoP(
        position_in_finger=(along, across),
        total_force=total,
        z_offset_tcp=tip_edge - along,
        lateral_offset=across - 0.5 * (cols - 1) * pitch,
    )


def cop_frame(z_tcp_ee: float, cop: CoP) -> Pose:
    """Pure translation from the EE to the CoP.

    Along the EE z axis the CoP sits at ``z_tcp_ee - z_offset_tcp``; the
    across-finger offset maps onto the EE y axis.
    """
    if cop.total_force <= 0:
        raise NoContact("CoP frame needs a loaded contact")
    return Pose.from_translation([0.0, cop.lateral_offset, z_tcp_ee - cop.z_offset_tcp], "EE", "CoP")


def finger_force_difference(fp: FingerPair) -> float:
    return abs(fp.left.total - fp.right.total)


def cop_at_tip(cop: CoP, tip_band: float = DEFAULT_PITCH) -> bool:
    """True when the CoP lies within ``tip_band`` of the fingertip edge.

    The default band is one cell, i.e. the last row of a default array.
    """
    if cop.total_force <= 0:
        raise NoContact("no contact to locate")
    return cop.z_offset_tcp <= tip_band


def ft_read(world, ee_pose: Pose | None = None, noise: bool = True) -> Wrench6:
    """Wrench the tool exerts on its surroundings, in the EE frame.

    Contact and held-object wrenches come from the world; zero-mean Gaussian
    noise is added per axis with the world's sensor settings.
    """
    vec = world.wrench_vector(ee_pose)
    if noise:
        vec = vec + world.sensor_noise()
    return Wrench6.from_vector(vec, "EE")
