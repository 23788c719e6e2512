"""Rigid scene bodies with penetration queries for penalty contact."""

from __future__ import annotations

import numpy as np


class Body:
    """Box or upright cylinder with a mutable pose.

    ``half`` holds the half extents along the local axes; for cylinders the
    first entry is the radius.  The local z axis is the body's top normal.
    """

    __slots__ = ("id", "shape", "R", "c", "half", "graspable", "index", "lo", "hi", "groove")

    def __init__(self, body_id: str, shape: str, R: np.ndarray, center: np.ndarray,
                 half: np.ndarray, graspable: bool, index: int = -1, groove: float = 0.0):
        self.id = body_id
        self.shape = shape
        self.half = np.asarray(half, dtype=float)
        if shape == "cylinder":
            self.half = np.array([self.half[0], self.half[0], self.half[2]])
        self.graspable = graspable
        self.index = index
        self.groove = groove
        self.set_pose(R, center)

    def set_pose(self, R: np.ndarray, center: np.ndarray) -> None:
        self.R = np.array(R, dtype=float)
        self.c = np.array(center, dtype=float)
        ext = np.abs(self.R) @ self.half
        self.lo = self.c - ext
        self.hi = self.c + ext

    def local(self, P: np.ndarray) -> np.ndarray:
        return (P - self.c) @ self.R

    def penetration(self, P: np.ndarray):
        """Depth (>= 0) and outward unit normal for each point of ``P``."""
        q = (P - self.c) @ self.R
        h = self.half
        if self.shape == "box":
            slack = h - np.abs(q)
            axis = np.argmin(slack, axis=1)
            idx = np.arange(len(q))
            depth = slack[idx, axis]
            sign = np.where(q[idx, axis] >= 0.0, 1.0, -1.0)
            n_local = np.zeros_like(q)
            n_local[idx, axis] = sign
        else:
            rho = np.hypot(q[:, 0], q[:, 1])
            radial = h[0] - rho
            axial = h[2] - np.abs(q[:, 2])
            use_radial = radial < axial
            depth = np.where(use_radial, radial, axial)
            safe = np.where(rho > 1e-12, rho, 1.0)
            n_local = np.zeros_like(q)
            n_local[:, 0] = np.where(use_radial, np.where(rho > 1e-12, q[:, 0] / safe, 1.0), 0.0)
            n_local[:, 1] = np.where(use_radial, q[:, 1] / safe, 0.0)
            n_local[:, 2] = np.where(use_radial, 0.0, np.where(q[:, 2] >= 0.0, 1.0, -1.0))
        depth = np.maximum(depth, 0.0)
        return depth, n_local @ self.R.T

    def top_face(self, P: np.ndarray, groove: bool = True):
        """Height of points above the top face and whether each lies over it.

        Points inside a groove (a slot of width ``groove`` crossing the
        longer side at its middle) do not count as over the face unless
        ``groove`` is False.
        """
        q = (P - self.c) @ self.R
        h = self.half
        if self.shape == "box":
            over = (np.abs(q[:, 0]) <= h[0]) & (np.abs(q[:, 1]) <= h[1])
        else:
            over = np.hypot(q[:, 0], q[:, 1]) <= h[0]
        if groove and self.groove > 0.0:
            long_axis = 0 if h[0] >= h[1] else 1
            over &= np.abs(q[:, long_axis]) >= 0.5 * self.groove
        return q[:, 2] - h[2], over

    @property
    def normal(self) -> np.ndarray:
        return self.R[:, 2]

    def sweep_entry(self, lo: np.ndarray, hi: np.ndarray, d: np.ndarray, margin: float) -> float:
        """Smallest s >= 0 at which the box [lo, hi] moved by s*d touches this AABB.

        Returns inf when the swept box never overlaps, 0 when it already does.
        """
        blo = self.lo - margin
        bhi = self.hi + margin
        s_in, s_out = 0.0, np.inf
        for k in range(3):
            if abs(d[k]) < 1e-15:
                if hi[k] < blo[k] or lo[k] > bhi[k]:
                    return np.inf
                continue
            a = (blo[k] - hi[k]) / d[k]
            b = (bhi[k] - lo[k]) / d[k]
            if a > b:
                a, b = b, a
            s_in = max(s_in, a)
            s_out = min(s_out, b)
            if s_in > s_out:
                return np.inf
        return s_in
