"""Rigid transforms, twists, wrenches and grasp-pose construction.

Conventions
-----------
``Pose(R, p, from_frame="B", to_frame="EE")`` is the transform of frame EE
expressed in frame B, so a point maps as ``x_B = R @ x_EE + p``.

Six-vectors put the rotational part first:

* twist  ``[wx, wy, wz, vx, vy, vz]``
* wrench ``[mx, my, mz, fx, fy, fz]``

With this ordering the adjoint of ``T = (R, p)`` is::

    Ad_T = [[R,        0],
            [skew(p) R, R]]

twists map as ``V_a = Ad_{T_ab} V_b`` and wrenches as
``F_a = Ad_{T_ba}^T F_b``, which keeps the power ``V . F`` frame invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Axis indices shared by 6-vectors, selection matrices and gains.
RX, RY, RZ, X, Y, Z = range(6)

ORTHO_TOL = 1e-9


class FrameMismatch(ValueError):
    """Two frame-tagged quantities were combined across different frames."""


class DegenerateOrientation(ValueError):
    """Approach and orientation vectors do not span a plane."""


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _finite(values: list) -> bool:
    return all(map(math.isfinite, values))


def _det3(r: list) -> float:
    a, b, c, d, e, f, g, h, i = r
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def _ortho_error(r: list) -> float:
    """max |R^T R - I| from a row-major 3x3 list."""
    a, b, c, d, e, f, g, h, i = r
    return max(abs(a * a + d * d + g * g - 1.0), abs(b * b + e * e + h * h - 1.0),
               abs(c * c + f * f + i * i - 1.0), abs(a * b + d * e + g * h),
               abs(a * c + d * f + g * i), abs(b * c + e * f + h * i))


def cross3(a, b) -> np.ndarray:
    """Cross product of two 3-vectors (np.cross carries heavy per-call overhead)."""
    ax, ay, az = a.tolist()
    bx, by, bz = b.tolist()
    return np.array([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx])


def _unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError(f"{name} must be a finite non-zero vector")
    return v / n


def so3_exp(omega) -> np.ndarray:
    """Rotation matrix for the rotation vector ``omega`` (Rodrigues)."""
    wx, wy, wz = float(omega[0]), float(omega[1]), float(omega[2])
    theta2 = wx * wx + wy * wy + wz * wz
    if theta2 < 1e-24:
        return np.array([[1.0, -wz, wy], [wz, 1.0, -wx], [-wy, wx, 1.0]])
    theta = math.sqrt(theta2)
    a = math.sin(theta) / theta
    b = (1.0 - math.cos(theta)) / theta2
    K = np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])
    return np.eye(3) + a * K + b * (K @ K)


def so3_log(R) -> np.ndarray:
    """Rotation vector of ``R``; inverse of :func:`so3_exp` for angles < pi."""
    R = np.asarray(R, dtype=float)
    cos_t = (np.trace(R) - 1.0) / 2.0
    cos_t = min(1.0, max(-1.0, cos_t))
    theta = math.acos(cos_t)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-9:
        return 0.5 * w
    if math.pi - theta < 1e-6:
        # near pi the antisymmetric part vanishes; use the symmetric part
        M = (R + np.eye(3)) / 2.0
        k = int(np.argmax(np.diag(M)))
        axis = M[:, k] / math.sqrt(max(M[k, k], 1e-300))
        axis /= np.linalg.norm(axis)
        if np.dot(w, axis) < 0:
            axis = -axis
        return theta * axis
    return theta / (2.0 * math.sin(theta)) * w


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_about(axis, angle: float) -> np.ndarray:
    return so3_exp(_unit(axis, "axis") * angle)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform of ``to_frame`` expressed in ``from_frame``."""

    rotation: np.ndarray
    translation: np.ndarray
    from_frame: str = "B"
    to_frame: str = "B"

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        p = np.array(self.translation, dtype=float).reshape(3)
        r = R.ravel().tolist()
        if not _finite(r + p.tolist()):
            raise ValueError("pose contains non-finite values")
        if _ortho_error(r) > ORTHO_TOL or abs(_det3(r) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation is not a proper orthonormal matrix")
        if not self.from_frame or not self.to_frame:
            raise ValueError("frame labels must be non-empty strings")
        R.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    @classmethod
    def _trusted(cls, R: np.ndarray, p: np.ndarray, from_frame: str, to_frame: str) -> "Pose":
        # skips validation; callers guarantee R is a rotation built from rotations
        obj = object.__new__(cls)
        R = np.array(R, dtype=float)
        p = np.array(p, dtype=float)
        R.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(obj, "rotation", R)
        object.__setattr__(obj, "translation", p)
        object.__setattr__(obj, "from_frame", from_frame)
        object.__setattr__(obj, "to_frame", to_frame)
        return obj

    @classmethod
    def identity(cls, from_frame: str = "B", to_frame: str = "B") -> "Pose":
        return cls(np.eye(3), np.zeros(3), from_frame, to_frame)

    @classmethod
    def from_translation(cls, p, from_frame: str = "B", to_frame: str = "B") -> "Pose":
        return cls(np.eye(3), p, from_frame, to_frame)

    @classmethod
    def from_matrix(cls, T, from_frame: str = "B", to_frame: str = "B") -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3], from_frame, to_frame)

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "Pose":
        return invert(self)

    def apply(self, points) -> np.ndarray:
        """Map points given in ``to_frame`` into ``from_frame``."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def relabel(self, from_frame: str | None = None, to_frame: str | None = None) -> "Pose":
        return Pose._trusted(
            self.rotation, self.translation, from_frame or self.from_frame, to_frame or self.to_frame
        )

    def with_translation(self, p) -> "Pose":
        return Pose(self.rotation, p, self.from_frame, self.to_frame)

    def __matmul__(self, other: "Pose") -> "Pose":
        return compose(self, other)

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol)
            and np.allclose(self.translation, other.translation, atol=atol)
        )

    def to_list(self) -> list[float]:
        """Translation followed by the rotation vector, for logs."""
        return [float(v) for v in (*self.translation, *so3_log(self.rotation))]


def compose(a: Pose, b: Pose) -> Pose:
    if a.to_frame != b.from_frame:
        raise FrameMismatch(f"cannot chain {a.from_frame}->{a.to_frame} with {b.from_frame}->{b.to_frame}")
    R = a.rotation @ b.rotation
    p = a.rotation @ b.translation + a.translation
    return Pose._trusted(R, p, a.from_frame, b.to_frame)


def invert(T: Pose) -> Pose:
    Rt = T.rotation.T
    return Pose._trusted(Rt, -Rt @ T.translation, T.to_frame, T.from_frame)


@dataclass(frozen=True, eq=False)
class Twist6:
    angular: np.ndarray
    linear: np.ndarray
    frame: str = "EE"

    def __post_init__(self):
        w = np.array(self.angular, dtype=float).reshape(3)
        v = np.array(self.linear, dtype=float).reshape(3)
        if not _finite(w.tolist() + v.tolist()):
            raise ValueError("twist contains non-finite values")
        if not self.frame:
            raise ValueError("twist needs a frame label")
        object.__setattr__(self, "angular", w)
        object.__setattr__(self, "linear", v)

    @classmethod
    def _trusted(cls, w: np.ndarray, v: np.ndarray, frame: str) -> "Twist6":
        # built from validated parts; skips the checks
        obj = object.__new__(cls)
        object.__setattr__(obj, "angular", w)
        object.__setattr__(obj, "linear", v)
        object.__setattr__(obj, "frame", frame)
        return obj

    @classmethod
    def zero(cls, frame: str = "EE") -> "Twist6":
        return cls(np.zeros(3), np.zeros(3), frame)

    @classmethod
    def from_vector(cls, vec, frame: str = "EE") -> "Twist6":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:3], vec[3:], frame)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.angular, self.linear])


@dataclass(frozen=True, eq=False)
class Wrench6:
    force: np.ndarray
    torque: np.ndarray
    frame: str = "EE"

    def __post_init__(self):
        f = np.array(self.force, dtype=float).reshape(3)
        m = np.array(self.torque, dtype=float).reshape(3)
        if not _finite(f.tolist() + m.tolist()):
            raise ValueError("wrench contains non-finite values")
        if not self.frame:
            raise ValueError("wrench needs a frame label")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", m)

    @classmethod
    def _trusted(cls, f: np.ndarray, m: np.ndarray, frame: str) -> "Wrench6":
        obj = object.__new__(cls)
        object.__setattr__(obj, "force", f)
        object.__setattr__(obj, "torque", m)
        object.__setattr__(obj, "frame", frame)
        return obj

    @classmethod
    def zero(cls, frame: str = "EE") -> "Wrench6":
        return cls(np.zeros(3), np.zeros(3), frame)

    @classmethod
    def from_vector(cls, vec, frame: str = "EE") -> "Wrench6":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[3:], vec[:3], frame)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.torque, self.force])


def adjoint(T: Pose) -> np.ndarray:
    R, p = T.rotation, T.translation
    Ad = np.zeros((6, 6))
    Ad[:3, :3] = R
    Ad[3:, 3:] = R
    Ad[3:, :3] = skew(p) @ R
    return Ad


def transform_twist(T: Pose, v: Twist6) -> Twist6:
    """Re-express a twist given in ``T.to_frame`` in ``T.from_frame``."""
    if v.frame != T.to_frame:
        raise FrameMismatch(f"twist in {v.frame!r}, transform expects {T.to_frame!r}")
    w = T.rotation @ v.angular
    lin = T.rotation @ v.linear + cross3(T.translation, w)
    return Twist6._trusted(w, lin, T.from_frame)


def transform_wrench(T: Pose, w: Wrench6) -> Wrench6:
    """Re-express a wrench given in ``T.to_frame`` in ``T.from_frame``.

    Equivalent to ``adjoint(invert(T)).T @ w.vector``.
    """
    if w.frame != T.to_frame:
        raise FrameMismatch(f"wrench in {w.frame!r}, transform expects {T.to_frame!r}")
    f = T.rotation @ w.force
    m = T.rotation @ w.torque + cross3(T.translation, f)
    return Wrench6._trusted(f, m, T.from_frame)


@dataclass(frozen=True, eq=False)
class ObjectEstimate:
    """Noisy center, surface normal and planar dimensions of an object."""

    center: np.ndarray
    normal: np.ndarray
    dims: np.ndarray = field(default_factory=lambda: np.array([0.05, 0.05]))

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(3)
        n = np.array(self.normal, dtype=float).reshape(3)
        d = np.array(self.dims, dtype=float).reshape(2)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("estimate normal must be a unit vector")
        if np.any(d <= 0):
            raise ValueError("estimate dims must be strictly positive")
        if not np.all(np.isfinite(c)):
            raise ValueError("estimate center must be finite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "dims", d)


def rotation_from_approach_orientation(a_hat, o_hat) -> np.ndarray:
    """Rotation with columns ``[n o a]`` from approach and orientation vectors.

    ``n = o_hat x a_hat``, ``a = a_hat``, ``o = a x n``.  Only the component of
    ``o_hat`` orthogonal to ``a_hat`` survives.
    """
    a = np.asarray(a_hat, dtype=float)
    o_hat = np.asarray(o_hat, dtype=float)
    if abs(np.dot(a, o_hat)) >= 1.0 - 1e-6:
        raise DegenerateOrientation("approach and orientation vectors are (anti)parallel")
    n = np.cross(o_hat, a)
    n /= np.linalg.norm(n)
    o = np.cross(a, n)
    return np.column_stack([n, o, a])


def orientation_axis(dims) -> np.ndarray:
    """Table axis along the longer planar dimension; x wins ties."""
    return np.array([1.0, 0.0, 0.0]) if dims[0] >= dims[1] else np.array([0.0, 1.0, 0.0])


def desired_tcp_pose(est: ObjectEstimate, from_frame: str = "B", to_frame: str = "TCP") -> Pose:
    a_hat = -est.normal
    o_hat = orientation_axis(est.dims)
    if abs(np.dot(a_hat, o_hat)) >= 1.0 - 1e-6:
        # normal lies along the preferred table axis; fall back to the other one
        o_hat = np.roll(o_hat, 1)
    R = rotation_from_approach_orientation(a_hat, o_hat)
    return Pose(R, est.center, from_frame, to_frame)


def pre_pose(goal: Pose, normal, d_safety: float) -> Pose:
    if d_safety < 0:
        raise ValueError("d_safety must be non-negative")
    n = np.asarray(normal, dtype=float)
    return Pose._trusted(goal.rotation, goal.translation + d_safety * n, goal.from_frame, goal.to_frame)
