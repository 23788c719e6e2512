"""Hybrid Cartesian force-velocity control and the kinematic plant.

The command sent to the robot every cycle is an end-effector twist

    u = S_vel (s * V_max) + S_frc K_P (F_des - F)

and the plant integrates it with a fixed step ``dt``.  Measured wrenches
follow the sensor convention of :mod:`tactigrasp.sensing`: the wrench the
tool exerts on its surroundings, so pressing down on a surface reads as a
negative z force.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ControllerConfig
from .geometry import FrameMismatch, Pose, Twist6, Wrench6, invert, so3_exp, so3_log
from .safety import SafetyMonitor, SafetyStatus, gate_vector


MIN_JUMP = 4  # shortest stretch worth skipping, cycles
COOLDOWN = 10  # cycles to wait after a failed clearance check
SAMPLE_SPACING = 0.002  # m of tool travel between clearance samples


class SafetyHalt(RuntimeError):
    """The safety monitor reported Stop; the loop emitted a zero twist and halted."""

    def __init__(self, t: float):
        self.t = t
        super().__init__(f"safety stop at t={t:.3f}s")


class ControlTimeout(RuntimeError):
    """The loop passed its deadline."""


@dataclass(frozen=True)
class SelectionMatrices:
    vel_axes: tuple[int, ...]
    frc_axes: tuple[int, ...]

    def __post_init__(self):
        vel = tuple(int(v) for v in self.vel_axes)
        frc = tuple(int(v) for v in self.frc_axes)
        if len(vel) != 6 or len(frc) != 6:
            raise ValueError("selection matrices need six diagonal entries")
        if any(v not in (0, 1) for v in vel + frc):
            raise ValueError("selection entries must be 0 or 1")
        if any(a and b for a, b in zip(vel, frc)):
            raise ValueError("an axis cannot be both velocity- and force-controlled")
        object.__setattr__(self, "vel_axes", vel)
        object.__setattr__(self, "frc_axes", frc)

    @classmethod
    def force_on(cls, *axes: int) -> "SelectionMatrices":
        """Force control on ``axes``, velocity control everywhere else."""
        frc = [1 if i in axes else 0 for i in range(6)]
        return cls(tuple(1 - f for f in frc), tuple(frc))

    @property
    def S_vel(self) -> np.ndarray:
        return np.diag(np.array(self.vel_axes, dtype=float))

    @property
    def S_frc(self) -> np.ndarray:
        return np.diag(np.array(self.frc_axes, dtype=float))


@dataclass(frozen=True, eq=False)
class ControllerParams:
    gain: np.ndarray
    scaling: np.ndarray
    max_twist: Twist6
    desired_wrench: Wrench6
    dt: float = 0.002

    def __post_init__(self):
        K = np.array(self.gain, dtype=float).reshape(6, 6)
        if not np.allclose(K, K.T):
            raise ValueError("gain must be symmetric")
        try:
            np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            raise ValueError("gain must be positive definite") from None
        s = np.array(self.scaling, dtype=float).reshape(6)
        if np.any(np.abs(s) > 1.0):
            raise ValueError("scaling entries must lie in [-1, 1]")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "gain", K)
        object.__setattr__(self, "scaling", s)


@dataclass(frozen=True, eq=False)
class EEState:
    pose: Pose
    measured_wrench: Wrench6


def _hybrid(vel: np.ndarray, frc: np.ndarray, scaled_twist: np.ndarray, K: np.ndarray,
            f_des: np.ndarray, f_meas: np.ndarray) -> np.ndarray:
    return vel * scaled_twist + frc * (K @ (f_des - f_meas))


def hybrid_command(sel: SelectionMatrices, p: ControllerParams, measured: Wrench6) -> Twist6:
    if measured.frame != p.desired_wrench.frame:
        raise FrameMismatch(f"measured wrench in {measured.frame!r}, desired in {p.desired_wrench.frame!r}")
    u = _hybrid(
        np.array(sel.vel_axes, dtype=float),
        np.array(sel.frc_axes, dtype=float),
        p.scaling * p.max_twist.vector,
        p.gain,
        p.desired_wrench.vector,
        measured.vector,
    )
    return Twist6.from_vector(u, measured.frame)


def _integrate(R: np.ndarray, p: np.ndarray, u: np.ndarray, dt: float):
    # u is an EE-frame twist; rotate into base axes, then exponentiate on the left
    w_b = R @ u[:3]
    v_b = R @ u[3:]
    return so3_exp(w_b * dt) @ R, p + v_b * dt


def step(state: EEState, u: Twist6, dt: float) -> EEState:
    """One explicit plant step ``x <- x + u dt`` with the rotation on SO(3)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    R, p = _integrate(state.pose.rotation, state.pose.translation, u.vector, dt)
    pose = Pose._trusted(R, p, state.pose.from_frame, state.pose.to_frame)
    return EEState(pose, state.measured_wrench)


class WrenchFilter:
    """Single-pole low-pass on the 6-vector wrench."""

    def __init__(self, cutoff_hz: float | None, dt: float):
        if cutoff_hz is None or cutoff_hz <= 0:
            self.alpha = 1.0
        else:
            rc = 1.0 / (2.0 * math.pi * cutoff_hz)
            self.alpha = dt / (dt + rc)
        self.value = np.zeros(6)

    def update(self, x: np.ndarray) -> np.ndarray:
        self.value = self.value + self.alpha * (x - self.value)
        return self.value

    def reset(self, x: np.ndarray | None = None) -> None:
        self.value = np.zeros(6) if x is None else np.array(x, dtype=float)


@dataclass(frozen=True, eq=False)
class ContactEvent:
    """Result of a guarded move: ``contact`` tells Contact from NoContact."""

    contact: bool
    pose: Pose
    wrench: Wrench6
    distance: float


class ControlLoop:
    """Fixed-rate loop that owns one world and drives it with hybrid commands.

    Every cycle: read the latest safety status, gate the command, integrate
    the plant, advance the world, read and filter the FT sensor.
    """

    def __init__(self, world, config: ControllerConfig | None = None,
                 safety: SafetyMonitor | None = None, observer=None, fast_forward: bool = True):
        self.world = world
        self.fast_forward = fast_forward
        self._ff_cooldown = 0
        self.cfg = config or ControllerConfig()
        self.dt = self.cfg.dt
        self.safety = safety if safety is not None else SafetyMonitor()
        self.observer = observer
        self.max_vec = np.array([self.cfg.max_angular] * 3 + [self.cfg.max_linear] * 3)
        self.max_twist = Twist6.from_vector(self.max_vec)
        self.gain = np.diag([self.cfg.torque_gain] * 3 + [self.cfg.force_gain] * 3)
        self.filter = WrenchFilter(self.cfg.filter_cutoff_hz, self.dt)
        self.t = 0.0
        self.cycles = 0
        self.deadline = math.inf
        self.wrench = np.zeros(6)
        self.last_command = np.zeros(6)
        self.gate_factor = 1.0
        self.status = SafetyStatus.CLEAR

    # -- state ---------------------------------------------------------------
    @property
    def pose(self) -> Pose:
        return self.world.ee_pose

    @property
    def measured(self) -> Wrench6:
        return Wrench6.from_vector(self.wrench, "EE")

    def force_base(self) -> np.ndarray:
        """Filtered measured force rotated into base axes."""
        return self.world.ee_pose.rotation @ self.wrench[3:]

    # -- core cycle ----------------------------------------------------------
    def cycle(self, u: np.ndarray) -> np.ndarray:
        if self.t >= self.deadline:
            raise ControlTimeout(f"deadline {self.deadline:.2f}s reached")
        status = self.safety.status_at(self.t) if self.safety else SafetyStatus.CLEAR
        self.status = status
        gated = gate_vector(status, u, self.cfg.alert_fraction, self.max_vec)
        if status == SafetyStatus.ALERT:
            nu = float(np.linalg.norm(u))
            self.gate_factor = float(np.linalg.norm(gated)) / nu if nu > 0 else 1.0
        else:
            self.gate_factor = 1.0
        self.last_command = gated
        if self.observer is not None:
            self.observer(self.t, status, gated)
        if status == SafetyStatus.STOP:
            self.world.freeze()
            raise SafetyHalt(self.t)
        pose = self.world.ee_pose
        R, p = _integrate(pose.rotation, pose.translation, gated, self.dt)
        self.world.advance(Pose._trusted(R, p, pose.from_frame, pose.to_frame), self.dt)
        self.t += self.dt
        self.cycles += 1
        self.wrench = self.filter.update(self.world.measure())
        return self.wrench

    # -- contact-free stretches ------------------------------------------------
    # When the world guarantees that nothing can touch the tool for a number of
    # cycles, those cycles are taken in one jump: the plant ends where the
    # per-cycle integration would, time and cycle counters advance, the
    # observer still sees every cycle, and the filter is set to a settled
    # reading.  Jumps never cross a pending safety event or the deadline.

    def _jump_budget(self, n: int) -> int:
        if not self.fast_forward or n < MIN_JUMP:
            return 0
        if self._ff_cooldown > 0:
            self._ff_cooldown -= 1
            return 0
        t = self.t
        if self.safety:
            if self.safety.status_at(t) != SafetyStatus.CLEAR:
                return 0
            nxt = self.safety.next_event_after(t)
            if nxt < math.inf:
                n = min(n, int(math.floor((nxt - t) / self.dt + 1e-9)))
        if self.deadline < math.inf:
            n = min(n, int(math.ceil((self.deadline - t) / self.dt - 1e-9)))
        return n if n >= MIN_JUMP else 0

    def _jump(self, n: int, pose: Pose, u: np.ndarray) -> None:
        if self.observer is not None:
            for i in range(n):
                self.observer(self.t + i * self.dt, SafetyStatus.CLEAR, u)
        self.status = SafetyStatus.CLEAR
        self.gate_factor = 1.0
        self.last_command = u
        self.world.advance(pose, n * self.dt)
        self.t += n * self.dt
        self.cycles += n
        self.filter.value = self.world.measure_filtered(self.filter.alpha)
        self.wrench = self.filter.value

    def _path_prefix(self, poses) -> int:
        """Number of leading poses the tool can reach without box contact."""
        return self.world.clear_prefix(poses)

    def _reach(self) -> float:
        pts = self.world.tool_points()
        return float(np.max(np.linalg.norm(pts - self.world.ee_pose.translation, axis=1)))

    def hybrid(self, sel: SelectionMatrices, scaled_twist: np.ndarray, f_des: np.ndarray | None = None) -> np.ndarray:
        """One cycle of the hybrid law; ``scaled_twist`` is s * V_max in physical units."""
        f_des = np.zeros(6) if f_des is None else f_des
        u = _hybrid(
            np.array(sel.vel_axes, dtype=float), np.array(sel.frc_axes, dtype=float),
            scaled_twist, self.gain, f_des, self.wrench,
        )
        return self.cycle(u)

    # -- motion primitives ---------------------------------------------------
    def move_to(self, target: Pose, speed: float, angular_speed: float = 1.0,
                force_limit: float | None = None) -> bool:
        """Straight-line velocity-mode move of the EE to ``target``.

        Returns False if ``force_limit`` stopped the motion early (a
        protective stop, as the robot controller would do on collision).
        """
        t_p = target.translation
        t_R = target.rotation
        speed = min(speed, self.cfg.max_linear)
        angular_speed = min(angular_speed, self.cfg.max_angular)
        while True:
            pose = self.world.ee_pose
            e_p = t_p - pose.translation
            e_r = so3_log(t_R @ pose.rotation.T)
            dp = math.sqrt(float(e_p @ e_p))
            dr = math.sqrt(float(e_r @ e_r))
            if dp < 1e-9 and dr < 1e-9:
                return True
            remaining = max(dp / speed, dr / angular_speed, self.dt)
            RT = pose.rotation.T
            u = np.concatenate([RT @ (e_r / remaining), RT @ (e_p / remaining)])
            if self.world.quiescent and not self.world.in_contact:
                n_total = int(math.ceil(remaining / self.dt - 1e-9))
                k = self._jump_budget(n_total)
                if k:
                    if self._move_jump(pose, e_p, e_r, dp, dr, k, n_total, remaining, target, u):
                        continue
            w = self.cycle(u)
            if force_limit is not None and float(np.linalg.norm(w[3:])) >= force_limit:
                return False

    def _move_jump(self, pose, e_p, e_r, dp, dr, k, n_total, remaining, target, u) -> bool:
        frac_per_cycle = self.dt / remaining
        travel = dp + self._reach() * dr
        n_samples = max(2, int(math.ceil(travel * min(1.0, k * frac_per_cycle) / SAMPLE_SPACING)) + 1)
        fracs = np.linspace(0.0, min(1.0, k * frac_per_cycle), n_samples)
        R0, p0 = pose.rotation, pose.translation
        Rs = _exp_path(e_r, fracs) @ R0
        clear = self.world.clear_prefix_arrays(Rs, p0 + np.outer(fracs, e_p))
        if clear < 2:
            self._ff_cooldown = COOLDOWN
            return False
        f_ok = fracs[clear - 1]
        k_ok = min(k, int(math.floor(f_ok / frac_per_cycle + 1e-9)))
        if k_ok < MIN_JUMP:
            self._ff_cooldown = COOLDOWN
            return False
        if k_ok >= n_total:
            end = Pose._trusted(target.rotation, target.translation, pose.from_frame, pose.to_frame)
        else:
            f = k_ok * frac_per_cycle
            end = Pose._trusted(so3_exp(e_r * f) @ R0, p0 + e_p * f, pose.from_frame, pose.to_frame)
        self._jump(k_ok, end, u)
        return True

    def tcp_target(self, tcp_pose: Pose) -> Pose:
        """EE pose that puts the mounted tool's TCP at ``tcp_pose``."""
        ee = tcp_pose @ invert(self.world.tcp_offset).relabel("TCP", "EE")
        return ee.relabel(from_frame="B", to_frame="EE")

    def guarded_move(self, direction, speed: float, contact_threshold: float,
                     max_distance: float, sel: SelectionMatrices | None = None) -> ContactEvent:
        """Velocity move along a base-frame direction until contact.

        Contact is declared when the filtered force the tool exerts along
        ``direction`` reaches ``contact_threshold``.
        """
        if speed <= 0 or contact_threshold <= 0 or max_distance <= 0:
            raise ValueError("speed, threshold and distance must be positive")
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        sel = sel or SelectionMatrices.force_on()
        travelled = 0.0
        start = self.world.ee_pose.translation.copy()
        no_force = not any(sel.frc_axes)
        while True:
            remaining = max_distance - travelled
            if remaining <= 1e-12:
                return ContactEvent(False, self.pose, self.measured, travelled)
            v = min(speed, remaining / self.dt)
            R = self.world.ee_pose.rotation
            world = self.world
            if world.quiescent and not world.in_contact and (no_force or world.held is None):
                step = speed * self.dt
                free = min(world.clear_distance(d), remaining)
                k = self._jump_budget(int(math.floor(free / step)))
                if k:
                    pose = world.ee_pose
                    end = Pose._trusted(R, pose.translation + d * (k * step), pose.from_frame, pose.to_frame)
                    self._jump(k, end, np.concatenate([np.zeros(3), R.T @ (d * speed)]))
                    travelled = float(np.dot(self.world.ee_pose.translation - start, d))
                    continue
            scaled = np.concatenate([np.zeros(3), R.T @ (d * v)])
            self.hybrid(sel, scaled)
            travelled = float(np.dot(self.world.ee_pose.translation - start, d))
            if float(self.force_base() @ d) >= contact_threshold:
                return ContactEvent(True, self.pose, self.measured, travelled)

    def servo(self, sel: SelectionMatrices, scaled_twist: np.ndarray | None = None,
              f_des: np.ndarray | None = None, until=None, max_time: float = math.inf) -> bool:
        """Run the hybrid law until ``until(loop)`` is true or ``max_time`` passes."""
        scaled_twist = np.zeros(6) if scaled_twist is None else scaled_twist
        idle = not np.any(np.array(sel.vel_axes) * scaled_twist) and (
            f_des is None or not np.any(np.array(sel.frc_axes) * f_des))
        t_end = self.t + max_time
        while self.t < t_end - 1e-12:
            if idle and self._actuator_jump(t_end):
                if until is not None and until(self):
                    return True
                continue
            self.hybrid(sel, scaled_twist, f_des)
            if until is not None and until(self):
                return True
        return until is None

    def _actuator_jump(self, t_end: float) -> bool:
        """Skip cycles while only the fingers move through free space."""
        world = self.world
        if world.in_contact or world.frozen or world.actuator is None:
            return False
        if world.held is not None:
            return False
        g = world.gripper
        rate = 0.5 * (g.close_speed if world.actuator == "close" else g.open_speed) * self.dt
        travel = world.finger_clear_travel()
        if world.actuator == "open":
            tl, tr = world._open_target
            if tl > world.xl or tr < world.xr:
                return False  # narrowing: step it cycle by cycle
            travel = min(travel, max(world.xl - tl, tr - world.xr) + rate)
        n = int(math.floor(min(travel / rate, (t_end - self.t) / self.dt + 1e-9)))
        k = self._jump_budget(n)
        if not k:
            return False
        self._jump(k, world.ee_pose, np.zeros(6))
        return True

    def hold(self, duration: float) -> None:
        n = max(1, int(round(duration / self.dt)))
        zero = np.zeros(6)
        t_end = self.t + n * self.dt
        while self.t < t_end - 1e-9:
            world = self.world
            if world.actuator is not None and self._actuator_jump(t_end):
                continue
            if world.actuator is None and world.quiescent and not world.in_contact:
                k = self._jump_budget(int(round((t_end - self.t) / self.dt)))
                if k:
                    self._jump(k, world.ee_pose, zero)
                    continue
            self.cycle(zero)

    def twist_move(self, unit_twist: np.ndarray, amount: float, rate: float,
                   sel: SelectionMatrices | None = None, check=None) -> float:
        """Apply ``unit_twist * rate`` (EE frame) until ``amount`` of progress.

        Progress counts what the plant actually executed, so an Alert cap
        stretches the motion in time without changing its extent. ``check``
        is called after every cycle and may abort the motion by returning True.
        Returns the progress achieved.
        """
        sel = sel or SelectionMatrices.force_on()
        unit_twist = np.asarray(unit_twist, dtype=float)
        done = 0.0
        while amount - done > 1e-12:
            r = min(rate, (amount - done) / self.dt)
            if check is None and r == rate and (not any(sel.frc_axes) or self.world.held is None):
                k_done = self._twist_jump(unit_twist * rate, int(math.floor((amount - done) / (rate * self.dt) + 1e-9)))
                if k_done:
                    done += k_done * rate * self.dt
                    continue
            self.hybrid(sel, unit_twist * r)
            done += r * self.dt * self.gate_factor
            if check is not None and check(self):
                break
        return done

    def _twist_jump(self, u: np.ndarray, n: int) -> int:
        world = self.world
        if not (world.quiescent and not world.in_contact):
            return 0
        k = self._jump_budget(n)
        if not k:
            return 0
        pose = world.ee_pose
        R, p = pose.rotation, pose.translation
        reach = self._reach()
        per_cycle = (float(np.linalg.norm(u[3:])) + reach * float(np.linalg.norm(u[:3]))) * self.dt
        every = max(1, int(SAMPLE_SPACING / max(per_cycle, 1e-12)))
        poses = [pose]
        ends = [0]
        for i in range(1, k + 1):
            R, p = _integrate(R, p, u, self.dt)
            if i % every == 0 or i == k:
                poses.append(Pose._trusted(R, p, pose.from_frame, pose.to_frame))
                ends.append(i)
        clear = self._path_prefix(poses)
        if clear < 2 or ends[clear - 1] < MIN_JUMP:
            self._ff_cooldown = COOLDOWN
            return 0
        k_ok = ends[clear - 1]
        self._jump(k_ok, poses[clear - 1], u)
        return k_ok


def _exp_path(omega: np.ndarray, fracs: np.ndarray) -> np.ndarray:
    """Stacked ``so3_exp(omega * f)`` for every f in ``fracs``."""
    theta = math.sqrt(float(omega @ omega))
    out = np.broadcast_to(np.eye(3), (len(fracs), 3, 3)).copy()
    if theta < 1e-12:
        return out
    wx, wy, wz = omega / theta
    K = np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])
    ang = fracs * theta
    return out + np.sin(ang)[:, None, None] * K + (1.0 - np.cos(ang))[:, None, None] * (K @ K)


def guarded_move(loop: ControlLoop, direction, speed: float, contact_threshold: float,
                 max_distance: float) -> ContactEvent:
    return loop.guarded_move(direction, speed, contact_threshold, max_distance)
