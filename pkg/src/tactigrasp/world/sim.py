"""Quasi-static grasping simulator.

The mounted tool is a cloud of sample points in the TCP frame, grouped into
patches (finger pads, fingertips, finger backs, palm, suction cups, cup
bar).  A point inside a scene body is pushed out along the body's surface
normal with a spring force; every patch shares one stiffness (split evenly
over its points, so a face lying flat on a surface reads ``k * depth``) and
one force cap.

Objects never move on their own.  A grasped object follows the gripper
unless its fixture is still engaged, in which case it resists with a spring
pull (and a torque for rigid fixtures) until the grip slips or the fixture
releases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..config import ContactConfig
from ..geometry import Pose, Wrench6, rotation_about, so3_log
from ..sensing import FingerPair, PressureImage
from .bodies import Body
from .kernels import blocked_prefix, contact_forces, sweep_entry_min
from .scene import GripperModel, ObjectSpec, Scene

TABLE_ID = "table"
ATTACHMENTS = ("none", "fingers", "vacuum")
SWEEP_MARGIN = 0.003


class NothingGrasped(RuntimeError):
    """Fingers met without an object between them."""


@dataclass(frozen=True, eq=False)
class ContactState:
    touching: bool
    penetration: float
    wrench: Wrench6
    held_object: str | None = None
    attachment: str = "none"
    pad_forces: tuple[float, float] = (0.0, 0.0)
    pad_bodies: tuple[str | None, str | None] = (None, None)
    fingers: FingerPair | None = None
    grasp_failed: bool = False

    def __post_init__(self):
        if self.penetration < 0:
            raise ValueError("penetration must be non-negative")
        if self.attachment not in ATTACHMENTS:
            raise ValueError(f"unknown attachment {self.attachment!r}")
        if self.held_object is not None and self.attachment == "none":
            raise ValueError("a held object needs an attachment")


class FixtureState:
    """Mechanical fixture holding a scene object in place."""

    def __init__(self, kind: str = "none", axis=(0.0, 0.0, 1.0), release_angle: float = 0.0):
        self.kind = kind
        self.axis = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
        self.release_angle = release_angle
        self.angle = 0.0
        self.released = kind == "none"

    @property
    def engaged(self) -> bool:
        return not self.released

    def update(self, delta_angle: float) -> bool:
        """Accumulate rotation about the fixture axis; return whether released."""
        if self.kind == "rotary" and not self.released:
            self.angle += delta_angle
            if abs(self.angle) >= self.release_angle - 1e-12:
                self.released = True
        return self.released


@dataclass(frozen=True)
class WeightCheck:
    passed: bool
    force_up: float
    pulled: bool = False

    def __bool__(self) -> bool:
        return self.passed


class ToolGeometry:
    """Sample points of one gripper in its TCP frame (fingers fully closed)."""

    def __init__(self, g: GripperModel, contact: ContactConfig):
        self.gripper = g
        pts, side, names, stiff = [], [], [], []

        def add(name, points, s, k_total):
            points = np.asarray(points, dtype=float).reshape(-1, 3)
            pts.append(points)
            side.append(np.full(len(points), s))
            names.append(name)
            stiff.append(np.full(len(points), k_total / len(points)))

        k = contact.stiffness
        if g.has_fingers:
            R, C, pitch, t = g.pad_rows, g.pad_cols, g.cell_pitch, g.finger_thickness
            ys = (np.arange(C) - 0.5 * (C - 1)) * pitch
            zs = -(R - 0.5 - np.arange(R)) * pitch
            pad = np.array([[0.0, y, z] for z in zs for y in ys])
            tip = np.array([[-f * t, y, 0.0] for f in (0.2, 0.5, 0.8) for y in ys])
            back_z = np.linspace(-g.finger_length, 0.0, max(3, R // 2))
            back = np.array([[-t, y, z] for z in back_z for y in ys])
            mirror = np.array([-1.0, 1.0, 1.0])
            add("pad_left", pad, -1, contact.pad_stiffness)
            add("pad_right", pad * mirror, 1, contact.pad_stiffness)
            add("tip_left", tip, -1, k)
            add("tip_right", tip * mirror, 1, k)
            add("back_left", back, -1, k)
            add("back_right", back * mirror, 1, k)
            half = 0.5 * g.max_opening + t
            palm = np.array([[x, y, -g.finger_length]
                             for x in np.linspace(-half, half, 7)
                             for y in np.linspace(-g.palm_half_width, g.palm_half_width, 3)])
            add("palm", palm, 0, k)
            self.pad_size = (R, C)
        else:
            r = 0.5 * g.cup_diameter
            ang = np.linspace(0.0, 2.0 * np.pi, 12, endpoint=False)
            offsets = [0.0] if g.cup_count == 1 else [-0.5 * g.cup_spacing, 0.5 * g.cup_spacing]
            self.cup_centers = np.array([[0.0, y, 0.0] for y in offsets])
            for i, y in enumerate(offsets):
                rim = np.column_stack([r * np.cos(ang), y + r * np.sin(ang), np.zeros(12)])
                add(f"cup_{i}", np.vstack([rim, [[0.0, y, 0.0]]]), 0, contact.cup_stiffness)
            span = abs(offsets[-1]) + r
            bar = np.array([[x, y, -g.cup_height]
                            for x in np.linspace(-g.body_half_width, g.body_half_width, 3)
                            for y in np.linspace(-span, span, 7)])
            add("bar", bar, 0, k)
            self.pad_size = None
        self.soft = None
        self.pads = None

        self.base = np.vstack(pts)
        if g.has_fingers:
            self.pads = np.concatenate([np.full(len(p), n.startswith("pad_")) for n, p in zip(names, pts)])
        else:
            self.soft = np.concatenate([np.full(len(p), n.startswith("cup_")) for n, p in zip(names, pts)])
        self.side = np.concatenate(side)
        self.patch = np.concatenate([np.full(len(p), i) for i, p in enumerate(pts)])
        self.k = np.concatenate(stiff)
        self.names = names
        self.n_patches = len(names)
        self.slices = {}
        start = 0
        for name, p in zip(names, pts):
            self.slices[name] = slice(start, start + len(p))
            start += len(p)
        self.left = self.side < 0
        self.right = self.side > 0
        n = len(self.base)
        self.soft_mask = self.soft if self.soft is not None else np.zeros(n, dtype=bool)
        self.pad_mask = self.pads if self.pads is not None else np.zeros(n, dtype=bool)
        self._left_x = self.left.astype(float)
        self._right_x = self.right.astype(float)
        # point groups used for swept clearance checks
        if g.has_fingers:
            self.groups = [self.left, self.right, self.side == 0]
        else:
            self.groups = [self.patch == i for i in range(self.n_patches)]
        self.group_index = np.full(n, -1, dtype=np.int64)
        for i, mask in enumerate(self.groups):
            self.group_index[mask] = i

    def points(self, xl: float = 0.0, xr: float = 0.0) -> np.ndarray:
        P = self.base.copy()
        P[:, 0] += xl * self._left_x + xr * self._right_x
        return P

    def cup_rim(self, cup: int) -> slice:
        s = self.slices[f"cup_{cup}"]
        return slice(s.start, s.stop - 1)


class World:
    """One simulated work cell, owned by exactly one control loop."""

    def __init__(self, scene: Scene, target: str | None = None, gripper: str = "A", seed: int = 0,
                 ee_pose: Pose | None = None):
        self.scene = scene
        self.cfg = scene.contact
        self.g_vec = np.array([0.0, 0.0, self.cfg.gravity])
        seq = np.random.SeedSequence(int(seed) & (2 ** 64 - 1))
        sensor_seq, vacuum_seq = seq.spawn(2)
        self.sensor_rng = np.random.default_rng(sensor_seq)
        self.vacuum_rng = np.random.default_rng(vacuum_seq)
        s = scene.sensor
        self.sigma = np.array([s.sigma_torque] * 3 + [s.sigma_force] * 3)

        min_layer = scene.object(target).layer if target is not None else -math.inf
        self.specs: dict[str, ObjectSpec] = {}
        self.fixtures: dict[str, FixtureState] = {}
        self.bodies: list[Body] = []
        for o in scene.objects:
            if o.layer < min_layer:
                continue  # removed in an earlier disassembly step
            half = np.array([0.5 * o.true_dims[0], 0.5 * o.true_dims[1], 0.5 * o.height])
            self.bodies.append(Body(o.id, o.shape, o.rotation, o.true_center, half, True,
                                    groove=o.groove_width))
            self.specs[o.id] = o
            self.fixtures[o.id] = FixtureState(o.fixture.kind, o.fixture.axis, o.fixture.release_angle)
        for ob in scene.obstacles:
            half = np.array([0.5 * ob.dims[0], 0.5 * ob.dims[1], 0.5 * ob.height])
            self.bodies.append(Body(ob.id, ob.shape, np.eye(3), ob.center, half, False))
        if TABLE_ID not in {b.id for b in self.bodies}:
            self.bodies.append(Body(TABLE_ID, "box", np.eye(3), [0.0, 0.0, -0.05], [2.0, 2.0, 0.05], False))
        for i, b in enumerate(self.bodies):
            b.index = i
        self.by_id = {b.id: b for b in self.bodies}

        self.t = 0.0
        self.ee_pose = ee_pose if ee_pose is not None else scene.safe_pose
        self.frozen = False
        self.held: str | None = None
        self.attachment = "none"
        self.delivered: list[str] = []
        self.events: list[tuple[float, str]] = []
        self._init_body_arrays()
        self._set_active()
        self.mount(gripper)

    # -- body bookkeeping ------------------------------------------------------
    def _init_body_arrays(self) -> None:
        m = len(self.bodies)
        self._b_lo = np.zeros((m, 3))
        self._b_hi = np.zeros((m, 3))
        self._b_R = np.zeros((m, 3, 3))
        self._b_c = np.zeros((m, 3))
        self._b_half = np.array([b.half for b in self.bodies])
        self._b_cyl = np.array([b.shape == "cylinder" for b in self.bodies])
        self._active_mask = np.ones(m, dtype=bool)
        for b in self.bodies:
            self._sync_body(b)

    def _sync_body(self, b: Body) -> None:
        i = b.index
        self._b_lo[i], self._b_hi[i], self._b_R[i], self._b_c[i] = b.lo, b.hi, b.R, b.c

    def _set_active(self, exclude: str | None = None) -> None:
        for b in self.bodies:
            self._active_mask[b.index] = b.id != exclude and b.id not in self.delivered

    def _active_bodies(self) -> list[Body]:
        return [b for b in self.bodies if self._active_mask[b.index]]

    # -- tool ----------------------------------------------------------------
    def mount(self, kind: str) -> None:
        """Instant tool change."""
        if self.held is not None:
            raise RuntimeError("cannot change tools while holding an object")
        self.gripper = self.scene.grippers[kind]
        self.tool = ToolGeometry(self.gripper, self.cfg)
        self.tcp_length = self.gripper.tcp_length
        self.tcp_offset = self.gripper.tcp_offset
        half = 0.5 * self.gripper.max_opening
        self.xl, self.xr = -half, half
        self.actuator: str | None = None
        self.target_force = 0.0
        self._open_target = (self.xl, self.xr)
        self.grasp_failed = False
        self.vacuum_on = False
        self.vacuum_cups: tuple[int, ...] = ()
        self._frozen_images = None
        self._grasp_R = np.eye(3)
        self._grasp_p = np.zeros(3)
        self._held_wrench = np.zeros(6)
        self._refresh()

    @property
    def width(self) -> float:
        return self.xr - self.xl

    @property
    def closing(self) -> bool:
        return self.actuator == "close"

    # -- simulation step -----------------------------------------------------
    def advance(self, pose: Pose, dt: float) -> None:
        self.t += dt
        self.ee_pose = pose
        self._step_actuators(dt)
        self._update_held()
        self._refresh()

    def _refresh(self) -> None:
        self._contact = self._evaluate(self.ee_pose)
        if self.actuator == "close":
            self._check_attach()

    def freeze(self) -> None:
        self.frozen = True

    def unfreeze(self) -> None:
        self.frozen = False

    def _event(self, name: str) -> None:
        self.events.append((self.t, name))

    # -- contact -------------------------------------------------------------
    def _tcp(self, pose: Pose):
        R = pose.rotation
        return R, pose.translation + R[:, 2] * self.tcp_length

    def tool_points(self, pose: Pose | None = None) -> np.ndarray:
        """Tool sample points in base coordinates."""
        R, t = self._tcp(pose or self.ee_pose)
        return self.tool.points(self.xl, self.xr) @ R.T + t

    def _evaluate(self, pose: Pose) -> dict:
        R, t = self._tcp(pose)
        P = self.tool.points(self.xl, self.xr) @ R.T + t
        out = {"P": P, "touching": False, "F": None, "depth": 0.0,
               "wrench": self._held_wrench, "pad": (0.0, 0.0), "pad_bodies": (None, None)}
        tool = self.tool
        F, pf, deepest, owner, fm, touching = contact_forces(
            P, tool.k, tool.soft_mask, tool.pad_mask, np.ascontiguousarray(R[:, 0]), tool.patch,
            tool.n_patches, self.cfg.force_cap, pose.translation,
            self._b_lo, self._b_hi, self._b_R, self._b_c, self._b_half, self._b_cyl, self._active_mask)
        if not touching:
            return out
        Rt = pose.rotation.T
        wrench = np.concatenate([Rt @ fm[:3], Rt @ fm[3:]]) + self._held_wrench
        out.update(touching=True, F=F, depth=float(deepest.max()), wrench=wrench, owner=owner,
                   deepest=deepest)
        self._pad_summary(out, pf, deepest, owner)
        return out

    def _pad_summary(self, out: dict, pf: np.ndarray, deepest: np.ndarray, owner: np.ndarray) -> None:
        if self.tool.pad_size is None:
            return
        pads, bodies = [], []
        for name in ("pad_left", "pad_right"):
            i = self.tool.names.index(name)
            s = self.tool.slices[name]
            pads.append(float(np.linalg.norm(pf[i])))
            seg = deepest[s]
            j = int(np.argmax(seg))
            bodies.append(self.bodies[owner[s][j]].id if seg[j] > 0 else None)
        out["pad"] = tuple(pads)
        out["pad_bodies"] = tuple(bodies)

    def _evaluate_reference(self, pose: Pose) -> dict:
        """Plain numpy contact evaluation; the compiled kernel must agree with it."""
        R, t = self._tcp(pose)
        P = self.tool.points(self.xl, self.xr) @ R.T + t
        lo = P.min(axis=0)
        hi = P.max(axis=0)
        hits = [b for b in self.bodies if self._active_mask[b.index]
                and not (np.any(hi < b.lo) or np.any(lo > b.hi))]
        out = {"P": P, "touching": False, "F": None, "depth": 0.0,
               "wrench": self._held_wrench, "pad": (0.0, 0.0), "pad_bodies": (None, None)}
        if not hits:
            return out
        n = len(P)
        F = np.zeros((n, 3))
        deepest = np.zeros(n)
        owner = np.full(n, -1)
        for b in hits:
            inside = np.all((P >= b.lo) & (P <= b.hi), axis=1)
            if not inside.any():
                continue
            idx = np.flatnonzero(inside)
            d, nrm = b.penetration(P[idx])
            if self.tool.soft is not None:
                # cup bellows only compress along the face they sit over
                soft = self.tool.soft[idx]
                if soft.any():
                    h, over = b.top_face(P[idx[soft]], groove=False)
                    top = over & (h < 0.0)
                    j = np.flatnonzero(soft)[top]
                    d[j] = -h[top]
                    nrm[j] = b.normal
            pos = d > 0.0
            if not pos.any():
                continue
            idx, d, nrm = idx[pos], d[pos], nrm[pos]
            F[idx] += (self.tool.k[idx] * d)[:, None] * nrm
            deeper = d > deepest[idx]
            deepest[idx[deeper]] = d[deeper]
            owner[idx[deeper]] = b.index
        if not deepest.any():
            return out
        if self.tool.pads is not None:
            # pad friction holds tangential load: pads push along their normal only
            ex = R[:, 0]
            F[self.tool.pads] = np.outer(F[self.tool.pads] @ ex, ex)
        patch = self.tool.patch
        pf = np.column_stack([np.bincount(patch, weights=F[:, k], minlength=self.tool.n_patches)
                              for k in range(3)])
        mag = np.linalg.norm(pf, axis=1)
        scale = np.where(mag > self.cfg.force_cap, self.cfg.force_cap / np.maximum(mag, 1e-300), 1.0)
        F *= scale[patch][:, None]
        pf *= scale[:, None]
        # wrench the tool exerts on its surroundings, about the EE origin
        p_ee = pose.translation
        f_env = -F.sum(axis=0)
        m_env = -np.cross(P - p_ee, F).sum(axis=0)
        Rt = pose.rotation.T
        wrench = np.concatenate([Rt @ m_env, Rt @ f_env]) + self._held_wrench
        out.update(touching=True, F=F, depth=float(deepest.max()), wrench=wrench, owner=owner,
                   deepest=deepest)
        self._pad_summary(out, pf, deepest, owner)
        return out

    def wrench_vector(self, ee_pose: Pose | None = None) -> np.ndarray:
        """Noise-free [torque, force] the tool exerts, in EE axes."""
        if ee_pose is None or ee_pose is self.ee_pose:
            return self._contact["wrench"].copy()
        return self._evaluate(ee_pose)["wrench"].copy()

    def sensor_noise(self) -> np.ndarray:
        return self.sensor_rng.standard_normal(6) * self.sigma

    def measure(self) -> np.ndarray:
        return self._contact["wrench"] + self.sensor_noise()

    def measure_filtered(self, alpha: float) -> np.ndarray:
        """A reading as a settled single-pole filter would report it."""
        return self._contact["wrench"] + self.sensor_noise() * math.sqrt(alpha / (2.0 - alpha))

    @property
    def pad_forces(self) -> tuple[float, float]:
        return self._contact["pad"]

    @property
    def in_contact(self) -> bool:
        return self._contact["touching"]

    def pressure_images(self) -> FingerPair | None:
        if self.tool.pad_size is None:
            return None
        if self._frozen_images is not None:
            return self._frozen_images
        return self._images(self._contact)

    def _images(self, c: dict) -> FingerPair:
        rows, cols = self.tool.pad_size
        pitch = self.gripper.cell_pitch
        imgs = []
        for name in ("pad_left", "pad_right"):
            if c["F"] is None:
                p = np.zeros((rows, cols))
            else:
                p = np.linalg.norm(c["F"][self.tool.slices[name]], axis=1).reshape(rows, cols)
            imgs.append(PressureImage(p, pitch))
        return FingerPair(imgs[0], imgs[1], max(self.width, 0.0))

    def contact_state(self, ee_pose: Pose | None = None) -> ContactState:
        c = self._contact if ee_pose is None else self._evaluate(ee_pose)
        fingers = None
        if self.tool.pad_size is not None:
            fingers = self._frozen_images if (self._frozen_images is not None and ee_pose is None) \
                else self._images(c)
        return ContactState(
            touching=c["touching"], penetration=c["depth"],
            wrench=Wrench6.from_vector(c["wrench"], "EE"),
            held_object=self.held, attachment=self.attachment,
            pad_forces=c["pad"], pad_bodies=c["pad_bodies"], fingers=fingers,
            grasp_failed=self.grasp_failed,
        )

    # -- fingers -------------------------------------------------------------
    def close_fingers(self, target_force: float | None = None) -> None:
        if not self.gripper.has_fingers:
            raise ValueError("the mounted gripper has no fingers")
        self.actuator = "close"
        self.target_force = self.gripper.grip_force if target_force is None else float(target_force)
        self.grasp_failed = False
        self._check_attach()

    def grip(self, target_force: float | None = None, dt: float = 0.002, max_time: float = 5.0) -> ContactState:
        """Close in place until the fingers hold something or meet.

        Raises :class:`NothingGrasped` when they meet with nothing between.
        """
        self.close_fingers(target_force)
        t_end = self.t + max_time
        while self.actuator == "close" and self.t < t_end:
            self.advance(self.ee_pose, dt)
        if self.grasp_failed:
            raise NothingGrasped("fingers met with no object between them")
        return self.contact_state()

    def open_fingers(self, width: float | None = None) -> None:
        if not self.gripper.has_fingers:
            raise ValueError("the mounted gripper has no fingers")
        if self.held is not None:
            self.release()
        w_max = self.gripper.max_opening
        w = w_max if width is None else min(max(float(width), 0.0), w_max)
        grow = 0.5 * (w - self.width)
        xl, xr = self.xl - grow, self.xr + grow
        # keep inside the stroke, shifting the pair if needed
        half = 0.5 * w_max
        if xl < -half:
            xr, xl = xr + (-half - xl), -half
        if xr > half:
            xl, xr = xl - (xr - half), half
        self._open_target = (max(xl, -half), xr)
        self.actuator = "open"
        self.grasp_failed = False

    def _step_actuators(self, dt: float) -> None:
        if self.frozen or self.actuator is None:
            return
        g = self.gripper
        if self.actuator == "close":
            step = 0.5 * g.close_speed * dt
            fl, fr = self._contact["pad"]
            if fl < self.target_force:
                self.xl += step
            if fr < self.target_force:
                self.xr -= step
            if self.xr - self.xl <= 0.0:
                mid = 0.5 * (self.xl + self.xr)
                self.xl = self.xr = mid
                self.actuator = None
                self.grasp_failed = True
                self._event("nothing_grasped")
        elif self.actuator == "open":
            step = 0.5 * g.open_speed * dt
            tl, tr = self._open_target
            # fingers move toward their targets, which may also be inward
            self.xl = tl if abs(self.xl - tl) <= step else self.xl + math.copysign(step, tl - self.xl)
            self.xr = tr if abs(self.xr - tr) <= step else self.xr + math.copysign(step, tr - self.xr)
            if self.xl == tl and self.xr == tr:
                self.actuator = None

    def _check_attach(self) -> None:
        fl, fr = self._contact["pad"]
        bl, br = self._contact["pad_bodies"]
        if fl >= self.target_force and fr >= self.target_force and bl is not None and bl == br \
                and self.by_id[bl].graspable:
            images = self._images(self._contact)
            self.actuator = None
            self._attach(bl, "fingers")
            self._frozen_images = images

    # -- vacuum --------------------------------------------------------------
    def vacuum(self, on: bool, cups=None) -> ContactState:
        if self.gripper.has_fingers:
            raise ValueError("the mounted gripper has no suction cups")
        if not on:
            self.vacuum_on = False
            self.vacuum_cups = ()
            if self.held is not None:
                self.release()
            return self.contact_state()
        cups = tuple(range(self.gripper.cup_count)) if cups is None else tuple(sorted(set(cups)))
        if not cups or any(c < 0 or c >= self.gripper.cup_count for c in cups):
            raise ValueError(f"invalid cup selection {cups}")
        self.vacuum_on = True
        self.vacuum_cups = cups
        draw = float(self.vacuum_rng.random())
        body = self._seal_body(cups)
        if body is not None:
            spec = self.specs[body.id]
            if draw < self.cfg.leak_success.get(spec.surface, 0.0):
                self._attach(body.id, "vacuum")
            else:
                self._event("vacuum_leak")
        return self.contact_state()

    def cup_sealed(self, cup: int) -> str | None:
        """Body id a single cup would seal on at the current pose, if any."""
        body = self._seal_body((cup,))
        return body.id if body is not None else None

    def _seal_body(self, cups) -> Body | None:
        R, t = self._tcp(self.ee_pose)
        P = self.tool.points() @ R.T + t
        approach = R[:, 2]
        found = None
        for cup in cups:
            rim = P[self.tool.cup_rim(cup)]
            sealed = None
            for b in self._active_bodies():
                if not b.graspable:
                    continue
                if -float(approach @ b.normal) < math.cos(self.cfg.cup_max_tilt):
                    continue
                h, over = b.top_face(rim)
                if over.all() and np.all(h <= self.cfg.seal_gap) and np.all(h >= -self.cfg.cup_stroke):
                    sealed = b
                    break
            if sealed is None or (found is not None and sealed is not found):
                return None
            found = sealed
        return found

    # -- holding -------------------------------------------------------------
    def _attach(self, body_id: str, how: str) -> None:
        b = self.by_id[body_id]
        R, p = self.ee_pose.rotation, self.ee_pose.translation
        self._grasp_R = R.T @ b.R
        self._grasp_p = R.T @ (b.c - p)
        self.held = body_id
        self.attachment = how
        self._set_active(exclude=body_id)
        self._event(f"attach:{how}:{body_id}")
        self._update_held()
        self._refresh()

    def release(self) -> str | None:
        """Let go of the held object; it stays where it is."""
        held = self.held
        if held is None:
            return None
        self.held = None
        self.attachment = "none"
        self._frozen_images = None
        self._held_wrench = np.zeros(6)
        self._set_active()
        self._event(f"release:{held}")
        self._refresh()
        return held

    def deliver(self) -> str | None:
        """Drop the held object at the release station (removes it from the cell)."""
        held = self.held
        if held is None:
            return None
        self.delivered.append(held)
        if self.attachment == "vacuum":
            self.vacuum_on = False
            self.vacuum_cups = ()
        self.release()
        self._event(f"delivered:{held}")
        return held

    def _slip(self, why: str) -> None:
        held = self.held
        self.held = None
        self.attachment = "none"
        self._frozen_images = None
        self._held_wrench = np.zeros(6)
        self._set_active()
        self._event(f"slip:{why}:{held}")

    def _update_held(self) -> None:
        if self.held is None:
            self._held_wrench = np.zeros(6)
            return
        b = self.by_id[self.held]
        spec = self.specs[b.id]
        fx = self.fixtures[b.id]
        R_ee, p_ee = self.ee_pose.rotation, self.ee_pose.translation
        R_t = R_ee @ self._grasp_R
        p_t = p_ee + R_ee @ self._grasp_p
        g = self.gripper
        if fx.engaged:
            torque = np.zeros(3)
            if fx.kind == "rotary":
                axis = b.R @ fx.axis
                dth = float(so3_log(R_t @ b.R.T) @ axis)
                if dth != 0.0:
                    b.set_pose(rotation_about(axis, dth) @ b.R, b.c)
                    self._sync_body(b)
                    torque += math.copysign(self.cfg.rotary_friction, dth) * axis
                    if fx.update(dth):
                        self._event(f"fixture_released:{b.id}")
            if fx.engaged:
                torque += self.cfg.hold_rot_stiffness * so3_log(R_t @ b.R.T)
                force = self.cfg.hold_stiffness * (p_t - b.c)
                limit = self._hold_limit()
                if np.linalg.norm(force) > limit or (
                        g.has_fingers and np.linalg.norm(torque) > g.hold_torque):
                    self._slip("pull")
                    return
                self._set_held_wrench(force, torque, b.c)
                return
        b.set_pose(R_t, p_t)
        self._sync_body(b)
        weight = spec.mass * self.g_vec
        if np.linalg.norm(weight) > self._hold_limit():
            self._slip("weight")
            return
        self._set_held_wrench(weight, np.zeros(3), b.c)

    def _hold_limit(self) -> float:
        if self.attachment == "vacuum":
            return len(self.vacuum_cups) * self.cfg.cup_hold_force
        return self.gripper.hold_force

    def _set_held_wrench(self, force, torque, at) -> None:
        R, p = self.ee_pose.rotation, self.ee_pose.translation
        m = torque + np.cross(at - p, force)
        self._held_wrench = np.concatenate([R.T @ m, R.T @ force])

    def fixture_update(self, obj_id: str, delta_angle: float) -> FixtureState:
        fx = self.fixtures[obj_id]
        fx.update(delta_angle)
        return fx

    @property
    def suspended(self) -> bool:
        return self.held is not None and self.fixtures[self.held].released

    def lift_weight_check(self, expected_min_mass: float, samples: int = 50,
                          tolerance: float = 0.05) -> WeightCheck:
        """Average the upward force over ``samples`` readings and compare to the weight."""
        R = self.ee_pose.rotation
        total = 0.0
        for _ in range(samples):
            total += float(R[2] @ self.measure()[3:])
        f_up = total / samples
        if self.held is not None and not self.fixtures[self.held].released:
            self._event("pull")
            return WeightCheck(False, f_up, pulled=True)
        passed = self.suspended and f_up >= expected_min_mass * self.cfg.gravity - tolerance
        return WeightCheck(bool(passed), f_up)

    # -- clearance queries used to skip contact-free stretches -----------------
    @property
    def quiescent(self) -> bool:
        """No actuator moving and any held object following the gripper freely."""
        return self.actuator is None and not self.frozen and (
            self.held is None or self.fixtures[self.held].released)

    def clear_prefix(self, poses, margin: float = SWEEP_MARGIN) -> int:
        """Number of leading ``poses`` reachable without touching any body's box.

        The tool's point groups are boxed over each pair of consecutive poses,
        so samples must be close enough that no tool point strays more than
        ``margin`` from the straight segment between them.
        """
        if len(poses) == 0:
            return 0
        return self.clear_prefix_arrays(np.stack([p.rotation for p in poses]),
                                        np.stack([p.translation for p in poses]), margin)

    def clear_prefix_arrays(self, Rs: np.ndarray, ps: np.ndarray, margin: float = SWEEP_MARGIN) -> int:
        """:meth:`clear_prefix` for EE poses given as stacked rotations and positions."""
        n = len(Rs)
        ts = ps + Rs[:, :, 2] * self.tcp_length
        local = self.tool.points(self.xl, self.xr)
        clouds = np.matmul(local, Rs.transpose(0, 2, 1)) + ts[:, None, :]
        tool = self.tool
        first_bad = blocked_prefix(clouds, tool.group_index, len(tool.groups), margin,
                                   self._b_lo, self._b_hi, self._active_mask)
        if n == 1:
            return 0 if first_bad == 0 else 1
        # segment j blocked means poses 0..j are the most we can trust
        return n if first_bad == n else first_bad + 1

    def path_clear(self, poses, margin: float = SWEEP_MARGIN) -> bool:
        return self.clear_prefix(poses, margin) == len(poses)

    def _group_boxes(self, poses) -> list[tuple[np.ndarray, np.ndarray]]:
        boxes = []
        clouds = [self.tool_points(p) for p in poses]
        for mask in self.tool.groups:
            lo = np.min([c[mask].min(axis=0) for c in clouds], axis=0)
            hi = np.max([c[mask].max(axis=0) for c in clouds], axis=0)
            boxes.append((lo, hi))
        return boxes

    def clear_distance(self, direction, margin: float = SWEEP_MARGIN) -> float:
        """How far the tool can translate along ``direction`` before any box contact."""
        d = np.asarray(direction, dtype=float)
        best = math.inf
        for lo, hi in self._group_boxes([self.ee_pose]):
            best = min(best, sweep_entry_min(lo, hi, d, margin, self._b_lo, self._b_hi, self._active_mask))
        return best

    def finger_clear_travel(self, margin: float = SWEEP_MARGIN) -> float:
        """How far both fingers can close (or open) before any box contact."""
        if not self.gripper.has_fingers:
            return 0.0
        R, t = self._tcp(self.ee_pose)
        P = self.tool.points(self.xl, self.xr) @ R.T + t
        sign = 1.0 if self.actuator != "open" else -1.0
        best = math.inf
        for mask, s in ((self.tool.left, sign), (self.tool.right, -sign)):
            lo, hi = P[mask].min(axis=0), P[mask].max(axis=0)
            d = R[:, 0] * s
            best = min(best, sweep_entry_min(lo, hi, d, margin, self._b_lo, self._b_hi, self._active_mask))
        return best


def contact_query(gripper_pose: Pose, gripper: GripperModel, scene: Scene, width: float | None = None) -> ContactState:
    """Contact state of a free-standing gripper at ``gripper_pose`` (EE pose)."""
    grippers = dict(scene.grippers)
    grippers[gripper.kind] = gripper
    world = World(replace(scene, grippers=grippers), gripper=gripper.kind, ee_pose=gripper_pose)
    if width is not None and gripper.has_fingers:
        world.xl, world.xr = -0.5 * width, 0.5 * width
        world._refresh()
    return world.contact_state()

