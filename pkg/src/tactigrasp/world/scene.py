"""Scene description: objects, obstacles, grippers, vision noise, knobs.

Scene files are JSON with a ``schema_version`` field; see
``tactigrasp/scenes/*.json`` for the shipped examples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

from ..config import ConfigError, ContactConfig, ControllerConfig, SensorConfig, StrategyConfig
from ..geometry import ObjectEstimate, Pose, rotation_about, rotation_from_approach_orientation

SCHEMA_VERSION = 1
SHAPES = ("box", "cylinder")
SURFACES = ("flat", "laminated", "curved")
FIXTURES = ("none", "rotary", "rigid")
GRIPPER_KINDS = ("A", "B", "C")

_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_vec2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCENE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "objects"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "objects": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "shape", "center", "dims", "height", "mass"],
                "properties": {
                    "id": {"type": "string"},
                    "shape": {"enum": list(SHAPES)},
                    "center": _vec3,
                    "normal": _vec3,
                    "dims": _vec2,
                    "height": {"type": "number"},
                    "mass": {"type": "number"},
                    "surface": {"enum": list(SURFACES)},
                    "side_surface": {"enum": list(SURFACES)},
                    "fixture": {
                        "type": "object",
                        "required": ["kind"],
                        "properties": {
                            "kind": {"enum": list(FIXTURES)},
                            "axis": _vec3,
                            "release_angle": {"type": "number"},
                        },
                        "additionalProperties": False,
                    },
                    "strategies": {"type": "array", "items": {"enum": list(GRIPPER_KINDS)}},
                    "classes": {"type": "array", "items": {"type": "string"}},
                    "layer": {"type": "integer"},
                    "expected_min_mass": {"type": "number"},
                    "heavy": {"type": "boolean"},
                    "delicate": {"type": "boolean"},
                    "cluttered": {"type": "boolean"},
                    "groove_width": {"type": "number"},
                    "description": {"type": "string"},
                },
                "additionalProperties": False,
            },
        },
        "obstacles": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "center", "dims", "height"],
                "properties": {
                    "id": {"type": "string"},
                    "shape": {"enum": list(SHAPES)},
                    "center": _vec3,
                    "dims": _vec2,
                    "height": {"type": "number"},
                },
                "additionalProperties": False,
            },
        },
        "gripper": {
            "type": "object",
            "properties": {k: {"type": "object"} for k in GRIPPER_KINDS},
            "additionalProperties": False,
        },
        "noise": {
            "type": "object",
            "properties": {
                "sigma_x": _vec3,
                "sigma_n": {"type": "number"},
                "sigma_d": _vec2,
                "distribution": {"enum": ["gaussian", "uniform"]},
                "seed": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "controller": {"type": "object"},
        "contact": {"type": "object"},
        "sensor": {"type": "object"},
        "strategy": {"type": "object"},
        "robot": {
            "type": "object",
            "properties": {"safe_position": _vec3, "release_position": _vec3},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def body_rotation(normal) -> np.ndarray:
    """Local frame of a scene body: z along ``normal``, x as close to base x as possible."""
    n = np.asarray(normal, dtype=float)
    ref = np.array([0.0, 1.0, 0.0]) if abs(n[1]) < 0.9 else np.array([0.0, 0.0, 1.0])
    return rotation_from_approach_orientation(n, ref)


@dataclass(frozen=True)
class FixtureSpec:
    kind: str = "none"
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)  # object-local axis
    release_angle: float = 0.0  # rad

    def __post_init__(self):
        if self.kind not in FIXTURES:
            raise ValueError(f"unknown fixture kind {self.kind!r}")
        if self.kind == "rotary" and not (0.0 < self.release_angle <= math.pi):
            raise ValueError("rotary release_angle must be in (0, pi]")


@dataclass(frozen=True, eq=False)
class ObjectSpec:
    id: str
    true_center: np.ndarray
    true_normal: np.ndarray
    true_dims: np.ndarray
    height: float
    mass: float
    shape: str = "box"
    surface: str = "flat"
    side_surface: str | None = None
    fixture: FixtureSpec = field(default_factory=FixtureSpec)
    strategies: tuple[str, ...] = ()
    classes: tuple[str, ...] = ()
    layer: int = 0
    expected_min_mass: float | None = None
    heavy: bool = False
    delicate: bool = False
    cluttered: bool = False
    groove_width: float = 0.0
    description: str = ""

    def __post_init__(self):
        c = np.array(self.true_center, dtype=float).reshape(3)
        n = np.array(self.true_normal, dtype=float).reshape(3)
        d = np.array(self.true_dims, dtype=float).reshape(2)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("normal must be a unit vector")
        if np.any(d <= 0) or self.height <= 0:
            raise ValueError("dims and height must be positive")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.surface not in SURFACES or (self.side_surface or self.surface) not in SURFACES:
            raise ValueError("unknown surface kind")
        for arr in (c, n, d):
            arr.flags.writeable = False
        object.__setattr__(self, "true_center", c)
        object.__setattr__(self, "true_normal", n)
        object.__setattr__(self, "true_dims", d)
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def min_mass(self) -> float:
        return self.expected_min_mass if self.expected_min_mass is not None else 0.5 * self.mass

    @property
    def rotation(self) -> np.ndarray:
        return body_rotation(self.true_normal)

    @property
    def top_center(self) -> np.ndarray:
        return self.true_center + 0.5 * self.height * self.true_normal


@dataclass(frozen=True, eq=False)
class ObstacleSpec:
    id: str
    center: np.ndarray
    dims: np.ndarray
    height: float
    shape: str = "box"

    def __post_init__(self):
        object.__setattr__(self, "center", np.array(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "dims", np.array(self.dims, dtype=float).reshape(2))
        if np.any(self.dims <= 0) or self.height <= 0:
            raise ValueError("obstacle dims and height must be positive")


@dataclass(frozen=True, eq=False)
class NoiseModel:
    sigma_x: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sigma_n: float = 0.0  # rad, tilt of the normal about a random in-plane axis
    sigma_d: np.ndarray = field(default_factory=lambda: np.zeros(2))
    distribution: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        sx = np.array(self.sigma_x, dtype=float).reshape(3)
        sd = np.array(self.sigma_d, dtype=float).reshape(2)
        if np.any(sx < 0) or np.any(sd < 0) or self.sigma_n < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.distribution not in ("gaussian", "uniform"):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        object.__setattr__(self, "sigma_x", sx)
        object.__setattr__(self, "sigma_d", sd)

    def scaled(self, factor: float) -> "NoiseModel":
        if factor < 0:
            raise ValueError("noise multiplier must be non-negative")
        return replace(self, sigma_x=self.sigma_x * factor, sigma_n=self.sigma_n * factor,
                       sigma_d=self.sigma_d * factor)

    @property
    def is_zero(self) -> bool:
        return not (self.sigma_x.any() or self.sigma_d.any() or self.sigma_n)


@dataclass(frozen=True)
class GripperModel:
    kind: str
    max_opening: float = 0.0
    finger_length: float = 0.0
    finger_thickness: float = 0.0
    tactile: bool = False
    pad_rows: int = 8
    pad_cols: int = 4
    cell_pitch: float = 0.004
    palm_half_width: float = 0.03  # palm extent along the TCP y axis
    payload: float = 2.0
    cup_count: int = 0
    cup_spacing: float = 0.0
    cup_diameter: float = 0.0
    cup_height: float = 0.03  # cup standoff below the gripper body
    body_half_width: float = 0.025
    tcp_length: float = 0.15  # EE -> TCP translation along EE z
    close_speed: float = 0.05  # opening-width rate, m/s
    open_speed: float = 0.1
    grip_force: float = 5.0
    hold_force: float = 25.0
    hold_torque: float = 1.0
    d_safety: float = 0.1

    def __post_init__(self):
        if self.kind not in GRIPPER_KINDS:
            raise ValueError(f"unknown gripper kind {self.kind!r}")
        if self.kind in ("A", "B"):
            if min(self.max_opening, self.finger_length, self.finger_thickness, self.cell_pitch) <= 0:
                raise ValueError(f"finger gripper {self.kind} needs opening, finger length and thickness")
            if self.pad_rows < 1 or self.pad_cols < 1:
                raise ValueError("finger pads need at least one cell")
            if self.pad_rows * self.cell_pitch > self.finger_length + 1e-12:
                raise ValueError("pad array longer than the finger")
            if self.cup_count:
                raise ValueError("finger grippers carry no suction cups")
        else:
            if self.cup_count not in (1, 2) or self.cup_diameter <= 0:
                raise ValueError("suction gripper needs 1..2 cups with a positive diameter")
            if self.cup_count == 2 and self.cup_spacing <= self.cup_diameter:
                raise ValueError("cup spacing must exceed the cup diameter")
            if self.tactile:
                raise ValueError("suction gripper has no tactile fingers")
        if self.d_safety < 0 or self.tcp_length <= 0:
            raise ValueError("d_safety and tcp_length must be positive")

    @property
    def finger_width(self) -> float:
        return self.pad_cols * self.cell_pitch

    @property
    def tcp_offset(self) -> Pose:
        return Pose.from_translation([0.0, 0.0, self.tcp_length], "EE", "TCP")

    @property
    def has_fingers(self) -> bool:
        return self.kind in ("A", "B")


DEFAULT_GRIPPERS = {
    # tactile fingers: wide opening, a pressure array over the whole pad
    "A": GripperModel(
        kind="A", max_opening=0.085, finger_length=0.06, finger_thickness=0.010, tactile=True,
        pad_rows=15, pad_cols=6, cell_pitch=0.004, palm_half_width=0.03, payload=1.5,
        tcp_length=0.18, close_speed=0.04, open_speed=0.08, grip_force=4.0, hold_force=25.0,
        hold_torque=1.0, d_safety=0.12,
    ),
    # slim pneumatic fingers: narrow opening, no tactile array
    "B": GripperModel(
        kind="B", max_opening=0.035, finger_length=0.05, finger_thickness=0.004, tactile=False,
        pad_rows=10, pad_cols=7, cell_pitch=0.005, palm_half_width=0.02, payload=1.0,
        tcp_length=0.20, close_speed=0.08, open_speed=0.15, grip_force=6.0, hold_force=20.0,
        hold_torque=0.5, d_safety=0.08,
    ),
    # two suction cups on a bar along the TCP y axis
    "C": GripperModel(
        kind="C", cup_count=2, cup_spacing=0.10, cup_diameter=0.04, cup_height=0.03,
        body_half_width=0.025, payload=12.0, tcp_length=0.12, d_safety=0.08,
    ),
}


def down_rotation() -> np.ndarray:
    """EE orientation with the tool axis pointing at the table."""
    return rotation_from_approach_orientation([0.0, 0.0, -1.0], [0.0, 1.0, 0.0])


@dataclass(frozen=True, eq=False)
class Scene:
    name: str
    objects: tuple[ObjectSpec, ...]
    obstacles: tuple[ObstacleSpec, ...] = ()
    grippers: dict = field(default_factory=lambda: dict(DEFAULT_GRIPPERS))
    noise: NoiseModel = field(default_factory=NoiseModel)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    contact: ContactConfig = field(default_factory=ContactConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    safe_position: np.ndarray = field(default_factory=lambda: np.array([0.35, 0.0, 0.55]))
    release_position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.45, 0.40]))
    description: str = ""

    def __post_init__(self):
        ids = [o.id for o in self.objects] + [o.id for o in self.obstacles]
        if len(set(ids)) != len(ids):
            raise ValueError("object and obstacle ids must be unique")

    def object(self, obj_id: str) -> ObjectSpec:
        for o in self.objects:
            if o.id == obj_id:
                return o
        raise KeyError(obj_id)

    @property
    def safe_pose(self) -> Pose:
        return Pose(down_rotation(), self.safe_position, "B", "EE")

    @property
    def release_pose(self) -> Pose:
        return Pose(down_rotation(), self.release_position, "B", "EE")

    def with_noise(self, noise: NoiseModel) -> "Scene":
        return replace(self, noise=noise)


def _build(where: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), where) from exc


def scene_from_dict(data: dict) -> Scene:
    try:
        jsonschema.validate(data, SCENE_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in exc.absolute_path).lstrip(".")
        raise ConfigError(exc.message, path or "<root>") from None

    objects = []
    for i, o in enumerate(data["objects"]):
        where = f"objects[{i}]"
        fx = o.get("fixture", {"kind": "none"})
        fixture = _build(f"{where}.fixture", FixtureSpec, fx["kind"], tuple(fx.get("axis", (0.0, 0.0, 1.0))),
                         float(fx.get("release_angle", 0.0)))
        objects.append(_build(
            where, ObjectSpec,
            id=o["id"], true_center=o["center"], true_normal=o.get("normal", [0.0, 0.0, 1.0]),
            true_dims=o["dims"], height=o["height"], mass=o["mass"], shape=o["shape"],
            surface=o.get("surface", "flat"), side_surface=o.get("side_surface"), fixture=fixture,
            strategies=o.get("strategies", ()), classes=o.get("classes", ()), layer=o.get("layer", 0),
            expected_min_mass=o.get("expected_min_mass"), heavy=o.get("heavy", False),
            delicate=o.get("delicate", False), cluttered=o.get("cluttered", False),
            groove_width=o.get("groove_width", 0.0), description=o.get("description", ""),
        ))
    obstacles = [
        _build(f"obstacles[{i}]", ObstacleSpec, o["id"], o["center"], o["dims"], o["height"], o.get("shape", "box"))
        for i, o in enumerate(data.get("obstacles", []))
    ]
    grippers = dict(DEFAULT_GRIPPERS)
    for kind, overrides in data.get("gripper", {}).items():
        known = set(GripperModel.__dataclass_fields__) - {"kind"}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", f"gripper.{kind}")
        grippers[kind] = _build(f"gripper.{kind}", replace, grippers[kind], **overrides)
    noise = _build("noise", NoiseModel, **data.get("noise", {}))
    robot = data.get("robot", {})
    kwargs = {}
    if "safe_position" in robot:
        kwargs["safe_position"] = np.array(robot["safe_position"], dtype=float)
    if "release_position" in robot:
        kwargs["release_position"] = np.array(robot["release_position"], dtype=float)
    return _build(
        "<root>", Scene,
        name=data.get("name", "scene"), objects=tuple(objects), obstacles=tuple(obstacles),
        grippers=grippers, noise=noise,
        controller=_build("controller", ControllerConfig().with_overrides, data.get("controller")),
        contact=_build("contact", ContactConfig().with_overrides, data.get("contact")),
        sensor=_build("sensor", SensorConfig().with_overrides, data.get("sensor")),
        strategy=_build("strategy", StrategyConfig().with_overrides, data.get("strategy")),
        description=data.get("description", ""), **kwargs,
    )


def load_scene(path: str | Path) -> Scene:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scene: {exc}", str(path)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"{path.name}:line {exc.lineno}:{exc.colno}") from exc
    return scene_from_dict(data)


def shipped_scene_path(name: str) -> Path:
    return Path(__file__).resolve().parent.parent / "scenes" / f"{name}.json"


def shipped_scenes() -> list[str]:
    return sorted(p.stem for p in (Path(__file__).resolve().parent.parent / "scenes").glob("*.json"))


def _draw(rng: np.random.Generator, sigma, distribution: str) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if distribution == "gaussian":
        return rng.normal(0.0, 1.0, sigma.shape) * sigma
    # uniform with the same standard deviation
    return rng.uniform(-1.0, 1.0, sigma.shape) * math.sqrt(3.0) * sigma


MIN_DIM = 1e-4


def observe(obj: ObjectSpec, noise: NoiseModel, rng: np.random.Generator) -> ObjectEstimate:
    """Noisy vision estimate of ``obj``.

    The center gets additive noise, the normal is tilted by a drawn angle
    about a uniformly random axis orthogonal to it, the dims get additive
    noise clamped to stay positive.  Draw order is fixed, so one generator
    state gives one estimate.
    """
    center = obj.true_center + _draw(rng, noise.sigma_x, noise.distribution)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    tilt = float(_draw(rng, np.array([noise.sigma_n]), noise.distribution)[0])
    n = np.array(obj.true_normal)
    if tilt != 0.0:
        R = body_rotation(n)
        axis = math.cos(phi) * R[:, 0] + math.sin(phi) * R[:, 1]
        n = rotation_about(axis, tilt) @ n
        n /= np.linalg.norm(n)
    dims = np.maximum(obj.true_dims + _draw(rng, noise.sigma_d, noise.distribution), MIN_DIM)
    return ObjectEstimate(center, n, dims)
