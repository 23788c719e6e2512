"""Which gripper strategy suits which object.

``APPLICABILITY`` records, per gripper and object class, whether a grasp is
expected to work with accurate vision (AV) and with noisy vision (IV).  A
cell is ``True``, ``False`` or a tuple of condition numbers that must all
hold (see ``CONDITIONS``).  ``DEVICE_PROPOSALS`` is the per-device proposal list
used by the shipped scenes.
"""

from __future__ import annotations

from dataclasses import dataclass

CLASSES = (
    "small", "medium", "large", "flat_inside_small", "flat_inside_large",
    "one_flat_surface", "any_shape",
)
GRIPPERS = ("standard_2finger", "suction_1cup", "suction_multi", "A", "B", "C")
STRATEGIES = ("A", "B", "C")

CONDITIONS = {
    1: "object fits the finger opening",
    2: "surface is flat",
    3: "flat surface is big enough to allow for some inaccuracy",
    4: "object is not heavy",
    5: "surface accommodates all cups",
}

_ = False
Y = True
# gripper -> class -> (AV, IV)
APPLICABILITY: dict[str, dict[str, tuple]] = {
    "standard_2finger": {
        "small": (Y, _), "medium": (Y, _), "large": ((1,), _),
        "flat_inside_small": (_, _), "flat_inside_large": (_, _),
        "one_flat_surface": (_, _), "any_shape": (_, _),
    },
    "suction_1cup": {
        "small": (_, _), "medium": ((2, 4), (2, 4)), "large": (_, _),
        "flat_inside_small": (Y, Y), "flat_inside_large": (_, _),
        "one_flat_surface": ((4,), (3, 4)), "any_shape": (_, _),
    },
    "suction_multi": {
        "small": (_, _), "medium": ((2,), (2,)), "large": ((2,), (2,)),
        "flat_inside_small": (_, _), "flat_inside_large": (Y, _),
        "one_flat_surface": ((5,), (3, 5)), "any_shape": (_, _),
    },
    "A": {
        "small": (Y, Y), "medium": (Y, Y), "large": ((1,), (1,)),
        "flat_inside_small": (_, _), "flat_inside_large": (_, _),
        "one_flat_surface": (_, _), "any_shape": (_, _),
    },
    "B": {
        "small": (Y, Y), "medium": ((1,), (1,)), "large": (_, _),
        "flat_inside_small": (_, _), "flat_inside_large": (_, _),
        "one_flat_surface": (_, _), "any_shape": (_, _),
    },
    "C": {
        "small": (_, _), "medium": ((2,), (2,)), "large": ((2,), (2,)),
        "flat_inside_small": (Y, Y), "flat_inside_large": (Y, Y),
        "one_flat_surface": (Y, (3,)), "any_shape": (_, _),
    },
}
del _, Y

# device -> object -> proposed strategies, in order of preference
DEVICE_PROPOSALS: dict[str, dict[str, tuple[str, ...]]] = {
    "MW": {"cover": ("C",), "magnetron": ("A", "C")},
    "PCT": {"cover": ("C",), "psu": ("C",), "cooler": ("A", "C")},
    "EL": {"cover_top": ("C",), "cover_middle": ("C",), "light_bulb": ("A",), "battery": ("B",)},
    "FPD": {"display_cover": ("C",), "display": ("C",)},
}

INACCURACY_MARGIN = 0.01  # m of spare surface on each side for condition 3


class NoApplicableStrategy(LookupError):
    pass


@dataclass(frozen=True)
class ObjectProps:
    """What the planner knows about an object when choosing a strategy."""

    size: str
    surface: str = "flat"  # flat | laminated | curved (top surface)
    cluttered: bool = False
    delicate: bool = False
    heavy: bool = False
    side_surface: str | None = None
    rotation: bool = False  # a fixture must be turned loose
    dims: tuple[float, float] | None = None

    def __post_init__(self):
        if self.size not in CLASSES:
            raise ValueError(f"unknown size class {self.size!r}")


def condition_holds(cond: int, props: ObjectProps, gripper=None) -> bool:
    """Evaluate one applicability condition; ``gripper`` is a GripperModel when known."""
    if cond == 1:
        if props.dims is None or gripper is None or not gripper.has_fingers:
            return props.size != "large"
        return min(props.dims) < gripper.max_opening
    if cond == 2:
        return props.surface == "flat"
    if cond == 3:
        if props.dims is None or gripper is None or gripper.has_fingers:
            return props.surface == "flat"
        return min(props.dims) >= gripper.cup_diameter + 2 * INACCURACY_MARGIN
    if cond == 4:
        return not props.heavy
    if cond == 5:
        if props.dims is None or gripper is None or gripper.has_fingers:
            return True
        from .suction import cups_fit

        return cups_fit(props.dims, gripper.cup_spacing, gripper.cup_diameter)
    raise ValueError(f"unknown condition {cond}")


def cell_applies(gripper: str, size: str, vision: str = "AV", props: ObjectProps | None = None,
                 model=None) -> bool:
    """Whether the applicability matrix marks ``gripper`` as working on class ``size``.

    Conditional cells count only when ``props`` is given and every listed
    condition holds.
    """
    if vision not in ("AV", "IV"):
        raise ValueError("vision must be 'AV' or 'IV'")
    cell = APPLICABILITY[gripper][size][0 if vision == "AV" else 1]
    if isinstance(cell, bool):
        return cell
    if props is None:
        return False
    return all(condition_holds(c, props, model) for c in cell)


def select_strategy(props: ObjectProps | dict) -> tuple[str, ...]:
    """Proposed strategies for an object, most preferred first."""
    if isinstance(props, dict):
        props = ObjectProps(**props)
    size = props.size
    if props.delicate or props.rotation:
        return ("A",)
    if size == "small" and props.cluttered:
        return ("B",)
    if size in ("small", "medium") and props.side_surface == "laminated" and props.surface == "flat":
        return ("A", "C")
    if size == "large" and props.surface == "flat":
        return ("C",)
    if size == "medium" and props.surface == "flat" and props.heavy:
        return ("C",)
    found = tuple(s for s in STRATEGIES if cell_applies(s, size, "AV", props))
    if not found:
        raise NoApplicableStrategy(f"no strategy covers a {size} object with {props.surface} surface")
    return found


def props_of(obj) -> ObjectProps:
    """Selection properties of a scene object."""
    size = obj.classes[0] if obj.classes else "any_shape"
    return ObjectProps(
        size=size, surface=obj.surface, cluttered=obj.cluttered, delicate=obj.delicate,
        heavy=obj.heavy, side_surface=obj.side_surface, rotation=obj.fixture.kind == "rotary",
        dims=(float(obj.true_dims[0]), float(obj.true_dims[1])),
    )


def applicable_cells(scene, vision: str = "AV") -> list[tuple[str, str]]:
    """(strategy, object id) pairs that must succeed on ``scene``.

    A pair counts when the strategy is proposed for the object and
    ``APPLICABILITY`` marks that gripper as working for one of its classes.
    """
    cells = []
    for obj in scene.objects:
        props = props_of(obj)
        for s in obj.strategies:
            model = scene.grippers[s]
            if any(cell_applies(s, c, vision, props, model) for c in obj.classes):
                cells.append((s, obj.id))
    return cells


__all__ = [
    "CLASSES", "CONDITIONS", "GRIPPERS", "NoApplicableStrategy", "ObjectProps", "STRATEGIES",
    "DEVICE_PROPOSALS", "APPLICABILITY", "applicable_cells", "cell_applies", "condition_holds", "props_of",
    "select_strategy",
]
