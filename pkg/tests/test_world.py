from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from tactigrasp.config import ConfigError
from tactigrasp.geometry import Pose, rotation_about
from tactigrasp.sensing import finger_force_difference
from tactigrasp.world import (
    NoiseModel, NothingGrasped, World, contact_query, load_scene, observe, scene_from_dict,
    shipped_scene_path, shipped_scenes,
)
from tactigrasp.world.scene import MIN_DIM, down_rotation
from tactigrasp.world.spring import SpringPlane

DOWN = down_rotation()


def one_object_scene(**obj):
    base = {"id": "block", "shape": "box", "center": [0.5, 0.0, 0.03], "dims": [0.04, 0.04],
            "height": 0.06, "mass": 0.5}
    base.update(obj)
    return scene_from_dict({"schema_version": 1, "name": "test", "objects": [base]})


def place_tcp(world: World, tcp, R=DOWN) -> None:
    world.ee_pose = Pose(R, np.asarray(tcp, dtype=float) - R[:, 2] * world.tcp_length, "B", "EE")
    world._refresh()


def lift(world: World, height: float, steps: int = 50) -> None:
    for _ in range(steps):
        p = world.ee_pose
        world.advance(p.with_translation(p.translation + [0.0, 0.0, height / steps]), 0.002)


# -- observation channel -------------------------------------------------------

def test_observe_zero_noise_is_exact():
    obj = load_scene(shipped_scene_path("EL")).object("battery")
    est = observe(obj, NoiseModel(), np.random.default_rng(0))
    np.testing.assert_array_equal(est.center, obj.true_center)
    np.testing.assert_array_equal(est.normal, obj.true_normal)
    np.testing.assert_array_equal(est.dims, obj.true_dims)


@pytest.mark.parametrize("distribution", ["gaussian", "uniform"])
def test_observe_center_noise_statistics(distribution):
    obj = load_scene(shipped_scene_path("EL")).object("battery")
    noise = NoiseModel(sigma_x=[0.005] * 3, distribution=distribution)
    rng = np.random.default_rng(1)
    c = np.array([observe(obj, noise, rng).center for _ in range(10_000)])
    np.testing.assert_allclose(c.std(axis=0), 0.005, rtol=0.1)
    np.testing.assert_allclose(c.mean(axis=0), obj.true_center, atol=3e-4)


def test_observe_dims_clamped_positive():
    obj = load_scene(shipped_scene_path("EL")).object("battery")
    noise = NoiseModel(sigma_d=[1.0, 1.0])
    rng = np.random.default_rng(2)
    dims = np.array([observe(obj, noise, rng).dims for _ in range(2000)])
    assert dims.min() >= MIN_DIM
    assert (dims == MIN_DIM).any()


def test_observe_normal_tilt_is_unit_and_sized():
    obj = load_scene(shipped_scene_path("EL")).object("battery")
    noise = NoiseModel(sigma_n=math.radians(5.0))
    rng = np.random.default_rng(3)
    normals = np.array([observe(obj, noise, rng).normal for _ in range(5000)])
    np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-12)
    tilt = np.arccos(np.clip(normals @ obj.true_normal, -1, 1))
    # a zero-mean gaussian angle folded to its magnitude: rms equals sigma
    assert math.sqrt(np.mean(tilt ** 2)) == pytest.approx(math.radians(5.0), rel=0.05)


# -- contact -------------------------------------------------------------------

def test_contact_query_free_space():
    scene = load_scene(shipped_scene_path("PCT"))
    far = Pose(DOWN, [0.0, -0.5, 1.0], "B", "EE")
    st_ = contact_query(far, scene.grippers["A"], scene)
    assert not st_.touching
    np.testing.assert_array_equal(st_.wrench.vector, np.zeros(6))
    assert st_.attachment == "none"


def test_contact_query_spring_law_half_millimetre():
    # fingertip patch pressed 0.5 mm into a box top: k = 1e4 N/m gives 5 N
    scene = one_object_scene(dims=[0.008, 0.2], height=0.04, center=[0.5, 0.0, 0.02])
    g = scene.grippers["A"]
    x_tip = -0.5 * g.max_opening - 0.5 * g.finger_thickness
    tcp = np.array([0.5, 0.0, 0.04 - 0.0005]) - DOWN[:, 0] * x_tip
    ee = Pose(DOWN, tcp - DOWN[:, 2] * g.tcp_length, "B", "EE")
    st_ = contact_query(ee, g, scene)
    assert st_.touching
    assert st_.penetration == pytest.approx(0.0005, abs=1e-12)
    up = DOWN.T @ [0, 0, 1]
    assert -st_.wrench.force @ up == pytest.approx(5.0, rel=1e-9)


def test_contact_force_capped_per_patch():
    scene = one_object_scene(dims=[0.008, 0.2], height=0.04, center=[0.5, 0.0, 0.02])
    g = scene.grippers["A"]
    x_tip = -0.5 * g.max_opening - 0.5 * g.finger_thickness
    tcp = np.array([0.5, 0.0, 0.04 - 0.02]) - DOWN[:, 0] * x_tip
    st_ = contact_query(Pose(DOWN, tcp - DOWN[:, 2] * g.tcp_length, "B", "EE"), g, scene)
    assert np.linalg.norm(st_.wrench.force) <= scene.contact.force_cap * 3 + 1e-9


def test_symmetric_grasp_has_no_force_difference():
    world = World(one_object_scene(), gripper="A")
    place_tcp(world, [0.5, 0.0, 0.04])
    world.xl, world.xr = -0.0198, 0.0198  # both pads 0.2 mm into the block
    world._refresh()
    fp = world.contact_state().fingers
    assert fp.left.total > 0
    assert finger_force_difference(fp) == pytest.approx(0.0, abs=1e-9)


def test_compiled_contact_matches_reference():
    rng = np.random.default_rng(4)
    checked = 0
    for name in shipped_scenes():
        scene = load_scene(shipped_scene_path(name))
        for obj in scene.objects:
            for kind in ("A", "B", "C"):
                world = World(scene, target=obj.id, gripper=kind, seed=1)
                for _ in range(40):
                    R = Rotation.random(random_state=rng.integers(2 ** 32)).as_matrix() \
                        if rng.random() < 0.4 else DOWN
                    tcp = obj.true_center + rng.normal(0, 0.03, 3)
                    world.xl, world.xr = sorted(rng.uniform(-0.04, 0.04, 2)) if kind != "C" else (0.0, 0.0)
                    pose = Pose(R, tcp - R[:, 2] * world.tcp_length, "B", "EE")
                    a, b = world._evaluate(pose), world._evaluate_reference(pose)
                    assert a["touching"] == b["touching"]
                    if not a["touching"]:
                        continue
                    checked += 1
                    np.testing.assert_allclose(a["F"], b["F"], atol=1e-9)
                    np.testing.assert_allclose(a["wrench"], b["wrench"], atol=1e-9)
                    np.testing.assert_array_equal(a["owner"], b["owner"])
                    assert a["pad_bodies"] == b["pad_bodies"]
                    np.testing.assert_allclose(a["pad"], b["pad"], atol=1e-9)
    assert checked > 200


def test_clear_prefix_matches_brute_force():
    scene = load_scene(shipped_scene_path("EL"))
    world = World(scene, gripper="A")
    rng = np.random.default_rng(5)
    margin = 0.003
    for _ in range(100):
        start = np.array([rng.uniform(0.3, 0.8), rng.uniform(-0.3, 0.3), rng.uniform(0.2, 0.5)])
        end = start + rng.normal(0, 0.1, 3)
        poses = [Pose(DOWN, start + f * (end - start), "B", "EE") for f in np.linspace(0, 1, 12)]
        got = world.clear_prefix(poses, margin)
        # brute force: box each point group over consecutive pose pairs
        clouds = [world.tool_points(p) for p in poses]
        bad = len(poses)
        for j in range(len(poses) - 1):
            for mask in world.tool.groups:
                both = np.vstack([clouds[j][mask], clouds[j + 1][mask]])
                lo, hi = both.min(axis=0) - margin, both.max(axis=0) + margin
                if any(not (np.any(hi < b.lo) or np.any(lo > b.hi)) for b in world.bodies):
                    bad = min(bad, j)
        expected = len(poses) if bad == len(poses) else bad + 1
        assert got == expected


@settings(max_examples=100, deadline=None)
@given(st.floats(-0.05, 0.05), st.floats(-0.05, 0.05), st.floats(-0.03, 0.08), st.floats(0, 2 * np.pi))
def test_contact_is_finite_and_pushes_out(dx, dy, dz, yaw):
    scene = load_scene(shipped_scene_path("PCT"))
    world = World(scene, target="cooler", gripper="A")
    obj = scene.object("cooler")
    R = rotation_about([0, 0, 1], yaw) @ DOWN
    place_tcp(world, obj.true_center + [dx, dy, dz], R)
    c = world._contact
    assert np.all(np.isfinite(c["wrench"]))
    if c["touching"]:
        # each penalty force points out of the body that owns the point
        for i in np.flatnonzero(c["deepest"] > 0):
            if world.tool.pad_mask[i]:
                continue  # pads keep only the normal component
            b = world.bodies[c["owner"][i]]
            q = b.local(c["P"][i][None])[0]
            if b.shape == "box":
                assert c["F"][i] @ (b.R @ np.sign(q) * (np.abs(q) > 0)) >= -1e-9


def test_penalty_force_continuous_in_depth():
    world = SpringPlane(1e4, force_cap=50.0)
    depths = np.linspace(0, 0.01, 1001)
    forces = [-world.wrench_vector(Pose.from_translation([0, 0, -d], "B", "EE"))[5] for d in depths]
    assert np.max(np.abs(np.diff(forces))) <= 1e4 * 1e-5 + 1e-9


def test_world_determinism():
    scene = load_scene(shipped_scene_path("EL"))
    runs = []
    for _ in range(2):
        world = World(scene, target="battery", gripper="B", seed=11)
        place_tcp(world, scene.object("battery").true_center + [0, 0, 0.03])
        trace = []
        for k in range(200):
            p = world.ee_pose
            world.advance(p.with_translation(p.translation - [0, 0, 1e-4]), 0.002)
            trace.append(world.measure().tobytes())
        runs.append(trace)
    assert runs[0] == runs[1]


# -- fingers -------------------------------------------------------------------

def test_grip_four_centimetre_object():
    scene = one_object_scene()
    g = scene.grippers["A"]
    assert g.max_opening > 0.08
    world = World(scene, gripper="A")
    world.open_fingers(0.08)
    for _ in range(200):
        world.advance(world.ee_pose, 0.002)
    place_tcp(world, [0.5, 0.0, 0.04])
    st_ = world.grip()
    assert st_.attachment == "fingers"
    assert st_.held_object == "block"
    assert world.width == pytest.approx(0.04, abs=0.002)


def test_grip_empty_air():
    world = World(one_object_scene(), gripper="A")
    place_tcp(world, [0.5, 0.3, 0.3])
    with pytest.raises(NothingGrasped):
        world.grip()
    assert world.width == 0.0
    assert world.held is None


def test_grip_object_beyond_span():
    world = World(one_object_scene(), gripper="B")
    place_tcp(world, [0.5 + world.gripper.max_opening + 0.03, 0.0, 0.04])
    with pytest.raises(NothingGrasped):
        world.grip()


def test_no_spontaneous_attachment():
    world = World(one_object_scene(), gripper="A")
    place_tcp(world, [0.5, 0.0, 0.04])
    for _ in range(100):
        world.advance(world.ee_pose, 0.002)
    assert world.held is None and world.attachment == "none"


def test_open_fingers_can_narrow():
    world = World(one_object_scene(), gripper="B")
    world.open_fingers(0.0)
    for _ in range(500):
        world.advance(world.ee_pose, 0.002)
    assert world.width == pytest.approx(0.0, abs=1e-12)
    assert world.actuator is None


# -- vacuum --------------------------------------------------------------------

@pytest.fixture
def cover_world():
    scene = load_scene(shipped_scene_path("PCT"))
    world = World(scene, target="cover", gripper="C")
    obj = scene.object("cover")
    return world, obj


def test_vacuum_both_cups_on_flat_cover(cover_world):
    world, obj = cover_world
    place_tcp(world, obj.true_center + [0, 0, 0.5 * obj.height + 0.0005])
    st_ = world.vacuum(True)
    assert st_.attachment == "vacuum" and st_.held_object == "cover"


def test_vacuum_cup_half_off_edge(cover_world):
    world, obj = cover_world
    place_tcp(world, obj.true_center + [0.5 * obj.true_dims[0], 0, 0.5 * obj.height + 0.0005])
    assert world.vacuum(True).attachment == "none"


def test_vacuum_laminated_surface_never_seals():
    scene = one_object_scene(dims=[0.3, 0.2], height=0.01, center=[0.5, 0, 0.005], surface="laminated")
    world = World(scene, gripper="C", seed=3)
    place_tcp(world, [0.5, 0.0, 0.0105])
    for _ in range(20):
        assert world.vacuum(True).attachment == "none"
        world.vacuum(False)


def test_vacuum_off_releases(cover_world):
    world, obj = cover_world
    place_tcp(world, obj.true_center + [0, 0, 0.5 * obj.height + 0.0005])
    world.vacuum(True)
    assert world.vacuum(False).attachment == "none"


# -- weight check and fixtures ---------------------------------------------------

def test_weight_check_held_mass():
    world = World(one_object_scene(mass=0.5), gripper="A", seed=2)
    place_tcp(world, [0.5, 0.0, 0.04])
    world.grip()
    lift(world, 0.05)
    wc = world.lift_weight_check(0.5, samples=200)
    assert wc.force_up == pytest.approx(0.5 * 9.81, abs=0.03)
    assert wc.passed


def test_weight_check_empty_gripper():
    world = World(one_object_scene(), gripper="A")
    wc = world.lift_weight_check(0.5)
    assert not wc.passed
    assert abs(wc.force_up) < 0.1


def test_weight_check_reports_pull_while_fixture_engaged():
    scene = load_scene(shipped_scene_path("EL"))
    world = World(scene, target="light_bulb", gripper="A", seed=4)
    obj = scene.object("light_bulb")
    place_tcp(world, obj.true_center + [0, 0, 0.5 * obj.height - 0.02])
    world.grip()
    wc = world.lift_weight_check(obj.min_mass)
    assert not wc.passed and wc.pulled


def test_fixture_update_examples():
    scene = one_object_scene(fixture={"kind": "rotary", "axis": [0, 0, 1], "release_angle": math.radians(10)})
    world = World(scene, gripper="A")
    assert world.fixture_update("block", math.radians(12)).released
    rigid = World(one_object_scene(fixture={"kind": "rigid"}), gripper="A")
    for _ in range(10):
        assert rigid.fixture_update("block", 1.0).engaged
    free = World(one_object_scene(), gripper="A")
    assert free.fixtures["block"].released


def test_rotating_held_bulb_releases_fixture():
    scene = load_scene(shipped_scene_path("EL"))
    world = World(scene, target="light_bulb", gripper="A")
    obj = scene.object("light_bulb")
    place_tcp(world, obj.true_center + [0, 0, 0.5 * obj.height - 0.02])
    world.grip()
    pivot = world.ee_pose.translation.copy()
    step = math.radians(0.5)
    for _ in range(30):
        p = world.ee_pose
        world.advance(Pose(rotation_about([0, 0, 1], step) @ p.rotation, pivot, "B", "EE"), 0.002)
        if world.fixtures["light_bulb"].released:
            break
    assert world.fixtures["light_bulb"].released
    assert world.held == "light_bulb"
    lift(world, 0.03)
    assert world.lift_weight_check(obj.min_mass).passed


# -- scene files -----------------------------------------------------------------

@pytest.mark.parametrize("name", ["EL", "MW", "PCT", "FPD"])
def test_shipped_scenes_load(name):
    scene = load_scene(shipped_scene_path(name))
    assert scene.objects


def test_scene_field_diagnostics(tmp_path):
    data = json.loads(shipped_scene_path("PCT").read_text())
    data["objects"][1]["mass"] = -1.0
    with pytest.raises(ConfigError) as exc:
        scene_from_dict(data)
    assert exc.value.where.startswith("objects[1]")


def test_scene_syntax_diagnostics(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1,\n "objects": [\n}')
    with pytest.raises(ConfigError) as exc:
        load_scene(bad)
    assert "line 3" in exc.value.where


def test_scene_unknown_config_key():
    data = json.loads(shipped_scene_path("PCT").read_text())
    data["contact"] = {"stiffnes": 1.0}
    with pytest.raises(ConfigError) as exc:
        scene_from_dict(data)
    assert exc.value.where == "contact"
