"""Seeded Monte Carlo grasp campaigns.

A campaign sweeps (cell, sigma multiplier, trial) where a cell is one
strategy on one object.  Every baseline cell is paired with a strategy cell
on the same object and tool: both derive their trial seeds from the tool
letter, so trial ``i`` of the pair sees the same vision draw and the same
sensor noise stream.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..config import ConfigError
from ..strategies import GraspHints, GraspRequest, run_skill
from ..world import Scene, World, load_scene, observe, shipped_scene_path, shipped_scenes

STRATEGY_NAMES = ("A", "B", "C", "baseline")
TRIALS_FILE = "trials.jsonl"
CAMPAIGN_FILE = "campaign.json"


def resolve_scene(scene: str | Path) -> Path:
    """Scene file for a path or the name of a shipped scene."""
    p = Path(scene)
    if p.suffix == ".json" or p.exists():
        return p
    if str(scene) in shipped_scenes():
        return shipped_scene_path(str(scene))
    raise ConfigError(f"no scene file or shipped scene named {scene!r}", "--scene")


def derive_seed(master_seed: int, strategy: str, multiplier: float, trial: int, obj: str = "") -> int:
    """64-bit child seed, a pure function of its arguments."""
    key = f"{int(master_seed)}|{strategy}|{float(multiplier)!r}|{int(trial)}|{obj}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class Cell:
    strategy: str
    obj: str
    tool: str  # gripper letter; for strategy cells it equals the strategy

    @property
    def key(self) -> str:
        return f"{self.strategy}/{self.obj}" if self.strategy != "baseline" else f"baseline[{self.tool}]/{self.obj}"


@dataclass(frozen=True)
class Campaign:
    scene: str
    trials: int = 500
    sigma_scales: tuple[float, ...] = (1.0,)
    strategies: tuple[str, ...] = ("A", "B", "C", "baseline")
    master_seed: int = 0
    out: str | None = None
    targets: tuple[str, ...] = ()  # restrict to these object ids
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1", "trials")
        if not self.sigma_scales or any(not math.isfinite(m) or m < 0 for m in self.sigma_scales):
            raise ConfigError("sigma multipliers must be finite and non-negative", "sigma_scales")
        unknown = set(self.strategies) - set(STRATEGY_NAMES)
        if unknown or not self.strategies:
            raise ConfigError(f"unknown strategies {sorted(unknown)}", "strategies")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer", "master_seed")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        d["sigma_scales"] = list(self.sigma_scales)
        d["strategies"] = list(self.strategies)
        d["targets"] = list(self.targets)
        return d


@dataclass(frozen=True)
class TrialRecord:
    trial_id: str
    seed: int
    strategy: str
    tool: str
    obj: str
    sigma_scale: float
    trial: int
    outcome: str
    phases: int
    cycles: int
    sim_time: float
    wall_time: float
    reason: str | None
    detail: str = ""
    schedule: dict = field(default_factory=dict)

    @property
    def succeeded(self) -> bool:
        return self.outcome == "Succeeded"

    @property
    def cell(self) -> Cell:
        return Cell(self.strategy, self.obj, self.tool)

    def to_json(self, wall_time: bool = True) -> str:
        d = asdict(self)
        if not wall_time:
            d.pop("wall_time")
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        return cls(**json.loads(line))


def campaign_cells(scene: Scene, strategies, targets=()) -> list[Cell]:
    """Strategy cells for every object proposing the strategy, then paired baseline cells."""
    objs = [o for o in scene.objects if not targets or o.id in targets]
    missing = set(targets) - {o.id for o in scene.objects}
    if missing:
        raise ConfigError(f"unknown target objects {sorted(missing)}", "targets")
    cells = [Cell(s, o.id, s) for s in ("A", "B", "C") if s in strategies
             for o in objs if s in o.strategies]
    if "baseline" in strategies:
        paired = [c for c in cells]
        if not paired:
            # baseline alone: pair against each object's first proposed tool
            paired = [Cell(o.strategies[0], o.id, o.strategies[0]) for o in objs if o.strategies]
        cells += [Cell("baseline", c.obj, c.tool) for c in paired]
    if not cells:
        raise ConfigError("no (strategy, object) cell matches the selection", "strategies")
    return cells


def _schedule(result) -> dict:
    """Commanded schedule parameters from the telemetry, for exactness checks."""
    tel = result.telemetry
    out = {}
    plan = tel.events("cup_plan")
    if plan:
        out["cups"] = len(plan[0].data["cups"])
    re = tel.events("reorient")
    if re:
        out["reorient_angles"] = [r.data["commanded"] for r in re]
        out["reorient_executed"] = [r.data["angle"] for r in re]
    so = tel.events("search_offset")
    if so:
        out["search_offsets"] = [r.data["commanded"] for r in so]
        out["search_executed"] = [r.data["executed"] for r in so]
        out["l_width"] = so[0].data["l_width"]
    ra = tel.events("readvance")
    if ra:
        out["readvances"] = [r.data["commanded"] for r in ra]
        out["readvance_executed"] = [r.data["executed"] for r in ra]
    return out


def run_trial(scene: Scene, cell: Cell, multiplier: float, trial: int, master_seed: int,
              safety=None) -> TrialRecord:
    """One seeded trial of ``cell`` at noise ``multiplier``."""
    seed = derive_seed(master_seed, cell.tool, multiplier, trial, cell.obj)
    sc = scene.with_noise(scene.noise.scaled(multiplier))
    obj = sc.object(cell.obj)
    start = time.perf_counter()
    est = observe(obj, sc.noise, np.random.default_rng(seed))
    world = World(sc, target=obj.id, gripper=cell.tool, seed=seed)
    req = GraspRequest(cell.strategy, est, obj.min_mass,
                       GraspHints(expect_rotary=obj.fixture.kind == "rotary"), gripper=cell.tool)
    result = run_skill(req, world, safety=safety)
    wall = time.perf_counter() - start
    return TrialRecord(
        trial_id=f"{cell.key}@x{multiplier:g}#{trial}",
        seed=seed, strategy=cell.strategy, tool=cell.tool, obj=cell.obj,
        sigma_scale=float(multiplier), trial=trial, outcome=result.outcome.value,
        phases=len(result.phases), cycles=int(result.cycles), sim_time=round(float(result.sim_time), 9),
        wall_time=wall, reason=result.reason, detail=result.detail, schedule=_schedule(result),
    )


def _job(args):
    scene_path, cell, mult, trial, master = args
    return run_trial(load_scene(scene_path), cell, mult, trial, master)


def planned_trials(c: Campaign, scene: Scene) -> list[tuple[Cell, float, int]]:
    cells = campaign_cells(scene, c.strategies, c.targets)
    return [(cell, m, i) for m in c.sigma_scales for cell in cells for i in range(c.trials)]


def _check_resume(out: Path, c: Campaign) -> None:
    meta = out / CAMPAIGN_FILE
    spec = json.dumps(c.to_dict(), sort_keys=True, indent=2) + "\n"
    if meta.exists():
        old = json.loads(meta.read_text())
        for key in ("scene", "master_seed"):
            if old.get(key) != c.to_dict()[key]:
                raise ConfigError(f"output directory holds a campaign with a different {key}", str(meta))
    meta.write_text(spec)


def load_records(out: str | Path) -> list[TrialRecord]:
    path = Path(out) / TRIALS_FILE
    if not path.exists():
        return []
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                try:
                    records.append(TrialRecord.from_json(line))
                except (json.JSONDecodeError, TypeError):
                    continue  # torn last line of an interrupted run
    return records


def run_campaign(c: Campaign, progress=None) -> list[TrialRecord]:
    """Run (or resume) ``c`` and return its records in sweep order.

    With an output directory, finished trials are appended to
    ``trials.jsonl`` as they complete and skipped by id on a rerun.
    """
    scene_path = resolve_scene(c.scene)
    scene = load_scene(scene_path)
    plan = planned_trials(c, scene)
    done: dict[str, TrialRecord] = {}
    sink = None
    if c.out is not None:
        out = Path(c.out)
        out.mkdir(parents=True, exist_ok=True)
        _check_resume(out, c)
        done = {r.trial_id: r for r in load_records(out)}
        sink = open(out / TRIALS_FILE, "a")
    todo = [(cell, m, i) for cell, m, i in plan
            if f"{cell.key}@x{m:g}#{i}" not in done]
    try:
        if c.workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(c.workers) as pool:
                jobs = [(str(scene_path), cell, m, i, c.master_seed) for cell, m, i in todo]
                results = pool.map(_job, jobs, chunksize=8)
                for rec in results:
                    _store(rec, done, sink, progress)
        else:
            for cell, m, i in todo:
                _store(run_trial(scene, cell, m, i, c.master_seed), done, sink, progress)
    finally:
        if sink is not None:
            sink.close()
    return [done[f"{cell.key}@x{m:g}#{i}"] for cell, m, i in plan]


def _store(rec: TrialRecord, done: dict, sink, progress) -> None:
    done[rec.trial_id] = rec
    if sink is not None:
        sink.write(rec.to_json() + "\n")
        sink.flush()
    if progress is not None:
        progress(rec)


__all__ = [
    "CAMPAIGN_FILE", "Campaign", "Cell", "STRATEGY_NAMES", "TRIALS_FILE", "TrialRecord",
    "campaign_cells", "derive_seed", "load_records", "planned_trials", "resolve_scene",
    "run_campaign", "run_trial",
]
