"""Shared-workspace safety status and the per-cycle command gate."""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .config import ConfigError
from .geometry import Twist6


class SafetyStatus(IntEnum):
    # ordering encodes dominance: Stop > Alert > Clear
    CLEAR = 0
    ALERT = 1
    STOP = 2

    @classmethod
    def parse(cls, value) -> "SafetyStatus":
        if isinstance(value, SafetyStatus):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ValueError(f"unknown safety status {value!r}") from None


@dataclass(frozen=True)
class SafetyEvent:
    t: float
    status: SafetyStatus
    source: str = "cell"


class SafetyMonitor:
    """Latest status per source, combined by dominance.

    Events may be pushed while a loop is running; readers only ever see a
    consistent per-source list because appends replace the list object.
    """

    def __init__(self, events=()):
        self._times: dict[str, list[float]] = {}
        self._status: dict[str, list[SafetyStatus]] = {}
        for ev in sorted(events, key=lambda e: e.t):
            self.push(ev)

    def push(self, event: SafetyEvent) -> None:
        times = list(self._times.get(event.source, []))
        status = list(self._status.get(event.source, []))
        i = bisect.bisect_right(times, event.t)
        times.insert(i, event.t)
        status.insert(i, SafetyStatus.parse(event.status))
        self._status[event.source] = status
        self._times[event.source] = times

    def status_at(self, t: float) -> SafetyStatus:
        worst = SafetyStatus.CLEAR
        for source, times in self._times.items():
            i = bisect.bisect_right(times, t)
            if i:
                s = self._status[source][i - 1]
                if s > worst:
                    worst = s
        return worst

    def next_event_after(self, t: float) -> float:
        """Time of the first event strictly after ``t`` (inf if none)."""
        nxt = float("inf")
        for times in self._times.values():
            i = bisect.bisect_right(times, t)
            if i < len(times) and times[i] < nxt:
                nxt = times[i]
        return nxt

    def __bool__(self) -> bool:
        return bool(self._times)


def combine(statuses) -> SafetyStatus:
    return max((SafetyStatus.parse(s) for s in statuses), default=SafetyStatus.CLEAR)


def apply_safety(status: SafetyStatus, cmd: Twist6, v_cap_alert: float, max_twist: Twist6) -> Twist6:
    """Gate a commanded twist by the current safety status.

    Alert scales the whole twist (direction preserved) so that no axis exceeds
    ``v_cap_alert`` times its maximum; Stop returns a zero twist.
    """
    if status == SafetyStatus.CLEAR:
        return cmd
    return Twist6.from_vector(gate_vector(status, cmd.vector, v_cap_alert, max_twist.vector), cmd.frame)


def gate_vector(status: SafetyStatus, u: np.ndarray, v_cap_alert: float, max_vec: np.ndarray) -> np.ndarray:
    """Array form of :func:`apply_safety`, used inside the control loop."""
    if status == SafetyStatus.CLEAR:
        return u
    if status == SafetyStatus.STOP:
        return np.zeros(6)
    return cap_vector(u, v_cap_alert * max_vec)


def cap_vector(u: np.ndarray, limit: np.ndarray) -> np.ndarray:
    mag = np.abs(u)
    over = mag > limit
    if not over.any():
        return u
    return u * float(np.min(limit[over] / mag[over]))


def load_safety_trace(path: str | Path) -> list[SafetyEvent]:
    """Read ``{"t": .., "status": .., "source": ..}`` records, one per line."""
    events = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            events.append(
                SafetyEvent(float(rec["t"]), SafetyStatus.parse(rec["status"]), rec.get("source", "cell"))
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad safety record: {exc}", f"line {lineno}") from exc
    return events


def dump_safety_trace(events, path: str | Path) -> None:
    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps({"t": ev.t, "status": ev.status.name.lower(), "source": ev.source}) + "\n")
