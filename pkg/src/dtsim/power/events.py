"""Disturbance events: faults, branch trips and generator trips."""
from __future__ import annotations

from dataclasses import dataclass

from ..drivers import ScheduleError

EVENT_KINDS = ("fault-apply", "fault-clear", "branch-trip", "generator-trip")


@dataclass(frozen=True)
class Event:
    """One disturbance at ``time`` seconds.

    ``fault-clear`` may carry ``branch`` to trip a line at the clearing instant.
    ``admittance`` overrides the default fault shunt.
    """

    time: float
    kind: str
    bus: int | None = None
    branch: tuple | None = None
    generator: str | None = None
    admittance: complex | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ScheduleError(f"unknown event kind {self.kind!r}")
        if self.kind == "fault-apply" and self.bus is None:
            raise ScheduleError("fault-apply needs a bus")
        if self.kind == "branch-trip" and self.branch is None:
            raise ScheduleError("branch-trip needs a branch (from, to)")
        if self.kind == "generator-trip" and self.generator is None:
            raise ScheduleError("generator-trip needs a generator id")

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        branch = d.get("branch")
        if branch is None and "from" in d:
            branch = (d["from"], d["to"])
        adm = d.get("admittance")
        if isinstance(adm, (list, tuple)):
            adm = complex(*adm)
        gen = d.get("generator")
        return cls(float(d["time"]), d["kind"], d.get("bus"), tuple(branch) if branch else None,
                   None if gen is None else str(gen), adm)

    def to_dict(self) -> dict:
        out = {"time": self.time, "kind": self.kind}
        if self.bus is not None:
            out["bus"] = self.bus
        if self.branch is not None:
            out["branch"] = list(self.branch)
        if self.generator is not None:
            out["generator"] = self.generator
        if self.admittance is not None:
            a = complex(self.admittance)
            out["admittance"] = [a.real, a.imag]
        return out


class EventSchedule(tuple):
    """Time-ordered, validated tuple of events."""

    def __new__(cls, events=()):
        evs = [e if isinstance(e, Event) else Event.from_dict(e) for e in events]
        for a, b in zip(evs, evs[1:]):
            if not b.time > a.time:
                raise ScheduleError(f"event times must be strictly increasing ({a.time} then {b.time})")
        faulted = set()
        for e in evs:
            if e.kind == "fault-apply":
                faulted.add(e.bus)
            elif e.kind == "fault-clear":
                if not faulted:
                    raise ScheduleError(f"fault-clear at t={e.time} without a preceding fault-apply")
                if e.bus is not None and e.bus not in faulted:
                    raise ScheduleError(f"fault-clear at bus {e.bus} which is not faulted")
                faulted = set() if e.bus is None else faulted - {e.bus}
        return super().__new__(cls, evs)
