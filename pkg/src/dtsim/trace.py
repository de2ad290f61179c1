"""Simulation traces and per-step logs."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

STEP_LOG_FIELDS = ("t", "h", "K", "e_n", "r", "provenance", "rejected_count")


@dataclass
class StepRecord:
    t: float
    h: float
    K: int
    e_n: float
    r: float
    provenance: str
    rejected_count: int


@dataclass
class Trace:
    """Accepted states on a strictly increasing time grid.

    ``status`` is ``'completed'``, ``'unstable'`` (angle-separation threshold
    hit) or ``'diverged'``.
    """

    times: np.ndarray
    states: np.ndarray
    names: tuple = ()
    steps: list = field(default_factory=list)
    status: str = "completed"
    t_final: float = 0.0
    multiplies: float = 0.0
    rejected: int = 0
    switches: list = field(default_factory=list)
    max_relative_angle_deg: float = 0.0
    message: str = ""

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def column(self, name: str) -> np.ndarray:
        return self.states[:, list(self.names).index(name)]

    def write_csv(self, path) -> None:
        names = self.names or tuple(f"x{i}" for i in range(self.states.shape[1]))
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(("t",) + tuple(names))
            for t, row in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    def write_step_log(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(STEP_LOG_FIELDS)
            for s in self.steps:
                w.writerow([repr(float(s.t)), repr(float(s.h)), s.K, repr(float(s.e_n)),
                            repr(float(s.r)), s.provenance, s.rejected_count])


class TraceRecorder:
    def __init__(self, t0, x0, names=()):
        self.times = [float(t0)]
        self.states = [np.array(x0, dtype=float)]
        self.names = tuple(names)
        self.steps: list[StepRecord] = []

    def push(self, t, x, record: StepRecord | None = None):
        self.times.append(float(t))
        self.states.append(np.array(x, dtype=float))
        if record is not None:
            self.steps.append(record)

    def finish(self, **kw) -> Trace:
        return Trace(np.array(self.times), np.vstack(self.states), self.names, self.steps, **kw)
