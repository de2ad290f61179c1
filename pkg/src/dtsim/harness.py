"""Run configuration, scenario orchestration, N-1 screening and report files."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import benchmark_error, me_integrate, rk4_integrate
from .drivers import ScheduleError, fixed_integrate, vs_integrate, vsoo_integrate
from .engine import SpecError, StepDivergence
from .order_control import OrderControllerConfig
from .power import (CaseError, Event, EventSchedule, InitError, NetworkCase, PowerFlowError,
                    PowerSystem, ReductionError)
from .step_control import StepControllerConfig
from .trace import Trace

log = logging.getLogger(__name__)

SOLVERS = ("dt-fixed", "vs-dt", "vsoo-dt", "rk4", "me")

EXIT_OK = 0
EXIT_UNSTABLE = 2
EXIT_INPUT = 3
EXIT_DIVERGED = 4
EXIT_POWER_FLOW = 5

INPUT_ERRORS = (CaseError, ScheduleError, SpecError, InitError, ReductionError, ValueError, KeyError,
                TypeError, OSError)


class ConfigError(ValueError):
    """Malformed run configuration or parameters outside the supported envelope."""


def exit_code_for(exc: BaseException) -> int:
    """Map an exception raised while setting up or running a case to the exit-code contract."""
    if isinstance(exc, PowerFlowError):
        return EXIT_POWER_FLOW
    if isinstance(exc, (StepDivergence, ArithmeticError)) and not isinstance(exc, ReductionError):
        return EXIT_DIVERGED
    return EXIT_INPUT


# -- configuration -------------------------------------------------------------

def _envelope(step: StepControllerConfig, order: OrderControllerConfig) -> list[str]:
    out = list(order.check_envelope())
    if not 1e-25 <= step.tol <= 1e-2:
        out.append(f"tol={step.tol:g} outside [1e-25, 1e-2]")
    eta = np.atleast_1d(np.asarray(step.eta, dtype=float))
    if np.any(eta < 1e-19) or np.any(eta > 0.1):
        out.append("eta outside [1e-19, 0.1]")
    if not 0.85 <= step.gamma <= 1.0:
        out.append(f"gamma={step.gamma:g} outside [0.85, 1]")
    if not 1.25 <= step.theta_max <= 2.0:
        out.append(f"theta_max={step.theta_max:g} outside [1.25, 2]")
    if order.mu_in < order.mu_de:
        out.append("mu_in below mu_de")
    return out


def _dataclass_from(cls, d: dict | None, where: str):
    d = dict(d or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")
    if isinstance(d.get("eta"), list):
        d["eta"] = tuple(d["eta"])
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where} settings: {exc}") from None


@dataclass
class RunConfig:
    """Everything a single simulation or a screening batch needs besides the case.

    ``events=None`` uses the case file's own schedule.  ``K`` is the fixed order
    of ``dt-fixed`` and ``vs-dt``; ``h`` the fixed step of ``dt-fixed``, ``rk4``
    and ``me``.
    """

    solver: str = "vsoo-dt"
    model: str = "classical"
    t0: float = 0.0
    t_end: float = 20.0
    h: float = 1e-3
    h0: float = 1e-3
    K: int = 8
    step: StepControllerConfig = field(default_factory=StepControllerConfig)
    order: OrderControllerConfig = field(default_factory=OrderControllerConfig)
    angle_threshold_deg: float = 1000.0
    events: list | None = None
    benchmark: bool = False
    benchmark_h: float = 1e-4
    fault_time: float = 1.0
    fault_duration: float = 0.2
    fault_admittance: float = 1e7
    trace_out: str | None = None
    step_log_out: str | None = None
    summary_out: str | None = None
    benchmark_out: str | None = None
    unsafe: bool = False

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.model not in ("classical", "detailed"):
            raise ConfigError(f"model must be 'classical' or 'detailed', got {self.model!r}")
        if not self.t_end > self.t0:
            raise ConfigError("t_end must exceed t0")
        if not (self.h > 0 and self.h0 > 0 and self.benchmark_h > 0):
            raise ConfigError("step sizes must be positive")
        if not 1 <= self.K <= 60:
            raise ConfigError("fixed order K must lie in [1, 60]")
        if self.fault_duration <= 0:
            raise ConfigError("fault_duration must be positive")
        if self.events is not None:
            try:
                EventSchedule(self.events)
            except (ScheduleError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"invalid events: {exc}") from None
        if not self.unsafe:
            bad = self.envelope_violations()
            if bad:
                raise ConfigError("parameters outside the supported envelope (use unsafe to override): "
                                  + "; ".join(bad))

    def envelope_violations(self) -> list[str]:
        out = _envelope(self.step, self.order)
        if self.solver in ("dt-fixed", "vs-dt") and not 4 <= self.K <= 45:
            out.append(f"K={self.K} outside [4, 45]")
        return out

    @classmethod
    def from_dict(cls, d: dict, unsafe: bool | None = None) -> "RunConfig":
        d = dict(d)
        step = _dataclass_from(StepControllerConfig, d.pop("step", None), "step")
        order = _dataclass_from(OrderControllerConfig, d.pop("order", None), "order")
        if unsafe is not None:
            d["unsafe"] = unsafe
        names = {f.name for f in dataclasses.fields(cls)} - {"step", "order"}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(step=step, order=order, **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                v = {k: (list(x) if isinstance(x, tuple) else x) for k, x in dataclasses.asdict(v).items()}
            elif f.name == "events" and v is not None:
                v = [e.to_dict() if isinstance(e, Event) else dict(e) for e in v]
            out[f.name] = v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, unsafe: bool | None = None) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d, unsafe)


def load_config(path, unsafe: bool | None = None) -> RunConfig:
    return RunConfig.from_json(Path(path).read_text(encoding="utf-8"), unsafe)


# -- single run ----------------------------------------------------------------

@dataclass
class SimulationResult:
    trace: Trace
    summary: dict
    benchmark: Trace | None = None

    @property
    def exit_code(self) -> int:
        return {"completed": EXIT_OK, "unstable": EXIT_UNSTABLE}.get(self.trace.status, EXIT_DIVERGED)


def _schedule(case: NetworkCase, config: RunConfig) -> EventSchedule:
    return EventSchedule(case.events if config.events is None else config.events)


def integrate(system: PowerSystem, config: RunConfig, events) -> Trace:
    """Run the configured solver on an initialised system."""
    x0 = system.x0
    c = config
    thr = c.angle_threshold_deg
    if c.solver == "vsoo-dt":
        return vsoo_integrate(system, x0, c.t0, c.t_end, step_cfg=c.step, order_cfg=c.order,
                              events=events, h0=c.h0, angle_threshold_deg=thr)
    if c.solver == "vs-dt":
        return vs_integrate(system, x0, c.K, c.t0, c.t_end, step_cfg=c.step, events=events,
                            h0=c.h0, angle_threshold_deg=thr)
    if c.solver == "dt-fixed":
        return fixed_integrate(system, x0, c.K, c.h, c.t0, c.t_end, events=events,
                               eta=c.step.eta_vector(x0.size), angle_threshold_deg=thr)
    if c.solver == "rk4":
        return rk4_integrate(system, x0, c.h, c.t0, c.t_end, events=events, angle_threshold_deg=thr)
    return me_integrate(system, x0, c.h, c.t0, c.t_end, events=events, angle_threshold_deg=thr)


def read_trace_csv(path) -> Trace:
    """Load a trace written by ``Trace.write_csv`` (states only, no step log)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t":
        raise CaseError(f"{path} is not a trace CSV")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(rows[0]))
    return Trace(data[:, 0], data[:, 1:], tuple(rows[0][1:]), t_final=float(data[-1, 0]) if len(data) else 0.0)


def _benchmark(case: NetworkCase, config: RunConfig, trace: Trace, events) -> Trace:
    path = config.benchmark_out
    if path and Path(path).exists():
        bm = read_trace_csv(path)
        if tuple(bm.names) != tuple(trace.names):
            raise CaseError(f"stored benchmark {path} has different state variables")
        return bm
    system = PowerSystem(case, config.model, fault_admittance=config.fault_admittance)
    # the benchmark runs to the trace's final time so an early stop still compares
    bm = rk4_integrate(system, system.x0, config.benchmark_h, config.t0, float(trace.times[-1]),
                       events=[e for e in events if e.time < trace.times[-1]],
                       angle_threshold_deg=None, sample_times=trace.times[1:])
    if path:
        bm.write_csv(path)
    return bm


def summarise(trace: Trace, config: RunConfig, bench: Trace | None = None) -> dict:
    steps = trace.steps
    out = {
        "solver": config.solver,
        "model": config.model,
        "status": trace.status,
        "unstable": trace.status == "unstable",
        "t_final": float(trace.t_final),
        "steps": trace.n_steps,
        "rejected": int(trace.rejected),
        "multiplies": float(trace.multiplies),
        "max_relative_angle_deg": float(trace.max_relative_angle_deg),
        "limiter_switches": len(trace.switches),
        "message": trace.message,
    }
    if steps and config.solver in ("vs-dt", "vsoo-dt", "dt-fixed"):
        out["max_h"] = float(max(s.h for s in steps))
        out["final_K"] = int(steps[-1].K)
        pinned = [s for s in steps if s.h <= config.step.h_min * (1 + 1e-9) and s.e_n > config.step.reject_factor * config.step.tol]
        out["pinned_steps"] = len(pinned)
    if bench is not None:
        es = benchmark_error(trace, bench)
        out["max_error"] = es.max
        out["mean_max_error"] = es.mean_max
    return out


def run_simulation(config: RunConfig, case: NetworkCase) -> SimulationResult:
    """Initialise the case, integrate, optionally benchmark, and write the requested files."""
    events = _schedule(case, config)
    system = PowerSystem(case, config.model, fault_admittance=config.fault_admittance)
    trace = integrate(system, config, events)
    bench = _benchmark(case, config, trace, events) if (config.benchmark or config.benchmark_out) else None
    summary = summarise(trace, config, bench)
    if config.trace_out:
        trace.write_csv(config.trace_out)
    if config.step_log_out:
        trace.write_step_log(config.step_log_out)
    if config.summary_out:
        Path(config.summary_out).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                            encoding="utf-8")
    return SimulationResult(trace, summary, bench)


# -- N-1 screening -------------------------------------------------------------

REPORT_FIELDS = ("id", "from_bus", "to_bus", "status", "stable", "t_final", "max_relative_angle_deg",
                 "multiplies", "steps", "rejected", "max_error", "mean_max_error", "message")


@dataclass(frozen=True)
class Contingency:
    id: str
    from_bus: int
    to_bus: int
    events: tuple


@dataclass
class ScreeningReport:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def unstable(self) -> list:
        return [r for r in self.rows if r["status"] == "unstable"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for r in self.rows:
            w.writerow([_fmt(r.get(k)) for k in REPORT_FIELDS])
        return buf.getvalue()

    def summary_text(self) -> str:
        lines = [f"contingencies: {len(self.rows)}",
                 f"stable: {sum(1 for r in self.rows if r['stable'])}",
                 f"unstable: {len(self.unstable)}",
                 f"errors: {sum(1 for r in self.rows if r['status'] in ('error', 'diverged'))}"]
        for key in ("multiplies", "max_error", "mean_max_error"):
            vals = [r[key] for r in self.rows if isinstance(r.get(key), (int, float))
                    and math.isfinite(r[key])]
            lines.append(f"{key}: " + _quantile_line(vals))
        return "\n".join(lines) + "\n"


def quantile_summary(values) -> dict:
    """Count, min, quartiles, max and mean of ``values`` (linear interpolation)."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        return {"count": 0}
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {"count": int(v.size), "min": float(q[0]), "q25": float(q[1]), "median": float(q[2]),
            "q75": float(q[3]), "max": float(q[4]), "mean": float(v.mean())}


def _quantile_line(values) -> str:
    s = quantile_summary(values)
    if s["count"] == 0:
        return "n=0"
    return (f"n={s['count']} min={s['min']:.6g} q25={s['q25']:.6g} median={s['median']:.6g} "
            f"q75={s['q75']:.6g} max={s['max']:.6g} mean={s['mean']:.6g}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def contingencies(case: NetworkCase, config: RunConfig) -> list[Contingency]:
    """One bolted fault per in-service branch, at its from-bus, cleared by tripping the branch."""
    out = []
    width = max(3, len(str(len(case.branches))))
    t_on, t_off = config.fault_time, config.fault_time + config.fault_duration
    for k, br in enumerate(case.branches):
        if not br.status:
            continue
        evs = (Event(t_on, "fault-apply", bus=br.from_bus),
               Event(t_off, "fault-clear", bus=br.from_bus, branch=(br.from_bus, br.to_bus)))
        out.append(Contingency(f"br{k:0{width}d}_{br.from_bus}-{br.to_bus}", br.from_bus, br.to_bus, evs))
    return out


def _screen_one(args) -> dict:
    case_dict, config_dict, cont = args
    row = {"id": cont.id, "from_bus": cont.from_bus, "to_bus": cont.to_bus, "status": "error",
           "stable": False, "t_final": None, "max_relative_angle_deg": None, "multiplies": None,
           "steps": None, "rejected": None, "max_error": None, "mean_max_error": None, "message": ""}
    try:
        case = NetworkCase.from_dict(case_dict)
        config = RunConfig.from_dict({**config_dict, "events": [e.to_dict() for e in cont.events],
                                      "trace_out": None, "step_log_out": None, "summary_out": None,
                                      "benchmark_out": None}, unsafe=True)
        res = run_simulation(config, case)
        s = res.summary
        row.update(status=s["status"], stable=s["status"] == "completed", t_final=s["t_final"],
                   max_relative_angle_deg=s["max_relative_angle_deg"], multiplies=s["multiplies"],
                   steps=s["steps"], rejected=s["rejected"], max_error=s.get("max_error"),
                   mean_max_error=s.get("mean_max_error"), message=s["message"])
    except Exception as exc:  # recorded per contingency; the batch goes on
        row["message"] = f"{type(exc).__name__}: {exc}"
    return row


def run_n1_screening(case: NetworkCase, config: RunConfig, jobs: int = 1) -> ScreeningReport:
    """Simulate every branch contingency; rows are sorted by contingency id."""
    conts = contingencies(case, config)
    case_dict, config_dict = case.to_dict(), config.to_dict()
    tasks = [(case_dict, config_dict, c) for c in conts]
    if jobs <= 1 or len(tasks) <= 1:
        rows = [_screen_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_screen_one, tasks))
    rows.sort(key=lambda r: r["id"])
    return ScreeningReport(rows)


def export_report(report: ScreeningReport, out_dir, stem: str = "screening") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>_summary.txt`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, txt_path = out / f"{stem}.csv", out / f"{stem}_summary.txt"
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    txt_path.write_text(report.summary_text(), encoding="utf-8")
    return csv_path, txt_path
