"""Power-system spec provider: network state, events, limiter modes and initial state."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..drivers import ScheduleError
from ..engine import AugmentedSystemSpec, dt_coefficients
from ..order_control import ComplexityModel
from ..series import CoefficientBlock, horner
from . import detailed as det
from .classical import classical_rhs, classical_spec, electrical_power
from .events import Event, EventSchedule
from .machines import ClassicalMachineParams, DetailedMachineParams
from .network import (DEFAULT_FAULT_ADMITTANCE, CaseError, NetworkCase, build_admittance,
                      check_islands, kron_reduce, load_admittances, power_flow_nr)

MODELS = ("classical", "detailed")
SWITCH_RESOLUTION = 1e-9
SWITCH_SAMPLES = 32


@dataclass(frozen=True)
class LimiterSwitch:
    """Regulator limiter transition of machine ``machine`` at offset ``tau`` into the step."""

    tau: float
    machine: int
    mode: str


class PowerSystem:
    """Reduced-network multi-machine model with events, usable by every integrator.

    Loads become constant admittances at their power-flow voltages. Each
    machine is a source behind its model impedance (``j x'_d`` classical,
    ``ra + j x''`` detailed); the network is Kron-reduced onto these internal
    nodes plus any fixed-voltage (infinite) buses.
    """

    def __init__(self, case: NetworkCase, model: str = "classical",
                 fault_admittance: complex = DEFAULT_FAULT_ADMITTANCE, voltages=None,
                 pf_tol: float = 1e-8, pf_max_iter: int = 20):
        if model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        self.case = case
        self.model = model
        self.fault_admittance = fault_admittance
        self.voltages = power_flow_nr(case, pf_tol, pf_max_iter) if voltages is None else np.asarray(voltages)
        self.dyn_gens = [g for g in case.generators if not g.infinite]
        self.inf_gens = [g for g in case.generators if g.infinite]
        if not self.dyn_gens:
            raise CaseError("case has no dynamic generators")
        self.labels = [g.id for g in self.dyn_gens]
        cls = ClassicalMachineParams if model == "classical" else DetailedMachineParams
        self.params = [cls.from_dict(case.machine_params(model, g.machine or g.id)) for g in self.dyn_gens]
        self.nx = 2 if model == "classical" else det.NX
        self._y_load = load_admittances(case, self.voltages)
        self.faults: dict = {}
        self.tripped: set = set()
        self.offline: set = set()
        self.modes = ["free"] * len(self.dyn_gens)
        self.x0 = self._initialise()
        self._rebuild()

    # -- network --------------------------------------------------------------
    def bus_admittance(self) -> np.ndarray:
        """Bus matrix including load admittances, fault shunts and trips."""
        Y = build_admittance(self.case, self.faults, self.tripped, check_topology=False)
        return Y + np.diag(self._y_load)

    def _impedance(self, g: int) -> complex:
        p = self.params[g]
        return complex(0.0, p.xd_tr) if self.model == "classical" else det.source_impedance(p)

    @property
    def active(self) -> list[int]:
        return [g for g in range(len(self.dyn_gens)) if g not in self.offline]

    def augmented_admittance(self):
        """Bus matrix extended by internal machine nodes; returns (Y, retained indices)."""
        Ybus = self.bus_admittance()
        nb = Ybus.shape[0]
        act = self.active
        Y = np.zeros((nb + len(act), nb + len(act)), complex)
        Y[:nb, :nb] = Ybus
        for a, g in enumerate(act):
            i = self.case.index(self.dyn_gens[g].bus)
            y = 1.0 / self._impedance(g)
            k = nb + a
            Y[i, i] += y
            Y[k, k] += y
            Y[i, k] -= y
            Y[k, i] -= y
        retained = list(range(nb, nb + len(act))) + [self.case.index(g.bus) for g in self.inf_gens]
        return Y, retained

    def _reduce(self):
        Y, retained = self.augmented_admittance()
        Yr = kron_reduce(Y, retained)
        m = len(self.active)
        vb = np.array([self.voltages[self.case.index(g.bus)] for g in self.inf_gens], complex)
        fixed = Yr[:m, m:] @ vb if len(vb) else np.zeros(m, complex)
        return Yr[:m, :m], fixed

    def _rebuild(self, x=None):
        gen_buses = [self.dyn_gens[g].bus for g in self.active] + [g.bus for g in self.inf_gens]
        check_islands(self.case, self.tripped, gen_buses)
        self.Y_r, self.fixed_current = self._reduce()
        if self.model == "classical":
            self._spec = classical_spec(self.params, self.Y_r, self.fixed_current, self.active, self.labels)
        else:
            args = (self.params, self.Y_r)
            kw = dict(fixed_current=self.fixed_current, active=self.active, labels=self.labels)
            self._spec = det.detailed_spec(*args, self.modes, x=x, **kw)
            self._free_J = (self._spec.J if all(m == "free" for m in self.modes)
                            else det.detailed_spec(*args, None, **kw).J)

    # -- initialisation -------------------------------------------------------
    def _initialise(self) -> np.ndarray:
        V = self.voltages
        I_bus = (build_admittance(self.case, check_topology=False) + np.diag(self._y_load)) @ V
        x0 = np.zeros(self.nx * len(self.dyn_gens))
        for g, gen in enumerate(self.dyn_gens):
            i = self.case.index(gen.bus)
            if self.model == "classical":
                Eph = V[i] + self._impedance(g) * I_bus[i]
                self.params[g].E = float(abs(Eph))
                x0[2 * g] = np.angle(Eph)
            else:
                xg, self.params[g] = det.init_detailed_machine(self.params[g], V[i], I_bus[i])
                x0[self.nx * g: self.nx * (g + 1)] = xg
        if self.model == "classical":
            Yr, fixed = self._reduce()
            pe = electrical_power(self.params, Yr, x0, fixed)
            for g, p in enumerate(self.params):
                p.P_m = float(pe[g])
            self._trim_mechanical_power(x0, Yr, fixed)
        return x0

    def _trim_mechanical_power(self, x0, Yr, fixed, sweeps: int = 4):
        # Cancel the rounding residue of the lifted recursion so that X(1) is exactly zero.
        for _ in range(sweeps):
            spec = classical_spec(self.params, Yr, fixed, labels=self.labels)
            acc = (spec.J @ dt_coefficients(spec, x0, 1).coeffs[:, 0])[1::2]
            if not np.any(acc):
                return
            for g, p in enumerate(self.params):
                p.P_m = float(p.P_m - 2 * p.H * acc[g])

    # -- provider interface ---------------------------------------------------
    def spec(self) -> AugmentedSystemSpec:
        return self._spec

    @property
    def state_names(self):
        return self._spec.names[: self._spec.n_state]

    def rhs(self, x):
        return self.rhs_function()(x)

    def rhs_function(self):
        if self.model == "classical":
            return classical_rhs(self.params, self.Y_r, self.fixed_current, self.active)
        return det.detailed_rhs(self.params, self.Y_r, self.fixed_current, self.active)

    def outputs(self, x) -> dict:
        """Algebraic network quantities at state ``x`` (detailed model)."""
        if self.model == "classical":
            return {"p_e": electrical_power(self.params, self.Y_r, x, self.fixed_current, self.active)}
        return det.network_outputs(self.params, self.Y_r, x, self.fixed_current, self.active)

    def complexity_model(self, kind: str = "measured") -> ComplexityModel:
        m = len(self.active)
        if kind == "measured":
            return ComplexityModel.measured(self._spec, m)
        nx, nz = self.nx * m, self._spec.n_aug - self._spec.n_state + self.nx * m
        if kind in ("analytic", self.model):
            return getattr(ComplexityModel, self.model)(m, nx, nz)
        if kind in MODELS:
            return getattr(ComplexityModel, kind)(m, nx, nz)
        raise ValueError(f"unknown complexity model {kind!r}")

    def relative_angle_deg(self, x) -> float:
        angles = [x[self.nx * g + (0 if self.model == "classical" else det.ROW["delta"])] for g in self.active]
        angles += [np.angle(self.voltages[self.case.index(g.bus)]) for g in self.inf_gens]
        if len(angles) < 2:
            return 0.0
        return float(np.degrees(max(angles) - min(angles)))

    def apply_event(self, event: Event, x=None) -> None:
        """Update network/machine status; the state vector is not touched."""
        if isinstance(event, dict):
            event = Event.from_dict(event)
        if event.kind == "fault-apply":
            if event.bus not in self.case._index:
                self._missing(f"bus {event.bus}")
            y = self.fault_admittance if event.admittance is None else event.admittance
            self.faults = {**self.faults, event.bus: y}
        elif event.kind == "fault-clear":
            if event.bus is None:
                self.faults = {}
            else:
                self.faults = {b: y for b, y in self.faults.items() if b != event.bus}
            if event.branch is not None:
                self._trip_branch(event.branch)
        elif event.kind == "branch-trip":
            self._trip_branch(event.branch)
        elif event.kind == "generator-trip":
            idx = [g for g, gen in enumerate(self.dyn_gens) if gen.id == str(event.generator)]
            if not idx:
                self._missing(f"generator {event.generator}")
            if idx[0] in self.offline:
                raise ScheduleError(f"generator {event.generator} is already offline")
            if len(self.active) == 1:
                raise ScheduleError("cannot trip the last online machine")
            self.offline = self.offline | {idx[0]}
        self._rebuild(x)

    def _trip_branch(self, branch):
        for k, br in enumerate(self.case.branches):
            if br.status and k not in self.tripped and br.connects(*branch):
                self.tripped = self.tripped | {k}
                return
        self._missing(f"in-service branch {branch[0]}-{branch[1]}")

    @staticmethod
    def _missing(what):
        raise ScheduleError(f"event references missing {what}")

    def default_events(self) -> EventSchedule:
        return EventSchedule(self.case.events)

    # -- regulator limiter ----------------------------------------------------
    def _vr_row(self, g: int) -> int:
        return det.NX * g + det.ROW["v_r"]

    def detect_switch(self, block: CoefficientBlock, h: float, x_start) -> LimiterSwitch | None:
        """Earliest limiter transition inside ``(0, h]`` of the step's series, if any."""
        if self.model != "detailed" or h <= 0:
            return None
        best = None
        for g in self.active:
            p = self.params[g]
            mode = self.modes[g]
            r = self._vr_row(g)
            if mode == "free":
                c = block.coeffs[r]
                fns = [(lambda t, c=c: horner(c, t) - p.vr_max, "max"),
                       (lambda t, c=c: p.vr_min - horner(c, t), "min")]
            else:
                sign = 1.0 if mode == "max" else -1.0
                coeffs = self._free_J[r] @ block.coeffs
                fns = [(lambda t, c=coeffs, s=sign: -s * horner(c, t), "free")]
            for fn, new_mode in fns:
                tau = _first_crossing(fn, h)
                if tau is not None and (best is None or tau < best.tau):
                    best = LimiterSwitch(tau, g, new_mode)
        return best

    def commit_switch(self, x, sw: LimiterSwitch) -> np.ndarray:
        x = np.array(x, dtype=float)
        p = self.params[sw.machine]
        r = self._vr_row(sw.machine)
        if sw.mode == "max":
            x[r] = p.vr_max
        elif sw.mode == "min":
            x[r] = p.vr_min
        else:
            x[r] = min(max(x[r], p.vr_min), p.vr_max)
        modes = list(self.modes)
        modes[sw.machine] = sw.mode
        self.modes = modes
        self._rebuild(x)
        return x

    def post_step(self, x) -> np.ndarray:
        """Projection onto the regulator limits for the reference integrators."""
        if self.model != "detailed":
            return x
        x = np.array(x, dtype=float)
        for g in self.active:
            r = self._vr_row(g)
            x[r] = min(max(x[r], self.params[g].vr_min), self.params[g].vr_max)
        return x


def _first_crossing(fn, h: float):
    """Smallest ``t`` in ``(0, h]`` where ``fn`` turns positive, bracketed to ``SWITCH_RESOLUTION``."""
    lo = 0.0
    for j in range(1, SWITCH_SAMPLES + 1):
        t = h * j / SWITCH_SAMPLES
        if fn(t) > 0:
            hi = t
            while hi - lo > SWITCH_RESOLUTION:
                mid = 0.5 * (lo + hi)
                if fn(mid) > 0:
                    hi = mid
                else:
                    lo = mid
            return hi
        lo = t
    return None


def init_equilibrium(case: NetworkCase, voltages=None, model: str = "classical", **kw):
    """Initial state at which every model derivative vanishes; returns (x0, system)."""
    sys_ = PowerSystem(case, model, voltages=voltages, **kw)
    return sys_.x0.copy(), sys_
