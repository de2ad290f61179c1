"""Network case data, bus admittance assembly, Kron reduction and Newton-Raphson power flow."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.sparse import coo_matrix

DEFAULT_FAULT_ADMITTANCE = 1e7


class CaseError(ValueError):
    """Malformed or inconsistent case data."""


class TopologyError(CaseError):
    """An island of the network has no generator."""


class ReductionError(ArithmeticError):
    """The eliminated block of the admittance matrix is singular."""


class PowerFlowError(RuntimeError):
    """Newton-Raphson did not converge."""


@dataclass
class Bus:
    id: int
    type: str = "PQ"
    v: float = 1.0
    angle: float = 0.0
    p_load: float = 0.0
    q_load: float = 0.0
    p_gen: float = 0.0
    q_gen: float = 0.0
    g_shunt: float = 0.0
    b_shunt: float = 0.0


@dataclass
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0
    status: bool = True

    def connects(self, a, b) -> bool:
        return {self.from_bus, self.to_bus} == {a, b}


@dataclass
class Generator:
    id: str
    bus: int
    machine: str | None = None
    infinite: bool = False


@dataclass
class NetworkCase:
    """Buses, branches and generators of a balanced positive-sequence network (p.u.)."""

    buses: list
    branches: list
    generators: list = field(default_factory=list)
    base_mva: float = 100.0
    frequency: float = 60.0
    machines: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise CaseError("duplicate bus ids")
        self._index = {b: i for i, b in enumerate(ids)}
        slack = [b for b in self.buses if b.type == "slack"]
        if len(slack) != 1:
            raise CaseError(f"exactly one slack bus required, found {len(slack)}")
        for br in self.branches:
            for b in (br.from_bus, br.to_bus):
                if b not in self._index:
                    raise CaseError(f"branch references unknown bus {b}")
            if br.r == 0 and br.x == 0:
                raise CaseError(f"branch {br.from_bus}-{br.to_bus} has zero impedance")
        gbus = [g.bus for g in self.generators]
        if len(set(gbus)) != len(gbus):
            raise CaseError("at most one generator per bus is supported")
        for g in self.generators:
            if g.bus not in self._index:
                raise CaseError(f"generator {g.id} at unknown bus {g.bus}")

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    def index(self, bus_id) -> int:
        try:
            return self._index[bus_id]
        except KeyError:
            raise CaseError(f"unknown bus {bus_id}") from None

    def branch_index(self, a, b) -> int:
        for i, br in enumerate(self.branches):
            if br.connects(a, b):
                return i
        raise CaseError(f"no branch between buses {a} and {b}")

    def machine_params(self, kind: str, ref: str) -> dict:
        for m in self.machines.get(kind, []):
            if m["id"] == ref:
                return m
        raise CaseError(f"no {kind} machine data with id {ref!r}")

    # -- serialisation -------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> "NetworkCase":
        buses = [Bus(**b) for b in d["buses"]]
        branches = [Branch(b["from"], b["to"], b.get("r", 0.0), b["x"], b.get("b", 0.0),
                           bool(b.get("status", True))) for b in d["branches"]]
        gens = [Generator(str(g["id"]), g["bus"], g.get("machine"), bool(g.get("infinite", False)))
                for g in d.get("generators", [])]
        return cls(buses, branches, gens, d.get("base_mva", 100.0), d.get("frequency", 60.0),
                   d.get("machines", {}), list(d.get("events", [])), d.get("name", ""))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base_mva": self.base_mva,
            "frequency": self.frequency,
            "buses": [vars(b).copy() for b in self.buses],
            "branches": [{"from": b.from_bus, "to": b.to_bus, "r": b.r, "x": b.x, "b": b.b,
                          "status": int(b.status)} for b in self.branches],
            "generators": [{"id": g.id, "bus": g.bus, "machine": g.machine, "infinite": g.infinite}
                           for g in self.generators],
            "machines": self.machines,
            "events": self.events,
        }


def load_case(path) -> NetworkCase:
    with open(path, encoding="utf-8") as fh:
        return NetworkCase.from_dict(json.load(fh))


def bundled_case(name: str = "ieee9") -> NetworkCase:
    return load_case(Path(__file__).resolve().parent.parent / "data" / f"{name}.json")


def build_admittance(case: NetworkCase, faults: dict | None = None, tripped: set | frozenset = frozenset(),
                     check_topology: bool = True) -> np.ndarray:
    """Bus admittance matrix with pi-model branches, bus shunts and fault shunts.

    ``faults`` maps bus id to shunt admittance; ``tripped`` holds indices of
    branches taken out of service (in addition to ``status=False`` ones).
    """
    n = case.n_bus
    Y = np.zeros((n, n), dtype=complex)
    for k, br in enumerate(case.branches):
        if not br.status or k in tripped:
            continue
        i, j = case.index(br.from_bus), case.index(br.to_bus)
        ys = 1.0 / complex(br.r, br.x)
        yc = 0.5j * br.b
        Y[i, i] += ys + yc
        Y[j, j] += ys + yc
        Y[i, j] -= ys
        Y[j, i] -= ys
    for b in case.buses:
        i = case.index(b.id)
        Y[i, i] += complex(b.g_shunt, b.b_shunt)
    for bus, y in (faults or {}).items():
        Y[case.index(bus), case.index(bus)] += y
    if check_topology:
        check_islands(case, tripped)
    return Y


def check_islands(case: NetworkCase, tripped=frozenset(), gen_buses=None) -> None:
    n = case.n_bus
    rows, cols = [], []
    for k, br in enumerate(case.branches):
        if br.status and k not in tripped:
            rows.append(case.index(br.from_bus))
            cols.append(case.index(br.to_bus))
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    if gen_buses is None:
        gen_buses = [g.bus for g in case.generators]
    powered = {labels[case.index(b)] for b in gen_buses}
    for lab in set(labels) - powered:
        members = [case.buses[i].id for i in np.flatnonzero(labels == lab)]
        raise TopologyError(f"island {members} contains no generator")


def kron_reduce(Y: np.ndarray, retained) -> np.ndarray:
    """Schur complement ``Y_rr - Y_re Y_ee^-1 Y_er`` onto the ``retained`` nodes (in that order)."""
    Y = np.asarray(Y, dtype=complex)
    retained = list(retained)
    elim = [i for i in range(Y.shape[0]) if i not in set(retained)]
    Yrr = Y[np.ix_(retained, retained)]
    if not elim:
        return Yrr.copy()
    Yee = Y[np.ix_(elim, elim)]
    if np.linalg.cond(Yee) > 1e14:
        raise ReductionError("eliminated block is singular")
    try:
        X = np.linalg.solve(Yee, Y[np.ix_(elim, retained)])
    except np.linalg.LinAlgError as exc:
        raise ReductionError("eliminated block is singular") from exc
    return Yrr - Y[np.ix_(retained, elim)] @ X


def power_flow_nr(case: NetworkCase, tol: float = 1e-8, max_iter: int = 20) -> np.ndarray:
    """Polar Newton-Raphson from a flat start; returns complex bus voltages."""
    Y = build_admittance(case, check_topology=False)
    types = [b.type for b in case.buses]
    slack = [i for i, t in enumerate(types) if t == "slack"]
    pv = [i for i, t in enumerate(types) if t == "PV"]
    pq = [i for i, t in enumerate(types) if t == "PQ"]
    if any(t not in ("slack", "PV", "PQ") for t in types):
        raise CaseError("bus type must be slack, PV or PQ")
    vm = np.array([1.0 if t == "PQ" else b.v for t, b in zip(types, case.buses)])
    va = np.zeros(case.n_bus)
    va[slack] = case.buses[slack[0]].angle
    p_spec = np.array([b.p_gen - b.p_load for b in case.buses])
    q_spec = np.array([b.q_gen - b.q_load for b in case.buses])
    ns = pv + pq
    for _ in range(max_iter + 1):
        V = vm * np.exp(1j * va)
        S = V * np.conj(Y @ V)
        mis = np.concatenate([S.real[ns] - p_spec[ns], S.imag[pq] - q_spec[pq]])
        if not np.all(np.isfinite(mis)):
            break
        if np.max(np.abs(mis), initial=0.0) < tol:
            return V
        I = Y @ V
        Vn = V / np.abs(V)
        dS_dVm = np.diag(V) @ np.conj(Y @ np.diag(Vn)) + np.diag(np.conj(I) * Vn)
        dS_dVa = 1j * np.diag(V) @ np.conj(np.diag(I) - Y @ np.diag(V))
        Jac = np.block([
            [dS_dVa.real[np.ix_(ns, ns)], dS_dVm.real[np.ix_(ns, pq)]],
            [dS_dVa.imag[np.ix_(pq, ns)], dS_dVm.imag[np.ix_(pq, pq)]],
        ])
        try:
            dx = np.linalg.solve(Jac, -mis)
        except np.linalg.LinAlgError:
            break
        va[ns] += dx[: len(ns)]
        vm[pq] += dx[len(ns):]
        if np.any(vm[pq] <= 0):
            break
    raise PowerFlowError(f"Newton-Raphson did not converge within {max_iter} iterations")


def bus_injections(case: NetworkCase, V: np.ndarray) -> np.ndarray:
    """Complex power injected at each bus by the solved voltages."""
    Y = build_admittance(case, check_topology=False)
    return V * np.conj(Y @ V)


def load_admittances(case: NetworkCase, V: np.ndarray) -> np.ndarray:
    """Constant-impedance equivalents ``(P - jQ) / |V|^2`` of the bus loads."""
    pl = np.array([complex(b.p_load, -b.q_load) for b in case.buses])
    return pl / np.abs(V) ** 2
