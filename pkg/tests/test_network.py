import math

import numpy as np
import pytest

from dtsim.power import (NetworkCase, PowerFlowError, ReductionError, TopologyError, build_admittance,
                         kron_reduce, power_flow_nr)
from dtsim.power.network import CaseError, bus_injections


def two_bus(p_load=0.0, bus2="PQ", x=0.1):
    return NetworkCase.from_dict({
        "buses": [{"id": 1, "type": "slack", "v": 1.0},
                  {"id": 2, "type": bus2, "v": 1.0, "p_load": p_load}],
        "branches": [{"from": 1, "to": 2, "r": 0.0, "x": x}],
        "generators": [{"id": "g", "bus": 1}],
    })


def ring():
    return NetworkCase.from_dict({
        "buses": [{"id": 1, "type": "slack"}, {"id": 2}, {"id": 3}],
        "branches": [{"from": 1, "to": 2, "x": 0.1}, {"from": 2, "to": 3, "x": 0.1},
                     {"from": 3, "to": 1, "x": 0.1}],
        "generators": [{"id": "g", "bus": 1}],
    })


def test_single_branch_admittance():
    np.testing.assert_allclose(build_admittance(two_bus()), [[-10j, 10j], [10j, -10j]])


def test_ring_admittance():
    Y = build_admittance(ring())
    np.testing.assert_allclose(np.diag(Y), [-20j] * 3)
    off = Y[~np.eye(3, dtype=bool)]
    np.testing.assert_allclose(off, [10j] * 6)


def test_branch_trip_removes_stamps():
    Y = build_admittance(ring(), tripped={0})
    assert Y[0, 1] == 0 and Y[1, 0] == 0
    assert Y[0, 0] == pytest.approx(-10j)


def test_island_without_generator_rejected():
    with pytest.raises(TopologyError):
        build_admittance(two_bus(), tripped={0})


def test_fault_shunt_added_to_diagonal():
    Y0 = build_admittance(ring())
    Y1 = build_admittance(ring(), faults={2: 1e7})
    assert Y1[1, 1] - Y0[1, 1] == 1e7


def test_case_validation():
    with pytest.raises(CaseError):
        NetworkCase.from_dict({"buses": [{"id": 1}, {"id": 2}], "branches": []})
    with pytest.raises(CaseError):
        NetworkCase.from_dict({"buses": [{"id": 1, "type": "slack"}],
                               "branches": [{"from": 1, "to": 9, "x": 0.1}]})


def test_kron_keep_all_is_identity():
    Y = build_admittance(ring())
    np.testing.assert_array_equal(kron_reduce(Y, [0, 1, 2]), Y)


def test_kron_star_to_delta():
    # legs of -10j from a centre node to two retained nodes, no shunt at the centre
    y = -10j
    Y = np.array([[y, 0, -y], [0, y, -y], [-y, -y, 2 * y]])
    Yr = kron_reduce(Y, [0, 1])
    assert -Yr[0, 1] == pytest.approx(-5j)
    assert Yr[0, 0] == pytest.approx(-5j)


def test_kron_singular_block():
    Y = np.array([[-10j, 10j, 0], [10j, -10j, 0], [0, 0, 0]])
    with pytest.raises(ReductionError):
        kron_reduce(Y, [0, 1])


def test_kron_currents_consistent():
    rng = np.random.default_rng(3)
    case = ring()
    Y = build_admittance(case) + np.diag([0.0, 0.3 - 0.1j, 0.5 + 0.2j])
    retained, elim = [0, 1], [2]
    V_r = rng.normal(size=2) + 1j * rng.normal(size=2)
    # eliminated node carries no injection: back-substitute its voltage
    V_e = -np.linalg.solve(Y[np.ix_(elim, elim)], Y[np.ix_(elim, retained)] @ V_r)
    V = np.zeros(3, complex)
    V[retained], V[elim] = V_r, V_e
    np.testing.assert_allclose(kron_reduce(Y, retained) @ V_r, (Y @ V)[retained], atol=1e-10)


def test_power_flow_no_load():
    V = power_flow_nr(two_bus())
    np.testing.assert_allclose(V, [1.0, 1.0], atol=1e-12)


def test_power_flow_two_bus_voltage_held():
    V = power_flow_nr(two_bus(0.5, bus2="PV"))
    assert abs(V[1]) == pytest.approx(1.0, abs=1e-12)
    assert np.angle(V[1]) == pytest.approx(-math.asin(0.05), abs=1e-10)


def test_power_flow_two_bus_unity_power_factor_load():
    # with Q = 0 at the load bus: V2 = cos(theta), sin(2 theta) = 2 P x
    V = power_flow_nr(two_bus(0.5))
    theta = 0.5 * math.asin(0.1)
    assert np.angle(V[1]) == pytest.approx(-theta, abs=1e-10)
    assert abs(V[1]) == pytest.approx(math.cos(theta), abs=1e-10)


def test_power_flow_mismatch_below_tolerance(ieee9):
    V = power_flow_nr(ieee9, tol=1e-10)
    S = bus_injections(ieee9, V)
    for i, b in enumerate(ieee9.buses):
        if b.type != "slack":
            assert abs(S[i].real - (b.p_gen - b.p_load)) < 1e-10
        if b.type == "PQ":
            assert abs(S[i].imag - (b.q_gen - b.q_load)) < 1e-10


def test_power_flow_infeasible_load():
    with pytest.raises(PowerFlowError):
        power_flow_nr(two_bus(6.0))
