import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dtsim import ScheduleError, SpecError, dt_coefficients
from dtsim.power import (Event, EventSchedule, InitError, NetworkCase, PowerSystem, rotate_to_machine,
                         rotate_to_network)
from dtsim.power.detailed import NX, ROW, source_impedance
from dtsim.power.network import bus_injections

from conftest import detailed_smib, detailed_smib_spec, smib_case_dict


@pytest.mark.parametrize("model", ["classical", "detailed"])
def test_initial_state_is_equilibrium(ieee9, model):
    system = PowerSystem(ieee9, model)
    assert np.max(np.abs(system.rhs(system.x0))) <= 1e-9
    X = dt_coefficients(system.spec(), system.x0, 6).state
    # roundoff in the residual is amplified by the fast modes, so weigh each order by a typical step
    scaled = np.abs(X[:, 1:]) * 0.01 ** np.arange(1, 7)
    assert np.max(scaled) <= 1e-12


def test_classical_equilibrium_series_exactly_flat(ieee9):
    system = PowerSystem(ieee9, "classical")
    assert not np.any(dt_coefficients(system.spec(), system.x0, 10).state[:, 1:])


def test_classical_angle_from_terminal_phasors(ieee9):
    system = PowerSystem(ieee9, "classical")
    V = system.voltages
    S = bus_injections(ieee9, V)
    for g, gen in enumerate(system.dyn_gens):
        i = ieee9.index(gen.bus)
        I = np.conj(S[i] / V[i])
        E = V[i] + 1j * system.params[g].xd_tr * I
        assert system.x0[2 * g] == pytest.approx(np.angle(E), abs=1e-12)
        assert system.params[g].E == pytest.approx(abs(E), abs=1e-12)


def test_classical_dimensions(ieee9):
    system = PowerSystem(ieee9, "classical")
    spec = system.spec()
    assert spec.n_state == 6
    model = system.complexity_model("classical")
    assert (model.n_gen, model.n_state, model.n_aug) == (3, 6, spec.n_aug)


def test_detailed_regulator_initialisation(ieee9):
    system = PowerSystem(ieee9, "detailed")
    for g, p in enumerate(system.params):
        xm = system.x0[NX * g: NX * (g + 1)]
        assert xm[ROW["v_r"]] == pytest.approx(p.K_e * xm[ROW["e_fd"]], rel=1e-14)
        assert p.vr_min <= xm[ROW["v_r"]] <= p.vr_max


def test_detailed_dimensions(ieee9):
    assert PowerSystem(ieee9, "detailed").spec().n_state == 39


def test_regulator_outside_limits_has_no_equilibrium():
    with pytest.raises(InitError):
        detailed_smib(vr_max=0.5)


def test_saturated_mode_freezes_regulator():
    p, x0, args = detailed_smib()
    x = x0.copy()
    x[ROW["v_r"]] = p.vr_max
    spec = detailed_smib_spec(p, args, ["max"], x=x)
    assert not np.any(spec.J[ROW["v_r"]])
    free = detailed_smib_spec(p, args)
    assert np.any(free.J[ROW["v_r"]])
    X = dt_coefficients(spec, x, 8).state
    assert not np.any(X[ROW["v_r"], 1:])


def test_saturated_mode_inconsistent_with_state():
    p, x0, args = detailed_smib()
    with pytest.raises(SpecError):
        detailed_smib_spec(p, args, ["max"], x=x0)


def test_unequal_subtransient_reactances_rejected():
    p, _, _ = detailed_smib()
    with pytest.raises(SpecError):
        source_impedance(dataclasses.replace(p, xq_sub=p.xd_sub * 1.1))


def test_fault_apply_then_clear_restores_network(ieee9):
    system = PowerSystem(ieee9, "classical")
    Y0, Yr0 = system.bus_admittance(), system.Y_r.copy()
    system.apply_event(Event(1.0, "fault-apply", bus=7))
    assert not np.array_equal(system.Y_r, Yr0)
    system.apply_event(Event(1.1, "fault-clear", bus=7))
    assert np.array_equal(system.bus_admittance(), Y0)
    assert np.array_equal(system.Y_r, Yr0)


def test_branch_trip_changes_reduced_network(ieee9):
    system = PowerSystem(ieee9, "classical")
    Yr0 = system.Y_r.copy()
    system.apply_event(Event(1.0, "branch-trip", branch=(5, 7)))
    assert not np.allclose(system.Y_r, Yr0)


def test_generator_trip_shrinks_model(ieee9):
    system = PowerSystem(ieee9, "classical")
    before = system.complexity_model()
    system.apply_event(Event(1.0, "generator-trip", generator="3"))
    assert system.active == [0, 1]
    assert system.Y_r.shape == (2, 2)
    after = system.complexity_model()
    assert after.n_gen == before.n_gen - 1
    assert after(10) < before(10)


def test_event_leaves_state_untouched(ieee9):
    system = PowerSystem(ieee9, "detailed")
    x = system.x0.copy()
    x[ROW["delta"]] += 0.1
    snapshot = x.copy()
    system.apply_event(Event(1.0, "fault-apply", bus=7), x)
    assert np.array_equal(x, snapshot)


@pytest.mark.parametrize("event", [Event(1.0, "fault-apply", bus=99), Event(1.0, "branch-trip", branch=(1, 9)),
                                   Event(1.0, "generator-trip", generator="nope")])
def test_event_on_missing_element(ieee9, event):
    with pytest.raises(ScheduleError):
        PowerSystem(ieee9, "classical").apply_event(event)


def test_schedule_validation():
    with pytest.raises(ScheduleError):
        EventSchedule([{"time": 1.0, "kind": "fault-apply", "bus": 7}, {"time": 1.0, "kind": "fault-clear"}])
    with pytest.raises(ScheduleError):
        EventSchedule([{"time": 1.0, "kind": "fault-clear", "bus": 7}])


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-20, 20))
def test_frame_rotation_round_trip(d, q, delta):
    x, y = rotate_to_network(d, q, delta)
    d2, q2 = rotate_to_machine(x, y, delta)
    assert abs(d2 - d) <= 1e-13 * max(1.0, abs(d), abs(q))
    assert abs(q2 - q) <= 1e-13 * max(1.0, abs(d), abs(q))


def test_reduced_currents_match_full_network(ieee9):
    system = PowerSystem(ieee9, "classical")
    x = system.x0 + np.array([0.1, 0, -0.2, 0, 0.05, 0])
    E = np.array([p.E for p in system.params]) * np.exp(1j * x[0::2])
    Y, retained = system.augmented_admittance()
    elim = [i for i in range(Y.shape[0]) if i not in retained]
    V = np.zeros(Y.shape[0], complex)
    V[retained] = E
    V[elim] = -np.linalg.solve(Y[np.ix_(elim, elim)], Y[np.ix_(elim, retained)] @ E)
    np.testing.assert_allclose(system.Y_r @ E, (Y @ V)[retained], atol=1e-10)


def test_smib_with_infinite_bus_has_fixed_injection():
    system = PowerSystem(NetworkCase.from_dict(smib_case_dict()), "classical")
    assert system.Y_r.shape == (1, 1)
    assert abs(system.fixed_current[0]) > 0
    assert system.relative_angle_deg(system.x0) > 0
