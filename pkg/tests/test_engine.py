import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dtsim import (AugmentedSystemSpec, SpecBuilder, SpecError, StepDivergence, dt_coefficients, dt_step,
                   linear_spec, validate_spec)
from dtsim.engine import IntermediateRule
from dtsim.power import NetworkCase, PowerSystem

from conftest import smib_case_dict, two_machine_case_dict
from oracles import multimachine_taylor, smib_taylor


def pendulum_spec():
    b = SpecBuilder(["theta", "omega"])
    s, _ = b.sincos(0, "theta")
    b.add(0, 1, 1.0)
    b.add(1, s, -1.0)
    return b.build()


def smib_oracle_args(system):
    p = system.params[0]
    return dict(H=p.H, D=p.D, Pm=p.P_m, E=p.E, Vb=1.0, x=p.xd_tr + 0.3, omega_s=p.omega_s)


def test_dahlquist_coefficients():
    block = dt_coefficients(linear_spec([[1.0]]), [1.0], 5)
    np.testing.assert_allclose(block.state[0], [1 / math.factorial(k) for k in range(6)], rtol=1e-15)


def test_pendulum_equilibrium_is_flat():
    block = dt_coefficients(pendulum_spec(), [0.0, 0.0], 10)
    assert not np.any(block.state[:, 1:])


def test_step_returns_block_and_state():
    block, x = dt_step(linear_spec([[-2.0]]), [1.0], 12, 0.1)
    assert block.state[0, 0] == 1.0
    assert x[0] == pytest.approx(math.exp(-0.2), rel=1e-14)


def test_smib_matches_hand_recurrence():
    system = PowerSystem(NetworkCase.from_dict(smib_case_dict(D=1.5)), "classical")
    x0 = system.x0 + np.array([0.4, 2e-3])
    block = dt_coefficients(system.spec(), x0, 8)
    dl, sl = smib_taylor(x0[0], x0[1], 8, **smib_oracle_args(system))
    for got, ref in ((block.state[0], dl), (block.state[1], sl)):
        ref = np.array(ref)
        np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-10 * np.max(np.abs(ref)))


def test_two_machine_matches_pairwise_recurrence():
    system = PowerSystem(NetworkCase.from_dict(two_machine_case_dict(D=0.7)), "classical")
    x0 = system.x0 + np.array([0.3, 1e-3, -0.1, -2e-3])
    block = dt_coefficients(system.spec(), x0, 8)
    ps = system.params
    dl, sl = multimachine_taylor([x0[0], x0[2]], [x0[1], x0[3]], 8, H=[p.H for p in ps],
                                 D=[p.D for p in ps], Pm=[p.P_m for p in ps], E=[p.E for p in ps],
                                 Y=system.Y_r.tolist(), omega_s=ps[0].omega_s)
    for g in range(2):
        for got, ref in ((block.state[2 * g], dl[g]), (block.state[2 * g + 1], sl[g])):
            ref = np.array(ref)
            np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-10 * np.max(np.abs(ref)))


def test_well_formed_spec_has_no_diagnostics(smib_system):
    assert validate_spec(smib_system.spec()) == []
    assert validate_spec(pendulum_spec()) == []


class _Raw:
    """Unvalidated stand-in so malformed layouts can be inspected."""

    def __init__(self, n_state, J, rules):
        self.n_state, self.J, self.rules = n_state, np.asarray(J, float), tuple(rules)


def test_rule_reading_later_row_is_reported():
    rules = [IntermediateRule(2, "product", (0, 3)), IntermediateRule(3, "product", (0, 1))]
    diags = validate_spec(_Raw(2, np.ones((2, 4)), rules))
    assert any("ordering violation" in d for d in diags)


def test_wrong_column_count_is_reported():
    rules = [IntermediateRule(2, "product", (0, 1))]
    diags = validate_spec(_Raw(2, np.ones((2, 4)), rules))
    assert any("dimension mismatch" in d or "no rule" in d for d in diags)
    diags = validate_spec(_Raw(2, np.ones((3, 3)), rules))
    assert any("dimension mismatch" in d for d in diags)


def test_malformed_spec_rejected_at_construction():
    with pytest.raises(SpecError):
        AugmentedSystemSpec(2, np.ones((2, 4)), (IntermediateRule(2, "product", (0, 3)),
                                                 IntermediateRule(3, "product", (0, 1))))


def test_order_above_limit_rejected():
    with pytest.raises(ValueError):
        dt_coefficients(linear_spec([[1.0]]), [1.0], 61)
    dt_coefficients(linear_spec([[1.0]]), [1.0], 60)


def test_divergence_signalled():
    with pytest.raises(StepDivergence):
        dt_step(linear_spec([[1e300]]), [1e300], 4, 1.0)


def test_sqrt_rule_in_spec():
    # x' = sqrt(x) with x(0) = 1 has x(t) = (1 + t/2)^2
    b = SpecBuilder(["x"])
    r = b.sqrt(0, "root")
    b.add(0, r, 1.0)
    block = dt_coefficients(b.build(), [1.0], 6)
    np.testing.assert_allclose(block.state[0], [1, 1, 0.25, 0, 0, 0, 0], atol=1e-15)


@given(arrays(float, (3, 3), elements=st.floats(-2, 2)), arrays(float, 3, elements=st.floats(-1, 1)))
@settings(max_examples=50, deadline=None)
def test_linear_system_recursion(A, x0):
    block = dt_coefficients(linear_spec(A), x0, 10)
    X = block.state
    for k in range(10):
        ref = A @ X[:, k] / (k + 1)
        bound = 4 * np.finfo(float).eps * (np.abs(A) @ np.abs(X[:, k])) / (k + 1)
        assert np.all(np.abs(X[:, k + 1] - ref) <= bound)


def smib_local_error_slope(K, hs=np.geomspace(2e-3, 1e-2, 6)):
    """Log-log slope of the one-step error against a 40-term reference series."""
    system = PowerSystem(NetworkCase.from_dict(smib_case_dict()), "classical")
    x0 = system.x0 + np.array([0.1, 5e-3])
    errs = []
    for h in hs:
        _, x1 = dt_step(system.spec(), x0, K, h)
        dl, sl = smib_taylor(x0[0], x0[1], 40, **smib_oracle_args(system))
        ref = np.array([sum(c * h**k for k, c in enumerate(dl)), sum(c * h**k for k, c in enumerate(sl))])
        errs.append(np.max(np.abs(x1 - ref)))
    return np.polyfit(np.log(hs), np.log(errs), 1)[0]


@pytest.mark.parametrize("K", [3, 4, 5])
def test_local_error_order(K):
    assert abs(smib_local_error_slope(K) - (K + 1)) <= 0.2
