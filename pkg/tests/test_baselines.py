import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dtsim import (ComparisonError, StepControllerConfig, Trace, benchmark_error, dt_step, fixed_integrate,
                   linear_spec, me_integrate, rk4_integrate, vs_integrate)


@given(st.floats(-3, 0.5), st.floats(-3, 3))
def test_one_step_growth_factors(re, im):
    # real-valued 2x2 form of x' = lambda x
    z = complex(re, im)
    A = np.array([[z.real, -z.imag], [z.imag, z.real]])
    f = lambda x: A @ x  # noqa: E731
    rk4 = rk4_integrate(f, [1.0, 0.0], 1.0, 0.0, 1.0, angle_threshold_deg=None).final_state
    me = me_integrate(f, [1.0, 0.0], 1.0, 0.0, 1.0, angle_threshold_deg=None).final_state
    assert complex(*rk4) == pytest.approx(1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24, abs=1e-12)
    assert complex(*me) == pytest.approx(1 + z + z**2 / 2, abs=1e-12)


@pytest.mark.parametrize("method", [rk4_integrate, me_integrate])
def test_equilibrium_stays_put(smib_system, method):
    tr = method(smib_system, smib_system.x0, 0.01, 0.0, 2.0)
    assert tr.status == "completed"
    assert np.max(np.abs(tr.states - smib_system.x0)) <= 1e-12


def test_non_finite_state_reported_as_divergence():
    tr = rk4_integrate(lambda x: x * x, [1.0], 0.5, 0.0, 10.0, angle_threshold_deg=None)
    assert tr.status == "diverged"


def test_modified_euler_local_error_slope(smib_system):
    x0 = smib_system.x0 + np.array([0.1, 5e-3])
    spec = smib_system.spec()
    hs = np.geomspace(1e-3, 1e-2, 6)
    errs = []
    for h in hs:
        exact = dt_step(spec, x0, 30, h)[1]
        step = me_integrate(smib_system, x0, h, 0.0, h, angle_threshold_deg=None).final_state
        errs.append(np.max(np.abs(step - exact)))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.2)


def test_rk4_agrees_with_tight_dt_chain(smib_system):
    x0 = smib_system.x0 + np.array([0.3, 0.0])
    dt = vs_integrate(smib_system, x0, 12, 0.0, 1.0, StepControllerConfig(tol=1e-10, h_min=1e-6))
    ref = rk4_integrate(smib_system, x0, 1e-4, 0.0, 1.0, sample_times=dt.times)
    assert benchmark_error(dt, ref).max <= 1e-7


def test_rk4_matches_fourth_order_dt_on_linear_system():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(4, 4))
    x0 = rng.normal(size=4)
    h = 0.05
    dt = fixed_integrate(linear_spec(A), x0, 4, h, 0.0, 1.0)
    rk = rk4_integrate(lambda x: A @ x, x0, h, 0.0, 1.0, angle_threshold_deg=None)
    np.testing.assert_allclose(dt.times, rk.times, rtol=0, atol=1e-15)
    np.testing.assert_allclose(dt.states, rk.states, rtol=1e-13, atol=1e-13)


def _trace(times, states):
    return Trace(np.asarray(times, float), np.asarray(states, float), ("a", "b"))


def test_identical_traces_give_zero_error():
    t = np.linspace(0, 1, 11)
    x = np.column_stack([np.sin(t), np.cos(t)])
    err = benchmark_error(_trace(t, x), _trace(t, x))
    assert not np.any(err.errors)
    assert err.max == 0.0 and err.mean_max == 0.0


def test_constant_offset_error():
    t = np.linspace(0, 1, 11)
    x = np.column_stack([np.sin(t), np.cos(t)])
    shifted = x.copy()
    shifted[:, 1] += 1e-3
    err = benchmark_error(_trace(t, shifted), _trace(t, x))
    np.testing.assert_allclose(err.errors, 1e-3, rtol=1e-9)
    assert err.mean_max == pytest.approx(1e-3, rel=1e-9)


@given(st.lists(st.floats(-1, 1), min_size=20, max_size=20), st.lists(st.floats(-1, 1), min_size=20, max_size=20))
def test_error_symmetric_on_shared_grid(a, b):
    t = np.linspace(0, 1, 10)
    ta, tb = _trace(t, np.reshape(a, (10, 2))), _trace(t, np.reshape(b, (10, 2)))
    np.testing.assert_array_equal(benchmark_error(ta, tb).errors, benchmark_error(tb, ta).errors)


def test_error_outside_benchmark_range():
    t = np.linspace(0, 1, 11)
    x = np.zeros((11, 2))
    with pytest.raises(ComparisonError):
        benchmark_error(_trace(np.linspace(0, 2, 11), x), _trace(t, x))

