import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dtsim import (CoefficientBlock, ComplexityModel, OrderControllerConfig, StepControllerConfig, complexity,
                   decrease_candidate, increase_candidate, select_operating_point)
from dtsim.order_control import CandidateUnavailable, convergence_rate

STEP = StepControllerConfig(tol=1e-5, gamma=1.0, theta_max=2.0, h_min=1e-4, h_max=1.0, eta=0.0)
ORDER = OrderControllerConfig(K0=4, K_min=4, K_max=45, mu_de=1.0, mu_in=1.0)
CLASSICAL = ComplexityModel.classical(3, 6, 12)


def single_row(coeffs):
    c = np.asarray([coeffs], dtype=float)
    return CoefficientBlock(c.shape[1] - 1, 1, c)


def test_complexity_examples():
    assert complexity(CLASSICAL, 10) == 1806
    assert complexity(ComplexityModel.detailed(1, 13, 20), 10) == pytest.approx(3768)
    assert complexity(CLASSICAL, 0) == 6
    assert complexity(CLASSICAL, 9) == 1572
    assert complexity(CLASSICAL, 11) == 2052


@pytest.mark.parametrize("model", [CLASSICAL, ComplexityModel.detailed(3, 39, 120),
                                   ComplexityModel("measured", 12.5, 300.0, 6)])
def test_complexity_increasing(model):
    values = [model(K) for K in range(1, 46)]
    assert values[0] > 0
    assert all(b > a for a, b in zip(values, values[1:]))


def test_decrease_candidate_example():
    coeffs = np.zeros(11)
    coeffs[0] = 1.0
    coeffs[9] = 1.0  # |X(9)| h^9 / |x| = 1e-9 at h = 0.1
    h_de, K_de, e_de = decrease_candidate(single_row(coeffs), [1.0], 0.1, 10,
                                          OrderControllerConfig(K0=10, K_min=4), STEP)
    assert K_de == 9
    assert e_de == pytest.approx(1e-10 / 0.09, rel=1e-9)
    assert h_de == pytest.approx(0.2)


def test_decrease_candidate_zero_coefficients():
    h_de, K_de, e_de = decrease_candidate(single_row([1.0] + [0.0] * 10), [1.0], 0.1, 10, ORDER, STEP)
    assert e_de == 0.0 and h_de == pytest.approx(0.2)


def test_decrease_unavailable_at_lower_bound():
    with pytest.raises(CandidateUnavailable):
        decrease_candidate(single_row([1.0] * 5), [1.0], 0.1, 4, ORDER, STEP)


def test_convergence_rate_example():
    block = single_row([1.0, 1.0, 0.5, 0.25, 0.125])
    assert convergence_rate(block, 4, [0.0]) == pytest.approx(2.0)


def test_convergence_rate_is_step_scaled():
    block = single_row([1.0, 1.0, 0.5, 0.25, 0.125])
    assert convergence_rate(block, 4, [0.0], h=0.5) == pytest.approx(4.0)


def test_increase_candidate_example():
    # geometric coefficients with ratio 2, h_n = 1 so raw and step-scaled ratios coincide
    block = single_row([2.0**-k for k in range(11)])
    h_in, K_in = increase_candidate(block, 2 * STEP.tol, 1.0, 10, ORDER, STEP)
    assert K_in == 11
    assert h_in == pytest.approx(1.0)


def test_increase_unavailable_at_upper_bound():
    with pytest.raises(CandidateUnavailable):
        increase_candidate(single_row([1.0] * 46), 1e-6, 0.1, 45, ORDER, STEP)


def test_three_way_choice():
    history = ((0.1, 10), (0.1, 10))
    pt = select_operating_point((0.2, 9), (0.18, 10), (0.25, 11), history, CLASSICAL, ORDER)
    assert (pt.h, pt.K, pt.provenance) == (0.2, 9, "decreased")


def test_only_increase_condition():
    cfg = OrderControllerConfig(mu_in=1.5)
    history = ((0.1, 8), (0.05, 9))  # step shrank while the order grew: only the increase test applies
    model = ComplexityModel("measured", 0.0, 1.0, 0.0)  # C(K) = K, so C(10)/C(9) < 2/1.5
    pt = select_operating_point((0.3, 8), (0.05, 9), (0.1, 10), history, model, cfg)
    assert (pt.h, pt.K, pt.provenance) == (0.1, 10, "increased")


def test_falls_through_to_held():
    held = select_operating_point(None, (0.05, 9), None, ((0.1, 9), (0.05, 9)), CLASSICAL, ORDER)
    assert (held.h, held.K, held.provenance) == (0.05, 9, "held")
    first = select_operating_point((1.0, 8), (0.05, 9), (1.0, 10), None, CLASSICAL, ORDER)
    assert first.provenance == "held"


def test_tie_prefers_lower_order():
    model = ComplexityModel("measured", 0.0, 1.0, 0.0)
    pt = select_operating_point((0.9, 9), (1.0, 10), (1.1, 11), ((0.1, 10), (0.1, 10)), model, ORDER)
    assert pt.K == 9


cands = st.tuples(st.floats(1e-4, 0.2), st.floats(1e-4, 0.2), st.floats(1e-4, 0.2), st.integers(5, 44))


@given(cands, st.floats(1e-3, 1e3))
def test_argmax_invariant_under_model_scaling(c, factor):
    h_de, h_es, h_in, K = c
    args = ((h_de, K - 1), (h_es, K), (h_in, K + 1), ((0.1, K), (0.1, K)))
    a = select_operating_point(*args, CLASSICAL, ORDER)
    b = select_operating_point(*args, CLASSICAL.scaled(factor), ORDER)
    assert (a.h, a.K) == (b.h, b.K)


@given(cands)
def test_situation_three_never_worse_than_held(c):
    h_de, h_es, h_in, K = c
    pt = select_operating_point((h_de, K - 1), (h_es, K), (h_in, K + 1), ((0.1, K), (0.1, K)), CLASSICAL, ORDER)
    assert pt.h / CLASSICAL(pt.K) >= h_es / CLASSICAL(K)


@given(st.lists(st.floats(-1, 1), min_size=12, max_size=12), st.floats(1e-4, 0.2), st.integers(5, 11),
       st.floats(1e-12, 1e-2))
def test_candidates_within_bounds(coeffs, h, K, e_n):
    coeffs = [1.0] + coeffs[:K]
    block = single_row(coeffs)
    step = StepControllerConfig(tol=1e-5, h_min=1e-4, h_max=0.2, eta=1e-19)
    cfg = OrderControllerConfig(K0=5, K_min=4, K_max=12)
    h_de, K_de, _ = decrease_candidate(block, [1.0], h, K, cfg, step)
    h_in, K_in = increase_candidate(block, e_n, h, K, cfg, step)
    for hh, kk in ((h_de, K_de), (h_in, K_in)):
        assert step.h_min <= hh <= step.h_max
        assert cfg.K_min <= kk <= cfg.K_max
        assert math.isfinite(hh)
