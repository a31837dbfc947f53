import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pidfit.errors import DomainError, IndeterminateError, SingularityError, StructuralError
from pidfit.lti import (PidGains, Polynomial, SimGrid, TimeSeries, TransferFunction, closed_loop,
                        dc_gain, freq_response, pid_tf, poly_mul, poly_roots,
                        reference_discrete_loop, simulate_closed_loop, step_response,
                        tf_feedback_unity)

PLANT3 = TransferFunction([1.0], [1.0, 3.0, 3.0, 1.0])
FOTD = TransferFunction([1.0], [1.0, 1.0], delay=1.0)


def test_poly_mul_examples():
    assert poly_mul(Polynomial([1, 1]), Polynomial([1, 1])).coeffs == (1.0, 2.0, 1.0)
    cube = poly_mul(poly_mul(Polynomial([1, 1]), Polynomial([1, 1])), Polynomial([1, 1]))
    assert cube.coeffs == (1.0, 3.0, 3.0, 1.0)


def test_polynomial_trims_leading_zeros():
    p = Polynomial([0.0, 0.0, 2.0, 1.0])
    assert p.coeffs == (2.0, 1.0) and p.degree == 1
    assert Polynomial([0.0]).is_zero


def test_poly_roots_cubic():
    r = poly_roots(Polynomial([1, 3, 3, 1]))
    np.testing.assert_allclose(r, -1.0, atol=1e-4)
    np.testing.assert_allclose(np.sort(poly_roots(Polynomial([1, -3, 2])).real), [1.0, 2.0])


def test_poly_roots_rejects_constants():
    with pytest.raises(DomainError):
        poly_roots(Polynomial([3.0]))
    with pytest.raises(DomainError):
        poly_roots(Polynomial([0.0]))


coeff = st.floats(min_value=-5, max_value=5, allow_nan=False).filter(lambda c: abs(c) > 1e-3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=-3, max_value=3, allow_nan=False), min_size=1, max_size=6))
def test_root_residual_from_known_roots(roots):
    p = Polynomial(np.poly(roots))
    found = poly_roots(p)
    assert found.size == len(roots)
    scale = np.polyval(np.abs(p.array), np.abs(found))
    assert np.all(np.abs(p(found)) <= 1e-7 * np.maximum(scale, 1.0))


@settings(max_examples=60, deadline=None)
@given(st.lists(coeff, min_size=2, max_size=7), st.lists(coeff, min_size=1, max_size=7))
def test_poly_mul_evaluates_pointwise(a, b):
    pa, pb = Polynomial(a), Polynomial(b)
    prod = poly_mul(pa, pb)
    assert prod.degree == pa.degree + pb.degree
    for s in (0.3, -1.1, 0.7j):
        assert abs(prod(s) - pa(s) * pb(s)) <= 1e-9 * (1 + abs(pa(s) * pb(s)))


@settings(max_examples=60, deadline=None)
@given(st.lists(coeff, min_size=1, max_size=6), st.lists(coeff, min_size=2, max_size=7))
def test_feedback_algebra(num, den):
    num = num[: len(den)]
    loop = TransferFunction(num, den)
    cl = tf_feedback_unity(loop)
    for s in (0.5 + 0.25j, 2.0j, -0.3 + 1.0j):
        L = loop(s)
        if abs(1 + L) < 1e-6 or not np.isfinite(L):
            continue
        assert abs(cl(s) - L / (1 + L)) <= 1e-8 * (1 + abs(L / (1 + L)))


def test_feedback_rejects_delay_and_improper():
    with pytest.raises(StructuralError):
        tf_feedback_unity(FOTD)
    with pytest.raises(StructuralError):
        tf_feedback_unity(TransferFunction([1, 0, 0], [-1, 0, 1]))


def test_pid_tf_structures():
    assert pid_tf(PidGains(2.0)).num.coeffs == (2.0,)
    pd = pid_tf(PidGains(2.0, 0.0, 0.5))
    assert pd.num.coeffs == (0.5, 2.0) and pd.den.coeffs == (1.0,)
    full = pid_tf(PidGains(1.0, 2.0, 3.0))
    assert full.num.coeffs == (3.0, 1.0, 2.0) and full.den.coeffs == (1.0, 0.0)


def test_pid_gains_validation():
    with pytest.raises(DomainError):
        PidGains(-1.0)
    with pytest.raises(DomainError):
        PidGains(1.0, math.nan)


def test_dc_gain():
    assert dc_gain(PLANT3) == 1.0
    assert dc_gain(TransferFunction([1], [1, 0])) == math.inf
    with pytest.raises(IndeterminateError):
        dc_gain(TransferFunction([1, 0], [1, 0]))
    # integral action drives the closed-loop final value to one
    assert dc_gain(closed_loop(PLANT3, PidGains(1.0, 0.5, 0.0))) == pytest.approx(1.0)


def test_zoh_exact_first_order():
    grid = SimGrid(10.0, 2000)
    y = step_response(TransferFunction([1], [1, 1]), grid)
    assert np.max(np.abs(y.values - (1 - np.exp(-grid.times)))) <= 1e-9
    on_grid = SimGrid(10.0, 1001)
    assert step_response(TransferFunction([1], [1, 1]), on_grid).at(1.0) == pytest.approx(0.632121, abs=1e-6)


def test_second_order_closed_form():
    grid = SimGrid(2.0, 1001)
    y = step_response(TransferFunction([36.0], [1.0, 12.0, 36.0]), grid)
    assert y.at(1.0) == pytest.approx(0.98265, abs=1e-5)


def test_zero_controller_gives_zero_response():
    y = simulate_closed_loop(TransferFunction([1], [1, 1]), PidGains(0.0), SimGrid(5.0, 100))
    assert np.all(y.values == 0.0)


def test_zoh_exact_third_order():
    grid = SimGrid(20.0, 2000)
    t = grid.times
    exact = 1 - np.exp(-t) * (1 + t + t ** 2 / 2)
    assert np.max(np.abs(step_response(PLANT3, grid).values - exact)) <= 1e-9


def test_delay_is_sample_shift():
    grid = SimGrid(10.0, 1001)
    y = step_response(FOTD, grid)
    t = grid.times
    exact = np.where(t >= 1.0, 1 - np.exp(-(t - 1.0)), 0.0)
    assert np.max(np.abs(y.values - exact)) <= 1e-9


def test_simgrid_alignment():
    grid = SimGrid(25.0, 2000)
    assert not grid.divides(1.0)
    aligned = grid.aligned_to(1.0)
    assert aligned.divides(1.0) and aligned.t_final == 25.0
    assert aligned.n_samples >= 2000


def test_timeseries_flags_non_finite():
    grid = SimGrid(1.0, 3)
    ts = TimeSeries(grid, np.array([0.0, np.inf, 1.0]))
    assert ts.diverged
    with pytest.raises(ValueError):
        ts.values[0] = 2.0


def test_closed_loop_matches_analytic_p_control():
    # Kp=1 on 1/(s+1) gives 0.5 (1 - e^{-2t})
    grid = SimGrid(5.0, 1001)
    y = simulate_closed_loop(TransferFunction([1], [1, 1]), PidGains(1.0), grid)
    assert np.max(np.abs(y.values - 0.5 * (1 - np.exp(-2 * grid.times)))) <= 1e-9


@pytest.mark.parametrize("plant,gains,horizon", [
    (TransferFunction([1], [1, 1]), (0.3955, 0.3282, 0.0), 25.0),
    (TransferFunction([1], [1, 1]), (2.5575, 3.4360, 0.0), 4.0),
    (TransferFunction([1], [1, 1]), (11.0, 36.0, 0.0), 4.0),
    (PLANT3, (0.9248, 0.2829, 0.0), 40.0),
])
def test_path_consistency_discrete_vs_rational(plant, gains, horizon):
    grid = SimGrid(horizon, 2000)
    g = PidGains(*gains)
    exact = simulate_closed_loop(plant, g, grid)
    forced = simulate_closed_loop(plant, g, grid, force_discrete=True)
    assert np.max(np.abs(exact.values - forced.values)) <= 5e-3


@pytest.mark.parametrize("plant,gains", [
    (FOTD, PidGains(0.3955, 0.3282)),
    (TransferFunction([2.0], [1.0, 3.0, 1.0], delay=0.5), PidGains(0.8, 0.4, 0.3)),
    (TransferFunction([1.0, 1.0], [1.0, 2.0], delay=0.2), PidGains(0.5, 0.8, 0.0)),
])
def test_vectorized_loop_matches_per_sample_reference(plant, gains):
    grid = SimGrid(20.0, 2000).aligned_to(plant.delay)
    fast = simulate_closed_loop(plant, gains, grid)
    slow = reference_discrete_loop(plant, gains, grid)
    assert np.max(np.abs(fast.values - slow)) <= 1e-10


def test_delayed_loop_divergence_is_flagged():
    y = simulate_closed_loop(FOTD, PidGains(50.0, 50.0, 0.0), SimGrid(200.0, 2000).aligned_to(1.0))
    assert y.diverged or np.max(np.abs(y.values)) > 1e6


def test_improper_plant_rejected():
    with pytest.raises(StructuralError):
        step_response(TransferFunction([1, 0, 0], [1, 1]), SimGrid(1.0, 10))


def test_freq_response_examples():
    fr = freq_response(TransferFunction([1], [1, 1]), [1.0])
    assert fr.magnitudes[0] == pytest.approx(1 / math.sqrt(2))
    assert fr.phases_rad[0] == pytest.approx(-math.pi / 4)
    # third-order lag crosses -180 degrees at sqrt(3) with magnitude 1/8
    fr3 = freq_response(PLANT3, [math.sqrt(3)])
    assert fr3.phases_rad[0] == pytest.approx(-math.pi)
    assert fr3.magnitudes[0] == pytest.approx(0.125)
    # delay contributes -omega L of phase without wrapping
    frd = freq_response(FOTD, [10.0])
    assert frd.phases_rad[0] == pytest.approx(-math.atan(10.0) - 10.0)


def test_freq_response_singular_point():
    with pytest.raises(SingularityError):
        freq_response(TransferFunction([1], [1, 0, 1]), [1.0])
