import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grf.covariance import Kernel1D, sampled_sequence
from grf.errors import ConvergenceError, DomainError, InfeasibleError, InstabilityError
from grf.spectral import (RationalFilter1D, SpectralDensity1D, analytic_ar1_covariance,
                          ar1_filter_exponential, arma_covariance, bauer_factorize,
                          build_filter, design_filter, dual_gradient_hessian, levinson,
                          me_dual_solve, poly_autocorrelation, trig_eval)

# frozen closed-form values for sigma2 = 1, alpha = 1, T = 1/12
# (40-digit decimal evaluation of -exp(-1/12) and sqrt(1 - exp(-1/6)))
A1_T12 = -0.9200444146293233
B0_T12 = 0.39181408232653653


def _grid(n=8192):
    return 2 * np.pi * np.arange(n) / n


def test_ar1_closed_form_frozen():
    f = ar1_filter_exponential(1.0, 1.0, 1 / 12)
    assert f.a.tolist() == [1.0, pytest.approx(A1_T12, abs=1e-15)]
    assert f.b.tolist() == [pytest.approx(B0_T12, abs=1e-15)]
    assert f.b[0] ** 2 / (1 - f.a[1] ** 2) == pytest.approx(1.0, abs=1e-14)


def test_ar1_limits_and_scaling():
    f = ar1_filter_exponential(1.0, 1.0, 20.0)
    assert abs(f.a[1]) < 3e-9 and f.b[0] == pytest.approx(1.0, abs=1e-15)
    g = ar1_filter_exponential(4.0, 0.7, 0.3)
    assert analytic_ar1_covariance(g, 0) == pytest.approx(4.0, rel=1e-14)


def test_analytic_ar1_examples():
    assert analytic_ar1_covariance(RationalFilter1D([1.0], [1.0, 0.0]), 0) == 1.0
    assert analytic_ar1_covariance(RationalFilter1D([1.0], [1.0, -0.5]), 2) == pytest.approx(1 / 3)
    with pytest.raises(DomainError):
        analytic_ar1_covariance(RationalFilter1D([1.0, 0.5], [1.0, -0.5]), 0)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("T", [1 / 12, 1 / 10, 1 / 8])
def test_ar1_matches_sampled_sequence(alpha, T):
    f = ar1_filter_exponential(1.0, alpha, T)
    k = np.arange(51)
    np.testing.assert_allclose(analytic_ar1_covariance(f, k),
                               sampled_sequence(Kernel1D.exponential(1.0, alpha), T, 50),
                               rtol=0, atol=1e-14)


def test_filter_validation():
    with pytest.raises(DomainError):
        RationalFilter1D([1.0], [2.0, 0.5])
    with pytest.raises(InstabilityError):
        RationalFilter1D([1.0], [1.0, -1.2])
    with pytest.raises(InstabilityError):
        RationalFilter1D([1.0, -2.0], [1.0])  # numerator zero outside the circle


def test_filter_text_round_trip():
    f = ar1_filter_exponential(1.0, 1.0, 1 / 12)
    assert f.to_text().splitlines()[0].startswith("a: 1.0 -0.92004")
    g = RationalFilter1D.from_text(f.to_text())
    np.testing.assert_array_equal(g.a, f.a)
    np.testing.assert_array_equal(g.b, f.b)
    h = RationalFilter1D.from_dict(f.to_dict())
    np.testing.assert_array_equal(h.b, f.b)


def test_levinson_and_infeasible():
    r = 0.6
    a, e, k = levinson([1.0, r, r * r])
    np.testing.assert_allclose(a, [1.0, -r, 0.0], atol=1e-15)
    assert e == pytest.approx(1 - r * r)
    with pytest.raises(InfeasibleError):
        levinson([1.0, 1.0])
    with pytest.raises(InfeasibleError):
        me_dual_solve([1.0, 0.9, -0.9], [1.0])


def test_me_trivial():
    dens, rep = me_dual_solve([1.0], [1.0])
    assert rep.converged
    np.testing.assert_allclose(dens(_grid(64)), 1.0, atol=1e-12)


def test_me_ar1_equals_closed_form():
    r = math.exp(-0.1)
    dens, rep = me_dual_solve([1.0, r], [1.0])
    q = dens.q / dens.q[0]
    np.testing.assert_allclose(q, [1.0, -r / (1 + r * r)], atol=1e-10)
    f = build_filter(Kernel1D.custom([1.0, r]), 1.0)
    g = ar1_filter_exponential(1.0, 0.1, 1.0)
    np.testing.assert_allclose(f.a, g.a, atol=1e-10)
    np.testing.assert_allclose(f.b, g.b, atol=1e-10)


def test_custom_yule_walker_example():
    f = build_filter(Kernel1D.custom([1.0, 0.5]), 1.0)
    np.testing.assert_allclose(f.a, [1.0, -0.5], atol=1e-10)
    np.testing.assert_allclose(f.b, [math.sqrt(0.75)], atol=1e-10)
    np.testing.assert_allclose(analytic_ar1_covariance(f, [0, 1]), [1.0, 0.5], atol=1e-10)


def test_me_gaussian_moments_and_factor():
    kern = Kernel1D.gaussian(1.0, 1.0)
    des = design_filter(kern, 0.2, b=[1.0, -0.2])
    assert des.m == 13 and des.filter.m == 13 and des.filter.n == 1
    assert des.report.converged and des.report.iterations <= 50
    sigma = sampled_sequence(kern, 0.2, 13)
    th = _grid()
    # moments by quadrature of the returned filter's spectrum
    H = np.polyval(des.filter.b[::-1], np.exp(-1j * th)) / np.polyval(des.filter.a[::-1],
                                                                      np.exp(-1j * th))
    mom = np.cos(np.outer(np.arange(14), th)) @ np.abs(H) ** 2 / th.size
    np.testing.assert_allclose(mom, sigma, rtol=0, atol=1e-9)
    # time-domain oracle: long impulse-response convolution
    np.testing.assert_allclose(arma_covariance(des.filter, 13), sigma, rtol=0, atol=1e-9)
    # spectral-factor round trip against the density
    th = _grid(4096)
    phi = des.density(th)
    np.testing.assert_allclose(des.filter.power_spectrum(th), phi, rtol=1e-8)
    assert des.filter.is_stable()


def test_auto_order_notes_for_fine_sampling():
    des = design_filter(Kernel1D.gaussian(1.0, 1.0), 0.1)
    assert des.m_auto == 26 and des.m < des.m_auto
    assert des.notes
    sigma = sampled_sequence(Kernel1D.gaussian(), 0.1, des.m)
    np.testing.assert_allclose(arma_covariance(des.filter, des.m), sigma, atol=1e-8)


def test_explicit_m_zero_gives_constant_spectrum():
    f = build_filter(Kernel1D.gaussian(2.0, 1.0), 0.2, m=0)
    assert f.m == 0 and f.n == 0
    assert f.b[0] ** 2 == pytest.approx(2.0)


def test_build_filter_exponential_dispatch():
    f = build_filter(Kernel1D.exponential(1.0, 1.0), 1 / 12)
    g = ar1_filter_exponential(1.0, 1.0, 1 / 12)
    np.testing.assert_array_equal(f.a, g.a)
    np.testing.assert_array_equal(f.b, g.b)


def test_dual_gradient_examples():
    sigma = np.array([1.7, 0.3, 0.1])
    _, g, H = dual_gradient_hessian(np.array([1.0, 0.0, 0.0]), sigma, [1.0], 256)
    assert g[0] == pytest.approx(sigma[0] - 1.0, abs=1e-14)
    np.testing.assert_allclose(g[1:], 2 * sigma[1:], atol=1e-14)
    with pytest.raises(DomainError):
        dual_gradient_hessian(np.array([0.1, 1.0, 0.0]), sigma, [1.0], 256)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.25, 0.25), min_size=2, max_size=4),
       st.floats(0.2, 0.9))
def test_dual_hessian_finite_difference(tail, rho):
    # random feasible q: coefficients small enough that Q > 0
    q = np.r_[1.0, np.array(tail) / len(tail)]
    sigma = sampled_sequence(Kernel1D.exponential(1.0, -math.log(rho)), 1.0, q.size - 1)
    P = [1.1, -0.2]
    _, g, H = dual_gradient_hessian(q, sigma, P, 512)
    assert np.all(np.linalg.eigvalsh(H) > 0)
    eps = 1e-6
    for l in range(q.size):
        e = np.zeros_like(q)
        e[l] = eps
        _, g2, _ = dual_gradient_hessian(q + e, sigma, P, 512)
        np.testing.assert_allclose((g2 - g) / eps, H[:, l], rtol=1e-4, atol=1e-5)


def test_dual_gradient_vanishes_at_optimum():
    sigma = sampled_sequence(Kernel1D.gaussian(1.0, 1.0), 1 / 3, 5)
    dens, rep = me_dual_solve(sigma, [1.0])
    _, g, H = dual_gradient_hessian(dens.q, sigma, [1.0], 8192)
    assert np.max(np.abs(g)) < 1e-8
    assert np.all(np.linalg.eigvalsh(H) > 0)


def test_bauer_examples():
    np.testing.assert_allclose(bauer_factorize([1.0]), [1.0])
    np.testing.assert_allclose(bauer_factorize([1.25, -0.5]), [1.0, -0.5], atol=1e-12)
    with pytest.raises(DomainError):
        bauer_factorize([1.0, 0.6])  # 1 + 1.2 cos has zeros


def _factor_jacobian(a):
    m = a.size - 1
    J = np.zeros((m + 1, m + 1))
    for k in range(m + 1):
        for j in range(m + 1 - k):
            J[k, j + k] += a[j]
            J[k, j] += a[j + k]
    return J


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0, 0.9), st.floats(0.0, math.pi)), min_size=1, max_size=5),
       st.floats(0.5, 2.0))
def test_bauer_round_trip_property(roots, gain):
    z = []
    for r, ph in roots:
        z += [r * np.exp(1j * ph), r * np.exp(-1j * ph)]
    a = gain * np.real(np.poly(z))
    q = poly_autocorrelation(a)
    got = bauer_factorize(q)
    # backward error: the factor reproduces q
    np.testing.assert_allclose(poly_autocorrelation(got), q, rtol=0, atol=1e-9 * q[0])
    assert np.all(np.abs(np.roots(got)) < 1)
    # forward error within the first-order conditioning bound; clustered
    # roots (which hypothesis likes to find) make this large
    bound = np.linalg.norm(np.linalg.inv(_factor_jacobian(a)), 2) * q[0] * 1e-13 + 1e-10
    assert np.max(np.abs(got - a)) <= max(bound, 1e-8 * np.abs(a).max())


def test_bauer_well_separated_roots():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        r = 0.9 * np.sqrt(rng.uniform(0, 1, n))
        ph = rng.uniform(0, np.pi, n)
        z = np.r_[r * np.exp(1j * ph), r * np.exp(-1j * ph)]
        a = np.real(np.poly(z))
        got = bauer_factorize(poly_autocorrelation(a))
        assert np.max(np.abs(got - a)) <= 1e-8 * max(1.0, np.linalg.cond(_factor_jacobian(a)) * 1e-6)


def test_density_positivity_and_moments():
    with pytest.raises(DomainError):
        SpectralDensity1D([1.0], [0.2, 0.5])
    d = SpectralDensity1D([1.0], [1.25, -0.5])
    r = 0.5
    np.testing.assert_allclose(d.moments(2), [1 / (1 - r * r), r / (1 - r * r), r * r / (1 - r * r)],
                               atol=1e-12)
    np.testing.assert_allclose(trig_eval([1.25, -0.5], np.array([0.0, np.pi])), [0.25, 2.25])


def test_convergence_error_carries_report():
    sigma = sampled_sequence(Kernel1D.gaussian(1.0, 1.0), 0.05, 40)
    with pytest.raises((ConvergenceError, InfeasibleError)) as exc:
        me_dual_solve(sigma, [1.0], max_iter=5)
    if isinstance(exc.value, ConvergenceError):
        assert exc.value.report is not None
        assert not exc.value.report.converged
