import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from grf.covariance import CovarianceModel, Kernel1D
from grf.errors import DomainError, SizeError
from grf.oracle import (CovMatrix, build_cov_matrix, cmd_sample, covariance_profile,
                        flop_estimate, sample_covariance, stepwise_cmd_sample, target_profile,
                        toeplitz_factor)
from grf.sampler import generate


def _exp_model(T, alpha=None):
    alpha = alpha or [1.0] * len(T)
    return CovarianceModel(tuple(Kernel1D.exponential(1.0, a) for a in alpha), tuple(T))


def test_build_cov_matrix_examples():
    r = math.exp(-0.3)
    S = build_cov_matrix(_exp_model((0.3,)), (2,))
    np.testing.assert_allclose(S.data, [[1, r], [r, 1]], atol=1e-15)
    assert S.structure == "kron-of-toeplitz"
    one = build_cov_matrix(CovarianceModel((Kernel1D.exponential(2.0, 1.0),
                                            Kernel1D.gaussian(3.0, 1.0)), (1.0, 1.0)), (1, 1))
    np.testing.assert_allclose(one.data, [[6.0]])
    with pytest.raises(SizeError):
        build_cov_matrix(_exp_model((0.1, 0.1)), (200, 200))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_kronecker_consistency(n1, n2, t1, t2):
    model = CovarianceModel((Kernel1D.exponential(), Kernel1D.gaussian(2.0, 0.7)), (t1, t2))
    S = build_cov_matrix(model, (n1, n2))
    np.testing.assert_allclose(S.data, np.kron(*S.factors), atol=1e-14)
    # elementwise definition: entry ((i,j),(k,l)) = rho1((i-k)t1) rho2((j-l)t2)
    idx = np.indices((n1, n2)).reshape(2, -1).T
    d = idx[:, None, :] - idx[None, :, :]
    ref = np.exp(-np.abs(d[..., 0]) * t1) * 2.0 * np.exp(-0.7 * (d[..., 1] * t2) ** 2)
    np.testing.assert_allclose(S.data, ref, atol=1e-14)
    np.testing.assert_allclose(S.data, S.data.T, atol=1e-15)


def test_cmd_sample_examples():
    I = CovMatrix(np.eye(3))
    from grf.sampler import white_noise
    np.testing.assert_array_equal(cmd_sample(I, 4), white_noise((3,), 4).data)
    r = 0.7
    L = np.linalg.cholesky(np.array([[1, r], [r, 1]]))
    np.testing.assert_allclose(L, [[1, 0], [r, math.sqrt(1 - r * r)]], atol=1e-15)
    with pytest.raises(DomainError):
        cmd_sample(CovMatrix(np.array([[1.0, 2.0], [2.0, 1.0]])), 0)


def test_cmd_sample_monte_carlo_16x16():
    # 16 x 16 covariance (a 4 x 4 grid); 1e5 draws vectorized through L
    model = _exp_model((0.3, 0.5))
    S = build_cov_matrix(model, (4, 4))
    L = np.linalg.cholesky(S.data)
    W = np.random.default_rng(1).standard_normal((16, 100_000))
    Y = L @ W
    emp = Y @ Y.T / W.shape[1]
    assert np.max(np.abs(emp - S.data)) <= 0.03 * np.max(np.abs(S.data))
    # and the library path agrees with L @ w for its own noise
    y = cmd_sample(S, 3)
    from grf.sampler import white_noise
    np.testing.assert_allclose(y, L @ white_noise((16,), 3).data, rtol=1e-13)


def test_stepwise_matches_kronecker_law():
    model = CovarianceModel((Kernel1D.exponential(), Kernel1D.gaussian(1.0, 1.0)), (0.2, 0.3))
    N = (3, 3)
    L1, L2 = (np.linalg.cholesky(toeplitz_factor(k, t, n))
              for k, t, n in zip(model.kernels, model.T, N))
    K = np.kron(L1, L2)
    np.testing.assert_allclose(K @ K.T, build_cov_matrix(model, N).data, atol=1e-12)
    y = stepwise_cmd_sample(model, N, 6).data
    from grf.sampler import white_noise
    np.testing.assert_allclose(y.ravel(), K @ white_noise(N, 6).data.ravel(), atol=1e-13)


def test_stepwise_1d_equals_cmd():
    model = _exp_model((0.1,))
    a = stepwise_cmd_sample(model, (20,), 5).data
    b = cmd_sample(build_cov_matrix(model, (20,)), 5)
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_sample_covariance_constant_field():
    c = 1.5
    y = np.full((4, 5, 6), c)
    for k in [(0, 0, 0), (1, 2, 3), (3, 0, 5)]:
        expect = c * c * np.prod([n - kk for n, kk in zip(y.shape, k)]) / y.size
        assert sample_covariance(y, k) == pytest.approx(expect, rel=1e-14)
    assert sample_covariance(y, (0, 0, 0)) == pytest.approx(np.mean(y * y))
    with pytest.raises(DomainError):
        sample_covariance(y, (4, 0, 0))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_sample_covariance_nonnegative_at_zero(seed):
    y = np.random.default_rng(seed).standard_normal((5, 6))
    assert sample_covariance(y, (0, 0)) >= 0


def test_profiles_and_targets():
    model = _exp_model((1 / 12, 1 / 10, 1 / 8))
    cov, dist = target_profile(model, "diag", 4)
    np.testing.assert_allclose(cov, np.exp(-(1 / 12 + 1 / 10 + 1 / 8) * np.arange(5)), atol=1e-15)
    assert dist[1] == pytest.approx(math.sqrt((1 / 12) ** 2 + 0.01 + (1 / 8) ** 2))
    y = generate(model, (12, 12, 12), 4)[0]
    p = covariance_profile(y, "x")
    assert p.size == 12
    assert p[3] == pytest.approx(sample_covariance(y, (3, 0, 0)))
    with pytest.raises(DomainError):
        covariance_profile(y, "w")
    with pytest.raises(DomainError):
        covariance_profile(y, 0, 12)


def test_white_field_profile():
    model = CovarianceModel((Kernel1D.custom([1.0]), Kernel1D.custom([1.0])), (1.0, 1.0))
    y = generate(model, (200, 200), 12)[0]
    p = covariance_profile(y, "x", 5)
    assert abs(p[0] - 1) < 0.02
    assert np.all(np.abs(p[1:]) < 0.02)


def test_flop_table_values():
    N = (100, 100, 100)
    assert f"{flop_estimate('cmd', N):.2e}" == "1.00e+18"
    assert f"{flop_estimate('stepwise', N):.2e}" == "3.00e+08"
    assert f"{flop_estimate('circulant', C=(512, 512, 512)):.2e}" == "3.62e+09"
    assert f"{flop_estimate('realization', N):.2e}" == "1.00e+06"
    with pytest.raises(DomainError):
        flop_estimate("circulant", N)
    with pytest.raises(ValueError):
        flop_estimate("fft", N)
