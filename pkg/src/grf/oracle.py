"""Reference samplers and estimators for checking the fast path.

Dense covariance-matrix decomposition, the per-axis (stepwise) variant,
the spatial-average sample covariance and leading-order operation counts
of the competing methods.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .covariance import CovarianceModel, KernelKind, eval_kernel, product_covariance
from .errors import DomainError, SizeError
from .sampler import FieldGrid, white_noise

__all__ = [
    "DENSE_CAP",
    "CovMatrix",
    "toeplitz_factor",
    "build_cov_matrix",
    "cmd_sample",
    "stepwise_cmd_sample",
    "sample_covariance",
    "covariance_profile",
    "target_profile",
    "Method",
    "flop_estimate",
]

DENSE_CAP = 32768


def toeplitz_factor(kernel, T: float, n: int) -> np.ndarray:
    """``n x n`` Toeplitz covariance of one axis."""
    k = np.arange(n, dtype=float)
    lags = k if kernel.kind is KernelKind.CUSTOM else k * T
    col = np.asarray(eval_kernel(kernel, lags), dtype=float).reshape(n)
    return sla.toeplitz(col)


@dataclass(frozen=True, eq=False)
class CovMatrix:
    """Dense covariance of a stacked (row-major) grid.

    ``factors`` holds the per-axis Toeplitz matrices when the matrix is
    their Kronecker product (``structure == "kron-of-toeplitz"``).
    """

    data: np.ndarray
    structure: str = "dense"
    factors: Optional[tuple] = None

    @property
    def n(self) -> int:
        return self.data.shape[0]


def build_cov_matrix(model: CovarianceModel, N, cap: int = DENSE_CAP) -> CovMatrix:
    """Covariance matrix of the grid ``N`` stacked in row-major order."""
    N = tuple(int(n) for n in np.atleast_1d(N))
    if len(N) != model.dims or any(n < 1 for n in N):
        raise DomainError(f"bad extents {N} for a {model.dims}-d model")
    n = int(np.prod(N))
    if n > cap:
        raise SizeError(f"{n} unknowns exceed the dense cap {cap}; use generate() instead")
    factors = tuple(toeplitz_factor(k, t, nj) for k, t, nj in zip(model.kernels, model.T, N))
    S = factors[0]
    for F in factors[1:]:
        S = np.kron(S, F)
    return CovMatrix(S, "kron-of-toeplitz", factors)


def cmd_sample(cov: CovMatrix, seed) -> np.ndarray:
    """``y = L w`` with ``L`` the lower Cholesky factor and ``w`` seeded noise."""
    try:
        L = np.linalg.cholesky(cov.data)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"covariance matrix is not positive definite: {exc}")
    w = white_noise((cov.n,), seed).data
    return L @ w


def stepwise_cmd_sample(model: CovarianceModel, N, seed, cap: int = DENSE_CAP) -> FieldGrid:
    """Apply each axis' Cholesky factor along that axis of a noise grid.

    Equivalent in law to :func:`cmd_sample` on the Kronecker covariance,
    since ``(L_1 x ... x L_d)(L_1 x ... x L_d)^T = Sigma_1 x ... x Sigma_d``.
    In 1-d it is the same computation.
    """
    N = tuple(int(n) for n in np.atleast_1d(N))
    if len(N) != model.dims:
        raise DomainError("extent/model dimension mismatch")
    if any(n > cap for n in N):
        raise SizeError(f"per-axis extent above cap {cap}")
    y = white_noise(N, seed).data.copy()
    for axis, (k, t, n) in enumerate(zip(model.kernels, model.T, N)):
        try:
            L = np.linalg.cholesky(toeplitz_factor(k, t, n))
        except np.linalg.LinAlgError as exc:
            raise DomainError(f"axis {axis} covariance not positive definite: {exc}")
        y = np.moveaxis(np.tensordot(L, y, axes=(1, axis)), 0, axis)
    return FieldGrid(y, model.T, {"seed": int(seed), "scale_level": 0,
                                  "generator": "stepwise-cmd"})


def _data(field) -> np.ndarray:
    return field.data if isinstance(field, FieldGrid) else np.asarray(field, dtype=float)


def sample_covariance(field, k) -> float:
    """Spatial-average covariance at lag ``k``, normalized by the grid size.

    ``sum_x y(x + k) y(x) / prod(N)`` over all ``x`` with ``x + k`` inside
    the grid (a biased estimator). No mean is removed.
    """
    y = _data(field)
    k = tuple(int(v) for v in np.atleast_1d(k))
    if len(k) != y.ndim:
        raise DomainError("lag dimension mismatch")
    if any(not 0 <= kj < n for kj, n in zip(k, y.shape)):
        raise DomainError(f"lag {k} outside [0, N)")
    a = y[tuple(slice(kj, None) for kj in k)]
    b = y[tuple(slice(0, n - kj) for kj, n in zip(k, y.shape))]
    return float(np.sum(a * b) / y.size)


def _direction_vector(direction, dims: int) -> np.ndarray:
    if isinstance(direction, str):
        names = {"x": 0, "y": 1, "z": 2}
        if direction == "diag":
            return np.ones(dims, dtype=int)
        if direction in names:
            direction = names[direction]
        else:
            raise DomainError(f"unknown direction {direction!r}")
    j = int(direction)
    if not 0 <= j < dims:
        raise DomainError(f"axis {j} invalid for a {dims}-d field")
    e = np.zeros(dims, dtype=int)
    e[j] = 1
    return e


def covariance_profile(field, direction, max_lag: Optional[int] = None) -> np.ndarray:
    """Sample covariance at lags ``k * e`` for ``k = 0..max_lag``.

    ``direction`` is an axis index, one of ``"x"``, ``"y"``, ``"z"``, or
    ``"diag"`` for the main diagonal ``(1, ..., 1)``.
    """
    y = _data(field)
    e = _direction_vector(direction, y.ndim)
    limit = min(n for n, ej in zip(y.shape, e) if ej) - 1
    if max_lag is None:
        max_lag = limit
    if not 0 <= max_lag <= limit:
        raise DomainError(f"max_lag {max_lag} exceeds the extent (max {limit})")
    return np.array([sample_covariance(y, k * e) for k in range(max_lag + 1)])


def target_profile(model: CovarianceModel, direction, max_lag: int):
    """Model covariance and physical distance along a profile direction.

    Returns
    -------
    cov, distance : ndarray
    """
    e = _direction_vector(direction, model.dims)
    cov = np.array([product_covariance(model, k * e) for k in range(max_lag + 1)])
    step = math.sqrt(sum((t * ej) ** 2 for t, ej in zip(model.T, e)))
    return cov, step * np.arange(max_lag + 1)


class Method(str, enum.Enum):
    CMD = "cmd"
    STEPWISE = "stepwise"
    CIRCULANT = "circulant"
    REALIZATION = "realization"


def flop_estimate(method, N=None, C=None) -> float:
    """Leading-order operation count of a sampling method.

    ``cmd``: ``|N|^3``; ``stepwise``: ``|N| sum(N)``; ``circulant``:
    ``|C| log2 |C|`` for the embedding extents ``C``; ``realization``:
    ``|N|``.

    >>> f"{flop_estimate('cmd', (100, 100, 100)):.2e}"
    '1.00e+18'
    """
    method = Method(method)
    if method is Method.CIRCULANT:
        if C is None:
            raise DomainError("circulant estimate needs embedding extents C")
        c = float(np.prod(np.asarray(C, dtype=float)))
        return c * math.log2(c)
    if N is None:
        raise DomainError("estimate needs extents N")
    N = np.asarray(N, dtype=float)
    n = float(np.prod(N))
    if method is Method.CMD:
        return n ** 3
    if method is Method.STEPWISE:
        return n * float(np.sum(N))
    return n
