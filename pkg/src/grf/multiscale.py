"""Refinement of exponential-kernel realizations to half the spacing.

A coarse grid of extents ``N`` sits at the even indices of a fine grid of
extents ``2N - 1``. Per axis the fine field obeys the first-order
recursion ``y(k) - r y(k-1) = b w(k)``, with ``r = exp(-alpha T/2)``. Two
fine steps give the coarse recursion with ``r**2``. Composing the fine
innovation operator with ``1 + r z^-1`` therefore turns fine noise into
coarse noise. On every block ``{2k-1, 2k}`` (one per axis, all ``k >= 1``)
the fine noise ``w`` must satisfy::

    (prod_j (1 + r_j z_j^-1)) w  at (2k)  ==  (prod_j beta_j) w'(k)

Here ``beta_j = b'_j / b_j = sqrt(1 + r_j**2)`` and ``w'`` is the coarse
noise. Blocks do not overlap, so any per-block solution yields a fine
noise grid whose filtered output passes through the coarse samples. Fine
samples on the first row and column have no complete block behind them.
They are drawn from their exact conditional law given all coarse samples
and then serve as initial data for the recursions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy import signal

from .covariance import CovarianceModel, KernelKind, eval_kernel
from .errors import (DegenerateFilterError, DomainError, RegularizationError,
                     UnsupportedError)
from .sampler import FieldGrid, NoiseGrid, white_noise
from .spectral import RationalFilter1D, build_filter

__all__ = [
    "RefinementState",
    "ConditionalGaussian",
    "halve_scale",
    "fine_extents",
    "boundary_indices",
    "conditional_boundary",
    "sample_boundary",
    "reconstruct_fine_noise",
    "complete_fine_field",
    "refine",
    "NOISE_MODES",
]

NOISE_MODES = ("particular", "conditional")
# relative tolerance when checking stored noise against the field
_NOISE_CHECK = 1e-7


def _check_model(model: CovarianceModel):
    if model.dims not in (1, 2):
        raise UnsupportedError(f"refinement supports 1-d and 2-d grids, got {model.dims}-d")
    for k in model.kernels:
        if k.kind is not KernelKind.EXPONENTIAL:
            raise UnsupportedError(
                f"refinement needs exponential kernels, got {k.kind.value!r}")


def _ar1_params(filters) -> tuple:
    r, b = [], []
    for f in filters:
        if f.m != 1 or f.n != 0:
            raise UnsupportedError("refinement needs first-order autoregressive filters")
        r.append(-float(f.a[1]))
        b.append(float(f.b[0]))
    return np.array(r), np.array(b)


@dataclass(frozen=True, eq=False)
class RefinementState:
    """Everything needed to refine a realization once more.

    ``coarse_noise`` may be larger than ``coarse_field``: its trailing
    block (the convention of :func:`grf.sampler.generate`) is the noise
    that drove the field.
    """

    coarse_field: FieldGrid
    coarse_noise: NoiseGrid
    model: CovarianceModel
    coarse_filters: tuple = None
    level: int = 0

    def __post_init__(self):
        if self.coarse_field.dims != self.model.dims or self.coarse_noise.dims != self.model.dims:
            raise DomainError("field, noise and model dimensions disagree")
        if any(n > M for n, M in zip(self.coarse_field.N, self.coarse_noise.N)):
            raise DomainError(
                f"noise grid {self.coarse_noise.N} smaller than field {self.coarse_field.N}")
        if not np.allclose(self.coarse_field.T, self.model.T, rtol=1e-12, atol=0):
            raise DomainError("field sampling distances differ from the model's")
        filters = self.coarse_filters
        if filters is None:
            filters = tuple(build_filter(k, t) for k, t in zip(self.model.kernels, self.model.T))
        filters = tuple(filters)
        if len(filters) != self.model.dims:
            raise DomainError("need one coarse filter per dimension")
        object.__setattr__(self, "coarse_filters", filters)

    def noise_block(self) -> np.ndarray:
        return self.coarse_noise.trailing_block(self.coarse_field.N)


@dataclass(frozen=True, eq=False)
class ConditionalGaussian:
    """Gaussian law ``N(mean, cov)`` with ``factor @ factor.T == cov``."""

    mean: np.ndarray
    cov: np.ndarray
    factor: np.ndarray

    @property
    def rank(self) -> int:
        return self.factor.shape[1]


def halve_scale(model: CovarianceModel) -> CovarianceModel:
    """Same kernels, every sampling distance halved."""
    return model.with_T(tuple(t / 2 for t in model.T))


def fine_extents(N) -> tuple:
    """``2N - 1`` per axis: coarse samples land on even fine indices."""
    return tuple(2 * int(n) - 1 for n in N)


def boundary_indices(N_fine) -> np.ndarray:
    """Fine points with a zero index that are not coarse points.

    These are the odd positions of the first row and first column (in
    2-d); in 1-d the set is empty. Rows are fine index vectors in
    row-major order.
    """
    N_fine = tuple(int(n) for n in N_fine)
    grids = np.indices(N_fine).reshape(len(N_fine), -1).T
    on_edge = (grids == 0).any(axis=1)
    coarse = (grids % 2 == 0).all(axis=1)
    return grids[on_edge & ~coarse]


def _axis_cov(kernel, T, lags) -> np.ndarray:
    return np.asarray(eval_kernel(kernel, np.asarray(lags, float) * T), dtype=float)


def _cho(S: np.ndarray, scale: float):
    try:
        return sla.cho_factor(S, lower=True)
    except np.linalg.LinAlgError:
        pass
    try:
        return sla.cho_factor(S + 1e-10 * scale * np.eye(S.shape[0]), lower=True)
    except np.linalg.LinAlgError as exc:
        raise RegularizationError(f"coarse covariance singular after jitter: {exc}")


def _rank_factor(S: np.ndarray) -> np.ndarray:
    if S.size == 0:
        return np.zeros((0, 0))
    lam, U = np.linalg.eigh(S)
    top = lam[-1]
    if top <= 0:
        return np.zeros((S.shape[0], 0))
    scale = max(float(np.trace(S)), top)
    if lam[0] < -1e-10 * scale:
        raise RegularizationError(f"conditional covariance has eigenvalue {lam[0]:.3g} < 0")
    keep = lam > 1e-12 * top
    return U[:, keep] * np.sqrt(lam[keep])


def conditional_boundary(model_fine: CovarianceModel, coarse_field, boundary_index) -> ConditionalGaussian:
    """Law of fine boundary samples given every coarse sample.

    With ``y1`` the coarse samples (fine indices ``2i``) and ``y2`` the
    boundary samples, ``mean = S21 S11^-1 a`` and
    ``cov = S22 - S21 S11^-1 S12``. The covariance is separable, so
    ``S11`` is a Kronecker product of per-axis Toeplitz matrices and every
    column of ``S12`` is a Kronecker product of per-axis vectors. The
    solves therefore reduce to per-axis Cholesky solves.

    Parameters
    ----------
    model_fine : CovarianceModel
        Model at the fine spacing.
    coarse_field : FieldGrid or ndarray
        Coarse samples, extents ``N``.
    boundary_index : (nb, d) int array
        Fine indices of the unknowns; none may be a coarse point.
    """
    A = coarse_field.data if isinstance(coarse_field, FieldGrid) else np.asarray(coarse_field, float)
    d = model_fine.dims
    if A.ndim != d:
        raise DomainError("coarse field and model dimensions disagree")
    S = np.asarray(boundary_index, dtype=np.int64).reshape(-1, d)
    if S.size and (S % 2 == 0).all(axis=1).any():
        raise DomainError("boundary set contains coarse-grid points")
    nb = S.shape[0]
    if nb == 0:
        return ConditionalGaussian(np.zeros(0), np.zeros((0, 0)), np.zeros((0, 0)))

    V, W = [], []  # per-axis S12 factors and S11^-1 S12 factors
    for j, (kern, t) in enumerate(zip(model_fine.kernels, model_fine.T)):
        n = A.shape[j]
        i = np.arange(n)
        S11 = sla.toeplitz(_axis_cov(kern, t, 2 * i))
        cf = _cho(S11, kern.sigma2)
        v = _axis_cov(kern, t, 2 * i[:, None] - S[None, :, j])  # (n, nb)
        V.append(v)
        W.append(sla.cho_solve(cf, v))

    # mean_b = sum_x A[x] prod_j W_j[x_j, b]
    if d == 1:
        mean = W[0].T @ A
    else:
        mean = np.einsum("ij,ib,jb->b", A, W[0], W[1])

    cov22 = np.ones((nb, nb))
    explained = np.ones((nb, nb))
    for j, (kern, t) in enumerate(zip(model_fine.kernels, model_fine.T)):
        cov22 *= _axis_cov(kern, t, S[:, None, j] - S[None, :, j])
        explained *= V[j].T @ W[j]
    cov = cov22 - explained
    cov = 0.5 * (cov + cov.T)
    return ConditionalGaussian(np.asarray(mean, float), cov, _rank_factor(cov))


def sample_boundary(cg: ConditionalGaussian, seed) -> np.ndarray:
    """``R e + mean`` with ``e`` standard normal of length ``rank(R)``."""
    if cg.rank == 0:
        return cg.mean.copy()
    e = white_noise((cg.rank,), seed).data
    return cg.factor @ e + cg.mean


def _innovation(y: np.ndarray, r) -> np.ndarray:
    """``prod_j (1 - r_j z_j^-1) y`` with zero initial conditions."""
    u = y
    for axis, rj in enumerate(r):
        u = signal.lfilter([1.0, -rj], [1.0], u, axis=axis)
    return u


def _interior(shape) -> tuple:
    return tuple(slice(1, None) for _ in shape)


def _check_noise(state: RefinementState):
    r2, b2 = _ar1_params(state.coarse_filters)
    y = state.coarse_field.data
    wc = state.noise_block()
    if y.ndim and min(y.shape) < 2:
        return
    lhs = _innovation(y, r2)[_interior(y.shape)]
    rhs = np.prod(b2) * wc[_interior(y.shape)]
    err = np.max(np.abs(lhs - rhs))
    if err > _NOISE_CHECK * max(1.0, float(np.max(np.abs(y)))):
        raise DomainError(
            f"stored noise does not drive the stored field (mismatch {err:.3g}); "
            "regenerate the state with the same seed")


def reconstruct_fine_noise(state: RefinementState, fine_filters, fine_boundary=None,
                           mode: str = "particular", seed: Optional[int] = None) -> NoiseGrid:
    """Fine noise whose filtered output passes through the coarse samples.

    Parameters
    ----------
    state : RefinementState
    fine_filters : sequence of RationalFilter1D
        First-order filters at the halved spacing.
    fine_boundary : array_like, optional
        Not needed to determine the noise; accepted for symmetry with
        :func:`complete_fine_field`.
    mode : {"particular", "conditional"}
        ``"particular"`` is deterministic. Each block's even-even entry
        equals the coarse noise, and the remaining entries follow from the
        block equation taken one axis at a time. For one axis this is
        ``w(2k-1) = (beta - 1)/r * w'(k)``; in 2-d the cross entry closes
        the block equation. The result is not white.
        ``"conditional"`` draws each block from the law of i.i.d. standard
        normals conditioned on the block equation. The fine noise is then
        exactly white and the fine field has the exact target law. It
        needs ``seed``.

    Returns
    -------
    NoiseGrid
        Extents ``2N - 1``. Entries at coarse positions of the first row
        and column hold the coarse noise (particular mode); the other
        first-row/column entries are unused by the recursion and are zero.
    """
    if mode not in NOISE_MODES:
        raise DomainError(f"mode must be one of {NOISE_MODES}")
    _check_model(state.model)
    r, bf = _ar1_params(fine_filters)
    r2, b2 = _ar1_params(state.coarse_filters)
    if np.any(r == 0) or np.any(bf == 0) or np.any(r2 == 0) or np.any(b2 == 0):
        raise DegenerateFilterError("a filter coefficient is zero; noise cannot be reconstructed")
    d = state.model.dims
    wc = state.noise_block()
    N = wc.shape
    Nf = fine_extents(N)
    beta = b2 / bf
    w = np.zeros(Nf)
    if any(n < 2 for n in N):
        w[tuple(slice(0, None, 2) for _ in N)] = wc
        return NoiseGrid(w, seed, tuple(t / 2 for t in state.model.T))

    # block b in {0, 1}^d: offset 0 is the odd fine index 2k-1, 1 is the even 2k
    odd_even = [np.array([rj, 1.0]) for rj in r]
    g = odd_even[0]
    for gj in odd_even[1:]:
        g = np.kron(g, gj)
    rhs = np.prod(beta) * wc[_interior(N)]  # (N_j - 1) per axis
    if mode == "particular":
        u = [np.array([(bj - 1.0) / rj, 1.0]) for bj, rj in zip(beta, r)]
        coef = u[0]
        for uj in u[1:]:
            coef = np.kron(coef, uj)
        blocks = wc[_interior(N)][..., None] * coef
    else:
        if seed is None:
            raise DomainError("conditional noise reconstruction needs a seed")
        z = white_noise(tuple(n - 1 for n in N) + (2 ** d,), seed).data
        gg = float(g @ g)
        blocks = z - np.multiply.outer((z @ g - rhs) / gg, g)

    blocks = blocks.reshape(tuple(n - 1 for n in N) + (2,) * d)
    for off in np.ndindex(*(2,) * d):
        sl = tuple(slice(1 + o, None, 2) for o in off)
        w[sl] = blocks[(Ellipsis,) + off]
    if mode == "particular":
        # the first row/column coarse positions keep the coarse noise as well
        w[tuple(slice(0, None, 2) for _ in N)] = wc
    return NoiseGrid(w, seed, tuple(t / 2 for t in state.model.T))


def complete_fine_field(coarse, boundary_index, boundary_values, noise, fine_filters) -> np.ndarray:
    """Run the fine recursions from the first row/column inward.

    The first row and column are fixed by the coarse samples and the
    boundary values. Every other sample follows from the fine recursion
    driven by ``noise``.
    """
    r, bf = _ar1_params(fine_filters)
    A = coarse.data if isinstance(coarse, FieldGrid) else np.asarray(coarse, float)
    w = noise.data if isinstance(noise, NoiseGrid) else np.asarray(noise, float)
    Nf = fine_extents(A.shape)
    if w.shape != Nf:
        raise DomainError(f"noise extents {w.shape} differ from fine extents {Nf}")
    y0 = np.zeros(Nf)
    y0[tuple(slice(0, None, 2) for _ in Nf)] = A
    S = np.asarray(boundary_index, dtype=np.int64).reshape(-1, len(Nf))
    if S.shape[0]:
        y0[tuple(S.T)] = boundary_values
    u = _innovation(y0, r)
    inner = _interior(Nf)
    u[inner] = np.prod(bf) * w[inner]
    y = u
    for axis, rj in enumerate(r):
        y = signal.lfilter([1.0], [1.0, -rj], y, axis=axis)
    return y


def _sub_seed(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence([int(seed), tag]).generate_state(1, np.uint64)[0])


def refine(state: RefinementState, seed: int, mode: str = "conditional"):
    """Refine once: halve the spacing and fill the fine grid.

    Returns
    -------
    field : FieldGrid
        Extents ``2N - 1``; its even-even samples equal the coarse field.
        ``meta["interp_error"]`` records the largest deviation there.
    state : RefinementState
        The fine level, ready for another refinement.
    """
    _check_model(state.model)
    _check_noise(state)
    fine_model = halve_scale(state.model)
    fine_filters = tuple(build_filter(k, t) for k, t in zip(fine_model.kernels, fine_model.T))
    coarse = state.coarse_field
    Nf = fine_extents(coarse.N)
    S = boundary_indices(Nf)
    cg = conditional_boundary(fine_model, coarse, S)
    values = sample_boundary(cg, seed)
    noise = reconstruct_fine_noise(state, fine_filters, values, mode=mode,
                                   seed=_sub_seed(seed, 1) if mode == "conditional" else None)
    y = complete_fine_field(coarse, S, values, noise, fine_filters)
    err = float(np.max(np.abs(y[tuple(slice(0, None, 2) for _ in Nf)] - coarse.data)))
    meta = dict(coarse.meta)
    meta.update({"seed": int(seed), "scale_level": int(meta.get("scale_level", state.level)) + 1,
                 "parent_seed": coarse.meta.get("seed"), "noise_mode": mode,
                 "interp_error": err})
    meta.pop("M", None)
    fine = FieldGrid(y, fine_model.T, meta)
    noise = NoiseGrid(noise.data, int(seed), fine_model.T)
    return fine, RefinementState(fine, noise, fine_model, fine_filters, state.level + 1)
