"""White noise and field realizations by cascaded 1-d filtering.

Noise substreams
----------------
The grid is filled in row-major (C) order, in blocks of ``NOISE_BLOCK``
consecutive samples. Block ``j`` holds the first values of
``Generator(Philox(key=(seed, j))).standard_normal``, so each sample is a
function of ``(seed, flat index)`` only. Blocks are independent of each
other and of the thread layout, hence results are bit-identical for any
``GRF_THREADS``, and grids of different shapes with the same seed share
the same flat stream.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .covariance import DEFAULT_THRESHOLD, CovarianceModel
from .errors import DomainError, InstabilityError
from .spectral import FilterDesign, RationalFilter1D, design_filter

__all__ = [
    "FieldGrid",
    "NoiseGrid",
    "white_noise",
    "filter_axis",
    "design_filters",
    "burn_in_extents",
    "generate",
    "thread_count",
]

_MAX_SEED = 2 ** 64
NOISE_BLOCK = 1 << 16


def thread_count(threads: Optional[int] = None) -> int:
    """Worker count: explicit value, else ``GRF_THREADS``, else up to 8 CPUs."""
    if threads is None:
        env = os.environ.get("GRF_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise DomainError(f"GRF_THREADS must be an integer, got {env!r}")
        else:
            threads = min(os.cpu_count() or 1, 8)
    return max(1, int(threads))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Field samples on a regular grid.

    ``data`` is C-ordered (last axis fastest) with shape ``N``. ``meta``
    records the seed, the scale level and the generator version.
    """

    data: np.ndarray
    T: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = _frozen(self.data)
        T = tuple(float(t) for t in self.T)
        if data.ndim != len(T):
            raise DomainError(f"{data.ndim}-d data with {len(T)} sampling distances")
        if not np.all(np.isfinite(data)):
            raise DomainError("field contains non-finite values")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def dims(self) -> int:
        return self.data.ndim

    @property
    def N(self) -> tuple:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class NoiseGrid:
    """Unit-variance white noise; ``T`` may be ``None`` for bare noise."""

    data: np.ndarray
    seed: Optional[int] = None
    T: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data))
        if self.T is not None:
            T = tuple(float(t) for t in self.T)
            if len(T) != self.data.ndim:
                raise DomainError("noise grid and T disagree on dimension")
            object.__setattr__(self, "T", T)

    @property
    def dims(self) -> int:
        return self.data.ndim

    @property
    def N(self) -> tuple:
        return self.data.shape

    def trailing_block(self, N) -> np.ndarray:
        """The last ``N[j]`` samples along every axis."""
        N = tuple(int(n) for n in N)
        if len(N) != self.dims or any(n > M for n, M in zip(N, self.N)):
            raise DomainError(f"block {N} does not fit in noise grid {self.N}")
        return self.data[tuple(slice(M - n, M) for n, M in zip(N, self.N))]


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < _MAX_SEED:
        raise DomainError("seed must be in [0, 2**64)")
    return seed


def _fill_blocks(flat: np.ndarray, seed: int, start: int, stop: int):
    for j in range(start, stop):
        lo = j * NOISE_BLOCK
        hi = min(lo + NOISE_BLOCK, flat.size)
        gen = np.random.Generator(np.random.Philox(key=[seed, j]))
        gen.standard_normal(hi - lo, out=flat[lo:hi])


def _chunks(n: int, parts: int):
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def white_noise(shape, seed, threads: Optional[int] = None) -> NoiseGrid:
    """I.i.d. standard normal grid, a deterministic function of ``(seed, shape)``.

    See the module docstring for the substream layout.

    Examples
    --------
    >>> a = white_noise((4,), 42).data
    >>> b = white_noise((4,), 42).data
    >>> bool((a == b).all())
    True
    """
    shape = tuple(int(n) for n in np.atleast_1d(shape))
    if len(shape) == 0 or any(n < 1 for n in shape):
        raise DomainError(f"all extents must be positive, got {shape}")
    seed = _check_seed(seed)
    out = np.empty(shape)
    flat = out.reshape(-1)
    nblocks = -(-flat.size // NOISE_BLOCK)
    jobs = _chunks(nblocks, thread_count(threads))
    if len(jobs) == 1:
        _fill_blocks(flat, seed, 0, nblocks)
    else:
        with ThreadPoolExecutor(len(jobs)) as ex:
            list(ex.map(lambda j: _fill_blocks(flat, seed, *j), jobs))
    return NoiseGrid(out, seed)


def filter_axis(x, filt: RationalFilter1D, axis: int, threads: Optional[int] = None) -> np.ndarray:
    """Apply ``filt`` along ``axis`` with zero initial conditions.

    Lines are split into chunks along another axis and filtered
    concurrently; each line is computed by the same code path either way,
    so the result does not depend on the thread count.
    """
    x = np.asarray(x, dtype=float)
    axis = axis % x.ndim
    if x.shape[axis] <= filt.m:
        raise DomainError(
            f"extent {x.shape[axis]} along axis {axis} must exceed filter order {filt.m}")
    if not filt.is_stable():
        raise InstabilityError("filter is unstable")
    nthreads = thread_count(threads)
    others = [a for a in range(x.ndim) if a != axis]
    if nthreads == 1 or not others:
        return filt.apply(x, axis=axis)
    split = max(others, key=lambda a: x.shape[a])
    out = np.empty_like(x)

    def run(j):
        sl = [slice(None)] * x.ndim
        sl[split] = slice(*j)
        sl = tuple(sl)
        out[sl] = filt.apply(x[sl], axis=axis)

    with ThreadPoolExecutor(nthreads) as ex:
        list(ex.map(run, _chunks(x.shape[split], nthreads)))
    return out


def design_filters(model: CovarianceModel, b=None, m=None,
                   threshold: float = DEFAULT_THRESHOLD) -> list:
    """One :class:`FilterDesign` per axis.

    ``b`` and ``m`` are either a single value applied to every axis or a
    per-axis list. Exponential axes ignore ``b`` unless ``m`` is set too.
    """
    d = model.dims

    def per_axis(v, name):
        if v is None:
            return [None] * d
        if isinstance(v, (list, tuple)) and len(v) == d and (
                name == "m" or all(isinstance(e, (list, tuple, np.ndarray)) or e is None for e in v)):
            return list(v)
        return [v] * d

    bs, ms = per_axis(b, "b"), per_axis(m, "m")
    designs = []
    for kern, T, bj, mj in zip(model.kernels, model.T, bs, ms):
        if kern.kind.value == "exp" and mj is None:
            bj = None
        designs.append(design_filter(kern, T, b=bj, m=mj, threshold=threshold))
    return designs


def burn_in_extents(N, orders, beta: float = 0.1, min_burn_in: int = 50, burn_in=None) -> tuple:
    """Padded extents ``M``.

    ``M_j = max(ceil((1 + beta) N_j + m_j), N_j + m_j + min_burn_in)``, or
    ``N_j + burn_in_j`` when ``burn_in`` is given explicitly.
    """
    if beta < 0:
        raise DomainError("beta must be non-negative")
    if burn_in is not None:
        bi = np.broadcast_to(np.asarray(burn_in, dtype=int), (len(N),))
        if np.any(bi < 0):
            raise DomainError("burn_in must be non-negative")
        return tuple(int(n + k) for n, k in zip(N, bi))
    return tuple(max(int(math.ceil((1 + beta) * n + m)), n + m + int(min_burn_in))
                 for n, m in zip(N, orders))


def generate(model: CovarianceModel, N, seed: int, beta: float = 0.1, *,
             b=None, m=None, threshold: float = DEFAULT_THRESHOLD,
             filters: Optional[Sequence[RationalFilter1D]] = None,
             min_burn_in: int = 50, burn_in=None, threads: Optional[int] = None):
    """Draw one realization of a separable stationary Gaussian field.

    White noise on a padded grid ``M`` is filtered along axes ``0..d-1``
    with the per-axis shaping filters; the leading ``M_j - N_j`` samples of
    every axis, where the zero-initial-condition transient lives, are
    discarded.

    Parameters
    ----------
    model : CovarianceModel
    N : sequence of int
        Extents of the returned field.
    seed : int
    beta : float
        Relative burn-in, see :func:`burn_in_extents`.
    b, m, threshold
        Filter options, see :func:`design_filters`.
    filters : sequence of RationalFilter1D, optional
        Pre-built filters, one per axis; skips filter design.
    min_burn_in : int
        Absolute burn-in floor on top of the filter order.
    burn_in : int or sequence of int, optional
        Explicit burn-in per axis, overriding ``beta`` and the floor.
    threads : int, optional
        Worker threads; defaults to ``GRF_THREADS``.

    Returns
    -------
    field : FieldGrid
        Shape ``N``.
    noise : NoiseGrid
        The full padded noise grid (shape ``M``); its trailing ``N`` block
        drove the retained samples.
    """
    N = tuple(int(n) for n in np.atleast_1d(N))
    if len(N) != model.dims:
        raise DomainError(f"N has {len(N)} extents, model has {model.dims} dimensions")
    if any(n < 1 for n in N):
        raise DomainError("extents must be positive")
    if filters is None:
        filters = [dz.filter for dz in design_filters(model, b=b, m=m, threshold=threshold)]
    filters = list(filters)
    if len(filters) != model.dims:
        raise DomainError("need one filter per dimension")
    M = burn_in_extents(N, [f.m for f in filters], beta, min_burn_in, burn_in)
    noise = white_noise(M, seed, threads)
    y = noise.data
    for axis, f in enumerate(filters):
        y = filter_axis(y, f, axis, threads)
    block = tuple(slice(Mj - Nj, Mj) for Mj, Nj in zip(M, N))
    meta = {"seed": int(seed), "scale_level": 0, "generator": f"grf {__version__}",
            "M": list(M), "orders": [[f.m, f.n] for f in filters]}
    return (FieldGrid(y[block], model.T, meta),
            NoiseGrid(noise.data, int(seed), model.T))
