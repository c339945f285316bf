"""Separable covariance kernels and their sampled sequences.

A d-dimensional model is a product of 1-d kernels, one per axis, each
sampled on a regular grid with its own spacing ``T[j]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "KernelKind",
    "Kernel1D",
    "CovarianceModel",
    "eval_kernel",
    "sampled_sequence",
    "dominant_lag_count",
    "product_covariance",
    "DEFAULT_THRESHOLD",
]

DEFAULT_THRESHOLD = 1e-3


class KernelKind(str, enum.Enum):
    EXPONENTIAL = "exp"
    GAUSSIAN = "gauss"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Kernel1D:
    """One-dimensional stationary covariance kernel.

    Parameters
    ----------
    kind : KernelKind
        ``EXPONENTIAL`` gives ``sigma2 * exp(-alpha |x|)``, ``GAUSSIAN`` gives
        ``sigma2 * exp(-alpha x**2)``. ``CUSTOM`` is a finite table of
        values at integer lags; lags past the table evaluate to 0.
    sigma2 : float
        Variance. For ``CUSTOM`` it is taken from ``custom_seq[0]``.
    alpha : float, optional
        Decay rate, required for the parametric kinds.
    custom_seq : array_like, optional
        Covariance at lags 0, 1, ... for ``CUSTOM``.
    """

    kind: KernelKind
    sigma2: float = 1.0
    alpha: Optional[float] = None
    custom_seq: Optional[tuple] = field(default=None)

    def __post_init__(self):
        kind = KernelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is KernelKind.CUSTOM:
            if self.custom_seq is None or len(self.custom_seq) == 0:
                raise DomainError("custom kernel needs a non-empty sequence")
            seq = tuple(float(v) for v in self.custom_seq)
            if not np.all(np.isfinite(seq)):
                raise DomainError("custom sequence must be finite")
            if seq[0] <= 0:
                raise DomainError("custom sequence must start with a positive variance")
            if any(abs(v) > seq[0] for v in seq[1:]):
                raise DomainError("custom sequence exceeds its lag-0 value")
            object.__setattr__(self, "custom_seq", seq)
            object.__setattr__(self, "sigma2", seq[0])
            return
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if self.alpha is None or not (np.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "alpha", float(self.alpha))

    @classmethod
    def exponential(cls, sigma2: float = 1.0, alpha: float = 1.0) -> "Kernel1D":
        return cls(KernelKind.EXPONENTIAL, sigma2, alpha)

    @classmethod
    def gaussian(cls, sigma2: float = 1.0, alpha: float = 1.0) -> "Kernel1D":
        return cls(KernelKind.GAUSSIAN, sigma2, alpha)

    @classmethod
    def custom(cls, seq: Sequence[float]) -> "Kernel1D":
        return cls(KernelKind.CUSTOM, custom_seq=tuple(seq))

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "sigma2": self.sigma2}
        if self.kind is KernelKind.CUSTOM:
            d["custom_seq"] = list(self.custom_seq)
        else:
            d["alpha"] = self.alpha
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Kernel1D":
        kind = KernelKind(d["kind"])
        if kind is KernelKind.CUSTOM:
            return cls.custom(d["custom_seq"])
        return cls(kind, d.get("sigma2", 1.0), d["alpha"])


@dataclass(frozen=True)
class CovarianceModel:
    """Separable covariance on a d-dimensional grid.

    The covariance at integer lag vector ``k`` is
    ``prod_j kernels[j](k[j] * T[j])``.
    """

    kernels: tuple
    T: tuple

    def __post_init__(self):
        kernels = tuple(self.kernels)
        T = tuple(float(t) for t in np.atleast_1d(self.T))
        if len(kernels) == 0:
            raise DomainError("model needs at least one dimension")
        if len(kernels) != len(T):
            raise DomainError(
                f"got {len(kernels)} kernels but {len(T)} sampling distances")
        for t in T:
            if not (np.isfinite(t) and t > 0):
                raise DomainError(f"sampling distance must be positive, got {t}")
        for k in kernels:
            if not isinstance(k, Kernel1D):
                raise DomainError("kernels must be Kernel1D instances")
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "T", T)

    @property
    def dims(self) -> int:
        return len(self.kernels)

    @property
    def sigma2(self) -> float:
        """Variance of the field, the product of per-axis variances."""
        return float(np.prod([k.sigma2 for k in self.kernels]))

    def with_T(self, T) -> "CovarianceModel":
        return CovarianceModel(self.kernels, tuple(T))

    def to_dict(self) -> dict:
        return {"kernels": [k.to_dict() for k in self.kernels], "T": list(self.T)}

    @classmethod
    def from_dict(cls, d: dict) -> "CovarianceModel":
        return cls(tuple(Kernel1D.from_dict(k) for k in d["kernels"]), tuple(d["T"]))


def eval_kernel(kernel: Kernel1D, x):
    """Evaluate a kernel at real lag(s) ``x``.

    Parameters
    ----------
    kernel : Kernel1D
    x : float or ndarray
        Lag in length units. For ``CUSTOM`` kernels the lag is an index and
        must be integral.

    Returns
    -------
    float or ndarray
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("lag must be finite")
    if kernel.kind is KernelKind.EXPONENTIAL:
        out = kernel.sigma2 * np.exp(-kernel.alpha * np.abs(x))
    elif kernel.kind is KernelKind.GAUSSIAN:
        out = kernel.sigma2 * np.exp(-kernel.alpha * x * x)
    else:
        if np.any(x != np.round(x)):
            raise DomainError("custom kernels are defined at integer lags only")
        seq = np.asarray(kernel.custom_seq)
        idx = np.abs(x).astype(np.int64)
        inside = idx < seq.size
        out = np.where(inside, seq[np.minimum(idx, seq.size - 1)], 0.0)
    return out[()] if out.ndim == 0 else out


def sampled_sequence(kernel: Kernel1D, T: float, m: int) -> np.ndarray:
    """Covariances at lags ``0..m`` for sampling distance ``T``.

    For ``CUSTOM`` kernels ``T`` is ignored: the table is already indexed
    by lag.
    """
    if m < 0:
        raise DomainError("m must be non-negative")
    if not T > 0:
        raise DomainError("T must be positive")
    k = np.arange(m + 1, dtype=float)
    if kernel.kind is KernelKind.CUSTOM:
        return np.asarray(eval_kernel(kernel, k), dtype=float).reshape(m + 1)
    seq = np.asarray(eval_kernel(kernel, k * T), dtype=float).reshape(m + 1)
    seq[0] = kernel.sigma2
    return seq


def dominant_lag_count(seq, rel_threshold: float = DEFAULT_THRESHOLD) -> int:
    """Smallest ``m >= 1`` beyond which the sequence is negligible.

    Returns the smallest ``m >= 1`` with ``|seq[k]| < rel_threshold*seq[0]``
    for every ``k > m`` in the sequence, or ``len(seq) - 1`` when no such
    ``m`` exists.
    """
    seq = np.asarray(seq, dtype=float).ravel()
    if seq.size == 0:
        raise DomainError("empty covariance sequence")
    if not seq[0] > 0:
        raise DomainError("seq[0] must be positive")
    if not 0 < rel_threshold < 1:
        raise DomainError("rel_threshold must lie in (0, 1)")
    big = np.flatnonzero(np.abs(seq) >= rel_threshold * seq[0])
    last = int(big[-1])  # index 0 is always present
    m = max(last, 1)
    return min(m, seq.size - 1) if seq.size > 1 else 0


def product_covariance(model: CovarianceModel, k) -> float:
    """Separable covariance at integer lag vector ``k``."""
    k = np.atleast_1d(np.asarray(k))
    if k.shape != (model.dims,):
        raise DomainError(f"lag has {k.size} components, model has {model.dims}")
    out = 1.0
    for kern, t, kj in zip(model.kernels, model.T, k):
        x = kj if kern.kind is KernelKind.CUSTOM else kj * t
        out *= float(eval_kernel(kern, x))
    return out
