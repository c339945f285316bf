"""Rational spectral densities and minimum-phase shaping filters.

Exponential kernels have an exact first-order autoregressive factor.
Other kernels get a maximum-entropy ARMA approximation: the numerator
``P = |b|^2`` is chosen by the user, and the denominator ``Q`` solves the
convex dual of the entropy problem so that ``P/Q`` reproduces the first
``m + 1`` covariances exactly.

Trigonometric polynomials are stored in the cosine basis, i.e. ``c`` holds
``c[0] + 2 sum_k c[k] cos(k theta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy import signal

from .covariance import (DEFAULT_THRESHOLD, Kernel1D, KernelKind,
                         dominant_lag_count, eval_kernel, sampled_sequence)
from .errors import (ConvergenceError, DomainError, InfeasibleError,
                     InstabilityError)

__all__ = [
    "RationalFilter1D",
    "MinPhaseFactor",
    "SpectralDensity1D",
    "MESolveReport",
    "FilterDesign",
    "trig_eval",
    "poly_autocorrelation",
    "levinson",
    "ar1_filter_exponential",
    "analytic_ar1_covariance",
    "arma_covariance",
    "me_dual_solve",
    "dual_gradient_hessian",
    "bauer_factorize",
    "build_filter",
    "design_filter",
]

# smallest lambda_min/lambda_max of the moment Toeplitz matrix tried when
# the order is picked automatically
COND_FLOOR = 1e-14
_ROOT_TOL = 1e-9


def trig_eval(c, theta) -> np.ndarray:
    """Evaluate ``c[0] + 2 sum_{k>=1} c[k] cos(k theta)``."""
    c = np.asarray(c, dtype=float)
    theta = np.asarray(theta, dtype=float)
    out = np.full(theta.shape, c[0])
    for k in range(1, c.size):
        out += 2.0 * c[k] * np.cos(k * theta)
    return out


def poly_autocorrelation(a) -> np.ndarray:
    """One-sided autocorrelation ``r_k = sum_j a_j a_{j+k}``, k = 0..deg.

    These are the cosine-basis coefficients of ``|a(e^{i theta})|^2``.
    """
    a = np.asarray(a, dtype=float)
    return np.correlate(a, a, mode="full")[a.size - 1:].copy()


def _uniform_grid(n: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


# --------------------------------------------------------------------------
# filters

@dataclass(frozen=True, eq=False)
class RationalFilter1D:
    """Stable, minimum-phase filter ``W(z) = b(z) / a(z)`` with ``a[0] = 1``.

    Parameters
    ----------
    b : array_like
        Numerator coefficients of ``z^0 .. z^-n``.
    a : array_like
        Monic denominator coefficients of ``z^0 .. z^-m``.
    sections : ndarray, optional
        The denominator as a product of monic second-order factors, one
        row ``[1, c1, c2]`` per factor (a first-order factor has
        ``c2 = 0``). When present it is used for evaluation and filtering,
        which is far more accurate than the expanded form for poles close
        to the unit circle.
    """

    b: np.ndarray
    a: np.ndarray
    sections: Optional[np.ndarray] = None

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).copy()
        a = np.atleast_1d(np.asarray(self.a, dtype=float)).copy()
        if b.size == 0 or a.size == 0:
            raise DomainError("empty filter polynomial")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise DomainError("filter coefficients must be finite")
        if a[0] != 1.0:
            raise DomainError(f"denominator must be monic, a[0] = {a[0]}")
        if not np.any(b != 0):
            raise DomainError("numerator is identically zero")
        b.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)
        if self.sections is not None:
            sec = np.atleast_2d(np.asarray(self.sections, dtype=float)).copy()
            if sec.size == 0:
                sec = None
            else:
                sec.setflags(write=False)
            object.__setattr__(self, "sections", sec)
        if not self.is_stable():
            raise InstabilityError(
                f"denominator has a pole of modulus {self.pole_radius():.6g} >= 1")
        if b.size > 1 and np.max(np.abs(np.roots(np.trim_zeros(b, "b")))) > 1 + _ROOT_TOL:
            raise InstabilityError("numerator is not minimum phase")

    @property
    def m(self) -> int:
        return self.a.size - 1

    @property
    def n(self) -> int:
        return self.b.size - 1

    def poles(self) -> np.ndarray:
        if self.sections is not None:
            r = [np.roots(np.trim_zeros(s, "b")) for s in self.sections]
            return np.concatenate(r) if r else np.zeros(0, complex)
        if self.m == 0:
            return np.zeros(0, complex)
        return np.roots(self.a)

    def pole_radius(self) -> float:
        p = self.poles()
        return float(np.max(np.abs(p))) if p.size else 0.0

    def is_stable(self) -> bool:
        return self.pole_radius() < 1.0

    def denominator(self, theta) -> np.ndarray:
        """``a(e^{i theta})`` evaluated on the unit circle."""
        z = np.exp(-1j * np.asarray(theta, dtype=float))
        if self.sections is not None:
            out = np.ones(z.shape, complex)
            for s in self.sections:
                out *= s[0] + s[1] * z + s[2] * z * z
            return out
        return np.polyval(self.a[::-1], z)

    def frequency_response(self, theta) -> np.ndarray:
        z = np.exp(-1j * np.asarray(theta, dtype=float))
        return np.polyval(self.b[::-1], z) / self.denominator(theta)

    def power_spectrum(self, theta) -> np.ndarray:
        """``|W(e^{i theta})|^2``."""
        w = self.frequency_response(theta)
        return w.real ** 2 + w.imag ** 2

    def apply(self, x: np.ndarray, axis: int = -1) -> np.ndarray:
        """Run the recursion along ``axis`` with zero initial conditions."""
        if self.sections is None:
            return signal.lfilter(self.b, self.a, x, axis=axis)
        y = signal.lfilter(self.b, [1.0], x, axis=axis)
        sos = np.hstack([np.tile([1.0, 0.0, 0.0], (len(self.sections), 1)), self.sections])
        return signal.sosfilt(sos, y, axis=axis)

    def impulse_response(self, n: int) -> np.ndarray:
        x = np.zeros(n)
        x[0] = 1.0
        return self.apply(x)

    def to_text(self) -> str:
        fmt = lambda v: " ".join(repr(float(c)) for c in v)
        return f"a: {fmt(self.a)}\nb: {fmt(self.b)}\n"

    @classmethod
    def from_text(cls, text: str) -> "RationalFilter1D":
        coef = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(":")
            if key.strip() not in ("a", "b"):
                raise DomainError(f"unexpected filter line {line!r}")
            coef[key.strip()] = [float(v) for v in rest.split()]
        if set(coef) != {"a", "b"}:
            raise DomainError("filter text needs both an 'a:' and a 'b:' line")
        return cls(coef["b"], coef["a"])

    def to_dict(self) -> dict:
        d = {"m": self.m, "n": self.n, "a": self.a.tolist(), "b": self.b.tolist()}
        if self.sections is not None:
            d["sections"] = self.sections.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RationalFilter1D":
        return cls(d["b"], d["a"], d.get("sections"))


@dataclass(frozen=True, eq=False)
class MinPhaseFactor:
    """``A(z) = gain * prod_i (1 + c1_i z^-1 + c2_i z^-2)``.

    ``sections`` has one row ``(c1, c2)`` per factor; a first-order factor
    is stored with ``c2 = 0``. All roots lie strictly inside the unit disk.
    """

    gain: float
    sections: np.ndarray
    degree: int

    def evaluate(self, theta) -> np.ndarray:
        z = np.exp(-1j * np.asarray(theta, dtype=float))
        out = np.full(z.shape, self.gain, dtype=complex)
        for c1, c2 in self.sections:
            out *= 1.0 + c1 * z + c2 * z * z
        return out

    def squared_magnitude(self, theta) -> np.ndarray:
        A = self.evaluate(theta)
        return A.real ** 2 + A.imag ** 2

    def monic(self) -> np.ndarray:
        a = np.array([1.0])
        for c1, c2 in self.sections:
            a = np.convolve(a, [1.0, c1, c2])
        return a[:self.degree + 1]

    def coefficients(self) -> np.ndarray:
        return self.gain * self.monic()

    def sos(self) -> np.ndarray:
        return np.column_stack([np.ones(len(self.sections)), self.sections]) \
            if len(self.sections) else np.zeros((0, 3))

    def root_radius(self) -> float:
        r = 0.0
        for c1, c2 in self.sections:
            rt = np.roots([1.0, c1, c2])
            r = max(r, float(np.max(np.abs(rt))))
        return r


@dataclass(frozen=True, eq=False)
class SpectralDensity1D:
    """Rational density ``Phi = P / Q`` on the unit circle.

    ``p`` and ``q`` are cosine-basis coefficients. If ``q_factor`` is set,
    ``Q`` is evaluated as ``|A|^2`` from it, which keeps full relative
    accuracy where ``Q`` is tiny.
    """

    p: np.ndarray
    q: np.ndarray
    q_factor: Optional[MinPhaseFactor] = None

    def __post_init__(self):
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, float)))
        object.__setattr__(self, "q", np.atleast_1d(np.asarray(self.q, float)))
        th = _uniform_grid(max(4096, 64 * max(self.p.size, self.q.size)))
        if np.any(self.P(th) <= 0) or np.any(self.Q(th) <= 0):
            raise DomainError("P and Q must be positive on the unit circle")

    def P(self, theta) -> np.ndarray:
        return trig_eval(self.p, theta)

    def Q(self, theta) -> np.ndarray:
        if self.q_factor is not None:
            return self.q_factor.squared_magnitude(theta)
        return trig_eval(self.q, theta)

    def __call__(self, theta) -> np.ndarray:
        return self.P(theta) / self.Q(theta)

    def moments(self, m: int, grid_size: int = 8192) -> np.ndarray:
        """Quadrature of ``cos(k theta) Phi`` for k = 0..m."""
        th = _uniform_grid(grid_size)
        phi = self(th)
        return np.array([np.mean(phi * np.cos(k * th)) for k in range(m + 1)])


@dataclass
class MESolveReport:
    """Outcome of :func:`me_dual_solve`.

    ``moment_residuals[k]`` is ``sigma_k`` minus the quadrature moment of
    the fitted density, and ``final_gradient_norm`` is the infinity norm of
    the dual gradient (the residuals weighted by 1, 2, 2, ...).
    """

    iterations: int
    final_gradient_norm: float
    moment_residuals: np.ndarray
    converged: bool
    grid_size: int = 0
    homotopy_steps: int = 0
    method: str = "direct"

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_gradient_norm": self.final_gradient_norm,
            "moment_residuals": np.asarray(self.moment_residuals).tolist(),
            "converged": self.converged,
            "grid_size": self.grid_size,
            "homotopy_steps": self.homotopy_steps,
            "method": self.method,
        }


# --------------------------------------------------------------------------
# exponential kernels

def ar1_filter_exponential(sigma2: float, alpha: float, T: float) -> RationalFilter1D:
    """Exact spectral factor of the sampled exponential kernel.

    ``a = [1, -r]`` and ``b = [sigma * sqrt(1 - r^2)]`` with
    ``r = exp(-alpha T)``.

    Examples
    --------
    >>> f = ar1_filter_exponential(1.0, 1.0, 1 / 12)
    >>> round(f.a[1], 6), round(f.b[0], 6)
    (-0.920044, 0.391814)
    """
    if not (sigma2 > 0 and alpha > 0 and T > 0):
        raise DomainError("sigma2, alpha and T must be positive")
    r = math.exp(-alpha * T)
    c = math.sqrt(sigma2) * math.sqrt(-math.expm1(-2.0 * alpha * T))
    return RationalFilter1D([c], [1.0, -r])


def analytic_ar1_covariance(filt: RationalFilter1D, k):
    """Stationary output covariance ``c^2 r^|k| / (1 - r^2)`` of an AR(1)."""
    if filt.m != 1 or filt.n != 0:
        raise DomainError("filter is not first-order autoregressive")
    r = -filt.a[1]
    c = filt.b[0]
    if abs(r) >= 1:
        raise InstabilityError(f"|r| = {abs(r)} >= 1")
    k = np.abs(np.asarray(k))
    return c * c * np.power(r, k) / (1.0 - r * r)


def arma_covariance(filt: RationalFilter1D, max_lag: int, tol: float = 1e-17) -> np.ndarray:
    """Stationary output covariances at lags 0..max_lag from the impulse response.

    The impulse response is truncated once the pole envelope has decayed
    below ``tol``.
    """
    rho = filt.pole_radius()
    n_tail = 64 if rho == 0 else int(math.ceil(math.log(tol) / math.log(rho)))
    L = min(max_lag + filt.n + n_tail + 64, 10_000_000)
    h = filt.impulse_response(L)
    full = signal.correlate(h, h, mode="full", method="direct")[L - 1:]
    return full[:max_lag + 1]


# --------------------------------------------------------------------------
# maximum entropy

def levinson(seq):
    """Levinson-Durbin recursion on a covariance sequence.

    Returns
    -------
    a : ndarray
        Monic predictor ``1, a_1, ..., a_m``.
    e : float
        Final prediction error variance.
    k : ndarray
        Reflection coefficients.

    Raises
    ------
    InfeasibleError
        If the Toeplitz matrix of ``seq`` is not positive definite.
    """
    r = np.asarray(seq, dtype=float)
    if not r[0] > 0:
        raise InfeasibleError("lag-0 covariance must be positive")
    m = r.size - 1
    a = np.array([1.0])
    e = r[0]
    ks = np.zeros(m)
    for i in range(1, m + 1):
        acc = np.dot(a, r[i:0:-1])
        k = -acc / e
        if not abs(k) < 1:
            raise InfeasibleError(
                f"covariance sequence is not positive definite (lag {i})")
        a = np.concatenate([a, [0.0]])
        a = a + k * a[::-1]
        e *= 1.0 - k * k
        ks[i - 1] = k
    return a, e, ks


def _to_sections(a) -> np.ndarray:
    """Split a monic stable polynomial into (c1, c2) factor rows.

    Complex pairs form their own quadratic; real roots are paired by
    modulus, and a leftover real root becomes a first-order row.
    """
    if len(a) <= 1:
        return np.zeros((0, 2))
    roots = np.roots(a)
    cplx = sorted((z for z in roots if z.imag > 1e-12), key=lambda z: -abs(z))
    real = sorted((z.real for z in roots if abs(z.imag) <= 1e-12), key=lambda x: -abs(x))
    rows = [(-2 * z.real, abs(z) ** 2) for z in cplx]
    while len(real) >= 2:
        r1, r2 = real.pop(0), real.pop(0)
        rows.append((-(r1 + r2), r1 * r2))
    if real:
        rows.append((-real[0], 0.0))
    return np.array(rows, dtype=float).reshape(-1, 2)


class _MomentSystem:
    """Moment equations ``F(x) = mu(x) - sigma`` in factor coordinates.

    ``x = (s, c1_0, c2_0, c1_1, ...)`` with ``A = exp(s) prod(sections)``.
    The last section is first order when ``linear`` is set and then owns a
    single coordinate.
    """

    def __init__(self, sigma, Pvals, theta, linear: bool):
        self.sigma = sigma
        self.P = Pvals
        self.G = theta.size
        m = sigma.size - 1
        self.z1 = np.exp(-1j * theta)
        self.z2 = self.z1 * self.z1
        self.C = np.cos(np.outer(np.arange(m + 1), theta))
        self.linear = linear

    def unpack(self, x):
        body = x[1:]
        if self.linear:
            quad, lin = body[:-1].reshape(-1, 2), body[-1]
        else:
            quad, lin = body.reshape(-1, 2), None
        return x[0], quad, lin

    def stable(self, x) -> bool:
        _, quad, lin = self.unpack(x)
        for c1, c2 in quad:
            if not (abs(c2) < 1 and abs(c1) < 1 + c2):
                return False
        return lin is None or abs(lin) < 1

    def evaluate(self, x, with_jacobian=True):
        s, quad, lin = self.unpack(x)
        A = np.full(self.G, math.exp(s), dtype=complex)
        rows = [np.ones(self.G, complex)]
        for c1, c2 in quad:
            S = 1.0 + c1 * self.z1 + c2 * self.z2
            A *= S
            if with_jacobian:
                rows += [self.z1 / S, self.z2 / S]
        if lin is not None:
            S = 1.0 + lin * self.z1
            A *= S
            if with_jacobian:
                rows.append(self.z1 / S)
        phi = self.P / (A.real ** 2 + A.imag ** 2)
        F = self.C @ phi / self.G - self.sigma
        if not with_jacobian:
            return F, None
        # d phi / dx = -2 Re(dA/A) phi
        D = 2.0 * np.array(rows).real
        J = -(self.C * phi) @ D.T / self.G
        return F, J

    def factor(self, x) -> MinPhaseFactor:
        s, quad, lin = self.unpack(x)
        rows = [tuple(r) for r in quad]
        if lin is not None:
            rows.append((lin, 0.0))
        return MinPhaseFactor(math.exp(s), np.array(rows, float).reshape(-1, 2),
                              self.sigma.size - 1)


def _newton(system: _MomentSystem, x, tol, budget):
    """Damped Newton on the square moment system, merit ``||F||``."""
    m = system.sigma.size - 1
    weights = np.r_[1.0, np.full(m, 2.0)]
    F, J = system.evaluate(x)
    it = 0
    while True:
        if np.max(np.abs(weights * F)) <= tol:
            return x, F, it, True
        if it >= budget:
            return x, F, it, False
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return x, F, it, False
        it += 1
        t = 1.0
        n0 = np.linalg.norm(F)
        while True:
            xt = x + t * step
            if system.stable(xt):
                Ft, Jt = system.evaluate(xt)
                if np.linalg.norm(Ft) <= n0 * (1.0 - 1e-4 * t):
                    break
            t *= 0.5
            if t < 1e-10:
                return x, F, it, False
        x, F, J = xt, Ft, Jt


def me_dual_solve(cov_seq, P, grid_size: Optional[int] = None, tol: float = 1e-10,
                  max_iter: int = 200):
    """Maximum-entropy rational extension of a covariance sequence.

    Finds ``Q`` of degree ``m = len(cov_seq) - 1`` minimizing the dual
    ``<sigma, q> - mean(P log Q)`` so that ``Phi = P/Q`` matches
    ``cov_seq`` at lags 0..m.

    The stationarity conditions of the dual are the moment equations
    themselves. They are solved by Newton's method on the minimum-phase
    factor ``A`` of ``Q = |A|^2``, with ``A`` parametrized by its
    second-order sections. The parametrization keeps ``Q`` positive by
    construction and evaluates it with full relative accuracy near its
    zeros. The start point is the autoregressive (Levinson) solution,
    which is exact when ``P`` is constant. If the direct iteration stalls,
    ``P`` is deformed continuously from its mean to its final value.

    Parameters
    ----------
    cov_seq : array_like
        ``sigma_0 .. sigma_m``.
    P : array_like
        Cosine-basis coefficients of the numerator, positive on the circle.
    grid_size : int, optional
        Quadrature points; defaults to ``max(1024, 64 m)``. The grid is
        refined automatically when the fitted poles are close enough to
        the unit circle to spoil the quadrature at ``tol``.
    tol : float
        Bound on the infinity norm of the dual gradient.
    max_iter : int
        Total Newton iteration budget.

    Returns
    -------
    density : SpectralDensity1D
        ``P`` and the fitted ``Q`` (coefficients plus factor).
    report : MESolveReport

    Raises
    ------
    InfeasibleError
        If the Toeplitz matrix of ``cov_seq`` is not positive definite.
    ConvergenceError
        If the iteration budget runs out; carries the report.
    """
    sigma = np.asarray(cov_seq, dtype=float).ravel()
    p = np.atleast_1d(np.asarray(P, dtype=float))
    if sigma.size == 0 or not np.all(np.isfinite(sigma)):
        raise DomainError("cov_seq must be a non-empty finite sequence")
    m = sigma.size - 1
    G = max(1024, 64 * m) if grid_size is None else int(grid_size)
    if G < 8 * m or G < 8:
        raise DomainError(f"grid_size must be at least 8m (m={m})")
    if np.any(trig_eval(p, _uniform_grid(max(G, 4096))) <= 0):
        raise DomainError("P must be positive on the unit circle")

    a0, e0, _ = levinson(sigma)
    theta = _uniform_grid(G)
    Pvals = trig_eval(p, theta)
    p0 = float(np.mean(Pvals))
    sec = _to_sections(a0)
    linear = m % 2 == 1
    x = np.r_[0.5 * math.log(p0 / e0), sec[:-1].ravel() if linear else sec.ravel(),
              [sec[-1, 0]] if linear else []]

    system = _MomentSystem(sigma, Pvals, theta, linear)
    x, F, used, ok = _newton(system, x, tol, min(max_iter, 60))
    method, hsteps = "direct", 0
    if not ok:
        # homotopy from the constant numerator, where the start is exact
        x = np.r_[0.5 * math.log(p0 / e0), sec[:-1].ravel() if linear else sec.ravel(),
                  [sec[-1, 0]] if linear else []]
        method = "homotopy"
        lam, h = 0.0, 0.25
        while lam < 1.0 and used < max_iter:
            lt = min(1.0, lam + h)
            stage = _MomentSystem(sigma, (1 - lt) * p0 + lt * Pvals, theta, linear)
            xt, Ft, k, ok_t = _newton(stage, x, tol, min(30, max_iter - used))
            used += k
            if ok_t:
                x, F, lam = xt, Ft, lt
                hsteps += 1
                h = min(2 * h, 1.0)
            else:
                h *= 0.5
                if h < 1e-4:
                    break
        ok = lam >= 1.0

    # refine the quadrature when poles approach the circle
    while ok:
        rho = system.factor(x).root_radius()
        if rho == 0 or rho ** G <= 1e-3 * tol or G >= 1 << 17:
            break
        need = math.log(1e-3 * tol) / math.log(rho)
        G = min(1 << 17, 1 << int(math.ceil(math.log2(need))))
        theta = _uniform_grid(G)
        Pvals = trig_eval(p, theta)
        system = _MomentSystem(sigma, Pvals, theta, linear)
        x, F, k, ok = _newton(system, x, tol, max(max_iter - used, 0))
        used += k

    weights = np.r_[1.0, np.full(m, 2.0)]
    report = MESolveReport(iterations=used, final_gradient_norm=float(np.max(np.abs(weights * F))),
                           moment_residuals=-F, converged=bool(ok), grid_size=G,
                           homotopy_steps=hsteps, method=method)
    if not ok:
        raise ConvergenceError(
            f"maximum-entropy Newton did not converge in {used} iterations "
            f"(gradient {report.final_gradient_norm:.3g})", report)
    fac = system.factor(x)
    q = poly_autocorrelation(fac.coefficients())
    return SpectralDensity1D(p, q, fac), report


def dual_gradient_hessian(q, cov_seq, P, grid_size: int):
    """Value, gradient and Hessian of the dual in cosine coordinates.

    With weights ``c_0 = 1`` and ``c_k = 2``, on a uniform grid of
    ``grid_size`` points::

        J      = sum_k c_k q_k sigma_k - mean(P log Q)
        dJ/dq_k = c_k (sigma_k - mean(P cos(k th) / Q))
        H_kl   = c_k c_l mean(P cos(k th) cos(l th) / Q^2)
    """
    q = np.asarray(q, dtype=float)
    sigma = np.asarray(cov_seq, dtype=float)
    if q.shape != sigma.shape:
        raise DomainError("q and cov_seq must have the same length")
    m = q.size - 1
    th = _uniform_grid(grid_size)
    Qv = trig_eval(q, th)
    if np.any(Qv <= 0):
        raise DomainError("Q must be positive on the grid")
    Pv = trig_eval(P, th)
    c = np.r_[1.0, np.full(m, 2.0)]
    C = np.cos(np.outer(np.arange(m + 1), th))
    value = float(np.dot(c * q, sigma) - np.mean(Pv * np.log(Qv)))
    grad = c * (sigma - C @ (Pv / Qv) / grid_size)
    W = C * (Pv / Qv ** 2)
    H = np.outer(c, c) * (W @ C.T) / grid_size
    return value, grad, 0.5 * (H + H.T)


def _polish_factor(a, q, steps: int = 3):
    """Newton (Wilson) refinement of a spectral factor; None if it fails."""
    m = a.size - 1
    idx = np.arange(m + 1)
    lag = idx[None, :] - idx[:, None]  # J[k, j] = a[j - k] + a[j + k]
    target = 64 * (m + 1) * np.finfo(float).eps * q[0]
    for _ in range(steps):
        resid = np.correlate(a, a, "full")[m:] - q
        if np.max(np.abs(resid)) <= target:
            return a if np.all(np.abs(np.roots(a)) < 1) else None
        ap = np.r_[a, np.zeros(m + 1)]
        J = np.where(lag >= 0, ap[np.clip(lag, 0, None)], 0.0) + ap[idx[None, :] + idx[:, None]]
        try:
            a = a - np.linalg.solve(J, resid)
        except np.linalg.LinAlgError:
            return None
    resid = np.correlate(a, a, "full")[m:] - q
    if np.max(np.abs(resid)) <= target and np.all(np.abs(np.roots(a)) < 1):
        return a
    return None


def bauer_factorize(q, trunc_N: int = 512, tol: float = 1e-10, max_N: int = 8192) -> np.ndarray:
    """Minimum-phase factor of a positive trigonometric polynomial.

    The Cholesky factor of the ``N x N`` banded Toeplitz matrix of ``q``
    has rows that converge to the reversed factor coefficients. Rows
    ``N`` and ``N/2`` are compared and ``N`` is doubled until they agree to
    ``tol * sqrt(q_0)``. When the difference stops shrinking (rounding
    floor of a badly conditioned ``Q``) the row is accepted if a few
    Newton steps from it reach a factor reproducing ``q`` to working
    precision.

    Parameters
    ----------
    q : array_like
        Cosine-basis coefficients ``q_0 .. q_m``.

    Returns
    -------
    ndarray
        ``a_0 .. a_m`` with ``a_0 > 0`` and ``sum_j a_j a_{j+k} = q_k``.

    Examples
    --------
    >>> bauer_factorize([1.25, -0.5]).round(12)
    array([ 1. , -0.5])
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    m = q.size - 1
    th = _uniform_grid(max(4096, 64 * (m + 1)))
    if np.any(trig_eval(q, th) <= 0):
        raise DomainError("Q is not positive on the unit circle")
    if m == 0:
        return np.sqrt(q)
    N = max(int(trunc_N), 4 * (m + 1))
    scale = math.sqrt(q[0])
    prev = np.inf
    while True:
        ab = np.zeros((m + 1, N))
        for k in range(m + 1):
            ab[k, :N - k] = q[k]
        try:
            L = sla.cholesky_banded(ab, lower=True)
        except np.linalg.LinAlgError as exc:
            raise DomainError(f"banded Toeplitz matrix not positive definite: {exc}")
        row = np.array([L[k, N - 1 - k] for k in range(m + 1)])
        h = N // 2
        half = np.array([L[k, h - 1 - k] for k in range(m + 1)])
        diff = float(np.max(np.abs(row - half)))
        if diff <= tol * scale:
            return row
        # stalled at the rounding floor of an ill-conditioned Q. Newton
        # steps on a * a = q from this row must reach a factor that
        # reproduces q to working precision; the row is then kept as is,
        # since its coefficients are typically closer than the polished ones
        if diff >= 0.5 * prev:
            a = _polish_factor(row, q)
            if a is not None and np.max(np.abs(a - row)) <= math.sqrt(tol) * scale:
                return row
        prev = diff
        if N >= max_N:
            raise ConvergenceError(
                f"Bauer factor not converged at N={N}; increase trunc_N or max_N")
        N *= 2


# --------------------------------------------------------------------------
# filter construction

@dataclass
class FilterDesign:
    """A shaping filter plus the diagnostics of its construction."""

    filter: RationalFilter1D
    m: int
    density: Optional[SpectralDensity1D] = None
    report: Optional[MESolveReport] = None
    factorization: str = "closed-form"
    m_auto: Optional[int] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {"filter": self.filter.to_dict(), "m": self.m,
             "factorization": self.factorization, "notes": list(self.notes)}
        if self.m_auto is not None:
            d["m_auto"] = self.m_auto
        if self.report is not None:
            d["report"] = self.report.to_dict()
        if self.density is not None:
            d["p"] = self.density.p.tolist()
            d["q"] = self.density.q.tolist()
        return d


def _long_sequence(kernel: Kernel1D, T: float, threshold: float) -> np.ndarray:
    if kernel.kind is KernelKind.CUSTOM:
        return np.asarray(kernel.custom_seq, dtype=float)
    # lag beyond which the kernel is far below threshold
    cut = math.log(1e3 / threshold) / kernel.alpha
    if kernel.kind is KernelKind.GAUSSIAN:
        L = math.sqrt(cut) / T
    else:
        L = cut / T
    L = int(min(max(math.ceil(L) + 2, 2), 100_000))
    return sampled_sequence(kernel, T, L)


def _toeplitz_ratio(seq) -> float:
    ev = np.linalg.eigvalsh(sla.toeplitz(seq))
    return float(ev[0] / ev[-1])


def design_filter(kernel: Kernel1D, T: float, b=None, m: Optional[int] = None,
                  threshold: float = DEFAULT_THRESHOLD, tol: float = 1e-10,
                  max_iter: int = 200, factorization: str = "auto") -> FilterDesign:
    """Build the shaping filter for one axis and keep the diagnostics.

    ``factorization`` selects how ``Q`` is factored for non-exponential
    kernels: ``"bauer"`` (banded Cholesky of the coefficients),
    ``"newton"`` (the factor produced by the solver itself) or ``"auto"``,
    which takes the Bauer factor only when its spectrum agrees with the
    solver's factor to 1e-8 relative and otherwise keeps the solver's.
    See :func:`build_filter`.
    """
    if factorization not in ("auto", "bauer", "newton"):
        raise DomainError(f"unknown factorization {factorization!r}")
    if kernel.kind is KernelKind.EXPONENTIAL and b is None and m is None:
        f = ar1_filter_exponential(kernel.sigma2, kernel.alpha, T)
        return FilterDesign(f, 1)

    bpoly = np.array([1.0]) if b is None else np.atleast_1d(np.asarray(b, float))
    notes = []
    m_auto = None
    if m is None:
        seq = _long_sequence(kernel, T, threshold)
        m_auto = dominant_lag_count(seq, threshold)
        m_use = m_auto
        while m_use > 1 and _toeplitz_ratio(seq[:m_use + 1]) < COND_FLOOR:
            m_use -= 1
        if m_use != m_auto:
            notes.append(f"order reduced from {m_auto} to {m_use}: moment matrix "
                         f"numerically singular")
    else:
        if m < 0:
            raise DomainError("m must be non-negative")
        m_use = int(m)
    p = poly_autocorrelation(bpoly)
    while True:
        sigma = sampled_sequence(kernel, T, m_use)
        try:
            density, report = me_dual_solve(sigma, p, tol=tol, max_iter=max_iter)
            break
        except ConvergenceError as exc:
            if m_auto is None or m_use <= 1:
                raise
            notes.append(f"order {m_use} failed ({exc}); trying {m_use - 1}")
            m_use -= 1
    fac = density.q_factor

    used = "newton"
    a_bauer = None
    if factorization in ("auto", "bauer"):
        try:
            a_bauer = bauer_factorize(density.q)
        except (ConvergenceError, DomainError) as exc:
            if factorization == "bauer":
                raise
            notes.append(f"Bauer factorization failed: {exc}")
        if a_bauer is not None:
            if factorization == "bauer":
                used = "bauer"
            else:
                th = _uniform_grid(4096)
                qb = np.abs(np.polyval(a_bauer[::-1], np.exp(-1j * th))) ** 2
                qf = fac.squared_magnitude(th)
                err = float(np.max(np.abs(qb - qf) / qf))
                if err <= 1e-8:
                    used = "bauer"
                else:
                    notes.append(f"Bauer factor deviates by {err:.2e} (relative); "
                                 f"using the solver factor")
    if used == "bauer":
        filt = RationalFilter1D(bpoly / a_bauer[0], a_bauer / a_bauer[0])
    else:
        filt = RationalFilter1D(bpoly / fac.gain, fac.monic(), fac.sos() if m_use else None)
    return FilterDesign(filt, m_use, density, report, used, m_auto, notes)


def build_filter(kernel: Kernel1D, T: float, b=None, m: Optional[int] = None,
                 threshold: float = DEFAULT_THRESHOLD, tol: float = 1e-10,
                 max_iter: int = 200, factorization: str = "auto") -> RationalFilter1D:
    """Shaping filter ``W = b/a`` whose output has the sampled kernel's covariance.

    Parameters
    ----------
    kernel : Kernel1D
    T : float
        Sampling distance.
    b : array_like, optional
        Numerator polynomial for the ARMA model, default ``[1]``.
    m : int, optional
        Denominator order. When omitted it is the dominant lag count of the
        sampled kernel at ``threshold``. The automatic order is lowered
        while the moment Toeplitz matrix is numerically singular
        (eigenvalue ratio below ``COND_FLOOR``) and, after that, while the
        solver fails to converge. Each reduction is noted in the design.
    threshold, tol, max_iter
        Passed to :func:`dominant_lag_count` and :func:`me_dual_solve`.
    factorization : {"auto", "bauer", "newton"}

    Returns
    -------
    RationalFilter1D
        Exponential kernels with default options get the exact AR(1)
        factor. Otherwise ``|W|^2 = P/Q`` with the maximum-entropy ``Q``.
    """
    return design_filter(kernel, T, b, m, threshold, tol, max_iter, factorization).filter
