"""Special functions and adaptive quadrature.

Every Bessel value is exponentially scaled, ``e^{-x} I_n(x)``; the unscaled
functions overflow for the arguments (``4 a^2 / W^2`` up to ~10^4) that
appear in realistic aperture scans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError

__all__ = [
    "QuadratureSpec",
    "DEFAULT_QUADRATURE",
    "bessel_i0_scaled",
    "bessel_i1_scaled",
    "one_minus_i0_scaled",
    "clipped_gaussian_fit",
    "integrate",
    "incomplete_weber_q0",
    "incomplete_weber_q0_scaled",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for :func:`integrate`.

    Convergence is declared when the summed error estimate is below
    ``max(abs_tol, rel_tol * |value|)`` (component-wise for vector integrands).
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("abs_tol and rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def _check_bessel_arg(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise DomainError("Bessel argument must be finite and non-negative")
    return x


def _scalar_or_array(values, like):
    return float(values) if np.ndim(like) == 0 else values


def bessel_i0_scaled(x):
    """Return ``exp(-x) * I0(x)`` for ``x >= 0`` (scalar or array)."""
    x = _check_bessel_arg(x)
    return _scalar_or_array(special.i0e(x), x)


def bessel_i1_scaled(x):
    """Return ``exp(-x) * I1(x)`` for ``x >= 0`` (scalar or array)."""
    x = _check_bessel_arg(x)
    return _scalar_or_array(special.i1e(x), x)


# Below this argument I0(y) - 1 is summed from its power series.
_SERIES_CUTOFF = 1.0
_SERIES_TERMS = 16


def _i0_minus_one_scaled(y):
    """``exp(-y) (I0(y) - 1)``, accurate for all ``y >= 0``."""
    y = np.asarray(y, dtype=float)
    small = np.minimum(y, _SERIES_CUTOFF)
    q = (0.5 * small) ** 2
    term = np.ones_like(small)
    total = np.zeros_like(small)
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * k)
        total = total + term
    with np.errstate(over="ignore"):
        direct = special.i0e(y) - np.exp(-y)
    return np.where(y < _SERIES_CUTOFF, np.exp(-small) * total, direct)


def one_minus_i0_scaled(y):
    """``1 - exp(-y) I0(y)`` without cancellation at small ``y``."""
    y = _check_bessel_arg(y)
    # 1 - e^{-y} I0 = (1 - e^{-y}) - e^{-y} (I0 - 1); the second term is O(y^2)
    out = np.where(y < _SERIES_CUTOFF, -np.expm1(-y) - _i0_minus_one_scaled(y), 1.0 - special.i0e(y))
    return _scalar_or_array(out, y)


def clipped_gaussian_fit(y):
    """Two-point fit shared by the aperture law and the approximate exceedance.

    The fraction of a circular Gaussian spot of per-axis variance ``s^2``
    captured by a disk of radius ``rho``, as a function of the spot offset
    ``u``, is approximated by ``F0 * exp(-(u/D)^mu)``.  With
    ``y = rho^2 / s^2`` this returns ``(F0, mu, L)`` where
    ``L = ln(2 F0 / (1 - e^{-y} I0(y)))`` so that ``D = rho * L**(-1/mu)``.

    Matching the exact clipped power and its slope at ``u = rho`` gives the
    closed forms used here.
    """
    y = _check_bessel_arg(y)
    f0 = -np.expm1(-0.5 * y)
    den = np.asarray(one_minus_i0_scaled(y))
    # 2 F0 - den written as a sum of non-negative terms
    excess = np.expm1(-0.5 * y) ** 2 + _i0_minus_one_scaled(y)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = np.log1p(excess / den)
        shape = 2.0 * y * special.i1e(y) / den / log_term
    # y -> 0 limit: Gaussian offset dependence, shape exactly 2
    shape = np.where(y == 0, 2.0, shape)
    log_term = np.where(y == 0, 0.0, log_term)
    if np.ndim(y) == 0:
        return float(f0), float(shape), float(log_term)
    return f0, shape, log_term


# Gauss-Kronrod 7/15 nodes on [-1, 1] (positive half, centre last).
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.0,
    0.129484966168869693270611432679082,
    0.0,
    0.279705391489276667901467771423780,
    0.0,
    0.381830050505118944950369775488975,
    0.0,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
_GAUSS = np.concatenate([_WG[:-1], _WG[::-1]])
_EPS = np.finfo(float).eps


def _gk15(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    fx = np.asarray(f(mid + half * _NODES), dtype=float)
    if fx.ndim == 1:
        fx = fx[:, None]
    if not np.all(np.isfinite(fx)):
        raise DomainError(f"integrand not finite on [{lo!r}, {hi!r}]")
    kron = half * (_KRONROD @ fx)
    gauss = half * (_GAUSS @ fx)
    resabs = abs(half) * (_KRONROD @ np.abs(fx))
    err = np.maximum(np.abs(kron - gauss), 50.0 * _EPS * resabs)
    return kron, err


def _finite_map(f, lo):
    """Map ``[lo, inf)`` onto ``[0, 1)`` via ``x = lo + t / (1 - t)``."""

    def g(t):
        s = 1.0 - t
        x = lo + t / s
        fx = np.asarray(f(x), dtype=float)
        jac = 1.0 / s**2
        return fx * (jac if fx.ndim == 1 else jac[:, None])

    return g


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    points: Sequence[float] = (),
):
    """Adaptive Gauss-Kronrod (7/15) quadrature of ``f`` over ``[lo, hi]``.

    Parameters
    ----------
    f : callable
        Vectorised integrand. Receives a 1-D array of abscissae and returns
        either an array of the same length or an ``(n, k)`` array, in which
        case all ``k`` components are integrated together.
    lo, hi : float
        Integration limits, ``lo <= hi``. ``hi`` may be ``inf``.
    spec : QuadratureSpec
        Tolerances and subdivision budget.
    points : sequence of float
        Interior break points where the integrand changes character.

    Returns
    -------
    value, err_estimate
        Floats for scalar integrands, arrays of length ``k`` otherwise.

    Raises
    ------
    ConvergenceError
        If the tolerance is not met within ``spec.max_subdivisions``
        bisections. The exception carries the best estimate.
    """
    if not lo <= hi:
        raise DomainError(f"need lo <= hi, got [{lo}, {hi}]")
    if math.isinf(hi):
        if points:
            raise DomainError("break points are not supported on infinite ranges")
        f, lo, hi = _finite_map(f, lo), 0.0, 1.0
    edges = [lo] + sorted(p for p in set(points) if lo < p < hi) + [hi]

    vals, errs, bounds = [], [], []
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = _gk15(f, a, b)
        vals.append(v)
        errs.append(e)
        bounds.append((a, b))
    scalar = vals[0].shape == (1,)

    def finish(total, err):
        if scalar:
            return float(total[0]), float(err[0])
        return total, err

    if lo == hi:
        return finish(np.zeros_like(vals[0]), np.zeros_like(errs[0]))

    for _ in range(spec.max_subdivisions + 1):
        total = np.sum(vals, axis=0)
        err_total = np.sum(errs, axis=0)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total))
        if np.all(err_total <= tol):
            return finish(total, err_total)
        if len(bounds) - (len(edges) - 1) >= spec.max_subdivisions:
            break
        worst = int(np.argmax(np.max(np.asarray(errs) / tol, axis=1)))
        a, b = bounds[worst]
        m = 0.5 * (a + b)
        if not a < m < b:
            break
        v1, e1 = _gk15(f, a, m)
        v2, e2 = _gk15(f, m, b)
        vals[worst], errs[worst], bounds[worst] = v1, e1, (a, m)
        vals.append(v2)
        errs.append(e2)
        bounds.append((m, b))

    total = np.sum(vals, axis=0)
    err_total = np.sum(errs, axis=0)
    best, best_err = finish(total, err_total)
    raise ConvergenceError(
        f"quadrature did not converge on [{lo}, {hi}] "
        f"(estimate {best!r}, error {best_err!r})",
        estimate=best,
        error=best_err,
    )


def incomplete_weber_q0_scaled(x: float, z: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``exp(-2x) * Q0(x, z)`` for the incomplete Weber integral ``Q0``.

    ``Q0(x, z) = (2x)^-1 e^x  int_0^z t exp(-t^2 / 4x) I0(t) dt``.  The scaled
    form stays finite for any ``x``; it is the combination that appears in
    both the aperture transmission and the Rice distribution function.
    """
    if not (x > 0 and math.isfinite(x)):
        raise DomainError("x must be positive and finite")
    if not (z >= 0 and math.isfinite(z)):
        raise DomainError("z must be non-negative and finite")
    if z == 0:
        return 0.0
    # e^{-x} e^{-t^2/4x} I0(t) = exp(-(t - 2x)^2 / 4x) * i0e(t)
    four_x = 4.0 * x

    def integrand(t):
        return t * np.exp(-((t - 2.0 * x) ** 2) / four_x) * special.i0e(t)

    # the integrand peaks near t = 2x with width ~ sqrt(8x)
    width = math.sqrt(8.0 * x)
    pts = [p for p in (2.0 * x - 4 * width, 2.0 * x, 2.0 * x + 4 * width) if 0 < p < z]
    value, _ = integrate(integrand, 0.0, z, spec, points=pts)
    return value / (2.0 * x)


def incomplete_weber_q0(x: float, z: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Unscaled incomplete Weber integral ``Q0(x, z)``; overflows for ``x`` >~ 350."""
    return math.exp(2.0 * x) * incomplete_weber_q0_scaled(x, z, spec)
