"""Quadrature and photon-number squeezing after a fluctuating channel.

Conventions: ``X = a + a^dag`` (vacuum variance 1), squeezing is reported
through the normally-ordered variance ``<:dX^2:>`` and the Mandel parameter
``Q = <:dn^2:> / <n>``; both are ``0`` for coherent light and ``-1`` at the
perfect-squeezing bound.  Decibel values are ``-10 log10(v + 1)``, positive
when the light is squeezed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .channel import MomentTable, displaced_squeezed_fock, fock_moments
from .errors import DomainError, InfeasiblePostSelectionError
from .pdtc import FINE_QUADRATURE, Pdtc
from .specfun import QuadratureSpec

__all__ = [
    "SqueezingInput",
    "canonical_input",
    "squeezing_db",
    "value_from_db",
    "propagate_squeezing",
    "PostSelectedPdtc",
    "postselect",
    "tmin_of_exceedance",
    "ScanRow",
    "squeezing_vs_exceedance_scan",
    "FEASIBILITY_FLOOR",
]

# Post-selected sets with probability at or below this are rejected.
FEASIBILITY_FLOOR = 1e-300


def squeezing_db(value):
    """``-10 log10(value + 1)`` for a normally-ordered variance or Mandel Q."""
    v = np.asarray(value, dtype=float)
    if np.any(v <= -1):
        raise DomainError("value must exceed -1")
    out = -10.0 * np.log10(1.0 + v)
    return float(out) if out.ndim == 0 else out


def value_from_db(db):
    """Inverse of :func:`squeezing_db`."""
    out = np.power(10.0, -np.asarray(db, dtype=float) / 10.0) - 1.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SqueezingInput:
    """Single-mode squeezing figures: Mandel ``Q``, ``<n>``, ``<:dX^2:>`` and ``<X>``."""

    mandel_q: float
    mean_n: float
    quad_var: float
    mean_x: float

    def __post_init__(self):
        if not self.mean_n >= 0:
            raise DomainError("mean photon number must be non-negative")
        if not self.quad_var >= -1:
            raise DomainError("normally-ordered quadrature variance is bounded below by -1")
        if not self.mandel_q >= -1:
            raise DomainError("Mandel Q is bounded below by -1")

    @classmethod
    def from_moments(cls, table: MomentTable) -> "SqueezingInput":
        if table.nmax < 2:
            raise DomainError("need moments up to order 2")
        n = table.mean_n
        q = table.mandel_q if n > 0 else 0.0
        return cls(mandel_q=q, mean_n=n, quad_var=table.quad_var_normal, mean_x=table.mean_x)

    @property
    def quad_db(self) -> float:
        return squeezing_db(self.quad_var)

    @property
    def photon_db(self) -> float:
        return squeezing_db(self.mandel_q)


def canonical_input(squeeze_db: float = 6.0, alpha: float = 10.0, cutoff: int = 400) -> SqueezingInput:
    """Amplitude-squeezed coherent state ``D(alpha) S(s)|0>`` with
    ``exp(-2s) = 10^(-squeeze_db/10)``, evaluated in a truncated Fock basis.
    """
    psi = displaced_squeezed_fock(alpha, squeeze_db, cutoff)
    return SqueezingInput.from_moments(fock_moments(psi, 2))


def propagate_squeezing(inp: SqueezingInput, channel, spec: QuadratureSpec | None = None) -> SqueezingInput:
    """Squeezing figures after the channel.

    ``Q_out = <T^4>/<T^2> Q + Var(T^2)/<T^2> <n>``,
    ``<:dX^2:>_out = <T^2> <:dX^2:> + Var(T) <X>^2``,
    ``<n>_out = <T^2> <n>`` and ``<X>_out = <T> <X>``.

    ``channel`` needs ``moment`` and ``variance_t``/``variance_eta``
    (``Pdtc``, ``ConstantChannel`` or :class:`PostSelectedPdtc`).
    """
    kw = {} if spec is None else {"spec": spec}
    m1 = channel.moment(1, **kw)
    m2 = channel.moment(2, **kw)
    if m2 == 0:
        return SqueezingInput(0.0, 0.0, 0.0, 0.0)
    m4 = channel.moment(4, **kw)
    var_t = channel.variance_t(**kw)
    var_eta = channel.variance_eta(**kw)
    return SqueezingInput(
        mandel_q=m4 / m2 * inp.mandel_q + var_eta / m2 * inp.mean_n,
        mean_n=m2 * inp.mean_n,
        quad_var=m2 * inp.quad_var + var_t * inp.mean_x**2,
        mean_x=m1 * inp.mean_x,
    )


@dataclass(frozen=True)
class PostSelectedPdtc:
    """``T`` conditioned on ``T > t_min``.

    Averages are integrals over deflections ``r < r(t_min)`` divided by the
    exceedance at ``t_min``.
    """

    base: Pdtc
    t_min: float
    exceedance_at_tmin: float

    @property
    def t0(self) -> float:
        return self.base.t0

    @property
    def _r_hi(self):
        return None if self.t_min <= 0 else float(self.base.r_of_t(self.t_min))

    def expect(self, func, spec: QuadratureSpec = FINE_QUADRATURE):
        if self.base.wander.deterministic:
            # a point mass survives whole or not at all (checked at construction)
            return self.base.expect(func, spec)
        return self.base.expect(func, spec, r_hi=self._r_hi) / self.exceedance_at_tmin

    def moment(self, k, spec: QuadratureSpec = FINE_QUADRATURE) -> float:
        if k < 1:
            raise DomainError("moment order must be >= 1")
        return float(self.expect(lambda t: t**k, spec))

    def variance_t(self, spec: QuadratureSpec = FINE_QUADRATURE) -> float:
        return self._variance(1, spec)

    def variance_eta(self, spec: QuadratureSpec = FINE_QUADRATURE) -> float:
        return self._variance(2, spec)

    def _variance(self, k, spec):
        if self.base.wander.deterministic:
            return 0.0
        return self.base.variance_of_power(k, spec, r_hi=self._r_hi, mass=self.exceedance_at_tmin)


def postselect(p: Pdtc, t_min: float, spec: QuadratureSpec = FINE_QUADRATURE) -> PostSelectedPdtc:
    """Restrict ``p`` to ``T > t_min`` and renormalise.

    Raises
    ------
    InfeasiblePostSelectionError
        If no probability (below :data:`FEASIBILITY_FLOOR`) survives.
    """
    if not (t_min >= 0 and math.isfinite(t_min)):
        raise DomainError("t_min must be finite and non-negative")
    if t_min >= p.t0:
        raise InfeasiblePostSelectionError(f"t_min={t_min:.6g} is not below T0={p.t0:.6g}")
    mass = 1.0 if t_min == 0 else p.exceedance(t_min, "exact", spec)
    if not mass > FEASIBILITY_FLOOR:
        raise InfeasiblePostSelectionError(f"P(T > {t_min:.6g}) = {mass:.3e} is numerically zero")
    return PostSelectedPdtc(p, float(t_min), float(mass))


def tmin_of_exceedance(fbar: float, p: Pdtc, numeric: bool = False) -> float:
    """Threshold ``T_min`` with ``P(T > T_min) = fbar``.

    For centred wandering the inverse is explicit,
    ``T_min = T0 exp(-((-2 sigma^2/R^2) ln(1 - fbar))^(lambda/2) / 2)``.
    Offset wandering (``d > 0``) needs ``numeric=True``, which solves the exact
    exceedance equation by bracketing root search.  ``fbar = 1`` returns 0.
    """
    if not 0 < fbar <= 1:
        raise DomainError("fbar must lie in (0, 1]")
    if fbar == 1:
        return 0.0
    if p.wander.deterministic:
        raise DomainError("a deterministic channel has no continuous exceedance to invert")
    if p.wander.d == 0:
        lam, R, s = p.model.shape_lambda, p.model.scale_r, p.wander.sigma
        ratio = -2.0 * s**2 / R**2 * math.log1p(-fbar)
        return p.t0 * math.exp(-0.5 * ratio ** (lam / 2.0))
    if not numeric:
        raise DomainError("no closed form for d > 0; pass numeric=True")

    def f(t):
        return p.exceedance(t, "exact") - fbar

    # exceedance falls from 1 at T -> 0 to 0 at T0
    lo, hi = 0.0, p.t0
    if f(lo) <= 0:
        return 0.0
    return brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass(frozen=True)
class ScanRow:
    fbar: float
    t_min: float
    quad_db: float
    photon_db: float
    feasible: bool


def squeezing_vs_exceedance_scan(inp: SqueezingInput, p: Pdtc, fbar_grid, spec: QuadratureSpec = FINE_QUADRATURE):
    """Output squeezing after post-selecting the fraction ``fbar`` of best
    transmissions, one :class:`ScanRow` per grid value (order preserved).

    Rows whose post-selection is infeasible are kept with ``feasible=False``
    and NaN figures.
    """
    grid = np.asarray(fbar_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("fbar_grid must be a non-empty 1-D sequence")
    if np.any(grid <= 0) or np.any(grid > 1):
        raise DomainError("fbar values must lie in (0, 1]")
    rows = []
    for fbar in grid:
        t_min = tmin_of_exceedance(float(fbar), p, numeric=True)
        try:
            out = propagate_squeezing(inp, postselect(p, t_min, spec), spec)
        except InfeasiblePostSelectionError:
            rows.append(ScanRow(float(fbar), t_min, math.nan, math.nan, False))
            continue
        rows.append(ScanRow(float(fbar), t_min, out.quad_db, out.photon_db, True))
    return rows
