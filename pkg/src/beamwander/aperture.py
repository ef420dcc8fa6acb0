"""Transmission of a deflected Gaussian beam through a circular aperture.

Lengths may be given in any unit as long as they are consistent; the
aperture radius ``a`` fixes the scale.  ``ApertureBeam(1.0, w)`` is the
usual normalised form in which every length is a multiple of ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateGeometryError, DomainError
from .specfun import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    bessel_i1_scaled,
    clipped_gaussian_fit,
    integrate,
)

__all__ = [
    "ApertureBeam",
    "ApproxModel",
    "transmission_exact",
    "transmission_exact_derivative_at_a",
    "fit_approx_model",
    "transmission_approx",
    "r_of_t",
    "approx_error_profile",
    "UNDERFLOW_EXPONENT",
]

# Below exp(-700) the transmission is reported as an exact zero.
UNDERFLOW_EXPONENT = -700.0


@dataclass(frozen=True)
class ApertureBeam:
    """Aperture radius ``a`` and beam-spot radius ``W`` at the aperture plane."""

    aperture_radius_a: float
    beam_spot_w: float

    def __post_init__(self):
        if not (self.aperture_radius_a > 0 and self.beam_spot_w > 0):
            raise DomainError("aperture radius and beam-spot radius must be positive")

    @classmethod
    def normalized(cls, w_over_a: float) -> "ApertureBeam":
        return cls(1.0, float(w_over_a))

    @property
    def w_over_a(self) -> float:
        return self.beam_spot_w / self.aperture_radius_a


@dataclass(frozen=True)
class ApproxModel:
    """Parameters of ``T^2(r) = t0_sq * exp(-(r / scale_r) ** shape_lambda)``."""

    t0_sq: float
    shape_lambda: float
    scale_r: float

    def __post_init__(self):
        if not 0 < self.t0_sq <= 1:
            raise DomainError(f"t0_sq must lie in (0, 1], got {self.t0_sq}")
        if not (self.shape_lambda > 0 and self.scale_r > 0):
            raise DomainError("shape and scale must be positive")

    @property
    def t0(self) -> float:
        return math.sqrt(self.t0_sq)


def transmission_exact(
    r: float,
    geom: ApertureBeam,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    return_flag: bool = False,
):
    """Exact transmission efficiency ``T^2`` for beam deflection ``r``.

    Evaluates the clipped-power integral
    ``(4/W^2) int_0^a rho exp(-2 (rho^2 + r^2) / W^2) I0(4 r rho / W^2) drho``
    with the Bessel factor scaled and the peak of the exponent factored out,
    so deep-tail values keep full relative precision.

    With ``return_flag=True`` the result is ``(T2, underflow)`` where
    ``underflow`` reports that the peak exponent fell below
    :data:`UNDERFLOW_EXPONENT` and ``T2`` was set to exactly zero.
    """
    if not (r >= 0 and math.isfinite(r)):
        raise DomainError("deflection r must be finite and non-negative")
    a = geom.aperture_radius_a
    w2 = geom.beam_spot_w**2
    # exponent of the integrand: -2 (rho - r)^2 / W^2 + log i0e(...), peak at rho = min(r, a)
    peak = -2.0 * max(r - a, 0.0) ** 2 / w2
    if peak < UNDERFLOW_EXPONENT:
        return (0.0, True) if return_flag else 0.0

    def integrand(rho):
        return 4.0 / w2 * rho * np.exp(-2.0 * (rho - r) ** 2 / w2 - peak) * special.i0e(4.0 * r * rho / w2)

    # the integrand is concentrated within a few W of rho = r
    pts = [p for p in (r - 3 * geom.beam_spot_w, r, r + 3 * geom.beam_spot_w) if 0 < p < a]
    scaled, _ = integrate(integrand, 0.0, a, spec, points=pts)
    # a captured power fraction; clip quadrature rounding above 1
    value = min(scaled * math.exp(peak), 1.0)
    return (value, False) if return_flag else value


def transmission_exact_derivative_at_a(geom: ApertureBeam) -> float:
    """Closed-form slope ``dT^2/dr`` of the exact law at ``r = a``."""
    a = geom.aperture_radius_a
    x = 4.0 * a**2 / geom.beam_spot_w**2
    return -4.0 * a / geom.beam_spot_w**2 * bessel_i1_scaled(x)


def fit_approx_model(geom: ApertureBeam) -> ApproxModel:
    """Fit ``(T0^2, lambda, R)`` so the analytic law matches the exact one at
    ``r = 0`` (value) and at ``r = a`` (value and slope).

    Raises
    ------
    DegenerateGeometryError
        When the beam is so much wider than the aperture that the logarithm
        fixing ``lambda`` and ``R`` is lost to rounding.
    """
    a = geom.aperture_radius_a
    y = 4.0 * (a / geom.beam_spot_w) ** 2
    t0_sq, shape, log_term = clipped_gaussian_fit(y)
    if not (t0_sq > 0 and math.isfinite(shape) and shape > 0 and log_term > 0):
        raise DegenerateGeometryError(
            f"beam-spot radius W/a={geom.w_over_a:g} is too large relative to the aperture "
            "for the shape/scale fit (wide-beam regime)"
        )
    scale = a * log_term ** (-1.0 / shape)
    return ApproxModel(t0_sq=t0_sq, shape_lambda=shape, scale_r=scale)


def transmission_approx(r, model: ApproxModel):
    """Analytic law ``T0^2 exp(-(r/R)^lambda)``; accepts scalars or arrays."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError("deflection r must be non-negative")
    out = model.t0_sq * np.exp(-((r_arr / model.scale_r) ** model.shape_lambda))
    return float(out) if out.ndim == 0 else out


def r_of_t(t, model: ApproxModel):
    """Deflection at which the analytic law gives transmission coefficient ``t``.

    ``r = R (2 ln(T0 / t))^(1/lambda)``, defined for ``0 < t <= T0``.
    """
    t_arr = np.asarray(t, dtype=float)
    t0 = model.t0
    # tolerate the rounding of T0 = sqrt(t0_sq)
    if np.any(t_arr <= 0) or np.any(t_arr > t0 * (1 + 4 * np.finfo(float).eps)):
        raise DomainError(f"transmission coefficient must lie in (0, T0={t0:.17g}]")
    log_ratio = np.maximum(2.0 * (math.log(t0) - np.log(t_arr)), 0.0)
    out = model.scale_r * log_ratio ** (1.0 / model.shape_lambda)
    return float(out) if out.ndim == 0 else out


def approx_error_profile(geom: ApertureBeam, r_grid, spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """Accuracy of the analytic law against the exact integral on ``r_grid``.

    Returns ``(rms_rel_error, max_abs_error)`` where ``rms_rel_error`` is the
    relative root-mean-square error ``||approx - exact|| / ||exact||`` on the
    grid and ``max_abs_error`` is the largest pointwise ``|approx - exact|``.
    """
    grid = np.asarray(r_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("r_grid must be a non-empty 1-D sequence")
    if np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise DomainError("r_grid must be sorted and non-negative")
    model = fit_approx_model(geom)
    exact = np.array([transmission_exact(r, geom, spec) for r in grid])
    approx = transmission_approx(grid, model)
    diff = approx - exact
    rms_rel = math.sqrt(np.mean(diff**2) / np.mean(exact**2))
    return rms_rel, float(np.max(np.abs(diff)))
