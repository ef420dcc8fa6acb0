"""Distribution of the transmission coefficient under beam wandering.

The beam centre is Gaussian around a point at distance ``d`` from the
aperture centre, so the deflection ``r`` is Rice distributed and
``T = T0 exp(-(r/R)^lambda / 2)`` inherits a log-negative generalised Rice
law.  All averages are taken in the ``r`` measure, which sidesteps the
integrable singularities of the density at ``T = 0`` and ``T = T0``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .aperture import (
    ApertureBeam,
    ApproxModel,
    fit_approx_model,
    r_of_t,
    transmission_exact,
)
from .errors import DomainError
from .specfun import QuadratureSpec, clipped_gaussian_fit, incomplete_weber_q0_scaled, integrate

__all__ = [
    "FINE_QUADRATURE",
    "RICE_TRUNCATION_SIGMAS",
    "WanderStats",
    "Pdtc",
    "ConstantChannel",
    "sample_deflection",
    "sigma_from_pointing",
    "sigma_from_turbulence",
    "combine_sigmas",
]

# Relative-only tolerance: moments and tail probabilities span many decades.
FINE_QUADRATURE = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-12, max_subdivisions=4000)

# Rice integrals cover d - 10 sigma < r < d + 10 sigma; the neglected mass is below exp(-50).
RICE_TRUNCATION_SIGMAS = 10.0

# Samples are generated in fixed-size blocks, one RNG stream per block, so
# the output does not depend on how blocks are spread over threads.
SAMPLE_BLOCK = 1 << 16


@dataclass(frozen=True)
class WanderStats:
    """Beam-centre fluctuation: per-axis standard deviation and mean offset."""

    sigma: float
    d: float = 0.0

    def __post_init__(self):
        if not (self.sigma >= 0 and self.d >= 0):
            raise DomainError("sigma and d must be non-negative")
        if not (math.isfinite(self.sigma) and math.isfinite(self.d)):
            raise DomainError("sigma and d must be finite")

    @property
    def deterministic(self) -> bool:
        return self.sigma == 0


def _block_generator(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def sample_deflection(n: int, wander: WanderStats, seed: int, n_jobs: int = 1) -> np.ndarray:
    """Draw ``n`` beam-deflection distances ``r`` from the 2-D Gaussian model.

    The result is a deterministic function of ``(n, wander, seed)``; block
    ``i`` always uses stream ``(seed, i)`` whatever ``n_jobs`` is.
    """
    if n < 1:
        raise DomainError("need at least one sample")
    if wander.deterministic:
        return np.full(n, wander.d)
    starts = list(range(0, n, SAMPLE_BLOCK))

    def draw(i):
        size = min(SAMPLE_BLOCK, n - starts[i])
        xy = _block_generator(seed, i).standard_normal((size, 2)) * wander.sigma
        return np.hypot(xy[:, 0] + wander.d, xy[:, 1])

    if n_jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            blocks = list(pool.map(draw, range(len(starts))))
    else:
        blocks = [draw(i) for i in range(len(starts))]
    return np.concatenate(blocks)


@dataclass(frozen=True)
class ConstantChannel:
    """Deterministic channel with a fixed transmission coefficient ``t``."""

    t: float

    def __post_init__(self):
        if not 0 <= self.t <= 1:
            raise DomainError("transmission coefficient must lie in [0, 1]")

    def moment(self, k, spec=None) -> float:
        return float(self.t) ** k

    def expect(self, func, spec=None):
        out = np.asarray(func(np.array([self.t])), dtype=float)
        return out[0]

    def variance_t(self, spec=None) -> float:
        return 0.0

    def variance_eta(self, spec=None) -> float:
        return 0.0


@dataclass(frozen=True)
class Pdtc:
    """Log-negative generalised Rice distribution of ``T`` on ``[0, T0]``."""

    model: ApproxModel
    wander: WanderStats

    @classmethod
    def from_geometry(cls, geom: ApertureBeam, wander: WanderStats) -> "Pdtc":
        return cls(fit_approx_model(geom), wander)

    @classmethod
    def reference_channel(cls, d: float = 0.0) -> "Pdtc":
        """W = 1.1a, sigma = 28.5a; about 32 dB mean loss."""
        return cls.from_geometry(ApertureBeam(1.0, 1.1), WanderStats(28.5, d))

    @property
    def t0(self) -> float:
        return self.model.t0

    @property
    def theta0(self) -> float:
        return -math.log(self.model.t0_sq)

    # -- maps between r and T -------------------------------------------------

    def t_of_r(self, r):
        r = np.asarray(r, dtype=float)
        return self.t0 * np.exp(-0.5 * (r / self.model.scale_r) ** self.model.shape_lambda)

    def r_of_t(self, t):
        return r_of_t(t, self.model)

    def rice_pdf(self, r):
        """Density of the deflection distance ``r``."""
        s2 = self.wander.sigma**2
        d = self.wander.d
        r = np.asarray(r, dtype=float)
        return r / s2 * special.i0e(r * d / s2) * np.exp(-((r - d) ** 2) / (2 * s2))

    @property
    def r_max(self) -> float:
        return self.wander.d + RICE_TRUNCATION_SIGMAS * self.wander.sigma

    def _break_points(self, hi):
        R, s, d = self.model.scale_r, self.wander.sigma, self.wander.d
        pts = {R * f for f in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)}
        pts.update(d + k * s for k in range(-4, 5))
        return sorted(p for p in pts if 0 < p < hi)

    # -- densities -------------------------------------------------------------

    def _t_times_pdf(self, log_ratio):
        """``T * pdf(T)`` as a function of ``L = 2 ln(T0 / T)``."""
        lam, R = self.model.shape_lambda, self.model.scale_r
        s2 = self.wander.sigma**2
        d = self.wander.d
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = R * log_ratio ** (1.0 / lam)
            return (
                2.0 * R**2 / (s2 * lam)
                * log_ratio ** (2.0 / lam - 1.0)
                * special.i0e(rho * d / s2)
                * np.exp(-((rho - d) ** 2) / (2 * s2))
            )

    def _require_spread(self):
        if self.wander.deterministic:
            raise DomainError("sigma = 0: the transmission is deterministic and has no density")

    def pdf(self, t):
        """Density of ``T``; zero outside ``(0, T0]``.

        At ``T = T0`` the closed form may diverge and ``inf`` is returned.
        """
        self._require_spread()
        t_arr = np.asarray(t, dtype=float)
        inside = (t_arr > 0) & (t_arr <= self.t0)
        safe = np.where(inside, t_arr, self.t0)
        log_ratio = np.maximum(2.0 * (math.log(self.t0) - np.log(safe)), 0.0)
        out = np.where(inside, self._t_times_pdf(log_ratio) / safe, 0.0)
        return float(out) if out.ndim == 0 else out

    def weibull_pdf(self, t):
        """Centred-wandering (``d = 0``) density, in its own closed form."""
        self._require_spread()
        lam, R, s2 = self.model.shape_lambda, self.model.scale_r, self.wander.sigma**2
        t_arr = np.asarray(t, dtype=float)
        inside = (t_arr > 0) & (t_arr <= self.t0)
        safe = np.where(inside, t_arr, self.t0)
        L = np.maximum(2.0 * (math.log(self.t0) - np.log(safe)), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (
                2.0 * R**2 / (s2 * lam * safe)
                * L ** (2.0 / lam - 1.0)
                * np.exp(-(R**2) * L ** (2.0 / lam) / (2 * s2))
            )
        out = np.where(inside, val, 0.0)
        return float(out) if out.ndim == 0 else out

    def density_log_t(self, u):
        """Density of ``ln T`` at ``u`` (i.e. ``T pdf(T)`` with ``T = e^u``).

        Stays finite where ``T`` itself would underflow.
        """
        self._require_spread()
        u = np.asarray(u, dtype=float)
        log_t0 = math.log(self.t0)
        L = 2.0 * (log_t0 - u)
        out = np.where(L >= 0, self._t_times_pdf(np.maximum(L, 0.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def log_loss_pdf(self, theta):
        """Density of the log-loss ``theta = -ln T^2``; zero below ``theta0``."""
        self._require_spread()
        lam, R = self.model.shape_lambda, self.model.scale_r
        s2, d = self.wander.sigma**2, self.wander.d
        theta = np.asarray(theta, dtype=float)
        x = theta - self.theta0
        xs = np.maximum(x, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = R * xs ** (1.0 / lam)
            val = (
                R**2 / (s2 * lam)
                * xs ** (2.0 / lam - 1.0)
                * special.i0e(rho * d / s2)
                * np.exp(-((rho - d) ** 2) / (2 * s2))
            )
        out = np.where(x >= 0, val, 0.0)
        return float(out) if out.ndim == 0 else out

    def log_loss_weibull_params(self):
        """``(shape, scale)`` of the Weibull law of ``theta - theta0`` when ``d = 0``.

        Shape is ``2/lambda`` and scale ``(sqrt(2) sigma / R)^lambda``.
        """
        if self.wander.d != 0:
            raise DomainError("log-losses are Weibull distributed only for d = 0")
        lam = self.model.shape_lambda
        return 2.0 / lam, (math.sqrt(2.0) * self.wander.sigma / self.model.scale_r) ** lam

    # -- averages --------------------------------------------------------------

    def expect(self, func, spec: QuadratureSpec = FINE_QUADRATURE, r_hi: float | None = None):
        """Average of ``func(T)`` over the distribution (``r`` measure).

        ``func`` is vectorised and may return ``(n, k)`` arrays.  With ``r_hi``
        the average is restricted to deflections ``r < r_hi`` (unnormalised).
        """
        return self.expect_r(lambda r: func(self.t_of_r(r)), spec, r_hi)

    def expect_r(self, func_r, spec: QuadratureSpec = FINE_QUADRATURE, r_hi: float | None = None):
        """Like :meth:`expect` but ``func_r`` receives deflections ``r``."""
        if self.wander.deterministic:
            val = np.asarray(func_r(np.array([self.wander.d])), dtype=float)[0]
            if r_hi is not None and not self.wander.d < r_hi:
                return 0.0 * val
            return val
        hi = self.r_max if r_hi is None else min(r_hi, self.r_max)
        # the truncation rule applies on both sides of the Rice peak; a wide
        # empty segment in front of a narrow peak would hide its left tail
        lo = max(0.0, self.wander.d - RICE_TRUNCATION_SIGMAS * self.wander.sigma)
        if hi <= lo:
            return 0.0 * np.asarray(func_r(np.array([0.0])), dtype=float)[0]

        def integrand(r):
            w = self.rice_pdf(r)
            vals = np.asarray(func_r(r), dtype=float)
            return vals * (w if vals.ndim == 1 else w[:, None])

        pts = [x for x in self._break_points(hi) if x > lo]
        value, _ = integrate(integrand, lo, hi, spec, points=pts)
        return value

    def moment(self, k, spec: QuadratureSpec = FINE_QUADRATURE) -> float:
        """``<T^k>``."""
        if k < 1:
            raise DomainError("moment order must be >= 1")
        return float(self.expect(lambda t: t**k, spec))

    def variance_of_power(self, k, spec: QuadratureSpec = FINE_QUADRATURE, r_hi=None, mass: float = 1.0) -> float:
        """Variance of ``T^k``, optionally conditioned on ``r < r_hi`` with
        probability ``mass``.

        Works with ``T^k / T0^k - 1 = expm1(-k x / 2)``, ``x = (r/R)^lambda``,
        so narrow distributions keep their relative precision.
        """
        if self.wander.deterministic:
            return 0.0
        lam, R = self.model.shape_lambda, self.model.scale_r

        def h(r):
            return np.expm1(-0.5 * k * (r / R) ** lam)

        mean_h = self.expect_r(h, spec, r_hi) / mass
        centred = self.expect_r(lambda r: (h(r) - mean_h) ** 2, spec, r_hi) / mass
        return float(self.t0 ** (2 * k) * centred)

    def variance_t(self, spec: QuadratureSpec = FINE_QUADRATURE) -> float:
        """``<T^2> - <T>^2``."""
        return self.variance_of_power(1, spec)

    def variance_eta(self, spec: QuadratureSpec = FINE_QUADRATURE) -> float:
        """Variance of the transmission efficiency ``eta = T^2``."""
        return self.variance_of_power(2, spec)

    # -- exceedance ------------------------------------------------------------

    def exceedance(self, t, method: str = "exact", spec: QuadratureSpec = FINE_QUADRATURE):
        """Probability that the transmission coefficient exceeds ``t``.

        ``method`` is ``"exact"`` (incomplete Weber integral), ``"approx"``
        (two-point fit of the Rice distribution function) or ``"closed_d0"``
        (centred wandering only).  ``"exact"`` with ``d = 0`` uses the closed
        form, which is exact there.
        """
        if method not in ("exact", "approx", "closed_d0"):
            raise DomainError(f"unknown exceedance method {method!r}")
        if method == "closed_d0" and self.wander.d != 0:
            raise DomainError("closed_d0 exceedance requires d = 0")
        t_arr = np.asarray(t, dtype=float)
        out = np.array([self._exceedance_scalar(float(v), method, spec) for v in t_arr.ravel()])
        out = out.reshape(t_arr.shape)
        return float(out) if out.ndim == 0 else out

    def _exceedance_scalar(self, t, method, spec):
        if t <= 0:
            return 1.0
        if t >= self.t0:
            return 0.0
        r = self.r_of_t(t)
        s, d = self.wander.sigma, self.wander.d
        if self.wander.deterministic:
            return 1.0 if d < r else 0.0
        x = d**2 / (2 * s**2)
        # x == 0 also covers offsets so small that d^2 underflows
        if x == 0 or method == "closed_d0":
            return float(-math.expm1(-(r**2) / (2 * s**2)))
        if method == "exact":
            return min(1.0, incomplete_weber_q0_scaled(x, r * d / s**2, spec))
        f0, mu, log_term = clipped_gaussian_fit(r**2 / s**2)
        if log_term == 0:
            # vanishing disk: Gaussian dependence on the offset
            return float(f0 * math.exp(-(d**2) / (2 * s**2)))
        big_d = r * log_term ** (-1.0 / mu)
        return float(f0 * math.exp(-((d / big_d) ** mu)))

    # -- sampling --------------------------------------------------------------

    def sample(
        self,
        n: int,
        seed: int,
        use_exact_t: bool = False,
        n_jobs: int = 1,
        geom: ApertureBeam | None = None,
    ) -> np.ndarray:
        """Draw ``n`` transmission coefficients.

        Uses the analytic ``T(r)`` law unless ``use_exact_t`` is set, in which
        case ``geom`` (the generating geometry) is needed and every sample costs
        one quadrature.
        """
        r = sample_deflection(n, self.wander, seed, n_jobs)
        if not use_exact_t:
            return self.t_of_r(r)
        if geom is None:
            raise DomainError("use_exact_t needs the aperture geometry")
        return np.sqrt([transmission_exact(float(v), geom) for v in r])


def sigma_from_pointing(sigma_theta: float, z: float) -> float:
    """Deflection spread from source-pointing jitter: ``sigma_theta * z``."""
    if sigma_theta < 0 or z < 0:
        raise DomainError("pointing jitter and distance must be non-negative")
    return sigma_theta * z


def sigma_from_turbulence(cn2: float, z: float, w0: float) -> float:
    """Weak-turbulence wandering: ``sqrt(1.919 Cn^2 z^3 (2 W0)^(-1/3))``.

    Units must be consistent (e.g. ``cn2`` in m^-2/3, ``z`` and ``w0`` in m).
    """
    if cn2 < 0 or not (z > 0 and w0 > 0):
        raise DomainError("need cn2 >= 0 and positive z, w0")
    return math.sqrt(1.919 * cn2 * z**3 * (2.0 * w0) ** (-1.0 / 3.0))


def combine_sigmas(*sigmas: float) -> float:
    """Independent deflection sources add in variance."""
    return math.sqrt(sum(s * s for s in sigmas))
