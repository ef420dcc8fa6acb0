"""Monte Carlo cross-checks of the analytic channel statistics.

Each check draws beam deflections, forms the empirical counterpart of an
analytic quantity and reports a z-score built from the sample's own
standard error.  Results are deterministic in ``(seed, n)`` and do not
depend on ``n_jobs``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .pdtc import Pdtc, sample_deflection
from .squeezing import postselect, tmin_of_exceedance

__all__ = [
    "McReport",
    "Z_THRESHOLD",
    "MIN_SURVIVORS",
    "MIN_SAMPLES",
    "verify_moment",
    "verify_exceedance",
    "verify_postselection",
    "run_suite",
]

Z_THRESHOLD = 3.0
# conditional means over fewer survivors than this are reported INCONCLUSIVE
MIN_SURVIVORS = 30
MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class McReport:
    quantity_name: str
    analytic: float
    empirical: float
    std_error: float
    n_samples: int
    z_score: float
    passed: bool
    verdict: str

    FIELDS = (
        "quantity_name", "analytic", "empirical", "std_error",
        "n_samples", "z_score", "passed", "verdict",
    )

    def as_row(self):
        return [getattr(self, f) for f in self.FIELDS]


def _report(name, analytic, values, z_threshold, n_total=None):
    """Compare ``analytic`` with the sample mean of ``values``."""
    n = values.size
    if n < MIN_SURVIVORS and n_total is not None:
        emp = float(np.mean(values)) if n else math.nan
        return McReport(name, float(analytic), emp, math.nan, int(n), math.nan, False, "INCONCLUSIVE")
    emp = float(np.mean(values))
    # a constant sample has no spread, but rounding in the mean would give std ~ 1e-18
    se = 0.0 if np.ptp(values) == 0 else float(np.std(values, ddof=1) / math.sqrt(n))
    diff = emp - analytic
    if se > 0:
        z = diff / se
    else:
        # a degenerate sample: only an exact match (up to summation rounding) passes
        z = 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(analytic)) else math.copysign(math.inf, diff)
    passed = abs(z) <= z_threshold
    return McReport(name, float(analytic), emp, se, int(n), float(z), passed, "PASS" if passed else "FAIL")


def _draw(p, n, seed, n_jobs):
    if n < MIN_SAMPLES:
        raise DomainError(f"need at least {MIN_SAMPLES} samples")
    return sample_deflection(n, p.wander, seed, n_jobs)


def _below(p, r, t):
    """Indicator ``T > t`` expressed in deflections, ``r < r(t)``."""
    if t <= 0:
        return np.ones(r.size, dtype=bool)
    if t >= p.t0:
        return np.zeros(r.size, dtype=bool)
    return r < p.r_of_t(t)


def _moment_check(p, r, k, z_threshold):
    return _report(f"moment_T^{k}", p.moment(k), p.t_of_r(r) ** k, z_threshold)


def _exceedance_check(p, r, t, z_threshold):
    hits = _below(p, r, t).astype(float)
    return _report(f"exceedance(T={t:.6g})", p.exceedance(t, "exact"), hits, z_threshold)


def _postselection_check(p, r, t_min, k, z_threshold):
    survivors = p.t_of_r(r[_below(p, r, t_min)]) ** k
    analytic = postselect(p, t_min).moment(k) if t_min < p.t0 else math.nan
    return _report(f"postselected_T^{k}(T>{t_min:.6g})", analytic, survivors, z_threshold, n_total=r.size)


def verify_moment(k: int, p: Pdtc, n: int, seed: int, n_jobs: int = 1, z_threshold: float = Z_THRESHOLD) -> McReport:
    """``<T^k>`` against the sample mean of ``T^k``."""
    return _moment_check(p, _draw(p, n, seed, n_jobs), k, z_threshold)


def verify_exceedance(t: float, p: Pdtc, n: int, seed: int, n_jobs: int = 1, z_threshold: float = Z_THRESHOLD) -> McReport:
    """``P(T > t)`` against the fraction of samples above ``t``."""
    return _exceedance_check(p, _draw(p, n, seed, n_jobs), t, z_threshold)


def verify_postselection(
    t_min: float, k: int, p: Pdtc, n: int, seed: int, n_jobs: int = 1, z_threshold: float = Z_THRESHOLD
) -> McReport:
    """Post-selected ``<T^k | T > t_min>`` against the survivors' mean.

    Fewer than :data:`MIN_SURVIVORS` survivors give verdict ``INCONCLUSIVE``.
    """
    return _postselection_check(p, _draw(p, n, seed, n_jobs), t_min, k, z_threshold)


def _thresholds(p, levels):
    if p.wander.deterministic:
        return [p.t0 * f for f in levels]
    return [tmin_of_exceedance(f, p, numeric=True) for f in levels]


def run_suite(
    p: Pdtc,
    n: int,
    seed: int,
    n_jobs: int = 1,
    moments=(1, 2, 4),
    exceedance_levels=(0.2, 0.05, 0.01, 0.003, 0.001),
    postselection_levels=(0.02, 0.005, 0.002),
    postselection_k: int = 2,
    z_threshold: float = Z_THRESHOLD,
):
    """Moment, exceedance and post-selection checks on one shared sample.

    Thresholds are placed where the exceedance equals the given levels, so
    the checks probe the same quantiles whatever the channel parameters.
    The defaults stay in the upper tail, where ``T`` remains representable
    even for strongly lossy channels.
    """
    r = _draw(p, n, seed, n_jobs)
    reports = [_moment_check(p, r, k, z_threshold) for k in moments]
    reports += [_exceedance_check(p, r, t, z_threshold) for t in _thresholds(p, exceedance_levels)]
    reports += [
        _postselection_check(p, r, t, postselection_k, z_threshold)
        for t in _thresholds(p, postselection_levels)
    ]
    return reports
