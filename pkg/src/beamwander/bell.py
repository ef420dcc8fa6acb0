"""CHSH test with a polarisation-entangled down-conversion source.

The source emits the two-mode squeezed state
``(1 - tanh^2 chi) sum_n tanh^n chi sum_m (-1)^m |n-m, m>_A |m, n-m>_B``
(``H``/``V`` modes on each side, unnormalised amplitude shown per sector).
Each side rotates its polariser by ``theta`` and sends the two outputs,
called ``"T"`` and ``"R"``, to on/off detectors with efficiency ``eta``
and ``N`` mean noise counts.  The atmospheric channel multiplies the
efficiency by ``T^2`` on both sides.

Two independent routes are provided: closed-form click probabilities and a
brute-force Fock-space evaluation (:func:`click_probability_oracle`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from math import comb, factorial

import numpy as np

from .errors import DomainError, TruncationError, UndefinedCorrelationError

__all__ = [
    "PORTS",
    "PAIRS",
    "OPTIMAL_ANGLES",
    "RECEIVER_ETA",
    "DEFAULT_NOISE_N",
    "EXPERIMENT_NOISE_N",
    "PdcBellSetup",
    "c_coeffs",
    "click_probability",
    "click_probability_oracle",
    "correlation",
    "bell_parameter",
    "bell_scan",
]

PORTS = ("T", "R")
PAIRS = (("T", "T"), ("R", "R"), ("T", "R"), ("R", "T"))
OPTIMAL_ANGLES = (0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8)

# 9 dB receiver loss, including the 50 % beam splitter of a shared telescope
RECEIVER_ETA = 0.125
DEFAULT_NOISE_N = 1e-5
EXPERIMENT_NOISE_N = 5e-7


@dataclass(frozen=True)
class PdcBellSetup:
    """Source squeezing ``chi``, receiver efficiency ``eta``, noise ``noise_n``
    and CHSH angles ``(theta_A1, theta_B1, theta_A2, theta_B2)``."""

    chi: float
    eta: float = RECEIVER_ETA
    noise_n: float = DEFAULT_NOISE_N
    angles: tuple = OPTIMAL_ANGLES

    def __post_init__(self):
        if not (self.chi >= 0 and math.isfinite(self.chi)):
            raise DomainError("chi must be finite and non-negative")
        if not 0 <= self.eta <= 1:
            raise DomainError("eta must lie in [0, 1]")
        if not (self.noise_n >= 0 and math.isfinite(self.noise_n)):
            raise DomainError("noise_n must be finite and non-negative")
        if len(self.angles) != 4:
            raise DomainError("need four angles (theta_A1, theta_B1, theta_A2, theta_B2)")
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))

    @classmethod
    def experiment(cls, chi: float) -> "PdcBellSetup":
        """Receiver with the lower noise level of a dark-count-limited detector."""
        return cls(chi, RECEIVER_ETA, EXPERIMENT_NOISE_N)

    @property
    def tanh2(self) -> float:
        return math.tanh(self.chi) ** 2


def _check_pair(pair):
    pair = tuple(pair)
    if len(pair) != 2 or any(p not in PORTS for p in pair):
        raise DomainError(f"pair must be two ports from {PORTS}, got {pair!r}")
    return pair


def c_coeffs(t, setup: PdcBellSetup, dtheta: float):
    """Coefficients ``(c0, c1, c_same, c_diff)`` for transmission coefficient ``t``.

    With ``e = eta t^2`` and ``q = tanh^2 chi``::

        c0     = (e^2 q - (1 + (e - 1) q)^2)^2
        c1     = e (1 - e) (1 - q) q (e^2 q - (1 + (e - 1) q)^2)
        c_same = e^2 q (1 - q)^2 ((1 - e)^2 q - sin^2 dtheta)
        c_diff = e^2 q (1 - q)^2 ((1 - e)^2 q - cos^2 dtheta)
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > 1):
        raise DomainError("transmission coefficient must lie in [0, 1]")
    q = setup.tanh2
    e = setup.eta * t**2
    inner = e**2 * q - (1.0 + (e - 1.0) * q) ** 2
    c0 = inner**2
    c1 = e * (1.0 - e) * (1.0 - q) * q * inner
    pre = e**2 * q * (1.0 - q) ** 2
    c_same = pre * ((1.0 - e) ** 2 * q - math.sin(dtheta) ** 2)
    c_diff = pre * ((1.0 - e) ** 2 * q - math.cos(dtheta) ** 2)
    if t.ndim == 0:
        return float(c0), float(c1), float(c_same), float(c_diff)
    return c0, c1, c_same, c_diff


def _pair_probability(t, pair, setup, theta_a, theta_b):
    """Coincidence probability at fixed ``t`` (vectorised over ``t``).

    Algebraically the closed form
    ``(1-q)^4 [e^{-2N}/(c0+2c1+cp) - 2e^{-3N}/(c0+c1) + e^{-4N}/c0]``,
    regrouped so the three nearly equal terms never cancel numerically.
    """
    c0, c1, cs, cd = c_coeffs(t, setup, theta_a - theta_b)
    cp = cs if pair[0] == pair[1] else cd
    k = (1.0 - setup.tanh2) ** 4
    x2 = c0 + 2.0 * c1 + cp
    x3 = c0 + c1
    signal = -k * (cp * (c0 - c1) - 2.0 * c1**2) / (x2 * x3 * c0)
    cross = -k * c1 / (x3 * c0)
    full = k / c0
    u = -math.expm1(-setup.noise_n)
    return math.exp(-2.0 * setup.noise_n) * (signal + 2.0 * u * cross + u * u * full)


def _average(channel, func):
    """``<func(T)>`` for a constant coefficient (float) or a distribution."""
    if hasattr(channel, "expect"):
        return np.asarray(channel.expect(func), dtype=float)
    t = float(channel)
    return np.asarray(func(np.array([t])), dtype=float)[0]


def click_probability(pair, theta_a: float, theta_b: float, setup: PdcBellSetup, channel) -> float:
    """Probability of a coincidence between port ``pair[0]`` of Alice and
    ``pair[1]`` of Bob.

    ``channel`` is either a fixed transmission coefficient or an object with
    an ``expect`` method (``Pdtc``, ``ConstantChannel``); the probability is
    averaged over the channel.
    """
    pair = _check_pair(pair)
    return float(_average(channel, lambda t: _pair_probability(t, pair, setup, theta_a, theta_b)))


def _probabilities(setup, channel, settings):
    """All pair probabilities for each ``(theta_a, theta_b)`` in ``settings``,
    averaged in a single vector-valued pass.  Shape ``(len(settings), 4)``."""

    def func(t):
        cols = [
            _pair_probability(t, pair, setup, ta, tb)
            for ta, tb in settings
            for pair in PAIRS
        ]
        return np.stack(cols, axis=-1)

    return np.asarray(_average(channel, func)).reshape(len(settings), len(PAIRS))


def _correlation_from(p):
    same = p[0] + p[1]
    diff = p[2] + p[3]
    total = same + diff
    if not total > 0:
        raise UndefinedCorrelationError("no coincidences: correlation undefined (chi = 0 and N = 0?)")
    return float((same - diff) / total)


def correlation(theta_a: float, theta_b: float, setup: PdcBellSetup, channel) -> float:
    """Correlation ``(P_same - P_diff) / (P_same + P_diff)``."""
    return _correlation_from(_probabilities(setup, channel, [(theta_a, theta_b)])[0])


def bell_parameter(setup: PdcBellSetup, channel) -> float:
    """CHSH combination ``|E(a1,b1) - E(a1,b2)| + |E(a2,b2) + E(a2,b1)|``."""
    a1, b1, a2, b2 = setup.angles
    p = _probabilities(setup, channel, [(a1, b1), (a1, b2), (a2, b2), (a2, b1)])
    e11, e12, e22, e21 = (_correlation_from(row) for row in p)
    return abs(e11 - e12) + abs(e22 + e21)


def bell_scan(setup_template: PdcBellSetup, channel, chi_grid):
    """``[(chi, B), ...]`` over ``chi_grid`` with the other settings fixed."""
    grid = np.asarray(chi_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("chi_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("chi_grid must be strictly increasing")
    return [(float(c), bell_parameter(replace(setup_template, chi=float(c)), channel)) for c in grid]


# -- Fock-space oracle ----------------------------------------------------------


def _sector_operator(mat, n):
    """Action of the one-photon map ``mat`` on the ``n``-photon sector of two
    modes, in the basis ``|k, n-k>`` (``k`` photons in mode 0)."""
    out = np.zeros((n + 1, n + 1))
    # binomial expansions of (m00 x + m10 y)^k and (m01 x + m11 y)^(n-k) in powers of x
    for k in range(n + 1):
        left = np.array([comb(k, i) * mat[0, 0] ** i * mat[1, 0] ** (k - i) for i in range(k + 1)])
        right = np.array(
            [comb(n - k, i) * mat[0, 1] ** i * mat[1, 1] ** (n - k - i) for i in range(n - k + 1)]
        )
        coef = np.convolve(left, right)
        norm = [math.sqrt(factorial(j) * factorial(n - j) / (factorial(k) * factorial(n - k))) for j in range(n + 1)]
        out[:, k] = coef * norm
    return out


def _no_click_map(theta, eff, ports):
    """One-photon map of the no-click operator ``(1 - eff)^(n_port)`` summed over ``ports``."""
    vec = {"T": np.array([math.cos(theta), math.sin(theta)]), "R": np.array([-math.sin(theta), math.cos(theta)])}
    mat = np.eye(2)
    for p in ports:
        mat -= eff * np.outer(vec[p], vec[p])
    return mat


def click_probability_oracle(
    pair,
    theta_a: float,
    theta_b: float,
    setup: PdcBellSetup,
    t: float,
    nmax: int = 24,
    sectors=None,
    norm_tol: float = 1e-10,
) -> float:
    """Coincidence probability by explicit summation over photon-number sectors.

    The detectors are modelled as on/off POVMs: the no-click element of a
    set of ports is ``exp(-N) (1 - eta T^2)^(photons in those ports)`` per
    port, and a click is one minus that.  The state is truncated at ``nmax``
    photon pairs; ``sectors`` restricts the sum to the given pair numbers
    (unnormalised) for analysing individual components.

    Raises
    ------
    TruncationError
        If the sectors up to ``nmax`` hold less than ``1 - norm_tol`` of the norm.
    """
    pair = _check_pair(pair)
    if nmax < 4:
        raise DomainError("nmax must be at least 4")
    if not 0 <= t <= 1:
        raise DomainError("transmission coefficient must lie in [0, 1]")
    q = setup.tanh2
    kept = (1.0 - q) ** 2 * sum((n + 1) * q**n for n in range(nmax + 1))
    if kept < 1.0 - norm_tol:
        raise TruncationError(f"nmax={nmax} keeps norm {kept:.3e}; increase nmax")
    eff = setup.eta * t**2
    if sectors is None:
        sectors = range(nmax + 1)
    sectors = [n for n in sectors if 0 <= n <= nmax]
    amp = 1.0 / math.cosh(setup.chi) ** 2
    tanh = math.tanh(setup.chi)
    states = {}
    for n in sectors:
        psi = np.zeros((n + 1, n + 1))
        for m in range(n + 1):
            psi[n - m, m] = amp * tanh**n * (-1) ** m
        states[n] = psi

    cache = {}

    def sector_op(theta, ports, n):
        key = (theta, ports, n)
        if key not in cache:
            cache[key] = _sector_operator(_no_click_map(theta, eff, ports), n)
        return cache[key]

    def no_click(ports_a, ports_b):
        total = 0.0
        for n, psi in states.items():
            ga = sector_op(theta_a, ports_a, n)
            gb = sector_op(theta_b, ports_b, n)
            total += float(np.sum(psi * (ga @ psi @ gb.T)))
        return total

    i_a, i_b = pair
    j_a = "R" if i_a == "T" else "T"
    j_b = "R" if i_b == "T" else "T"
    big_n = setup.noise_n
    # click on i and no click on j, on both sides, by inclusion-exclusion
    return (
        math.exp(-2 * big_n) * no_click((j_a,), (j_b,))
        - math.exp(-3 * big_n) * (no_click((i_a, j_a), (j_b,)) + no_click((j_a,), (i_b, j_b)))
        + math.exp(-4 * big_n) * no_click(("T", "R"), ("T", "R"))
    )
