"""Normally-ordered moments through a fluctuating-loss channel.

A channel with random transmission coefficient ``T`` maps the moments
``M[n, m] = <a^dag^n a^m>`` to ``<T^(n+m)> M[n, m]``.  The module also builds
moment tables of standard test states, plus a Fock-space construction of the
displaced squeezed state used to check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import DomainError, TruncationError

__all__ = [
    "MomentTable",
    "propagate_moments",
    "coherent_moments",
    "displaced_squeezed_moments",
    "squeeze_parameter_from_db",
    "displaced_squeezed_fock",
    "fock_moments",
    "MAX_TABLE_ORDER",
]

MAX_TABLE_ORDER = 40


@dataclass(frozen=True)
class MomentTable:
    """Square table ``entries[n, m] = <a^dag^n a^m>`` for ``n, m <= nmax``."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise DomainError("moment table must be square")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def nmax(self) -> int:
        return self.entries.shape[0] - 1

    def __getitem__(self, nm):
        return self.entries[nm]

    def check(self, atol: float = 1e-9):
        """Raise ``DomainError`` unless trace, Hermiticity and ``<n> >= |<a>|^2`` hold."""
        e = self.entries
        scale = max(1.0, float(np.max(np.abs(e))))
        if abs(e[0, 0] - 1) > atol:
            raise DomainError("M[0,0] must be 1")
        if np.max(np.abs(e - e.conj().T)) > atol * scale:
            raise DomainError("moment table is not Hermitian")
        if self.nmax >= 1 and e[1, 1].real < abs(e[0, 1]) ** 2 - atol * scale:
            raise DomainError("<n> < |<a>|^2: table is unphysical")
        return self

    @property
    def mean_n(self) -> float:
        return float(self.entries[1, 1].real)

    @property
    def mean_x(self) -> float:
        """``<X>`` for ``X = a + a^dag``."""
        return float(2.0 * self.entries[0, 1].real)

    @property
    def quad_var_normal(self) -> float:
        """Normally-ordered variance ``<:dX^2:>`` of ``X = a + a^dag``."""
        e = self.entries
        return float((e[0, 2] + e[2, 0] + 2 * e[1, 1]).real - self.mean_x**2)

    @property
    def mandel_q(self) -> float:
        e = self.entries
        n = e[1, 1].real
        return float((e[2, 2].real - n**2) / n)


def propagate_moments(table: MomentTable, channel, spec=None) -> MomentTable:
    """Scale each ``M[n, m]`` by ``<T^(n+m)>`` of ``channel``.

    ``channel`` is anything with a ``moment(k)`` method (a ``Pdtc``, a
    ``ConstantChannel`` or a post-selected distribution).
    """
    nmax = table.nmax
    kwargs = {} if spec is None else {"spec": spec}
    factors = np.ones(2 * nmax + 1)
    for k in range(1, 2 * nmax + 1):
        factors[k] = channel.moment(k, **kwargs)
    idx = np.add.outer(np.arange(nmax + 1), np.arange(nmax + 1))
    out = table.entries * factors[idx]
    out[0, 0] = 1.0
    return MomentTable(out)


def coherent_moments(alpha: complex, nmax: int) -> MomentTable:
    """``M[n, m] = conj(alpha)^n alpha^m``."""
    _check_order(nmax)
    n = np.arange(nmax + 1)
    return MomentTable(np.outer(np.conj(alpha) ** n, alpha**n))


def squeeze_parameter_from_db(squeeze_db: float) -> float:
    """Squeezing parameter ``s`` with ``exp(-2s) = 10^(-dB/10)``."""
    return squeeze_db * math.log(10.0) / 20.0


def _check_order(nmax):
    if not 0 <= nmax <= MAX_TABLE_ORDER:
        raise DomainError(f"table order must lie in [0, {MAX_TABLE_ORDER}]")


def displaced_squeezed_moments(alpha: float, squeeze_db: float, nmax: int = 4) -> MomentTable:
    """Moments of ``D(alpha) S(s)|0>`` squeezed along the displacement.

    For real ``alpha`` the ``X = a + a^dag`` quadrature carries both the
    displacement and the reduced noise (amplitude squeezing):
    ``<:dX^2:> = exp(-2s) - 1`` and ``<n> = alpha^2 + sinh^2 s``.

    Uses the Gaussian generating function
    ``exp(conj(alpha) u + alpha v + N u v + conj(M) u^2/2 + M v^2/2)`` with
    ``N = sinh^2 s`` and ``M = <aa>_c = -sinh s cosh s``.
    """
    _check_order(nmax)
    if alpha < 0:
        raise DomainError("alpha must be non-negative (displacement along the squeezed axis)")
    s = squeeze_parameter_from_db(squeeze_db)
    big_n = math.sinh(s) ** 2
    big_m = -math.sinh(s) * math.cosh(s)
    fact = [math.factorial(i) for i in range(2 * nmax + 1)]
    out = np.zeros((nmax + 1, nmax + 1), dtype=complex)
    for n in range(nmax + 1):
        for m in range(nmax + 1):
            total = 0.0
            for p in range(min(n, m) + 1):
                for i in range((n - p) // 2 + 1):
                    for j in range((m - p) // 2 + 1):
                        du = n - p - 2 * i
                        dv = m - p - 2 * j
                        total += (
                            alpha**du / fact[du]
                            * alpha**dv / fact[dv]
                            * big_n**p / fact[p]
                            * (big_m / 2) ** i / fact[i]
                            * (big_m / 2) ** j / fact[j]
                        )
            out[n, m] = fact[n] * fact[m] * total
    return MomentTable(out)


@lru_cache(maxsize=8)
def _fock_state(alpha: float, squeeze_db: float, cutoff: int):
    # build with head-room so truncation artefacts of expm sit far above cutoff
    dim = cutoff + 200
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    ad = a.T
    s = squeeze_parameter_from_db(squeeze_db)
    squeeze = expm(0.5 * s * (a @ a - ad @ ad))
    displace = expm(alpha * (ad - a))
    vac = np.zeros(dim)
    vac[0] = 1.0
    psi = displace @ (squeeze @ vac)
    return psi


def displaced_squeezed_fock(alpha: float, squeeze_db: float, cutoff: int = 400, norm_tol: float = 1e-10):
    """State vector of the displaced squeezed state truncated at ``cutoff`` photons.

    Raises ``TruncationError`` if the kept norm falls short of ``1 - norm_tol``.
    """
    psi = _fock_state(float(alpha), float(squeeze_db), int(cutoff))[: cutoff + 1].copy()
    kept = float(psi @ psi)
    if kept < 1.0 - norm_tol:
        raise TruncationError(f"cutoff {cutoff} keeps norm {kept:.3e}; increase the cutoff")
    return psi


def fock_moments(psi: np.ndarray, nmax: int) -> MomentTable:
    """Normally-ordered moments of a pure state given in the Fock basis."""
    dim = psi.shape[0]
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    powers = [np.eye(dim)]
    for _ in range(nmax):
        powers.append(a @ powers[-1])
    vecs = [p @ psi for p in powers]  # a^m |psi>
    out = np.array([[np.vdot(vecs[n], vecs[m]) for m in range(nmax + 1)] for n in range(nmax + 1)])
    return MomentTable(out / np.vdot(psi, psi))
