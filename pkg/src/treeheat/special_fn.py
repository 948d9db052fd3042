"""Scalar special functions for heat diffusion on the integers.

The heat kernel of the lattice Laplacian ``f(j) - (f(j+1) + f(j-1))/2`` is
``e^{-t} I_|j|(t)``.  It is evaluated here by Miller's backward recurrence on
the modified Bessel functions, normalised with the generating-function
identity ``I_0(t) + 2 sum_{k>=1} I_k(t) = e^t``.  Everything is returned as
natural logarithms because ``e^{-t} I_j(t)`` leaves the double range long
before the regimes of interest (``t ~ 10^3``, ``j ~ t``).

The auxiliary functions ``xi, zeta, zeta', zeta'', psi`` are written through
``arcsinh(1/z)``, which is free of cancellation on all of ``(0, inf)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "DomainError",
    "LogVal",
    "log_heat_z_table",
    "heat_z",
    "heat_z_ratio_bound",
    "rounding_bound",
    "heat_z_tail_bound",
    "envelope_f",
    "log_envelope_f",
    "xi",
    "zeta",
    "zeta_prime",
    "zeta_second",
    "psi",
]

_RESCALE = 1e250
_LOG_RESCALE = math.log(_RESCALE)


class DomainError(ValueError):
    """Argument outside the domain of a function."""


@dataclass(frozen=True)
class LogVal:
    """A real number stored as ``sign * exp(log_mag)``.

    ``sign == 0`` encodes an exact zero; ``log_mag`` is then ignored.
    """

    sign: int
    log_mag: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign != 0 and math.isinf(self.log_mag) and self.log_mag < 0:
            object.__setattr__(self, "sign", 0)

    @classmethod
    def from_float(cls, x: float) -> "LogVal":
        if x == 0:
            return cls(0, -math.inf)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def from_log(cls, log_mag: float) -> "LogVal":
        """Positive value ``exp(log_mag)``."""
        if log_mag == -math.inf:
            return cls(0, -math.inf)
        return cls(1, float(log_mag))

    @property
    def log(self) -> float:
        """Natural log of the value; only defined for positive values."""
        if self.sign < 0:
            raise DomainError("log of a negative LogVal")
        return self.log_mag if self.sign > 0 else -math.inf

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_mag)

    def __mul__(self, other):
        if not isinstance(other, LogVal):
            other = LogVal.from_float(float(other))
        if self.sign == 0 or other.sign == 0:
            return LogVal(0, -math.inf)
        return LogVal(self.sign * other.sign, self.log_mag + other.log_mag)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, LogVal):
            other = LogVal.from_float(float(other))
        if other.sign == 0:
            raise ZeroDivisionError("LogVal division by zero")
        if self.sign == 0:
            return LogVal(0, -math.inf)
        return LogVal(self.sign * other.sign, self.log_mag - other.log_mag)

    def __neg__(self):
        return LogVal(-self.sign, self.log_mag)

    def __add__(self, other):
        if not isinstance(other, LogVal):
            other = LogVal.from_float(float(other))
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        hi, lo = (self, other) if self.log_mag >= other.log_mag else (other, self)
        d = lo.log_mag - hi.log_mag
        if hi.sign == lo.sign:
            return LogVal(hi.sign, hi.log_mag + math.log1p(math.exp(d)))
        if d == 0.0:
            return LogVal(0, -math.inf)
        return LogVal(hi.sign, hi.log_mag + math.log1p(-math.exp(d)))

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, LogVal):
            other = LogVal.from_float(float(other))
        return self + (-other)

    def __pow__(self, p: float):
        if self.sign < 0:
            raise DomainError("non-integer power of a negative LogVal")
        if self.sign == 0:
            return LogVal(0, -math.inf) if p > 0 else LogVal(1, 0.0)
        return LogVal(1, p * self.log_mag)

    @staticmethod
    def sum(values: Iterable["LogVal"]) -> "LogVal":
        """Sum of positive values by a single log-sum-exp pass."""
        logs = [v.log for v in values]
        if not logs:
            return LogVal(0, -math.inf)
        return LogVal.from_log(float(logsumexp(logs)))


def _check_time(t: float) -> float:
    t = float(t)
    if not t >= 0.0:
        raise DomainError(f"time must be non-negative, got {t}")
    return t


def _start_order(jmax: int, t: float) -> int:
    return int(jmax + 40 + math.ceil(10.0 * math.sqrt(t * jmax + t)))


def log_heat_z_table(jmax: int, t: float) -> np.ndarray:
    """``log(e^{-t} I_j(t))`` for ``j = 0..jmax`` from one backward recurrence.

    The recurrence ``I_{k-1} = (2k/t) I_k + I_{k+1}`` is started at order
    ``jmax + 40 + 10 sqrt(t*jmax + t)`` from a tiny seed; the running
    magnitude is renormalised whenever it exceeds ``1e250`` and the number of
    rescalings is kept as an integer so offsets cancel exactly.
    """
    t = _check_time(t)
    jmax = int(jmax)
    if jmax < 0:
        raise DomainError("jmax must be non-negative")
    out = np.full(jmax + 1, -math.inf)
    if t == 0.0:
        out[0] = 0.0
        return out

    n = _start_order(jmax, t)
    mant = np.empty(n + 1)
    nscale = np.zeros(n + 1, dtype=np.int64)
    two_over_t = 2.0 / t
    hi = 0.0  # I_{k+1}
    cur = 1e-300  # I_k at k = n
    c = 0
    mant[n] = math.log(cur)
    for k in range(n, 0, -1):
        prev = k * two_over_t * cur + hi
        hi, cur = cur, prev
        if cur > _RESCALE:
            cur /= _RESCALE
            hi /= _RESCALE
            c += 1
        mant[k - 1] = math.log(cur)
        nscale[k - 1] = c
    # express everything relative to the scale at k = 0 so large offsets cancel exactly
    logs = mant + (nscale - c) * _LOG_RESCALE
    # log of I_0 + 2 sum_{k>=1} I_k in the same (unknown) normalisation
    log_norm = logsumexp(np.concatenate(([logs[0]], logs[1:] + math.log(2.0))))
    out[:] = logs[: jmax + 1] - log_norm
    return out


def heat_z(j: int, t: float) -> LogVal:
    """``e^{-t} I_|j|(t)``, the heat kernel on the integers, as a LogVal."""
    j = abs(int(j))
    return LogVal.from_log(float(log_heat_z_table(j, t)[j]))


def rounding_bound(log_value):
    """Relative accuracy of a kernel value known through its logarithm.

    ``2e-13`` covers the recurrence and normalisation (checked against
    arbitrary precision in the tests); the second term is the absolute error
    of a logarithm of size ``|log_value|``.
    """
    return 2e-13 + 8 * np.finfo(float).eps * np.abs(log_value)


def heat_z_ratio_bound(j, s: float):
    """Upper bound for ``I_{j+1}(s) / I_j(s)``, valid for ``j >= 0, s > 0``.

    Amos' inequality ``I_{j+1}/I_j < s / (j + 1/2 + sqrt(s^2 + (j + 1/2)^2))``;
    it is decreasing in ``j``, which is what the tail bounds rely on.
    """
    a = np.asarray(j, dtype=float) + 0.5
    return s / (a + np.sqrt(s * s + a * a))


def heat_z_tail_bound(log_table: np.ndarray, jcut: int, t: float) -> float:
    """Certified bound on ``log sum_{|j| > jcut} e^{-t} I_|j|(t)``.

    Uses the geometric majorant ``I_{j+k} <= I_j r^k`` with ``r`` the ratio
    bound at ``jcut``; the factor 2 accounts for both signs of ``j``.
    """
    if t == 0.0:
        return -math.inf
    r = float(heat_z_ratio_bound(jcut, t))
    return float(log_table[jcut]) + math.log(2.0 * r / (1.0 - r))


def log_envelope_f(j: int, t: float) -> float:
    """Log of the two-sided envelope ``F(j, t)`` of the integer heat kernel."""
    t = _check_time(t)
    j = abs(int(j))
    base = -0.5 * math.log(2.0 * math.pi)
    if j == 0:
        return base - 0.25 * math.log1p(t * t)
    if t == 0.0:
        return -math.inf
    return base - t + j * xi(t / j) - 0.25 * math.log(1.0 + j * j + t * t)


def envelope_f(j: int, t: float) -> float:
    return math.exp(log_envelope_f(j, t))


def _check_pos(z):
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise DomainError("argument must be positive")
    return z


def _out(z_in, v):
    return float(v) if np.ndim(z_in) == 0 else v


def xi(z):
    """``sqrt(1+z^2) + log(z / (1 + sqrt(1+z^2)))``."""
    zz = _check_pos(z)
    return _out(z, np.hypot(1.0, zz) - np.arcsinh(1.0 / zz))


def zeta(z):
    zz = _check_pos(z)
    return _out(z, (np.hypot(1.0, zz) - np.arcsinh(1.0 / zz)) / zz)


def zeta_prime(z):
    zz = _check_pos(z)
    return _out(z, np.arcsinh(1.0 / zz) / zz**2)


def zeta_second(z):
    """Second derivative of ``zeta``; strictly negative on ``(0, inf)``."""
    zz = _check_pos(z)
    return _out(z, -(1.0 / np.hypot(1.0, zz) + 2.0 * np.arcsinh(1.0 / zz)) / zz**3)


def psi(z):
    """``log(z / (1 + sqrt(1+z^2))) = -arcsinh(1/z)``."""
    zz = _check_pos(z)
    return _out(z, -np.arcsinh(1.0 / zz))
