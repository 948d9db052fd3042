"""Spherical Fourier analysis on the homogeneous tree.

Notation: ``theta = lambda * log q`` and ``z = q^{i lambda} = e^{i theta}``.
Transforms of radial functions are even and ``tau``-periodic in ``lambda``,
i.e. even and ``2 pi``-periodic in ``theta``.

Inversion uses the identity (valid for even ``F``)

    f(n) = q^{1 - n/2} / (2 pi) * int_{-pi}^{pi} F(theta) z^n (1 - z^2)/(q - z^2) dtheta,

obtained by writing ``phi_lambda |c(lambda)|^{-2}`` as
``q^{-n/2} (z^n / c(-lambda) + z^{-n} / c(lambda))`` and folding the second
term onto the first.  The new integrand is analytic for ``Im theta > -log(q)/2``,
so when ``F`` is entire the contour may be lifted to ``Im theta = sigma > 0``;
the periodic trapezoid rule keeps its geometric convergence on the lifted
contour and, with ``sigma`` at the saddle point, it also keeps relative
accuracy for results far below ``eps * max|integrand|``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .tree_geom import TreeParams, Vertex, busemann_profile, sphere_volume

__all__ = [
    "PoleError",
    "gamma",
    "c_function",
    "plancherel_density",
    "spherical_fn",
    "phi0",
    "log_phi0",
    "spherical_transform",
    "SpectralGrid",
    "Inversion",
    "inverse_spherical",
    "helgason_fourier",
    "heat_multiplier",
]

LATTICE_TOL = 1e-8
_NEAR_LATTICE = 0.1
_EPS = np.finfo(float).eps


class PoleError(ValueError):
    """Evaluation on the pole lattice ``(tau/2) Z`` of the c-function."""


def _params(q) -> TreeParams:
    return q if isinstance(q, TreeParams) else TreeParams(int(q))


def gamma(lam, q):
    """``gamma(lambda) = gamma(0) cos(lambda log q)``; broadcasts, complex allowed."""
    tp = _params(q)
    return tp.gamma0 * np.cos(np.asarray(lam) * tp.log_q)


def c_function(lam, q):
    """Harish-Chandra c-function; raises PoleError on ``(tau/2) Z``."""
    tp = _params(q)
    lam = complex(lam)
    w = cmath.exp(1j * lam * tp.log_q)  # q^{i lambda}
    den = w - 1.0 / w
    if abs(den) <= 1e-14 * max(1.0, abs(w)):
        raise PoleError(f"c-function has a pole at lambda = {lam}")
    sq = math.sqrt(tp.q)
    return (sq * w - 1.0 / (sq * w)) / ((sq + 1.0 / sq) * den)


def plancherel_density(lam, q):
    """``|c(lambda)|^{-2}`` for real ``lambda`` in closed form; vectorised."""
    tp = _params(q)
    th = np.asarray(lam, dtype=float) * tp.log_q
    s2 = np.sin(th) ** 2
    c2 = np.cos(th) ** 2
    qp, qm = (tp.q + 1.0) ** 2, (tp.q - 1.0) ** 2
    return 4.0 * qp * s2 / (qp * s2 + qm * c2)


def phi0(n, q):
    """Ground spherical function ``(1 + n (q-1)/(q+1)) q^{-n/2}``."""
    n = np.asarray(n, dtype=float)
    return (1.0 + n * (q - 1.0) / (q + 1.0)) * np.power(float(q), -n / 2.0)


def log_phi0(n, q):
    n = np.asarray(n, dtype=float)
    return np.log1p(n * (q - 1.0) / (q + 1.0)) - 0.5 * n * math.log(q)


def _sine_form(eps, n, q):
    # phi at theta = k*pi + eps up to the sign (-1)^{kn}
    sq = math.sqrt(q)
    num = sq * np.sin((n + 1) * eps) - np.sin((n - 1) * eps) / sq
    return np.power(float(q), -n / 2.0) * num / ((sq + 1.0 / sq) * np.sin(eps))


def _imag_axis_form(a, n, q):
    # lambda = i*delta, a = delta*log q != 0; exponents merged so large n cannot overflow
    sq = math.sqrt(q)
    hl = 0.5 * math.log(q)
    num = sq * (np.exp((n + 1) * a - n * hl) - np.exp(-(n + 1) * a - n * hl)) - (
        np.exp((n - 1) * a - n * hl) - np.exp(-(n - 1) * a - n * hl)
    ) / sq
    return num / (2.0 * (sq + 1.0 / sq) * math.sinh(a))


def spherical_fn(lam, n, q):
    """Spherical function ``phi_lambda(n)``; ``n`` may be an array of radii.

    Branches: on ``tau Z`` and ``tau/2 + tau Z`` (within 1e-8) the closed
    forms; elsewhere ``c(lambda) q^{(-1/2+i lambda) n} + c(-lambda) q^{(-1/2-i lambda) n}``,
    rearranged as a ratio of sines close to the lattice where the two terms
    cancel, and as real exponentials on the imaginary axis.  Real output
    whenever ``lambda`` is real or purely imaginary.
    """
    tp = _params(q)
    qq, L = tp.q, tp.log_q
    lam = complex(lam)
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise ValueError("radius must be non-negative")
    nf = n_arr.astype(float)
    half = tp.tau / 2.0
    k = round(lam.real / half)
    off = lam - k * half
    real_out = lam.imag == 0.0 or lam.real == 0.0

    if abs(off) < LATTICE_TOL:
        val = phi0(nf, qq)
        if k % 2:
            val = val * np.where(n_arr % 2 == 1, -1.0, 1.0)
    elif lam.real == 0.0:
        val = _imag_axis_form(abs(lam.imag) * L, nf, qq)
    else:
        eps = off * L
        if abs(cmath.sin(eps)) < _NEAR_LATTICE:
            val = _sine_form(eps, nf, qq) * ((-1.0) ** (k * n_arr) if k % 2 else 1.0)
        else:
            c_p, c_m = c_function(lam, tp), c_function(-lam, tp)
            e = np.exp(complex(-0.5, 0) * nf * L)
            val = e * (c_p * np.exp(1j * lam * nf * L) + c_m * np.exp(-1j * lam * nf * L))
    val = np.asarray(val)
    if real_out:
        val = val.real if np.iscomplexobj(val) else val
    return val[()] if val.ndim == 0 else val


def spherical_transform(f: Sequence[float], lam, q):
    """``Hf(lambda) = sum_n |S(n)| f(n) phi_lambda(n)`` for radial ``f`` given on radii ``0..R``.

    ``lam`` may be an array; values are then built from the three-term
    recurrence ``q phi(n+1) = (q+1) gamma phi(n) - phi(n-1)``.
    """
    tp = _params(q)
    f = np.asarray(f, dtype=float)
    vol = np.array([sphere_volume(tp.q, k) for k in range(f.size)], dtype=float)
    if np.ndim(lam) == 0:
        return np.sum(vol * f * spherical_fn(lam, np.arange(f.size), tp))
    g = gamma(np.asarray(lam), tp)
    prev, cur = np.ones_like(g), g
    out = vol[0] * f[0] * prev
    for k in range(1, f.size):
        out = out + vol[k] * f[k] * cur
        prev, cur = cur, ((tp.q + 1) * g * cur - prev) / tp.q
    return out


@dataclass(frozen=True)
class SpectralGrid:
    """``count + 1`` equispaced nodes on ``[0, tau/2]`` with trapezoid weights.

    By evenness and periodicity this is the periodic trapezoid rule with
    ``2 * count`` nodes on a full period.
    """

    q: int
    count: int = 256

    def __post_init__(self):
        if self.count < 64:
            raise ValueError("spectral grids need at least 64 intervals")

    @property
    def theta(self) -> np.ndarray:
        return np.linspace(0.0, math.pi, self.count + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.theta / math.log(self.q)

    @property
    def weights(self) -> np.ndarray:
        """Weights in ``theta`` summing to ``pi``."""
        w = np.full(self.count + 1, math.pi / self.count)
        w[0] = w[-1] = 0.5 * math.pi / self.count
        return w

    def refine(self) -> "SpectralGrid":
        return SpectralGrid(self.q, 2 * self.count)


@dataclass(frozen=True)
class Inversion:
    """Result of an inverse spherical transform at one radius.

    ``log_abs``/``sign`` carry the value without underflow; ``error`` is an
    absolute error estimate on ``value`` (successive-refinement difference
    plus a rounding floor) and ``rel_error`` the same relative to ``|value|``.
    """

    value: float
    log_abs: float
    sign: int
    error: float
    rel_error: float
    nodes: int
    converged: bool


def _kernel_log(theta_c, n, q):
    # log of z^n (1 - z^2)/(q - z^2) at complex theta
    z2 = np.exp(2j * theta_c)
    with np.errstate(divide="ignore"):  # the zero at theta = 0 contributes exp(-inf) = 0
        return 1j * n * theta_c + np.log((1.0 - z2) / (q - z2))


def _trapezoid(log_integrand, m, sigma):
    th = -math.pi + 2.0 * math.pi * np.arange(m) / m + 1j * sigma
    lg = log_integrand(th)
    top = float(np.max(lg.real))
    vals = np.exp(lg - top)
    return complex(np.mean(vals)), float(np.mean(np.abs(vals))), top


def inverse_spherical(
    F,
    n: int,
    q,
    *,
    grid: SpectralGrid | None = None,
    log_F: bool = False,
    shift: float = 0.0,
    tol: float = 1e-12,
    start_nodes: int = 256,
    max_nodes: int = 2**16,
) -> Inversion:
    """Invert an even, ``tau``-periodic spectral function at radius ``n``.

    ``F`` is either an array of samples on ``grid`` (fixed rule, error
    estimated from the half grid) or a callable of complex ``lambda``
    (returning ``log F`` if ``log_F``).  Callables are integrated with the
    periodic trapezoid rule on ``Im theta = shift``, doubling the node count
    from ``start_nodes`` until two successive values agree to ``tol``.
    Lifting the contour (``shift > 0``) requires ``F`` analytic in the strip.
    """
    tp = _params(q)
    n = int(n)
    if n < 0:
        raise ValueError("radius must be non-negative")
    L = tp.log_q
    if shift < 0:
        raise ValueError("the contour may only be lifted (shift >= 0)")

    if not callable(F):
        if grid is None:
            raise ValueError("array input needs the SpectralGrid it was sampled on")
        if shift:
            raise ValueError("sampled input cannot be integrated off the real axis")
        return _inverse_sampled(np.asarray(F), n, tp, grid)

    def log_integrand(th):
        lam = th / L
        lf = F(lam) if log_F else np.log(np.asarray(F(lam), dtype=complex))
        return lf + _kernel_log(th, n, tp.q)

    m = int(start_nodes)
    prev, _, prev_top = _trapezoid(log_integrand, m, shift)
    converged = False
    while m < max_nodes:
        m *= 2
        cur, mabs, top = _trapezoid(log_integrand, m, shift)
        prev_rescaled = prev * math.exp(prev_top - top)
        diff = abs(cur - prev_rescaled)
        floor = 8.0 * _EPS * mabs
        if diff <= tol * abs(cur.real) or diff <= floor:
            converged = True
            break
        prev, prev_top = cur, top
    err = float(diff + 8.0 * _EPS * mabs)
    log_pref = (1.0 - n / 2.0) * L + top
    re = cur.real
    if re == 0.0:
        return Inversion(0.0, -math.inf, 0, math.exp(log_pref) * err, math.inf, m, converged)
    log_abs = log_pref + math.log(abs(re))
    sign = 1 if re > 0 else -1
    value = sign * math.exp(log_abs) if log_abs < 709 else sign * math.inf
    return Inversion(value, log_abs, sign, math.exp(log_pref) * err, err / abs(re), m, converged)


def _inverse_sampled(F: np.ndarray, n: int, tp: TreeParams, grid: SpectralGrid) -> Inversion:
    if F.shape != (grid.count + 1,):
        raise ValueError("samples do not match the grid")
    th = grid.theta
    z = np.exp(1j * th)
    # phi |c|^{-2} = 2 q^{-n/2} Re(z^n (q+1)(1-z^2)/(q-z^2)) for real theta
    kern = 2.0 * np.real(z**n * (1.0 - z * z) / (tp.q - z * z))
    pref = tp.q ** (1.0 - n / 2.0) / (2.0 * math.pi)
    integrand = F * kern
    full = pref * np.sum(grid.weights * integrand)
    # half grid: every other node, doubled weights
    w2 = 2.0 * grid.weights[::2]
    w2[0] = w2[-1] = grid.weights[0] * 2.0
    coarse = pref * np.sum(w2 * integrand[::2]) if grid.count % 2 == 0 else full
    mabs = float(pref * np.sum(grid.weights * np.abs(integrand)))
    full = float(np.real(full))
    err = abs(full - float(np.real(coarse))) + 8.0 * _EPS * mabs
    converged = bool(err <= 1e-10 * max(abs(full), mabs))
    log_abs = math.log(abs(full)) if full else -math.inf
    sign = int(np.sign(full))
    rel = err / abs(full) if full else math.inf
    return Inversion(full, log_abs, sign, float(err), float(rel), grid.count, converged)


def helgason_fourier(f: Mapping[Vertex, float], lam, sector: Vertex, q):
    """``sum_x f(x) q^{(1/2 + i lambda) h_w(x)}`` for ``w`` in ``Omega(o, sector)``.

    Defined only when every ``h_w(x)`` is constant on the sector, i.e. the
    sector lies outside the support ball.
    """
    tp = _params(q)
    s = 0.5 + 1j * complex(lam)
    if sector.depth == 0:
        raise ValueError("the root sector is the whole boundary; pick a deeper sector")
    total = 0j
    for x, val in f.items():
        prof = busemann_profile(tp.q, x, sector)
        if len(prof) != 1:
            raise ValueError(f"sector {sector} too shallow: h_w({x}) is not constant on it")
        (h,) = prof
        total += val * tp.q ** (s * h)
    return total


def heat_multiplier(lam, t: float, q):
    """``m_t(lambda) = exp(-t (1 - gamma(lambda)))``."""
    if t < 0:
        raise ValueError("time must be non-negative")
    return np.exp(-t * (1.0 - gamma(lam, q)))
