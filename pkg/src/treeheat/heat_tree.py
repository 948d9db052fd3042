"""The heat kernel ``h_t(n)`` of ``I - M`` on the tree and its l^p geometry.

The primary path writes ``h_t`` through the integer kernel at time
``s = t gamma(0)``:

    h_t(n) = 2 e^{-(1 - gamma0) t} / s * q^{-n/2}
             * sum_k q^{-k} (n + 2k + 1) hZ_s(n + 2k + 1),

a series of positive terms summed in logs.  Since ``hZ_s`` decreases in
``|j|``, the terms with ``k >= K`` are dominated by

    hZ_s(n + 2K + 1) q^{-K} [(n + 2K + 1) q/(q-1) + 2q/(q-1)^2],

which certifies the truncation.  The ``K = 0`` instance of the same bound,
``U(n) = A q^{-n/2} hZ_s(n+1) L(n)``, majorises ``h_t(n)`` itself and drives
the tails of all radial sums.  Its successive ratios are bounded with Amos'
bound on ``I_{j+1}/I_j``, so once a ratio bound is below one the tail is
dominated by a geometric series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .special_fn import LogVal, heat_z_ratio_bound, log_heat_z_table, rounding_bound
from .spectral import inverse_spherical
from .tree_geom import TreeParams

__all__ = [
    "HeatEval",
    "HeatProfile",
    "heat_profile",
    "heat_tree_series",
    "heat_tree_series_alt",
    "heat_tree_quadrature",
    "NormEval",
    "lp_norm",
    "RadiusRules",
    "CriticalRegion",
    "critical_region",
    "RegionMass",
    "region_mass",
    "log_sphere_volume",
    "initial_cutoff",
]

SERIES_TOL = 1e-12
LP_TOL = 1e-12
_EPS = np.finfo(float).eps


def log_sphere_volume(n, q):
    """``log |S(n)|`` for an array of radii."""
    n = np.asarray(n, dtype=float)
    v = math.log(q + 1) + (n - 1) * math.log(q)
    return np.where(n == 0, 0.0, v)


def initial_cutoff(t: float) -> int:
    return int(math.ceil(t + 40 + 12 * math.sqrt(t)))


@dataclass(frozen=True)
class HeatEval:
    n: int
    t: float
    q: int
    value: LogVal
    method: str
    rel_bound: float
    flags: tuple[str, ...] = ()

    @property
    def log(self) -> float:
        return self.value.log


@dataclass(frozen=True)
class HeatProfile:
    """``log h_t(n)`` for ``n = 0..nmax`` with per-radius relative error bounds.

    Also keeps ``log hZ_s(j)`` for ``j <= nmax + 1`` so majorants can be
    formed without re-running the recurrence.
    """

    q: int
    t: float
    log_h: np.ndarray
    rel_bound: np.ndarray
    log_z: np.ndarray
    terms: int

    @property
    def nmax(self) -> int:
        return self.log_h.size - 1

    @property
    def log_prefactor(self) -> float:
        tp = TreeParams(self.q)
        s = self.t * tp.gamma0
        return math.log(2.0) - (1.0 - tp.gamma0) * self.t - math.log(s)

    def log_majorant(self, n) -> np.ndarray:
        """``log U(n)`` with ``h_t(n) <= U(n)``, for ``0 <= n <= nmax``."""
        n = np.asarray(n)
        q = self.q
        lfac = np.log((n + 1.0) * q / (q - 1.0) + 2.0 * q / (q - 1.0) ** 2)
        return self.log_prefactor - 0.5 * n * math.log(q) + self.log_z[n + 1] + lfac

    def majorant_ratio(self, n) -> np.ndarray:
        """Upper bound on ``U(m+1)/U(m)`` valid for every ``m >= n``."""
        n = np.asarray(n, dtype=float)
        q = self.q
        s = self.t * TreeParams(q).gamma0
        lf = lambda m: m * q / (q - 1.0) + 2.0 * q / (q - 1.0) ** 2  # noqa: E731
        return q**-0.5 * heat_z_ratio_bound(n + 1, s) * lf(n + 2) / lf(n + 1)


def _series_terms(q: int) -> int:
    # q^{-K} < 1e-40 leaves room for the polynomial factor in the tail bound
    return int(math.ceil(40 * math.log(10) / math.log(q))) + 2


@lru_cache(maxsize=32)
def _profile(q: int, t: float, nmax: int) -> HeatProfile:
    tp = TreeParams(q)
    if t == 0.0:
        log_h = np.full(nmax + 1, -math.inf)
        log_h[0] = 0.0
        z = np.full(nmax + 2, -math.inf)
        z[0] = 0.0
        out = HeatProfile(q, t, log_h, np.zeros(nmax + 1), z, 0)
    else:
        K = _series_terms(q)
        s = t * tp.gamma0
        log_z = log_heat_z_table(nmax + 2 * K + 2, s)
        n = np.arange(nmax + 1)[:, None]
        k = np.arange(K)[None, :]
        idx = n + 2 * k + 1
        terms = -k * tp.log_q + np.log(idx) + log_z[idx]
        log_sum = logsumexp(terms, axis=1)
        n1 = np.arange(nmax + 1)
        a = n1 + 2 * K + 1
        log_tail = (
            log_z[a] - K * tp.log_q + np.log(a * q / (q - 1.0) + 2.0 * q / (q - 1.0) ** 2)
        )
        trunc = np.exp(log_tail - log_sum)
        pref = math.log(2.0) - (1.0 - tp.gamma0) * t - math.log(s)
        log_h = pref - 0.5 * n1 * tp.log_q + log_sum
        rel = trunc + rounding_bound(log_h)
        out = HeatProfile(q, t, log_h, rel, log_z[: nmax + 2].copy(), K)
    for arr in (out.log_h, out.rel_bound, out.log_z):
        arr.flags.writeable = False
    return out


def heat_profile(t: float, nmax: int, q: int) -> HeatProfile:
    """Series evaluation of ``h_t(0..nmax)``; one Bessel table serves all radii."""
    TreeParams(q)
    t = float(t)
    if not t >= 0:
        raise ValueError("time must be non-negative")
    if nmax < 0:
        raise ValueError("nmax must be non-negative")
    return _profile(int(q), t, int(nmax))


def heat_tree_series(n: int, t: float, q: int, kmax: int | None = None) -> HeatEval:
    """``h_t(n)`` from the all-positive Bessel series, with certified truncation.

    With ``kmax`` the series is cut after ``kmax`` terms and the bound
    reflects that cut; otherwise enough terms are used to push the
    truncation error far below ``1e-12``.
    """
    n = int(n)
    if n < 0:
        raise ValueError("radius must be non-negative")
    if kmax is None:
        prof = heat_profile(t, n, q)
        return HeatEval(n, float(t), q, LogVal.from_log(prof.log_h[n]), "series_ii", float(prof.rel_bound[n]))
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    tp = TreeParams(q)
    if t == 0:
        return HeatEval(n, 0.0, q, LogVal.from_float(1.0 if n == 0 else 0.0), "series_ii", 0.0)
    s = t * tp.gamma0
    log_z = log_heat_z_table(n + 2 * kmax + 2, s)
    k = np.arange(kmax)
    idx = n + 2 * k + 1
    log_sum = float(logsumexp(-k * tp.log_q + np.log(idx) + log_z[idx]))
    a = n + 2 * kmax + 1
    log_tail = log_z[a] - kmax * tp.log_q + math.log(a * q / (q - 1.0) + 2.0 * q / (q - 1.0) ** 2)
    log_h = math.log(2.0) - (1.0 - tp.gamma0) * t - math.log(s) - 0.5 * n * tp.log_q + log_sum
    rel = math.exp(log_tail - log_sum) + float(rounding_bound(log_h))
    return HeatEval(n, float(t), q, LogVal.from_log(log_h), "series_ii", rel)


def heat_tree_series_alt(n: int, t: float, q: int) -> HeatEval:
    """``h_t(n)`` from the series of differences ``hZ_s(n+2k) - hZ_s(n+2k+2)``.

    A cross-check only: each difference is formed from a ratio of nearby
    Bessel values, and the flag ``"cancellation"`` is raised when some
    ratio is within ``2^-26`` of one, i.e. half the mantissa is lost.
    """
    n = int(n)
    if n < 0:
        raise ValueError("radius must be non-negative")
    tp = TreeParams(q)
    if t == 0:
        return HeatEval(n, 0.0, q, LogVal.from_float(1.0 if n == 0 else 0.0), "series_i", 0.0)
    s = t * tp.gamma0
    K = _series_terms(q)
    log_z = log_heat_z_table(n + 2 * K + 2, s)
    k = np.arange(K)
    lo, hi = log_z[n + 2 * k], log_z[n + 2 * k + 2]
    d = hi - lo  # log of the ratio, <= 0 by monotonicity
    flags = ()
    if np.any(d > 0):
        flags += ("non-monotone",)
    if np.min(np.abs(d)) < 2.0**-26:
        flags += ("cancellation",)
    with np.errstate(divide="ignore"):
        terms = -k * tp.log_q + lo + np.log(-np.expm1(d))
    log_sum = float(logsumexp(terms))
    # telescoping: the k >= K part is at most q^{-K} hZ(n + 2K)
    log_tail = float(log_z[n + 2 * K]) - K * tp.log_q
    log_h = -(1.0 - tp.gamma0) * t - 0.5 * n * tp.log_q + log_sum
    cond = float(np.max(np.abs(lo) * _EPS / np.maximum(np.abs(d), 1e-300)))
    rel = math.exp(log_tail - log_sum) + float(rounding_bound(log_h)) + 8 * cond
    return HeatEval(n, float(t), q, LogVal.from_log(log_h), "series_i", rel, flags)


def heat_tree_quadrature(n: int, t: float, q: int, tol: float = 1e-13) -> HeatEval:
    """``h_t(n)`` as the inverse spherical transform of ``exp(-t(1 - gamma))``.

    The contour is lifted to the saddle point ``Im theta = asinh(n/(t gamma0))``,
    which keeps the relative accuracy even where ``h_t(n)`` is tiny.
    """
    n = int(n)
    if n < 0:
        raise ValueError("radius must be non-negative")
    tp = TreeParams(q)
    if t == 0:
        return HeatEval(n, 0.0, q, LogVal.from_float(1.0 if n == 0 else 0.0), "quadrature", 0.0)
    s = t * tp.gamma0
    shift = math.asinh(n / s)

    def log_mult(lam):
        return -t * (1.0 - tp.gamma0 * np.cos(lam * tp.log_q))

    inv = inverse_spherical(log_mult, n, tp, log_F=True, shift=shift, tol=tol)
    flags = () if inv.converged else ("not-converged",)
    if inv.sign <= 0:
        return HeatEval(n, float(t), q, LogVal(0, -math.inf), "quadrature", math.inf, flags + ("non-positive",))
    rel = inv.rel_error + float(rounding_bound(inv.log_abs))
    return HeatEval(n, float(t), q, LogVal.from_log(inv.log_abs), "quadrature", rel, flags)


# ---------------------------------------------------------------- l^p sums


def log_tail_lp(prof: HeatProfile, N: int, p: float, shift: int = 0, log_weight: float = 0.0) -> float:
    """Log of a bound on ``sum_{n > N} |S(n)| (c U(n - shift))^p``, ``c = e^{log_weight}``.

    Requires ``N + 1 - shift >= 0`` and ``N + 1 - shift <= nmax``.  Returns
    ``+inf`` if the geometric ratio bound is not below one at ``N``.
    """
    m = N + 1 - shift
    if m < 0 or m > prof.nmax - 1:
        raise ValueError("tail start outside the profile")
    if prof.t == 0.0:
        return -math.inf
    r = float(prof.majorant_ratio(m))
    ratio = prof.q * r**p
    if not ratio < 1.0:
        return math.inf
    first = float(log_sphere_volume(N + 1, prof.q)) + p * (float(prof.log_majorant(m)) + log_weight)
    return first - math.log1p(-ratio)


@dataclass(frozen=True)
class NormEval:
    """``||h_t||_p`` with a relative error bound and the cutoff radius used."""

    t: float
    p: float
    value: LogVal
    rel_bound: float
    cutoff: int
    log_tail: float


def _lp_sum(prof: HeatProfile, p: float, N: int):
    n = np.arange(N + 1)
    return logsumexp(log_sphere_volume(n, prof.q) + p * prof.log_h[: N + 1])


def lp_profile(t: float, p: float, q: int, tol: float = LP_TOL):
    """Profile long enough that the l^p tail beyond its cutoff is below ``tol``.

    Returns ``(profile, cutoff, log_sum, log_tail)`` where ``log_sum`` is the
    log of ``sum_{n <= cutoff} |S(n)| h_t(n)^p``.
    """
    N = initial_cutoff(t)
    for _ in range(12):
        prof = heat_profile(t, N + 2, q)
        log_sum = float(_lp_sum(prof, p, N))
        lt = log_tail_lp(prof, N, p)
        if lt - log_sum < math.log(tol):
            return prof, N, log_sum, lt
        N *= 2
    raise RuntimeError(f"l^{p} tail could not be certified at t={t}")


def lp_norm(t: float, p: float, q: int, tol: float = LP_TOL) -> NormEval:
    """``||h_t||_p`` (sphere-weighted radial sum); ``p = inf`` gives ``h_t(0)``."""
    t = float(t)
    if not t > 0:
        raise ValueError("lp_norm needs t > 0")
    if not p >= 1:
        raise ValueError("p must be >= 1")
    if math.isinf(p):
        ev = heat_tree_series(0, t, q)
        return NormEval(t, p, ev.value, ev.rel_bound, 0, -math.inf)
    prof, N, log_sum, lt = lp_profile(t, p, q, tol)
    rel_terms = float(np.max(prof.rel_bound[: N + 1]))
    log_pp = float(np.logaddexp(log_sum, lt))
    tail_rel = math.exp(lt - log_sum)
    # p-th root: relative errors shrink by 1/p (to first order)
    rel = rel_terms + tail_rel / p
    return NormEval(t, p, LogVal.from_log(log_pp / p), rel, N, lt)


# ------------------------------------------------------- critical regions


@dataclass(frozen=True)
class RadiusRules:
    """Window radii as functions of ``t``.

    ``r(t) = t^r_exp`` (``p < 2``), ``[t^r1_exp, t^r2_exp]`` (``p = 2``) and
    ``[0, log(t)^r3_log_power]`` (``p > 2``).
    """

    r_exp: float = 0.75
    r1_exp: float = 0.25
    r2_exp: float = 0.75
    r3_log_power: float = 2.0

    def r(self, t):
        return t**self.r_exp

    def r1(self, t):
        return t**self.r1_exp

    def r2(self, t):
        return t**self.r2_exp

    def r3(self, t):
        return math.log(t) ** self.r3_log_power if t > 1 else 0.0


@dataclass(frozen=True)
class CriticalRegion:
    """Radii ``inner <= |x| <= outer`` carrying the l^p mass of ``h_t``."""

    p: float
    t: float
    inner: float
    outer: float

    def __post_init__(self):
        if not 0 <= self.inner <= self.outer:
            raise ValueError("need 0 <= inner <= outer")

    def contains(self, n):
        n = np.asarray(n)
        return (n >= self.inner) & (n <= self.outer)


def critical_region(t: float, p: float, q: int, rules: RadiusRules | None = None) -> CriticalRegion:
    rules = rules or RadiusRules()
    tp = TreeParams(q)
    if p < 2:
        c = tp.radius_rate(p) * t
        w = rules.r(t)
        return CriticalRegion(p, t, max(0.0, c - w), c + w)
    if p == 2:
        lo, hi = rules.r1(t), rules.r2(t)
        return CriticalRegion(p, t, min(lo, hi), hi)
    return CriticalRegion(p, t, 0.0, rules.r3(t))


@dataclass(frozen=True)
class RegionMass:
    """Normalised l^p mass inside and outside a region.

    For ``p = inf`` both fields are sup ratios ``sup h_t / h_t(0)``.
    ``tail`` bounds the contribution not evaluated term by term.
    """

    inside: float
    complement: float
    tail: float


def region_mass(t: float, p: float, q: int, region: CriticalRegion | None = None) -> RegionMass:
    region = region or critical_region(t, p, q)
    if region.p != p:
        raise ValueError("region built for a different p")
    if math.isinf(p):
        N = max(initial_cutoff(t), int(math.ceil(region.outer)) + 2)
        prof = heat_profile(t, N + 2, q)
        n = np.arange(N + 1)
        lr = prof.log_h[: N + 1] - prof.log_h[0]
        inside = lr[region.contains(n)]
        outside = lr[~region.contains(n)]
        r = float(prof.majorant_ratio(N + 1))
        if not r < 1:
            raise RuntimeError("sup tail not certified")
        tail = float(np.exp(prof.log_majorant(N + 1) - prof.log_h[0]))
        sup_out = max(float(np.exp(outside.max())) if outside.size else 0.0, tail)
        sup_in = float(np.exp(inside.max())) if inside.size else 0.0
        return RegionMass(sup_in, sup_out, tail)
    prof, N, log_sum, lt = lp_profile(t, p, q)
    n = np.arange(N + 1)
    lt_all = log_sphere_volume(n, q) + p * prof.log_h[: N + 1]
    total = float(np.logaddexp(log_sum, lt))
    mask = region.contains(n)
    inside = math.exp(float(logsumexp(lt_all[mask])) - total) if mask.any() else 0.0
    comp_terms = lt_all[~mask]
    comp_log = float(logsumexp(np.append(comp_terms, lt)))
    return RegionMass(inside, math.exp(comp_log - total), math.exp(lt - total))
