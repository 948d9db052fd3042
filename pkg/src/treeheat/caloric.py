"""Solutions of the heat equation and their mass functions.

For finitely supported ``f`` with support radius ``rho`` every vertex ``x``
with ``|x| >= rho`` lies below exactly one gate ``g`` (``|g| = rho``) and
``d(x, y) = |x| + |y| - 2|g ^ y|`` for every support point ``y``.  So
``u(t; x) = sum_y f(y) h_t(d(x, y))`` is one radial profile per gate and
every l^p norm is a radial sum weighted by ``q^{n - rho}``.  Ratios
``h_t(n + k) / h_t(n)`` are formed in logs, so the diagnostics stay finite
long after ``h_t`` itself leaves the double range.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .heat_tree import (
    RadiusRules,
    critical_region,
    heat_profile,
    initial_cutoff,
    log_sphere_volume,
    log_tail_lp,
    lp_norm,
)
from .special_fn import heat_z_ratio_bound, log_heat_z_table
from .spectral import log_phi0, spherical_fn, spherical_transform
from .tree_geom import (
    ROOT,
    GateClass,
    TreeParams,
    Vertex,
    ball,
    distance,
    gate_classes,
    sector_mean_power,
    sphere_split_counts,
    sphere_volume,
    vertices_at,
)

__all__ = [
    "FiniteFn",
    "RadialFn",
    "CaloricSolution",
    "solve",
    "solve_radial",
    "MassFunction",
    "mass_function",
    "weight",
    "DiagnosticRow",
    "convergence_diagnostic",
    "WeightedNormReport",
    "weighted_membership",
    "ZRow",
    "z_diagnostic",
    "load_z_input",
]

TAIL_TOL = 1e-10


# ------------------------------------------------------------------ inputs


@dataclass(frozen=True)
class FiniteFn:
    """Finitely supported function on the tree of branching ``q``.

    ``radial_values`` is kept when the function was built from radial data,
    so mass constants can be taken from the spherical transform.
    """

    q: int
    entries: tuple[tuple[Vertex, float], ...]
    radial_values: tuple[float, ...] | None = None

    def __post_init__(self):
        TreeParams(self.q)
        seen = set()
        for v, _ in self.entries:
            v.validate(self.q)
            if v in seen:
                raise ValueError(f"vertex {v} listed twice")
            seen.add(v)

    @classmethod
    def from_dict(cls, q: int, data: Mapping[Vertex, float]) -> "FiniteFn":
        items = tuple(sorted((v, float(a)) for v, a in data.items() if a != 0))
        return cls(int(q), items)

    @classmethod
    def delta(cls, q: int, y: Vertex | str, value: float = 1.0) -> "FiniteFn":
        y = Vertex.parse(y) if isinstance(y, str) else y
        return cls.from_dict(q, {y: value})

    @classmethod
    def radial(cls, q: int, values: Sequence[float]) -> "FiniteFn":
        data = {}
        for n, a in enumerate(values):
            if a:
                for v in vertices_at(q, n):
                    data[v] = float(a)
        out = cls.from_dict(q, data)
        return cls(out.q, out.entries, tuple(float(a) for a in values))

    @classmethod
    def from_json(cls, obj: Mapping, q: int | None = None) -> "FiniteFn":
        """``{"q": q, "entries": [{"vertex": "0.1", "value": v}]}`` or ``{"radial": [...]}``."""
        qq = obj.get("q", q)
        if qq is None:
            raise ValueError("the branching number q is missing")
        if q is not None and int(qq) != int(q):
            raise ValueError(f"input is for q={qq}, requested q={q}")
        if "radial" in obj:
            return cls.radial(int(qq), [float(a) for a in obj["radial"]])
        if "entries" not in obj:
            raise ValueError("input needs 'entries' or 'radial'")
        data: dict[Vertex, float] = {}
        for e in obj["entries"]:
            v = Vertex.parse(str(e["vertex"]))
            if v in data:
                raise ValueError(f"vertex {v} listed twice")
            data[v] = float(e["value"])
        return cls.from_dict(int(qq), data)

    @classmethod
    def load(cls, path, q: int | None = None) -> "FiniteFn":
        with open(path) as fh:
            return cls.from_json(json.load(fh), q)

    def to_json(self) -> dict:
        return {"q": self.q, "entries": [{"vertex": str(v), "value": a} for v, a in self.entries]}

    @property
    def support(self) -> list[Vertex]:
        return [v for v, _ in self.entries]

    @property
    def values(self) -> np.ndarray:
        return np.array([a for _, a in self.entries], dtype=float)

    @property
    def rho(self) -> int:
        return max((v.depth for v, _ in self.entries), default=0)

    @property
    def gate_radius(self) -> int:
        return max(1, self.rho)

    def total(self) -> float:
        return float(np.sum(self.values))

    def __call__(self, x: Vertex) -> float:
        return dict(self.entries).get(x, 0.0)

    def combine(self, a: float, other: "FiniteFn", b: float) -> "FiniteFn":
        """``a * self + b * other``."""
        if other.q != self.q:
            raise ValueError("branching numbers differ")
        data = {v: a * w for v, w in self.entries}
        for v, w in other.entries:
            data[v] = data.get(v, 0.0) + b * w
        return FiniteFn.from_dict(self.q, data)


@dataclass(frozen=True)
class RadialFn:
    """Radial function given by finitely many values or lazily by a callable.

    A lazy function is probed up to ``probe`` radii when deciding
    summability questions.
    """

    q: int
    values: Sequence[float] | None = None
    func: Callable[[int], float] | None = None
    probe: int = 400

    def __post_init__(self):
        if (self.values is None) == (self.func is None):
            raise ValueError("give exactly one of values or func")

    @property
    def lazy(self) -> bool:
        return self.func is not None

    def at(self, n: int) -> float:
        if self.func is not None:
            return float(self.func(n))
        return float(self.values[n]) if n < len(self.values) else 0.0

    def radii(self) -> int:
        return self.probe if self.lazy else len(self.values)


# --------------------------------------------------------------- solutions


def _exterior_data(f: FiniteFn):
    rho = f.gate_radius
    support = f.support
    gates = gate_classes(f.q, rho, support)
    off = np.array([g.offsets(support) for g in gates], dtype=int).reshape(len(gates), len(support))
    return rho, gates, off


@dataclass(frozen=True)
class CaloricSolution:
    """``u(t; .)``: interior values plus one radial profile per gate.

    ``profiles[g, i]`` is ``u`` at any vertex below ``gates[g]`` at depth
    ``depths[i]``; each such depth carries ``q^{depth - rho}`` vertices.
    """

    t: float
    q: int
    rho: int
    gates: list[GateClass]
    depths: np.ndarray
    profiles: np.ndarray
    interior: dict[Vertex, float]

    def at(self, x: Vertex) -> float:
        if x.depth < self.rho:
            return self.interior[x]
        i = x.depth - int(self.depths[0])
        if i >= self.depths.size:
            raise ValueError("vertex beyond the computed depth")
        g = x.prefix(self.rho)
        for k, gc in enumerate(self.gates):
            if gc.gate == g:
                return float(self.profiles[k, i])
        raise ValueError(f"no gate for {x}")

    def total_mass(self) -> float:
        mult = np.power(float(self.q), self.depths - self.rho)
        return float(sum(self.interior.values()) + np.sum(self.profiles * mult))


def solve(f: FiniteFn, t: float, nmax: int | None = None) -> CaloricSolution:
    """``u = e^{-t L} f`` on the ball of radius ``nmax`` (default: heat cutoff + rho)."""
    t = float(t)
    if not t >= 0:
        raise ValueError("time must be non-negative")
    rho, gates, off = _exterior_data(f)
    if nmax is None:
        nmax = initial_cutoff(t) + rho
    if nmax < rho:
        raise ValueError("nmax below the support radius")
    prof = heat_profile(t, nmax + rho + 1, f.q)
    h = np.exp(prof.log_h)
    depths = np.arange(rho, nmax + 1)
    vals = f.values
    profiles = np.zeros((len(gates), depths.size))
    for k in range(len(gates)):
        profiles[k] = h[depths[:, None] + off[k][None, :]] @ vals
    interior = {}
    for x in ball(f.q, rho - 1):
        interior[x] = float(sum(a * h[distance(x, y)] for y, a in f.entries))
    return CaloricSolution(t, f.q, rho, gates, depths, profiles, interior)


def solve_radial(values: Sequence[float], t: float, q: int, nmax: int) -> np.ndarray:
    """``u(t; n)`` for radial data, summing over radii with sphere split counts."""
    values = np.asarray(values, dtype=float)
    prof = heat_profile(t, nmax + values.size, q)
    h = np.exp(prof.log_h)
    out = np.zeros(nmax + 1)
    for n in range(nmax + 1):
        for k, a in enumerate(values):
            if a:
                out[n] += a * sum(c * h[d] for d, c in sphere_split_counts(q, n, k).items())
    return out


# ---------------------------------------------------------- mass functions


def weight(q: int, depth, p: float):
    """``w_p(y) = q^{|y|/p}`` for ``p < 2`` and ``q^{|y|/2}`` otherwise."""
    s = 1.0 / p if p < 2 else 0.5
    return np.power(float(q), s * np.asarray(depth, dtype=float))


def _check_p(p: float) -> float:
    p = float(p)
    if not p >= 1:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    return p


@dataclass(frozen=True)
class MassFunction:
    """``M_p(f)``: values on the interior ball and on every gate subtree.

    ``variant`` is ``"boundary"`` (sector means of ``q^{h/p}``, used for
    ``p < 2``) or ``"phi0"`` (``(f * phi0)/phi0``, used for ``p > 2``);
    ``p = 2`` admits both, ``"phi0"`` by default.  Boundary-variant values are
    constant on each gate subtree; ``phi0``-variant values depend on the depth.
    """

    f: FiniteFn
    p: float
    variant: str
    interior: dict[Vertex, float]
    gate_constants: np.ndarray | None
    constant: float | None = None
    _off: np.ndarray | None = field(default=None, repr=False)

    @property
    def rho(self) -> int:
        return self.f.gate_radius

    def gate_profile(self, depths) -> np.ndarray:
        """Values ``M(g, n)`` for all gates and the given depths ``n >= rho``."""
        depths = np.asarray(depths)
        if self.gate_constants is not None:
            return np.repeat(self.gate_constants[:, None], depths.size, axis=1)
        q = self.f.q
        lp0 = log_phi0(depths, q)
        out = np.zeros((self._off.shape[0], depths.size))
        vals = self.f.values
        for k in range(self._off.shape[0]):
            d = depths[:, None] + self._off[k][None, :]
            out[k] = np.exp(log_phi0(d, q) - lp0[:, None]) @ vals
        return out

    def at(self, x: Vertex) -> float:
        if x.depth < self.rho:
            return self.interior[x]
        return _mass_at(self.f, self.p, self.variant, x)

    def bound(self) -> float:
        """``sum |f(y)| w_p(y)``, which dominates ``|M_p(f)|`` everywhere."""
        return float(np.sum(np.abs(self.f.values) * weight(self.f.q, [v.depth for v in self.f.support], self.p)))

    def sup(self, depths=None) -> float:
        """Largest ``|M|`` over the interior and the gates (at ``depths`` for ``phi0``)."""
        vals = [abs(v) for v in self.interior.values()]
        if self.gate_constants is not None:
            vals.extend(np.abs(self.gate_constants).tolist())
        else:
            depths = np.arange(self.rho, self.rho + 64) if depths is None else depths
            vals.append(float(np.max(np.abs(self.gate_profile(depths)))))
        return max(vals, default=0.0)


def _mass_at(f: FiniteFn, p: float, variant: str, x: Vertex) -> float:
    q = f.q
    if variant == "boundary":
        s = 1.0 / p if p < 2 else 0.5
        return float(sum(a * sector_mean_power(q, y, x, s) for y, a in f.entries))
    lp = float(log_phi0(x.depth, q))
    return float(sum(a * math.exp(float(log_phi0(distance(x, y), q)) - lp) for y, a in f.entries))


def mass_function(f: FiniteFn, p: float, variant: str | None = None) -> MassFunction:
    p = _check_p(p)
    default = "boundary" if p < 2 else "phi0"
    variant = variant or default
    if variant not in ("boundary", "phi0"):
        raise ValueError(f"unknown mass variant {variant!r}")
    if (p < 2 and variant != "boundary") or (p > 2 and variant != "phi0"):
        raise ValueError(f"variant {variant!r} is not a mass function for p={p}")
    rho, gates, off = _exterior_data(f)
    interior = {x: _mass_at(f, p, variant, x) for x in ball(f.q, rho - 1)}
    constant = None
    if f.radial_values is not None:
        delta = TreeParams(f.q).delta(p)
        constant = float(np.real(spherical_transform(f.radial_values, 1j * delta, f.q)))
    if variant == "boundary":
        gc = np.array([_mass_at(f, p, variant, g.gate) for g in gates])
        return MassFunction(f, p, variant, interior, gc, constant)
    return MassFunction(f, p, variant, interior, None, constant, off)


# -------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class DiagnosticRow:
    """``E = ||u - M h_t||_p / ||h_t||_p`` split over the critical region.

    ``tail_bound`` bounds the (not included) contribution of radii beyond
    ``cutoff`` to ``E``; ``certified`` is False when that bound could not be
    established or exceeds the tolerance.  ``u_complement`` is
    ``||u||_p`` outside the critical region relative to ``||h_t||_p``.
    """

    t: float
    E: float
    E_critical: float
    E_complement: float
    mass_sup: float
    tail_bound: float
    u_complement: float
    cutoff: int
    certified: bool


def _combine(parts: Sequence[float], p: float) -> float:
    # parts are log of p-th power sums (p < inf) or log of sups (p = inf)
    parts = [x for x in parts if x > -math.inf]
    if not parts:
        return -math.inf
    return float(max(parts)) if math.isinf(p) else float(logsumexp(parts))


def _diagnostic_one(f: FiniteFn, p: float, t: float, mf: MassFunction | None, const_mass, rules, rho, gates, off):
    q = f.q
    if math.isinf(p):
        N = initial_cutoff(t)
    else:
        N = lp_norm(t, p, q).cutoff
    N = max(N, rho + 1)
    prof = heat_profile(t, N + rho + 2, q)
    L = np.asarray(prof.log_h)
    log_norm = lp_norm(t, p, q).value.log
    region = critical_region(t, p, q, rules)
    vals = f.values
    depths = np.arange(rho, N + 1)
    if const_mass is not None:
        M_ext = np.full((len(gates), depths.size), float(const_mass))
    else:
        M_ext = mf.gate_profile(depths)
    log_mult = (depths - rho) * math.log(q)
    inside = region.contains(depths)
    crit, comp, ucomp = [], [], []
    pw = 1.0 if math.isinf(p) else p
    with np.errstate(divide="ignore"):
        for k in range(len(gates)):
            ratio = np.exp(L[depths[:, None] + off[k][None, :]] - L[depths][:, None]) @ vals
            lterm = pw * (L[depths] + np.log(np.abs(ratio - M_ext[k])))
            uterm = pw * (L[depths] + np.log(np.abs(ratio)))
            if not math.isinf(p):
                lterm = lterm + log_mult
                uterm = uterm + log_mult
            crit.append(_combine(lterm[inside], p))
            comp.append(_combine(lterm[~inside], p))
            ucomp.append(_combine(uterm[~inside], p))
        for x in ball(q, rho - 1):
            n = x.depth
            ratio = sum(a * math.exp(L[distance(x, y)] - L[n]) for y, a in f.entries)
            M = float(const_mass) if const_mass is not None else mf.interior[x]
            lt = pw * (L[n] + math.log(abs(ratio - M))) if ratio != M else -math.inf
            lu = pw * (L[n] + math.log(abs(ratio))) if ratio else -math.inf
            (crit if region.contains(n) else comp).append(lt)
            if not region.contains(n):
                ucomp.append(lu)
    lc, lo, lu = _combine(crit, p), _combine(comp, p), _combine(ucomp, p)
    msup = abs(float(const_mass)) if const_mass is not None else max(mf.sup(depths), 0.0)
    c = float(np.sum(np.abs(vals))) + (abs(float(const_mass)) if const_mass is not None else mf.bound())
    # beyond N: |u - M h|(x) <= c * U(|x| - rho), with U decreasing there
    if math.isinf(p):
        r = float(prof.majorant_ratio(N + 1 - rho))
        ltail = math.log(c) + float(prof.log_majorant(N + 1 - rho)) if r < 1 else math.inf
    else:
        ltail = log_tail_lp(prof, N, p, shift=rho, log_weight=math.log(c))
    scale = 1.0 if math.isinf(p) else 1.0 / p

    def rel(lg):
        return math.exp(lg * scale - log_norm) if lg > -math.inf else 0.0

    Ec, Eo = rel(lc), rel(lo)
    E = max(Ec, Eo) if math.isinf(p) else rel(_combine([lc, lo], p))
    tail = rel(ltail) if ltail < math.inf else math.inf
    return DiagnosticRow(t, E, Ec, Eo, msup, tail, rel(lu), N, tail <= TAIL_TOL)


def convergence_diagnostic(
    f: FiniteFn,
    p: float,
    t_ladder: Iterable[float],
    *,
    variant: str | None = None,
    mass: float | None = None,
    rules: RadiusRules | None = None,
    workers: int = 1,
) -> list[DiagnosticRow]:
    """``E(t)`` for each ``t``; ``mass`` replaces ``M_p(f)`` by a constant (control runs)."""
    p = _check_p(p)
    ts = [float(t) for t in t_ladder]
    if any(not t > 0 for t in ts):
        raise ValueError("times must be positive")
    rho, gates, off = _exterior_data(f)
    mf = None if mass is not None else mass_function(f, p, variant)

    def one(t):
        return _diagnostic_one(f, p, t, mf, mass, rules, rho, gates, off)

    if workers > 1 and len(ts) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(one, ts))
    return [one(t) for t in ts]


# ----------------------------------------------------------- weighted norms


@dataclass(frozen=True)
class WeightedNormReport:
    """Norms in ``l^1(w_p)`` and ``l^1_{delta_p}`` (``inf`` when divergent).

    ``certain`` is False when membership was decided from the decay of a
    lazily given radial function rather than from a finite sum.
    """

    p: float
    w_norm: float
    delta_norm: float
    w_member: bool
    delta_member: bool
    certain: bool


def _lazy_series(log_terms: np.ndarray) -> tuple[float, bool]:
    """Sum of ``exp(log_terms)`` extended to infinity, judged from its decay.

    Fits ``a + alpha n + beta log n`` on the upper half of the probed radii:
    geometric decay (``alpha < 0``) or ``beta < -1`` with ``alpha ~ 0`` is
    summable, anything else is reported divergent.
    """
    n = np.arange(log_terms.size, dtype=float)
    ok = np.isfinite(log_terms)
    if not ok.any():
        return 0.0, True
    lo = log_terms.size // 2
    sel = ok & (n >= lo)
    if sel.sum() < 8:
        return math.inf, False
    A = np.stack([np.ones(sel.sum()), n[sel], np.log(n[sel])], axis=1)
    (a, alpha, beta), *_ = np.linalg.lstsq(A, log_terms[sel], rcond=None)
    partial = float(np.exp(logsumexp(log_terms[ok])))
    if alpha < -1e-3:
        r = math.exp(alpha)
        return partial + math.exp(log_terms[-1]) * r / (1 - r), True
    if abs(alpha) <= 1e-3 and beta < -1.05:
        N = log_terms.size
        # integral comparison for the n^beta tail
        return partial + math.exp(log_terms[-1]) * N / (-beta - 1), True
    return math.inf, False


def weighted_membership(f, p: float) -> WeightedNormReport:
    """Weighted l^1 norms of a FiniteFn or a RadialFn."""
    p = _check_p(p)
    q = f.q
    delta = TreeParams(q).delta(p)
    if isinstance(f, FiniteFn):
        depths = np.array([v.depth for v in f.support])
        absf = np.abs(f.values)
        wn = float(np.sum(absf * weight(q, depths, p)))
        dn = float(np.sum(absf * spherical_fn(1j * delta, depths, q))) if depths.size else 0.0
        return WeightedNormReport(p, wn, dn, True, True, True)
    if not isinstance(f, RadialFn):
        raise TypeError("expected FiniteFn or RadialFn")
    N = f.radii()
    n = np.arange(N)
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(np.array([f.at(k) for k in range(N)]))) + log_sphere_volume(n, q)
    lw = la + np.log(weight(q, n, p))
    ld = la + np.log(spherical_fn(1j * delta, n, q))
    if not f.lazy:
        wn = float(np.exp(logsumexp(lw))) if np.isfinite(lw).any() else 0.0
        dn = float(np.exp(logsumexp(ld))) if np.isfinite(ld).any() else 0.0
        return WeightedNormReport(p, wn, dn, True, True, True)
    wn, wm = _lazy_series(lw)
    dn, dm = _lazy_series(ld)
    return WeightedNormReport(p, wn, dn, wm, dm, False)


# ------------------------------------------------------------- integer line


@dataclass(frozen=True)
class ZRow:
    t: float
    E: float
    tail_bound: float
    u_norm: float
    cutoff: int
    certified: bool


def load_z_input(obj: Mapping) -> dict[int, float]:
    """``{"entries": [{"site": j, "value": v}]}`` to a site map."""
    out: dict[int, float] = {}
    for e in obj["entries"]:
        j = int(e["site"])
        if j in out:
            raise ValueError(f"site {j} listed twice")
        out[j] = float(e["value"])
    return out


def _z_one(f: Mapping[int, float], p: float, t: float) -> ZRow:
    sites = np.array(sorted(f), dtype=int)
    vals = np.array([f[j] for j in sites])
    M = float(np.sum(vals))
    rho = int(np.max(np.abs(sites))) if sites.size else 0
    c = float(np.sum(np.abs(vals))) + abs(M)
    J = int(math.ceil(40 + 12 * math.sqrt(t))) + rho
    pw = 1.0 if math.isinf(p) else p
    for _ in range(12):
        L = log_heat_z_table(J + rho + 2, t)
        j = np.arange(-J, J + 1)
        Lj = L[np.abs(j)]
        with np.errstate(divide="ignore"):
            ratio = np.exp(L[np.abs(j[:, None] - sites[None, :])] - Lj[:, None]) @ vals
            lterm = pw * (Lj + np.log(np.abs(ratio - M)))
            uterm = pw * (Lj + np.log(np.abs(ratio)))
        if math.isinf(p):
            lnorm = float(L[0])
            lE, lU = float(np.max(lterm)), float(np.max(uterm))
        else:
            lnorm_p = float(logsumexp(pw * Lj))
            lE, lU = float(logsumexp(lterm)), float(logsumexp(uterm))
        # |j| > J: |u - M h|(j) <= c hZ(|j| - rho), geometric beyond with Amos' ratio
        m = J + 1 - rho
        r = float(heat_z_ratio_bound(m, t))
        if math.isinf(p):
            ltail = math.log(c) + float(L[m])
        else:
            ltail = math.log(2.0) + pw * (math.log(c) + float(L[m])) - math.log1p(-(r**pw))
            lnorm_p = float(np.logaddexp(lnorm_p, math.log(2.0) + pw * float(L[J + 1]) - math.log1p(-(r**pw))))
            lnorm = lnorm_p / p
        scale = 1.0 if math.isinf(p) else 1.0 / p
        tail = math.exp(ltail * scale - lnorm)
        if tail <= TAIL_TOL:
            break
        J *= 2
    E = math.exp(lE * scale - lnorm) if lE > -math.inf else 0.0
    U = math.exp(lU * scale - lnorm) if lU > -math.inf else 0.0
    return ZRow(t, E, tail, U, J, tail <= TAIL_TOL)


def z_diagnostic(f: Mapping[int, float], p: float, t_ladder: Iterable[float]) -> list[ZRow]:
    """``||u - M hZ_t||_p / ||hZ_t||_p`` on the integers with ``M = sum f``."""
    p = _check_p(p)
    ts = [float(t) for t in t_ladder]
    if any(not t > 0 for t in ts):
        raise ValueError("times must be positive")
    return [_z_one(f, p, t) for t in ts]
