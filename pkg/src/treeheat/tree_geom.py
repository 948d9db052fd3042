"""Combinatorics of the homogeneous tree of degree ``q + 1``.

Vertices are reduced words measured from the root ``o``: the first letter
picks one of the ``q + 1`` neighbours of ``o`` and every later letter one of
the ``q`` forward neighbours, so words never backtrack.  Boundary points are
the infinite words; the harmonic measure gives every depth-``n`` sector the
same mass.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

__all__ = [
    "TreeParams",
    "Vertex",
    "ROOT",
    "distance",
    "meet_depth",
    "sphere_volume",
    "vertices_at",
    "ball",
    "neighbours",
    "sector_measure",
    "busemann_profile",
    "boundary_profile",
    "sector_mean_power",
    "boundary_mean_power",
    "GateClass",
    "gate_classes",
    "sphere_split_counts",
]

# sector measures and multiplicities are kept as exact fractions up to this depth
EXACT_DEPTH = 60


@dataclass(frozen=True)
class TreeParams:
    """Branching number ``q`` and the constants derived from it."""

    q: int

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"q must be an integer >= 2, got {self.q}")

    @cached_property
    def log_q(self) -> float:
        return math.log(self.q)

    @cached_property
    def gamma0(self) -> float:
        return 2.0 * math.sqrt(self.q) / (self.q + 1)

    @cached_property
    def tau(self) -> float:
        return 2.0 * math.pi / self.log_q

    def delta(self, p: float) -> float:
        """``1/p - 1/2`` for ``p < 2`` and ``0`` for ``p >= 2``."""
        return 1.0 / p - 0.5 if p < 2 else 0.0

    def radius_rate(self, p: float) -> float:
        """Speed ``R_p = (q^{1/p} - q^{1/p'})/(q+1)`` of the l^p bulk, ``p < 2``."""
        if p >= 2:
            return 0.0
        inv_conj = 1.0 - 1.0 / p
        return (self.q ** (1.0 / p) - self.q**inv_conj) / (self.q + 1)

    def b(self, p: float) -> float:
        """Exponential decay rate ``b_p = 1 - gamma(i delta_p)`` of ``||h_t||_p``."""
        return 1.0 - self.gamma0 * math.cosh(self.delta(p) * self.log_q)

    def sphere_volume(self, n: int) -> int:
        return sphere_volume(self.q, n)


@dataclass(frozen=True, order=True)
class Vertex:
    word: tuple[int, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.word)

    @classmethod
    def parse(cls, text: str) -> "Vertex":
        """Inverse of ``str``: decimal letters joined by '.', '' for the root."""
        text = text.strip()
        if not text:
            return cls(())
        return cls(tuple(int(tok) for tok in text.split(".")))

    def __str__(self) -> str:
        return ".".join(str(a) for a in self.word)

    def validate(self, q: int) -> "Vertex":
        w = self.word
        if w and not 0 <= w[0] <= q:
            raise ValueError(f"first letter of {self} must lie in 0..{q}")
        if any(not 0 <= a < q for a in w[1:]):
            raise ValueError(f"letters after the first of {self} must lie in 0..{q - 1}")
        return self

    def prefix(self, k: int) -> "Vertex":
        return Vertex(self.word[:k])

    def parent(self) -> "Vertex":
        if not self.word:
            raise ValueError("the root has no parent")
        return Vertex(self.word[:-1])

    def child(self, a: int) -> "Vertex":
        return Vertex(self.word + (a,))

    def is_prefix_of(self, other: "Vertex") -> bool:
        return other.word[: len(self.word)] == self.word


ROOT = Vertex(())


def meet_depth(x: Vertex, y: Vertex) -> int:
    """``|x ^ y|``: length of the longest common prefix."""
    m = 0
    for a, b in zip(x.word, y.word):
        if a != b:
            break
        m += 1
    return m


def distance(x: Vertex, y: Vertex) -> int:
    return x.depth + y.depth - 2 * meet_depth(x, y)


def sphere_volume(q: int, n: int) -> int:
    if n < 0:
        raise ValueError("sphere radius must be non-negative")
    return 1 if n == 0 else (q + 1) * q ** (n - 1)


def vertices_at(q: int, n: int) -> Iterator[Vertex]:
    if n < 0:
        raise ValueError("depth must be non-negative")
    if n == 0:
        yield ROOT
        return
    for w in itertools.product(range(q + 1), *([range(q)] * (n - 1))):
        yield Vertex(w)


def ball(q: int, r: int) -> list[Vertex]:
    return [v for n in range(r + 1) for v in vertices_at(q, n)]


def neighbours(q: int, x: Vertex) -> list[Vertex]:
    kids = range(q + 1) if x.depth == 0 else range(q)
    out = [x.child(a) for a in kids]
    if x.depth:
        out.append(x.parent())
    return out


def sector_measure(q: int, x: Vertex):
    """``nu(Omega(o, x))``; exact Fraction up to depth 60, float beyond."""
    n = x.depth
    if n == 0:
        return Fraction(1)
    if n <= EXACT_DEPTH:
        return Fraction(1, (q + 1) * q ** (n - 1))
    return math.exp(-math.log(q + 1) - (n - 1) * math.log(q))


def _geom(q: int, i: int):
    return Fraction(1, q**i) if i <= EXACT_DEPTH else q ** (-float(i))


def busemann_profile(q: int, y: Vertex, x: Vertex) -> dict[int, Fraction]:
    """Distribution of ``h_w(y) = 2|c(y, w)| - |y|`` for ``w`` uniform on ``Omega(o, x)``.

    If ``x`` is not on the geodesic ``[o, y]`` the confluence point is
    ``x ^ y`` for every ray through ``x``.  Otherwise a ray through ``x``
    keeps following ``[x, y]`` for exactly ``i`` more steps with probability
    ``(1 - 1/q) q^{-i}`` and reaches ``y`` with probability ``q^{-d(x, y)}``.
    """
    if x.depth == 0:
        raise ValueError("x = o spans the whole boundary; use boundary_profile")
    if not x.is_prefix_of(y):
        return {2 * meet_depth(x, y) - y.depth: Fraction(1)}
    d = y.depth - x.depth
    out: dict[int, Fraction] = {}
    for i in range(d):
        out[2 * (x.depth + i) - y.depth] = (1 - Fraction(1, q)) * _geom(q, i)
    out[y.depth] = _geom(q, d)
    return out


def boundary_profile(q: int, y: Vertex) -> dict[int, Fraction]:
    """Distribution of ``h_w(y)`` for ``w`` distributed by ``nu`` on all of ``Omega``."""
    n = y.depth
    if n == 0:
        return {0: Fraction(1)}
    out = {-n: Fraction(q, q + 1)}
    for i in range(1, n):
        out[2 * i - n] = Fraction(1, q + 1) * (1 - Fraction(1, q)) * _geom(q, i - 1)
    out[n] = Fraction(1, q + 1) * _geom(q, n - 1)
    return out


def _mean_power(q: int, profile: dict[int, Fraction], s):
    return sum(float(pr) * q ** (s * h) for h, pr in profile.items())


def sector_mean_power(q: int, y: Vertex, x: Vertex, s):
    """``E[q^{s h_w(y)} | w in Omega(o, x)]``; ``s`` may be complex."""
    if x.depth == 0:
        return boundary_mean_power(q, y, s)
    return _mean_power(q, busemann_profile(q, y, x), s)


def boundary_mean_power(q: int, y: Vertex, s):
    return _mean_power(q, boundary_profile(q, y), s)


@dataclass(frozen=True)
class GateClass:
    """Vertices whose root geodesic passes through ``gate`` (``|gate| = rho``).

    ``meets[i]`` is ``|gate ^ y_i|`` for the i-th support point and
    ``on_path[i]`` records whether ``y_i`` lies on ``[o, gate]``.  For ``x``
    in the class at depth ``n >= rho``:
    ``d(x, y_i) = n + |y_i| - 2 meets[i]`` and there are ``q^{n - rho}`` such ``x``.
    """

    gate: Vertex
    meets: tuple[int, ...] = field(default=())
    on_path: tuple[bool, ...] = field(default=())

    @property
    def rho(self) -> int:
        return self.gate.depth

    def offsets(self, support: Sequence[Vertex]) -> list[int]:
        """``d(x, y_i) - |x|`` for every support point."""
        return [y.depth - 2 * m for y, m in zip(support, self.meets)]

    def multiplicity(self, q: int, n: int) -> int:
        if n < self.rho:
            raise ValueError("depth below the gate")
        return q ** (n - self.rho)


def gate_classes(q: int, rho: int, support: Sequence[Vertex] = ()) -> list[GateClass]:
    """One class per depth-``rho`` vertex, with meet data for ``support``.

    Support points must have depth ``<= rho``.  Interior vertices
    (depth ``< rho``) are not covered and are handled one by one by callers.
    """
    if rho < 1:
        raise ValueError("gate radius must be >= 1")
    if any(y.depth > rho for y in support):
        raise ValueError("support point deeper than the gate radius")
    out = []
    for g in vertices_at(q, rho):
        meets = tuple(meet_depth(g, y) for y in support)
        on_path = tuple(y.is_prefix_of(g) for y in support)
        out.append(GateClass(g, meets, on_path))
    return out


def sphere_split_counts(q: int, n: int, k: int) -> dict[int, int]:
    """For ``|x| = n``: number of ``y`` with ``|y| = k`` at each distance ``d(x, y)``.

    Classified by the meet depth ``j = |x ^ y|``; this is what turns a
    convolution with a radial function into a sum over radii.
    """
    out: dict[int, int] = {}

    def add(d, c):
        out[d] = out.get(d, 0) + c

    for j in range(min(n, k) + 1):
        if j == k:  # y is an ancestor of x (or x itself)
            add(n - k, 1)
        elif j == n:  # y descends from x
            add(k - n, sphere_volume(q, k) if n == 0 else q ** (k - n))
        else:  # y branches off the geodesic [o, x] at depth j
            first = q if j == 0 else q - 1
            add(n + k - 2 * j, first * q ** (k - j - 1))
    return out
