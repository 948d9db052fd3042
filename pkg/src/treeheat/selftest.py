"""Fast invariant checks behind ``treeheat selftest``."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from .caloric import FiniteFn, convergence_diagnostic, mass_function
from .heat_tree import heat_tree_quadrature, heat_tree_series, lp_norm
from .special_fn import log_heat_z_table
from .spectral import c_function, inverse_spherical, spherical_transform
from .tree_geom import Vertex, vertices_at


def run_checks(seed: int = 0) -> Iterator[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)

    for q in (2, 3):
        for t in (1.0, 100.0):
            err = abs(float(lp_norm(t, 1, q).value) - 1)
            yield f"conservation q={q} t={t:g}", err < 1e-9, f"{err:.3g}"

    for t in (10.0, 1000.0):
        tab = log_heat_z_table(int(t + 40 + 12 * math.sqrt(t)), t)
        err = abs(math.exp(tab[0]) + 2 * np.sum(np.exp(tab[1:])) - 1)
        yield f"integer kernel normalisation t={t:g}", err < 1e-10, f"{err:.3g}"

    worst = 0.0
    for q in (2, 3):
        for n, t in ((0, 1.0), (7, 5.0), (40, 50.0)):
            a, b = heat_tree_series(n, t, q), heat_tree_quadrature(n, t, q)
            worst = max(worst, abs(math.expm1(a.log - b.log)) / (a.rel_bound + b.rel_bound))
    yield "series vs quadrature", worst <= 1, f"max error/bound {worst:.3g}"

    lam = rng.uniform(0.05, 2.0, 16) + 1j * rng.uniform(-0.3, 0.3, 16)
    err = max(abs(c_function(x, 3) + c_function(-x, 3) - 1) for x in lam)
    yield "c(lambda) + c(-lambda) = 1", err < 1e-10, f"{err:.3g}"

    f = rng.normal(size=11)
    err = max(
        abs(inverse_spherical(lambda l: spherical_transform(f, l, 2), n, 2).value - (f[n] if n < 11 else 0.0))
        for n in range(13)
    )
    yield "transform round trip", err < 1e-10, f"{err:.3g}"

    delta_o = FiniteFn.delta(2, "")
    ok = all(abs(mass_function(delta_o, p).at(x) - 1) < 1e-14 for p in (1, 1.5, 2, math.inf) for x in vertices_at(2, 3))
    yield "mass of delta_o is 1", ok, ""
    E = convergence_diagnostic(delta_o, 1.5, [50.0])[0].E
    yield "E vanishes for delta_o", E == 0.0, f"{E:.3g}"

    ys = list(vertices_at(2, 2))
    f1 = FiniteFn.from_dict(2, {y: rng.normal() for y in ys})
    f2 = FiniteFn.from_dict(2, {y: rng.normal() for y in ys[:3]})
    a, b = rng.normal(size=2)
    g = f1.combine(a, f2, b)
    x = Vertex((1, 0, 1, 1))
    err = max(
        abs(mass_function(g, p).at(x) - a * mass_function(f1, p).at(x) - b * mass_function(f2, p).at(x))
        for p in (1, 3)
    )
    yield "mass function linearity", err < 1e-12, f"{err:.3g}"
