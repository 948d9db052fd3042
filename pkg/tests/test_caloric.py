import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treeheat.caloric import (
    FiniteFn,
    RadialFn,
    convergence_diagnostic,
    load_z_input,
    mass_function,
    solve,
    solve_radial,
    weight,
    weighted_membership,
    z_diagnostic,
)
from treeheat.heat_tree import heat_profile, heat_tree_series
from treeheat.spectral import phi0, spherical_transform
from treeheat.tree_geom import ROOT, TreeParams, Vertex, ball, distance, vertices_at

Y2 = Vertex((0, 1))


def random_fn(rng, q, radius, size):
    pts = ball(q, radius)
    idx = rng.choice(len(pts), size=min(size, len(pts)), replace=False)
    return FiniteFn.from_dict(q, {pts[i]: float(rng.normal()) for i in idx})


def test_finite_fn_json_round_trip(tmp_path):
    f = FiniteFn.from_dict(2, {Y2: 1.5, ROOT: -0.5})
    path = tmp_path / "f.json"
    path.write_text(json.dumps(f.to_json()))
    assert FiniteFn.load(path) == f
    assert FiniteFn.from_json({"q": 3, "radial": [1, 0.5]}).rho == 1
    with pytest.raises(ValueError):
        FiniteFn.from_json({"entries": []})
    with pytest.raises(ValueError):
        FiniteFn.from_json({"q": 2, "entries": [{"vertex": "0", "value": 1}, {"vertex": "0", "value": 2}]})
    with pytest.raises(ValueError):
        FiniteFn.from_json({"q": 2, "entries": [{"vertex": "0.2", "value": 1}]})
    with pytest.raises(ValueError):
        FiniteFn.from_json({"q": 2, "radial": [1]}, q=3)


def test_solve_delta_at_origin_is_kernel():
    t = 7.0
    u = solve(FiniteFn.delta(2, ""), t)
    prof = heat_profile(t, 40, 2)
    for x in ball(2, 5):
        assert u.at(x) == pytest.approx(math.exp(prof.log_h[x.depth]), rel=1e-13)


def test_solve_symmetry():
    t = 12.0
    u = solve(FiniteFn.delta(2, Y2), t)
    assert u.at(ROOT) == pytest.approx(float(heat_tree_series(2, t, 2).value), rel=1e-13)


def test_solve_time_zero_returns_f():
    f = FiniteFn.from_dict(3, {Y2: 2.0, Vertex((3,)): -1.0})
    u = solve(f, 0.0, nmax=5)
    for x in ball(3, 4):
        assert u.at(x) == pytest.approx(f(x), abs=1e-15)


@pytest.mark.parametrize("seed", range(3))
def test_solve_conserves_mass(seed):
    rng = np.random.default_rng(seed)
    q = int(rng.choice([2, 3]))
    f = random_fn(rng, q, 2, 4)
    for t in (1.0, 20.0):
        assert solve(f, t).total_mass() == pytest.approx(f.total(), abs=1e-9)


def test_solve_matches_brute_force():
    q, t = 2, 3.0
    f = FiniteFn.from_dict(q, {Y2: 1.0, Vertex((2,)): -0.7, ROOT: 0.2})
    u = solve(f, t, nmax=8)
    h = np.exp(heat_profile(t, 30, q).log_h)
    for x in ball(q, 6):
        direct = sum(a * h[distance(x, y)] for y, a in f.entries)
        assert u.at(x) == pytest.approx(direct, rel=1e-13)


def test_solve_radial_matches_gates():
    q, t = 2, 5.0
    vals = [1.0, -0.5, 0.25]
    f = FiniteFn.radial(q, vals)
    u = solve(f, t, nmax=10)
    ur = solve_radial(vals, t, q, 10)
    for x in ball(q, 6):
        assert u.at(x) == pytest.approx(ur[x.depth], rel=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(-2, 2), st.floats(-2, 2))
def test_solve_and_mass_are_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    q = 2
    f, g = random_fn(rng, q, 2, 3), random_fn(rng, q, 2, 3)
    h = f.combine(a, g, b)
    t = 4.0
    uf, ug, uh = solve(f, t, nmax=6), solve(g, t, nmax=6), solve(h, t, nmax=6)
    for x in ball(q, 4):
        assert uh.at(x) == pytest.approx(a * uf.at(x) + b * ug.at(x), abs=1e-12)
    for p in (1.0, 1.5, 3.0):
        mf, mg, mh = (mass_function(k, p) for k in (f, g, h))
        for x in ball(q, 4):
            assert mh.at(x) == pytest.approx(a * mf.at(x) + b * mg.at(x), abs=1e-12)


@pytest.mark.parametrize("p", [1.0, 1.3, 2.0, 3.0, math.inf])
def test_mass_of_delta_origin_is_one(p):
    m = mass_function(FiniteFn.delta(2, ""), p)
    for x in ball(2, 4):
        assert m.at(x) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("q", [2, 3])
@pytest.mark.parametrize("p", [1.0, 1.25, 1.5, 1.9, 2.0, 4.0, math.inf])
def test_radial_mass_is_transform_at_imaginary_point(q, p):
    vals = [0.5, -1.0, 0.75]
    f = FiniteFn.radial(q, vals)
    m = mass_function(f, p)
    ref = float(np.real(spherical_transform(vals, 1j * TreeParams(q).delta(p), q)))
    assert m.constant == pytest.approx(ref, rel=1e-12)
    for x in ball(q, 4):
        assert m.at(x) == pytest.approx(ref, rel=1e-12)


def test_l1_mass_of_radial_is_total():
    f = FiniteFn.radial(2, [1.0, 2.0, -3.0])
    assert mass_function(f, 1).constant == pytest.approx(f.total(), rel=1e-13)


def test_p2_variants_gap_shrinks_like_inverse_radius():
    f = FiniteFn.delta(2, Y2)
    a, b = mass_function(f, 2, "phi0"), mass_function(f, 2, "boundary")
    gaps = []
    for n0 in (10, 100, 1000):
        d = np.arange(n0, n0 + 3)
        gaps.append(float(np.max(np.abs(a.gate_profile(d) - b.gate_profile(d)))))
    assert gaps[0] > gaps[1] > gaps[2] > 0
    assert all(g * n0 < 5 for g, n0 in zip(gaps, (10, 100, 1000)))


def test_mass_variant_rules():
    f = FiniteFn.delta(2, Y2)
    with pytest.raises(ValueError):
        mass_function(f, 1.5, "phi0")
    with pytest.raises(ValueError):
        mass_function(f, 3, "boundary")
    with pytest.raises(ValueError):
        mass_function(f, 0.5)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
@pytest.mark.parametrize("seed", range(3))
def test_mass_function_bounded(p, seed):
    rng = np.random.default_rng(seed)
    f = random_fn(rng, 2, 3, 5)
    m = mass_function(f, p)
    assert m.sup(np.arange(3, 200)) <= m.bound() * (1 + 1e-12)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_mass_bound_attained_on_the_ray(p):
    # below y the sector means all equal q^{|y| s}
    y = Vertex((1, 0, 1))
    m = mass_function(FiniteFn.delta(2, y), p, "boundary" if p <= 2 else None)
    s = 1 / p if p < 2 else 0.5
    if m.variant == "boundary":
        assert m.at(Vertex((1, 0, 1, 0))) == pytest.approx(2 ** (3 * s), rel=1e-14)
    else:
        depths = np.array([3, 100, 10000])
        vals = m.gate_profile(depths)
        assert np.max(vals) < m.bound()
        assert np.max(vals[:, -1]) == pytest.approx(m.bound(), rel=1e-3)
    assert m.bound() == pytest.approx(2 ** (3 * s))


@pytest.mark.parametrize("q", [2, 3])
def test_phi0_quotient_inequality(q):
    for y in ball(q, 3):
        for x in ball(q, 5 if q == 2 else 4):
            assert phi0(distance(x, y), q) <= q ** (y.depth / 2) * phi0(x.depth, q) * (1 + 1e-12)


def test_weight():
    assert weight(2, 3, 1) == 8.0
    assert weight(2, 4, 3) == 4.0
    assert weight(3, 2, 2) == 3.0


def test_weighted_membership_examples():
    r = weighted_membership(FiniteFn.delta(2, Vertex((0, 0, 1)), -2.0), 1)
    assert r.w_norm == 16.0 and r.w_member and r.delta_member and r.certain
    lazy = RadialFn(2, func=lambda n: 2.0**-n / (1 + n * n))
    for p in (1.2, 1.5, 2.0):
        rep = weighted_membership(lazy, p)
        assert rep.delta_member and math.isfinite(rep.delta_norm)
        assert not rep.certain
    assert not weighted_membership(RadialFn(2, func=lambda n: 1.0), 1.5).delta_member
    fin = weighted_membership(RadialFn(2, values=[1.0, 1.0]), 1)
    assert fin.w_norm == pytest.approx(1 + 3 * 2)
    with pytest.raises(ValueError):
        RadialFn(2)


def test_weighted_norms_dominate_l1():
    f = FiniteFn.from_dict(3, {Y2: 1.0, Vertex((2,)): -2.0})
    for p in (1.0, 1.5, 2.0, 4.0):
        assert weighted_membership(f, p).w_norm >= np.sum(np.abs(f.values))


@pytest.mark.parametrize("p", [1.0, 2.0, math.inf])
def test_diagnostic_vanishes_for_delta_origin(p):
    rows = convergence_diagnostic(FiniteFn.delta(2, ""), p, [50.0, 200.0])
    assert all(r.E == 0 and r.certified for r in rows)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, math.inf])
def test_diagnostic_decreases(p):
    rows = convergence_diagnostic(FiniteFn.delta(2, Y2), p, [100.0, 300.0, 1000.0])
    E = [r.E for r in rows]
    assert E[0] > E[1] > E[2]
    assert E[2] < 0.1
    assert all(r.certified for r in rows)
    comp = [r.u_complement for r in rows]
    assert comp[0] > comp[1] > comp[2]


def test_diagnostic_parts_combine():
    (row,) = convergence_diagnostic(FiniteFn.delta(2, Y2), 1.5, [200.0])
    assert row.E == pytest.approx((row.E_critical**1.5 + row.E_complement**1.5) ** (1 / 1.5), rel=1e-9)


def test_diagnostic_wrong_mass_does_not_converge():
    f = FiniteFn.delta(2, Y2)
    right = convergence_diagnostic(f, 1, [1000.0])[0].E
    wrong = convergence_diagnostic(f, 1, [100.0, 1000.0], mass=f.total())
    assert wrong[-1].E >= 3 * right
    assert wrong[-1].E > 0.5


def test_diagnostic_threads_agree():
    f = FiniteFn.delta(2, Y2)
    a = convergence_diagnostic(f, 1, [50.0, 100.0], workers=1)
    b = convergence_diagnostic(f, 1, [50.0, 100.0], workers=2)
    assert a == b
    with pytest.raises(ValueError):
        convergence_diagnostic(f, 1, [0.0])


def test_z_examples():
    assert all(r.E == 0 for r in z_diagnostic({0: 1.0}, 1, [10.0, 100.0]))
    rows = z_diagnostic({3: 1.0, -3: -1.0}, 1, [100.0, 1000.0, 1e4])
    assert rows[0].E > rows[1].E > rows[2].E > 0
    assert all(r.E == pytest.approx(r.u_norm) for r in rows)
    for p in (1.0, 2.0):
        E = [r.E for r in z_diagnostic({2: 1.0}, p, [100.0, 1000.0, 1e4])]
        assert E[0] > E[1] > E[2] and E[2] < 0.05


def test_z_input():
    assert load_z_input({"entries": [{"site": -2, "value": 1}]}) == {-2: 1.0}
    with pytest.raises(ValueError):
        load_z_input({"entries": [{"site": 1, "value": 1}, {"site": 1, "value": 2}]})
