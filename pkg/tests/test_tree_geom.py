import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treeheat.spectral import spherical_fn
from treeheat.tree_geom import (
    ROOT,
    TreeParams,
    Vertex,
    ball,
    boundary_mean_power,
    boundary_profile,
    busemann_profile,
    distance,
    gate_classes,
    meet_depth,
    neighbours,
    sector_mean_power,
    sector_measure,
    sphere_split_counts,
    sphere_volume,
    vertices_at,
)


def descendants(q, x, depth):
    return [v for v in vertices_at(q, depth) if x.is_prefix_of(v)]


def brute_profile(q, y, x, depth):
    # every depth-`depth` vertex below x carries the same boundary mass
    verts = descendants(q, x, depth) if x.depth else list(vertices_at(q, depth))
    out = {}
    for z in verts:
        h = 2 * meet_depth(y, z) - y.depth
        out[h] = out.get(h, 0) + Fraction(1, len(verts))
    return out


@st.composite
def vertices(draw, q, max_depth=5):
    n = draw(st.integers(0, max_depth))
    if n == 0:
        return ROOT
    first = draw(st.integers(0, q))
    rest = draw(st.lists(st.integers(0, q - 1), min_size=n - 1, max_size=n - 1))
    return Vertex((first, *rest))


def test_distance_examples():
    x = Vertex((0, 1))
    assert distance(ROOT, ROOT) == 0
    assert distance(x, ROOT) == 2
    assert distance(x, Vertex((0, 0))) == 2


def test_sphere_volume_examples():
    assert sphere_volume(2, 0) == 1
    assert sphere_volume(2, 1) == 3
    assert sphere_volume(3, 4) == 108
    with pytest.raises(ValueError):
        sphere_volume(2, -1)


def test_vertex_parsing_round_trip():
    for text in ("", "0", "0.1.1", "3.0.2"):
        assert str(Vertex.parse(text)) == text
    with pytest.raises(ValueError):
        Vertex.parse("0.2").validate(2)
    Vertex.parse("2.1").validate(2)


def test_invalid_q():
    with pytest.raises(ValueError):
        TreeParams(1)


@pytest.mark.parametrize("q", [2, 3, 4])
def test_vertices_at_counts_and_adjacency(q):
    for n in range(5):
        vs = list(vertices_at(q, n))
        assert len(vs) == len(set(vs)) == sphere_volume(q, n)
    for x in ball(q, 3):
        nb = neighbours(q, x)
        assert len(nb) == q + 1
        assert all(distance(x, y) == 1 for y in nb)


@pytest.mark.parametrize("q", [2, 3, 5])
def test_sector_measures_sum_to_one(q):
    for n in range(1, 6):
        assert sum(sector_measure(q, x) for x in vertices_at(q, n)) == 1
    assert isinstance(sector_measure(q, Vertex((0,) * 61)), float)


@given(st.data())
def test_distance_matches_path_length(data):
    q = data.draw(st.integers(2, 3))
    x = data.draw(vertices(q))
    y = data.draw(vertices(q))
    # climb to the meet and back down
    m = meet_depth(x, y)
    assert x.prefix(m) == y.prefix(m)
    assert distance(x, y) == (x.depth - m) + (y.depth - m)
    assert distance(x, y) == distance(y, x)


@pytest.mark.parametrize("q", [2, 3])
def test_distance_is_graph_distance(q):
    # breadth-first search from a fixed vertex on a ball of radius 5
    src = Vertex((1, 0))
    seen = {src: 0}
    frontier = [src]
    while frontier:
        nxt = []
        for v in frontier:
            for w in neighbours(q, v):
                if w.depth <= 5 and w not in seen:
                    seen[w] = seen[v] + 1
                    nxt.append(w)
        frontier = nxt
    for v, d in seen.items():
        assert distance(src, v) == d


def test_busemann_examples():
    q = 2
    assert busemann_profile(q, ROOT, Vertex((1,))) == {0: 1}
    y, x = Vertex((0, 1)), Vertex((0, 0, 1))
    assert busemann_profile(q, y, x) == {2 * 1 - 2: 1}
    y, x = Vertex((2,)), Vertex((2, 1, 0))
    assert busemann_profile(q, y, x) == {1: 1}
    with pytest.raises(ValueError):
        busemann_profile(q, y, ROOT)


@pytest.mark.parametrize("q", [2, 3])
def test_busemann_profile_brute_force(q):
    for y in ball(q, 3):
        for x in ball(q, 3):
            if x.depth == 0:
                continue
            assert busemann_profile(q, y, x) == brute_profile(q, y, x, 6)
        assert boundary_profile(q, y) == brute_profile(q, y, ROOT, 5)


@given(st.data())
def test_busemann_profile_range_and_mass(data):
    q = data.draw(st.integers(2, 4))
    y = data.draw(vertices(q, 8))
    x = data.draw(vertices(q, 8))
    prof = boundary_profile(q, y) if x.depth == 0 else busemann_profile(q, y, x)
    assert sum(prof.values()) == 1
    assert all(-y.depth <= h <= y.depth for h in prof)


def test_sector_mean_power_examples():
    q = 3
    x = Vertex((1, 2))
    assert sector_mean_power(q, ROOT, x, 0.7) == 1.0
    assert sector_mean_power(q, Vertex((0, 1)), x, 0.0) == pytest.approx(1.0, abs=1e-15)
    y = Vertex((1, 0))
    xx = Vertex((1, 1, 2))
    assert sector_mean_power(q, y, xx, 0.4) == pytest.approx(q ** (0.4 * (2 * 1 - 2)))


@pytest.mark.parametrize("q", [2, 3])
@pytest.mark.parametrize("lam", [0.3, 1.1 + 0.2j, 0.25j, 0.0])
def test_boundary_mean_reproduces_spherical_function(q, lam):
    s = 0.5 + 1j * lam
    for n in range(9):
        y = Vertex((0,) * n)
        assert boundary_mean_power(q, y, s) == pytest.approx(complex(spherical_fn(lam, n, q)), abs=1e-12)


def test_gate_class_counts():
    assert len(gate_classes(2, 1)) == 3
    assert len(gate_classes(2, 3)) == 12
    assert sum(g.multiplicity(2, 5) for g in gate_classes(2, 3)) == sphere_volume(2, 5)
    with pytest.raises(ValueError):
        gate_classes(2, 0)


@pytest.mark.parametrize("seed", range(6))
def test_gate_partition_and_distances(seed):
    rng = random.Random(seed)
    q = rng.choice([2, 3, 4])
    rho = rng.choice([1, 2, 3])
    support = rng.sample(ball(q, rho), min(3, len(ball(q, rho))))
    classes = gate_classes(q, rho, support)
    for n in range(rho, min(rho + 6, 8 if q == 2 else 6)):
        bins = {g.gate: [] for g in classes}
        for x in vertices_at(q, n):
            bins[x.prefix(rho)].append(x)
        for g in classes:
            xs = bins[g.gate]
            assert len(xs) == g.multiplicity(q, n)
            off = g.offsets(support)
            for x in xs[:20]:
                assert [distance(x, y) - n for y in support] == off
            assert g.on_path == tuple(y.is_prefix_of(g.gate) for y in support)


@pytest.mark.parametrize("q", [2, 3])
def test_sphere_split_counts_brute_force(q):
    for n, k in itertools.product(range(5), range(5)):
        counts = sphere_split_counts(q, n, k)
        x = Vertex((0,) * n)
        brute = {}
        for y in vertices_at(q, k):
            d = distance(x, y)
            brute[d] = brute.get(d, 0) + 1
        assert counts == brute
        assert sum(counts.values()) == sphere_volume(q, k)


def test_sphere_split_counts_symmetry():
    q = 3
    # |S(n)| * #{y in S(k) at distance d} = |S(k)| * #{x in S(n) at distance d}
    for n, k in itertools.product(range(6), range(6)):
        a, b = sphere_split_counts(q, n, k), sphere_split_counts(q, k, n)
        assert {d: sphere_volume(q, n) * c for d, c in a.items()} == {d: sphere_volume(q, k) * c for d, c in b.items()}
        assert np.all(np.array(list(a)) % 2 == (n + k) % 2)
