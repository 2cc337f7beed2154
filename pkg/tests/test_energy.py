from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractsob.energy import (
    energy,
    energy_form,
    energy_matrix,
    extension_matrix,
    harmonic_extend,
    harmonic_solve,
    resistance,
    resistance_matrix,
    spline,
)
from fractsob.geometry import build_level, embedding, make_vicsek


def exact(values):
    return np.array([Fraction(v) for v in values], dtype=object)


def test_sg_extension_rule(sg):
    # classical 1/5-2/5 rule: the midpoint opposite q_i gets 1/5, the two adjacent get 2/5
    g1 = build_level(sg, 1)
    u = harmonic_extend(build_level(sg, 0), exact([1, 0, 0]), 1)
    vals = {g1.vertices[i]: u[i] for i in range(g1.n_vertices)}
    assert vals[(Fraction(1, 2), Fraction(0))] == Fraction(2, 5)
    assert vals[(Fraction(1, 4), Fraction(7, 16))] == Fraction(2, 5)
    assert vals[(Fraction(3, 4), Fraction(7, 16))] == Fraction(1, 5)


@pytest.mark.parametrize("family", ["sg", (1, 2), (2, 2), (1, 3), (2, 3)])
def test_energy_fixed_point(sg, family):
    spec = sg if family == "sg" else make_vicsek(*family)
    g0, g1 = build_level(spec, 0), build_level(spec, 1)
    rng = np.random.default_rng(1)
    for _ in range(5):
        a = exact(rng.integers(-9, 10, spec.n_boundary))
        assert energy(g1, harmonic_extend(g0, a, 1), renormalized=True) == energy(g0, a)


def test_harmonic_is_minimal(sg):
    g0, g2 = build_level(sg, 0), build_level(sg, 2)
    u = harmonic_extend(g0, np.array([1.0, -0.5, 0.3]), 2)
    base = energy(g2, u)
    rng = np.random.default_rng(0)
    interior = g2.interior_ids()
    for _ in range(20):
        v = u.copy()
        v[interior] += 1e-3 * rng.standard_normal(len(interior))
        assert energy(g2, v) > base


def test_harmonic_solve_matches_extension(sg):
    g0, g3 = build_level(sg, 0), build_level(sg, 3)
    a = np.array([0.2, 1.0, -0.7])
    u = harmonic_extend(g0, a, 3)
    v = harmonic_solve(g3, embedding(g0, g3), a)
    np.testing.assert_allclose(u, v, atol=1e-12)


def test_extension_matrix_rows_sum_to_one(sg, v12):
    for spec in (sg, v12):
        H = extension_matrix(spec)
        assert all(sum(row) == 1 for row in H)


def test_energy_form_symmetric_and_exact(sg):
    g = build_level(sg, 2)
    rng = np.random.default_rng(3)
    u = exact(rng.integers(-5, 5, g.n_vertices))
    v = exact(rng.integers(-5, 5, g.n_vertices))
    assert energy_form(g, u, v) == energy_form(g, v, u)
    A = energy_matrix(g)
    assert float(energy_form(g, u, v)) == pytest.approx(u.astype(float) @ A @ v.astype(float))


def test_spline_is_one_at_q(sg):
    g1 = build_level(sg, 1)
    q = g1.interior_ids()[0]
    u = spline(g1, q, 3, exact=True)
    g3 = build_level(sg, 3)
    assert u[g3.index_of(g1.vertices[q])] == 1


@pytest.mark.parametrize("m", range(0, 5))
def test_sg_boundary_resistance(sg, m):
    # level-0 triangle: 1 parallel to 2 in series gives 2/3, preserved by renormalization
    g = build_level(sg, m)
    b = g.boundary_ids
    assert resistance(g, b[0], b[1]) == pytest.approx(2 / 3, abs=1e-12)


def test_resistance_routes_agree(sg, v12):
    for spec, m in [(sg, 3), (v12, 2)]:
        g = build_level(spec, m)
        R = resistance_matrix(g)
        rng = np.random.default_rng(0)
        for x, y in rng.integers(0, g.n_vertices, size=(10, 2)):
            assert R[x, y] == pytest.approx(resistance(g, int(x), int(y)), abs=1e-12)


def test_vicsek_resistance_is_path_length():
    # V(1,2) is a tree of cells; resistance between opposite corners: 3 diagonal steps
    spec = make_vicsek(1, 2)
    g = build_level(spec, 0)
    b = g.boundary_ids
    # K4 with unit edges: effective resistance 1/2
    assert resistance(g, b[0], b[3]) == pytest.approx(0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 41), st.integers(0, 41), st.integers(0, 41))
def test_resistance_is_a_metric(x, y, z):
    from fractsob.geometry import make_sg

    g = build_level(make_sg(), 3)
    R = resistance_matrix(g)
    assert R[x, y] == pytest.approx(R[y, x])
    assert R[x, z] <= R[x, y] + R[y, z] + 1e-12
    assert (R[x, y] > 0) == (x != y)
