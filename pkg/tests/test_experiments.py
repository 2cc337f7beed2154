import math
from fractions import Fraction

import numpy as np
import pytest

from fractsob.errors import ParameterError, PreconditionError
from fractsob.experiments import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    affine,
    algebra_failure_experiment,
    bump,
    bump_radius,
    centered_power,
    centered_square,
    check_convexity,
    composition_experiment,
    decay_exponent,
    default_bump_center,
    difference_decay_experiment,
    harmonic_source,
    local_slopes,
    normal_derivative_experiment,
    riesz_solution,
    square,
)
from fractsob.fitting import fit_decay
from fractsob.geometry import build_level
from fractsob.sobolev import delta_m, normal_derivative

JUNCTION = (Fraction(1, 2), Fraction(0))


def test_decay_exponent_cases():
    D = math.log(3) / math.log(5 / 3)
    assert decay_exponent(D, 0.8, math.inf, math.inf) == pytest.approx(0.8 * (D + 1))
    assert decay_exponent(D, 0.8, math.inf, 2.0) == pytest.approx(0.8 * (D + 1) - D / 2)
    # Q > p: the weaker exponent D/p applies
    assert decay_exponent(D, 0.8, 2.0, 4.0) == pytest.approx(0.8 * (D + 1) - D / 2)


def test_bump_geometry(sg):
    assert bump_radius(sg) == pytest.approx(0.34375)
    assert default_bump_center(sg) == (Fraction(1, 8), Fraction(0))
    g = build_level(sg, 3)
    b = bump(g, default_bump_center(sg))
    assert b.max() == 1.0 and b.min() == 0.0
    with pytest.raises(ParameterError):
        bump(g, (0, 0), rho=0.0)


def test_decay_is_linear_in_f(sg):
    g = build_level(sg, 5)
    f = np.ones(g.n_vertices)
    a = difference_decay_experiment(sg, 0.8, math.inf, math.inf, f, range(1, 5), 5)
    b = difference_decay_experiment(sg, 0.8, math.inf, math.inf, 10 * f, range(1, 5), 5)
    assert a.slopes["difference_norm"] == pytest.approx(b.slopes["difference_norm"], abs=1e-9)
    for ra, rb in zip(a.table, b.table):
        assert rb["norm"] == pytest.approx(10 * ra["norm"])


def test_decay_precondition(sg):
    g = build_level(sg, 3)
    with pytest.raises(PreconditionError):
        difference_decay_experiment(sg, 0.05, 1.5, math.inf, np.ones(g.n_vertices), [1, 2], 3)


def test_normal_derivative_passes(sg):
    g = build_level(sg, 6)
    f = bump(g, default_bump_center(sg))
    rep = normal_derivative_experiment(sg, 0.95, math.inf, JUNCTION, (1,), f, range(1, 6), 6)
    assert rep.verdict == PASS
    assert rep.slopes["remainder"] >= rep.theory["remainder"] - 0.15
    assert any("p = inf" in fl for fl in rep.flags)


def test_wrong_constant_has_slope_one(sg):
    # with du replaced by du + 1 the remainder is dominated by r^m
    g = build_level(sg, 6)
    graph, u = riesz_solution(sg, 6, 0.95, bump(g, default_bump_center(sg)))
    du = normal_derivative(graph, u, JUNCTION, (1,)).value
    r = float(sg.r)
    levels = list(range(1, 6))
    rem = [abs(float(delta_m(graph, u, JUNCTION, (1,), m)) - r**m * (du + 1)) for m in levels]
    assert fit_decay(levels, rem, r).slope == pytest.approx(1.0, abs=0.05)


def test_zero_source_is_degenerate(sg):
    g = build_level(sg, 4)
    rep = normal_derivative_experiment(sg, 0.95, math.inf, JUNCTION, (1,), np.zeros(g.n_vertices),
                                       range(1, 4), 4)
    assert rep.verdict == INCONCLUSIVE


def test_normal_derivative_precondition(sg):
    g = build_level(sg, 4)
    with pytest.raises(PreconditionError):
        normal_derivative_experiment(sg, 0.6, 2.0, JUNCTION, (1,), np.ones(g.n_vertices), range(1, 4), 4)


def test_algebra_harmonic_slope_of_delta(sg):
    rep = algebra_failure_experiment(sg, 0.9, math.inf, JUNCTION, (1,), "harmonic", range(1, 6), 5)
    # delta_m u(q) = r^m du(q) exactly for harmonic u; at level 1 in cell 1
    # delta = 3 (2/5) - (1 + 2/5 + 2/5) = -3/5, so du = (5/3)(-3/5) = -1
    assert rep.slopes["delta_u"] == pytest.approx(1.0, abs=1e-9)
    assert rep.extra["du"] == pytest.approx(-1.0)
    assert rep.verdict in (PASS, FAIL)


def test_symmetric_junction_is_inconclusive(sg):
    q = (Fraction(3, 4), Fraction(7, 16))
    rep = algebra_failure_experiment(sg, 0.9, math.inf, q, (2,), "harmonic", range(1, 6), 5,
                                     boundary_values=(1, 0, 0))
    assert rep.verdict == INCONCLUSIVE
    assert rep.extra["du"] == 0.0


def test_boundary_values_follow_boundary_order(sg):
    u = harmonic_source(sg, 1, (0, 0, 1))
    g = build_level(sg, 1)
    assert u[g.index_of(sg.boundary_points[2])] == 1
    assert u[g.index_of(sg.boundary_points[1])] == 0


def test_algebra_precondition(sg):
    with pytest.raises(PreconditionError):
        algebra_failure_experiment(sg, 0.6, math.inf, JUNCTION, (1,), "harmonic", range(1, 4), 4)
    with pytest.raises(ParameterError):
        algebra_failure_experiment(sg, 0.9, math.inf, JUNCTION, (1,), "noise", range(1, 4), 4)


def test_local_slopes():
    r = 0.6
    vals = [r ** (2 * m) for m in range(1, 5)]
    np.testing.assert_allclose(local_slopes(range(1, 5), vals, r), [2, 2, 2])
    assert math.isnan(local_slopes([1, 2], [0.0, 1.0], r)[0])


@pytest.mark.parametrize("phi", [centered_power(1.5), centered_square(), square()])
def test_composition_chain(sg, phi):
    rep = composition_experiment(sg, 0.9, math.inf, JUNCTION, (1,), "harmonic", phi, range(1, 6), 5)
    assert rep.extra["chain_holds"]
    assert rep.verdict == PASS


def test_composition_rejects(sg):
    with pytest.raises(PreconditionError):
        composition_experiment(sg, 0.9, math.inf, JUNCTION, (1,), "harmonic", affine(2.0), range(1, 6), 5)
    with pytest.raises(PreconditionError):
        composition_experiment(sg, 0.9, math.inf, JUNCTION, (1,), "harmonic", centered_power(3.0),
                               range(1, 6), 5)


def test_convexity_check():
    ys = np.linspace(-2, 2, 101)
    assert check_convexity(square(), 0.3, ys)
    assert check_convexity(centered_power(1.5), 0.3, ys)
    assert not check_convexity(affine(1.0), 0.3, ys)
