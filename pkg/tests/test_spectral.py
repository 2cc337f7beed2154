import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from fractsob.errors import ParameterError, PreconditionError, SpectralDomainError
from fractsob.geometry import build_level
from fractsob.spectral import (
    DIRICHLET,
    NEUMANN,
    apply_spectral,
    assemble,
    eigensolve,
    fractional_power,
    heat,
    heat_diagonal_fit,
    kernel_bound_check,
    kernel_eval,
    kernel_lp_norm,
    kernel_matrix,
    level_eigensystem,
    linf_embedding_check,
    resolvent,
)


def dense_operator(eig):
    a = eig.assembly
    return a.free_stiffness().toarray() / a.free_mass()[:, None]


def test_sg_level1_dirichlet_eigenvalues(sg):
    # interior block of A_1 is 4I minus the triangle adjacency (eigenvalues 2, 5, 5);
    # with r^{-1} = 5/3 and interior mass 2/9 the operator is 7.5 A_II
    eig = level_eigensystem(sg, 1)
    np.testing.assert_allclose(eig.values, [15.0, 37.5, 37.5], rtol=1e-12)


def test_mass_orthonormal(sg, v12):
    for spec, m in [(sg, 4), (v12, 3)]:
        for bc in (DIRICHLET, NEUMANN):
            eig = level_eigensystem(spec, m, bc)
            G = eig.vectors.T @ (eig.assembly.free_mass()[:, None] * eig.vectors)
            np.testing.assert_allclose(G, np.eye(len(eig.values)), atol=1e-10)


def test_neumann_kernel_is_constants(sg):
    eig = level_eigensystem(sg, 3, NEUMANN)
    assert eig.values[0] == 0.0 and eig.values[1] > 1.0
    c = eig.vectors[:, 0]
    np.testing.assert_allclose(c, c[0], rtol=1e-10)
    # constants have unit norm in the probability mass
    assert abs(c[0]) == pytest.approx(1.0)


def test_heat_matches_expm(sg):
    eig = level_eigensystem(sg, 3)
    rng = np.random.default_rng(0)
    f = rng.standard_normal(eig.graph.n_vertices)
    t = 0.003
    ref = scipy.linalg.expm(-t * dense_operator(eig)) @ f[eig.assembly.free]
    np.testing.assert_allclose(heat(eig, t, f)[eig.assembly.free], ref, rtol=1e-9, atol=1e-12)


def test_identity_multiplier_and_inverse(sg):
    eig = level_eigensystem(sg, 3)
    rng = np.random.default_rng(1)
    f = rng.standard_normal(eig.graph.n_vertices)
    free = eig.assembly.free
    np.testing.assert_allclose(apply_spectral(eig, lambda x: np.ones_like(x), f)[free], f[free], atol=1e-10)
    Lf = dense_operator(eig) @ f[free]
    np.testing.assert_allclose(fractional_power(eig, -1.0, eig.full(Lf))[free], f[free], rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(fractional_power(eig, 1.0, f)[free], Lf, rtol=1e-8, atol=1e-8)


def test_resolvent_solves_shifted_system(sg):
    eig = level_eigensystem(sg, 3)
    f = np.random.default_rng(2).standard_normal(eig.graph.n_vertices)
    lam = 7.0
    u = resolvent(eig, lam, f)[eig.assembly.free]
    A = dense_operator(eig) + lam * np.eye(len(u))
    np.testing.assert_allclose(A @ u, f[eig.assembly.free], rtol=1e-9, atol=1e-9)


def test_riesz_under_neumann_fails(sg):
    eig = level_eigensystem(sg, 2, NEUMANN)
    with pytest.raises(SpectralDomainError):
        kernel_matrix(eig, "riesz", 0.5)
    with pytest.raises(SpectralDomainError):
        fractional_power(eig, -0.5, np.ones(eig.graph.n_vertices))


def test_resolvent_at_zero_is_green_kernel(sg):
    eig = level_eigensystem(sg, 3)
    G = kernel_matrix(eig, "riesz", 1.0)
    np.testing.assert_allclose(kernel_matrix(eig, "resolvent", 1e-12), G, rtol=1e-9, atol=1e-12)


def test_kernel_symmetric_and_pointwise(sg):
    eig = level_eigensystem(sg, 3)
    K = kernel_matrix(eig, "heat", 0.01)
    np.testing.assert_allclose(K, K.T)
    assert kernel_eval(eig, "heat", 0.01, 5, 9) == pytest.approx(K[5, 9])


def test_unknown_kind(sg):
    with pytest.raises(ParameterError):
        kernel_matrix(level_eigensystem(sg, 2), "wave", 1.0)


def test_bad_boundary_condition(sg):
    with pytest.raises(ParameterError):
        assemble(sg, 2, "robin")


def test_partial_spectrum_agrees_with_dense(sg):
    a = assemble(sg, 4)
    dense = eigensolve(a)
    part = eigensolve(a, k=12)
    assert not part.complete
    np.testing.assert_allclose(part.values, dense.values[:12], rtol=1e-9)
    assert part.truncation_bound(1.0) == pytest.approx(np.exp(-part.values[-1]))


def test_dense_limit(sg):
    with pytest.raises(ParameterError):
        eigensolve(assemble(sg, 4), dense_limit=10)


def test_spectral_gap_ratio_stable(sg):
    # low eigenvalues of the renormalized operator converge as the level grows
    l4 = level_eigensystem(sg, 4).values[:5]
    l5 = level_eigensystem(sg, 5).values[:5]
    assert np.all(np.abs(l5 / l4 - 1) < 0.05)


@settings(max_examples=10, deadline=None)
@given(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
def test_heat_semigroup(t, s):
    from fractsob.geometry import make_sg

    eig = level_eigensystem(make_sg(), 3)
    f = np.linspace(-1, 1, eig.graph.n_vertices)
    np.testing.assert_allclose(heat(eig, t, heat(eig, s, f)), heat(eig, t + s, f), atol=1e-10)


def test_heat_positivity_and_mass(sg):
    eig = level_eigensystem(sg, 3, NEUMANN)
    K = kernel_matrix(eig, "heat", 0.01)
    assert K.min() > -1e-10
    np.testing.assert_allclose(K @ eig.assembly.mass, 1.0, rtol=1e-9)


def test_lp_norm_monotone_in_radius(sg):
    eig = level_eigensystem(sg, 4)
    x = int(eig.graph.interior_ids()[10])
    radii = [0.05, 0.1, 0.2, 0.4, 1.0]
    for p in (1.0, 2.0, np.inf):
        norms = [kernel_lp_norm(eig, "riesz", 0.7, x, p, r) for r in radii]
        assert all(a <= b + 1e-12 for a, b in zip(norms, norms[1:]))


def test_heat_diagonal_window(sg):
    eig = level_eigensystem(sg, 4)
    fit, (t0, t1) = heat_diagonal_fit(eig, int(eig.graph.interior_ids()[0]))
    assert t0 < t1 and fit.slope < 0
    with pytest.raises(PreconditionError):
        heat_diagonal_fit(eig, 0, t_window=(1.0, 0.5))


def test_bound_check_needs_grid(sg):
    with pytest.raises(PreconditionError):
        kernel_bound_check(level_eigensystem(sg, 3), "riesz", [])


def test_embedding_precondition(sg):
    eig = level_eigensystem(sg, 3)
    with pytest.raises(PreconditionError):
        linf_embedding_check(eig, 0.1, 2.0, trials=2)
    rep = linf_embedding_check(eig, 0.8, np.inf, trials=5)
    assert rep.passed and rep.max_ratio <= 1.0


def test_level_graph_sizes(sg):
    eig = level_eigensystem(sg, 3)
    assert len(eig.values) == build_level(sg, 3).n_vertices - 3
