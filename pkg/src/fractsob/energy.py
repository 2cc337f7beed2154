"""Graph energies, harmonic extension and effective resistance on level graphs.

Functions on V_m are plain 1-d arrays indexed by vertex id.  Object arrays of
:class:`fractions.Fraction` are accepted wherever exact arithmetic makes sense
(energies, harmonic extension, splines) and are carried through unchanged.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .errors import ConvergenceError, LevelMismatchError, ParameterError
from .geometry import IfsSpec, LevelGraph, build_level

SOLVE_RESIDUAL_TOL = 1e-12


def _check(graph: LevelGraph, u) -> np.ndarray:
    u = np.asarray(u)
    if u.ndim != 1 or u.shape[0] != graph.n_vertices:
        raise LevelMismatchError(
            f"function of length {u.shape[0] if u.ndim else 0} does not live on "
            f"V_{graph.level} ({graph.n_vertices} vertices)"
        )
    return u


def is_exact(u: np.ndarray) -> bool:
    return np.asarray(u).dtype == object


@lru_cache(maxsize=64)
def energy_matrix(graph: LevelGraph, renormalized: bool = False) -> sp.csr_matrix:
    """Sparse Laplacian of the m-edge graph, optionally scaled by r^{-m}.

    ``u @ A @ u`` is the sum of (u(x) - u(y))^2 over edges x ~_m y.
    """
    n = graph.n_vertices
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    ones = np.ones(len(a))
    W = sp.coo_matrix((np.r_[ones, ones], (np.r_[a, b], np.r_[b, a])), shape=(n, n)).tocsr()
    A = sp.diags(np.asarray(W.sum(axis=1)).ravel()) - W
    if renormalized:
        A = A * float(graph.spec.r) ** (-graph.level)
    A = A.tocsr()
    A.sort_indices()
    return A


def renormalization(graph: LevelGraph, exact: bool):
    scale = graph.spec.r ** (-graph.level)
    return scale if exact else float(scale)


def energy(graph: LevelGraph, u, renormalized: bool = False):
    """Sum of squared edge differences of ``u``; times r^{-m} if renormalized."""
    return energy_form(graph, u, u, renormalized)


def energy_form(graph: LevelGraph, u, v, renormalized: bool = False):
    """Bilinear energy sum_{x~y} (u(x)-u(y))(v(x)-v(y))."""
    u = _check(graph, u)
    v = _check(graph, v)
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    exact = is_exact(u) or is_exact(v)
    total = ((u[a] - u[b]) * (v[a] - v[b])).sum()
    if exact:
        total = Fraction(total) if not isinstance(total, Fraction) else total
    else:
        total = float(total)
    if renormalized:
        total = total * renormalization(graph, exact)
    return total


@lru_cache(maxsize=16)
def extension_matrix(spec: IfsSpec) -> np.ndarray:
    """Exact |V_1| x |V_0| map sending boundary values to their harmonic extension.

    Column i corresponds to q_i.  Interior values come from the Schur
    complement of the level-1 graph Laplacian, solved over the rationals.
    """
    g1 = build_level(spec, 1)
    n = g1.n_vertices
    A = np.zeros((n, n), dtype=np.int64)
    for x, y in g1.edges:
        A[x, y] -= 1
        A[y, x] -= 1
        A[x, x] += 1
        A[y, y] += 1
    B = np.asarray(g1.boundary_ids)
    I = g1.interior_ids()
    H = np.empty((n, spec.n_boundary), dtype=object)
    H[:, :] = Fraction(0)
    for i, b in enumerate(B):
        H[b, i] = Fraction(1)
    if len(I):
        A_II = DomainMatrix([[QQ(int(A[i, j])) for j in I] for i in I], (len(I), len(I)), QQ)
        rhs = DomainMatrix(
            [[QQ(-int(A[i, b])) for b in B] for i in I], (len(I), len(B)), QQ
        )
        sol = A_II.lu_solve(rhs).to_Matrix()
        for row, i in enumerate(I):
            for col in range(len(B)):
                val = sol[row, col]
                H[i, col] = Fraction(int(val.p), int(val.q))
    return H


@lru_cache(maxsize=16)
def _extension_float(spec: IfsSpec) -> np.ndarray:
    return extension_matrix(spec).astype(float)


@lru_cache(maxsize=64)
def refinement_index(spec: IfsSpec, n: int) -> np.ndarray:
    """G[k, v] = id in V_{n+1} of F_w(v) for the k-th n-cell w and v in V_1."""
    g1 = build_level(spec, 1)
    fine = build_level(spec, n + 1)
    J, nb = spec.J, spec.n_boundary
    G = np.empty((J**n, g1.n_vertices), dtype=np.int64)
    G[:, g1.cells.ravel()] = fine.cells.reshape(J**n, J * nb)
    return G


def extend_one_level(graph: LevelGraph, u) -> np.ndarray:
    """Harmonic extension from V_n to V_{n+1}, one independent solve per n-cell."""
    u = _check(graph, u)
    spec = graph.spec
    exact = is_exact(u)
    H = extension_matrix(spec) if exact else _extension_float(spec)
    G = refinement_index(spec, graph.level)
    local = u[graph.cells] @ H.T
    fine = build_level(spec, graph.level + 1)
    out = np.empty(fine.n_vertices, dtype=object if exact else float)
    out[G] = local
    return out


def harmonic_extend(graph: LevelGraph, u0, m: int) -> np.ndarray:
    """Energy-minimizing extension of ``u0`` on V_n to V_m (m > n).

    Exact when ``u0`` is an object array of Fractions, floating point otherwise.
    """
    u = _check(graph, u0)
    if m < graph.level:
        raise ParameterError(f"cannot extend from level {graph.level} down to {m}")
    if not is_exact(u):
        u = u.astype(float)
    g = graph
    for level in range(graph.level, m):
        u = extend_one_level(g, u)
        g = build_level(graph.spec, level + 1)
    return u


def spline(graph: LevelGraph, q: int, M: int, exact: bool = False) -> np.ndarray:
    """Piecewise harmonic function of scale m: 1 at vertex ``q``, 0 on V_m minus q."""
    if not 0 <= q < graph.n_vertices:
        raise ParameterError(f"vertex {q} is not in V_{graph.level}")
    if exact:
        u = np.array([Fraction(0)] * graph.n_vertices, dtype=object)
        u[q] = Fraction(1)
    else:
        u = np.zeros(graph.n_vertices)
        u[q] = 1.0
    return harmonic_extend(graph, u, M)


def _grounded_solve(A: sp.csr_matrix, fixed: np.ndarray, values: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    free = np.setdiff1d(np.arange(n), fixed)
    u = np.zeros(n)
    u[fixed] = values
    if len(free):
        A_ff = A[free][:, free].tocsc()
        rhs = -(A[free][:, fixed] @ values)
        u[free] = spla.spsolve(A_ff, rhs)
        res = np.linalg.norm(A_ff @ u[free] - rhs)
        scale = max(np.linalg.norm(rhs), 1.0)
        if res > SOLVE_RESIDUAL_TOL * scale:
            raise ConvergenceError(f"grounded solve residual {res:.3e} above tolerance")
    return u


def harmonic_solve(graph: LevelGraph, fixed, values) -> np.ndarray:
    """Minimize the level-m graph energy with ``u[fixed] = values`` (float)."""
    fixed = np.asarray(fixed, dtype=np.int64)
    return _grounded_solve(energy_matrix(graph), fixed, np.asarray(values, dtype=float))


def resistance(graph: LevelGraph, x: int, y: int) -> float:
    """Level-m effective resistance 1 / min{ r^{-m} DF_m(u) : u(x)=0, u(y)=1 }."""
    if x == y:
        return 0.0
    u = harmonic_solve(graph, [x, y], [0.0, 1.0])
    return 1.0 / energy(graph, u, renormalized=True)


@lru_cache(maxsize=16)
def resistance_matrix(graph: LevelGraph) -> np.ndarray:
    """All-pairs level-m effective resistance via the grounded inverse.

    Current-flow form of :func:`resistance`; the two agree to round-off.
    """
    A = energy_matrix(graph, renormalized=True).toarray()
    n = A.shape[0]
    Gamma = np.zeros((n, n))
    Gamma[1:, 1:] = scipy.linalg.inv(A[1:, 1:])
    d = np.diag(Gamma)
    R = d[:, None] + d[None, :] - 2.0 * Gamma
    np.fill_diagonal(R, 0.0)
    R = 0.5 * (R + R.T)
    R.setflags(write=False)
    return R
