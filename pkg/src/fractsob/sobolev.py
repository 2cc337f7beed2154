"""Scale-m difference operators, normal derivatives and the discrete identities
relating them to the Laplacian.

``op_m`` is the full difference sum over m-neighbors of a vertex; ``delta_m``
keeps only the neighbors inside one cell F_w(X).  Both accept functions living
on a finer level M >= m and read them through the inclusion V_m in V_M.  Object
arrays of Fractions are evaluated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .energy import energy, energy_matrix, is_exact
from .errors import LevelMismatchError, ParameterError, PreconditionError
from .geometry import IfsSpec, LevelGraph, Point, Word, build_level, embedding

CONVERGENCE_TOL = 0.05


def _check(graph: LevelGraph, u) -> np.ndarray:
    u = np.asarray(u)
    if u.ndim != 1 or u.shape[0] != graph.n_vertices:
        raise LevelMismatchError(
            f"function of length {u.shape[0] if u.ndim else 0} does not live on "
            f"V_{graph.level} ({graph.n_vertices} vertices)"
        )
    return u


@lru_cache(maxsize=64)
def _inclusion(spec: IfsSpec, m: int, M: int) -> np.ndarray:
    ids = embedding(build_level(spec, m), build_level(spec, M))
    ids.setflags(write=False)
    return ids


def restrict(graph: LevelGraph, u, m: int) -> tuple[LevelGraph, np.ndarray]:
    """The level-m graph and u read off on V_m (a subset of V_M)."""
    u = _check(graph, u)
    if not 0 <= m <= graph.level:
        raise LevelMismatchError(f"level {m} is not available from a function on V_{graph.level}")
    coarse = build_level(graph.spec, m)
    return coarse, u[_inclusion(graph.spec, m, graph.level)]


def vertex_id(graph: LevelGraph, q) -> int:
    """Resolve a vertex given as an id of ``graph`` or as coordinates."""
    if isinstance(q, (int, np.integer)) and not isinstance(q, bool):
        if not 0 <= q < graph.n_vertices:
            raise ParameterError(f"vertex id {q} outside V_{graph.level}")
        return int(q)
    return graph.index_of(q)


def cell_corners(spec: IfsSpec, w: Word) -> tuple[Point, ...]:
    """Coordinates of F_w(q_0), F_w(q_1), ..."""
    corners = spec.boundary_points
    for letter in reversed(w):
        if not 1 <= letter <= spec.J:
            raise ParameterError(f"letter {letter} outside 1..{spec.J}")
        f = spec.maps[letter - 1]
        corners = tuple(f(p) for p in corners)
    return corners


def _as_point(graph: LevelGraph, q) -> Point:
    return graph.vertices[vertex_id(graph, q)]


def cell_deltas(graph: LevelGraph, u) -> np.ndarray:
    """delta u at every corner of every level cell, relative to that cell.

    Cells are complete graphs on their corners, so at corner i this is
    |V_0| u(corner_i) - sum of u over the corners.
    """
    u = _check(graph, u)
    vals = u[graph.cells]
    return graph.spec.n_boundary * vals - vals.sum(axis=1, keepdims=True)


def difference_all(graph: LevelGraph, u, m: int | None = None) -> np.ndarray:
    """op_m u on every vertex of V_m, as an array indexed by level-m ids."""
    m = graph.level if m is None else m
    coarse, um = restrict(graph, u, m)
    if not is_exact(um):
        return energy_matrix(coarse) @ um.astype(float)
    deltas = cell_deltas(coarse, um)
    out = np.array([Fraction(0)] * coarse.n_vertices, dtype=object)
    for row, vals in zip(coarse.cells, deltas):
        for v, d in zip(row, vals):
            out[v] += d
    return out


def op_m(graph: LevelGraph, u, q, m: int):
    """sum over m-neighbors x of q of u(q) - u(x); q must lie in V_m."""
    coarse, um = restrict(graph, u, m)
    qid = coarse.index_of(_as_point(graph, q))
    nbrs = _neighbors(coarse, qid)
    return um[qid] * len(nbrs) - um[nbrs].sum()


def _neighbors(graph: LevelGraph, qid: int) -> np.ndarray:
    e = graph.edges
    return np.sort(np.r_[e[e[:, 0] == qid, 1], e[e[:, 1] == qid, 0]])


def cells_at(graph: LevelGraph, qid: int, w: Word = ()) -> np.ndarray:
    """Level cells inside F_w(X) having vertex ``qid`` as a corner."""
    rows = graph.subcells(w)
    hit = (graph.cells[rows] == qid).any(axis=1)
    return rows[hit]


def delta_m(graph: LevelGraph, u, q, w: Word, m: int):
    """sum of u(q) - u(x) over m-neighbors x of q inside F_w(X).

    ``q`` must be a corner F_w(q') of the cell w, and m >= |w|.
    """
    w = tuple(w)
    if m < len(w):
        raise LevelMismatchError(f"delta_m needs m >= |w|, got m={m}, |w|={len(w)}")
    point = _as_point(graph, q)
    if point not in cell_corners(graph.spec, w):
        raise PreconditionError(f"{point} is not a corner of the cell {w}")
    coarse, um = restrict(graph, u, m)
    qid = coarse.index_of(point)
    rows = cells_at(coarse, qid, w)
    nb = graph.spec.n_boundary
    total = 0
    for row in rows:
        corners = coarse.cells[row]
        total = total + (nb * um[qid] - um[corners].sum())
    return total


@dataclass
class NormalDerivative:
    """r^{-m} delta_m u(q) per level; ``value`` is the entry at the top level."""

    value: float
    levels: list[int]
    estimates: list
    converged: bool
    tolerance: float = CONVERGENCE_TOL

    def table(self) -> list[dict]:
        return [{"m": m, "estimate": float(v)} for m, v in zip(self.levels, self.estimates)]


def normal_derivative(
    graph: LevelGraph, u, q, w: Word = (), levels: Sequence[int] | None = None,
    tolerance: float = CONVERGENCE_TOL,
) -> NormalDerivative:
    """Estimate du(q) relative to F_w(X) from the sequence r^{-m} delta_m u(q).

    The value at the largest level is returned as is (no extrapolation);
    ``converged`` is False when the last two estimates differ by more than
    ``tolerance`` relative to the top value.
    """
    w = tuple(w)
    if levels is None:
        levels = range(len(w), graph.level + 1)
    levels = sorted(int(m) for m in levels)
    if len(levels) < 3 or levels[0] < len(w) or levels[-1] > graph.level:
        raise PreconditionError(
            f"normal derivative needs >= 3 levels in [{len(w)}, {graph.level}], got {levels}"
        )
    r = graph.spec.r
    exact = is_exact(np.asarray(u))
    est = []
    for m in levels:
        d = delta_m(graph, u, q, w, m)
        est.append(d * r ** (-m) if exact else float(d) * float(r) ** (-m))
    top, prev = est[-1], est[-2]
    diff = abs(float(top) - float(prev))
    converged = diff <= tolerance * abs(float(top)) or diff == 0.0
    return NormalDerivative(
        value=top if exact else float(top),
        levels=list(levels),
        estimates=est,
        converged=bool(converged),
        tolerance=tolerance,
    )


def lq_norm(values, Q: float) -> float:
    """Unweighted counting norm (sum |v|^Q)^{1/Q}; Q = inf gives max |v|."""
    v = np.abs(np.asarray(values, dtype=float))
    if v.size == 0:
        return 0.0
    if math.isinf(Q):
        return float(v.max())
    if Q < 1:
        raise ParameterError(f"Q must be >= 1, got {Q}")
    top = float(v.max())
    if top == 0.0:
        return 0.0
    # scale by the max so tiny or huge entries neither underflow nor overflow
    return top * float(np.sum((v / top) ** Q) ** (1.0 / Q))


@lru_cache(maxsize=16)
def neighbor_count(spec: IfsSpec) -> int:
    """Largest number of m-neighbors a vertex has inside a single m-cell."""
    g1 = build_level(spec, 1)
    return max(len(set(row.tolist())) - 1 for row in g1.cells)


@dataclass
class IdentityReport:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"name": self.name, "passed": self.passed, "max_error": self.max_error,
             "tolerance": self.tolerance}
        d.update(self.details)
        return d


def cell_identity_check(graph: LevelGraph, u, m: int | None = None) -> IdentityReport:
    """delta u(x) - delta u(y) = |V_0| (u(x) - u(y)) for corners x, y of each m-cell.

    Also evaluates the energy bound r^{-m} DF_m(u) <= 4 |V_0|^{-1} r^{-m} ||delta_m u||^2
    where the l^2 sum runs over all (cell, corner) pairs.
    """
    m = graph.level if m is None else m
    coarse, um = restrict(graph, u, m)
    exact = is_exact(um)
    nb = graph.spec.n_boundary
    deltas = cell_deltas(coarse, um)
    vals = um[coarse.cells]
    lhs = deltas[:, :, None] - deltas[:, None, :]
    rhs = nb * (vals[:, :, None] - vals[:, None, :])
    err = lhs - rhs
    if exact:
        max_err = max((abs(Fraction(e)) for e in err.ravel()), default=Fraction(0))
        identity_ok = max_err == 0
        tol = 0.0
    else:
        err = np.abs(err.astype(float))
        scale = max(1.0, float(np.abs(rhs.astype(float)).max()))
        max_err = float(err.max()) / scale
        tol = 1e-12
        identity_ok = max_err <= tol
    scale_m = coarse.spec.r ** (-m) if exact else float(coarse.spec.r) ** (-m)
    df = energy(coarse, um, renormalized=True)
    delta_sq = (deltas * deltas).sum() * scale_m
    bound = Fraction(4, nb) * delta_sq if exact else 4.0 / nb * float(delta_sq)
    return IdentityReport(
        name="cell_identity",
        passed=bool(identity_ok and df <= bound),
        max_error=float(max_err),
        tolerance=tol,
        details={
            "level": m,
            "renormalized_energy": float(df),
            "delta_energy_bound": float(bound),
            "energy_bound_holds": bool(df <= bound),
        },
    )


@dataclass
class GaussGreenReport:
    word: Word
    lhs: float
    rhs: float
    error: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {"word": list(self.word), "lhs": self.lhs, "rhs": self.rhs,
                "error": self.error, "tolerance": self.tolerance, "passed": self.passed}


def gauss_green_check(graph: LevelGraph, u, v, w: Word = (), tolerance: float = 1e-9) -> GaussGreenReport:
    """Discrete Gauss-Green identity on the cell F_w(X) at the level of ``graph``.

    sum over interior x of mass(x) [(L u) v - u (L v)](x) against
    sum over corners p of [u(p) dv(p) - du(p) v(p)], with L = M^{-1} r^{-m} A_m and
    du the r^{-m}-scaled cell-restricted difference.  The mass cancels, so the
    identity is pure summation by parts; ``error`` is relative to the summed
    magnitude of the terms.
    """
    u = _check(graph, u).astype(float)
    v = _check(graph, v).astype(float)
    w = tuple(w)
    m = graph.level
    if len(w) > m:
        raise LevelMismatchError(f"cell {w} is finer than level {m}")
    scale = float(graph.spec.r) ** (-m)
    A = energy_matrix(graph)
    Au, Av = A @ u, A @ v
    rows = graph.subcells(w)
    inside = np.unique(graph.cells[rows])
    corner_ids = np.array([graph.index_of(p) for p in cell_corners(graph.spec, w)])
    interior = np.setdiff1d(inside, corner_ids)
    lhs_terms = scale * (Au[interior] * v[interior] - u[interior] * Av[interior])
    rhs_terms = []
    for p in corner_ids:
        du = scale * float(delta_m(graph, u, p, w, m))
        dv = scale * float(delta_m(graph, v, p, w, m))
        rhs_terms.append(u[p] * dv - du * v[p])
    lhs, rhs = float(lhs_terms.sum()), float(np.sum(rhs_terms))
    magnitude = max(1.0, float(np.abs(lhs_terms).sum() + np.abs(rhs_terms).sum()))
    err = abs(lhs - rhs) / magnitude
    return GaussGreenReport(w, lhs, rhs, err, tolerance, bool(err <= tolerance))


def delta_energy(graph: LevelGraph, u, m: int | None = None) -> float:
    """r^{-m} times the sum of (delta_m u)^2 over all (m-cell, corner) pairs."""
    m = graph.level if m is None else m
    coarse, um = restrict(graph, u, m)
    d = cell_deltas(coarse, um).astype(float)
    return float(float(graph.spec.r) ** (-m) * np.sum(d * d))
