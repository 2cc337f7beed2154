"""Renormalized Laplacians on level graphs and their spectral calculus.

The level-m operator is L_m = M^{-1} r^{-m} A_m with A_m the graph energy
matrix and M the lumped self-similar mass.  Eigenvectors are M-orthonormal, so
g(L_m) f = sum_k g(lambda_k) <f, phi_k>_M phi_k and kernels are taken with
respect to the measure: (g(L) f)(x) = sum_y K(x, y) f(y) M_y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import energy_matrix, resistance_matrix
from .errors import ConvergenceError, ParameterError, PreconditionError, SpectralDomainError
from .fitting import DecayFit, loglog_fit
from .geometry import IfsSpec, LevelGraph, build_level, mass_vector

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
DENSE_LIMIT = 4000
KINDS = ("heat", "resolvent", "riesz")


@dataclass(frozen=True, eq=False)
class OperatorAssembly:
    graph: LevelGraph
    stiffness: sp.csr_matrix
    mass: np.ndarray
    bc: str
    free: np.ndarray

    @property
    def n_free(self) -> int:
        return len(self.free)

    def free_stiffness(self) -> sp.csr_matrix:
        return self.stiffness[self.free][:, self.free].tocsr()

    def free_mass(self) -> np.ndarray:
        return self.mass[self.free]

    def apply(self, u: np.ndarray) -> np.ndarray:
        """L_m u on the free vertices (u given on all of V_m)."""
        u = np.asarray(u, dtype=float)
        return (self.stiffness @ u)[self.free] / self.free_mass()


def assemble(spec: IfsSpec, m: int, bc: str = DIRICHLET) -> OperatorAssembly:
    """Stiffness r^{-m} A_m and lumped mass; Dirichlet drops the V_0 rows."""
    if bc not in (DIRICHLET, NEUMANN):
        raise ParameterError(f"boundary condition must be dirichlet or neumann, got {bc!r}")
    graph = build_level(spec, m)
    stiffness = energy_matrix(graph, renormalized=True)
    mass = mass_vector(graph)
    free = graph.interior_ids() if bc == DIRICHLET else np.arange(graph.n_vertices)
    return OperatorAssembly(graph, stiffness, mass, bc, free)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending eigenpairs of (stiffness, mass) on the free vertices.

    ``vectors[:, k]`` is phi_k restricted to ``assembly.free``; with a partial
    spectrum (``complete`` False) every spectral sum is truncated at rank k.
    """

    assembly: OperatorAssembly
    values: np.ndarray
    vectors: np.ndarray
    complete: bool
    max_residual: float = field(default=0.0)

    @property
    def graph(self) -> LevelGraph:
        return self.assembly.graph

    @property
    def bc(self) -> str:
        return self.assembly.bc

    @property
    def spec(self) -> IfsSpec:
        return self.assembly.graph.spec

    def full(self, values_free: np.ndarray) -> np.ndarray:
        """Pad values on the free vertices with zeros on V_0 (Dirichlet)."""
        n = self.graph.n_vertices
        values_free = np.asarray(values_free)
        out = np.zeros((n,) + values_free.shape[1:], dtype=values_free.dtype)
        out[self.assembly.free] = values_free
        return out

    def modes(self) -> np.ndarray:
        """Eigenvectors as functions on all of V_m (rows = vertices)."""
        return self.full(self.vectors)

    def truncation_bound(self, t: float) -> float:
        """Operator-norm error of the rank-k heat sum, e^{-lambda_k t}."""
        if self.complete:
            return 0.0
        return math.exp(-self.values[-1] * t)


def eigensolve(
    assembly: OperatorAssembly, k: int | None = None, dense_limit: int = DENSE_LIMIT
) -> EigenSystem:
    """Generalized eigenpairs of the assembled operator.

    Dense LAPACK solve of the whole spectrum up to ``dense_limit`` free vertices;
    otherwise (or when ``k`` is given) the k smallest pairs by shift-invert
    Lanczos, with residuals checked against 1e-8 lambda_max.
    """
    A = assembly.free_stiffness()
    m = assembly.free_mass()
    n = assembly.n_free
    if k is None and n > dense_limit:
        raise ParameterError(
            f"{n} free vertices exceed the dense limit {dense_limit}; request a partial spectrum k"
        )
    if k is None or k >= n:
        s = 1.0 / np.sqrt(m)
        C = A.toarray() * s[:, None] * s[None, :]
        lam, psi = scipy.linalg.eigh(0.5 * (C + C.T))
        phi = psi * s[:, None]
        complete = True
    else:
        lam, phi = spla.eigsh(A.tocsc(), k=k, M=sp.diags(m).tocsc(), sigma=-1.0, which="LM")
        order = np.argsort(lam)
        lam, phi = lam[order], phi[:, order]
        # renormalize against round-off in the shift-invert iteration
        phi = phi / np.sqrt(np.einsum("ik,i,ik->k", phi, m, phi))[None, :]
        complete = False
    lam_max = max(float(np.max(np.abs(lam))), 1.0)
    resid = np.linalg.norm(A @ phi - (m[:, None] * phi) * lam[None, :], axis=0)
    max_res = float(resid.max()) if len(resid) else 0.0
    if max_res > 1e-8 * lam_max:
        raise ConvergenceError(
            f"eigenpair residual {max_res:.3e} exceeds 1e-8 * lambda_max = {1e-8 * lam_max:.3e}"
        )
    # the Neumann kernel is exactly the constants
    lam = np.where(np.abs(lam) < 1e-10 * lam_max, 0.0, lam)
    if assembly.bc == NEUMANN:
        lam[0] = 0.0
    return EigenSystem(assembly, lam, phi, complete, max_res)


def _restrict(eig: EigenSystem, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    n, nf = eig.graph.n_vertices, eig.assembly.n_free
    if f.shape[0] == n:
        return f[eig.assembly.free]
    if f.shape[0] == nf:
        return f
    raise ParameterError(f"function of length {f.shape[0]} matches neither V_m ({n}) nor free ({nf})")


def multiplier(eig: EigenSystem, g: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        gl = np.asarray(g(eig.values), dtype=float)
    if gl.shape != eig.values.shape:
        gl = np.broadcast_to(gl, eig.values.shape).astype(float)
    bad = ~np.isfinite(gl)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise SpectralDomainError(
            f"multiplier is not finite at eigenvalue lambda_{k} = {eig.values[k]:.6g} ({eig.bc})"
        )
    return gl


def apply_spectral(eig: EigenSystem, g: Callable[[np.ndarray], np.ndarray], f) -> np.ndarray:
    """g(L_m) f as a function on all of V_m (zero on V_0 under Dirichlet)."""
    gl = multiplier(eig, g)
    ff = _restrict(eig, f)
    coeff = eig.vectors.T @ (eig.assembly.free_mass()[:, None] * ff.reshape(len(ff), -1))
    out = eig.vectors @ (gl[:, None] * coeff)
    return eig.full(out.reshape(ff.shape))


def power(s: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda lam: np.power(lam, s)


def fractional_power(eig: EigenSystem, s: float, f) -> np.ndarray:
    """L^s f; negative ``s`` gives the Riesz potential L^{-|s|} f."""
    return apply_spectral(eig, power(s), f)


def heat(eig: EigenSystem, t: float, f) -> np.ndarray:
    return apply_spectral(eig, lambda lam: np.exp(-t * lam), f)


def resolvent(eig: EigenSystem, lam: float, f) -> np.ndarray:
    return apply_spectral(eig, lambda x: 1.0 / (lam + x), f)


def kernel_multiplier(kind: str, param: float) -> Callable[[np.ndarray], np.ndarray]:
    if kind == "heat":
        return lambda lam: np.exp(-param * lam)
    if kind == "resolvent":
        return lambda lam: 1.0 / (param + lam)
    if kind == "riesz":
        return lambda lam: np.power(lam, -param)
    raise ParameterError(f"unknown kernel kind {kind!r}; expected one of {KINDS}")


def _kernel_multiplier_checked(eig: EigenSystem, kind: str, param: float) -> np.ndarray:
    if kind == "riesz" and eig.bc != DIRICHLET:
        raise SpectralDomainError("the Riesz kernel needs lambda_1 > 0 (Dirichlet)")
    return multiplier(eig, kernel_multiplier(kind, param))


def kernel_matrix(eig: EigenSystem, kind: str, param: float) -> np.ndarray:
    """K(x, y) for all x, y in V_m (rows and columns of V_0 vanish under Dirichlet)."""
    gl = _kernel_multiplier_checked(eig, kind, param)
    Phi = eig.modes()
    K = (Phi * gl[None, :]) @ Phi.T
    return 0.5 * (K + K.T)


def kernel_eval(eig: EigenSystem, kind: str, param: float, x: int, y: int) -> float:
    """sum_k g(lambda_k) phi_k(x) phi_k(y) for the heat, resolvent or Riesz multiplier."""
    gl = _kernel_multiplier_checked(eig, kind, param)
    Phi = eig.modes()
    return float(np.sum(gl * Phi[x] * Phi[y]))


def kernel_pairs(eig: EigenSystem, kind: str, param: float, xs, ys) -> np.ndarray:
    """K(x_i, y_i) for paired id arrays."""
    gl = _kernel_multiplier_checked(eig, kind, param)
    Phi = eig.modes()
    return np.einsum("ik,k,ik->i", Phi[np.asarray(xs)], gl, Phi[np.asarray(ys)])


def kernel_column(eig: EigenSystem, kind: str, param: float, x: int) -> np.ndarray:
    gl = _kernel_multiplier_checked(eig, kind, param)
    Phi = eig.modes()
    return Phi @ (gl * Phi[x])


@dataclass
class BoundReport:
    kind: str
    exponent: float
    trend: DecayFit
    tolerance: float
    passed: bool
    sup_ratio: float
    c: float | None = None
    table: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "exponent": self.exponent,
            "trend_slope": self.trend.slope,
            "trend": self.trend.to_dict(),
            "tolerance": self.tolerance,
            "passed": self.passed,
            "sup_ratio": self.sup_ratio,
            "c": self.c,
        }


def _binned_sup(key: np.ndarray, ratio: np.ndarray, n_bins: int):
    edges = np.geomspace(key.min(), key.max() * (1 + 1e-12), n_bins + 1)
    centers, sups = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (key >= lo) & (key < hi)
        if sel.any():
            centers.append(math.sqrt(lo * hi))
            sups.append(float(ratio[sel].max()))
    return np.array(centers), np.array(sups)


def kernel_bound_check(
    eig: EigenSystem,
    kind: str,
    grid: Sequence[tuple],
    c: float | None = None,
    trend_tol: float = 0.1,
    n_bins: int = 8,
) -> BoundReport:
    """Check that a kernel obeys its scaling bound with no growth trend.

    ``kind="riesz"``: grid entries ``(x, y, s)``; the ratio
    |K_s(x,y)| / R(x,y)^{s(D+1)-D} is binned by R and the sup per bin is fitted
    against R.  Pairs closer than a few level-m edges should be left out of the
    grid; they only see the discretization.

    ``kind="resolvent"``: grid entries ``(x, y, lam)``; the ratio
    G_lam(x,y) (1+lam)^{1/(D+1)} exp(c R^gamma lam^{gamma/(D+1)}) is reduced to
    its sup over pairs for each lam and fitted against lam.  ``c`` defaults to
    half the decay rate fitted from the off-diagonal data.

    The check passes when the fitted log-slope is at most ``trend_tol``.
    """
    if not len(grid):
        raise PreconditionError("kernel bound check needs a non-empty grid")
    spec = eig.spec
    D, gamma = spec.D, spec.gamma
    R = resistance_matrix(eig.graph)
    pts = np.array([(int(a), int(b), float(p)) for a, b, p in grid], dtype=object)
    xs = pts[:, 0].astype(int)
    ys = pts[:, 1].astype(int)
    params = pts[:, 2].astype(float)
    values = np.empty(len(grid))
    for p in np.unique(params):
        sel = params == p
        values[sel] = kernel_pairs(eig, kind, p, xs[sel], ys[sel])
    Rxy = R[xs, ys]

    if kind == "riesz":
        if np.any(Rxy <= 0):
            raise PreconditionError("Riesz bound check needs off-diagonal pairs (R > 0)")
        exponent = params * (D + 1) - D
        ratio = np.abs(values) / Rxy**exponent
        centers, sups = _binned_sup(Rxy, ratio, n_bins)
        trend = loglog_fit(centers, sups, min_points=3)
        table = [{"R": float(cx), "sup_ratio": float(sv)} for cx, sv in zip(centers, sups)]
        c_used = None
        exp_report = float(exponent.max())
    elif kind == "resolvent":
        base = np.abs(values) * (1.0 + params) ** (1.0 / (D + 1))
        z = Rxy**gamma * params ** (gamma / (D + 1))
        if c is None:
            off = (z > 0) & (base > 0)
            if off.sum() >= 2 and np.ptp(z[off]) > 0:
                slope = np.polyfit(z[off], np.log(base[off]), 1)[0]
                c = max(-float(slope), 0.0) / 2.0
            else:
                c = 0.0
        ratio = base * np.exp(c * z)
        lam_values = np.unique(params)
        sups = np.array([ratio[params == lv].max() for lv in lam_values])
        trend = loglog_fit(lam_values, sups, min_points=3)
        table = [{"lambda": float(lv), "sup_ratio": float(sv)} for lv, sv in zip(lam_values, sups)]
        c_used = float(c)
        exp_report = -1.0 / (D + 1)
    else:
        raise ParameterError(f"bound check supports riesz and resolvent kernels, not {kind!r}")
    return BoundReport(
        kind=kind,
        exponent=exp_report,
        trend=trend,
        tolerance=trend_tol,
        passed=bool(trend.slope <= trend_tol),
        sup_ratio=float(ratio.max()),
        c=c_used,
        table=table,
    )


def dual_exponent(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def weighted_norm(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    """(sum_y w_y |v_y|^p)^{1/p}; p = inf gives max |v_y|."""
    values = np.abs(np.asarray(values, dtype=float))
    if math.isinf(p):
        return float(values.max()) if values.size else 0.0
    return float(np.sum(weights * values**p) ** (1.0 / p))


def kernel_lp_norm(
    eig: EigenSystem, kind: str, param: float, x: int, p: float, ball_radius: float
) -> float:
    """Mass-weighted l^p norm of K(x, .) over the resistance ball B(x, radius)."""
    R = resistance_matrix(eig.graph)
    col = kernel_column(eig, kind, param, x)
    ball = R[x] <= ball_radius
    return weighted_norm(col[ball], eig.assembly.mass[ball], p)


@dataclass
class EmbeddingReport:
    s: float
    p: float
    trials: int
    max_ratio: float
    tolerance: float
    passed: bool
    kernel_norm: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def embedding_ratio(eig: EigenSystem, s: float, p: float, f, Kcols=None) -> float:
    """sup|L^{-s} f| / (sup_x ||K_s(x,.)||_{p'} ||f||_p) for one function f."""
    mass = eig.assembly.mass
    ff = np.asarray(f, dtype=float)
    if ff.shape[0] != eig.graph.n_vertices:
        ff = eig.full(_restrict(eig, ff))
    if eig.bc == DIRICHLET:
        ff = ff.copy()
        ff[eig.graph.boundary_ids] = 0.0
    K = kernel_matrix(eig, "riesz", s) if Kcols is None else Kcols
    pd = dual_exponent(p)
    knorm = max(weighted_norm(K[x], mass, pd) for x in range(K.shape[0]))
    u = fractional_power(eig, -s, ff)
    fnorm = weighted_norm(ff, mass, p)
    if fnorm == 0:
        return 0.0
    return float(np.max(np.abs(u)) / (knorm * fnorm))


def linf_embedding_check(
    eig: EigenSystem,
    s: float,
    p: float,
    trials: int = 100,
    rng: np.random.Generator | None = None,
    tolerance: float = 1e-9,
) -> EmbeddingReport:
    """Hoelder bound sup|L^{-s} f| <= sup_x ||K_s(x,.)||_{p'} ||f||_p on random f."""
    D = eig.spec.D
    if not s * (D + 1) > (0.0 if math.isinf(p) else D / p):
        raise PreconditionError(f"s(D+1) > D/p fails for s={s}, p={p}, D={D:.6g}")
    rng = np.random.default_rng(0) if rng is None else rng
    K = kernel_matrix(eig, "riesz", s)
    mass = eig.assembly.mass
    knorm = max(weighted_norm(K[x], mass, dual_exponent(p)) for x in range(K.shape[0]))
    n = eig.graph.n_vertices
    worst = 0.0
    for _ in range(trials):
        f = rng.standard_normal(n)
        worst = max(worst, embedding_ratio(eig, s, p, f, K))
    return EmbeddingReport(s, p, trials, worst, tolerance, worst <= 1.0 + tolerance, knorm)


def heat_diagonal_fit(
    eig: EigenSystem, x: int, t_window: tuple[float, float] | None = None, n_t: int = 41
) -> tuple[DecayFit, tuple[float, float]]:
    """Slope of log h_t(x,x) against log t over [10/lambda_max, 0.1/lambda_1]."""
    lam = eig.values[eig.values > 0]
    if t_window is None:
        t_window = (10.0 / lam.max(), 0.1 / lam.min())
    if not t_window[0] < t_window[1]:
        raise PreconditionError(f"empty time window {t_window}")
    ts = np.geomspace(t_window[0], t_window[1], n_t)
    phi_x = eig.modes()[x]
    h = np.array([np.sum(np.exp(-t * eig.values) * phi_x**2) for t in ts])
    return loglog_fit(ts, h), t_window


@lru_cache(maxsize=8)
def level_eigensystem(spec: IfsSpec, m: int, bc: str = DIRICHLET, k: int | None = None) -> EigenSystem:
    """Cached :func:`eigensolve` of :func:`assemble` for one level."""
    return eigensolve(assemble(spec, m, bc), k=k)
