"""Invariant suite run by the ``checks`` command."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .energy import energy, harmonic_extend
from .geometry import IfsSpec, build_level, embedding, mass_vector
from .spectral import (
    DIRICHLET,
    NEUMANN,
    apply_spectral,
    assemble,
    eigensolve,
    heat,
    resolvent,
)

OPERATOR_TOL = 1e-8
POSITIVITY_TOL = 1e-10
MASS_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _result(name, err, tol, detail="") -> CheckResult:
    return CheckResult(name, bool(err <= tol), float(err), tol, detail)


def spectral_mapping(eig, rng, n_funcs: int = 5) -> CheckResult:
    """g1(L) g2(L) f = (g1 g2)(L) f for a few multiplier pairs."""
    n = eig.graph.n_vertices
    pairs = [
        (lambda x: np.exp(-0.01 * x), lambda x: 1.0 / (1.0 + x)),
        (lambda x: np.sqrt(x), lambda x: 1.0 / (2.0 + x)),
    ]
    err = 0.0
    for _ in range(n_funcs):
        f = rng.standard_normal(n)
        for g1, g2 in pairs:
            lhs = apply_spectral(eig, g1, apply_spectral(eig, g2, f))
            rhs = apply_spectral(eig, lambda x, g1=g1, g2=g2: g1(x) * g2(x), f)
            err = max(err, _rel(lhs, rhs))
    return _result("spectral_mapping", err, OPERATOR_TOL)


def semigroup(eig, rng, n_funcs: int = 5) -> CheckResult:
    n = eig.graph.n_vertices
    lam_max = float(eig.values.max())
    err = 0.0
    for t, s in [(0.1 / lam_max, 0.3 / lam_max), (1e-3, 2e-3), (0.05, 0.1)]:
        for _ in range(n_funcs):
            f = rng.standard_normal(n)
            err = max(err, _rel(heat(eig, t, heat(eig, s, f)), heat(eig, t + s, f)))
    return _result("semigroup", err, OPERATOR_TOL)


def resolvent_identity(eig, rng, n_funcs: int = 5) -> CheckResult:
    """R_a - R_b = (b - a) R_a R_b."""
    n = eig.graph.n_vertices
    err = 0.0
    for a, b in [(0.5, 3.0), (1.0, 100.0), (10.0, 1e4)]:
        for _ in range(n_funcs):
            f = rng.standard_normal(n)
            lhs = resolvent(eig, a, f) - resolvent(eig, b, f)
            rhs = (b - a) * resolvent(eig, a, resolvent(eig, b, f))
            err = max(err, _rel(lhs, rhs))
    return _result("resolvent_identity", err, OPERATOR_TOL)


def positivity(eig, rng, n_funcs: int = 10) -> CheckResult:
    """e^{-tL} f >= 0 for f >= 0 (up to round-off)."""
    n = eig.graph.n_vertices
    worst = 0.0
    for t in (1e-4, 1e-2, 1.0):
        for _ in range(n_funcs):
            f = rng.random(n)
            worst = max(worst, float(-heat(eig, t, f).min()))
        worst = max(worst, float(-heat(eig, t, np.eye(n)[rng.integers(n)]).min()))
    return _result("positivity", max(worst, 0.0), POSITIVITY_TOL)


def mass_conservation(spec: IfsSpec, level: int, rng) -> CheckResult:
    """Exact total mass 1, Neumann heat flow preserving mass, Dirichlet flow losing it."""
    g = build_level(spec, level)
    total = mass_vector(g, exact=True).sum()
    exact_ok = total == Fraction(1)
    neu = eigensolve(assemble(spec, min(level, 4), NEUMANN))
    dir_ = eigensolve(assemble(spec, min(level, 4), DIRICHLET))
    m = neu.assembly.mass
    err = 0.0
    sub_ok = True
    for t in (1e-3, 1e-1, 1.0):
        f = rng.random(len(m))
        err = max(err, abs(float(m @ heat(neu, t, f)) - float(m @ f)) / float(m @ f))
        sub_ok &= float(m @ heat(dir_, t, f)) <= float(m @ f) * (1 + MASS_TOL)
    passed = exact_ok and sub_ok and err <= MASS_TOL
    detail = f"total mass {total}; Dirichlet sub-Markov {'ok' if sub_ok else 'violated'}"
    return CheckResult("mass_conservation", bool(passed), float(err), MASS_TOL, detail)


def nesting(spec: IfsSpec, level: int, rng) -> CheckResult:
    """V_m inside V_{m+1}, harmonic extension restricting back, energy monotone."""
    worst = 0.0
    ok = True
    for m in range(0, level):
        coarse, fine = build_level(spec, m), build_level(spec, m + 1)
        ids = embedding(coarse, fine)
        ok &= len(set(ids.tolist())) == coarse.n_vertices
        u = np.array([Fraction(int(x)) for x in rng.integers(-9, 10, coarse.n_vertices)], dtype=object)
        ext = harmonic_extend(coarse, u, m + 1)
        ok &= bool(np.all(ext[ids] == u))
        ok &= energy(fine, ext, renormalized=True) == energy(coarse, u, renormalized=True)
        v = rng.standard_normal(fine.n_vertices)
        e_c = energy(coarse, v[ids], renormalized=True)
        e_f = energy(fine, v, renormalized=True)
        worst = max(worst, max(0.0, e_c - e_f) / max(e_f, 1.0))
        ok &= e_c <= e_f * (1 + 1e-12)
    return CheckResult("nesting", bool(ok), worst, 1e-12,
                       "inclusion, exact extension, monotone renormalized energy")


def determinism(spec: IfsSpec, level: int, bc: str, seed: int) -> CheckResult:
    """Two fresh runs with the same seed produce identical bytes."""
    outs = []
    for _ in range(2):
        rng = np.random.default_rng(seed)
        eig = eigensolve(assemble(spec, level, bc))
        f = rng.standard_normal(eig.graph.n_vertices)
        outs.append(heat(eig, 0.01, f).tobytes() + eig.values.tobytes())
    return CheckResult("determinism", outs[0] == outs[1], 0.0 if outs[0] == outs[1] else math.inf, 0.0)


def run_suite(spec: IfsSpec, level: int = 4, bc: str = DIRICHLET, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    eig = eigensolve(assemble(spec, level, bc))
    return [
        spectral_mapping(eig, rng),
        semigroup(eig, rng),
        resolvent_identity(eig, rng),
        positivity(eig, rng),
        mass_conservation(spec, level, rng),
        nesting(spec, level, rng),
        determinism(spec, level, bc, seed),
    ]
