"""Command line runner: ``fractsob <command> --config <path> [--out <dir>]``.

Exit codes: 0 pass, 1 error, 2 fail, 3 inconclusive.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import checks as checks_mod
from .config import RunConfig, build_spec, parse_config, resolved
from .energy import energy, extension_matrix, resistance, resistance_matrix
from .errors import FractsobError, ParameterError
from .experiments import (
    INCONCLUSIVE,
    PASS,
    affine,
    algebra_failure_experiment,
    bump,
    centered_power,
    centered_square,
    composition_experiment,
    default_bump_center,
    difference_decay_experiment,
    normal_derivative_experiment,
    square,
)
from .geometry import IfsSpec, build_level, parse_word, write_graph_csv
from .output import report_payload, write_csv, write_json, write_table
from .regions import RegionParams, region_check
from .sobolev import cell_corners
from .spectral import (
    DIRICHLET,
    assemble,
    eigensolve,
    heat_diagonal_fit,
    kernel_bound_check,
    kernel_column,
    kernel_pairs,
    linf_embedding_check,
)

COMMANDS = ("build", "spectrum", "kernel", "decay", "normal-deriv", "algebra", "compose", "region", "checks")
EXIT_PASS, EXIT_ERROR, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3
HEAT_SLOPE_TOL = 0.1
ORTHONORMALITY_TOL = 1e-10
GAP_TOL = 0.05


def _verdict_code(verdict: str) -> int:
    return {PASS: EXIT_PASS, INCONCLUSIVE: EXIT_INCONCLUSIVE}.get(verdict, EXIT_FAIL)


def _conversion(cfg: RunConfig) -> dict | None:
    s = cfg.s_value
    if s is None:
        return None
    return {"alpha": 2 * s, "s": s, "degr": 2, "relation": "alpha = 2 s"}


def _require_s(cfg: RunConfig) -> float:
    if cfg.s_value is None:
        raise ParameterError("this command needs s (or alpha)")
    return cfg.s_value


def resolve_vertex(cfg: RunConfig, spec: IfsSpec):
    """Point q and cell word w from the config (default: the junction of cells 1 and 2)."""
    q = cfg.q
    if q is None or not isinstance(q, list):
        i, j = (0, 1) if q is None else q.junction
        n = spec.n_boundary
        if not (0 <= i < n and 0 <= j < n and i != j):
            raise ParameterError(f"junction indices must be distinct and below {n}")
        point = spec.maps[i](spec.boundary_points[j])
        if point != spec.maps[j](spec.boundary_points[i]):
            raise ParameterError(f"cells {i + 1} and {j + 1} do not meet at a junction")
        w = (i + 1,)
    else:
        point = tuple(Fraction(c) for c in q)
        w = None
    if cfg.w is not None:
        w = parse_word(cfg.w, spec.J)
    if w is None:
        w = _default_word(spec, point)
    if point not in cell_corners(spec, w):
        raise ParameterError(f"{tuple(str(c) for c in point)} is not a corner of the cell {w}")
    return point, w


def _default_word(spec: IfsSpec, point) -> tuple:
    if point in spec.boundary_points:
        return ()
    for n in range(1, 4):
        g = build_level(spec, n)
        if point in g.coordinate_index:
            qid = g.coordinate_index[point]
            k = int(np.flatnonzero((g.cells == qid).any(axis=1))[0])
            word = []
            for _ in range(n):
                k, rem = divmod(k, spec.J)
                word.append(rem + 1)
            return tuple(reversed(word))
    raise ParameterError("q must be a vertex of V_3 or coarser; give w explicitly otherwise")


def _source_f(cfg: RunConfig, graph) -> np.ndarray:
    if cfg.f == "ones":
        return np.ones(graph.n_vertices)
    if cfg.f == "random":
        return np.random.default_rng(cfg.seed).random(graph.n_vertices)
    center = cfg.bump_center if cfg.bump_center is not None else default_bump_center(graph.spec)
    return bump(graph, center)


def _levels(cfg: RunConfig, top: int) -> list[int]:
    return cfg.levels if cfg.levels is not None else list(range(1, top))


def _farthest_interior(graph) -> int:
    R = resistance_matrix(graph)
    interior = graph.interior_ids()
    dist = R[np.ix_(interior, graph.boundary_ids)].min(axis=1)
    return int(interior[int(np.argmax(dist))])


# --- commands -------------------------------------------------------------


def cmd_build(cfg: RunConfig, spec: IfsSpec, out: Path) -> tuple[int, str, dict]:
    graph = build_level(spec, cfg.level)
    write_graph_csv(graph, out / "graph.csv")
    g0 = build_level(spec, 0)
    rows = []
    for a in range(spec.n_boundary):
        for b in range(a + 1, spec.n_boundary):
            x, y = (int(graph.boundary_ids[a]), int(graph.boundary_ids[b]))
            rows.append((x, y, resistance(graph, x, y)))
    write_csv(out / "resistance.csv", ["x_id", "y_id", "R"], rows)
    H = extension_matrix(spec)
    g1 = build_level(spec, 1)
    fixed_point = []
    for i in range(spec.n_boundary):
        a = np.array([Fraction(int(i == j)) for j in range(spec.n_boundary)], dtype=object)
        a0 = np.empty(g0.n_vertices, dtype=object)
        a0[g0.boundary_ids] = a
        e0 = energy(g0, a0)
        e1 = energy(g1, H @ a, renormalized=True)
        fixed_point.append({"boundary_index": i, "DF_0": e0, "renormalized_DF_1": e1, "equal": e0 == e1})
    write_table(out / "energy.csv", fixed_point)
    ok = all(r["equal"] for r in fixed_point)
    body = {
        "n_vertices": graph.n_vertices,
        "n_edges": int(len(graph.edges)),
        "n_cells": graph.n_cells,
        "energy_fixed_point": ok,
        "verdict": PASS if ok else "fail",
    }
    return (EXIT_PASS if ok else EXIT_FAIL), f"{graph.n_vertices} vertices, {len(graph.edges)} edges", body


def cmd_spectrum(cfg: RunConfig, spec: IfsSpec, out: Path):
    eig = eigensolve(assemble(spec, cfg.level, cfg.bc), k=cfg.k)
    write_csv(out / "spectrum.csv", ["k", "lambda"], list(enumerate(eig.values)))
    m = eig.assembly.free_mass()
    gram = eig.vectors.T @ (m[:, None] * eig.vectors)
    ortho = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
    body = {
        "n": int(len(eig.values)),
        "complete": eig.complete,
        "max_residual": eig.max_residual,
        "orthonormality_error": ortho,
        "lambda_min_positive": float(eig.values[eig.values > 0].min()),
    }
    ok = ortho <= ORTHONORMALITY_TOL
    if cfg.gap_levels:
        gaps = []
        for lvl in cfg.gap_levels:
            e = eigensolve(assemble(spec, lvl, DIRICHLET), k=None if lvl <= 6 else 6)
            gaps.append({"level": lvl, "lambda_1": float(e.values[0])})
        for a, b in zip(gaps, gaps[1:]):
            b["ratio"] = b["lambda_1"] / a["lambda_1"]
        write_table(out / "spectral_gap.csv", gaps)
        body["spectral_gap"] = gaps
        if len(gaps) >= 2:
            stable = abs(gaps[-1]["ratio"] - 1.0) < GAP_TOL
            body["gap_stable"] = stable
            ok = ok and stable
    body["verdict"] = PASS if ok else "fail"
    return (EXIT_PASS if ok else EXIT_FAIL), f"{len(eig.values)} eigenvalues, lambda_1 = {eig.values[0]:.6g}", body


def cmd_kernel(cfg: RunConfig, spec: IfsSpec, out: Path):
    kc = cfg.kernel
    if kc is None:
        raise ParameterError("kernel command needs a 'kernel' block")
    eig = eigensolve(assemble(spec, cfg.level, cfg.bc))
    graph = eig.graph
    R = resistance_matrix(graph)
    x = _farthest_interior(graph) if kc.x in (None, "farthest") else graph.index_of(kc.x)
    interior = graph.interior_ids() if cfg.bc == DIRICHLET else np.arange(graph.n_vertices)
    body: dict = {"x_id": x, "x": [str(c) for c in graph.vertices[x]], "kind": kc.kind}
    ok = True
    if kc.kind == "heat":
        rows = []
        for t in kc.params:
            col = kernel_column(eig, "heat", t, x)
            rows += [(x, int(y), R[x, y], t, col[y]) for y in interior]
        fit, window = heat_diagonal_fit(eig, x)
        theory = -spec.D / (spec.D + 1)
        ok = abs(fit.slope - theory) <= HEAT_SLOPE_TOL
        body.update(diagonal_fit=fit.to_dict(), t_window=list(window), theory_slope=theory,
                    tolerance=f"+-{HEAT_SLOPE_TOL}")
    else:
        if kc.kind == "riesz":
            min_r = kc.min_resistance if kc.min_resistance is not None else float(spec.r) ** (cfg.level - 1)
            ii, jj = np.triu_indices(len(interior), k=1)
            xs, ys = interior[ii], interior[jj]
            keep = R[xs, ys] >= min_r
            xs, ys = xs[keep], ys[keep]
            body["min_resistance"] = min_r
        else:
            xs = np.full(len(interior), x)
            ys = interior
        grid = [(int(a), int(b), p) for p in kc.params for a, b in zip(xs, ys)]
        report = kernel_bound_check(eig, kc.kind, grid, c=kc.c)
        rows = []
        for p in kc.params:
            vals = kernel_pairs(eig, kc.kind, p, xs, ys)
            rows += [(int(a), int(b), R[a, b], p, v) for a, b, v in zip(xs, ys, vals)]
        write_table(out / "bound_trend.csv", report.table)
        ok = report.passed
        body["bound_check"] = report.to_dict()
        if kc.trials and kc.kind == "riesz":
            p = kc.embedding_p if kc.embedding_p is not None else cfg.p
            emb = linf_embedding_check(eig, kc.params[0], p, kc.trials, np.random.default_rng(cfg.seed))
            body["embedding"] = emb.to_dict()
            ok = ok and emb.passed
    write_csv(out / "kernel.csv", ["x_id", "y_id", "R", "param", "value"], rows)
    body["verdict"] = PASS if ok else "fail"
    return (EXIT_PASS if ok else EXIT_FAIL), f"{kc.kind} kernel checks {'pass' if ok else 'fail'}", body


def _experiment(report, out: Path):
    write_table(out / f"{report.name}.csv", report.table)
    body = report.to_dict()
    return _verdict_code(report.verdict), f"{report.name}: {report.verdict}", body


def cmd_decay(cfg: RunConfig, spec: IfsSpec, out: Path):
    s = _require_s(cfg)
    graph = build_level(spec, cfg.level)
    f = _source_f(cfg, graph)
    rep = difference_decay_experiment(spec, s, cfg.p, cfg.Q, f, _levels(cfg, cfg.level), cfg.level, cfg.bc)
    return _experiment(rep, out)


def cmd_normal_deriv(cfg: RunConfig, spec: IfsSpec, out: Path):
    s = _require_s(cfg)
    point, w = resolve_vertex(cfg, spec)
    graph = build_level(spec, cfg.level)
    f = _source_f(cfg, graph)
    rep = normal_derivative_experiment(spec, s, cfg.p, point, w, f, _levels(cfg, cfg.level), cfg.level, cfg.bc)
    return _experiment(rep, out)


def cmd_algebra(cfg: RunConfig, spec: IfsSpec, out: Path):
    s = _require_s(cfg)
    point, w = resolve_vertex(cfg, spec)
    rep = algebra_failure_experiment(
        spec, s, cfg.p, point, w, cfg.u_source, _levels(cfg, cfg.level), cfg.level,
        boundary_values=cfg.boundary_values, bump_center=cfg.bump_center,
        norm_levels=cfg.norm_levels, bc=cfg.bc,
    )
    if "norm_divergence" in rep.extra:
        write_table(out / "norm_divergence.csv", rep.extra["norm_divergence"])
    return _experiment(rep, out)


def _profile(cfg: RunConfig):
    pc = cfg.phi
    if pc is None or pc.kind == "centered_square":
        return centered_square()
    if pc.kind == "power":
        return centered_power(pc.xi, pc.C)
    if pc.kind == "square":
        return square()
    return affine(pc.a, pc.b, pc.C)


def cmd_compose(cfg: RunConfig, spec: IfsSpec, out: Path):
    s = _require_s(cfg)
    point, w = resolve_vertex(cfg, spec)
    rep = composition_experiment(
        spec, s, cfg.p, point, w, cfg.u_source, _profile(cfg), _levels(cfg, cfg.level), cfg.level,
        boundary_values=cfg.boundary_values, bump_center=cfg.bump_center, bc=cfg.bc,
    )
    return _experiment(rep, out)


def cmd_region(cfg: RunConfig, spec: IfsSpec, out: Path):
    if cfg.s is None and cfg.alpha is None:
        raise ParameterError("region needs s or alpha")
    params = RegionParams(p=cfg.p, s=cfg.s, alpha=cfg.alpha)
    res = region_check(spec, params, cfg.selector)
    write_table(out / "region.csv", [{k: v for k, v in res.items() if not isinstance(v, (dict, list))}])
    verdict = "in failure region" if res["in_region"] else "not in failure region"
    body = dict(res, verdict=PASS if res["in_region"] else "fail")
    return (EXIT_PASS if res["in_region"] else EXIT_FAIL), verdict, body


def cmd_checks(cfg: RunConfig, spec: IfsSpec, out: Path):
    results = checks_mod.run_suite(spec, cfg.level, cfg.bc, cfg.seed)
    write_table(out / "checks.csv", [r.to_dict() for r in results])
    ok = all(r.passed for r in results)
    failed = [r.name for r in results if not r.passed]
    body = {"results": [r.to_dict() for r in results], "verdict": PASS if ok else "fail"}
    msg = "all invariants pass" if ok else "failed: " + ", ".join(failed)
    return (EXIT_PASS if ok else EXIT_FAIL), msg, body


HANDLERS = {
    "build": cmd_build,
    "spectrum": cmd_spectrum,
    "kernel": cmd_kernel,
    "decay": cmd_decay,
    "normal-deriv": cmd_normal_deriv,
    "algebra": cmd_algebra,
    "compose": cmd_compose,
    "region": cmd_region,
    "checks": cmd_checks,
}


def run(command: str, cfg: RunConfig, out: Path) -> tuple[int, str]:
    spec = build_spec(cfg)
    out.mkdir(parents=True, exist_ok=True)
    code, message, body = HANDLERS[command](cfg, spec, out)
    write_json(out / f"{command}.json", report_payload(command, resolved(cfg), body, _conversion(cfg)))
    return code, message


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fractsob", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="YAML or JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (default: config 'out' or ./fractsob-out)")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
        out = Path(args.out or cfg.out or "fractsob-out")
        code, message = run(args.command, cfg, out)
    except (FractsobError, OSError) as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    label = {EXIT_PASS: "PASS", EXIT_FAIL: "FAIL", EXIT_INCONCLUSIVE: "INCONCLUSIVE"}[code]
    print(f"{args.command}: {label}: {message}")
    return code


if __name__ == "__main__":
    sys.exit(main())
