"""Configuration-driven command line front end.

Subcommands: solve, norms, subunit, degiorgi, sobolev, counterexample, all.
Each run writes machine-readable CSV/JSON (and SVG line plots) into the
output directory and exits 0 only if every recorded check passed.  Exit
code 2 flags configuration problems, 1 a failed numerical check.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import degiorgi as dg
from . import sharpness as sh
from . import sobolev as sb
from .errors import ConfigError
from .geometry import DomainMask, Grid, matrix_field_from_config
from .solver import WeakProblem, assemble, load_from_config, solve_dirichlet
from .svgplot import line_plot_svg
from .young import bump_phi, luxembourg_norm, orlicz_norm_dual, young_from_config

_OUT_ENV = "ORLICZLAB_OUTDIR"


def _canonical(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def _config_hash(config: dict) -> str:
    return hashlib.sha256(_canonical(config).encode()).hexdigest()[:16]


def _domain_from_config(spec: dict, n: int):
    kind = spec.get("kind")
    if kind == "disk":
        radius = float(spec.get("radius", 1.0))
        grid = Grid.disk_bounding(radius, n)
        return grid, DomainMask.disk(grid, radius)
    if kind == "square":
        side = float(spec.get("side", 1.0))
        grid = Grid.square(side, n)
        return grid, DomainMask.square(grid)
    raise ConfigError(f"unknown domain kind {spec.get('kind')!r}")


def _field_from_config(spec: dict, grid: Grid) -> np.ndarray:
    X, Y = grid.mesh()
    kind = spec.get("kind")
    if kind == "constant":
        return np.full_like(X, float(spec["value"]))
    if kind == "gaussian":
        cx, cy = spec.get("center", (0.0, 0.0))
        s = float(spec.get("sigma", 0.2))
        amp = float(spec.get("amp", 1.0))
        return amp * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * s * s))
    if kind == "custom":
        data = np.loadtxt(spec["path"], delimiter=",", ndmin=2)
        n = grid.n
        if data.shape[0] != n * n:
            raise ConfigError("custom field CSV must carry one row per grid node")
        return data[:, 2].reshape(n, n)
    raise ConfigError(f"unknown field kind {spec.get('kind')!r}")


class ReportBuilder:
    def __init__(self, config: dict):
        self.config = config
        self.checks = []
        self.series = {}
        self.extras = {}

    def check(self, name: str, lhs: float, rhs: float, tolerance: float):
        slack = rhs - lhs
        self.checks.append({
            "name": name,
            "lhs": float(lhs),
            "rhs": float(rhs),
            "slack": float(slack),
            "tolerance": float(tolerance),
            "verdict": "pass" if slack >= -tolerance else "fail",
        })

    def expect(self, name: str, got, want):
        self.checks.append({
            "name": name, "lhs": str(got), "rhs": str(want), "slack": 0.0,
            "tolerance": 0.0, "verdict": "pass" if got == want else "fail",
        })

    def add_series(self, name: str, xs, ys, xlabel: str, ylabel: str,
                   logx=False, logy=False):
        self.series[name] = {
            "x": [float(v) for v in xs], "y": [float(v) for v in ys],
            "xlabel": xlabel, "ylabel": ylabel, "logx": logx, "logy": logy,
        }

    def document(self) -> dict:
        return {
            "metadata": {
                "config_hash": _config_hash(self.config),
                "created_unix": time.time(),
            },
            "config": self.config,
            "checks": self.checks,
            "extras": self.extras,
            "passed": all(c["verdict"] == "pass" for c in self.checks),
        }


def emit_plots(report: ReportBuilder, out_dir: str) -> list[str]:
    """One SVG per recorded series; byte-identical for identical input."""
    written = []
    for name, s in sorted(report.series.items()):
        if not s["x"]:
            print(f"warning: series {name} is empty, skipping plot", file=sys.stderr)
            continue
        svg = line_plot_svg(s["x"], s["y"], name, s["xlabel"], s["ylabel"],
                            logx=s["logx"], logy=s["logy"])
        path = os.path.join(out_dir, f"{name}.svg")
        with open(path, "w") as fh:
            fh.write(svg)
        written.append(path)
    return written


def _write_csv(path: str, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def _write_report(report: ReportBuilder, out_dir: str):
    doc = report.document()
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


# ---------------------------------------------------------------------------
# pipelines


def _solve_pipeline(config: dict, report: ReportBuilder, out_dir: str):
    n = int(config.get("grid_n", 65))
    if n < 17:
        raise ConfigError("solver runs need grid_n >= 17")
    grid, mask = _domain_from_config(config["domain"], n)
    opspec = config.setdefault("operator", {"kind": "identity"})
    fspec = config.setdefault("f", {"kind": "constant", "value": -1.0})
    A = matrix_field_from_config(opspec)
    f = load_from_config(fspec)
    tol = float(config.get("tolerances", {}).get("cg", 1e-10))
    problem = WeakProblem(A=A, f=f, grid=grid, mask=mask)
    op, b = assemble(problem)
    u, rep = solve_dirichlet(problem, tol=tol, operator_and_load=(op, b))

    report.extras["solve"] = {
        "iterations": rep.iterations,
        "relative_residual": rep.relative_residual,
        "alpha_est": rep.alpha_est,
        "beta_est": rep.beta_est,
        "poincare_C": rep.poincare_C,
        "max_u": float(np.abs(u).max()),
    }
    report.check("cg_relative_residual", rep.relative_residual, tol, tol)

    dom = config["domain"]
    if (dom.get("kind") == "disk" and opspec.get("kind") == "identity"
            and fspec.get("kind") == "constant"):
        # closed-form radial reference for the constant-load disk
        R = float(dom.get("radius", 1.0))
        amp = -float(fspec.get("value", -1.0)) / 4.0
        i0 = j0 = (n - 1) // 2
        center = u[i0, j0]
        ref = amp * R * R
        ctol = float(config.get("tolerances", {}).get("center_value", 1e-3))
        report.check("center_value", abs(center - ref), ctol, 0.0)

    X, Y = grid.mesh()
    rows = [(float(X[i, j]), float(Y[i, j]), float(u[i, j]))
            for i in range(n) for j in range(n) if mask.inside[i, j]]
    _write_csv(os.path.join(out_dir, "solution.csv"), ["x", "y", "u"], rows)
    mid = [(float(Y[(n - 1) // 2, j]), float(u[(n - 1) // 2, j])) for j in range(n)]
    report.add_series("solution_midline", [p[0] for p in mid], [p[1] for p in mid],
                      "y", "u")
    return u, op, problem


def _degiorgi_pipeline(config: dict, report: ReportBuilder, out_dir: str):
    u, op, problem = _solve_pipeline(config, report, out_dir)
    f_vals = problem.load_values()
    f_sup = float(np.abs(f_vals[op.mask.inside]).max())
    dcfg = config.get("degiorgi", {})
    eps = float(dcfg.get("eps", 1.0))
    c = float(dcfg.get("c", 0.5))
    N = float(dcfg.get("bump_N", 2.0))
    k_max = int(dcfg.get("k_max", 20))
    sched = dg.adaptive_tau(u, op.measure, f_sup, c=c, eps=eps)
    trace = dg.compute_trace(u, sched, op.measure, k_max=k_max)
    phi = bump_phi(N)
    fit = dg.verify_recursion(trace, phi, eps)
    maj = dg.run_majorant(trace.energies[0], fit["C"], eps, phi, k_max=100)

    defect = dg.caccioppoli_defect(u, f_sup, op)
    slack = dg.tol_disc(op.grid.h, f_sup, float(np.abs(u).max()))
    report.check("caccioppoli_defect", 0.0, defect, slack)
    report.check("energies_nonincreasing",
                 float(np.max(np.diff(trace.energies), initial=0.0)), 0.0, 1e-12)
    report.expect("majorant_run", maj["verdict"], "converged")
    report.extras["degiorgi"] = {
        "tau": sched.tau, "fitted_C": fit["C"],
        "majorant_steps": maj["steps"], "U0": float(trace.energies[0]),
    }

    rows = []
    for k in range(len(trace.levels)):
        majopt = trace.majorants[k] if trace.majorants is not None else float("nan")
        slack_k = (majopt - trace.energies[k + 1]
                   if k + 1 < len(trace.energies) and np.isfinite(majopt)
                   else float("nan"))
        rows.append((k, float(trace.levels[k]), float(trace.energies[k]),
                     float(majopt), float(slack_k)))
    _write_csv(os.path.join(out_dir, "trace.csv"),
               ["k", "C_k", "U_k", "majorant_k", "slack_k"], rows)
    positive = trace.energies > 0
    if np.any(positive):
        ks = np.flatnonzero(positive)
        report.add_series("degiorgi_trace", ks, trace.energies[ks], "k", "U_k",
                          logy=True)


def _norms_pipeline(config: dict, report: ReportBuilder, out_dir: str):
    n = int(config.get("grid_n", 33))
    grid, mask = _domain_from_config(config.get("domain", {"kind": "square", "side": 1.0}), n)
    theta = young_from_config(config["young"])
    field = _field_from_config(config["field"], grid)
    problem = WeakProblem(A=matrix_field_from_config({"kind": "identity"}),
                          f=lambda x, y: np.zeros_like(x), grid=grid, mask=mask)
    op, _ = assemble(problem)
    lux = luxembourg_norm(field, theta, op.measure)
    dual = orlicz_norm_dual(field, theta, op.measure)
    report.check("norm_sandwich_lower", lux.value, dual, 1e-9 * (1 + lux.value))
    report.check("norm_sandwich_upper", dual, 2.0 * lux.value, 1e-9 * (1 + lux.value))
    report.extras["norms"] = {"luxembourg": lux.value, "dual_orlicz": dual,
                              "bracket": list(lux.bracket),
                              "iterations": lux.iterations}
    _write_csv(os.path.join(out_dir, "norms.csv"),
               ["quantity", "value"],
               [("luxembourg", lux.value), ("dual_orlicz", dual)])


def _subunit_pipeline(config: dict, report: ReportBuilder, out_dir: str):
    from .geometry import subunit_ball, subunit_distance, subunit_graph

    n = int(config.get("grid_n", 65))
    grid, mask = _domain_from_config(config.get("domain", {"kind": "square", "side": 1.0}), n)
    A = matrix_field_from_config(config.get("operator", {"kind": "identity"}))
    scfg = config.get("subunit", {})
    center = tuple(scfg.get("center", (0.0, 0.0)))
    radius = float(scfg.get("radius", 0.5))
    graph = subunit_graph(A, grid, mask)
    targets = scfg.get("targets", [[grid.xmax - grid.h, 0.0]])
    rows = []
    for t in targets:
        d = subunit_distance(A, center, tuple(t), grid, mask, graph=graph)
        rows.append((float(t[0]), float(t[1]), float(d)))
    _write_csv(os.path.join(out_dir, "distances.csv"), ["x", "y", "d"], rows)
    ball = subunit_ball(A, center, radius, grid, mask, graph=graph)
    count = int(ball.inside.sum())
    report.extras["subunit"] = {"ball_nodes": count, "distances": rows}
    report.check("ball_radius_nonneg", 0.0, radius, 0.0)


def _sobolev_pipeline(config: dict, report: ReportBuilder, out_dir: str):
    n = int(config.get("grid_n", 33))
    grid, mask = _domain_from_config(config.get("domain", {"kind": "square", "side": 1.0}), n)
    A = matrix_field_from_config(config.get("operator", {"kind": "identity"}))
    phi = young_from_config(config.get("young", {"kind": "power", "p": 2}))
    budget = int(config.get("budget", 24))
    problem = WeakProblem(A=A, f=lambda x, y: np.zeros_like(x), grid=grid, mask=mask)
    op, _ = assemble(problem)
    rows = []
    for name, f in sb.test_function_family(grid, mask, count=budget):
        rep = sb.orlicz_sobolev_ratio(f, phi, op, test_id=name)
        rows.append((name, rep.lhs, rep.rhs, rep.ratio))
    est = sb.best_constant_search(phi, A, mask, grid, budget=budget, operator=op)
    _write_csv(os.path.join(out_dir, "sobolev.csv"),
               ["test_id", "lhs", "rhs", "ratio"], rows)
    report.extras["sobolev"] = {"lower_bound": est.lower_bound,
                                "maximizer": est.maximizer_id, "trials": est.trials}
    report.check("ratios_bounded_by_estimate",
                 max(r[3] for r in rows), est.lower_bound, 1e-12)
    report.add_series("sobolev_ratios", range(len(rows)), [r[3] for r in rows],
                      "candidate", "ratio")


def _counterexample_pipeline(config: dict, report: ReportBuilder, out_dir: str):
    case = config.get("case")
    halvings = int(config.get("cutoffs", 96))
    if case == "laplacian":
        alpha = float(config.get("alpha", 0.25))
        q = float(config.get("q", 1.0))
        ex = sh.laplacian_example(alpha, q, halvings=halvings)
        study = ex.study
    elif case == "finite":
        m = float(config.get("m", 1.0))
        q = float(config.get("q", 1.0))
        study = sh.finite_vanishing_report(m, q, halvings=halvings)
    elif case == "infinite":
        alpha = float(config.get("alpha", 0.5))
        M = float(config.get("M", 8.0))
        study = sh.infinite_vanishing_report(alpha, M, halvings=min(halvings, 48))
    else:
        raise ConfigError(f"unknown counterexample case {case!r}")
    expected = config.get("expect", study.aux.get("expected"))
    report.expect("threshold_verdict", study.verdict, expected)
    report.extras["counterexample"] = {
        "verdict": study.verdict, "slope": study.slope, **study.aux,
    }
    _write_csv(os.path.join(out_dir, "study.csv"), ["epsilon", "I"],
               list(zip(study.cutoffs.tolist(), study.integrals.tolist())))
    with open(os.path.join(out_dir, "verdict.json"), "w") as fh:
        json.dump({"case": case, "verdict": study.verdict,
                   "slope": study.slope,
                   "aux": {k: (v if not isinstance(v, np.generic) else v.item())
                           for k, v in study.aux.items()}},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    finite_mask = np.isfinite(study.integrals)
    report.add_series("refinement_study", study.cutoffs[finite_mask],
                      study.integrals[finite_mask], "epsilon", "I",
                      logx=True, logy=bool(np.all(study.integrals[finite_mask] > 0)))


_PIPELINES = {
    "solve": _solve_pipeline,
    "degiorgi": _degiorgi_pipeline,
    "norms": _norms_pipeline,
    "subunit": _subunit_pipeline,
    "sobolev": _sobolev_pipeline,
    "counterexample": _counterexample_pipeline,
}


def run(config: dict) -> int:
    """Execute one configured pipeline; returns the process exit code."""
    try:
        sub = config.get("subcommand")
        if sub == "all":
            subs = ["solve", "degiorgi", "sobolev",
                    "counterexample"]
        elif sub in _PIPELINES:
            subs = [sub]
        else:
            raise ConfigError(f"unknown subcommand {sub!r}")
        out_dir = os.environ.get(_OUT_ENV) or config.get("output_dir") or "out"
        os.makedirs(out_dir, exist_ok=True)
        report = ReportBuilder(config)
        for s in subs:
            sub_dir = out_dir if len(subs) == 1 else os.path.join(out_dir, s)
            os.makedirs(sub_dir, exist_ok=True)
            cfg = dict(config)
            if s == "counterexample" and sub == "all":
                cfg.setdefault("case", "finite")
                cfg.setdefault("m", 1.0)
                cfg.setdefault("q", 1.0)
            _PIPELINES[s](cfg, report, sub_dir)
        emit_plots(report, out_dir)
        doc = _write_report(report, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc!r}", file=sys.stderr)
        return 2
    if not doc["passed"]:
        failed = [c["name"] for c in doc["checks"] if c["verdict"] == "fail"]
        print(f"numerical checks failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="orliczlab",
        description="Degenerate elliptic Dirichlet solves, Orlicz norms, "
                    "subunit metrics, truncation traces, and threshold studies.",
    )
    ap.add_argument("--config", help="JSON config file; flags override its entries")
    sub = ap.add_subparsers(dest="subcommand")
    for name in ("solve", "degiorgi", "sobolev", "norms", "subunit", "all"):
        p = sub.add_parser(name)
        p.add_argument("--domain", default=None, choices=["disk", "square"])
        p.add_argument("--radius", type=float, default=None)
        p.add_argument("--side", type=float, default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--operator", default=None,
                       choices=["identity", "grushin", "quartic"])
        p.add_argument("--out", default=None)
    pc = sub.add_parser("counterexample")
    pc.add_argument("--case", required=False, choices=["laplacian", "finite", "infinite"])
    pc.add_argument("--alpha", type=float, default=None)
    pc.add_argument("--m", type=float, default=None)
    pc.add_argument("--q", type=float, default=None)
    pc.add_argument("--M", type=float, default=None)
    pc.add_argument("--cutoffs", type=int, default=None)
    pc.add_argument("--expect", default=None, choices=["converges", "diverges"])
    pc.add_argument("--out", default=None)
    return ap


_NAMED_OPERATORS = {
    "identity": {"kind": "identity"},
    "grushin": {"kind": "diag_g", "profile": {"kind": "power", "m": 1.0}},
    "quartic": {"kind": "diag_g", "profile": {"kind": "power", "m": 2.0}},
}


def _config_from_args(args) -> dict:
    config = {}
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
    if args.subcommand:
        config["subcommand"] = args.subcommand
    if config.get("subcommand") is None:
        raise ConfigError("no subcommand given (flag or config entry required)")
    flag_domain = getattr(args, "domain", None)
    if flag_domain:
        dom = {"kind": flag_domain}
        if args.radius is not None:
            dom["radius"] = args.radius
        if args.side is not None:
            dom["side"] = args.side
        config["domain"] = dom
    config.setdefault("domain", {"kind": "square", "side": 1.0})
    if getattr(args, "n", None):
        config["grid_n"] = args.n
    if getattr(args, "operator", None):
        config["operator"] = _NAMED_OPERATORS[args.operator]
    for key in ("case", "alpha", "m", "q", "M", "cutoffs", "expect"):
        val = getattr(args, key, None)
        if val is not None:
            config[key] = val
    out = getattr(args, "out", None)
    if out:
        config["output_dir"] = out
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
