"""Sobolev and Orlicz-Sobolev inequality ratios, best-constant search, and
the duality / test-function inequality chain for solved Dirichlet problems.

Gradient energies here reuse the assembled edge form, so the inequality
chains that are algebraic identities of the discretization hold to solver
precision rather than to O(h).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .errors import InequalityFailsError
from .solver import StiffnessOperator, WeakProblem, assemble
from .young import NormalizedMeasure, YoungFunction, luxembourg_norm

__all__ = [
    "RatioReport",
    "ConstantEstimate",
    "orlicz_sobolev_ratio",
    "classical_weak_sobolev_check",
    "best_constant_search",
    "dual_sup_nonneg_check",
    "necessity_chain_check",
    "test_function_family",
]

FAMILY_VERSION = "v1"

# constant obtained by chaining the Cauchy-Schwarz estimate with the
# absorbed self-test inequality: S <= (sqrt(2) + sqrt(6))^2 sup|u| G
CHAIN_CONSTANT = 8.0 + 4.0 * np.sqrt(3.0)


@dataclass(frozen=True)
class RatioReport:
    lhs: float
    rhs: float
    ratio: float
    test_function_id: str


@dataclass(frozen=True)
class ConstantEstimate:
    lower_bound: float
    maximizer_id: str
    trials: int


def _gradient_energy(op: StiffnessOperator, w_full) -> float:
    return op.energy(np.asarray(w_full, dtype=float))


def orlicz_sobolev_ratio(w, phi: YoungFunction, op: StiffnessOperator,
                         test_id: str = "field") -> RatioReport:
    """lhs = ||w||_phi, rhs = ||grad_A w||_2; raises if the gradient side
    vanishes while the norm side does not (a degenerate direction carries w).
    """
    w = np.asarray(w, dtype=float)
    if np.any(w[op.mask.dirichlet & op.mask.inside] != 0.0):
        raise ValueError("test field must vanish on the boundary mask")
    lhs = luxembourg_norm(w, phi, op.measure).value
    if lhs == 0.0:
        raise ValueError("test field is identically zero")
    rhs = float(np.sqrt(max(_gradient_energy(op, w), 0.0)))
    if rhs == 0.0:
        raise InequalityFailsError(
            f"gradient energy vanished with ||w||_phi = {lhs:.6g}"
        )
    return RatioReport(lhs=lhs, rhs=rhs, ratio=lhs / rhs, test_function_id=test_id)


def classical_weak_sobolev_check(w, sigma: float, op: StiffnessOperator,
                                 r: float, test_id: str = "field") -> RatioReport:
    """(2 sigma, 2) weak Sobolev ratio with radius weight r on the gradient."""
    if sigma <= 1.0:
        raise ValueError("sigma must exceed 1")
    w = np.asarray(w, dtype=float)
    mu = np.asarray(op.measure.weights, dtype=float).reshape(w.shape)
    lhs = float(np.sum(mu * np.abs(w) ** (2.0 * sigma))) ** (1.0 / (2.0 * sigma))
    grad = float(np.sqrt(max(_gradient_energy(op, w), 0.0)))
    l2 = float(np.sqrt(np.sum(mu * w * w)))
    rhs = r * grad + l2
    if rhs == 0.0:
        raise ValueError("test field is identically zero")
    return RatioReport(lhs=lhs, rhs=rhs, ratio=lhs / rhs, test_function_id=test_id)


def test_function_family(grid, mask, count: int | None = None):
    """Deterministic, versioned test fields vanishing on the boundary.

    Tents at fixed anchor points, radial log bumps (ln 1/r)^a, and
    truncation (plateau cone) profiles, all clipped by the domain bubble.
    """
    X, Y = grid.mesh()
    g = grid
    half = (g.xmax - g.xmin) / 2.0
    cx, cy = 0.5 * (g.xmin + g.xmax), 0.5 * (g.ymin + g.ymax)
    bubble = np.maximum((X - g.xmin) * (g.xmax - X), 0.0) * np.maximum(
        (Y - g.ymin) * (g.ymax - Y), 0.0) / half**4
    interior = mask.interior
    fields = []

    anchors = [(0.0, 0.0), (0.35, 0.0), (0.0, 0.35), (-0.3, -0.3), (0.25, -0.25)]
    widths = [0.9, 0.55, 0.3]
    for ax, ay in anchors:
        for wd in widths:
            tent = np.maximum(
                1.0 - np.maximum(np.abs(X - cx - ax * half) / (wd * half),
                                 np.abs(Y - cy - ay * half) / (wd * half)),
                0.0,
            )
            fields.append((f"{FAMILY_VERSION}:tent({ax:g},{ay:g},{wd:g})", tent))

    r = np.hypot(X - cx, Y - cy) / half
    rsafe = np.maximum(r, 1e-6)
    for a in (0.25, 0.5, 1.0):
        logbump = np.where(r < 1.0, np.log(1.0 / np.minimum(rsafe, 0.999)) ** a, 0.0)
        fields.append((f"{FAMILY_VERSION}:logbump({a:g})", logbump * bubble))

    for level in (0.25, 0.5, 0.75):
        cone = np.maximum(1.0 - r, 0.0)
        fields.append((f"{FAMILY_VERSION}:trunc({level:g})",
                       np.minimum(cone, level)))

    out = []
    for name, f in fields:
        f = np.where(interior, f, 0.0)
        if float(np.abs(f).max()) > 0.0:
            out.append((name, f))
    return out[:count] if count is not None else out


def best_constant_search(phi: YoungFunction, A, mask, grid, budget: int = 40,
                         operator: StiffnessOperator | None = None,
                         ascent_steps: int = 8) -> ConstantEstimate:
    """Certified lower bound for the Orlicz-Sobolev constant.

    Evaluates the deterministic family in a fixed order, then refines the
    best candidate with inverse-iteration ascent steps w <- K^{-1} M g(w)
    (for phi = t^2 this is exactly inverse power iteration on the Poincare
    eigenproblem).  The bound is monotone nondecreasing in the budget.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if operator is None:
        problem = WeakProblem(A=A, f=lambda x, y: np.zeros_like(x), grid=grid, mask=mask)
        operator, _ = assemble(problem)
    op = operator
    best = (0.0, "none", None)
    trials = 0
    for name, f in test_function_family(grid, mask):
        if trials >= budget:
            break
        rep = orlicz_sobolev_ratio(f, phi, op, test_id=name)
        trials += 1
        if rep.ratio > best[0]:
            best = (rep.ratio, name, f)
    if trials < budget and best[0] > 0.0 and ascent_steps > 0:
        lu = splu(op.K.tocsc())
        mw = op.mass_diag()
        w = op.restrict(best[2])
        for step in range(ascent_steps):
            if trials >= budget:
                break
            w = lu.solve(mw * w)
            nrm = float(np.linalg.norm(w))
            if nrm == 0.0:
                break
            w /= nrm
            full = op.extend(w)
            rep = orlicz_sobolev_ratio(full, phi, op, test_id=f"{FAMILY_VERSION}:ascent{step}")
            trials += 1
            if rep.ratio > best[0]:
                best = (rep.ratio, rep.test_function_id, full)
    return ConstantEstimate(lower_bound=best[0], maximizer_id=best[1], trials=trials)


def dual_sup_nonneg_check(w, conj_theta: YoungFunction, mu: NormalizedMeasure,
                          candidates) -> tuple[float, float]:
    """(sup over signed candidates, sup over their positive parts) of
    integral w^2 g dmu; positive-part replacement never decreases the pairing.
    """
    w2 = np.asarray(w, dtype=float).ravel() ** 2
    wt = np.asarray(mu.weights, dtype=float).ravel()
    sup_x = -np.inf
    sup_y = -np.inf
    for g in candidates:
        g = np.asarray(g, dtype=float).ravel()
        modular = float(np.sum(wt * conj_theta(np.abs(g))))
        if modular > 1.0 + 1e-9:
            raise ValueError(f"candidate violates the conjugate modular bound ({modular:.6g})")
        pair = float(np.sum(wt * w2 * g))
        pair_pos = float(np.sum(wt * w2 * np.maximum(g, 0.0)))
        sup_x = max(sup_x, pair)
        sup_y = max(sup_y, pair_pos)
    return sup_x, sup_y


def necessity_chain_check(u, w, f, op: StiffnessOperator,
                          conj_theta: YoungFunction | None = None,
                          tol: float | None = None):
    """Inequality chain for a solved field u, test field w, and f >= 0.

    (i)   integral w^2 f <= 2 (integral w^2 [grad u]^2)^(1/2) (integral [grad w]^2)^(1/2)
    (ii)  integral w^2 [grad u]^2 <= 1/2 same + 8 integral u^2 [grad w]^2 + integral |u| w^2 |f|
    (iii) integral w^2 f <= (8 + 4 sqrt3) sup|u| integral [grad w]^2,
          the constant obtained by combining (i) and (ii).

    All gradient pairings are edge energies of the assembled form, under
    which (i) and (ii) are exact discrete consequences of the solve.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    fv = np.asarray(f, dtype=float) if not callable(f) else None
    if fv is None:
        X, Y = op.grid.mesh()
        fv = np.broadcast_to(np.asarray(f(X, Y), dtype=float), u.shape).astype(float)
    inside = op.mask.inside
    if np.any(fv[inside] < -1e-12):
        raise ValueError("the chain assumes f >= 0 on the domain")
    mu = np.asarray(op.measure.weights, dtype=float).reshape(u.shape)

    S = float(np.sum(mu * w * w * fv))
    E = op.weighted_gradient_energy(u, "mean_square", w_full=w)     # int w^2 [grad u]^2
    Gw = op.energy(w)                                               # int [grad w]^2
    F = op.weighted_gradient_energy(w, "mean_square", w_full=u)     # int u^2 [grad w]^2
    cross = float(np.sum(mu * np.abs(u) * w * w * np.abs(fv)))
    sup_u = float(np.abs(u[inside]).max()) if np.any(inside) else 0.0

    if tol is None:
        f_sup = float(np.abs(fv[inside]).max()) if np.any(inside) else 0.0
        tol = 10.0 * op.grid.h * (f_sup + sup_u) + 1e-12

    checks = []
    rhs1 = 2.0 * np.sqrt(max(E, 0.0)) * np.sqrt(max(Gw, 0.0))
    checks.append({"name": "pairing_cauchy_schwarz", "lhs": S, "rhs": rhs1,
                   "slack": rhs1 - S, "holds": bool(rhs1 - S >= -tol)})
    rhs2 = 0.5 * E + 8.0 * F + cross
    checks.append({"name": "self_test_absorption", "lhs": E, "rhs": rhs2,
                   "slack": rhs2 - E, "holds": bool(rhs2 - E >= -tol)})
    rhs3 = CHAIN_CONSTANT * sup_u * Gw
    third = {"name": "combined_bound", "lhs": S, "rhs": rhs3,
             "slack": rhs3 - S, "holds": bool(rhs3 - S >= -tol)}
    if conj_theta is not None:
        # record sup|u| against the dual-space load norm; the bound above is
        # this ratio times ||f|| * G_w with the chain constant
        fnorm = luxembourg_norm(fv, conj_theta, op.measure).value
        third["boundedness_ratio"] = sup_u / fnorm if fnorm > 0.0 else 0.0
    checks.append(third)
    return checks
