"""DeGiorgi truncation machinery: Caccioppoli checks, level schedules,
truncation energies, the Gamma function, Chebyshev measure bounds, and the
superlinear energy recursion with its majorant iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BracketExhaustedError
from .solver import StiffnessOperator
from .young import NormalizedMeasure, YoungFunction, inverse_young

__all__ = [
    "TruncationSchedule",
    "IterationTrace",
    "truncation_level",
    "truncated_energy",
    "caccioppoli_defect",
    "modified_caccioppoli_check",
    "gamma_of",
    "compute_trace",
    "chebyshev_bound_check",
    "verify_recursion",
    "run_majorant",
    "adaptive_tau",
    "tol_disc",
]


@dataclass(frozen=True)
class TruncationSchedule:
    """Rising truncation levels C_k = tau * f_sup * (1 - c (k+1)^(-eps/2))."""

    tau: float = 1.0
    c: float = 0.5
    eps: float = 1.0
    f_sup: float = 1.0

    def __post_init__(self):
        if self.tau < 1.0:
            raise ValueError("tau must be >= 1")
        if not (0.0 < self.c < 1.0):
            raise ValueError("c must lie in (0, 1)")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.f_sup < 0.0:
            raise ValueError("f_sup must be nonnegative")


@dataclass
class IterationTrace:
    """Per-level truncation data; majorants are filled in by the recursion fit."""

    levels: np.ndarray  # C_k
    energies: np.ndarray  # U_k
    schedule: TruncationSchedule
    majorants: np.ndarray | None = None
    fitted_C: float | None = None

    def __post_init__(self):
        if np.any(self.energies < 0):
            raise ValueError("truncation energies must be nonnegative")
        if np.any(np.diff(self.energies) > 1e-12 * (1.0 + self.energies[:-1])):
            raise ValueError("truncation energies must be nonincreasing")


def truncation_level(k: int, sched: TruncationSchedule) -> float:
    if k < 0:
        raise ValueError("level index must be nonnegative")
    return sched.tau * sched.f_sup * (1.0 - sched.c * (k + 1) ** (-sched.eps / 2.0))


def truncated_energy(u, level: float, mu: NormalizedMeasure) -> float:
    """U = integral (u - level)_+^2 dmu."""
    v = np.asarray(u, dtype=float).ravel()
    w = np.asarray(mu.weights, dtype=float).ravel()
    excess = np.maximum(v - level, 0.0)
    return float(np.sum(w * excess * excess))


def tol_disc(h: float, f_sup: float, u_sup: float) -> float:
    """Discretization slack for inequality checks: O(h) with the data scale."""
    return 10.0 * h * (f_sup + u_sup)


def caccioppoli_defect(u, f_sup: float, op: StiffnessOperator,
                       mu: NormalizedMeasure | None = None) -> float:
    """integral_{u>0} u_+ f_sup dmu  -  integral |grad_A u_+|^2 dmu.

    The gradient energy is the assembled quadratic form evaluated at u_+,
    i.e. exactly the discretization against which u was solved, so for
    discrete solutions the defect is nonnegative up to solver residual.
    """
    mu = mu if mu is not None else op.measure
    v = np.asarray(u, dtype=float)
    up = np.maximum(v, 0.0)
    w = np.asarray(mu.weights, dtype=float).reshape(v.shape)
    rhs = f_sup * float(np.sum(w * up))
    lhs = op.energy(up)
    return rhs - lhs


def modified_caccioppoli_check(u, v, P: float, op: StiffnessOperator,
                               f_sup: float,
                               mu: NormalizedMeasure | None = None) -> float:
    """P * integral u_+ v dmu  -  ||grad_A u_+||^2, requiring f_sup <= P v on {u > 0}."""
    mu = mu if mu is not None else op.measure
    uu = np.asarray(u, dtype=float)
    vv = np.asarray(v, dtype=float)
    pos = uu > 0
    bound = P * vv[pos]
    if np.any(bound < f_sup * (1.0 - 1e-12)):
        idx = np.argwhere(pos)
        bad = np.flatnonzero(bound < f_sup * (1.0 - 1e-12))[0]
        witness = tuple(idx[bad])
        raise ValueError(
            f"precondition f_sup <= P v fails at node {witness}: "
            f"P v = {bound[bad]:.6g} < f_sup = {f_sup:.6g}"
        )
    up = np.maximum(uu, 0.0)
    w = np.asarray(mu.weights, dtype=float).reshape(uu.shape)
    rhs = P * float(np.sum(w * up * vv))
    lhs = op.energy(up)
    return rhs - lhs


def gamma_of(phi_conj: YoungFunction, t: float, tol: float = 1e-11) -> float:
    """Gamma(t) = 1 / phi_conj^{-1}(1/t) for t > 0."""
    if t <= 0.0:
        raise ValueError("Gamma is defined for positive arguments")
    target = 1.0 / t
    s = inverse_young(phi_conj, target, tol=tol)
    if s <= 0.0:
        raise BracketExhaustedError("conjugate inverse hit zero")
    return 1.0 / s


def compute_trace(u, sched: TruncationSchedule, mu: NormalizedMeasure,
                  k_max: int = 20) -> IterationTrace:
    levels = np.array([truncation_level(k, sched) for k in range(k_max + 1)])
    energies = np.array([truncated_energy(u, C, mu) for C in levels])
    return IterationTrace(levels=levels, energies=energies, schedule=sched)


def adaptive_tau(u, mu: NormalizedMeasure, f_sup: float, c: float = 0.5,
                 eps: float = 1.0, u0_cap: float = 1e-6,
                 tau_max: float = 2.0**30) -> TruncationSchedule:
    """Smallest power-of-two tau >= 1 whose schedule starts below the cap."""
    tau = 1.0
    while tau <= tau_max:
        sched = TruncationSchedule(tau=tau, c=c, eps=eps, f_sup=f_sup)
        if truncated_energy(u, truncation_level(0, sched), mu) <= u0_cap:
            return sched
        tau *= 2.0
    raise ValueError("no power-of-two tau brings U_0 below the cap")


def chebyshev_bound_check(u, sched: TruncationSchedule, mu: NormalizedMeasure,
                          k_max: int = 20):
    """Per-level report of mu({u_{k+1} > 0}) against the Chebyshev majorant.

    The majorant is (4 / (c^2 tau^2 f_sup^2 eps^2)) (k+2)^(2+eps) U_k; with
    f_sup = 0 both sides vanish and the level is reported as holding.
    """
    v = np.asarray(u, dtype=float).ravel()
    w = np.asarray(mu.weights, dtype=float).ravel()
    rows = []
    for k in range(k_max + 1):
        Ck1 = truncation_level(k + 1, sched)
        lhs = float(np.sum(w[v > Ck1]))
        Uk = truncated_energy(u, truncation_level(k, sched), mu)
        if sched.f_sup > 0.0:
            coeff = 4.0 / (sched.c**2 * sched.tau**2 * sched.f_sup**2 * sched.eps**2)
            rhs = coeff * (k + 2) ** (2.0 + sched.eps) * Uk
        else:
            rhs = 0.0
        rows.append({"k": k, "measure": lhs, "bound": rhs,
                     "holds": bool(lhs <= rhs + 1e-14)})
    return rows


def _recursion_rhs(C: float, k: int, Uk: float, eps: float,
                   phi_conj: YoungFunction) -> float:
    if Uk == 0.0 or C == 0.0:
        return 0.0
    arg = C * (k + 2) ** (2.0 + eps) * Uk
    return C * (k + 2) ** ((2.0 + eps) / 2.0) * Uk * gamma_of(phi_conj, arg)


def verify_recursion(trace: IterationTrace, phi: YoungFunction, eps: float,
                     c_hi: float = 1e6, tol: float = 1e-4):
    """Smallest constant C with U_{k+1} <= C (k+2)^{(2+eps)/2} U_k Gamma(C (k+2)^{2+eps} U_k).

    The right side is nondecreasing in C, so the smallest admissible C is
    found by bisection; levels with U_k = 0 are outside the fit range (the
    bound is already reached there).  Fills the trace majorants and slack.
    """
    U = trace.energies
    phi_conj = phi.conjugate_fn()
    ks = [k for k in range(len(U) - 1) if U[k] > 0.0]

    def admissible(C: float) -> bool:
        return all(U[k + 1] <= _recursion_rhs(C, k, U[k], eps, phi_conj) + 1e-300
                   for k in ks)

    if not ks:
        fitted = 0.0
    else:
        hi = 1.0
        while not admissible(hi):
            hi *= 4.0
            if hi > c_hi:
                raise BracketExhaustedError("no admissible recursion constant below cap")
        lo = 0.0
        while hi - lo > tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if admissible(mid):
                hi = mid
            else:
                lo = mid
        fitted = hi
    majorants = np.full(len(U), np.nan)
    slack = np.full(len(U), np.nan)
    for k in range(len(U) - 1):
        majorants[k] = _recursion_rhs(fitted, k, U[k], eps, phi_conj)
        slack[k] = majorants[k] - U[k + 1]
    trace.majorants = majorants
    trace.fitted_C = fitted
    return {"C": fitted, "fit_levels": ks, "majorants": majorants, "slack": slack}


def run_majorant(U0: float, C: float, eps: float, phi: YoungFunction,
                 k_max: int = 100, threshold: float = 1e-12,
                 blowup: float = 1e12):
    """Iterate V_{k+1} = C (k+2)^{(2+eps)/2} V_k Gamma(C (k+2)^{2+eps} V_k).

    Reports convergence below the threshold or divergence past the blow-up
    guard (including overflow) within k_max steps.
    """
    if U0 < 0.0:
        raise ValueError("U0 must be nonnegative")
    phi_conj = phi.conjugate_fn()
    seq = [float(U0)]
    verdict = "undecided"
    guard = blowup * max(1.0, U0)
    for k in range(k_max):
        V = seq[-1]
        if V <= threshold:
            verdict = "converged"
            break
        try:
            nxt = _recursion_rhs(C, k, V, eps, phi_conj)
        except (OverflowError, BracketExhaustedError):
            verdict = "diverged"
            break
        if not np.isfinite(nxt) or nxt > guard:
            seq.append(float(min(nxt, np.inf)))
            verdict = "diverged"
            break
        seq.append(float(nxt))
    else:
        verdict = "converged" if seq[-1] <= threshold else "undecided"
    if seq[-1] <= threshold:
        verdict = "converged"
    return {"sequence": np.array(seq), "verdict": verdict, "steps": len(seq) - 1}
