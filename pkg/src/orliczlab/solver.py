"""Discrete weak formulation of div(A grad u) = f with zero boundary trace.

The bilinear form is discretized edgewise in conservation form: each grid
edge carries a flux coefficient a(midpoint) * h / L, which reproduces the
standard 5-point second-difference stencil for A = I and couples only the
nondegenerate directions when A is singular.  On level-set domains the
legs that cross the boundary are shortened to the crossing point, so the
zero condition is applied on the true boundary rather than the staircase
(plain node masking loses an order of accuracy there).  Off-diagonal
coefficients enter through a symmetric cell-centered term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, diags
from scipy.sparse.linalg import cg as _cg, eigsh

from .errors import (
    ConfigError,
    DegenerateInequalityError,
    InconsistencyError,
    NonCoerciveError,
)
from .geometry import DomainMask, Grid, MatrixField
from .young import NormalizedMeasure

__all__ = [
    "WeakProblem",
    "StiffnessOperator",
    "SolveReport",
    "assemble",
    "solve_dirichlet",
    "weak_residual",
    "poincare_constant",
    "lax_milgram_constants",
    "load_from_config",
]

# directimection table: (di, dj), axis component label
_DIRS = ((1, 0), (-1, 0), (0, 1), (0, -1))

_THETA_MIN = 1e-2  # shortest allowed cut-leg fraction; shorter legs pin the node


@dataclass
class WeakProblem:
    """Operator, load, and domain for one Dirichlet solve."""

    A: MatrixField
    f: object  # callable f(x, y) or (n, n) array
    grid: Grid
    mask: DomainMask

    def load_values(self) -> np.ndarray:
        if callable(self.f):
            X, Y = self.grid.mesh()
            vals = np.asarray(self.f(X, Y), dtype=float)
            return np.broadcast_to(vals, (self.grid.n, self.grid.n)).astype(float)
        vals = np.asarray(self.f, dtype=float)
        if vals.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"load shape {vals.shape} does not match grid")
        if not np.all(np.isfinite(vals[self.mask.inside])):
            raise ValueError("load must be finite on the domain mask")
        return vals


@dataclass
class StiffnessOperator:
    """Assembled quadratic form over the interior unknowns.

    Edge arrays are kept so that weighted edge energies (Caccioppoli,
    necessity-chain checks) can reuse exactly the same discretization:
    B[u, v] = sum_e c_e (du)_e (dv)_e + sum_b cb_b u_i v_i.
    """

    K: object  # csr over unknowns
    unknown_index: np.ndarray  # (n, n) int, -1 off the interior
    measure: NormalizedMeasure  # full-grid weights
    grid: Grid
    mask: DomainMask
    domain_area: float
    edge_i: np.ndarray  # interior edges, unknown indices
    edge_j: np.ndarray
    edge_c: np.ndarray
    bedge_i: np.ndarray  # cut/boundary legs: unknown index, coefficient
    bedge_c: np.ndarray

    @property
    def n_unknowns(self) -> int:
        return self.K.shape[0]

    def restrict(self, u_full: np.ndarray) -> np.ndarray:
        return np.asarray(u_full, dtype=float).ravel()[self.unknown_index.ravel() >= 0]

    def extend(self, u_int: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.n * self.grid.n)
        out[self.unknown_index.ravel() >= 0] = u_int
        return out.reshape(self.grid.n, self.grid.n)

    def mass_diag(self) -> np.ndarray:
        w = self.measure.weights.ravel()
        return w[self.unknown_index.ravel() >= 0]

    def energy(self, u_full: np.ndarray) -> float:
        """B[u, u] for a full-grid field (zero outside the unknowns)."""
        ui = self.restrict(u_full)
        return float(ui @ (self.K @ ui))

    def bilinear(self, u_full: np.ndarray, v_full: np.ndarray) -> float:
        return float(self.restrict(u_full) @ (self.K @ self.restrict(v_full)))

    def weighted_gradient_energy(self, u_full, weight_mode, w_full=None) -> float:
        """Edge energies with per-edge weights derived from another field.

        weight_mode 'mean_square' uses (w_i^2 + w_j^2)/2 (w = 0 across cut
        legs), 'square_mean' uses ((w_i + w_j)/2)^2; both reduce to the plain
        energy for w == 1.
        """
        u = np.asarray(u_full, dtype=float).ravel()
        keep = self.unknown_index.ravel() >= 0
        nodes = np.flatnonzero(keep)
        ui = u[nodes]
        du = ui[self._edge_i_pos] - ui[self._edge_j_pos]
        if w_full is None:
            wt = np.ones_like(du)
            wb = np.ones_like(self.bedge_c)
        else:
            w = np.asarray(w_full, dtype=float).ravel()[nodes]
            wi, wj = w[self._edge_i_pos], w[self._edge_j_pos]
            if weight_mode == "mean_square":
                wt = 0.5 * (wi * wi + wj * wj)
                wb = 0.5 * w[self._bedge_pos] ** 2
            elif weight_mode == "square_mean":
                wt = (0.5 * (wi + wj)) ** 2
                wb = (0.5 * w[self._bedge_pos]) ** 2
            else:
                raise ValueError(f"unknown weight mode {weight_mode!r}")
        total = float(np.sum(self.edge_c * wt * du * du))
        total += float(np.sum(self.bedge_c * wb * ui[self._bedge_pos] ** 2))
        return total

    def __post_init__(self):
        # positions of edge endpoints inside the unknown vector
        self._edge_i_pos = self.edge_i
        self._edge_j_pos = self.edge_j
        self._bedge_pos = self.bedge_i


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    relative_residual: float
    alpha_est: float
    beta_est: float
    poincare_C: float


def _leg_fraction(mask: DomainMask, x0, y0, dx, dy, h):
    """Fraction of a grid leg retained inside the level-set domain."""
    phi = mask.levelset
    if phi is None:
        return np.ones_like(np.asarray(x0, dtype=float))
    lo = np.zeros_like(np.asarray(x0, dtype=float))
    hi = np.ones_like(lo)
    # phi(x0) < 0, phi at the full step >= 0: bisect the crossing
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        val = phi(x0 + mid * dx * h, y0 + mid * dy * h)
        neg = val < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return np.maximum(0.5 * (lo + hi), _THETA_MIN)


def assemble(problem: WeakProblem):
    """Stiffness operator and load vector for the weak problem.

    Returns (StiffnessOperator, b) with b_i = -integral f phi_i dmu in
    lumped form.  K is exactly symmetric; for A = I on an interior row it
    is the 5-point stencil scaled by the node's measure weight / h^2.
    """
    grid, mask = problem.grid, problem.mask
    mask.require_nonempty()
    n, h = grid.n, grid.h
    X, Y = grid.mesh()
    interior = mask.interior
    unknown_index = -np.ones((n, n), dtype=int)
    unknown_index[interior] = np.arange(int(interior.sum()))

    legs = {}
    edge_i, edge_j, edge_c = [], [], []
    bedge_i, bedge_c = [], []

    for di, dj in _DIRS:
        src = interior.copy()
        # neighbor lookup with explicit bounds
        nbr_ok = np.zeros_like(src)
        tgt_interior = np.zeros_like(src)
        ii = slice(max(0, -di), n - max(0, di))
        jj = slice(max(0, -dj), n - max(0, dj))
        ti = slice(max(0, di), n + min(0, di))
        tj = slice(max(0, dj), n + min(0, dj))
        nbr_ok[ii, jj] = True
        tgt_interior[ii, jj] = interior[ti, tj]
        off_grid = src & ~nbr_ok
        to_interior = src & tgt_interior
        to_boundary = src & nbr_ok & ~tgt_interior

        theta = np.ones((n, n))
        if np.any(to_boundary):
            xb, yb = X[to_boundary], Y[to_boundary]
            theta_b = _leg_fraction(mask, xb, yb, di, dj, h)
            theta[to_boundary] = theta_b
        theta[off_grid] = 0.0
        theta[~src] = 0.0
        theta[to_interior] = 1.0
        legs[(di, dj)] = theta

        # coefficient at the midpoint of the retained segment
        comp = problem.A.a11 if dj == 0 else problem.A.a22
        xm = X + 0.5 * theta * di * h
        ym = Y + 0.5 * theta * dj * h
        a_mid = np.asarray(comp(xm, ym), dtype=float)
        a_mid = np.broadcast_to(a_mid, (n, n))

        if di + dj > 0:  # collect interior-interior edges once (E and N only)
            src_idx = unknown_index[to_interior]
            tgt_idx = unknown_index[ti, tj][to_interior[ii, jj]]
            c = a_mid[to_interior]  # * h / h
            edge_i.append(src_idx)
            edge_j.append(tgt_idx)
            edge_c.append(c)
        if np.any(to_boundary):
            src_idx = unknown_index[to_boundary]
            cb = a_mid[to_boundary] / theta[to_boundary]
            bedge_i.append(src_idx)
            bedge_c.append(cb)

    # measure weights from clipped-Voronoi legs, for every inside node
    LE, LW = legs[(1, 0)] * h, legs[(-1, 0)] * h
    LN, LS = legs[(0, 1)] * h, legs[(0, -1)] * h
    V = np.zeros((n, n))
    V[interior] = (0.5 * (LE + LW) * 0.5 * (LN + LS))[interior]
    # grid-aligned Dirichlet nodes keep their inside half/quarter cells
    bnd_in = mask.inside & mask.dirichlet
    if np.any(bnd_in):
        full = {}
        for di, dj in _DIRS:
            nb = np.zeros((n, n), dtype=bool)
            ii = slice(max(0, -di), n - max(0, di))
            jj = slice(max(0, -dj), n - max(0, dj))
            ti = slice(max(0, di), n + min(0, di))
            tj = slice(max(0, dj), n + min(0, dj))
            nb[ii, jj] = mask.inside[ti, tj]
            full[(di, dj)] = nb
        VE = np.where(full[(1, 0)], h, 0.0)
        VW = np.where(full[(-1, 0)], h, 0.0)
        VN = np.where(full[(0, 1)], h, 0.0)
        VS = np.where(full[(0, -1)], h, 0.0)
        V[bnd_in] = (0.5 * (VE + VW) * 0.5 * (VN + VS))[bnd_in]
    area = float(V.sum())
    mu = NormalizedMeasure(V / area)

    edge_i = np.concatenate(edge_i) if edge_i else np.zeros(0, dtype=int)
    edge_j = np.concatenate(edge_j) if edge_j else np.zeros(0, dtype=int)
    edge_c = (np.concatenate(edge_c) if edge_c else np.zeros(0)) / area
    bedge_i = np.concatenate(bedge_i) if bedge_i else np.zeros(0, dtype=int)
    bedge_c = (np.concatenate(bedge_c) if bedge_c else np.zeros(0)) / area

    nun = int(interior.sum())
    rows = np.concatenate([edge_i, edge_j, edge_i, edge_j, bedge_i])
    cols = np.concatenate([edge_i, edge_j, edge_j, edge_i, bedge_i])
    vals = np.concatenate([edge_c, edge_c, -edge_c, -edge_c, bedge_c])

    # symmetric cell-centered cross term for off-diagonal coefficients
    Xc = 0.5 * (X[:-1, :-1] + X[1:, 1:])
    Yc = 0.5 * (Y[:-1, :-1] + Y[1:, 1:])
    a12_c = np.broadcast_to(np.asarray(problem.A.a12(Xc, Yc), dtype=float), Xc.shape)
    if np.any(a12_c != 0.0):
        cell_ok = (mask.inside[:-1, :-1] & mask.inside[1:, :-1]
                   & mask.inside[:-1, 1:] & mask.inside[1:, 1:])
        active = cell_ok & (a12_c != 0.0)
        corners = [unknown_index[:-1, :-1][active], unknown_index[1:, :-1][active],
                   unknown_index[:-1, 1:][active], unknown_index[1:, 1:][active]]
        gx = np.array([-1.0, 1.0, -1.0, 1.0]) / (2.0 * h)
        gy = np.array([-1.0, -1.0, 1.0, 1.0]) / (2.0 * h)
        scale = a12_c[active] * h * h / area
        for a_ in range(4):
            for b_ in range(4):
                coef = (gx[a_] * gy[b_] + gy[a_] * gx[b_]) * scale
                ok = (corners[a_] >= 0) & (corners[b_] >= 0)
                rows = np.concatenate([rows, corners[a_][ok]])
                cols = np.concatenate([cols, corners[b_][ok]])
                vals = np.concatenate([vals, coef[ok]])

    K = coo_matrix((vals, (rows, cols)), shape=(nun, nun)).tocsr()
    K.sum_duplicates()
    K.eliminate_zeros()

    f_vals = problem.load_values()
    b = -(f_vals * mu.weights)[interior]

    op = StiffnessOperator(
        K=K, unknown_index=unknown_index, measure=mu, grid=grid, mask=mask,
        domain_area=area, edge_i=edge_i, edge_j=edge_j, edge_c=edge_c,
        bedge_i=bedge_i, bedge_c=bedge_c,
    )
    return op, b


def _run_cg(K, b, tol, x0=None, maxiter=None):
    count = {"n": 0}

    def cb(_):
        count["n"] += 1

    kwargs = {"maxiter": maxiter, "callback": cb, "x0": x0}
    try:
        x, info = _cg(K, b, rtol=tol, atol=0.0, **kwargs)
    except TypeError:  # older scipy spells the tolerance differently
        x, info = _cg(K, b, tol=tol, atol=0.0, **kwargs)
    return x, info, count["n"]


def solve_dirichlet(problem: WeakProblem, tol: float = 1e-10,
                    operator_and_load=None, x0_full=None,
                    compute_constants: bool = True):
    """Conjugate-gradient solve of the assembled system to relative residual tol.

    The solution is extended by zero on the Dirichlet nodes.  A numerically
    singular system raises NonCoerciveError carrying the smallest Ritz value.
    """
    op, b = operator_and_load if operator_and_load is not None else assemble(problem)
    diag = op.K.diagonal()
    if np.any(diag <= 0.0):
        raise NonCoerciveError(
            "stiffness diagonal vanishes: fully decoupled unknown",
            smallest_ritz=float(diag.min()),
        )
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        u = op.extend(np.zeros(op.n_unknowns))
        report = _make_report(op, 0, 0.0, compute_constants, problem)
        return u, report
    x0 = op.restrict(x0_full) if x0_full is not None else None
    x, info, iters = _run_cg(op.K, b, tol, x0=x0, maxiter=20 * op.n_unknowns)
    rel = float(np.linalg.norm(op.K @ x - b)) / bnorm
    if info != 0 or rel > 10.0 * tol:
        lam = smallest_ritz_value(op)
        if lam <= max(tol, 1e-14):
            raise NonCoerciveError(
                f"CG failed to converge (residual {rel:.3e})", smallest_ritz=lam
            )
        raise InconsistencyError(f"CG stalled at residual {rel:.3e} with lam_min {lam:.3e}")
    u = op.extend(x)
    report = _make_report(op, iters, rel, compute_constants, problem)
    return u, report


def _make_report(op, iters, rel, compute_constants, problem):
    if compute_constants:
        C = poincare_constant(problem.A, problem.mask, problem.grid, operator=op)
        alpha, beta = lax_milgram_constants(
            problem.A, problem.mask, problem.grid, operator=op, poincare_C=C
        )
    else:
        C, alpha, beta = float("nan"), 1.0, float("nan")
    return SolveReport(iterations=iters, relative_residual=rel,
                       alpha_est=alpha, beta_est=beta, poincare_C=C)


def smallest_ritz_value(op: StiffnessOperator) -> float:
    M = diags(op.mass_diag())
    try:
        lam = eigsh(op.K, k=1, M=M, sigma=0.0, which="LM",
                    return_eigenvectors=False)
        return float(lam[0])
    except RuntimeError:
        lam = eigsh(op.K, k=1, M=M, which="SA", return_eigenvectors=False,
                    maxiter=5000, tol=1e-10)
        return float(lam[0])


def weak_residual(u: np.ndarray, problem: WeakProblem, test_set=None,
                  operator_and_load=None) -> float:
    """max over test fields phi of |B[u, phi] + (f, phi)| / ||phi||_W.

    The default test set consists of a fan of interior hat functions plus
    a few smooth products that vanish on the boundary.
    """
    op, b = operator_and_load if operator_and_load is not None else assemble(problem)
    if test_set is None:
        test_set = _default_test_set(op)
    ui = op.restrict(u)
    Ku_minus_b = op.K @ ui - b
    Mw = op.mass_diag()
    worst = 0.0
    for phi_full in test_set:
        phi = op.restrict(phi_full)
        num = abs(float(phi @ Ku_minus_b))
        den = float(np.sqrt(phi @ (op.K @ phi) + np.sum(Mw * phi * phi)))
        if den == 0.0:
            continue
        worst = max(worst, num / den)
    return worst


def _default_test_set(op: StiffnessOperator, hats: int = 12):
    n = op.grid.n
    rng = np.random.default_rng(20240817)
    picks = rng.choice(op.n_unknowns, size=min(hats, op.n_unknowns), replace=False)
    out = []
    for p in picks:
        e = np.zeros(op.n_unknowns)
        e[p] = 1.0
        out.append(op.extend(e))
    X, Y = op.grid.mesh()
    g = op.grid
    sx = (X - g.xmin) * (g.xmax - X)
    sy = (Y - g.ymin) * (g.ymax - Y)
    bubble = sx * sy / ((g.xmax - g.xmin) / 2.0) ** 4
    out.append(np.where(op.mask.interior, bubble, 0.0))
    out.append(np.where(op.mask.interior, bubble * X, 0.0))
    return out


def poincare_constant(A: MatrixField, mask: DomainMask, grid: Grid,
                      operator: StiffnessOperator | None = None,
                      tol: float = 1e-12) -> float:
    """C with integral u^2 dmu <= C integral |grad_A u|^2 dmu on the unknowns.

    C = 1 / lambda_min(K, M) via shift-invert (inverse-iteration) eigsh with
    the lumped mass from the same measure.
    """
    if operator is None:
        problem = WeakProblem(A=A, f=lambda x, y: np.zeros_like(x), grid=grid, mask=mask)
        operator, _ = assemble(problem)
    lam = smallest_ritz_value(operator)
    if lam <= tol:
        raise DegenerateInequalityError(
            f"discrete 2-2 inequality fails: lambda_min = {lam:.3e}"
        )
    return 1.0 / lam


def lax_milgram_constants(A: MatrixField, mask: DomainMask, grid: Grid,
                          operator: StiffnessOperator | None = None,
                          poincare_C: float | None = None,
                          n_checks: int = 50, seed: int = 7,
                          tol: float = 1e-8):
    """(alpha, beta) = (1, min(1/2C, 1/2)), verified on random discrete fields.

    Uses the assembly-consistent norms ||u||^2 = u'Mu + u'Ku, under which
    the coercivity chain holds exactly up to eigenvalue accuracy; a failure
    indicates a discretization mismatch and raises.
    """
    if operator is None:
        problem = WeakProblem(A=A, f=lambda x, y: np.zeros_like(x), grid=grid, mask=mask)
        operator, _ = assemble(problem)
    C = poincare_C if poincare_C is not None else poincare_constant(A, mask, grid, operator)
    alpha = 1.0
    beta = min(1.0 / (2.0 * C), 0.5)
    K = operator.K
    Mw = operator.mass_diag()
    rng = np.random.default_rng(seed)
    for _ in range(n_checks):
        u = rng.standard_normal(operator.n_unknowns)
        v = rng.standard_normal(operator.n_unknowns)
        Ku = K @ u
        buu = float(u @ Ku)
        nu2 = float(np.sum(Mw * u * u)) + buu
        if buu < beta * nu2 - tol * max(1.0, nu2):
            raise InconsistencyError(
                f"coercivity check failed: B[u,u]={buu:.6e} < beta*||u||^2={beta * nu2:.6e}"
            )
        bvv = float(v @ (K @ v))
        nv2 = float(np.sum(Mw * v * v)) + bvv
        buv = abs(float(v @ Ku))
        if buv > alpha * np.sqrt(nu2 * nv2) + tol * max(1.0, buv):
            raise InconsistencyError("boundedness check failed on a random pair")
    return alpha, beta


def load_from_config(spec: dict):
    """Right-hand side f from a config mapping."""
    kind = spec.get("kind")
    if kind == "constant":
        v = float(spec["value"])
        return lambda x, y: np.full_like(np.asarray(x, dtype=float), v)
    if kind == "radial_log":
        alpha = float(spec["alpha"])

        def f(x, y):
            r = np.hypot(x, y)
            r = np.maximum(r, 1e-9)
            logterm = np.log(1.0 / np.minimum(r, 0.999999))
            return (1.0 / r**2) * alpha * (alpha - 1.0) * logterm ** (alpha - 2.0)

        return f
    if kind == "custom":
        data = np.loadtxt(spec["path"], delimiter=",", ndmin=2)

        def f(x, y):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            out = np.zeros(np.broadcast(x, y).shape)
            flat = out.ravel()
            xf = np.broadcast_to(x, out.shape).ravel()
            yf = np.broadcast_to(y, out.shape).ravel()
            for k in range(flat.size):
                d2 = (data[:, 0] - xf[k]) ** 2 + (data[:, 1] - yf[k]) ** 2
                flat[k] = data[int(np.argmin(d2)), 2]
            return flat.reshape(out.shape)

        return f
    raise ConfigError(f"unknown load kind {spec.get('kind')!r}")
