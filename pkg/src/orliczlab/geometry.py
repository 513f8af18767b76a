"""Grids, masked domains, matrix fields, A-gradients, and subunit metrics.

Fields are full (n, n) float arrays indexed [i, j] -> (x_i, y_j); a
DomainMask says which nodes belong to the domain.  The subunit metric is
approximated by shortest paths on a lattice graph whose edge set contains
all primitive integer directions up to a stencil order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .errors import ConfigError, NotPSDError, StencilError
from .young import NormalizedMeasure

__all__ = [
    "Grid",
    "DomainMask",
    "MatrixField",
    "FactorField",
    "factor_matrix_field",
    "a_gradient",
    "w12a_norm",
    "subunit_graph",
    "subunit_distance",
    "subunit_ball",
    "matrix_field_from_config",
    "profile_from_config",
]


@dataclass(frozen=True)
class Grid:
    """Uniform square-aspect node grid with n nodes per side."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 nodes per side")
        if abs((self.xmax - self.xmin) - (self.ymax - self.ymin)) > 1e-12:
            raise ValueError("grid must be square-aspect")

    @property
    def h(self) -> float:
        return (self.xmax - self.xmin) / (self.n - 1)

    def xs(self) -> np.ndarray:
        return np.linspace(self.xmin, self.xmax, self.n)

    def ys(self) -> np.ndarray:
        return np.linspace(self.ymin, self.ymax, self.n)

    def mesh(self):
        return np.meshgrid(self.xs(), self.ys(), indexing="ij")

    @staticmethod
    def square(side: float, n: int, center=(0.0, 0.0)) -> "Grid":
        cx, cy = center
        r = side / 2.0
        return Grid(cx - r, cx + r, cy - r, cy + r, n)

    @staticmethod
    def disk_bounding(radius: float, n: int, center=(0.0, 0.0)) -> "Grid":
        return Grid.square(2.0 * radius, n, center)


@dataclass
class DomainMask:
    """Node classification for a domain on a grid.

    ``inside`` marks nodes carrying field values.  ``dirichlet`` marks the
    zero-trace ring: for polygonal (grid-aligned) domains it lies inside,
    for level-set domains it is the first ring outside, with the actual
    zero condition applied at the level-set crossing on each edge.
    ``levelset``(x, y) < 0 defines the open domain when present.
    """

    inside: np.ndarray
    dirichlet: np.ndarray
    levelset: object | None = None

    @property
    def interior(self) -> np.ndarray:
        return self.inside & ~self.dirichlet

    def require_nonempty(self):
        if not np.any(self.interior):
            raise ValueError("domain mask has no interior nodes")

    @staticmethod
    def square(grid: Grid) -> "DomainMask":
        inside = np.ones((grid.n, grid.n), dtype=bool)
        dirichlet = np.zeros_like(inside)
        dirichlet[0, :] = dirichlet[-1, :] = True
        dirichlet[:, 0] = dirichlet[:, -1] = True
        return DomainMask(inside, dirichlet)

    @staticmethod
    def from_levelset(grid: Grid, phi) -> "DomainMask":
        X, Y = grid.mesh()
        inside = phi(X, Y) < 0.0
        ring = _neighbors_any(inside) & ~inside
        return DomainMask(inside, ring, levelset=phi)

    @staticmethod
    def disk(grid: Grid, radius: float, center=(0.0, 0.0)) -> "DomainMask":
        cx, cy = center

        def phi(x, y):
            return (x - cx) ** 2 + (y - cy) ** 2 - radius**2

        return DomainMask.from_levelset(grid, phi)

    @staticmethod
    def from_inside(inside: np.ndarray) -> "DomainMask":
        ring = _neighbors_any(inside) & ~inside
        return DomainMask(inside.copy(), ring)


def _neighbors_any(mask: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mask)
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out


@dataclass(frozen=True)
class MatrixField:
    """x -> symmetric 2x2 matrix, given by vectorized component functions."""

    a11: object
    a12: object
    a22: object
    name: str = "matrix"

    def components(self, X, Y):
        shape = np.broadcast(np.asarray(X), np.asarray(Y)).shape
        out = []
        for f in (self.a11, self.a12, self.a22):
            v = np.asarray(f(X, Y), dtype=float)
            out.append(np.broadcast_to(v, shape).astype(float))
        return out

    def eigmin(self, X, Y):
        a, b, c = self.components(X, Y)
        return 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b * b)

    def check_psd(self, grid: Grid, tol: float = 1e-12):
        X, Y = grid.mesh()
        emin = self.eigmin(X, Y)
        worst = float(emin.min())
        if worst < -tol:
            raise NotPSDError(f"{self.name} has eigenvalue {worst} below -{tol}")

    @staticmethod
    def identity() -> "MatrixField":
        return MatrixField(
            a11=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
            a12=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
            a22=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
            name="identity",
        )

    @staticmethod
    def scaled_identity(c: float) -> "MatrixField":
        return MatrixField(
            a11=lambda x, y: np.full_like(np.asarray(x, dtype=float), c),
            a12=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
            a22=lambda x, y: np.full_like(np.asarray(x, dtype=float), c),
            name=f"{c:g}*identity",
        )

    @staticmethod
    def diag_profile(g, name="diag_g") -> "MatrixField":
        """diag(1, g(x)^2) with the profile extended evenly, g(|x|)."""
        return MatrixField(
            a11=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
            a12=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
            a22=lambda x, y: np.asarray(g(np.abs(x)), dtype=float) ** 2,
            name=name,
        )

    @staticmethod
    def constant(a11: float, a12: float, a22: float) -> "MatrixField":
        return MatrixField(
            a11=lambda x, y: np.full_like(np.asarray(x, dtype=float), a11),
            a12=lambda x, y: np.full_like(np.asarray(x, dtype=float), a12),
            a22=lambda x, y: np.full_like(np.asarray(x, dtype=float), a22),
            name=f"const[[{a11:g},{a12:g}],[{a12:g},{a22:g}]]",
        )


@dataclass(frozen=True)
class FactorField:
    """Pointwise symmetric square root B with B^T B = A."""

    b11: object
    b12: object
    b22: object
    source: MatrixField

    def components(self, X, Y):
        shape = np.broadcast(np.asarray(X), np.asarray(Y)).shape
        return [
            np.broadcast_to(np.asarray(f(X, Y), dtype=float), shape).astype(float)
            for f in (self.b11, self.b12, self.b22)
        ]

    def apply(self, X, Y, vx, vy):
        b11, b12, b22 = self.components(X, Y)
        return b11 * vx + b12 * vy, b12 * vx + b22 * vy


def factor_matrix_field(A: MatrixField, grid: Grid | None = None,
                        tol: float = 1e-12) -> FactorField:
    """Symmetric square root of a PSD 2x2 field in closed form.

    B = (A + sqrt(det A) I) / sqrt(tr A + 2 sqrt(det A)); the formula works
    for singular A (где the denominator vanishes only for A = 0, mapped to
    B = 0).  PSD is checked on the grid when one is supplied.
    """
    if grid is not None:
        A.check_psd(grid, tol=tol)

    def parts(x, y):
        a, b, c = A.components(x, y)
        emin = 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b * b)
        if np.any(emin < -tol):
            raise NotPSDError(f"{A.name} not PSD at sampled points (min eig {emin.min()})")
        det = np.maximum(a * c - b * b, 0.0)
        s = np.sqrt(det)
        tr = a + c + 2.0 * s
        denom = np.sqrt(np.maximum(tr, 0.0))
        safe = denom > 1e-150
        inv = np.where(safe, 1.0 / np.where(safe, denom, 1.0), 0.0)
        return (a + s) * inv, b * inv, (c + s) * inv

    return FactorField(
        b11=lambda x, y: parts(x, y)[0],
        b12=lambda x, y: parts(x, y)[1],
        b22=lambda x, y: parts(x, y)[2],
        source=A,
    )


# ---------------------------------------------------------------------------
# differential operators and norms


def _masked_derivative(u: np.ndarray, inside: np.ndarray, h: float, axis: int):
    """Central differences where both neighbors are inside, one-sided at edges."""
    u = np.asarray(u, dtype=float)
    fwd = np.roll(inside, -1, axis=axis)
    bwd = np.roll(inside, 1, axis=axis)
    # roll wraps around; kill wrapped entries
    if axis == 0:
        fwd[-1, :] = False
        bwd[0, :] = False
    else:
        fwd[:, -1] = False
        bwd[:, 0] = False
    up = np.roll(u, -1, axis=axis)
    dn = np.roll(u, 1, axis=axis)
    has_f = inside & fwd
    has_b = inside & bwd
    both = has_f & has_b
    out = np.zeros_like(u)
    out[both] = (up[both] - dn[both]) / (2.0 * h)
    only_f = has_f & ~has_b
    out[only_f] = (up[only_f] - u[only_f]) / h
    only_b = has_b & ~has_f
    out[only_b] = (u[only_b] - dn[only_b]) / h
    lonely = inside & ~has_f & ~has_b
    if np.any(lonely):
        raise StencilError(f"mask too thin along axis {axis} for the gradient stencil")
    return out


def a_gradient(u: np.ndarray, factor: FactorField, grid: Grid, mask: DomainMask):
    """B(x) applied to the finite-difference gradient of u, per node."""
    inside = mask.inside
    ux = _masked_derivative(u, inside, grid.h, axis=0)
    uy = _masked_derivative(u, inside, grid.h, axis=1)
    X, Y = grid.mesh()
    gx, gy = factor.apply(X, Y, ux, uy)
    gx = np.where(inside, gx, 0.0)
    gy = np.where(inside, gy, 0.0)
    return gx, gy


def w12a_norm(u: np.ndarray, A: MatrixField, mu: NormalizedMeasure,
              grid: Grid, mask: DomainMask) -> float:
    """sqrt( integral (u^2 + |grad_A u|^2) dmu ) by nodal quadrature."""
    factor = factor_matrix_field(A)
    gx, gy = a_gradient(u, factor, grid, mask)
    w = np.asarray(mu.weights, dtype=float).reshape(u.shape)
    dens = u * u + gx * gx + gy * gy
    return float(np.sqrt(np.sum(w * dens)))


# ---------------------------------------------------------------------------
# subunit (Carnot-Caratheodory) metric


def _primitive_directions(order: int):
    dirs = []
    for p in range(-order, order + 1):
        for q in range(-order, order + 1):
            if (p, q) == (0, 0) or gcd(abs(p), abs(q)) != 1:
                continue
            dirs.append((p, q))
    return dirs


def _inverse_quadratic(A: MatrixField, X, Y, ex, ey, null_tol=1e-13):
    """e^T A(x)^+ e per sample, +inf where e leaves the range of A."""
    a, b, c = A.components(X, Y)
    rad = np.sqrt(0.25 * (a - c) ** 2 + b * b)
    lam1 = 0.5 * (a + c) + rad
    lam2 = 0.5 * (a + c) - rad
    # eigenvector for lam1: (b, lam1 - a) off-diagonal, an axis otherwise
    use_b = np.abs(b) > 1e-300
    v1x = np.where(use_b, b, np.where(a >= c, 1.0, 0.0))
    v1y = np.where(use_b, lam1 - a, np.where(a >= c, 0.0, 1.0))
    norm1 = np.sqrt(v1x * v1x + v1y * v1y)
    v1x, v1y = v1x / norm1, v1y / norm1
    v2x, v2y = -v1y, v1x
    c1 = ex * v1x + ey * v1y
    c2 = ex * v2x + ey * v2y
    scale = np.maximum(lam1, 1.0)
    out = np.zeros_like(a)
    for lam, comp in ((lam1, c1), (lam2, c2)):
        dead = lam <= null_tol * scale
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(dead, np.where(np.abs(comp) > 1e-12, np.inf, 0.0),
                            comp * comp / np.where(dead, 1.0, lam))
        out = out + term
    return out


def subunit_graph(A: MatrixField, grid: Grid, mask: DomainMask | None = None,
                  stencil: int = 4, samples: int = 3):
    """Sparse traversal-time graph over inside nodes.

    Edge (p, q) carries the subunit traversal time of the straight segment,
    integrated with a composite midpoint rule: sum over `samples` points of
    (L / samples) * sqrt(e^T A(x)^+ e).  The pseudo-inverse form makes
    directions outside range(A) unreachable, matching the subunit
    constraint (gamma' . xi)^2 <= xi^T A xi for every xi.
    """
    n = grid.n
    inside = mask.inside if mask is not None else np.ones((n, n), dtype=bool)
    X, Y = grid.mesh()
    h = grid.h
    rows, cols, costs = [], [], []
    idx = np.arange(n * n).reshape(n, n)
    for p, q in _primitive_directions(stencil):
        if max(abs(p), abs(q)) > stencil:
            continue
        # source block where both endpoints live on the grid
        si = slice(max(0, -p), n - max(0, p))
        sj = slice(max(0, -q), n - max(0, q))
        ti = slice(max(0, p), n + min(0, p))
        tj = slice(max(0, q), n + min(0, q))
        ok = inside[si, sj] & inside[ti, tj]
        if not np.any(ok):
            continue
        x0, y0 = X[si, sj][ok], Y[si, sj][ok]
        L = h * float(np.hypot(p, q))
        ex, ey = p / np.hypot(p, q), q / np.hypot(p, q)
        cost = np.zeros_like(x0)
        reachable = np.ones(x0.shape, dtype=bool)
        for k in range(samples):
            t = (2 * k + 1) / (2 * samples)
            xs = x0 + t * p * h
            ys = y0 + t * q * h
            if max(abs(p), abs(q)) > 1:
                # long edges must not tunnel through masked-out nodes
                ii = np.clip(np.rint((xs - grid.xmin) / h).astype(int), 0, n - 1)
                jj = np.clip(np.rint((ys - grid.ymin) / h).astype(int), 0, n - 1)
                reachable &= inside[ii, jj]
            q2 = _inverse_quadratic(A, xs, ys, ex, ey)
            with np.errstate(invalid="ignore"):
                cost += (L / samples) * np.sqrt(q2)
        good = reachable & np.isfinite(cost)
        if not np.any(good):
            continue
        rows.append(idx[si, sj][ok][good])
        cols.append(idx[ti, tj][ok][good])
        costs.append(cost[good])
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        costs = np.concatenate(costs)
    graph = coo_matrix((costs, (rows, cols)), shape=(n * n, n * n)).tocsr()
    return graph


def _node_of(grid: Grid, point) -> tuple[int, int]:
    x, y = point
    i = int(round((x - grid.xmin) / grid.h))
    j = int(round((y - grid.ymin) / grid.h))
    if not (0 <= i < grid.n and 0 <= j < grid.n):
        raise ValueError(f"point {point} is outside the grid")
    return i, j


def subunit_distance(A: MatrixField, x, y, grid: Grid,
                     mask: DomainMask | None = None,
                     stencil: int = 4, samples: int = 3,
                     graph=None) -> float:
    """Graph approximation of the subunit distance between two points.

    Returns inf when the target is unreachable (degenerate directions).
    Converges to the metric from above under grid refinement.
    """
    inside = mask.inside if mask is not None else np.ones((grid.n, grid.n), bool)
    i0, j0 = _node_of(grid, x)
    i1, j1 = _node_of(grid, y)
    if not (inside[i0, j0] and inside[i1, j1]):
        raise ValueError("subunit distance endpoints must lie in the domain mask")
    if graph is None:
        graph = subunit_graph(A, grid, mask, stencil=stencil, samples=samples)
    src = i0 * grid.n + j0
    dist = _csgraph_dijkstra(graph, directed=True, indices=src)
    return float(dist[i1 * grid.n + j1])


def subunit_ball(A: MatrixField, x0, r: float, grid: Grid,
                 mask: DomainMask | None = None,
                 stencil: int = 4, samples: int = 3,
                 graph=None) -> DomainMask:
    """Mask of nodes at subunit distance strictly less than r from x0."""
    if r < 0:
        raise ValueError("ball radius must be nonnegative")
    inside = mask.inside if mask is not None else np.ones((grid.n, grid.n), bool)
    i0, j0 = _node_of(grid, x0)
    if not inside[i0, j0]:
        raise ValueError("ball center must lie in the domain mask")
    if graph is None:
        graph = subunit_graph(A, grid, mask, stencil=stencil, samples=samples)
    dist = _csgraph_dijkstra(graph, directed=True, indices=i0 * grid.n + j0)
    ball = (dist.reshape(grid.n, grid.n) < r) & inside
    return DomainMask.from_inside(ball)


# ---------------------------------------------------------------------------
# profiles and config


def profile_from_config(spec: dict):
    """Scalar degeneracy profile g(x) for diag(1, g^2) operators."""
    kind = spec.get("kind")
    if kind == "power":
        m = float(spec["m"])
        return lambda x: np.asarray(x, dtype=float) ** m
    if kind == "exp_alpha":
        alpha = float(spec["alpha"])

        def g(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            pos = x > 0
            xp = x[pos]
            with np.errstate(over="ignore", divide="ignore"):
                damp = np.exp(-xp ** (-alpha))
            out[pos] = damp * ((alpha + 1.0) * xp**alpha + alpha)
            return out

        return g
    if kind == "custom":
        data = np.loadtxt(spec["path"], delimiter=",", ndmin=2)
        xs, gs = data[:, 0], data[:, 1]
        if np.any(np.diff(xs) <= 0):
            raise ConfigError("custom profile needs strictly increasing x samples")
        return lambda x: np.interp(np.asarray(x, dtype=float), xs, gs)
    raise ConfigError(f"unknown profile kind {spec.get('kind')!r}")


def matrix_field_from_config(spec: dict) -> MatrixField:
    kind = spec.get("kind")
    if kind == "identity":
        return MatrixField.identity()
    if kind == "diag_g":
        g = profile_from_config(spec["profile"])
        return MatrixField.diag_profile(g, name=f"diag_g[{spec['profile'].get('kind')}]")
    raise ConfigError(f"unknown operator kind {spec.get('kind')!r}")
