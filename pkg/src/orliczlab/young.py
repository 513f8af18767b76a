"""Young functions, convex conjugates, and Luxembourg / dual Orlicz norms.

All evaluators are vectorized over numpy arrays and use extended-real
arithmetic: a value of +inf is a legitimate output (conjugates of
linear-growth Young functions are indicator-like), and any integral with
an infinite summand is infinite.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BracketExhaustedError,
    ConfigError,
    NormInfiniteError,
    SandwichViolationError,
)

__all__ = [
    "YoungFunction",
    "BumpFamilyParams",
    "NormalizedMeasure",
    "NormResult",
    "power_young",
    "bump_phi",
    "compose_square",
    "tabulated_young",
    "young_from_config",
    "conjugate",
    "luxembourg_norm",
    "orlicz_norm_dual",
    "holder_defect",
    "inverse_young",
    "square_composition_check",
    "scale_embedding_check",
    "check_young_axioms",
]

# Default scan used by the numerical conjugate.  The upper cap keeps
# t*(ln t)^N style values inside double range; gains that are still
# climbing at the cap are reported as +inf.
_T_CAP = 1e250
_DEFAULT_T_SCAN = np.concatenate([[0.0], np.logspace(-12.0, np.log10(_T_CAP), 760)])


@dataclass
class YoungFunction:
    """A Young function theta on [0, inf), evaluated at |t| for negative input.

    ``fn`` maps a nonnegative float array to nonnegative extended reals.
    ``domain_sup`` is the first t with theta(t) = inf (or inf if none).
    ``strict_above_identity`` is a documented precondition flag used by
    some callers (theta(t) > t for t > 0); it is not enforced here.
    """

    fn: object
    name: str = "young"
    domain_sup: float = np.inf
    branch_info: str | None = None
    analytic_conjugate: "YoungFunction | None" = None
    strict_above_identity: bool | None = None
    _conj_cache: "YoungFunction | None" = field(default=None, repr=False)

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            out = self.fn(t)
        return out

    def conjugate_fn(self) -> "YoungFunction":
        """Analytic conjugate if known, otherwise a cached tabulated one."""
        if self.analytic_conjugate is not None:
            return self.analytic_conjugate
        if self._conj_cache is None:
            self._conj_cache = _tabulated_conjugate(self)
        return self._conj_cache


@dataclass(frozen=True)
class BumpFamilyParams:
    """Parameters of the t (ln t)^N bump family; E is pinned to exp(2N)."""

    N: float
    E: float

    @staticmethod
    def make(N: float) -> "BumpFamilyParams":
        if N < 1.0:
            raise ValueError(f"bump exponent must satisfy N >= 1, got {N}")
        return BumpFamilyParams(N=float(N), E=float(np.exp(2.0 * N)))


@dataclass(frozen=True)
class NormalizedMeasure:
    """Nonnegative node weights summing to one (a discrete dx/|B|)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("measure weights must be nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"measure weights sum to {total}, expected 1")

    @staticmethod
    def uniform(shape_or_mask) -> "NormalizedMeasure":
        if isinstance(shape_or_mask, np.ndarray) and shape_or_mask.dtype == bool:
            w = shape_or_mask.astype(float)
        else:
            w = np.ones(shape_or_mask, dtype=float)
        return NormalizedMeasure(w / w.sum())

    @staticmethod
    def from_weights(raw) -> "NormalizedMeasure":
        w = np.asarray(raw, dtype=float)
        return NormalizedMeasure(w / w.sum())


@dataclass(frozen=True)
class NormResult:
    """Bracketing-bisection result: value sits inside the final bracket."""

    value: float
    bracket: tuple[float, float]
    iterations: int


# ---------------------------------------------------------------------------
# constructors


def power_young(p: float) -> YoungFunction:
    """theta(t) = t^p for p >= 1, with the analytic conjugate attached."""
    if p < 1.0:
        raise ValueError(f"power exponent must be >= 1, got {p}")
    theta = YoungFunction(fn=lambda t: t**p, name=f"power({p:g})")
    if p == 1.0:
        # conjugate of |t| is the indicator of [0, 1]
        conj = YoungFunction(
            fn=lambda s: np.where(s <= 1.0, 0.0, np.inf),
            name="indicator[0,1]",
            domain_sup=1.0,
        )
    else:
        q = p / (p - 1.0)
        c = (p - 1.0) * p ** (-q)
        conj = YoungFunction(fn=lambda s: c * s**q, name=f"power_conj({p:g})")
    theta.analytic_conjugate = conj
    return theta


def bump_phi(N: float) -> YoungFunction:
    """Bump Young function: (2N)^N * t below E = exp(2N), t (ln t)^N above.

    The two branches agree at E, so the function is continuous; the slope
    jumps upward there, which preserves convexity.
    """
    params = BumpFamilyParams.make(N)
    E = params.E
    slope = (2.0 * N) ** N

    def fn(t):
        t = np.asarray(t, dtype=float)
        out = slope * t
        big = t > E
        if np.any(big):
            tb = t[big]
            out = np.array(out, dtype=float)
            out[big] = tb * np.log(tb) ** N
        return out

    return YoungFunction(
        fn=fn,
        name=f"bump({N:g})",
        branch_info=f"linear slope {slope:g} on [0, {E:g}], t(ln t)^{N:g} beyond",
    )


def compose_square(base: YoungFunction) -> YoungFunction:
    """phi(t) = base(t^2); convex since base is convex nondecreasing."""
    return YoungFunction(fn=lambda t: base(t * t), name=f"{base.name}(t^2)")


def tabulated_young(path) -> YoungFunction:
    """Load a Young function from CSV rows ``t,theta_t`` with increasing t.

    Piecewise linear between samples, extended past the last sample with
    the final slope (keeps convexity for convex data).
    """
    ts, vals = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#") or row[0].strip() == "t":
                continue
            ts.append(float(row[0]))
            vals.append(float(row[1]))
    ts = np.asarray(ts)
    vals = np.asarray(vals)
    if ts.size < 2 or np.any(np.diff(ts) <= 0):
        raise ConfigError("tabulated Young function needs strictly increasing t samples")
    if ts[0] > 0:
        ts = np.concatenate([[0.0], ts])
        vals = np.concatenate([[0.0], vals])
    if vals[0] != 0.0:
        raise ConfigError("tabulated Young function must have theta(0) = 0")
    end_slope = (vals[-1] - vals[-2]) / (ts[-1] - ts[-2])

    def fn(t):
        out = np.interp(t, ts, vals)
        tail = t > ts[-1]
        return np.where(tail, vals[-1] + end_slope * (t - ts[-1]), out)

    return YoungFunction(fn=fn, name="tabulated")


def young_from_config(spec: dict) -> YoungFunction:
    """Build a Young function from a config mapping (kind + parameters)."""
    try:
        kind = spec["kind"]
    except (TypeError, KeyError):
        raise ConfigError(f"young function spec needs a 'kind': {spec!r}")
    if kind == "power":
        return power_young(float(spec["p"]))
    if kind == "bump":
        return bump_phi(float(spec["N"]))
    if kind == "composed_square":
        return compose_square(young_from_config(spec["base"]))
    if kind == "tabulated":
        return tabulated_young(spec["path"])
    raise ConfigError(f"unknown young function kind {kind!r}")


# ---------------------------------------------------------------------------
# conjugation


def _conjugate_values(theta: YoungFunction, s, t_scan, refine: int = 70) -> np.ndarray:
    """sup_t { s t - theta(t) } per sample s, by scan plus ternary refinement.

    The gain is concave in t, so a bracket around the scan argmax can be
    narrowed by ternary search.  If the argmax sits at the scan cap the
    supremum is still climbing and is reported as +inf.
    """
    s = np.asarray(s, dtype=float).ravel()
    with np.errstate(over="ignore", invalid="ignore"):
        th = theta(t_scan)
        gains = s[:, None] * t_scan[None, :]
        gains = gains - np.where(np.isfinite(th), th, np.inf)[None, :]
        idx = np.argmax(gains, axis=1)
        best = np.maximum(gains[np.arange(s.size), idx], 0.0)
        unbounded = idx == t_scan.size - 1
        lo = t_scan[np.maximum(idx - 1, 0)]
        hi = t_scan[np.minimum(idx + 1, t_scan.size - 1)]
        for _ in range(refine):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            f1 = s * m1 - theta(m1)
            f2 = s * m2 - theta(m2)
            take = f1 < f2
            lo = np.where(take, m1, lo)
            hi = np.where(take, hi, m2)
        tm = 0.5 * (lo + hi)
        refined = s * tm - theta(tm)
        out = np.maximum(best, np.where(np.isfinite(refined), refined, -np.inf))
        out[unbounded] = np.inf
    return out


def conjugate(theta: YoungFunction, t_scan=None) -> YoungFunction:
    """Numerical convex conjugate of ``theta``.

    ``t_scan`` is the (positive, increasing) scan grid; the default covers
    [1e-12, 1e250] log-spaced, which is wide enough for near-exponential
    conjugates of the bump family.
    """
    if t_scan is None:
        t_scan = _DEFAULT_T_SCAN
    t_scan = np.asarray(t_scan, dtype=float)
    if t_scan.size == 0:
        raise ValueError("conjugate scan grid is empty")
    if t_scan[0] > 0.0:
        t_scan = np.concatenate([[0.0], t_scan])

    def fn(s):
        shape = np.shape(s)
        vals = _conjugate_values(theta, s, t_scan)
        return vals.reshape(shape) if shape else float(vals[0])

    return YoungFunction(fn=fn, name=f"conj({theta.name})")


def _tabulated_conjugate(theta: YoungFunction, s_lo=1e-8, s_hi=1e6, size=2400) -> YoungFunction:
    """Conjugate sampled on a log grid once, then interpolated.

    Linear interpolation of a convex function overestimates between knots,
    which keeps Fenchel-Young and the Hoelder bound on the safe side.
    Arguments beyond the table report +inf (extended-real saturation).
    """
    knots = np.concatenate([[0.0], np.logspace(np.log10(s_lo), np.log10(s_hi), size)])
    vals = _conjugate_values(theta, knots, _DEFAULT_T_SCAN)
    finite = np.isfinite(vals)
    if not finite.all():
        stop = int(np.argmin(finite))  # first infinite knot
        knots, vals = knots[:stop], vals[:stop]
    if knots.size < 2:
        raise BracketExhaustedError(f"conjugate of {theta.name} is infinite everywhere sampled")
    kmax = knots[-1]

    def fn(s):
        out = np.interp(s, knots, vals)
        return np.where(np.asarray(s) > kmax, np.inf, out)

    return YoungFunction(fn=fn, name=f"conj({theta.name})")


def inverse_young(theta: YoungFunction, s: float, tol: float = 1e-12) -> float:
    """Smallest t with theta(t) = s, by bracket growth and bisection."""
    if s < 0:
        raise ValueError("inverse requested at a negative value")
    if s == 0.0:
        return 0.0
    hi = 1.0
    grow = 0
    while not float(theta(hi)) >= s:
        hi *= 2.0
        grow += 1
        if hi > 1e300 or grow > 1100:
            raise BracketExhaustedError(
                f"{theta.name} never reaches {s} on the search bracket"
            )
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = float(theta(mid))
        if abs(val - s) <= tol * max(1.0, s):
            return mid
        if val < s:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    val = float(theta(hi))
    if abs(val - s) <= 1e-6 * max(1.0, s):
        return hi
    raise BracketExhaustedError(
        f"bisection stalled inverting {theta.name} at {s} (theta jump?)"
    )


# ---------------------------------------------------------------------------
# norms


def _masked(values, mu: NormalizedMeasure):
    v = np.asarray(values, dtype=float).ravel()
    w = np.asarray(mu.weights, dtype=float).ravel()
    if v.shape != w.shape:
        raise ValueError(f"field shape {v.shape} does not match measure {w.shape}")
    keep = w > 0
    return v[keep], w[keep]


def luxembourg_norm(values, theta: YoungFunction, mu: NormalizedMeasure,
                    tol: float = 1e-12) -> NormResult:
    """inf{ k > 0 : integral theta(|f|/k) dmu <= 1 } by bracketing bisection.

    The modular is nonincreasing in k, so the root bracket is unique when
    finite.  Tolerance is the bracket width relative to max(1, scale).
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    v, w = _masked(values, mu)
    v = np.abs(v)
    vmax = float(v.max()) if v.size else 0.0
    if vmax == 0.0:
        return NormResult(0.0, (0.0, 0.0), 0)

    def modular(k):
        with np.errstate(over="ignore", invalid="ignore"):
            terms = w * theta(v / k)
        return float(np.sum(terms))

    iterations = 0
    hi = vmax
    while modular(hi) > 1.0:
        hi *= 2.0
        iterations += 1
        if iterations > 600:
            raise NormInfiniteError(f"no finite Luxembourg bracket under {theta.name}")
    lo = 0.5 * hi
    while modular(lo) <= 1.0:
        hi = lo
        lo *= 0.5
        iterations += 1
        if lo < vmax * 1e-18:
            # modular stays <= 1 arbitrarily close to zero: degenerate theta
            return NormResult(lo, (0.0, lo), iterations)
    scale = max(1.0, hi)
    while hi - lo > tol * scale and iterations < 500:
        mid = 0.5 * (lo + hi)
        if modular(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
        iterations += 1
    return NormResult(0.5 * (lo + hi), (lo, hi), iterations)


def _saturate_scale(shape, conj_theta, w, target=1.0):
    """Largest lam with integral conj(lam*shape) dmu <= target, by bisection."""
    smax = float(np.max(np.abs(shape))) if shape.size else 0.0
    if smax == 0.0:
        return 0.0

    def modular(lam):
        with np.errstate(over="ignore", invalid="ignore"):
            return float(np.sum(w * conj_theta(lam * shape)))

    lam = 1.0 / smax
    steps = 0
    while modular(lam) > target:
        lam *= 0.5
        steps += 1
        if steps > 200:
            return 0.0
    hi = lam
    while modular(hi * 2.0) <= target and steps < 400:
        hi *= 2.0
        steps += 1
    lo, up = hi, hi * 2.0
    for _ in range(90):
        mid = 0.5 * (lo + up)
        if modular(mid) <= target:
            lo = mid
        else:
            up = mid
    return lo


def _young_derivative(theta, t):
    d = 1e-6 * (1.0 + np.abs(t))
    upper = theta(t + d)
    lower = theta(np.maximum(t - d, 0.0))
    span = d + np.minimum(d, t)
    with np.errstate(invalid="ignore"):
        out = (upper - lower) / span
    return np.where(np.isfinite(out), out, 0.0)


def orlicz_norm_dual(values, theta: YoungFunction, mu: NormalizedMeasure,
                     conj: YoungFunction | None = None,
                     check_tol: float = 1e-8) -> float:
    """Dual Orlicz norm sup{ integral f g : integral conj(g) <= 1 }, from below.

    The supremum is approximated over a parametric family
    g = lam * sign(f) * h(|f|) with shapes h in {1, |f|, |f|^2, theta'(|f|/k)},
    each rescaled to saturate the conjugate modular.  The derivative shape is
    the Fenchel equality candidate, which certifies the lower half of the
    sandwich [||f||, 2||f||]; a violation of the sandwich raises.
    """
    v, w = _masked(values, mu)
    av = np.abs(v)
    if av.size == 0 or float(av.max()) == 0.0:
        return 0.0
    lux = luxembourg_norm(values, theta, mu).value
    if lux == 0.0:
        return 0.0
    conj_theta = conj if conj is not None else theta.conjugate_fn()

    best = 0.0
    # Fenchel-equality candidate g = theta'(|f|/k): its pairing equals
    # k (modular + conj modular), so after a 1/max(1, m) rescale it always
    # reaches the Luxembourg norm.  The conjugate modular is evaluated with
    # the exact scan (not the interpolation table) to keep that certificate
    # tight to rounding.
    gstar = _young_derivative(theta, av / lux)
    if theta.analytic_conjugate is not None:
        precise = theta.analytic_conjugate
    else:
        precise = conjugate(theta)
    with np.errstate(over="ignore", invalid="ignore"):
        m_star = float(np.sum(w * precise(gstar)))
    if np.isfinite(m_star):
        scale = 1.0 / max(1.0, m_star)
        best = max(best, scale * float(np.sum(w * av * gstar)))

    shapes = [np.ones_like(av), av, av * av, np.sqrt(av), gstar]
    for shape in shapes:
        lam = _saturate_scale(shape, conj_theta, w)
        if lam <= 0.0:
            continue
        best = max(best, float(np.sum(w * av * (lam * shape))))

    slack = check_tol * (1.0 + lux)
    if best < lux - slack or best > 2.0 * lux + slack:
        raise SandwichViolationError(
            f"dual norm {best} escapes [{lux}, {2 * lux}] for {theta.name}"
        )
    return best


def holder_defect(f, g, theta: YoungFunction, mu: NormalizedMeasure,
                  conj: YoungFunction | None = None) -> float:
    """2 ||f||_theta ||g||_conj - integral |f g| dmu  (never below -tol)."""
    conj_theta = conj if conj is not None else theta.conjugate_fn()
    nf = luxembourg_norm(f, theta, mu).value
    ng = luxembourg_norm(g, conj_theta, mu).value
    if not (np.isfinite(nf) and np.isfinite(ng)):
        raise NormInfiniteError("Hoelder defect undefined for infinite norms")
    vf, w = _masked(f, mu)
    vg, _ = _masked(g, mu)
    cross = float(np.sum(w * np.abs(vf * vg)))
    return 2.0 * nf * ng - cross


def square_composition_check(u, Phi: YoungFunction, mu: NormalizedMeasure):
    """(||u^2||_Phi, ||u||_phi^2, 4||u^2||_Phi) for phi(t) = Phi(t^2)."""
    u = np.asarray(u, dtype=float)
    phi = compose_square(Phi)
    a = luxembourg_norm(u * u, Phi, mu).value
    b = luxembourg_norm(u, phi, mu).value ** 2
    if not (np.isfinite(a) and np.isfinite(b)):
        raise NormInfiniteError("square-composition check needs finite norms")
    return a, b, 4.0 * a


def scale_embedding_check(f, theta1: YoungFunction, theta2: YoungFunction,
                          mu: NormalizedMeasure, tol: float = 1e-9) -> float:
    """||f||_theta2 - ||f||_theta1, after verifying domination on samples.

    Domination theta1 <= theta2 is checked at the realized integrand
    arguments |f|/||f||_theta2, which is exactly where it is needed for the
    norm comparison on a normalized measure.
    """
    n2 = luxembourg_norm(f, theta2, mu)
    if n2.value > 0.0:
        v, _ = _masked(f, mu)
        targs = np.abs(v) / n2.value
        t1, t2 = theta1(targs), theta2(targs)
        bad = t1 > t2 + 1e-12 * (1.0 + np.abs(t2))
        if np.any(bad & np.isfinite(t2)):
            k = int(np.argmax(np.where(np.isfinite(t2), t1 - t2, -np.inf)))
            raise ValueError(
                f"domination fails at t={targs[k]:.6g}: "
                f"{theta1.name}={t1[k]:.6g} > {theta2.name}={t2[k]:.6g}"
            )
    n1 = luxembourg_norm(f, theta1, mu)
    return n2.value - n1.value


# ---------------------------------------------------------------------------
# axioms


def check_young_axioms(theta: YoungFunction, t_samples=None, tol: float = 1e-9) -> None:
    """Raise if sampled monotonicity/midpoint-convexity/evenness fail."""
    if t_samples is None:
        t_samples = np.concatenate([[0.0], np.logspace(-6, 3, 200)])
    t = np.asarray(t_samples, dtype=float)
    vals = theta(t)
    if float(theta(0.0)) != 0.0:
        raise ValueError(f"{theta.name}(0) != 0")
    finite = np.isfinite(vals)
    v = vals[finite]
    if np.any(np.diff(v) < -tol * (1.0 + np.abs(v[:-1]))):
        raise ValueError(f"{theta.name} is not nondecreasing on samples")
    a, b = t[:-2], t[2:]
    mid = theta(0.5 * (a + b))
    chord = 0.5 * (theta(a) + theta(b))
    ok = ~np.isfinite(chord) | (mid <= chord + tol * (1.0 + np.abs(chord)))
    if not np.all(ok):
        raise ValueError(f"{theta.name} fails midpoint convexity on samples")
    neg = theta(-t[finite])
    if np.any(np.abs(neg - v) > tol * (1.0 + np.abs(v))):
        raise ValueError(f"{theta.name} is not even")
