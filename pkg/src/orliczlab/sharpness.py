"""Explicit unbounded-solution constructions and their integrability
threshold studies.

Three families: a radial log-power solution for the Laplacian, and two
degenerate diag(1, g(x)^2) constructions built from a plateau cutoff and a
vanishing profile (finite power order, or flat to all orders).  Threshold
integrals are evaluated in substituted variables (s = ln(1/x) or
s = x^(-alpha)) so the near-singular tails never overflow, and convergence
verdicts come from cutoff-refinement studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import SingularPointError

__all__ = [
    "CutoffChi",
    "VanishingProfile",
    "ConvergenceStudy",
    "build_chi",
    "degenerate_u_and_f",
    "laplacian_example",
    "finite_vanishing_report",
    "infinite_vanishing_report",
    "membership_report_w12a",
    "MembershipReport",
]

_EXP_CAP = 700.0  # exp argument cap: the substitution contract keeps real
                  # integrands representable; the cap only guards divergent sweeps

_REL_CONVERGED = 1e-2   # relative change across the last two halvings
_REL_DIVERGED = 1e-1    # growth per halving declaring divergence
_BLOWUP = 1e30


# ---------------------------------------------------------------------------
# cutoff and profiles


def _smoothstep_coeffs(degree: int):
    if degree == 3:
        return np.array([0.0, 0.0, 3.0, -2.0])
    if degree == 5:
        return np.array([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])
    if degree == 7:
        return np.array([0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0])
    raise ValueError(f"unsupported transition degree {degree} (use 3, 5, or 7)")


@dataclass(frozen=True)
class CutoffChi:
    """Even plateau cutoff: 1 on [-1, 1], 0 outside [-2, 2].

    The transition is a polynomial smoothstep of the given degree; degree 5
    (the default elsewhere) is twice continuously differentiable.  The
    plateau value 1 on [-1, 1] forces even symmetry.
    """

    degree: int = 5

    def _s(self, xi, order: int):
        c = _smoothstep_coeffs(self.degree)
        if order:
            c = np.polynomial.polynomial.polyder(c, order)
        return np.polynomial.polynomial.polyval(xi, c)

    def __call__(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        xi = np.clip(s - 1.0, 0.0, 1.0)
        return 1.0 - self._s(xi, 0)

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        xi = np.clip(a - 1.0, 0.0, 1.0)
        inner = np.where((a > 1.0) & (a < 2.0), -self._s(xi, 1), 0.0)
        return inner * np.sign(s)

    def d2(self, s):
        a = np.abs(np.asarray(s, dtype=float))
        xi = np.clip(a - 1.0, 0.0, 1.0)
        return np.where((a > 1.0) & (a < 2.0), -self._s(xi, 2), 0.0)


def build_chi(transition_degree: int = 5) -> CutoffChi:
    if transition_degree < 3:
        raise ValueError("transition degree must be at least 3")
    usable = max(d for d in (3, 5, 7) if d <= transition_degree)
    return CutoffChi(degree=usable)


@dataclass(frozen=True)
class VanishingProfile:
    """psi, g = psi', psi'' for the degeneracy profile diag(1, g^2)."""

    kind: str  # "finite" or "infinite"
    order: float  # m for finite, alpha for infinite

    def __post_init__(self):
        if self.kind == "finite" and self.order < 1.0:
            raise ValueError("finite vanishing needs m >= 1")
        if self.kind == "infinite" and self.order <= 0.0:
            raise ValueError("infinite vanishing needs alpha > 0")
        if self.kind not in ("finite", "infinite"):
            raise ValueError(f"unknown profile kind {self.kind!r}")

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "finite":
            m = self.order
            return x ** (m + 1.0) / (m + 1.0)
        a = self.order
        out = np.zeros_like(x)
        pos = x > 0
        xp = x[pos]
        with np.errstate(over="ignore", divide="ignore"):
            out[pos] = xp ** (a + 1.0) * np.exp(-(xp ** (-a)))
        return out

    def g(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "finite":
            return x**self.order
        a = self.order
        out = np.zeros_like(x)
        pos = x > 0
        xp = x[pos]
        with np.errstate(over="ignore", divide="ignore"):
            damp = np.exp(-(xp ** (-a)))
        out[pos] = damp * ((a + 1.0) * xp**a + a)
        return out

    def d2psi(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "finite":
            m = self.order
            return m * x ** (m - 1.0)
        a = self.order
        out = np.zeros_like(x)
        pos = x > 0
        xp = x[pos]
        with np.errstate(over="ignore", divide="ignore"):
            damp = np.exp(-(xp ** (-a)))
            bracket = (a * (a + 1.0) / xp + a * a * xp ** (-a - 1.0)
                       + a * (a + 1.0) * xp ** (a - 1.0))
        out[pos] = damp * bracket
        return out

    def g_over_psi(self, x):
        """psi'/psi in closed form (stable where psi itself underflows)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "finite":
            return (self.order + 1.0) / x
        a = self.order
        return (a + 1.0) / x + a * x ** (-a - 1.0)

    def d2psi_over_psi(self, x):
        """psi''/psi in closed form."""
        x = np.asarray(x, dtype=float)
        if self.kind == "finite":
            m = self.order
            return m * (m + 1.0) / (x * x)
        a = self.order
        return (a * (a + 1.0) * x ** (-a - 2.0) + a * a * x ** (-2.0 * a - 2.0)
                + a * (a + 1.0) / (x * x))


@dataclass
class ConvergenceStudy:
    """Cutoff-refinement record with a converges/diverges verdict."""

    cutoffs: np.ndarray
    integrals: np.ndarray
    slope: float
    verdict: str
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.cutoffs) >= 0):
            raise ValueError("cutoffs must be strictly decreasing")
        if self.verdict == "converges":
            with np.errstate(invalid="ignore", divide="ignore"):
                tail = (np.abs(np.diff(self.integrals[-3:]))
                        / np.abs(self.integrals[-2:]))
            if np.any(tail > _REL_CONVERGED):
                raise ValueError("converges verdict requires a settled tail")


def _classify(integrals: np.ndarray) -> str:
    vals = integrals[np.isfinite(integrals)]
    if vals.size >= 3:
        last, prev, prev2 = vals[-1], vals[-2], vals[-3]
        if last > _BLOWUP:
            return "diverges"
        r1 = abs(last - prev) / max(abs(last), 1e-300)
        r2 = abs(prev - prev2) / max(abs(prev), 1e-300)
        if r1 < _REL_CONVERGED and r2 < _REL_CONVERGED:
            return "converges"
        if last > prev * (1.0 + _REL_DIVERGED):
            return "diverges"
    if vals.size < integrals.size:  # overflow terminated the sweep
        return "diverges"
    return "indeterminate"


def _fit_slope(cutoffs, integrals, pts: int = 10) -> float:
    keep = np.isfinite(integrals) & (integrals > 0)
    x = np.log(1.0 / cutoffs[keep])[-pts:]
    y = np.log(integrals[keep])[-pts:]
    if x.size < 2:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


def _refinement_study(increment, s_of_eps, eps0: float, halvings: int,
                      expected: str | None = None) -> ConvergenceStudy:
    """Accumulate I(eps_i) over halving cutoffs via panelwise quadrature.

    ``increment(s_lo, s_hi)`` integrates the substituted integrand over one
    panel; ``s_of_eps`` maps a cutoff to the substituted variable.  The sweep
    stops early once the integral blows past the divergence guard.
    """
    cutoffs, integrals = [], []
    total = 0.0
    s_prev = s_of_eps(eps0)
    eps = eps0
    for _ in range(halvings):
        eps *= 0.5
        s_next = s_of_eps(eps)
        total += increment(s_prev, s_next)
        s_prev = s_next
        cutoffs.append(eps)
        integrals.append(total)
        if not np.isfinite(total) or total > _BLOWUP:
            break
    cutoffs = np.array(cutoffs)
    integrals = np.array(integrals)
    verdict = _classify(integrals)
    slope = _fit_slope(cutoffs, integrals)
    study = ConvergenceStudy(cutoffs=cutoffs, integrals=integrals,
                             slope=slope, verdict=verdict)
    if expected is not None:
        study.aux["expected"] = expected
        study.aux["matches_expected"] = verdict == expected
    return study


# ---------------------------------------------------------------------------
# Laplacian example


@dataclass(frozen=True)
class LaplacianExample:
    alpha: float
    q: float
    study: ConvergenceStudy
    gradient_study: ConvergenceStudy

    def u(self, x, y):
        r = np.hypot(x, y)
        if np.any(r <= 0.0):
            raise SingularPointError("radial log field is singular at the origin")
        return np.log(1.0 / r) ** self.alpha

    def f(self, x, y):
        r = np.hypot(x, y)
        if np.any(r <= 0.0):
            raise SingularPointError("radial log field is singular at the origin")
        a = self.alpha
        return (1.0 / r**2) * a * (a - 1.0) * np.log(1.0 / r) ** (a - 2.0)


def laplacian_example(alpha: float, q: float, halvings: int = 96,
                      eps0: float = 0.25) -> LaplacianExample:
    """Radial (ln 1/r)^alpha construction on the half-unit disk.

    The load-norm integral reduces to I(eps) = int_eps^(1/2)
    (ln 1/r)^(q(alpha-2)) r^(1-2q) dr, integrated here in s = ln(1/r); the
    gradient-square integral reduces to int s^(2 alpha - 2) ds and always
    converges for alpha < 1/2.
    """
    if not (0.0 < alpha < 0.5):
        raise ValueError("alpha must lie in (0, 1/2)")
    if q <= 0.0:
        raise ValueError("q must be positive")

    pow_log = q * (alpha - 2.0)
    rate = 2.0 * q - 2.0

    def inc(s_lo, s_hi):
        val, _ = quad(
            lambda s: s**pow_log * np.exp(min(rate * s, _EXP_CAP)),
            s_lo, s_hi, limit=200,
        )
        return val

    expected = "converges" if (q < 1.0 or (q == 1.0 and alpha < 1.0)) else "diverges"
    study = _refinement_study(inc, lambda e: np.log(1.0 / e), eps0, halvings,
                              expected=expected)
    study.aux["analytic_slope"] = max(rate, 0.0)

    def ginc(s_lo, s_hi):
        val, _ = quad(lambda s: s ** (2.0 * alpha - 2.0), s_lo, s_hi, limit=200)
        return val

    gstudy = _refinement_study(ginc, lambda e: np.log(1.0 / e), eps0,
                               min(halvings, 64), expected="converges")
    return LaplacianExample(alpha=alpha, q=q, study=study, gradient_study=gstudy)


# ---------------------------------------------------------------------------
# degenerate constructions


@dataclass(frozen=True)
class DegenerateFields:
    """Closed-form evaluators for u = chi(y/psi) ln(1/x) and f = L u.

    All x-derivative expressions are assembled from the scaled variable
    t = y/psi and the stable ratios psi'/psi, psi''/psi, so the flat
    profile evaluates cleanly even where psi itself underflows.
    """

    profile: VanishingProfile
    chi: CutoffChi

    def _pieces(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(x <= 0.0):
            raise SingularPointError("degenerate construction evaluated at x <= 0")
        psi = self.profile.psi(x)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t = np.where(psi > 0.0, y / np.where(psi > 0.0, psi, 1.0),
                         np.where(np.asarray(y, dtype=float) == 0.0, 0.0, np.inf))
        L = np.log(1.0 / x)
        return x, y, psi, t, L

    def support(self, x, y):
        _, _, psi, t, _ = self._pieces(x, y)
        return np.abs(t) <= 2.0

    def u(self, x, y):
        _, _, _, t, L = self._pieces(x, y)
        return self.chi(t) * L

    def u_y(self, x, y):
        _, _, psi, t, L = self._pieces(x, y)
        d1 = self.chi.d1(t)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = d1 / np.maximum(psi, 1e-300) * L
        return np.where(d1 != 0.0, val, 0.0)

    def u_yy(self, x, y):
        _, _, psi, t, L = self._pieces(x, y)
        d2 = self.chi.d2(t)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = d2 / np.maximum(psi, 1e-300) ** 2 * L
        return np.where(d2 != 0.0, val, 0.0)

    def u_x(self, x, y):
        x, y, psi, t, L = self._pieces(x, y)
        rho = self.profile.g_over_psi(x)  # psi'/psi
        inside = np.abs(t) <= 2.0
        term1 = self.chi.d1(t) * (-t * rho) * L
        term2 = -self.chi(t) / x
        return np.where(inside, term1 + term2, 0.0)

    def u_xx(self, x, y):
        x, y, psi, t, L = self._pieces(x, y)
        rho = self.profile.g_over_psi(x)
        rho2 = self.profile.d2psi_over_psi(x)
        inside = np.abs(t) <= 2.0
        c1 = self.chi.d2(t) * (t * rho) ** 2 * L
        c2 = self.chi.d1(t) * (2.0 * t * rho**2 - t * rho2) * L
        c3 = (2.0 / x) * self.chi.d1(t) * (t * rho)
        c4 = self.chi(t) / x**2
        return np.where(inside, c1 + c2 + c3 + c4, 0.0)

    def g_uy(self, x, y):
        """g * u_y, the degenerate gradient component, in ratio form."""
        x, y, psi, t, L = self._pieces(x, y)
        rho = self.profile.g_over_psi(x)
        return np.where(np.abs(t) <= 2.0, self.chi.d1(t) * rho * L, 0.0)

    def f(self, x, y):
        """u_xx + g^2 u_yy with the second term as chi'' (psi'/psi)^2 L."""
        x_, y_, psi, t, L = self._pieces(x, y)
        rho = self.profile.g_over_psi(x_)
        deg = self.chi.d2(t) * rho**2 * L
        return self.u_xx(x_, y_) + np.where(np.abs(t) <= 2.0, deg, 0.0)

    def fiber_mean_abs_f(self, x, t_nodes: int = 400):
        """Mean of |f| in y over the support fiber |y| <= 2 psi(x)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        ts = np.linspace(0.0, 2.0, t_nodes + 1)[1:]
        for k, xv in enumerate(x.ravel()):
            psi = float(self.profile.psi(np.array([xv]))[0])
            if psi <= 0.0:
                continue
            ys = ts * psi
            vals = np.abs(self.f(np.full_like(ys, xv), ys))
            out.ravel()[k] = float(vals.mean())
        return out

    def reduced_f_scale(self, x):
        """Magnitude scale 1/x^2 + L |psi''/psi| + L (psi'/psi)^2 + (1/x)(psi'/psi)."""
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0):
            raise SingularPointError("reduced estimate needs x > 0")
        rho = self.profile.g_over_psi(x)
        rho2 = self.profile.d2psi_over_psi(x)
        L = np.log(1.0 / x)
        return 1.0 / x**2 + L * np.abs(rho2) + L * rho**2 + (1.0 / x) * rho


def degenerate_u_and_f(profile: VanishingProfile, chi: CutoffChi) -> DegenerateFields:
    return DegenerateFields(profile=profile, chi=chi)


def finite_vanishing_report(m: float, q: float, rho: float = 0.3,
                            halvings: int = 96) -> ConvergenceStudy:
    """Threshold study for the finite-order profile psi = x^(m+1)/(m+1).

    Main integral int_0^rho x^(m+1-2q) (ln 1/x)^q dx, convergent exactly for
    q < (m+2)/2; in s = ln(1/x) the integrand is s^q exp(-(m+2-2q)s).  The
    gradient-membership companion int x^(m-1) (ln 1/x)^2 dx is attached in
    aux and converges for every m > 0.
    """
    if m < 1.0:
        raise ValueError("finite vanishing needs m >= 1")
    decay = m + 2.0 - 2.0 * q

    def inc(s_lo, s_hi):
        val, _ = quad(lambda s: s**q * np.exp(min(-decay * s, _EXP_CAP)),
                      s_lo, s_hi, limit=200)
        return val

    expected = "converges" if q < (m + 2.0) / 2.0 else "diverges"
    study = _refinement_study(inc, lambda e: np.log(1.0 / e), rho, halvings,
                              expected=expected)
    study.aux["threshold"] = (m + 2.0) / 2.0

    def ginc(s_lo, s_hi):
        val, _ = quad(lambda s: s**2 * np.exp(-m * s), s_lo, s_hi, limit=200)
        return val

    gstudy = _refinement_study(ginc, lambda e: np.log(1.0 / e), rho,
                               min(halvings, 64), expected="converges")
    study.aux["gradient_verdict"] = gstudy.verdict
    study.aux["gradient_total"] = float(gstudy.integrals[-1])
    return study


def infinite_vanishing_report(alpha: float, M: float, rho: float = 0.3,
                              halvings: int = 48,
                              N: float | None = None) -> ConvergenceStudy:
    """Threshold study for psi = x^(alpha+1) exp(-1/x^alpha).

    Integrates theta(fhat(x)) psi(x) dx with fhat = x^-(2 alpha + 2) ln(1/x)
    and theta(s) = M s^(1 - 1/M) exp(s^(1/M)), in the substituted variable
    s = x^(-alpha); the log-space assembly of the integrand keeps the double
    exponential inside float range on convergent sweeps.  Finite exactly
    when (2 alpha + 2)/M < alpha, i.e. M > 2 + 2/alpha.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if M < 1.0:
        raise ValueError("M must be at least 1")

    pow_fhat = (2.0 * alpha + 2.0) / alpha  # fhat = s^pow_fhat * ln(s)/alpha

    def log_integrand(s):
        ln_s = np.log(s)
        ln_fhat = pow_fhat * ln_s + np.log(ln_s / alpha)
        fhat_root = np.exp(min(ln_fhat / M, _EXP_CAP))
        val = (np.log(M) + (1.0 - 1.0 / M) * ln_fhat + fhat_root
               - ((alpha + 1.0) / alpha) * ln_s - s
               - np.log(alpha) - (1.0 + 1.0 / alpha) * ln_s)
        return val

    def inc(s_lo, s_hi):
        val, _ = quad(lambda s: np.exp(min(log_integrand(s), _EXP_CAP)),
                      s_lo, s_hi, limit=200)
        return val

    threshold = 2.0 + 2.0 / alpha
    expected = "converges" if M > threshold else "diverges"
    study = _refinement_study(inc, lambda e: e ** (-alpha), rho, halvings,
                              expected=expected)
    study.aux["threshold"] = threshold
    if N is not None:
        if alpha * N >= 1.0:
            raise ValueError("the bump comparison needs alpha * N < 1")
        study.aux["bump_gap_N"] = N
        study.aux["exceeds_2_plus_2N"] = bool(M > 2.0 + 2.0 * N)
    return study


# ---------------------------------------------------------------------------
# Sobolev membership of the construction


@dataclass(frozen=True)
class MembershipReport:
    value: float
    study: ConvergenceStudy
    reduced_value: float
    ratio: float


def membership_report_w12a(profile: VanishingProfile, chi: CutoffChi,
                           rho: float = 0.3, halvings: int = 24,
                           scale: float = 1.0,
                           y_nodes: int = 48) -> MembershipReport:
    """integral (|u_x|^2 + g^2 |u_y|^2) over the support, two quadrature ways.

    Path one tensors x-panels with Gauss nodes in y over each fiber
    [-2 psi, 2 psi].  Path two integrates the fiber analytically in the
    scaled variable t = y/psi (Gauss in t once) and quadratures only in x.
    A zero amplitude short-circuits to zero.
    """
    if scale == 0.0:
        empty = ConvergenceStudy(np.array([rho / 2.0, rho / 4.0, rho / 8.0]),
                                 np.zeros(3), float("nan"), "converges")
        return MembershipReport(0.0, empty, 0.0, 1.0)

    fields = degenerate_u_and_f(profile, chi)
    tg, tw = np.polynomial.legendre.leggauss(y_nodes)

    def fiber_direct(x):
        psi = float(profile.psi(np.array([x]))[0])
        if psi <= 0.0:
            return 0.0
        half = 2.0 * psi
        ys = 0.5 * half * (tg + 1.0)  # (0, 2 psi]; even integrand doubles it
        xs = np.full_like(ys, x)
        ux = fields.u_x(xs, ys)
        guy = fields.g_uy(xs, ys)
        dens = ux * ux + guy * guy
        return 2.0 * 0.5 * half * float(np.sum(tw * dens))

    def fiber_reduced(x):
        psi = float(profile.psi(np.array([x]))[0])
        if psi <= 0.0:
            return 0.0
        g = float(profile.g(np.array([x]))[0])
        L = float(np.log(1.0 / x))
        ts = 0.5 * 2.0 * (tg + 1.0)  # t in (0, 2]
        chi_v = chi(ts)
        chi_d = chi.d1(ts)
        term_x = (chi_d * ts * (g / psi) * L + chi_v / x) ** 2
        term_y = (g / psi) ** 2 * L**2 * chi_d**2
        return 2.0 * psi * 0.5 * 2.0 * float(np.sum(tw * (term_x + term_y)))

    def make_inc(fiber):
        def inc(x_hi_neg, x_lo_neg):
            # panels carry -x so that the substituted variable increases
            val, _ = quad(fiber, -x_lo_neg, -x_hi_neg, limit=200)
            return val
        return inc

    study = _refinement_study(make_inc(fiber_direct), lambda e: -e, rho, halvings,
                              expected="converges")
    reduced_study = _refinement_study(make_inc(fiber_reduced), lambda e: -e, rho,
                                      halvings, expected="converges")
    total = float(study.integrals[-1]) * scale**2
    reduced = float(reduced_study.integrals[-1]) * scale**2
    ratio = total / reduced if reduced > 0.0 else float("nan")
    study.aux["reduced_total"] = reduced
    return MembershipReport(value=total, study=study,
                            reduced_value=reduced, ratio=ratio)
