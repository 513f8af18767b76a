import numpy as np
import pytest

from orliczlab.errors import NormInfiniteError, SandwichViolationError
from orliczlab.young import (
    BumpFamilyParams,
    NormalizedMeasure,
    YoungFunction,
    bump_phi,
    check_young_axioms,
    compose_square,
    conjugate,
    holder_defect,
    inverse_young,
    luxembourg_norm,
    orlicz_norm_dual,
    power_young,
    scale_embedding_check,
    square_composition_check,
    tabulated_young,
    young_from_config,
)

from conftest import smooth_field_bank


def indicator_measure(total=16, hits=8):
    """Measure with equal weights; field support can target a fraction."""
    return NormalizedMeasure.uniform((total,))


# ---------------------------------------------------------------------------
# conjugate


def test_conjugate_half_square():
    theta = YoungFunction(fn=lambda t: t * t / 2.0, name="t^2/2")
    conj = conjugate(theta)
    # analytic Legendre transform: sup at t = s, value s^2/2
    assert conj(1.0) == pytest.approx(0.5, abs=1e-9)


def test_conjugate_at_zero_is_zero():
    conj = conjugate(power_young(2))
    assert conj(0.0) == pytest.approx(0.0, abs=1e-12)


def test_conjugate_abs_below_slope():
    # oracle: pointwise sup over a fine t grid
    theta = YoungFunction(fn=lambda t: t, name="abs")
    tgrid = np.linspace(0.0, 50.0, 200001)
    oracle = np.max(0.5 * tgrid - tgrid)
    conj = conjugate(theta)
    assert conj(0.5) == pytest.approx(max(oracle, 0.0), abs=1e-9)


def test_conjugate_empty_scan_rejected():
    with pytest.raises(ValueError):
        conjugate(power_young(2), t_scan=np.array([]))


def test_fenchel_young_on_samples():
    for theta in (power_young(2), bump_phi(2.0)):
        conj = theta.conjugate_fn()
        ts = np.logspace(-3, 2, 40)
        ss = np.logspace(-3, 2, 40)
        th_t = theta(ts)
        for s in ss:
            lhs = s * ts
            rhs = th_t + conj(s)
            assert np.all(lhs <= rhs + 1e-7 * (1.0 + np.abs(rhs)))


def test_biconjugate_recovers_power():
    theta = power_young(2)
    double = conjugate(conjugate(theta))
    ts = np.logspace(-1, 1.5, 25)
    assert np.allclose(double(ts), theta(ts), rtol=5e-3)


# ---------------------------------------------------------------------------
# luxembourg norm


def test_luxembourg_constant_field(flat_measure):
    res = luxembourg_norm(np.full(16, 3.0), power_young(2), flat_measure)
    assert res.value == pytest.approx(3.0, abs=1e-9)
    lo, hi = res.bracket
    assert lo <= res.value <= hi


def test_luxembourg_zero_field(flat_measure):
    res = luxembourg_norm(np.zeros(16), bump_phi(1.5), flat_measure)
    assert res.value == 0.0


def test_luxembourg_indicator_half_measure():
    mu = NormalizedMeasure.uniform((16,))
    f = np.zeros(16)
    f[:8] = 1.0  # mu-measure 1/2 set
    res = luxembourg_norm(f, power_young(2), mu)
    assert res.value == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-9)


def test_luxembourg_homogeneity(flat_measure):
    rng = np.random.default_rng(5)
    f = rng.normal(size=16)
    for theta in (power_young(2), bump_phi(2.0)):
        base = luxembourg_norm(f, theta, flat_measure).value
        for lam in (0.3, 2.0, 17.5):
            scaled = luxembourg_norm(lam * f, theta, flat_measure).value
            assert scaled == pytest.approx(lam * base, rel=1e-8, abs=1e-10)


def test_luxembourg_sup_norm_via_indicator_conjugate(flat_measure):
    # conjugate of |t| gauges the essential sup
    conj = power_young(1).analytic_conjugate
    f = np.linspace(0.0, 4.0, 16)
    res = luxembourg_norm(f, conj, flat_measure)
    assert res.value == pytest.approx(4.0, rel=1e-9)


# ---------------------------------------------------------------------------
# dual norm and Hoelder


def test_dual_norm_constant_one(flat_measure):
    val = orlicz_norm_dual(np.ones(16), power_young(2), flat_measure)
    assert val == pytest.approx(2.0, rel=1e-7)


def test_dual_norm_zero(flat_measure):
    assert orlicz_norm_dual(np.zeros(16), power_young(2), flat_measure) == 0.0


def test_dual_norm_scaling_and_sandwich(flat_measure):
    val = orlicz_norm_dual(np.full(16, 3.0), power_young(2), flat_measure)
    assert val == pytest.approx(6.0, rel=1e-7)
    assert 3.0 - 1e-9 <= val <= 6.0 + 1e-9


def test_dual_norm_sandwich_random_fields(unit_square_grid, square_measure):
    fields = smooth_field_bank(unit_square_grid, 12, seed=77)
    for theta in (power_young(2), power_young(4), bump_phi(1.0), bump_phi(2.0)):
        for f in fields[:6]:
            lux = luxembourg_norm(f, theta, square_measure).value
            dual = orlicz_norm_dual(f, theta, square_measure)
            slack = 1e-9 * (1.0 + lux)
            assert dual >= lux - slack
            assert dual <= 2.0 * lux + slack


def test_holder_defect_constants(flat_measure):
    d = holder_defect(np.ones(16), np.ones(16), power_young(2), flat_measure)
    assert d == pytest.approx(0.0, abs=1e-9)


def test_holder_defect_zero_field(flat_measure):
    rng = np.random.default_rng(0)
    g = rng.normal(size=16)
    assert holder_defect(np.zeros(16), g, power_young(2), flat_measure) == pytest.approx(0.0, abs=1e-12)


def test_holder_defect_random_fields(unit_square_grid, square_measure):
    fields = smooth_field_bank(unit_square_grid, 8, seed=3)
    for theta in (power_young(2), bump_phi(1.5)):
        for f, g in zip(fields[::2], fields[1::2]):
            assert holder_defect(f, g, theta, square_measure) >= -1e-9


# ---------------------------------------------------------------------------
# bump family


def test_bump_on_the_knee():
    phi = bump_phi(1.0)
    assert phi(np.exp(2.0)) == pytest.approx(2.0 * np.exp(2.0), rel=1e-14)


def test_bump_linear_branch():
    phi = bump_phi(2.0)
    assert phi(1.0) == pytest.approx(16.0, rel=1e-14)


def test_bump_at_zero():
    for N in (1.0, 2.0, 3.5):
        assert bump_phi(N)(0.0) == 0.0


def test_bump_rejects_small_exponent():
    with pytest.raises(ValueError):
        bump_phi(0.5)
    with pytest.raises(ValueError):
        BumpFamilyParams.make(0.99)


def test_bump_params_pin_E():
    p = BumpFamilyParams.make(2.5)
    assert p.E == float(np.exp(5.0))


def test_bump_branch_continuity():
    for N in (1.0, 2.0, 3.0):
        E = float(np.exp(2.0 * N))
        phi = bump_phi(N)
        below = phi(E * (1.0 - 1e-12))
        above = phi(E * (1.0 + 1e-12))
        assert abs(below - above) <= 1e-9 * above


def test_bump_is_young_function():
    for N in (1.0, 2.0):
        check_young_axioms(bump_phi(N))
    check_young_axioms(power_young(2))
    check_young_axioms(power_young(1))


# ---------------------------------------------------------------------------
# inversion


def test_inverse_square():
    assert inverse_young(power_young(2), 9.0) == pytest.approx(3.0, rel=1e-9)


def test_inverse_bump_branch():
    # invert t ln t = 2 e^2 on the printed branch: t = e^2
    assert inverse_young(bump_phi(1.0), 2.0 * np.exp(2.0)) == pytest.approx(np.exp(2.0), rel=1e-9)


def test_inverse_at_zero():
    assert inverse_young(bump_phi(2.0), 0.0) == 0.0


def test_inverse_beyond_range_raises():
    from orliczlab.errors import BracketExhaustedError

    bounded = YoungFunction(fn=lambda t: np.where(t <= 1.0, 0.0, np.inf), name="ind")
    with pytest.raises(BracketExhaustedError):
        inverse_young(bounded, 0.5)


# ---------------------------------------------------------------------------
# square composition and scale embedding


def test_square_composition_constant(flat_measure):
    a, b, c = square_composition_check(np.ones(16), power_young(1), flat_measure)
    assert a == pytest.approx(1.0, abs=1e-9)
    assert b == pytest.approx(1.0, abs=1e-9)
    assert c == pytest.approx(4.0, abs=1e-9)


def test_square_composition_zero(flat_measure):
    a, b, c = square_composition_check(np.zeros(16), power_young(1), flat_measure)
    assert (a, b, c) == (0.0, 0.0, 0.0)


def test_square_composition_indicator():
    mu = NormalizedMeasure.uniform((16,))
    u = np.zeros(16)
    u[:8] = 1.0
    a, b, c = square_composition_check(u, power_young(1), mu)
    assert a == pytest.approx(0.5, abs=1e-9)
    assert b == pytest.approx(0.5, abs=1e-9)
    assert c == pytest.approx(2.0, abs=1e-9)


def test_square_composition_ordering_random(unit_square_grid, square_measure):
    fields = smooth_field_bank(unit_square_grid, 6, seed=11)
    for Phi in (power_young(1), bump_phi(2.0)):
        for u in fields:
            a, b, c = square_composition_check(u, Phi, square_measure)
            assert a <= b + 1e-9 * (1.0 + b)
            assert b <= c + 1e-9 * (1.0 + c)


def test_scale_embedding_constants(flat_measure):
    f = np.full(16, 2.0)
    diff = scale_embedding_check(f, power_young(2), power_young(4), flat_measure)
    assert diff == pytest.approx(0.0, abs=1e-8)


def test_scale_embedding_zero(flat_measure):
    assert scale_embedding_check(np.zeros(16), power_young(2), power_young(4),
                                 flat_measure) == 0.0


def test_scale_embedding_dominated_bump(unit_square_grid, square_measure):
    theta1 = power_young(2)
    theta2 = compose_square(bump_phi(2.0))  # >= 16 t^2 everywhere
    for f in smooth_field_bank(unit_square_grid, 5, seed=21):
        assert scale_embedding_check(f, theta1, theta2, square_measure) >= -1e-9


def test_scale_embedding_rejects_undominated(flat_measure):
    f = np.full(16, 2.0)
    # theta1 = 3 t^2 beats t^2 at the realized argument t = 1
    theta1 = YoungFunction(fn=lambda t: 3.0 * t * t, name="3t^2")
    with pytest.raises(ValueError):
        scale_embedding_check(f, theta1, power_young(2), flat_measure)


# ---------------------------------------------------------------------------
# config and measure plumbing


def test_young_from_config_roundtrip(tmp_path):
    th = young_from_config({"kind": "power", "p": 3})
    assert th(2.0) == pytest.approx(8.0)
    th = young_from_config({"kind": "bump", "N": 2})
    assert th(1.0) == pytest.approx(16.0)
    th = young_from_config({"kind": "composed_square", "base": {"kind": "power", "p": 1}})
    assert th(3.0) == pytest.approx(9.0)
    path = tmp_path / "young.csv"
    path.write_text("t,theta_t\n0,0\n1,1\n2,4\n3,9\n")
    th = young_from_config({"kind": "tabulated", "path": str(path)})
    assert th(2.0) == pytest.approx(4.0)
    assert th(2.5) == pytest.approx(6.5)  # chord between samples


def test_tabulated_rejects_nonincreasing(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0,0\n2,4\n1,1\n")
    from orliczlab.errors import ConfigError

    with pytest.raises(ConfigError):
        tabulated_young(str(path))


def test_measure_validates_total():
    with pytest.raises(ValueError):
        NormalizedMeasure(np.full(4, 0.3))
    with pytest.raises(ValueError):
        NormalizedMeasure(np.array([1.5, -0.5]))


def test_norm_result_bracket_width(flat_measure):
    res = luxembourg_norm(np.full(16, 3.0), power_young(2), flat_measure, tol=1e-10)
    lo, hi = res.bracket
    assert hi - lo <= 1e-10 * max(1.0, hi)
    assert res.iterations > 0
