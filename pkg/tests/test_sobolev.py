import numpy as np
import pytest

from orliczlab.errors import InequalityFailsError
from orliczlab.geometry import DomainMask, Grid, MatrixField
from orliczlab.solver import WeakProblem, assemble, poincare_constant, solve_dirichlet
from orliczlab.sobolev import (
    best_constant_search,
    classical_weak_sobolev_check,
    dual_sup_nonneg_check,
    necessity_chain_check,
    orlicz_sobolev_ratio,
    test_function_family,
)
from orliczlab.young import NormalizedMeasure, bump_phi, compose_square, power_young


def grushin():
    return MatrixField.diag_profile(lambda x: x, name="grushin")


def tent(grid, mask):
    X, Y = grid.mesh()
    half = (grid.xmax - grid.xmin) / 2.0
    cx = 0.5 * (grid.xmin + grid.xmax)
    cy = 0.5 * (grid.ymin + grid.ymax)
    t = np.maximum(1.0 - np.maximum(np.abs(X - cx), np.abs(Y - cy)) / half, 0.0)
    return np.where(mask.interior, t, 0.0)


# ---------------------------------------------------------------------------
# ratios


def test_ratio_bounded_by_poincare(square_operator):
    op = square_operator
    w = tent(op.grid, op.mask)
    rep = orlicz_sobolev_ratio(w, power_young(2), op, test_id="tent")
    C = poincare_constant(MatrixField.identity(), op.mask, op.grid, operator=op)
    assert rep.ratio <= np.sqrt(C) + 1e-9
    assert rep.ratio == rep.lhs / rep.rhs


def test_ratio_rejects_zero_field(square_operator):
    z = np.zeros((square_operator.grid.n,) * 2)
    with pytest.raises(ValueError):
        orlicz_sobolev_ratio(z, power_young(2), square_operator)


def test_ratio_flags_degenerate_direction():
    grid = Grid.square(1.0, 33)
    mask = DomainMask.square(grid)
    zero = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
    one = lambda x, y: np.ones_like(np.asarray(x, dtype=float))
    A = MatrixField(a11=one, a12=zero, a22=zero, name="diag(1,0)")
    problem = WeakProblem(A=A, f=lambda x, y: np.zeros_like(x), grid=grid, mask=mask)
    op, _ = assemble(problem)
    _, Y = grid.mesh()
    w = np.where(mask.interior, np.cos(np.pi * Y), 0.0)  # depends on y only
    with pytest.raises(InequalityFailsError):
        orlicz_sobolev_ratio(w, power_young(2), op)


def test_ratio_scale_invariance(square_operator):
    w = tent(square_operator.grid, square_operator.mask)
    base = orlicz_sobolev_ratio(w, bump_phi(2.0), square_operator).ratio
    for lam in (0.25, 3.0, 40.0):
        scaled = orlicz_sobolev_ratio(lam * w, bump_phi(2.0), square_operator).ratio
        assert scaled == pytest.approx(base, rel=1e-7)


def test_classical_check_sigma_one_limit(square_operator):
    w = tent(square_operator.grid, square_operator.mask)
    rep = classical_weak_sobolev_check(w, 1.0 + 1e-9, square_operator, r=0.5)
    assert rep.ratio <= 1.0 + 1e-6


def test_classical_check_rejects_sigma(square_operator):
    w = tent(square_operator.grid, square_operator.mask)
    with pytest.raises(ValueError):
        classical_weak_sobolev_check(w, 1.0, square_operator, r=0.5)


def test_classical_check_refinement_stable():
    rng_vals = []
    for n in (33, 65):
        grid = Grid.square(1.0, n)
        mask = DomainMask.square(grid)
        problem = WeakProblem(A=MatrixField.identity(),
                              f=lambda x, y: np.zeros_like(x), grid=grid, mask=mask)
        op, _ = assemble(problem)
        w = tent(grid, mask)
        rng_vals.append(classical_weak_sobolev_check(w, 2.0, op, r=0.5).ratio)
    assert abs(rng_vals[1] - rng_vals[0]) / rng_vals[1] <= 0.05


# ---------------------------------------------------------------------------
# best constant


def test_best_constant_matches_eigenvalue(square_operator):
    op = square_operator
    est = best_constant_search(power_young(2), MatrixField.identity(),
                               op.mask, op.grid, budget=30, operator=op)
    C = poincare_constant(MatrixField.identity(), op.mask, op.grid, operator=op)
    assert est.lower_bound == pytest.approx(np.sqrt(C), rel=0.05)
    assert est.lower_bound <= np.sqrt(C) + 1e-9


def test_best_constant_single_budget(square_operator):
    est = best_constant_search(power_young(2), MatrixField.identity(),
                               square_operator.mask, square_operator.grid,
                               budget=1, operator=square_operator)
    assert est.trials == 1
    fam = test_function_family(square_operator.grid, square_operator.mask)
    rep = orlicz_sobolev_ratio(fam[0][1], power_young(2), square_operator,
                               test_id=fam[0][0])
    assert est.lower_bound == pytest.approx(rep.ratio, rel=1e-12)


def test_best_constant_monotone_in_budget(square_operator):
    kwargs = dict(operator=square_operator)
    prev = 0.0
    for budget in (1, 5, 12, 30):
        est = best_constant_search(power_young(2), MatrixField.identity(),
                                   square_operator.mask, square_operator.grid,
                                   budget=budget, **kwargs)
        assert est.lower_bound >= prev - 1e-15
        prev = est.lower_bound


def test_best_constant_bump_grushin_refinement_stable():
    phi = compose_square(bump_phi(2.0))
    vals = []
    for n in (33, 65):
        grid = Grid.square(1.0, n)
        mask = DomainMask.square(grid)
        est = best_constant_search(phi, grushin(), mask, grid, budget=24)
        vals.append(est.lower_bound)
    assert np.isfinite(vals).all()
    assert abs(vals[1] - vals[0]) / vals[1] <= 0.10


# ---------------------------------------------------------------------------
# duality supremum


def test_dual_sup_positive_part_dominates(square_measure):
    rng = np.random.default_rng(7)
    shape = square_measure.weights.shape
    conj = power_young(2).analytic_conjugate  # s^2 / 4
    w = np.ones(shape)
    cands = []
    for _ in range(6):
        raw = rng.standard_normal(shape)
        lam = np.sqrt(np.sum(square_measure.weights * raw * raw) / 4.0)
        cands.append(raw / lam)
    sup_x, sup_y = dual_sup_nonneg_check(w, conj, square_measure, cands)
    assert sup_y >= sup_x - 1e-12


def test_dual_sup_nonnegative_candidate_equal(square_measure):
    conj = power_young(2).analytic_conjugate
    g = np.full(square_measure.weights.shape, 2.0)  # saturates the modular
    sup_x, sup_y = dual_sup_nonneg_check(np.ones_like(g), conj, square_measure, [g])
    assert sup_x == pytest.approx(sup_y)


def test_dual_sup_rejects_infeasible(square_measure):
    conj = power_young(2).analytic_conjugate
    g = np.full(square_measure.weights.shape, 3.0)  # modular 9/4 > 1
    with pytest.raises(ValueError):
        dual_sup_nonneg_check(np.ones_like(g), conj, square_measure, [g])


# ---------------------------------------------------------------------------
# necessity chain


@pytest.fixture(scope="module")
def solved_nonneg_load():
    grid = Grid.disk_bounding(1.0, 65)
    mask = DomainMask.disk(grid, 1.0)
    problem = WeakProblem(A=MatrixField.identity(),
                          f=lambda x, y: np.full_like(x, 1.0),
                          grid=grid, mask=mask)
    op, b = assemble(problem)
    u, _ = solve_dirichlet(problem, operator_and_load=(op, b), compute_constants=False)
    return u, op


def test_chain_zero_test_field(solved_nonneg_load):
    u, op = solved_nonneg_load
    w = np.zeros_like(u)
    checks = necessity_chain_check(u, w, lambda x, y: np.ones_like(x), op)
    assert all(c["holds"] for c in checks)
    assert checks[0]["lhs"] == 0.0


def test_chain_zero_load(square_operator):
    n = square_operator.grid.n
    u = np.zeros((n, n))
    w = tent(square_operator.grid, square_operator.mask)
    checks = necessity_chain_check(u, w, lambda x, y: np.zeros_like(x),
                                   square_operator)
    assert all(c["holds"] for c in checks)


def test_chain_solved_instance(solved_nonneg_load):
    u, op = solved_nonneg_load
    w = tent(op.grid, op.mask)
    checks = necessity_chain_check(u, w, lambda x, y: np.ones_like(x), op,
                                   conj_theta=power_young(2).analytic_conjugate)
    for c in checks:
        assert c["holds"], c
        assert c["slack"] >= -1e-9
    assert "boundedness_ratio" in checks[2]


def test_chain_rejects_signed_load(solved_nonneg_load):
    u, op = solved_nonneg_load
    w = tent(op.grid, op.mask)
    with pytest.raises(ValueError):
        necessity_chain_check(u, w, lambda x, y: -np.ones_like(x), op)


# ---------------------------------------------------------------------------
# square-composition bridge on test fields


def test_lemma_bridge_on_family(square_operator):
    from orliczlab.young import square_composition_check

    Phi = bump_phi(2.0)
    for name, w in test_function_family(square_operator.grid, square_operator.mask,
                                        count=6):
        a, b, c = square_composition_check(w, Phi, square_operator.measure)
        assert a <= b + 1e-9 * (1 + b), name
        assert b <= c + 1e-9 * (1 + c), name


def test_family_is_deterministic(square_operator):
    f1 = test_function_family(square_operator.grid, square_operator.mask)
    f2 = test_function_family(square_operator.grid, square_operator.mask)
    assert [n for n, _ in f1] == [n for n, _ in f2]
    for (_, a), (_, b) in zip(f1, f2):
        assert np.array_equal(a, b)
