import numpy as np
import pytest
from scipy.special import jn_zeros

from orliczlab.errors import DegenerateInequalityError, NonCoerciveError
from orliczlab.geometry import DomainMask, Grid, MatrixField
from orliczlab.solver import (
    WeakProblem,
    assemble,
    lax_milgram_constants,
    load_from_config,
    poincare_constant,
    solve_dirichlet,
    weak_residual,
)


def poisson_disk(n, radius=1.0, A=None, fval=-1.0):
    grid = Grid.disk_bounding(radius, n)
    mask = DomainMask.disk(grid, radius)
    problem = WeakProblem(
        A=A or MatrixField.identity(),
        f=lambda x, y: np.full_like(x, fval),
        grid=grid,
        mask=mask,
    )
    return problem


def grushin():
    return MatrixField.diag_profile(lambda x: x, name="grushin")


# ---------------------------------------------------------------------------
# assembly


def test_assemble_identity_is_five_point(square_operator):
    op = square_operator
    n, h = op.grid.n, op.grid.h
    K = op.K.toarray()
    # pick an unknown well inside
    i, j = n // 2, n // 2
    row = K[op.unknown_index[i, j]]
    mu_i = op.measure.weights[i, j]
    stencil = mu_i / h**2
    assert row[op.unknown_index[i, j]] == pytest.approx(4.0 * stencil, rel=1e-12)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        assert row[op.unknown_index[i + di, j + dj]] == pytest.approx(-stencil, rel=1e-12)
    assert np.count_nonzero(row) == 5


def test_assemble_symmetry(square_operator):
    K = square_operator.K
    asym = abs(K - K.T).max()
    assert asym == 0.0


def test_assemble_zero_load_gives_zero_vector(unit_square_grid, unit_square_mask):
    problem = WeakProblem(A=MatrixField.identity(),
                          f=lambda x, y: np.zeros_like(x),
                          grid=unit_square_grid, mask=unit_square_mask)
    _, b = assemble(problem)
    assert np.all(b == 0.0)


def test_assemble_degenerate_couples_only_x(unit_square_grid, unit_square_mask):
    zero = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
    one = lambda x, y: np.ones_like(np.asarray(x, dtype=float))
    A = MatrixField(a11=one, a12=zero, a22=zero, name="diag(1,0)")
    problem = WeakProblem(A=A, f=lambda x, y: np.zeros_like(x),
                          grid=unit_square_grid, mask=unit_square_mask)
    op, _ = assemble(problem)
    n = unit_square_grid.n
    K = op.K.tocoo()
    idx = op.unknown_index
    pos = {int(idx[i, j]): (i, j) for i in range(n) for j in range(n) if idx[i, j] >= 0}
    for r, c in zip(K.row, K.col):
        if r == c:
            continue
        (i1, j1), (i2, j2) = pos[int(r)], pos[int(c)]
        assert j1 == j2 and abs(i1 - i2) == 1


def test_assemble_psd_random(square_operator):
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = rng.standard_normal(square_operator.n_unknowns)
        assert x @ (square_operator.K @ x) >= -1e-12


def test_assemble_cross_term_psd():
    grid = Grid.square(1.0, 17)
    mask = DomainMask.square(grid)
    A = MatrixField.constant(2.0, 1.0, 2.0)
    problem = WeakProblem(A=A, f=lambda x, y: np.zeros_like(x), grid=grid, mask=mask)
    op, _ = assemble(problem)
    asym = abs(op.K - op.K.T).max()
    assert asym <= 1e-14
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = rng.standard_normal(op.n_unknowns)
        assert x @ (op.K @ x) >= -1e-10


def test_assemble_empty_interior_rejected():
    grid = Grid.square(1.0, 9)
    inside = np.zeros((9, 9), dtype=bool)
    mask = DomainMask(inside, inside.copy())
    problem = WeakProblem(A=MatrixField.identity(), f=lambda x, y: np.zeros_like(x),
                          grid=grid, mask=mask)
    with pytest.raises(ValueError):
        assemble(problem)


def test_measure_weights_sum_to_one(square_operator):
    assert square_operator.measure.weights.sum() == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# solves


def test_poisson_disk_reproduction():
    problem = poisson_disk(65)
    u, report = solve_dirichlet(problem, compute_constants=False)
    grid, mask = problem.grid, problem.mask
    X, Y = grid.mesh()
    exact = (1.0 - X**2 - Y**2) / 4.0
    err = np.abs(u - np.where(mask.inside, exact, 0.0))[mask.inside].max()
    assert err <= 8.0 * grid.h**2
    i0 = (grid.n - 1) // 2
    assert abs(u[i0, i0] - 0.25) <= 4.0 * grid.h**2
    assert report.relative_residual <= 1e-9


def test_zero_load_gives_zero_solution():
    problem = poisson_disk(33, fval=0.0)
    u, report = solve_dirichlet(problem)
    assert np.all(u == 0.0)
    assert report.relative_residual == 0.0


def test_grushin_max_stable_under_refinement():
    maxes = []
    for n in (65, 129):
        problem = poisson_disk(n, A=grushin())
        u, _ = solve_dirichlet(problem, compute_constants=False)
        maxes.append(u.max())
    assert abs(maxes[1] - maxes[0]) / maxes[1] <= 0.02


def test_solution_unique_from_different_guesses():
    problem = poisson_disk(33)
    op, b = assemble(problem)
    tol = 1e-10
    u1, _ = solve_dirichlet(problem, tol=tol, operator_and_load=(op, b),
                            compute_constants=False)
    rng = np.random.default_rng(9)
    guess = op.extend(rng.standard_normal(op.n_unknowns))
    u2, _ = solve_dirichlet(problem, tol=tol, operator_and_load=(op, b),
                            x0_full=guess, compute_constants=False)
    diff = u1 - u2
    energy = np.sqrt(max(op.energy(diff), 0.0))
    scale = np.sqrt(max(op.energy(u1), 1e-30))
    assert energy <= 10.0 * tol * max(1.0, scale) * 10.0


def test_maximum_principle_smoke():
    problem = poisson_disk(65, fval=-1.0)
    u, _ = solve_dirichlet(problem, compute_constants=False)
    assert u.min() >= -1e-9


def test_fully_degenerate_reported():
    grid = Grid.square(1.0, 17)
    mask = DomainMask.square(grid)
    zero = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
    A = MatrixField(a11=zero, a12=zero, a22=zero, name="zero")
    problem = WeakProblem(A=A, f=lambda x, y: np.full_like(x, -1.0),
                          grid=grid, mask=mask)
    with pytest.raises(NonCoerciveError):
        solve_dirichlet(problem)


# ---------------------------------------------------------------------------
# weak residual


def test_weak_residual_of_solution_small():
    problem = poisson_disk(33)
    op, b = assemble(problem)
    u, _ = solve_dirichlet(problem, tol=1e-11, operator_and_load=(op, b),
                           compute_constants=False)
    res = weak_residual(u, problem, operator_and_load=(op, b))
    assert res <= 1e-9


def test_weak_residual_zero_candidate_matches_loads():
    problem = poisson_disk(33)
    op, b = assemble(problem)
    u0 = np.zeros((problem.grid.n, problem.grid.n))
    rng = np.random.default_rng(20240817)
    picks = rng.choice(op.n_unknowns, size=12, replace=False)
    hats = []
    expected = 0.0
    Mw = op.mass_diag()
    for p in picks:
        e = np.zeros(op.n_unknowns)
        e[p] = 1.0
        hats.append(op.extend(e))
        den = np.sqrt((op.K @ e)[p] + Mw[p])
        expected = max(expected, abs(b[p]) / den)
    res = weak_residual(u0, problem, test_set=hats, operator_and_load=(op, b))
    assert res == pytest.approx(expected, rel=1e-12)


def test_weak_residual_linear_in_perturbation():
    problem = poisson_disk(33)
    op, b = assemble(problem)
    u, _ = solve_dirichlet(problem, tol=1e-12, operator_and_load=(op, b),
                           compute_constants=False)
    e = np.zeros(op.n_unknowns)
    e[op.n_unknowns // 2] = 1.0
    hat = op.extend(e)
    tests = [op.extend(np.ones(op.n_unknowns))]
    r1 = weak_residual(u + 1e-3 * hat, problem, test_set=tests, operator_and_load=(op, b))
    r2 = weak_residual(u + 2e-3 * hat, problem, test_set=tests, operator_and_load=(op, b))
    assert r2 == pytest.approx(2.0 * r1, rel=1e-6)


# ---------------------------------------------------------------------------
# Poincare and Lax-Milgram constants


def test_poincare_square():
    grid = Grid.square(1.0, 65)
    mask = DomainMask.square(grid)
    C = poincare_constant(MatrixField.identity(), mask, grid)
    assert C == pytest.approx(1.0 / (2.0 * np.pi**2), rel=0.05)


def test_poincare_disk():
    grid = Grid.disk_bounding(1.0, 65)
    mask = DomainMask.disk(grid, 1.0)
    C = poincare_constant(MatrixField.identity(), mask, grid)
    j0 = jn_zeros(0, 1)[0]
    assert C == pytest.approx(1.0 / j0**2, rel=0.05)


def test_poincare_scaling_by_four():
    grid = Grid.square(1.0, 33)
    mask = DomainMask.square(grid)
    C1 = poincare_constant(MatrixField.identity(), mask, grid)
    C4 = poincare_constant(MatrixField.scaled_identity(4.0), mask, grid)
    assert C4 == pytest.approx(C1 / 4.0, rel=1e-8)


def test_poincare_degenerate_raises():
    grid = Grid.square(1.0, 17)
    mask = DomainMask.square(grid)
    zero = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
    A = MatrixField(a11=zero, a12=zero, a22=zero, name="zero")
    with pytest.raises((DegenerateInequalityError, NonCoerciveError, RuntimeError)):
        poincare_constant(A, mask, grid)


def test_lax_milgram_beta_formula():
    # beta = min(1/(2C), 1/2) at the two printed calibration points
    assert min(1.0 / (2.0 * 1.0), 0.5) == 0.5
    assert min(1.0 / (2.0 * 4.0), 0.5) == 0.125
    grid = Grid.square(1.0, 33)
    mask = DomainMask.square(grid)
    alpha, beta = lax_milgram_constants(MatrixField.identity(), mask, grid)
    C = poincare_constant(MatrixField.identity(), mask, grid)
    assert alpha == 1.0
    assert beta == pytest.approx(min(1.0 / (2.0 * C), 0.5), rel=1e-12)


def test_lax_milgram_random_checks_pass_for_grushin():
    grid = Grid.square(1.0, 33)
    mask = DomainMask.square(grid)
    alpha, beta = lax_milgram_constants(grushin(), mask, grid, n_checks=50)
    assert alpha == 1.0 and beta > 0.0


def test_coercivity_chain_on_random_fields(square_operator):
    op = square_operator
    C = poincare_constant(MatrixField.identity(), op.mask, op.grid, operator=op)
    beta = min(1.0 / (2.0 * C), 0.5)
    rng = np.random.default_rng(33)
    Mw = op.mass_diag()
    for _ in range(50):
        u = rng.standard_normal(op.n_unknowns)
        buu = u @ (op.K @ u)
        norm2 = np.sum(Mw * u * u) + buu
        assert buu >= beta * norm2 - 1e-8 * max(1.0, norm2)


# ---------------------------------------------------------------------------
# load expressions


def test_load_expressions():
    f = load_from_config({"kind": "constant", "value": -2.0})
    assert f(np.zeros(3), np.zeros(3))[0] == -2.0
    f = load_from_config({"kind": "radial_log", "alpha": 0.25})
    val = f(np.array([0.1]), np.array([0.0]))
    assert np.isfinite(val).all()


def test_solve_report_fields():
    problem = poisson_disk(33)
    _, rep = solve_dirichlet(problem)
    assert rep.alpha_est == 1.0
    assert rep.beta_est == pytest.approx(min(1.0 / (2.0 * rep.poincare_C), 0.5))
    assert rep.iterations > 0
