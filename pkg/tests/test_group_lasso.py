import logging
import math

import numpy as np
import pytest
from scipy import linalg

from pq_sparse.exceptions import ConfigurationError, NumericalError, ValidationError
from pq_sparse.representation.atoms import build_dictionary, from_matrix
from pq_sparse.representation.group_lasso import (
    Coefficients,
    GroupLassoSolver,
    SolverConfig,
    check_kkt,
    compute_s_g,
    group_lasso_reference,
    group_lasso_shooting,
    group_soft_threshold,
    lasso_shooting,
    least_squares_fit,
    least_squares_fit_many,
    objective,
    reconstruct,
    reconstruction_rmse,
    sparsity_fraction,
    spectral_norm_squared,
)


def random_grouped_matrix(rng, n_rows, group_sizes):
    matrix = rng.standard_normal((n_rows, sum(group_sizes)))
    return matrix / np.linalg.norm(matrix, axis=0)


@pytest.fixture
def random_problem(rng):
    dictionary = from_matrix(random_grouped_matrix(rng, 20, [4, 4, 4]), [4, 4, 4], normalized=True)
    return dictionary, rng.standard_normal(20)


@pytest.fixture
def orthonormal_problem(rng):
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    return from_matrix(q, [3, 3], normalized=True), rng.standard_normal(6)


def lasso_cost(matrix, y, beta, lam):
    residual = y - matrix @ beta
    return 0.5 * residual @ residual + lam * np.sum(np.abs(beta))


def scalar_coordinate_descent(matrix, y, lam, sweeps=5000):
    beta = np.zeros(matrix.shape[1])
    residual = y.copy()
    norms = np.sum(matrix ** 2, axis=0)
    for _ in range(sweeps):
        for j in range(matrix.shape[1]):
            rho = matrix[:, j] @ residual + norms[j] * beta[j]
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / norms[j]
            residual -= matrix[:, j] * (new - beta[j])
            beta[j] = new
    return beta


# ===== SOFT THRESHOLD =====

def test_soft_threshold_shrinks():
    np.testing.assert_allclose(group_soft_threshold(np.array([3.0, 4.0]), 1.0, 4), [1.8, 2.4])


def test_soft_threshold_zeroes_small_groups():
    np.testing.assert_array_equal(group_soft_threshold(np.array([0.3, 0.4]), 1.0, 1), [0.0, 0.0])


def test_soft_threshold_boundary_is_zero():
    # ||S|| exactly equal to λ sqrt(p)
    np.testing.assert_array_equal(group_soft_threshold(np.array([3.0, 4.0]), 2.5, 4), [0.0, 0.0])


def test_soft_threshold_without_penalty_is_identity():
    s = np.array([0.1, -2.0, 5.0])
    np.testing.assert_array_equal(group_soft_threshold(s, 0.0, 3), s)


# ===== BUILDING BLOCKS =====

def test_compute_s_g(random_problem, rng):
    dictionary, y = random_problem
    phi = dictionary.matrix
    np.testing.assert_allclose(compute_s_g(dictionary, y, np.zeros(12), 1), phi[:, 4:8].T @ y)

    beta = rng.standard_normal(12)
    others = y - phi[:, :4] @ beta[:4] - phi[:, 8:] @ beta[8:]
    np.testing.assert_allclose(compute_s_g(dictionary, y, beta, 1), phi[:, 4:8].T @ others, atol=1e-12)


def test_objective_by_hand():
    dictionary = from_matrix(np.eye(6), [2, 4], normalized=True)
    beta = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.5])
    expected = 0.5 * (4 + 0.25) + 0.1 * (math.sqrt(2) * 1.0 + 2.0 * 0.5)
    assert objective(dictionary, np.ones(6), beta, 0.1) == pytest.approx(expected, rel=1e-12)
    assert objective(dictionary, np.ones(6), np.zeros(6), 0.1) == pytest.approx(3.0)


def test_sparsity_fraction():
    assert sparsity_fraction(np.array([0.0, 0.0, 1e-5, 0.5]), 1e-4).overall == 0.75
    assert sparsity_fraction(np.zeros(5)).overall == 1.0
    with pytest.raises(ValidationError):
        sparsity_fraction(np.zeros(3), threshold=0.0)


def test_sparsity_per_group():
    dictionary = from_matrix(np.eye(4), [2, 2])
    profile = sparsity_fraction(np.array([0.0, 1.0, 0.0, 0.0]), 1e-4, dictionary)
    assert profile.per_group == {"g1": 0.5, "g2": 1.0}


def test_reconstruct_in_both_bases(small_grid, tiny_dictionary_config, rng):
    dictionary = build_dictionary(tiny_dictionary_config, small_grid)
    beta = rng.standard_normal(dictionary.n_atoms)
    a = reconstruct(dictionary, beta)
    b = reconstruct(dictionary, beta, original_basis=True)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-10, atol=1e-10)
    np.testing.assert_array_equal(reconstruct(dictionary, np.zeros(dictionary.n_atoms)).values, 0.0)
    unit = np.zeros(dictionary.n_atoms)
    unit[7] = 1.0
    np.testing.assert_allclose(reconstruct(dictionary, unit).values, dictionary.matrix[:, 7])


def test_coefficients_bound_to_other_dictionary():
    dictionary = from_matrix(np.eye(2), [1, 1])
    with pytest.raises(ValidationError):
        objective(dictionary, np.ones(2), Coefficients(np.zeros(2), "not-this-one"), 0.1)


def test_spectral_norm_of_orthonormal(orthonormal_problem):
    dictionary, _ = orthonormal_problem
    assert spectral_norm_squared(dictionary.matrix) == pytest.approx(1.0, rel=1e-12)


# ===== SHOOTING =====

def test_identity_dictionary_example():
    dictionary = from_matrix(np.eye(2), [1, 1], normalized=True)
    config = SolverConfig(lam=0.5)
    beta, report = group_lasso_shooting(dictionary, np.array([1.0, 0.05]), config)
    np.testing.assert_allclose(beta.values, [0.5, 0.0], atol=1e-12)
    assert report.converged
    reference = group_lasso_reference(dictionary, np.array([1.0, 0.05]), config)
    np.testing.assert_allclose(reference.values, [0.5, 0.0], atol=1e-12)


def test_large_lambda_gives_zero_after_one_sweep(random_problem):
    dictionary, y = random_problem
    beta, report = group_lasso_shooting(dictionary, y, SolverConfig(lam=1e6))
    np.testing.assert_array_equal(beta.values, 0.0)
    assert report.sweeps_used == 1
    assert report.converged
    assert report.overall_sparsity == 1.0


def test_zero_lambda_recovers_orthonormal_coefficients(orthonormal_problem):
    dictionary, y = orthonormal_problem
    beta, _ = group_lasso_shooting(dictionary, y, SolverConfig(lam=0.0, max_sweeps=100))
    np.testing.assert_allclose(beta.values, dictionary.matrix.T @ y, atol=1e-10)


def test_unit_step_matches_lipschitz_on_orthonormal_groups(orthonormal_problem):
    dictionary, y = orthonormal_problem
    unit, _ = group_lasso_shooting(dictionary, y, SolverConfig(lam=0.1, block_step="unit", max_sweeps=200))
    scaled, _ = group_lasso_shooting(dictionary, y, SolverConfig(lam=0.1, max_sweeps=200))
    np.testing.assert_allclose(unit.values, scaled.values, atol=1e-10)


def test_shooting_matches_reference_solver(random_problem):
    dictionary, y = random_problem
    config = SolverConfig(lam=0.1, tol=1e-12)
    beta, report = group_lasso_shooting(dictionary, y, config)
    reference = group_lasso_reference(dictionary, y, config, tol=1e-14)
    assert report.converged
    assert report.final_objective == pytest.approx(objective(dictionary, y, reference, 0.1), rel=1e-6)


def test_objective_never_increases(random_problem):
    dictionary, y = random_problem
    _, report = group_lasso_shooting(dictionary, y, SolverConfig(lam=0.05, tol=1e-12, record_history=True))
    assert len(report.objective_history) == report.sweeps_used
    assert report.is_monotone()


def test_rising_objective_under_block_step_is_an_error(orthonormal_problem):
    dictionary, y = orthonormal_problem
    solver = GroupLassoSolver(dictionary, SolverConfig(lam=0.0, max_sweeps=5))
    # steps far below ||Φ_g||² = 1 overshoot every block
    solver.steps = np.full(2, 0.1)
    with pytest.raises(NumericalError) as info:
        solver.solve(y)
    assert info.value.sweep == 1


def test_rising_objective_under_unit_step_warns_once(caplog):
    atom = np.ones(8) / math.sqrt(8)
    # three copies of one atom: the plain update triples the fitted component
    dictionary = from_matrix(np.column_stack([atom, atom, atom]), [3], normalized=True)
    y = np.linspace(-1.0, 2.0, 8)
    config = SolverConfig(lam=0.0, block_step="unit", max_sweeps=20, record_history=True)
    with caplog.at_level(logging.WARNING, logger="pq_sparse.representation.group_lasso"):
        _, report = GroupLassoSolver(dictionary, config).solve(y)
    assert report.final_objective > 0.5 * y @ y
    assert caplog.text.count("Objective increased") == 1


def test_block_step_defaults_to_lipschitz():
    assert SolverConfig().block_step == "lipschitz"
    assert SolverConfig(block_step="unit").block_step == "unit"
    assert SolverConfig().to_dict()["block_step"] == "lipschitz"


def test_sparsity_grows_along_lambda_path(rng):
    q, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    dictionary = from_matrix(q, [3, 3, 3, 3], normalized=True)
    y = rng.standard_normal(12)
    overall, per_group = [], []
    for lam in [1e-5, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 5.0]:
        beta, report = GroupLassoSolver(dictionary, SolverConfig(lam=lam, tol=1e-13, max_sweeps=500)).solve(y)
        assert report.converged
        profile = sparsity_fraction(beta, 1e-4, dictionary)
        overall.append(profile.overall)
        per_group.append([profile.per_group[g.name] for g in dictionary.groups])
    assert all(b >= a for a, b in zip(overall, overall[1:]))
    assert np.all(np.diff(np.array(per_group), axis=0) >= 0)
    assert overall[0] < 1.0
    assert overall[-1] == 1.0


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_shooting_matches_reference_on_random_instances(seed):
    rng = np.random.default_rng(seed)
    sizes = [int(p) for p in rng.integers(2, 7, size=int(rng.integers(2, 7)))]
    n_rows = int(rng.integers(sum(sizes) + 10, 51))
    dictionary = from_matrix(random_grouped_matrix(rng, n_rows, sizes), sizes, normalized=True)
    y = rng.standard_normal(n_rows)
    lam = float(rng.uniform(0.01, 0.5))
    config = SolverConfig(lam=lam, tol=1e-12)
    _, report = group_lasso_shooting(dictionary, y, config)
    reference = group_lasso_reference(dictionary, y, config, tol=1e-14)
    assert report.converged
    assert report.final_objective == pytest.approx(objective(dictionary, y, reference, lam), rel=1e-6)


def test_converged_solution_satisfies_kkt(random_problem):
    dictionary, y = random_problem
    beta, _ = group_lasso_shooting(dictionary, y, SolverConfig(lam=0.2, tol=1e-13))
    assert check_kkt(dictionary, y, beta, 0.2, atol=1e-6) == ()
    # the zero vector is not optimal for a small penalty
    assert check_kkt(dictionary, y, np.zeros(12), 0.2) != ()


def test_singleton_groups_match_scalar_lasso(random_problem):
    dictionary, y = random_problem
    lam = 0.05
    beta, _ = lasso_shooting(dictionary, y, SolverConfig(lam=lam, tol=1e-13))
    oracle = scalar_coordinate_descent(dictionary.matrix, y, lam)
    assert lasso_cost(dictionary.matrix, y, beta.values, lam) == pytest.approx(
        lasso_cost(dictionary.matrix, y, oracle, lam), abs=1e-8)


def test_report_rmse_matches_recomputed(random_problem):
    dictionary, y = random_problem
    beta, report = group_lasso_shooting(dictionary, y, SolverConfig(lam=0.01))
    assert report.reconstruction_rmse == pytest.approx(reconstruction_rmse(dictionary, y, beta), rel=1e-9)
    assert set(report.per_group_sparsity) == {"g1", "g2", "g3"}


def test_solver_rejects_wrong_signal_length(random_problem):
    dictionary, _ = random_problem
    with pytest.raises(ValidationError):
        GroupLassoSolver(dictionary).solve(np.zeros(19))


def test_solver_config_keys():
    config = SolverConfig.from_dict({"lambda": 0.01, "max_sweeps": 50})
    assert config.lam == 0.01
    assert config.to_dict()["lambda"] == 0.01
    with pytest.raises(ConfigurationError):
        SolverConfig.from_dict({"lambda": 0.01, "step": 2})
    with pytest.raises(ConfigurationError):
        SolverConfig(lam=-1.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(block_step="newton")


# ===== LEAST SQUARES =====

def test_least_squares_square_system(rng):
    matrix = rng.standard_normal((6, 6))
    y = rng.standard_normal(6)
    beta = least_squares_fit(from_matrix(matrix, [6]), y)
    np.testing.assert_allclose(beta.values, np.linalg.solve(matrix, y), rtol=1e-8, atol=1e-10)


def test_least_squares_zero_signal(rng):
    dictionary = from_matrix(rng.standard_normal((5, 8)), [4, 4])
    np.testing.assert_array_equal(least_squares_fit(dictionary, np.zeros(5)).values, 0.0)


def test_least_squares_overcomplete_minimum_norm(rng):
    matrix = rng.standard_normal((4, 6))
    y = rng.standard_normal(4)
    dictionary = from_matrix(matrix, [3, 3])
    beta = least_squares_fit(dictionary, y).values
    assert np.linalg.norm(matrix @ beta - y) <= 1e-10
    null = linalg.null_space(matrix)
    np.testing.assert_allclose(null.T @ beta, 0.0, atol=1e-10)
    assert np.linalg.norm(beta + null[:, 0]) > np.linalg.norm(beta)


def test_least_squares_many_matches_single(rng):
    dictionary = from_matrix(rng.standard_normal((5, 8)), [4, 4])
    signals = rng.standard_normal((3, 5))
    many = least_squares_fit_many(dictionary, signals)
    for row, signal in zip(many, signals):
        np.testing.assert_allclose(row, least_squares_fit(dictionary, signal).values, atol=1e-10)
    with pytest.raises(ValidationError):
        least_squares_fit_many(dictionary, np.zeros((3, 4)))
