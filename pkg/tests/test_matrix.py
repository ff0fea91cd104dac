import numpy as np
import pytest

from qarl.matrix import (
    ConvergenceError,
    MatrixGame,
    brute_force_qre_2x2,
    regularized_game_value,
    solve_logit_qre,
    solve_nash_by_annealing,
)

MATCHING_PENNIES = MatrixGame(np.array([[1.0, -1.0], [-1.0, 1.0]]))


def fictitious_play_value(X: np.ndarray, iterations: int = 200_000) -> float:
    """Independent oracle: fictitious play on the zero-sum game, averaging the
    upper and lower best-response bounds."""
    m, n = X.shape
    row_payoff = np.zeros(m)
    col_payoff = np.zeros(n)
    row_counts = np.zeros(m)
    col_counts = np.zeros(n)
    row_counts[0] = 1
    col_counts[0] = 1
    row_payoff += X[:, 0]
    col_payoff += X[0, :]
    for _ in range(iterations):
        i = int(np.argmax(row_payoff))
        j = int(np.argmin(col_payoff))
        row_counts[i] += 1
        col_counts[j] += 1
        row_payoff += X[:, j]
        col_payoff += X[i, :]
    p = row_counts / row_counts.sum()
    q = col_counts / col_counts.sum()
    upper = float(np.max(X @ q))
    lower = float(np.min(p @ X))
    return 0.5 * (upper + lower)


class TestSolveLogitQre:
    @pytest.mark.parametrize("tau", [0.1, 1.0, 10.0])
    def test_matching_pennies_uniform(self, tau):
        sol = solve_logit_qre(MATCHING_PENNIES, tau, tau)
        np.testing.assert_allclose(sol.sigma_row, [0.5, 0.5], atol=1e-9)
        np.testing.assert_allclose(sol.sigma_col, [0.5, 0.5], atol=1e-9)
        assert abs(sol.value - tau * np.log(2) + tau * np.log(2)) < 1e-9

    def test_huge_tau_uniform(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            X = rng.uniform(-2, 2, (3, 4))
            sol = solve_logit_qre(MatrixGame(X), 1e6, 1e6)
            assert np.max(np.abs(sol.sigma_row - 1 / 3)) < 1e-4
            assert np.max(np.abs(sol.sigma_col - 1 / 4)) < 1e-4

    def test_agrees_with_brute_force(self):
        game = MatrixGame(np.array([[2.0, 0.0], [-1.0, 1.0]]))
        sol = solve_logit_qre(game, 1.0, 1.0, tol=1e-12)
        oracle = brute_force_qre_2x2(game, 1.0)
        np.testing.assert_allclose(sol.sigma_row, oracle.sigma_row, atol=1e-6)
        np.testing.assert_allclose(sol.sigma_col, oracle.sigma_col, atol=1e-6)

    def test_fixed_point_consistency(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            X = rng.uniform(-1, 1, (4, 3))
            tau = rng.uniform(0.2, 2.0)
            sol = solve_logit_qre(MatrixGame(X), tau, tau, tol=1e-10)
            assert sol.residual <= 1e-10
            assert abs(sol.sigma_row.sum() - 1) < 1e-10
            assert abs(sol.sigma_col.sum() - 1) < 1e-10

    def test_payoff_shift_invariance(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(-1, 1, (3, 3))
        c = 2.5
        s1 = solve_logit_qre(MatrixGame(X), 0.7, 0.7, tol=1e-11)
        s2 = solve_logit_qre(MatrixGame(X + c), 0.7, 0.7, tol=1e-11)
        np.testing.assert_allclose(s1.sigma_row, s2.sigma_row, atol=1e-9)
        np.testing.assert_allclose(s1.sigma_col, s2.sigma_col, atol=1e-9)
        assert s2.value - s1.value == pytest.approx(c, abs=1e-8)

    def test_irrationality_monotone(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(-1, 1, (3, 3))
        taus = [10 * np.max(np.abs(X)) * f for f in (1, 3, 10, 30)]
        dists = []
        for tau in taus:
            sol = solve_logit_qre(MatrixGame(X), tau, tau)
            dists.append(np.max(np.abs(sol.sigma_row - 1 / 3)))
        assert all(a >= b - 1e-12 for a, b in zip(dists, dists[1:]))

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            solve_logit_qre(MATCHING_PENNIES, 0.0, 1.0)

    def test_nonconvergence_error(self):
        with pytest.raises(ConvergenceError) as exc:
            solve_logit_qre(MatrixGame(np.array([[5.0, -5.0], [-4.0, 3.0]])), 0.005, 0.005,
                            tol=1e-12, max_iter=3)
        assert exc.value.residual is not None


class TestBruteForce:
    def test_matching_pennies(self):
        sol = brute_force_qre_2x2(MATCHING_PENNIES, 1.0)
        np.testing.assert_allclose(sol.sigma_row, [0.5, 0.5], atol=1e-7)
        np.testing.assert_allclose(sol.sigma_col, [0.5, 0.5], atol=1e-7)

    def test_huge_tau(self):
        sol = brute_force_qre_2x2(MATCHING_PENNIES, 1e6)
        np.testing.assert_allclose(sol.sigma_row, [0.5, 0.5], atol=1e-4)

    def test_beats_random_probes(self):
        game = MatrixGame(np.array([[2.0, 0.0], [-1.0, 1.0]]))
        sol = brute_force_qre_2x2(game, 1.0)
        rng = np.random.default_rng(0)
        X = game.payoff
        for _ in range(10_000):
            p, q = rng.random(2)
            sr = np.array([p, 1 - p])
            sc = np.array([q, 1 - q])
            br = np.exp((X @ sc) / 1.0)
            br /= br.sum()
            bc = np.exp((-X.T @ sr) / 1.0)
            bc /= bc.sum()
            r = max(np.max(np.abs(sr - br)), np.max(np.abs(sc - bc)))
            assert sol.residual <= r + 1e-12

    def test_rejects_non_2x2(self):
        with pytest.raises(ValueError):
            brute_force_qre_2x2(MatrixGame(np.zeros((3, 2))), 1.0)


class TestAnnealing:
    def test_matching_pennies_value_zero(self):
        sol = solve_nash_by_annealing(MATCHING_PENNIES, tau_end=1e-4)
        assert abs(sol.value) < 1e-3

    def test_pure_saddle(self):
        # saddle value 2 with row pure on row 2; the column player is
        # indifferent there, so the homotopy limit only favors column 2 weakly
        sol = solve_nash_by_annealing(MatrixGame(np.array([[3.0, 1.0], [2.0, 2.0]])))
        assert sol.value == pytest.approx(2.0, abs=1e-3)
        assert sol.sigma_row[1] > 0.999
        assert sol.sigma_col[1] >= 0.5

    def test_random_3x3_vs_fictitious_play(self):
        rng = np.random.default_rng(12)
        X = rng.uniform(-1, 1, (3, 3))
        sol = solve_nash_by_annealing(MatrixGame(X))
        oracle = fictitious_play_value(X)
        assert abs(sol.value - oracle) < 1e-2

    def test_terminal_strategy_is_epsilon_maximin(self):
        rng = np.random.default_rng(21)
        X = rng.uniform(-1, 1, (3, 3))
        sol = solve_nash_by_annealing(MatrixGame(X))
        worst_case = float(np.min(sol.sigma_row @ X))
        assert worst_case > fictitious_play_value(X) - 1e-2

    def test_bad_schedule(self):
        with pytest.raises(ValueError):
            solve_nash_by_annealing(MATCHING_PENNIES, tau_start=1e-5, tau_end=1e-4)


class TestRegularizedValue:
    def test_plain_bilinear(self):
        game = MatrixGame(np.array([[1.0, 2.0], [3.0, 4.0]]))
        v = regularized_game_value(game, [0.5, 0.5], [0.5, 0.5])
        assert v == pytest.approx(2.5)

    def test_zero_payoff_equal_temps(self):
        game = MatrixGame(np.zeros((2, 2)))
        v = regularized_game_value(game, [0.5, 0.5], [0.5, 0.5], beta=1.0, alpha=1.0)
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_entropy_arithmetic(self):
        game = MatrixGame(np.zeros((2, 2)))
        v = regularized_game_value(game, [0.5, 0.5], [0.5, 0.5], beta=2.0, alpha=1.0)
        assert v == pytest.approx(np.log(2), abs=1e-12)
