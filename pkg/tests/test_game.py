import numpy as np
import pytest

from qarl.game import (
    MarkovGame,
    TabularPolicy,
    Trajectory,
    discounted_return,
    expected_return,
    policy_entropy,
    rollout,
)


def random_game(n_states=4, a1=2, a2=2, gamma=0.9, seed=0, horizon=100):
    rng = np.random.default_rng(seed)
    P = rng.random((n_states, a1, a2, n_states))
    P /= P.sum(axis=3, keepdims=True)
    R = rng.uniform(-1, 1, (n_states, a1, a2, n_states))
    init = np.full(n_states, 1.0 / n_states)
    return MarkovGame(P, R, gamma, init, horizon)


def single_state_game(reward=1.0, gamma=0.9):
    P = np.ones((1, 1, 1, 1))
    R = np.full((1, 1, 1, 1), reward)
    return MarkovGame(P, R, gamma, np.array([1.0]))


class TestMarkovGame:
    def test_rejects_bad_transition(self):
        P = np.ones((2, 1, 1, 2))  # rows sum to 2
        with pytest.raises(ValueError):
            MarkovGame(P, np.zeros_like(P), 0.9, np.array([1.0, 0.0]))

    def test_rejects_bad_gamma(self):
        g = random_game()
        with pytest.raises(ValueError):
            MarkovGame(g.transition, g.reward, 1.0, g.initial)

    def test_rejects_nonfinite_reward(self):
        g = random_game()
        R = np.array(g.reward)
        R[0, 0, 0, 0] = np.inf
        with pytest.raises(ValueError):
            MarkovGame(g.transition, R, 0.9, g.initial)

    def test_json_round_trip(self, tmp_path):
        g = random_game(seed=3)
        path = tmp_path / "game.json"
        g.save(path)
        g2 = MarkovGame.load(path)
        np.testing.assert_array_equal(g.transition, g2.transition)
        np.testing.assert_array_equal(g.reward, g2.reward)
        assert g.gamma == g2.gamma and g.horizon == g2.horizon


class TestPolicyEntropy:
    def test_uniform_is_max(self):
        pol = TabularPolicy.uniform(1, 4)
        assert policy_entropy(pol, 0) == pytest.approx(np.log(4), abs=1e-12)

    def test_deterministic_is_zero(self):
        pol = TabularPolicy(np.array([[1.0, 0.0]]))
        assert policy_entropy(pol, 0) == 0.0

    def test_skewed(self):
        # oracle: direct summation -sum p ln p for (0.25, 0.75)
        expected = -(0.25 * np.log(0.25) + 0.75 * np.log(0.75))
        pol = TabularPolicy(np.array([[0.25, 0.75]]))
        assert policy_entropy(pol, 0) == pytest.approx(expected, abs=1e-12)
        assert round(expected, 4) == 0.5623

    def test_bad_state_index(self):
        pol = TabularPolicy.uniform(2, 2)
        with pytest.raises(IndexError):
            policy_entropy(pol, 5)


class TestDiscountedReturn:
    def test_gamma_zero(self):
        traj = Trajectory([(0, 0, 0, 5.0, 0), (0, 0, 0, 7.0, 0), (0, 0, 0, 9.0, 0)])
        assert discounted_return(traj, 0.0) == 5.0

    def test_geometric(self):
        traj = Trajectory([(0, 0, 0, 1.0, 0)] * 10)
        assert discounted_return(traj, 0.9) == pytest.approx((1 - 0.9**10) / 0.1)

    def test_mixed_signs(self):
        traj = Trajectory([(0, 0, 0, 1.0, 0), (0, 0, 0, -2.0, 0), (0, 0, 0, 3.0, 0)])
        assert discounted_return(traj, 0.5) == pytest.approx(0.75)


class TestExpectedReturn:
    def test_zero_reward(self):
        g = random_game()
        g0 = MarkovGame(g.transition, np.zeros_like(g.reward), g.gamma, g.initial)
        mu = TabularPolicy.uniform(4, 2)
        nu = TabularPolicy.uniform(4, 2, "adversary")
        assert expected_return(g0, mu, nu) == 0.0

    def test_single_state_constant(self):
        g = single_state_game(reward=1.0, gamma=0.9)
        mu = TabularPolicy.uniform(1, 1)
        nu = TabularPolicy.uniform(1, 1, "adversary")
        assert expected_return(g, mu, nu) == pytest.approx(10.0)

    def test_matches_monte_carlo(self):
        # oracle: long-run Monte-Carlo average of rollout returns
        g = random_game(seed=7)
        mu = TabularPolicy.uniform(4, 2)
        nu = TabularPolicy.uniform(4, 2, "adversary")
        exact = expected_return(g, mu, nu)
        rng = np.random.default_rng(42)
        n = 2000
        returns = [
            discounted_return(rollout(g, mu, nu, 200, rng), g.gamma) for _ in range(n)
        ]
        se = np.std(returns) / np.sqrt(n)
        assert abs(np.mean(returns) - exact) < 3 * se + 1e-6

    def test_linear_in_rewards(self):
        g = random_game(seed=5)
        mu = TabularPolicy.uniform(4, 2)
        nu = TabularPolicy.uniform(4, 2, "adversary")
        base = expected_return(g, mu, nu)
        g3 = MarkovGame(g.transition, 3.0 * g.reward, g.gamma, g.initial)
        assert expected_return(g3, mu, nu) == pytest.approx(3.0 * base)

    def test_bounded_by_reward_range(self):
        g = random_game(seed=11)
        mu = TabularPolicy.uniform(4, 2)
        nu = TabularPolicy.uniform(4, 2, "adversary")
        bound = np.max(np.abs(g.reward)) / (1 - g.gamma)
        assert abs(expected_return(g, mu, nu)) <= bound


class TestRollout:
    def test_deterministic_game_same_across_seeds(self):
        P = np.zeros((2, 1, 1, 2))
        P[0, 0, 0, 1] = 1.0
        P[1, 0, 0, 0] = 1.0
        R = np.ones_like(P)
        g = MarkovGame(P, R, 0.9, np.array([1.0, 0.0]))
        mu = TabularPolicy.uniform(2, 1)
        nu = TabularPolicy.uniform(2, 1, "adversary")
        t1 = rollout(g, mu, nu, 10, np.random.default_rng(1))
        t2 = rollout(g, mu, nu, 10, np.random.default_rng(99))
        assert t1.steps == t2.steps

    def test_same_seed_identical(self):
        g = random_game(seed=2)
        mu = TabularPolicy.uniform(4, 2)
        nu = TabularPolicy.uniform(4, 2, "adversary")
        t1 = rollout(g, mu, nu, 50, np.random.default_rng(5))
        t2 = rollout(g, mu, nu, 50, np.random.default_rng(5))
        assert t1.steps == t2.steps

    def test_transition_frequencies(self):
        # oracle: empirical next-state frequencies from a fixed (s, a1, a2)
        g = random_game(n_states=3, seed=9)
        mu = TabularPolicy(np.tile([1.0, 0.0], (3, 1)))
        nu = TabularPolicy(np.tile([1.0, 0.0], (3, 1)), "adversary")
        rng = np.random.default_rng(0)
        counts = np.zeros(3)
        n = 20000
        for _ in range(n):
            traj = rollout(g, mu, nu, 1, rng, start_state=0)
            counts[traj.steps[0][4]] += 1
        freq = counts / n
        p = g.transition[0, 0, 0]
        se = np.sqrt(p * (1 - p) / n)
        assert np.all(np.abs(freq - p) < 3 * se + 1e-9)

    def test_chain_invariant(self):
        g = random_game(seed=4)
        mu = TabularPolicy.uniform(4, 2)
        nu = TabularPolicy.uniform(4, 2, "adversary")
        traj = rollout(g, mu, nu, 30, np.random.default_rng(3))
        for a, b in zip(traj.steps, traj.steps[1:]):
            assert a[4] == b[0]

    def test_broken_chain_rejected(self):
        with pytest.raises(ValueError):
            Trajectory([(0, 0, 0, 1.0, 1), (2, 0, 0, 1.0, 0)])
