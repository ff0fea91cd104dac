import math

import numpy as np
import pytest
from scipy import integrate, stats

from qarl.curriculum import (
    CurriculumState,
    GammaParams,
    PerformanceSamples,
    clip_force,
    curriculum_update,
    gamma_kl,
    gamma_log_pdf,
    gamma_pdf,
    gamma_sample,
    is_performance_estimate,
    linear_schedule,
    point_update,
)

EULER_GAMMA = 0.5772156649015329


def kl_by_quadrature(p: GammaParams, q: GammaParams) -> float:
    """Independent oracle: numerical integration of p(x) log(p(x)/q(x))."""

    def integrand(x):
        return gamma_pdf(p, x) * (gamma_log_pdf(p, x) - gamma_log_pdf(q, x))

    hi = stats.gamma.ppf(1.0 - 1e-12, a=p.k, scale=1.0 / p.rate)
    val, _ = integrate.quad(integrand, 1e-12, hi, limit=200)
    return val


class TestGammaMachinery:
    def test_pdf_matches_scipy(self):
        # oracle: scipy.stats.gamma with the scale parameterization
        xs = np.array([0.01, 0.5, 1.0, 3.0, 10.0])
        for k, rate in [(0.5, 2.0), (1.0, 1.0), (5.0, 0.3), (50.0, 1000.0)]:
            mine = gamma_pdf(GammaParams(k, rate), xs)
            ref = stats.gamma.pdf(xs, a=k, scale=1.0 / rate)
            np.testing.assert_allclose(mine, ref, rtol=1e-10)

    def test_pdf_rejects_nonpositive_x(self):
        with pytest.raises(ValueError):
            gamma_pdf(GammaParams(1.0, 1.0), [-0.5, 1.0])

    def test_kl_known_value(self):
        # KL(Gamma(2,1) || Gamma(1,1)) = psi(2) - 0 + ... = 1 - gamma_E
        got = gamma_kl(GammaParams(2.0, 1.0), GammaParams(1.0, 1.0))
        assert got == pytest.approx(1.0 - EULER_GAMMA, abs=1e-12)

    def test_kl_matches_quadrature(self):
        pairs = [
            (GammaParams(2.0, 1.0), GammaParams(1.0, 1.0)),
            (GammaParams(5.0, 3.0), GammaParams(2.0, 0.5)),
            (GammaParams(0.7, 2.0), GammaParams(1.3, 1.1)),
        ]
        for p, q in pairs:
            assert gamma_kl(p, q) == pytest.approx(kl_by_quadrature(p, q), abs=1e-8)

    def test_kl_self_zero(self):
        p = GammaParams(3.3, 0.8)
        assert gamma_kl(p, p) == pytest.approx(0.0, abs=1e-14)

    def test_kl_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = GammaParams(rng.uniform(0.2, 20), rng.uniform(0.1, 10))
            q = GammaParams(rng.uniform(0.2, 20), rng.uniform(0.1, 10))
            assert gamma_kl(p, q) >= 0.0

    def test_sampler_moments(self):
        rng = np.random.default_rng(1)
        p = GammaParams(50.0, 1000.0)
        draws = gamma_sample(p, rng, size=200_000)
        se_mean = math.sqrt(p.k / p.rate**2 / draws.size)
        assert abs(draws.mean() - p.mean) < 4 * se_mean
        assert abs(draws.var() - p.k / p.rate**2) < 0.05 * p.k / p.rate**2

    def test_params_must_be_positive(self):
        with pytest.raises(ValueError):
            GammaParams(0.0, 1.0)
        with pytest.raises(ValueError):
            GammaParams(1.0, -1.0)


class TestImportanceSampling:
    def test_identity_weights(self):
        p = GammaParams(3.0, 2.0)
        rng = np.random.default_rng(2)
        vals = gamma_sample(p, rng, size=100)
        rets = rng.normal(size=100)
        est = is_performance_estimate(PerformanceSamples(vals, rets), p, p)
        assert est == pytest.approx(float(rets.mean()), abs=1e-12)

    def test_recovers_candidate_mean(self):
        # returns equal to the sampled value: the IS estimate targets the
        # candidate's mean k/rate
        behavior = GammaParams(4.0, 2.0)
        candidate = GammaParams(5.0, 2.5)
        rng = np.random.default_rng(3)
        vals = gamma_sample(behavior, rng, size=400_000)
        est = is_performance_estimate(
            PerformanceSamples(vals, vals), candidate, behavior
        )
        assert est == pytest.approx(candidate.mean, rel=0.02)

    def test_rejects_empty(self):
        p = GammaParams(1.0, 1.0)
        with pytest.raises(ValueError):
            is_performance_estimate(PerformanceSamples([], []), p, p)


def make_samples(rng, behavior, returns_of, n=200):
    vals = gamma_sample(behavior, rng, size=n)
    return PerformanceSamples(vals, returns_of(vals))


class TestCurriculumUpdate:
    def setup_method(self):
        self.rng = np.random.default_rng(7)
        self.state = CurriculumState(
            current=GammaParams(50.0, 1000.0),
            target=GammaParams(1.0, 1000.0),
            xi=0.5,
            epsilon=0.5,
        )

    def test_feasible_advances_toward_target(self):
        samples = make_samples(self.rng, self.state.current, lambda v: np.ones_like(v))
        new = curriculum_update(self.state, samples)
        assert gamma_kl(new.current, self.state.target) < gamma_kl(
            self.state.current, self.state.target
        )

    def test_trust_region_respected(self):
        samples = make_samples(self.rng, self.state.current, lambda v: np.ones_like(v))
        new = curriculum_update(self.state, samples)
        assert gamma_kl(new.current, self.state.current) <= self.state.epsilon + 1e-4

    def test_infeasible_does_not_advance(self):
        # returns uniformly below xi: performance constraint cannot be met
        samples = make_samples(self.rng, self.state.current, lambda v: -np.ones_like(v))
        new = curriculum_update(self.state, samples)
        assert gamma_kl(new.current, self.state.current) <= self.state.epsilon + 1e-4
        assert gamma_kl(new.current, self.state.target) >= gamma_kl(
            self.state.current, self.state.target
        ) - self.state.epsilon

    def test_performance_gated(self):
        # returns high only for small difficulty values: the step must keep the
        # estimated performance above xi
        samples = make_samples(
            self.rng,
            self.state.current,
            lambda v: np.where(v < self.state.current.mean, 1.0, 0.0),
        )
        new = curriculum_update(self.state, samples)
        est = is_performance_estimate(samples, new.current, self.state.current)
        assert est >= self.state.xi - 0.05

    def test_min_samples_enforced(self):
        vals = gamma_sample(self.state.current, self.rng, size=10)
        with pytest.raises(ValueError):
            curriculum_update(self.state, PerformanceSamples(vals, np.ones(10)))

    def test_degenerate_samples_skip(self):
        vals = np.full(40, 0.05)
        new = curriculum_update(self.state, PerformanceSamples(vals, np.ones(40)))
        assert new.current == self.state.current

    def test_fix_rate_holds_rate(self):
        state = CurriculumState(
            current=GammaParams(50.0, 1000.0),
            target=GammaParams(1.0, 1000.0),
            xi=0.5,
            fix_rate=True,
        )
        samples = make_samples(self.rng, state.current, lambda v: np.ones_like(v))
        new = curriculum_update(state, samples)
        assert new.current.rate == state.current.rate
        assert new.current.k < state.current.k


class TestPointUpdate:
    def make_state(self, mean=0.05, target_mean=0.001, xi=0.5):
        k = 50.0
        return CurriculumState(
            current=GammaParams(k, k / mean),
            target=GammaParams(k, k / target_mean),
            xi=xi,
            variant="point",
        )

    def test_advances_when_performing(self):
        state = self.make_state()
        samples = PerformanceSamples(np.full(40, 0.05), np.ones(40))
        new = point_update(state, samples)
        assert new.current.mean < state.current.mean
        assert new.current.mean >= state.current.mean * math.exp(-state.epsilon) - 1e-12

    def test_holds_when_underperforming(self):
        state = self.make_state()
        samples = PerformanceSamples(np.full(40, 0.05), np.zeros(40))
        new = point_update(state, samples)
        assert new.current.mean == pytest.approx(state.current.mean)

    def test_never_overshoots_target(self):
        state = self.make_state(mean=0.0012, target_mean=0.001)
        samples = PerformanceSamples(np.full(40, 0.0012), np.ones(40))
        new = point_update(state, samples)
        assert new.current.mean == pytest.approx(0.001)

    def test_requires_point_variant(self):
        state = CurriculumState(
            current=GammaParams(1.0, 1.0), target=GammaParams(1.0, 1.0), xi=0.0
        )
        with pytest.raises(ValueError):
            point_update(state, PerformanceSamples(np.ones(5), np.ones(5)))


class TestSchedulesAndClipping:
    def test_linear_schedule_knots(self):
        assert linear_schedule(0, 100) == 0.0
        assert linear_schedule(20, 100) == 0.0
        assert linear_schedule(50, 100) == pytest.approx(0.5)
        assert linear_schedule(80, 100) == 1.0
        assert linear_schedule(100, 100) == 1.0

    def test_linear_schedule_bounds(self):
        with pytest.raises(ValueError):
            linear_schedule(-1, 100)
        with pytest.raises(ValueError):
            linear_schedule(101, 100)

    def test_clip_force(self):
        out = clip_force(np.array([-3.0, 0.2, 5.0]), 1.0)
        np.testing.assert_array_equal(out, [-1.0, 0.2, 1.0])

    def test_clip_force_negative_budget(self):
        with pytest.raises(ValueError):
            clip_force(np.array([0.0]), -0.1)


class TestStateValidation:
    def test_bad_mode(self):
        with pytest.raises(ValueError):
            CurriculumState(
                current=GammaParams(1, 1), target=GammaParams(1, 1), xi=0, mode="x"
            )

    def test_bad_variant(self):
        with pytest.raises(ValueError):
            CurriculumState(
                current=GammaParams(1, 1), target=GammaParams(1, 1), xi=0, variant="x"
            )

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            CurriculumState(
                current=GammaParams(1, 1), target=GammaParams(1, 1), xi=0, epsilon=0.0
            )
