"""Automatic rationality curriculum over a gamma-distributed difficulty variable.

The curriculum keeps a gamma distribution over the adversary's temperature
(or, in force mode, its action budget), and after each training iteration
moves it toward a sharp target distribution, subject to a performance
threshold and a KL trust region. The constrained step is solved by
primal-dual gradient descent on the Lagrangian in log-parameter space.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

log = logging.getLogger(__name__)

__all__ = [
    "GammaParams",
    "CurriculumState",
    "PerformanceSamples",
    "gamma_pdf",
    "gamma_log_pdf",
    "gamma_sample",
    "gamma_kl",
    "is_performance_estimate",
    "curriculum_update",
    "point_update",
    "linear_schedule",
    "clip_force",
]

# Clamp ranges for the optimized log-parameters; generous but keeps the
# primal iterates out of special-function overflow territory.
_LOG_K_RANGE = (math.log(1e-3), math.log(1e7))
_LOG_RATE_RANGE = (math.log(1e-6), math.log(1e9))


@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution in shape/rate form; mean = k / rate."""

    k: float
    rate: float

    def __post_init__(self):
        if not (self.k > 0 and self.rate > 0):
            raise ValueError(f"gamma parameters must be positive, got {self}")

    @property
    def mean(self) -> float:
        return self.k / self.rate


@dataclass
class PerformanceSamples:
    """Difficulty values sampled from the behavior distribution, the estimated
    return under each, and the initial state of the estimating rollout."""

    values: np.ndarray
    returns: np.ndarray
    initial_states: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.returns = np.asarray(self.returns, dtype=float)
        if self.values.shape != self.returns.shape:
            raise ValueError("values and returns must have equal length")
        if np.any(self.values <= 0):
            raise ValueError("sampled difficulty values must be positive")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class CurriculumState:
    current: GammaParams
    target: GammaParams
    xi: float
    epsilon: float = 0.5
    lam: float = 0.0
    eta: float = 0.0
    mode: str = "temperature"
    variant: str = "full"
    fix_rate: bool = False
    min_samples: int = 30

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.lam < 0 or self.eta < 0:
            raise ValueError("multipliers must be nonnegative")
        if self.mode not in ("temperature", "force"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.variant not in ("full", "point", "linear", "reduced"):
            raise ValueError(f"unknown variant {self.variant!r}")


def gamma_log_pdf(p: GammaParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("gamma density is defined for x > 0 only")
    return (
        p.k * math.log(p.rate)
        + (p.k - 1.0) * np.log(x)
        - p.rate * x
        - special.gammaln(p.k)
    )


def gamma_pdf(p: GammaParams, x):
    """Density of Gamma(shape k, rate) at x > 0, computed in log space."""
    return np.exp(gamma_log_pdf(p, x))


def gamma_sample(p: GammaParams, rng: np.random.Generator, size=None):
    """Draws from Gamma(shape k, rate); numpy parameterizes by scale."""
    return rng.gamma(shape=p.k, scale=1.0 / p.rate, size=size)


def gamma_kl(p: GammaParams, q: GammaParams) -> float:
    """Closed-form KL(p || q) for gamma distributions in shape/rate form."""
    return float(
        (p.k - q.k) * special.digamma(p.k)
        - special.gammaln(p.k)
        + special.gammaln(q.k)
        + q.k * (math.log(p.rate) - math.log(q.rate))
        + p.k * (q.rate - p.rate) / p.rate
    )


def is_performance_estimate(
    samples: PerformanceSamples, candidate: GammaParams, behavior: GammaParams
) -> float:
    """Importance-sampled Monte-Carlo estimate of the expected return under
    `candidate`, using returns collected under `behavior`."""
    if len(samples) < 1:
        raise ValueError("need at least one sample")
    log_w = gamma_log_pdf(candidate, samples.values) - gamma_log_pdf(
        behavior, samples.values
    )
    if not np.all(np.isfinite(log_w)):
        raise ValueError("behavior density vanished at a sampled point")
    return float(np.mean(np.exp(log_w) * samples.returns))


def _clip_x(x: np.ndarray, fix_rate: bool) -> np.ndarray:
    x = x.copy()
    x[0] = min(max(x[0], _LOG_K_RANGE[0]), _LOG_K_RANGE[1])
    if not fix_rate:
        x[1] = min(max(x[1], _LOG_RATE_RANGE[0]), _LOG_RATE_RANGE[1])
    return x


def _params_of(x: np.ndarray, base: GammaParams, fix_rate: bool) -> GammaParams:
    rate = base.rate if fix_rate else math.exp(x[1])
    return GammaParams(math.exp(x[0]), rate)


def _grad_fd(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def _primal_dual(
    objective,
    constraints,
    x0: np.ndarray,
    fix_rate: bool,
    project=None,
    primal_steps: int = 25,
    dual_rounds: int = 10,
    primal_lr: float = 0.1,
    dual_lr: float = 0.05,
):
    """Minimize objective(x) s.t. constraints[i](x) <= 0 by alternating
    projected-gradient descent on the Lagrangian and multiplier ascent.

    `project` (if given) maps each primal iterate back into the feasible set
    of a hard constraint; the dual update clips constraint values so a brief
    excursion cannot blow a multiplier up for the rest of the solve."""
    x = x0.copy()
    lams = np.zeros(len(constraints))

    def lagrangian(z):
        val = objective(z)
        for lam_i, c in zip(lams, constraints):
            val += lam_i * c(z)
        return val

    for _ in range(dual_rounds):
        for _ in range(primal_steps):
            g = _grad_fd(lagrangian, x)
            norm = float(np.linalg.norm(g))
            if norm > 1.0:
                g = g / norm
            x = _clip_x(x - primal_lr * g, fix_rate)
            if project is not None:
                x = project(x)
        gaps = np.clip([c(x) for c in constraints], -0.5, 0.5)
        lams = np.maximum(0.0, lams + dual_lr * gaps)
    return x, lams


def _project_trust_region(
    x_old: np.ndarray, x_new: np.ndarray, base: GammaParams,
    fix_rate: bool, epsilon: float, steps: int = 40,
) -> np.ndarray:
    """Bisect along the segment from x_old to x_new so the step's KL from the
    old distribution lands inside the trust region."""
    old = _params_of(x_old, base, fix_rate)

    def kl_at(t):
        return gamma_kl(_params_of(x_old + t * (x_new - x_old), base, fix_rate), old)

    if kl_at(1.0) <= epsilon + 1e-6:
        return x_new
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if kl_at(mid) <= epsilon:
            lo = mid
        else:
            hi = mid
    return x_old + lo * (x_new - x_old)


def curriculum_update(
    state: CurriculumState, samples: PerformanceSamples
) -> CurriculumState:
    """KL-constrained curriculum step.

    Minimizes KL(p_new || target) subject to the importance-sampled expected
    return staying above xi and KL(p_new || p_old) staying inside the trust
    region. When no point of the trust region meets the performance
    constraint, the step instead maximizes the estimated return within the
    trust region, so the curriculum never advances at the protagonist's
    expense.
    """
    if len(samples) < state.min_samples:
        raise ValueError(
            f"need at least {state.min_samples} samples, got {len(samples)}"
        )
    if np.ptp(samples.values) == 0.0:
        log.warning("degenerate samples (all identical); curriculum update skipped")
        return state

    behavior = state.current
    fix_rate = state.fix_rate
    x0 = np.array(
        [math.log(behavior.k)] if fix_rate else [math.log(behavior.k), math.log(behavior.rate)]
    )
    if fix_rate:
        x0 = np.array([math.log(behavior.k)])

    def perf(x):
        return is_performance_estimate(samples, _params_of(x, behavior, fix_rate), behavior)

    def kl_target(x):
        return gamma_kl(_params_of(x, behavior, fix_rate), state.target)

    def kl_old(x):
        return gamma_kl(_params_of(x, behavior, fix_rate), behavior)

    def project(z, steps=20):
        return _project_trust_region(x0, z, behavior, fix_rate, state.epsilon, steps)

    x_new, lams = _primal_dual(
        objective=kl_target,
        constraints=[lambda z: state.xi - perf(z), lambda z: kl_old(z) - state.epsilon],
        x0=x0,
        fix_rate=fix_rate,
        project=project,
    )
    x_new = project(x_new, steps=60)

    if perf(x_new) < state.xi:
        # performance constraint unattainable inside the trust region:
        # maximize the estimated return instead of chasing the target
        x_new, lams = _primal_dual(
            objective=lambda z: -perf(z),
            constraints=[lambda z: kl_old(z) - state.epsilon],
            x0=x0,
            fix_rate=fix_rate,
            project=project,
        )
        lams = np.array([state.lam, lams[0]])
        x_new = project(x_new, steps=60)

    new_params = _params_of(x_new, behavior, fix_rate)
    return replace(
        state,
        current=new_params,
        lam=float(lams[0]),
        eta=float(lams[-1]),
    )


def point_update(state: CurriculumState, samples: PerformanceSamples) -> CurriculumState:
    """Point-mass ablation: the difficulty variable is a scalar rather than a
    distribution. Moves the scalar one capped log-step toward the target mean
    when the mean return clears xi, otherwise holds (temperature mode) or
    backs off toward easier values (never past the current value in the
    feasible direction)."""
    if state.variant != "point":
        raise ValueError("point_update requires variant='point'")
    if len(samples) < 1:
        raise ValueError("need at least one sample")
    current_mean = state.current.mean
    target_mean = state.target.mean
    mean_return = float(np.mean(samples.returns))
    if mean_return >= state.xi:
        step = state.epsilon  # log-space step cap standing in for the trust region
        if target_mean < current_mean:
            new_mean = max(target_mean, current_mean * math.exp(-step))
        else:
            new_mean = min(target_mean, current_mean * math.exp(step))
    else:
        new_mean = current_mean
    k_point = state.current.k
    return replace(state, current=GammaParams(k_point, k_point / new_mean))


def linear_schedule(
    iteration: int, total: int, start_frac: float = 0.2, end_frac: float = 0.8
) -> float:
    """Piecewise-linear ramp: 0 before start_frac*total, 1 after end_frac*total."""
    if not (0 <= iteration <= total):
        raise ValueError("iteration must lie in [0, total]")
    start = start_frac * total
    end = end_frac * total
    if iteration <= start:
        return 0.0
    if iteration >= end:
        return 1.0
    return (iteration - start) / (end - start)


def clip_force(action: np.ndarray, budget: float) -> np.ndarray:
    """Clamp every component of the adversary action to [-budget, budget]."""
    if budget < 0:
        raise ValueError("force budget must be nonnegative")
    return np.clip(np.asarray(action, dtype=float), -budget, budget)
