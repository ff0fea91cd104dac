"""Training and evaluation orchestration for the adversarial curricula.

Implements the alternating protagonist/adversary training loop shared by all
algorithms (QARL and its ablations, the force-budget curriculum, RARL, plain
SAC, and the linear force schedule), plus the two evaluation protocols:
return against a freshly trained adversary, and a no-adversary robustness
sweep over perturbed environments.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from .agents import EntropyTuner, ReplayBuffer, SoftQTable, Transition, log_spaced_bins
from .curriculum import (
    CurriculumState,
    GammaParams,
    PerformanceSamples,
    curriculum_update,
    gamma_sample,
    linear_schedule,
    point_update,
)
from .envs import (
    GarnetSpec,
    ParamSweep,
    PendulumSpec,
    WindyGridSpec,
    build_game,
    perturb,
    spec_from_json_dict,
    spec_to_json_dict,
)
from .game import MarkovGame

ALGORITHMS = (
    "qarl",
    "force_curriculum",
    "rarl",
    "sac",
    "cat_linear",
    "qarl_point",
    "qarl_linear",
    "qarl_reduced",
)

RATIONAL_TEMPERATURE = 1e-4


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    algorithm: str
    env: WindyGridSpec | PendulumSpec | GarnetSpec
    iterations: int = 200
    episodes_per_agent_per_iteration: int = 5
    eval_rollouts: int = 10
    n_samples: int = 5
    mc_rollouts: int = 30
    xi: float | None = None
    epsilon: float = 0.5
    seeds: tuple[int, ...] = (0,)
    # curriculum defaults: concentration 50 -> 1 at fixed rate 1000
    k_initial: float = 50.0
    k_target: float = 1.0
    rate: float = 1000.0
    fix_rate: bool = False
    # agent hyperparameters (tabular adaptation)
    learn_rate: float = 0.1
    n_temperature_bins: int = 8
    replay_capacity: int = 100_000
    batch_size: int = 32
    warmup_transitions: int = 5000
    update_interval: int = 1
    initial_beta: float = 5e-3
    tuner_learn_rate: float = 1e-2
    target_entropy_fraction: float = 0.5
    greedy_adversary: bool = False
    f_max: float = 1.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.xi is None:
            self.xi = default_xi(self.env)

    @property
    def curriculum_mode(self) -> str:
        return "force" if self.algorithm in ("force_curriculum", "cat_linear") else "temperature"

    def to_json_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "env"}
        d["seeds"] = list(self.seeds)
        d["env"] = spec_to_json_dict(self.env)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        try:
            env = spec_from_json_dict(d.pop("env"))
        except KeyError as err:
            raise ConfigError(f"config missing field {err}") from err
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "seeds" in d:
            d["seeds"] = tuple(d["seeds"])
        return cls(env=env, **d)


def default_xi(env) -> float:
    if isinstance(env, WindyGridSpec):
        return 0.3
    if isinstance(env, PendulumSpec):
        return 40.0
    return 0.0


@dataclass
class IterationRecord:
    iteration: int
    mean_return: float
    sampled_values: list[float]
    k: float
    rate: float
    lam: float
    eta: float
    beta: float
    adversary_entropy: float
    performance_estimate: float

    def to_json_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunRecord:
    algorithm: str
    seed: int
    iterations: list[IterationRecord]
    protagonist: SoftQTable
    adversary: SoftQTable | None
    wall_clock: float = 0.0

    def to_json_dict(self, include_timing: bool = False) -> dict:
        # timing is excluded by default so reruns of the same (config, seed)
        # serialize bit-identically
        d = {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "iterations": [it.to_json_dict() for it in self.iterations],
            "protagonist": self.protagonist.to_json_dict(),
            "adversary": self.adversary.to_json_dict() if self.adversary else None,
        }
        if include_timing:
            d["wall_clock"] = self.wall_clock
        return d


@dataclass
class EvalReport:
    return_vs_trained_adversary: dict[int, float]
    robustness_grid: np.ndarray | None
    sweep: ParamSweep | None
    aggregate_mean: float
    aggregate_std: float
    adversary_training_iterations: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "return_vs_trained_adversary": {
                str(k): v for k, v in self.return_vs_trained_adversary.items()
            },
            "robustness_grid": (
                self.robustness_grid.tolist() if self.robustness_grid is not None else None
            ),
            "sweep": (
                {
                    "axis1_name": self.sweep.axis1_name,
                    "axis1_multipliers": list(self.sweep.axis1_multipliers),
                    "axis2_name": self.sweep.axis2_name,
                    "axis2_multipliers": list(self.sweep.axis2_multipliers),
                }
                if self.sweep
                else None
            ),
            "aggregate_mean": self.aggregate_mean,
            "aggregate_std": self.aggregate_std,
            "adversary_training_iterations": self.adversary_training_iterations,
        }


class _FastGame:
    """Cumulative-probability view of a MarkovGame for fast stepping."""

    def __init__(self, game: MarkovGame):
        self.game = game
        self.cum = np.cumsum(game.transition, axis=3)
        self.reward = game.reward
        init_cum = np.cumsum(game.initial)
        self._init_cum = init_cum

    def reset(self, rng: np.random.Generator) -> int:
        return int(np.searchsorted(self._init_cum, rng.random(), side="right"))

    def step(self, s: int, a1: int, a2: int, rng: np.random.Generator):
        s_next = int(np.searchsorted(self.cum[s, a1, a2], rng.random(), side="right"))
        return s_next, float(self.reward[s, a1, a2, s_next])


def null_adversary_action(env) -> int:
    """Index of the adversary action that applies no disturbance."""
    if isinstance(env, WindyGridSpec):
        if "none" not in env.adversary_actions:
            raise ConfigError("grid spec has no 'none' adversary action")
        return env.adversary_actions.index("none")
    if isinstance(env, PendulumSpec):
        return 1  # zero torque
    return 0


def _sample_from_cum(probs: np.ndarray, rng: np.random.Generator) -> int:
    return int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))


class _TrainingRun:
    """Stateful single-seed training loop shared by every algorithm."""

    def __init__(self, config: ExperimentConfig, seed: int):
        self.config = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.env = config.env
        self.base_game = build_game(config.env)
        self.fast = _FastGame(self.base_game)
        mean0 = config.k_initial / config.rate

        if config.curriculum_mode == "force":
            high = max(config.f_max, mean0)
        else:
            high = mean0
        self.bins = log_spaced_bins(1e-4 * high, high, config.n_temperature_bins)

        A1 = self.base_game.n_actions1
        A2 = self.base_game.n_actions2
        self.protagonist = SoftQTable(
            self.base_game.n_states, A1, self.bins, "protagonist", config.learn_rate
        )
        self.adversary = SoftQTable(
            self.base_game.n_states, A2, self.bins, "adversary", config.learn_rate
        )
        self.buf1 = ReplayBuffer(config.replay_capacity)
        self.buf2 = ReplayBuffer(config.replay_capacity)
        self.tuner = EntropyTuner(
            config.initial_beta,
            config.target_entropy_fraction * math.log(A1),
            config.tuner_learn_rate,
        )
        self.adv_tuner = EntropyTuner(
            config.initial_beta,
            config.target_entropy_fraction * math.log(A2),
            config.tuner_learn_rate,
        )
        self.null_a2 = null_adversary_action(config.env)
        self.mean0 = mean0

        mode = config.curriculum_mode
        if mode == "force":
            target = GammaParams(config.rate * config.f_max, config.rate)
        else:
            target = GammaParams(config.k_target, config.rate)
        variant = {
            "qarl_point": "point",
            "qarl_linear": "linear",
            "qarl_reduced": "reduced",
        }.get(config.algorithm, "full")
        self.curriculum = CurriculumState(
            current=GammaParams(config.k_initial, config.rate),
            target=target,
            xi=config.xi,
            epsilon=config.epsilon,
            mode=mode,
            variant=variant,
            fix_rate=config.fix_rate,
            min_samples=min(30, config.mc_rollouts),
        )

    # -- per-iteration difficulty values ------------------------------------

    def sampled_values(self, iteration: int) -> list[float]:
        cfg = self.config
        if cfg.algorithm in ("qarl", "force_curriculum"):
            n = cfg.n_samples
            return [float(gamma_sample(self.curriculum.current, self.rng)) for _ in range(n)]
        if cfg.algorithm == "qarl_reduced":
            return [float(gamma_sample(self.curriculum.current, self.rng))]
        if cfg.algorithm == "qarl_point":
            return [self.curriculum.current.mean] * cfg.n_samples
        if cfg.algorithm == "qarl_linear":
            frac = linear_schedule(iteration, cfg.iterations)
            tau = (1.0 - frac) * self.mean0 + frac * self.curriculum.target.mean
            return [tau] * cfg.n_samples
        if cfg.algorithm == "cat_linear":
            frac = linear_schedule(iteration, cfg.iterations)
            return [frac * cfg.f_max] * cfg.n_samples
        # rarl / sac: rational adversary temperature, no curriculum
        return [RATIONAL_TEMPERATURE] * cfg.n_samples

    # -- environment handling for force budgets -----------------------------

    def game_for_value(self, value: float) -> _FastGame:
        """In force mode the sampled budget clips the adversary's authority,
        which for tensor environments means rebuilding the game."""
        if self.config.curriculum_mode != "force":
            return self.fast
        if isinstance(self.env, PendulumSpec):
            f = min(value, self.env.f_max)
            return _FastGame(build_game(dc_replace(self.env, f_max=f)))
        if isinstance(self.env, WindyGridSpec):
            scale = min(value / self.config.f_max, 1.0)
            return _FastGame(
                build_game(
                    dc_replace(self.env, wind_strength=self.env.wind_strength * scale)
                )
            )
        raise ConfigError("force curriculum requires a pendulum or grid environment")

    # -- temperatures -------------------------------------------------------

    def adversary_temperature(self, value: float) -> float:
        cfg = self.config
        if cfg.curriculum_mode == "force":
            return self.adv_tuner.beta
        if cfg.algorithm in ("rarl", "cat_linear"):
            return RATIONAL_TEMPERATURE
        return value

    # -- acting -------------------------------------------------------------

    def protagonist_action(self, s: int, conditioning: float) -> int:
        conditioning = max(conditioning, self.bins[0])  # zero force budget
        probs = self.protagonist.action_probs(s, conditioning, self.tuner.beta)
        return _sample_from_cum(probs, self.rng)

    def adversary_action(self, s: int, conditioning: float, temperature: float) -> int:
        conditioning = max(conditioning, self.bins[0])
        if self.config.algorithm == "sac":
            return self.null_a2
        if self.config.greedy_adversary:
            return self.adversary.greedy_action(s, conditioning)
        probs = self.adversary.action_probs(s, conditioning, temperature)
        return _sample_from_cum(probs, self.rng)

    # -- episodes -----------------------------------------------------------

    def run_episode(self, value: float, train: str | None) -> float:
        """One episode conditioned on the sampled difficulty value.

        `train` is 'protagonist', 'adversary', or None (evaluation only).
        Returns the protagonist's discounted return.
        """
        cfg = self.config
        fast = self.game_for_value(value)
        game = fast.game
        adv_temp = self.adversary_temperature(value)
        cond = max(value, self.bins[0])  # a zero force budget still needs a bin
        s = fast.reset(self.rng)
        disc = 1.0
        total = 0.0
        entropies = []
        for t in range(game.horizon):
            a1 = self.protagonist_action(s, cond)
            a2 = self.adversary_action(s, cond, adv_temp)
            s_next, r = fast.step(s, a1, a2, self.rng)
            total += disc * r
            disc *= game.gamma
            if train == "adversary":
                self.buf2.add(Transition(s, a2, -r, s_next, cond))
                self._learn(self.adversary, self.buf2, game.gamma, adv_temp, t)
                if cfg.curriculum_mode == "force":
                    entropies.append(self._policy_entropy(self.adversary, s, cond, adv_temp))
            elif train == "protagonist":
                self.buf1.add(Transition(s, a1, r, s_next, cond))
                self._learn(self.protagonist, self.buf1, game.gamma, self.tuner.beta, t)
                entropies.append(
                    self._policy_entropy(self.protagonist, s, cond, self.tuner.beta)
                )
            s = s_next
        if train == "protagonist" and entropies:
            self.tuner.update(float(np.mean(entropies)))
        if train == "adversary" and cfg.curriculum_mode == "force" and entropies:
            self.adv_tuner.update(float(np.mean(entropies)))
        return total

    @staticmethod
    def _policy_entropy(table: SoftQTable, s: int, conditioning: float, temp: float) -> float:
        p = table.action_probs(s, conditioning, temp)
        mask = p > 0
        return float(-np.sum(p[mask] * np.log(p[mask])))

    def _learn(self, table: SoftQTable, buf: ReplayBuffer, gamma: float,
               temperature: float, t: int) -> None:
        cfg = self.config
        if len(buf) < cfg.warmup_transitions:
            return
        if t % cfg.update_interval != 0:
            return
        batch = buf.sample(min(cfg.batch_size, len(buf)), self.rng)
        table.update(batch, gamma, temperature=temperature)

    # -- curriculum ---------------------------------------------------------

    def _performance_samples(self, training_values: list[float]) -> PerformanceSamples:
        cfg = self.config
        M = cfg.mc_rollouts
        if len(training_values) >= M:
            values = list(training_values[:M])
        else:
            values = [
                float(gamma_sample(self.curriculum.current, self.rng)) for _ in range(M)
            ]
        returns = [self.run_episode(v, train=None) for v in values]
        return PerformanceSamples(np.array(values), np.array(returns))

    def update_curriculum(self, training_values: list[float]) -> float:
        cfg = self.config
        if cfg.algorithm in ("rarl", "sac", "cat_linear", "qarl_linear"):
            return math.nan
        samples = self._performance_samples(training_values)
        estimate = float(np.mean(samples.returns))
        try:
            if self.curriculum.variant == "point":
                self.curriculum = point_update(self.curriculum, samples)
            else:
                self.curriculum = curriculum_update(self.curriculum, samples)
        except ValueError:
            pass  # degenerate or short sample set: keep the old distribution
        return estimate

    # -- main loop ----------------------------------------------------------

    def run(self) -> RunRecord:
        cfg = self.config
        start = time.perf_counter()
        records = []
        episodes_per_value = max(1, cfg.episodes_per_agent_per_iteration // cfg.n_samples)
        for iteration in range(cfg.iterations):
            values = self.sampled_values(iteration)
            if cfg.algorithm != "sac":
                for v in values:
                    for _ in range(episodes_per_value):
                        self.run_episode(v, train="adversary")
            returns = []
            for v in values:
                for _ in range(episodes_per_value):
                    returns.append(self.run_episode(v, train="protagonist"))
            estimate = self.update_curriculum(values)
            adv_ent = self._mean_adversary_entropy(values[0])
            records.append(
                IterationRecord(
                    iteration=iteration,
                    mean_return=float(np.mean(returns)),
                    sampled_values=[float(v) for v in values],
                    k=self.curriculum.current.k,
                    rate=self.curriculum.current.rate,
                    lam=self.curriculum.lam,
                    eta=self.curriculum.eta,
                    beta=self.tuner.beta,
                    adversary_entropy=adv_ent,
                    performance_estimate=estimate,
                )
            )
        return RunRecord(
            algorithm=cfg.algorithm,
            seed=self.seed,
            iterations=records,
            protagonist=self.protagonist,
            adversary=None if cfg.algorithm == "sac" else self.adversary,
            wall_clock=time.perf_counter() - start,
        )

    def _mean_adversary_entropy(self, value: float) -> float:
        temp = self.adversary_temperature(value)
        value = max(value, self.bins[0])
        ents = [
            self._policy_entropy(self.adversary, s, value, temp)
            for s in range(min(self.base_game.n_states, 64))
        ]
        return float(np.mean(ents))


def train(config: ExperimentConfig, seed: int) -> RunRecord:
    return _TrainingRun(config, seed).run()


def train_qarl(config: ExperimentConfig, seed: int = 0) -> RunRecord:
    if config.algorithm != "qarl":
        raise ConfigError("train_qarl requires algorithm='qarl'")
    return train(config, seed)


def train_force_curriculum(config: ExperimentConfig, seed: int = 0) -> RunRecord:
    if config.algorithm != "force_curriculum":
        raise ConfigError("train_force_curriculum requires algorithm='force_curriculum'")
    if not isinstance(config.env, (PendulumSpec, WindyGridSpec)):
        raise ConfigError("force curriculum requires a pendulum or grid environment")
    return train(config, seed)


def train_rarl(config: ExperimentConfig, seed: int = 0) -> RunRecord:
    if config.algorithm != "rarl":
        raise ConfigError("train_rarl requires algorithm='rarl'")
    return train(config, seed)


def train_sac(config: ExperimentConfig, seed: int = 0) -> RunRecord:
    if config.algorithm != "sac":
        raise ConfigError("train_sac requires algorithm='sac'")
    return train(config, seed)


def train_cat_linear(config: ExperimentConfig, seed: int = 0) -> RunRecord:
    if config.algorithm != "cat_linear":
        raise ConfigError("train_cat_linear requires algorithm='cat_linear'")
    return train(config, seed)


def eval_conditioning(config: ExperimentConfig) -> float:
    """Conditioning value for a frozen protagonist at evaluation time: the
    difficulty its curriculum trained it toward (the target temperature in
    temperature mode, the full budget in force mode); baselines without a
    curriculum always trained at the rational temperature."""
    if config.algorithm in ("rarl", "sac"):
        return RATIONAL_TEMPERATURE
    if config.curriculum_mode == "force":
        return config.f_max
    return config.k_target / config.rate


def evaluate_protagonist(
    protagonist: SoftQTable,
    config: ExperimentConfig,
    seed: int,
    game: MarkovGame | None = None,
    adversary: SoftQTable | None = None,
    adversary_temperature: float = RATIONAL_TEMPERATURE,
    conditioning: float | None = None,
    adversary_conditioning: float = RATIONAL_TEMPERATURE,
) -> float:
    """Mean discounted return over eval_rollouts episodes; a missing adversary
    plays the null action."""
    rng = np.random.default_rng(seed)
    fast = _FastGame(game if game is not None else build_game(config.env))
    null_a2 = null_adversary_action(config.env)
    cond = conditioning if conditioning is not None else eval_conditioning(config)
    beta = config.initial_beta
    totals = []
    for _ in range(config.eval_rollouts):
        s = fast.reset(rng)
        disc, total = 1.0, 0.0
        for _ in range(fast.game.horizon):
            a1 = _sample_from_cum(protagonist.action_probs(s, cond, beta), rng)
            if adversary is None:
                a2 = null_a2
            else:
                a2 = _sample_from_cum(
                    adversary.action_probs(s, adversary_conditioning, adversary_temperature),
                    rng,
                )
            s, r = fast.step(s, a1, a2, rng)
            total += disc * r
            disc *= fast.game.gamma
        totals.append(total)
    return float(np.mean(totals))


def eval_vs_trained_adversary(
    protagonist: SoftQTable, config: ExperimentConfig, seed: int = 0
) -> float:
    """Freeze the protagonist, train a fresh fully rational adversary against
    it for half the training budget, and report the mean protagonist return."""
    if protagonist.n_states != build_game(config.env).n_states:
        raise ConfigError("checkpoint does not match the configured environment")
    rng = np.random.default_rng(seed)
    fast = _FastGame(build_game(config.env))
    game = fast.game
    adversary = SoftQTable(
        game.n_states, game.n_actions2, protagonist.bins, "adversary", config.learn_rate
    )
    buf = ReplayBuffer(config.replay_capacity)
    protag_cond = eval_conditioning(config)
    adv_cond = RATIONAL_TEMPERATURE
    beta = config.initial_beta
    adv_iters = max(1, config.iterations // 2)
    episodes = max(1, config.episodes_per_agent_per_iteration)
    for _ in range(adv_iters):
        for _ in range(episodes):
            s = fast.reset(rng)
            for t in range(game.horizon):
                a1 = _sample_from_cum(protagonist.action_probs(s, protag_cond, beta), rng)
                a2 = _sample_from_cum(
                    adversary.action_probs(s, adv_cond, RATIONAL_TEMPERATURE), rng
                )
                s_next, r = fast.step(s, a1, a2, rng)
                buf.add(Transition(s, a2, -r, s_next, adv_cond))
                if len(buf) >= config.warmup_transitions and t % config.update_interval == 0:
                    batch = buf.sample(min(config.batch_size, len(buf)), rng)
                    adversary.update(batch, game.gamma, temperature=RATIONAL_TEMPERATURE)
                s = s_next
    return evaluate_protagonist(
        protagonist,
        config,
        seed + 1,
        game=game,
        adversary=adversary,
        conditioning=protag_cond,
        adversary_conditioning=adv_cond,
    )


def robustness_sweep(
    protagonist: SoftQTable,
    sweep: ParamSweep,
    config: ExperimentConfig,
    seed: int = 0,
) -> EvalReport:
    """Rebuild the environment at every multiplier pair and evaluate the frozen
    protagonist with a null adversary."""
    grid = np.zeros((len(sweep.axis1_multipliers), len(sweep.axis2_multipliers)))
    for i, m1 in enumerate(sweep.axis1_multipliers):
        for j, m2 in enumerate(sweep.axis2_multipliers):
            spec = perturb(config.env, {sweep.axis1_name: m1, sweep.axis2_name: m2})
            game = build_game(spec)
            grid[i, j] = evaluate_protagonist(
                protagonist, config, seed, game=game, adversary=None
            )
    return EvalReport(
        return_vs_trained_adversary={},
        robustness_grid=grid,
        sweep=sweep,
        aggregate_mean=float(grid.mean()),
        aggregate_std=float(grid.std()),
    )
