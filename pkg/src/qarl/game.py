"""Finite two-player zero-sum Markov games: data model, policies, rollouts, returns.

The transition tensor has shape (S, A1, A2, S) and the reward tensor
(S, A1, A2, S); rewards are stated from the protagonist's point of view,
the adversary receives the negation at every step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MarkovGame",
    "TabularPolicy",
    "Trajectory",
    "policy_entropy",
    "discounted_return",
    "expected_return",
    "rollout",
]

_ATOL = 1e-12


class NumericError(RuntimeError):
    """Raised when a linear solve or iteration fails its residual check."""


@dataclass(frozen=True)
class MarkovGame:
    """Two-player zero-sum Markov game with dense tensors.

    transition[s, a1, a2] is a probability vector over next states;
    reward[s, a1, a2, s'] is the protagonist's reward for that transition.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    initial: np.ndarray
    horizon: int = 100

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        R = np.asarray(self.reward, dtype=float)
        iota = np.asarray(self.initial, dtype=float)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "initial", iota)
        if P.ndim != 4 or P.shape[0] != P.shape[3]:
            raise ValueError(f"transition must have shape (S,A1,A2,S), got {P.shape}")
        if R.shape != P.shape:
            raise ValueError(f"reward shape {R.shape} != transition shape {P.shape}")
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError(f"gamma must be in [0,1), got {self.gamma}")
        if not np.all(np.isfinite(R)):
            raise ValueError("rewards must be finite")
        if np.any(P < 0) or not np.allclose(P.sum(axis=3), 1.0, atol=_ATOL, rtol=0):
            raise ValueError("transition rows must be nonnegative and sum to 1")
        if iota.shape != (P.shape[0],) or np.any(iota < 0) or abs(iota.sum() - 1.0) > _ATOL:
            raise ValueError("initial distribution must be a probability vector over states")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        P.setflags(write=False)
        R.setflags(write=False)
        iota.setflags(write=False)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions1(self) -> int:
        return self.transition.shape[1]

    @property
    def n_actions2(self) -> int:
        return self.transition.shape[2]

    def expected_reward(self) -> np.ndarray:
        """Reward marginalized over next states, shape (S, A1, A2)."""
        return np.einsum("sabn,sabn->sab", self.transition, self.reward)

    def to_json_dict(self) -> dict:
        return {
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
            "gamma": self.gamma,
            "initial": self.initial.tolist(),
            "horizon": self.horizon,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MarkovGame":
        return cls(
            transition=np.array(d["transition"], dtype=float),
            reward=np.array(d["reward"], dtype=float),
            gamma=float(d["gamma"]),
            initial=np.array(d["initial"], dtype=float),
            horizon=int(d.get("horizon", 100)),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "MarkovGame":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class TabularPolicy:
    """Per-state mixed strategy; probs has shape (S, n_actions)."""

    probs: np.ndarray
    owner: str = "protagonist"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if self.owner not in ("protagonist", "adversary"):
            raise ValueError(f"unknown owner {self.owner!r}")
        if p.ndim != 2:
            raise ValueError("probs must be 2-D (states x actions)")
        if np.any(p < 0) or not np.allclose(p.sum(axis=1), 1.0, atol=_ATOL, rtol=0):
            raise ValueError("each policy row must be a probability vector")
        p.setflags(write=False)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int, owner: str = "protagonist"):
        return cls(np.full((n_states, n_actions), 1.0 / n_actions), owner)


@dataclass
class Trajectory:
    """Ordered transitions (s, a1, a2, r, s') plus the conditioning temperature."""

    steps: list[tuple[int, int, int, float, int]] = field(default_factory=list)
    conditioning_temperature: float = 0.0

    def __post_init__(self):
        for t in range(len(self.steps) - 1):
            if self.steps[t][4] != self.steps[t + 1][0]:
                raise ValueError(f"trajectory broken at step {t}: states do not chain")

    def rewards(self) -> np.ndarray:
        return np.array([s[3] for s in self.steps], dtype=float)

    def __len__(self) -> int:
        return len(self.steps)


def policy_entropy(policy: TabularPolicy, state: int) -> float:
    """Shannon entropy (nats) of the policy's action distribution at `state`."""
    row = policy.probs[state]
    return shannon_entropy(row)


def shannon_entropy(p: np.ndarray) -> float:
    """-sum p ln p with 0 ln 0 := 0."""
    p = np.asarray(p, dtype=float)
    mask = p > 0
    return float(-np.sum(p[mask] * np.log(p[mask])))


def discounted_return(traj: Trajectory, gamma: float) -> float:
    """Sum of gamma^t r_t over the trajectory."""
    if not (0.0 <= gamma < 1.0):
        raise ValueError("gamma must be in [0,1)")
    r = traj.rewards()
    if len(r) == 0:
        return 0.0
    return float(r @ np.power(gamma, np.arange(len(r))))


def joint_markov_chain(game: MarkovGame, mu: TabularPolicy, nu: TabularPolicy):
    """Induced Markov chain (P, r) under the joint policy, shapes (S,S) and (S,)."""
    joint = np.einsum("sa,sb->sab", mu.probs, nu.probs)
    P = np.einsum("sab,sabn->sn", joint, game.transition)
    r = np.einsum("sab,sab->s", joint, game.expected_reward())
    return P, r


def expected_return(game: MarkovGame, mu: TabularPolicy, nu: TabularPolicy) -> float:
    """Exact infinite-horizon discounted return from the initial distribution."""
    P, r = joint_markov_chain(game, mu, nu)
    A = np.eye(game.n_states) - game.gamma * P
    v = np.linalg.solve(A, r)
    resid = float(np.max(np.abs(A @ v - r)))
    if resid > 1e-8:
        raise NumericError(f"linear solve residual {resid:.2e} exceeds 1e-8")
    return float(game.initial @ v)


def state_values(game: MarkovGame, mu: TabularPolicy, nu: TabularPolicy) -> np.ndarray:
    """Per-state discounted values under the joint policy."""
    P, r = joint_markov_chain(game, mu, nu)
    return np.linalg.solve(np.eye(game.n_states) - game.gamma * P, r)


def rollout(
    game: MarkovGame,
    mu: TabularPolicy,
    nu: TabularPolicy,
    steps: int,
    rng: np.random.Generator,
    start_state: int | None = None,
    conditioning_temperature: float = 0.0,
) -> Trajectory:
    """Sample a trajectory of `steps` transitions under (mu, nu).

    Deterministic given the generator state. `start_state` overrides sampling
    from the initial distribution.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if start_state is None:
        s = int(rng.choice(game.n_states, p=game.initial))
    else:
        s = int(start_state)
    traj_steps = []
    for _ in range(steps):
        a1 = int(rng.choice(game.n_actions1, p=mu.probs[s]))
        a2 = int(rng.choice(game.n_actions2, p=nu.probs[s]))
        s_next = int(rng.choice(game.n_states, p=game.transition[s, a1, a2]))
        r = float(game.reward[s, a1, a2, s_next])
        traj_steps.append((s, a1, a2, r, s_next))
        s = s_next
    return Trajectory(traj_steps, conditioning_temperature)
