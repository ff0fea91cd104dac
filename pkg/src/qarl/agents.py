"""Temperature-conditioned tabular soft-Q learners.

Each agent keeps one Q-table slice per temperature bin, samples Boltzmann
actions at the conditioning temperature, and regresses toward the soft
(log-sum-exp) bootstrap target. The adversary holds the negated reward and
plays softmax of its negated values. The protagonist's temperature follows
a target-entropy controller; the adversary's is set externally (by the
curriculum, or auto-tuned in force mode).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Transition",
    "SoftQTable",
    "ReplayBuffer",
    "EntropyTuner",
    "temperature_bin",
    "log_spaced_bins",
]


def log_spaced_bins(low: float, high: float, n: int = 8) -> np.ndarray:
    """Edges of n log-spaced temperature bins spanning [low, high]."""
    if not (0 < low < high):
        raise ValueError("need 0 < low < high")
    return np.geomspace(low, high, n + 1)


def temperature_bin(tau: float, bins: np.ndarray) -> int:
    """Index of the bin whose geometric center is nearest to tau in log space;
    clamps outside the covered range."""
    bins = np.asarray(bins, dtype=float)
    if bins.size < 2:
        raise ValueError("need at least one bin")
    centers = np.sqrt(bins[:-1] * bins[1:])
    if tau <= 0:
        return 0
    return int(np.argmin(np.abs(np.log(tau) - np.log(centers))))


@dataclass
class Transition:
    state: int
    action: int
    reward: float
    next_state: int
    temperature: float
    done: bool = False


class ReplayBuffer:
    """Bounded FIFO transition store."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.entries: deque[Transition] = deque(maxlen=capacity)

    def add(self, tr: Transition) -> None:
        self.entries.append(tr)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        idx = rng.integers(0, len(self.entries), size=batch_size)
        return [self.entries[int(i)] for i in idx]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class EntropyTuner:
    """SAC-style temperature controller, updated in log space so the
    temperature stays positive: entropy below target raises it."""

    beta: float
    target_entropy: float
    learn_rate: float = 3e-4

    def update(self, observed_entropy: float) -> None:
        if observed_entropy < 0:
            raise ValueError("entropy cannot be negative")
        self.beta = float(
            np.exp(np.log(self.beta) + self.learn_rate * (self.target_entropy - observed_entropy))
        )


class SoftQTable:
    """Per-temperature-bin tabular soft Q-function, shape (bins, S, A)."""

    def __init__(
        self,
        n_states: int,
        n_actions: int,
        bins: np.ndarray,
        owner: str = "protagonist",
        learn_rate: float = 0.1,
        lr_decay: bool = True,
    ):
        if owner not in ("protagonist", "adversary"):
            raise ValueError(f"unknown owner {owner!r}")
        if not (0 < learn_rate <= 1):
            raise ValueError("learn_rate must be in (0,1]")
        self.bins = np.asarray(bins, dtype=float)
        self.owner = owner
        self.learn_rate = learn_rate
        self.lr_decay = lr_decay
        n_bins = self.bins.size - 1
        self.q = np.zeros((n_bins, n_states, n_actions))
        self.visits = np.zeros((n_bins, n_states, n_actions), dtype=np.int64)
        self.clamp_warnings = 0

    @property
    def n_states(self) -> int:
        return self.q.shape[1]

    @property
    def n_actions(self) -> int:
        return self.q.shape[2]

    def _bin(self, tau: float) -> int:
        b = temperature_bin(tau, self.bins)
        if tau < self.bins[0] or tau > self.bins[-1]:
            self.clamp_warnings += 1
        return b

    def _effective_tau(self, tau: float) -> float:
        return float(min(max(tau, self.bins[0]), self.bins[-1]))

    def action_probs(
        self, state: int, conditioning: float, temperature: float | None = None
    ) -> np.ndarray:
        """Boltzmann action distribution; the adversary negates its values,
        playing exp(-Q/alpha).

        `conditioning` selects the temperature bin; the softmax temperature
        defaults to the same value but may differ (e.g. the protagonist
        conditions on the adversary's temperature while sampling at its own).
        Both are clamped to the bin coverage.
        """
        if conditioning <= 0:
            raise ValueError("conditioning value must be strictly positive")
        temp = conditioning if temperature is None else temperature
        if temp <= 0:
            raise ValueError("temperature must be strictly positive")
        b = self._bin(conditioning)
        tau = self._effective_tau(temp)
        z = self.q[b, state] / tau
        if self.owner == "adversary":
            z = -z
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def sample_action(self, state: int, temperature: float, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_actions, p=self.action_probs(state, temperature)))

    def greedy_action(self, state: int, temperature: float | None = None) -> int:
        b = 0 if temperature is None else self._bin(temperature)
        q = self.q[b, state]
        return int(np.argmin(q) if self.owner == "adversary" else np.argmax(q))

    def soft_value(self, b: int, state: int, tau: float) -> float:
        """tau * log-sum-exp of the bin's action values (negated for the
        adversary, whose objective is minimization)."""
        q = self.q[b, state]
        sign = -1.0 if self.owner == "adversary" else 1.0
        z = sign * q / tau
        m = z.max()
        return float(sign * tau * (m + np.log(np.exp(z - m).sum())))

    def update(
        self, batch: list[Transition], gamma: float, temperature: float | None = None
    ) -> None:
        """Soft-Q regression: target r + gamma * softvalue(s'), zero bootstrap
        on terminal transitions; rewards arrive already signed per owner.

        The entry's stored temperature picks the bin; `temperature` overrides
        the soft-value temperature (used when the agent's own temperature
        differs from the conditioning value).
        """
        if not batch:
            raise ValueError("batch must be non-empty")
        for tr in batch:
            b = self._bin(tr.temperature)
            tau = self._effective_tau(
                tr.temperature if temperature is None else temperature
            )
            target = tr.reward
            if not tr.done:
                target += gamma * self.soft_value(b, tr.next_state, tau)
            self.visits[b, tr.state, tr.action] += 1
            lr = self.learn_rate
            if self.lr_decay:
                lr = lr / np.sqrt(self.visits[b, tr.state, tr.action])
            self.q[b, tr.state, tr.action] += lr * (target - self.q[b, tr.state, tr.action])

    def to_json_dict(self) -> dict:
        return {
            "bins": self.bins.tolist(),
            "owner": self.owner,
            "learn_rate": self.learn_rate,
            "lr_decay": self.lr_decay,
            "q": self.q.tolist(),
            "visits": self.visits.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SoftQTable":
        q = np.array(d["q"], dtype=float)
        table = cls(
            n_states=q.shape[1],
            n_actions=q.shape[2],
            bins=np.array(d["bins"], dtype=float),
            owner=d["owner"],
            learn_rate=d["learn_rate"],
            lr_decay=d.get("lr_decay", True),
        )
        table.q = q
        table.visits = np.array(d["visits"], dtype=np.int64)
        return table

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "SoftQTable":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))
