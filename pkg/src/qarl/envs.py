"""Small adversarial environments built as exact Markov game tensors.

Three families: a windy grid navigation task where the adversary pushes the
agent inside a wind zone, a discretized pendulum swing-up where the adversary
applies torque, and random Garnet games used as solver fixtures. All builders
emit dense MarkovGame tensors, so every environment can be solved exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .game import MarkovGame

__all__ = [
    "WindyGridSpec",
    "PendulumSpec",
    "GarnetSpec",
    "ParamSweep",
    "build_windy_grid",
    "build_pendulum",
    "build_garnet",
    "build_game",
    "perturb",
    "spec_to_json_dict",
    "spec_from_json_dict",
    "EnvConfigError",
]

_DIRS = {
    "up": (0, -1),
    "down": (0, 1),
    "left": (-1, 0),
    "right": (1, 0),
    "none": (0, 0),
}


class EnvConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WindyGridSpec:
    width: int = 8
    height: int = 8
    start: tuple[int, int] = (0, 3)
    goal: tuple[int, int] = (7, 3)
    wind_zone: tuple[int, int, int, int] = (4, 0, 7, 7)  # inclusive x0,y0,x1,y1
    wind_strength: float = 0.6
    move_success: float = 0.9
    slip: float = 0.1
    adversary_actions: tuple[str, ...] = ("none", "left", "right", "up", "down")
    step_reward: float = -0.01
    goal_reward: float = 1.0
    gamma: float = 0.9
    horizon: int = 100

    def __post_init__(self):
        for name in ("wind_strength", "move_success", "slip"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise EnvConfigError(f"{name} must be in [0,1], got {v}")
        if self.move_success + self.slip > 1.0 + 1e-12:
            raise EnvConfigError("move_success + slip must not exceed 1")
        for name in ("start", "goal"):
            x, y = getattr(self, name)
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise EnvConfigError(f"{name} outside grid")
        x0, y0, x1, y1 = self.wind_zone
        if not (0 <= x0 <= x1 < self.width and 0 <= y0 <= y1 < self.height):
            raise EnvConfigError("wind_zone outside grid")
        for a in self.adversary_actions:
            if a not in _DIRS:
                raise EnvConfigError(f"unknown adversary action {a!r}")

    @property
    def kind(self) -> str:
        return "windy_grid"


@dataclass(frozen=True)
class PendulumSpec:
    theta_bins: int = 31
    omega_bins: int = 31
    omega_max: float = 8.0
    torque: float = 2.0
    f_max: float = 1.0
    mass: float = 1.0
    length: float = 1.0
    damping: float = 0.1
    gravity: float = 9.81
    dt: float = 0.05
    gamma: float = 0.99
    horizon: int = 200

    def __post_init__(self):
        if self.dt <= 0:
            raise EnvConfigError("dt must be positive")
        if self.theta_bins < 3 or self.omega_bins < 3:
            raise EnvConfigError("need at least 3 bins per dimension")
        if self.f_max < 0:
            raise EnvConfigError("f_max must be nonnegative")
        for name in ("mass", "length", "gravity"):
            if getattr(self, name) <= 0:
                raise EnvConfigError(f"{name} must be positive")

    @property
    def kind(self) -> str:
        return "pendulum"


@dataclass(frozen=True)
class GarnetSpec:
    n_states: int = 5
    n_actions1: int = 3
    n_actions2: int = 3
    branching: int = 3
    seed: int = 0
    gamma: float = 0.9
    horizon: int = 100

    def __post_init__(self):
        if self.branching > self.n_states:
            raise EnvConfigError("branching cannot exceed n_states")

    @property
    def kind(self) -> str:
        return "garnet"


@dataclass(frozen=True)
class ParamSweep:
    axis1_name: str
    axis1_multipliers: tuple[float, ...]
    axis2_name: str
    axis2_multipliers: tuple[float, ...]

    def __post_init__(self):
        for m in tuple(self.axis1_multipliers) + tuple(self.axis2_multipliers):
            if m <= 0:
                raise EnvConfigError("sweep multipliers must be positive")


def _cell_index(x: int, y: int, width: int) -> int:
    return y * width + x


def _clamped_move(x: int, y: int, dx: int, dy: int, w: int, h: int):
    return min(max(x + dx, 0), w - 1), min(max(y + dy, 0), h - 1)


def build_windy_grid(spec: WindyGridSpec) -> MarkovGame:
    """Grid navigation against a pushing adversary.

    The protagonist's move succeeds with prob move_success, slips to a random
    lateral neighbor with prob slip, and otherwise stalls. Inside the wind
    zone the adversary's push then displaces the agent one extra cell with
    prob wind_strength. Walls block; the goal is absorbing.
    """
    w, h = spec.width, spec.height
    S = w * h
    moves = ["up", "down", "left", "right"]
    A1 = len(moves)
    A2 = len(spec.adversary_actions)
    goal = _cell_index(*spec.goal, w)
    x0, y0, x1, y1 = spec.wind_zone

    P = np.zeros((S, A1, A2, S))
    R = np.zeros((S, A1, A2, S))
    for y in range(h):
        for x in range(w):
            s = _cell_index(x, y, w)
            if s == goal:
                P[s, :, :, s] = 1.0
                continue
            in_zone = x0 <= x <= x1 and y0 <= y <= y1
            for a1, mv in enumerate(moves):
                dx, dy = _DIRS[mv]
                # intermediate cells after the protagonist's move resolves
                inter: dict[tuple[int, int], float] = {}
                tgt = _clamped_move(x, y, dx, dy, w, h)
                inter[tgt] = inter.get(tgt, 0.0) + spec.move_success
                lat = (
                    [("left", "right")] if dy != 0 else [("up", "down")]
                )[0]
                for side in lat:
                    sx, sy = _DIRS[side]
                    cell = _clamped_move(x, y, sx, sy, w, h)
                    inter[cell] = inter.get(cell, 0.0) + spec.slip / 2.0
                stay = 1.0 - spec.move_success - spec.slip
                if stay > 0:
                    inter[(x, y)] = inter.get((x, y), 0.0) + stay
                for a2, push in enumerate(spec.adversary_actions):
                    px, py = _DIRS[push]
                    windy = in_zone and (px, py) != (0, 0)
                    for (cx, cy), mass in inter.items():
                        if windy and spec.wind_strength > 0:
                            bx, by = _clamped_move(cx, cy, px, py, w, h)
                            blown = _cell_index(bx, by, w)
                            P[s, a1, a2, blown] += mass * spec.wind_strength
                            P[s, a1, a2, _cell_index(cx, cy, w)] += mass * (
                                1.0 - spec.wind_strength
                            )
                        else:
                            P[s, a1, a2, _cell_index(cx, cy, w)] += mass
            R[s] = spec.step_reward
            R[s, :, :, goal] += spec.goal_reward

    init = np.zeros(S)
    init[_cell_index(*spec.start, w)] = 1.0
    return MarkovGame(P, R, spec.gamma, init, spec.horizon)


def build_pendulum(spec: PendulumSpec) -> MarkovGame:
    """Discretized pendulum swing-up against an adversarial torque.

    Continuous dynamics are Euler-integrated for one step from every bin
    center, then the next state is split stochastically between the nearest
    bins per dimension so the tabular chain stays Markov and preserves the
    expected continuous state. The angle wraps; angular velocity clamps.
    """
    nth, nom = spec.theta_bins, spec.omega_bins
    S = nth * nom
    thetas = np.arange(nth) * (2.0 * np.pi / nth)
    omegas = np.linspace(-spec.omega_max, spec.omega_max, nom)
    dom = omegas[1] - omegas[0]
    dth = 2.0 * np.pi / nth

    u_actions = np.array([-spec.torque, 0.0, spec.torque])
    f_actions = np.array([-spec.f_max, 0.0, spec.f_max])
    ml2 = spec.mass * spec.length**2

    TH, OM = np.meshgrid(thetas, omegas, indexing="ij")
    th_flat = TH.ravel()
    om_flat = OM.ravel()

    P = np.zeros((S, 3, 3, S))
    for a1, u in enumerate(u_actions):
        for a2, f in enumerate(f_actions):
            acc = (
                -(spec.gravity / spec.length) * np.sin(th_flat)
                - (spec.damping / ml2) * om_flat
                + (u + f) / ml2
            )
            th_next = np.mod(th_flat + om_flat * spec.dt, 2.0 * np.pi)
            om_next = np.clip(om_flat + acc * spec.dt, -spec.omega_max, spec.omega_max)

            # split between the two nearest bins per dimension (wrap in theta)
            ti = th_next / dth
            t_lo = np.floor(ti).astype(int) % nth
            t_hi = (t_lo + 1) % nth
            t_frac = ti - np.floor(ti)

            oi = np.clip((om_next + spec.omega_max) / dom, 0, nom - 1)
            o_lo = np.floor(oi).astype(int)
            o_hi = np.minimum(o_lo + 1, nom - 1)
            o_frac = np.where(o_hi > o_lo, oi - o_lo, 0.0)

            rows = np.arange(S)
            for tb, tw in ((t_lo, 1.0 - t_frac), (t_hi, t_frac)):
                for ob, ow in ((o_lo, 1.0 - o_frac), (o_hi, o_frac)):
                    np.add.at(P[:, a1, a2, :], (rows, tb * nom + ob), tw * ow)

    reward_per_state = (1.0 + np.cos(th_flat - np.pi)) / 2.0
    R = np.broadcast_to(
        reward_per_state[:, None, None, None], (S, 3, 3, S)
    ).copy()

    init = np.zeros(S)
    hang = _nearest_pendulum_state(0.0, 0.0, thetas, omegas, nom)
    init[hang] = 1.0
    return MarkovGame(P, R, spec.gamma, init, spec.horizon)


def _nearest_pendulum_state(theta, omega, thetas, omegas, nom) -> int:
    ti = int(np.argmin(np.abs(np.angle(np.exp(1j * (thetas - theta))))))
    oi = int(np.argmin(np.abs(omegas - omega)))
    return ti * nom + oi


def build_garnet(spec: GarnetSpec) -> MarkovGame:
    """Random zero-sum Markov game: `branching` successor states with
    Dirichlet(1) weights and uniform [-1,1] rewards, deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    S, A1, A2 = spec.n_states, spec.n_actions1, spec.n_actions2
    P = np.zeros((S, A1, A2, S))
    for s in range(S):
        for a1 in range(A1):
            for a2 in range(A2):
                succ = rng.choice(S, size=spec.branching, replace=False)
                weights = rng.dirichlet(np.ones(spec.branching))
                P[s, a1, a2, succ] = weights
    r = rng.uniform(-1.0, 1.0, size=(S, A1, A2))
    R = np.broadcast_to(r[:, :, :, None], (S, A1, A2, S)).copy()
    init = np.full(S, 1.0 / S)
    return MarkovGame(P, R, spec.gamma, init, spec.horizon)


def build_game(spec) -> MarkovGame:
    if isinstance(spec, WindyGridSpec):
        return build_windy_grid(spec)
    if isinstance(spec, PendulumSpec):
        return build_pendulum(spec)
    if isinstance(spec, GarnetSpec):
        return build_garnet(spec)
    raise EnvConfigError(f"unknown spec type {type(spec).__name__}")


def perturb(spec, multipliers: dict[str, float]):
    """Copy of the spec with named physical parameters scaled; probability
    fields are clamped back into [0,1]."""
    names = {f.name for f in fields(spec)}
    updates = {}
    for name, m in multipliers.items():
        if name not in names:
            raise EnvConfigError(f"spec {type(spec).__name__} has no parameter {name!r}")
        value = getattr(spec, name) * m
        if name in ("wind_strength", "move_success", "slip"):
            value = min(max(value, 0.0), 1.0)
        updates[name] = value
    return replace(spec, **updates)


_SPEC_KINDS = {
    "windy_grid": WindyGridSpec,
    "pendulum": PendulumSpec,
    "garnet": GarnetSpec,
}


def spec_to_json_dict(spec) -> dict:
    d = {f.name: getattr(spec, f.name) for f in fields(spec)}
    d["kind"] = spec.kind
    return d


def spec_from_json_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    if kind not in _SPEC_KINDS:
        raise EnvConfigError(f"unknown environment kind {kind!r}")
    cls = _SPEC_KINDS[kind]
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for k, v in d.items():
        if k not in names:
            raise EnvConfigError(f"unknown field {k!r} for {kind}")
        if isinstance(v, list):
            v = tuple(tuple(i) if isinstance(i, list) else i for i in v)
        kwargs[k] = v
    return cls(**kwargs)
