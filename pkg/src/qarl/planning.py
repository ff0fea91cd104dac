"""Exact planning for entropy-regularized zero-sum Markov games.

Temperature-conditioned soft value iteration: every backup solves one
regularized matrix game per state (vectorized across states), producing the
joint soft Q-table, the soft state values, and the equilibrium policies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import MarkovGame, TabularPolicy
from .matrix import ConvergenceError, _newton_qre

__all__ = [
    "JointSoftQ",
    "SolverReport",
    "soft_bellman_backup",
    "solve_soft_markov_game",
    "policy_consistency_residual",
    "anneal_to_nash",
]


@dataclass
class JointSoftQ:
    """Joint action values q (S, A1, A2) and soft state values v (S,)
    under protagonist temperature beta and adversary temperature alpha."""

    q: np.ndarray
    v: np.ndarray
    alpha: float
    beta: float

    @classmethod
    def zeros(cls, game: MarkovGame, alpha: float, beta: float) -> "JointSoftQ":
        return cls(
            q=np.zeros((game.n_states, game.n_actions1, game.n_actions2)),
            v=np.zeros(game.n_states),
            alpha=alpha,
            beta=beta,
        )


@dataclass
class SolverReport:
    iterations: int
    residuals: list[float]
    converged: bool


def _batch_entropy(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -t.sum(axis=-1)


def _batch_softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def solve_stage_games(
    payoffs: np.ndarray,
    tau_row: float,
    tau_col: float,
    tol: float,
    max_iter: int = 200_000,
    warm_start: tuple[np.ndarray, np.ndarray] | None = None,
):
    """Damped fixed-point iteration for a batch of regularized matrix games.

    payoffs has shape (S, m, n); returns (sigma_row (S,m), sigma_col (S,n),
    value (S,), residual). Per-state damping halves on residual increase.
    """
    if tau_row <= 0 or tau_col <= 0:
        raise ValueError("temperatures must be strictly positive")
    S, m, n = payoffs.shape
    if warm_start is not None:
        sr, sc = warm_start[0].copy(), warm_start[1].copy()
    else:
        sr = np.full((S, m), 1.0 / m)
        sc = np.full((S, n), 1.0 / n)
    damping = np.full(S, 0.5)
    prev = np.full(S, np.inf)
    # per-state best iterates: the states are independent games, and near the
    # floating-point noise floor they dip below tol at different iterations
    best_sr, best_sc = sr.copy(), sc.copy()
    best_resid = np.full(S, np.inf)
    best_overall = np.inf
    stall = 0
    for it in range(1, max_iter + 1):
        br = _batch_softmax(np.einsum("smn,sn->sm", payoffs, sc) / tau_row)
        bc = _batch_softmax(-np.einsum("smn,sm->sn", payoffs, sr) / tau_col)
        resid = np.maximum(
            np.abs(sr - br).max(axis=1), np.abs(sc - bc).max(axis=1)
        )
        better = resid < best_resid
        if np.any(better):
            best_resid = np.where(better, resid, best_resid)
            best_sr[better] = sr[better]
            best_sc[better] = sc[better]
        if best_resid.max() <= tol:
            value = (
                np.einsum("sm,smn,sn->s", best_sr, payoffs, best_sc)
                + tau_row * _batch_entropy(best_sr)
                - tau_col * _batch_entropy(best_sc)
            )
            return best_sr, best_sc, value, float(best_resid.max())
        if best_resid.max() < 0.99 * best_overall:
            best_overall = best_resid.max()
            stall = 0
        else:
            stall += 1
        if stall >= 200:
            # stiff regime: polish the still-unconverged states by Newton,
            # keeping a polished point only when it beats the damped iterate
            for s in np.flatnonzero(best_resid > tol):
                polished = _newton_qre(payoffs[s], sr[s], sc[s], tau_row, tau_col)
                if polished is None:
                    continue
                pr, pc = polished
                br_s = _batch_softmax(payoffs[s] @ pc / tau_row)
                bc_s = _batch_softmax(-payoffs[s].T @ pr / tau_col)
                p_resid = max(np.abs(pr - br_s).max(), np.abs(pc - bc_s).max())
                if p_resid < best_resid[s]:
                    sr[s], sc[s] = pr, pc
                    best_resid[s] = p_resid
                    best_sr[s], best_sc[s] = pr, pc
            if best_resid.max() <= tol:
                value = (
                    np.einsum("sm,smn,sn->s", best_sr, payoffs, best_sc)
                    + tau_row * _batch_entropy(best_sr)
                    - tau_col * _batch_entropy(best_sc)
                )
                return best_sr, best_sc, value, float(best_resid.max())
            stall = 0
            prev = np.full(S, np.inf)
            continue
        worse = resid > prev
        damping = np.where(worse, np.maximum(damping * 0.5, 1e-3), damping)
        prev = resid
        d = damping[:, None]
        sr = (1.0 - d) * sr + d * br
        sc = (1.0 - d) * sc + d * bc
    bad = int(np.argmax(best_resid))
    raise ConvergenceError(
        f"stage game at state {bad} did not converge "
        f"(residual {float(best_resid[bad]):.3e} after {max_iter} iterations)",
        residual=float(best_resid[bad]),
    )


def soft_bellman_backup(
    game: MarkovGame,
    q: JointSoftQ,
    stage_tol: float = 1e-9,
    warm_start: tuple[np.ndarray, np.ndarray] | None = None,
):
    """One soft Bellman backup.

    Solves the regularized stage game on q(s,.,.) at every state, takes its
    regularized value as v'(s), and backs up
    q'(s,a1,a2) = sum_s' P(s'|s,a1,a2) (R(s,a1,a2,s') + gamma v'(s')).
    """
    if q.alpha <= 0 or q.beta <= 0:
        raise ValueError("backup requires strictly positive temperatures")
    sr, sc, v_new, _ = solve_stage_games(
        q.q, q.beta, q.alpha, tol=stage_tol, warm_start=warm_start
    )
    q_new = game.expected_reward() + game.gamma * np.einsum(
        "sabn,n->sab", game.transition, v_new
    )
    mu = TabularPolicy(sr, "protagonist")
    nu = TabularPolicy(sc, "adversary")
    return JointSoftQ(q_new, v_new, q.alpha, q.beta), mu, nu


def solve_soft_markov_game(
    game: MarkovGame,
    alpha: float,
    beta: float,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    q_init: np.ndarray | None = None,
):
    """Soft value iteration from q=0 until the max-norm change drops below tol.

    Returns (JointSoftQ, mu, nu, SolverReport); the policies are the QRE of
    the regularized game.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be strictly positive; anneal for the limit")
    q = JointSoftQ.zeros(game, alpha, beta)
    if q_init is not None:
        q.q = q_init.copy()
    stage_tol = 0.1 * tol
    warm = None
    residuals: list[float] = []
    for it in range(1, max_iter + 1):
        q_next, mu, nu = soft_bellman_backup(game, q, stage_tol=stage_tol, warm_start=warm)
        warm = (mu.probs, nu.probs)
        delta = float(np.max(np.abs(q_next.q - q.q)))
        residuals.append(delta)
        q = q_next
        if delta <= tol:
            # one more stage solve so v and the policies match the final q
            sr, sc, v, _ = solve_stage_games(
                q.q, beta, alpha, tol=stage_tol, warm_start=warm
            )
            q.v = v
            return (
                q,
                TabularPolicy(sr, "protagonist"),
                TabularPolicy(sc, "adversary"),
                SolverReport(it, residuals, True),
            )
    raise ConvergenceError(
        f"soft value iteration did not converge in {max_iter} iterations "
        f"(last change {residuals[-1]:.3e})",
        residual=residuals[-1],
    )


def policy_consistency_residual(
    game: MarkovGame, q: JointSoftQ, mu: TabularPolicy, nu: TabularPolicy
) -> float:
    """Max deviation of (mu, nu) from the softmax of their marginal q-values.

    The protagonist's marginal is q averaged over the adversary's mix and
    vice versa; at the equilibrium both policies are Boltzmann in their
    marginals at their own temperature.
    """
    q_vs_nu = np.einsum("sn,smn->sm", nu.probs, q.q)
    q_vs_mu = np.einsum("sm,smn->sn", mu.probs, q.q)
    mu_star = _batch_softmax(q_vs_nu / q.beta)
    nu_star = _batch_softmax(-q_vs_mu / q.alpha)
    return float(
        max(
            np.max(np.abs(mu.probs - mu_star)),
            np.max(np.abs(nu.probs - nu_star)),
        )
    )


def anneal_to_nash(
    game: MarkovGame,
    schedule: list[float] | np.ndarray,
    tol: float = 1e-8,
):
    """Solve the regularized game along a decreasing temperature schedule with
    warm-started q-tables; the final value approximates the minimax value."""
    schedule = list(schedule)
    if len(schedule) == 0:
        raise ValueError("schedule must be non-empty")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly decreasing")
    if schedule[-1] < 1e-5:
        raise ValueError("schedule must end at a temperature >= 1e-5")
    q_init = None
    for tau in schedule:
        try:
            q, mu, nu, _ = solve_soft_markov_game(
                game, alpha=tau, beta=tau, tol=tol, q_init=q_init
            )
        except ConvergenceError as err:
            raise ConvergenceError(
                f"annealing failed at temperature {tau:g}: {err}",
                residual=err.residual,
                tau=tau,
            ) from err
        q_init = q.q
    return q, mu, nu
