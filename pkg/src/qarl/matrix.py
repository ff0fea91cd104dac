"""Logit quantal-response and Nash solvers for zero-sum matrix games.

The row player maximizes the payoff, the column player minimizes it.
Temperatures may differ between the players (heterogeneous equilibria);
annealing both toward zero recovers the minimax solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import shannon_entropy

__all__ = [
    "MatrixGame",
    "QreSolution",
    "ConvergenceError",
    "solve_logit_qre",
    "brute_force_qre_2x2",
    "solve_nash_by_annealing",
    "regularized_game_value",
]


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float | None = None, tau: float | None = None):
        super().__init__(msg)
        self.residual = residual
        self.tau = tau


@dataclass(frozen=True)
class MatrixGame:
    payoff: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.payoff, dtype=float)
        if X.ndim != 2:
            raise ValueError("payoff must be a 2-D matrix")
        if not np.all(np.isfinite(X)):
            raise ValueError("payoff entries must be finite")
        object.__setattr__(self, "payoff", X)
        X.setflags(write=False)

    @property
    def shape(self):
        return self.payoff.shape


@dataclass(frozen=True)
class QreSolution:
    sigma_row: np.ndarray
    sigma_col: np.ndarray
    value: float
    residual: float
    iterations: int
    tau_row: float
    tau_col: float

    def to_json_dict(self) -> dict:
        return {
            "sigma_row": self.sigma_row.tolist(),
            "sigma_col": self.sigma_col.tolist(),
            "value": self.value,
            "residual": self.residual,
            "iterations": self.iterations,
            "tau_row": self.tau_row,
            "tau_col": self.tau_col,
        }


def softmax(z: np.ndarray) -> np.ndarray:
    """Overflow-safe softmax."""
    z = np.asarray(z, dtype=float)
    e = np.exp(z - np.max(z))
    return e / e.sum()


def _qre_residual(X: np.ndarray, sr: np.ndarray, sc: np.ndarray,
                  tau_row: float, tau_col: float) -> float:
    br = softmax(X @ sc / tau_row)
    bc = softmax(-X.T @ sr / tau_col)
    return max(float(np.max(np.abs(sr - br))), float(np.max(np.abs(sc - bc))))


def regularized_game_value(game: MatrixGame, sigma_row, sigma_col,
                           beta: float = 0.0, alpha: float = 0.0) -> float:
    """Bilinear payoff plus row-entropy bonus minus column-entropy bonus."""
    sr = np.asarray(sigma_row, dtype=float)
    sc = np.asarray(sigma_col, dtype=float)
    return float(sr @ game.payoff @ sc
                 + beta * shannon_entropy(sr) - alpha * shannon_entropy(sc))


def solve_logit_qre(
    game: MatrixGame,
    tau_row: float,
    tau_col: float,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    warm_start: tuple[np.ndarray, np.ndarray] | None = None,
) -> QreSolution:
    """Damped fixed-point iteration for the logit QRE of a zero-sum matrix game.

    Iterates sigma <- (1-d)*sigma + d*softmax(best-response logits), halving the
    damping factor whenever the residual increases.
    """
    if tau_row <= 0 or tau_col <= 0:
        raise ValueError("temperatures must be strictly positive")
    X = game.payoff
    m, n = X.shape
    if warm_start is not None:
        sr = np.asarray(warm_start[0], dtype=float).copy()
        sc = np.asarray(warm_start[1], dtype=float).copy()
    else:
        sr = np.full(m, 1.0 / m)
        sc = np.full(n, 1.0 / n)
    damping = 0.5
    prev_resid = np.inf
    best_resid = np.inf
    stall = 0
    for it in range(1, max_iter + 1):
        br = softmax(X @ sc / tau_row)
        bc = softmax(-X.T @ sr / tau_col)
        resid = max(float(np.max(np.abs(sr - br))), float(np.max(np.abs(sc - bc))))
        if resid <= tol:
            value = regularized_game_value(game, sr, sc, beta=tau_row, alpha=tau_col)
            return QreSolution(sr, sc, value, resid, it, tau_row, tau_col)
        if resid < 0.99 * best_resid:
            best_resid = resid
            stall = 0
        else:
            stall += 1
        if stall >= 200:
            # stiff regime (tiny temperatures): the damped map contracts too
            # slowly, so polish the iterate with a Newton solve instead
            newton = _newton_qre(X, sr, sc, tau_row, tau_col)
            if newton is not None:
                nr, nc = newton
                n_resid = _qre_residual(X, nr, nc, tau_row, tau_col)
                if n_resid <= tol:
                    value = regularized_game_value(game, nr, nc, beta=tau_row, alpha=tau_col)
                    return QreSolution(nr, nc, value, n_resid, it, tau_row, tau_col)
            stall = 0
        if resid > prev_resid:
            damping = max(damping * 0.5, 1e-3)
        prev_resid = resid
        sr = (1.0 - damping) * sr + damping * br
        sc = (1.0 - damping) * sc + damping * bc
    raise ConvergenceError(
        f"logit QRE did not converge in {max_iter} iterations (residual {prev_resid:.3e})",
        residual=prev_resid,
    )


def _newton_qre(X, sr, sc, tau_row, tau_col):
    """Newton polish of the QRE fixed point, warm-started from (sr, sc).
    Returns simplex-valued strategies or None if the root solve fails."""
    from scipy import optimize

    m, n = X.shape

    def fixed_point_gap(z):
        r, c = z[:m], z[m:]
        br = softmax(X @ c / tau_row)
        bc = softmax(-X.T @ r / tau_col)
        return np.concatenate([r - br, c - bc])

    sol = optimize.root(fixed_point_gap, np.concatenate([sr, sc]), method="hybr",
                        options={"xtol": 1e-13})
    # hybr flags "no further progress" once it hits the xtol floor even when
    # the iterate is excellent; callers judge by the achieved residual instead
    r, c = sol.x[:m], sol.x[m:]
    if np.any(r < -1e-9) or np.any(c < -1e-9):
        return None
    r = np.clip(r, 0.0, None)
    c = np.clip(c, 0.0, None)
    return r / r.sum(), c / c.sum()


def brute_force_qre_2x2(game: MatrixGame, tau: float, grid: int = 201) -> QreSolution:
    """Exhaustive-search oracle for 2x2 games: scan (sigma_r1, sigma_c1) on a grid,
    then bisect the bracket around the best point, minimizing the fixed-point
    residual. Vectorized over the whole grid so refinement stays cheap."""
    X = game.payoff
    if X.shape != (2, 2):
        raise ValueError("brute-force oracle only supports 2x2 games")
    if tau <= 0:
        raise ValueError("tau must be strictly positive")

    def residual_grid(ps: np.ndarray, qs: np.ndarray) -> np.ndarray:
        P, Q = np.meshgrid(ps, qs, indexing="ij")
        # row best response to column mix q (first component)
        row_gap = ((X[0, 0] - X[1, 0]) * Q + (X[0, 1] - X[1, 1]) * (1.0 - Q)) / tau
        br_p = 1.0 / (1.0 + np.exp(-np.clip(row_gap, -700, 700)))
        # column best response to row mix p (logits are -X^T sigma_r / tau)
        col_gap = ((X[0, 1] - X[0, 0]) * P + (X[1, 1] - X[1, 0]) * (1.0 - P)) / tau
        bc_q = 1.0 / (1.0 + np.exp(-np.clip(col_gap, -700, 700)))
        return np.maximum(np.abs(P - br_p), np.abs(Q - bc_q))

    lo_p, hi_p, lo_q, hi_q = 0.0, 1.0, 0.0, 1.0
    best_p = best_q = 0.5
    best_r = np.inf
    evals = 0
    for _ in range(40):
        ps = np.linspace(lo_p, hi_p, grid)
        qs = np.linspace(lo_q, hi_q, grid)
        R = residual_grid(ps, qs)
        evals += R.size
        i, j = np.unravel_index(np.argmin(R), R.shape)
        if R[i, j] < best_r:
            best_r, best_p, best_q = float(R[i, j]), float(ps[i]), float(qs[j])
        # zoom around this pass's argmin with a generous margin so a narrow
        # residual valley a few cells away is never clipped out of the bracket
        span_p = (hi_p - lo_p) / (grid - 1) * 8
        span_q = (hi_q - lo_q) / (grid - 1) * 8
        lo_p, hi_p = max(0.0, ps[i] - span_p), min(1.0, ps[i] + span_p)
        lo_q, hi_q = max(0.0, qs[j] - span_q), min(1.0, qs[j] + span_q)
        if best_r < 1e-14 or max(span_p, span_q) < 1e-13:
            break
    sr = np.array([best_p, 1.0 - best_p])
    sc = np.array([best_q, 1.0 - best_q])
    value = regularized_game_value(game, sr, sc, beta=tau, alpha=tau)
    return QreSolution(sr, sc, value, best_r, evals, tau, tau)


def solve_nash_by_annealing(
    game: MatrixGame,
    tau_start: float | None = None,
    tau_end: float = 1e-4,
    decay: float = 0.8,
    tol: float = 1e-10,
    max_iter: int = 200_000,
) -> QreSolution:
    """Homotopy path to the Nash equilibrium: solve the QRE along a geometric
    temperature schedule with warm starts, returning the solution at tau_end."""
    if tau_start is None:
        tau_start = max(1.0, float(np.max(np.abs(game.payoff))))
    if not (tau_start > tau_end > 0):
        raise ValueError("need tau_start > tau_end > 0")
    if not (0.0 < decay < 1.0):
        raise ValueError("decay must be in (0,1)")
    tau = tau_start
    warm = None
    sol = None
    while True:
        try:
            sol = solve_logit_qre(game, tau, tau, tol=tol, max_iter=max_iter, warm_start=warm)
        except ConvergenceError as err:
            raise ConvergenceError(str(err), residual=err.residual, tau=tau) from err
        warm = (sol.sigma_row, sol.sigma_col)
        if tau <= tau_end:
            return sol
        tau = max(tau * decay, tau_end)
