"""Diagnostic quantities tracked along a run.

All functions are pure. Expectations in the underlying definitions are
replaced by the single-run sample value; averaging over repetitions is done
by the runner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .problems import Problem, full_gradient

__all__ = [
    "CSV_COLUMNS",
    "MetricsRecord",
    "consensus_distance",
    "client_drift",
    "correction_quality",
    "global_grad_norm",
    "potential",
    "potential_constants",
    "record_for_state",
    "format_float",
]

CSV_COLUMNS = (
    "round", "comm_rounds", "grad_evals", "grad_norm_sq", "f_gap",
    "consensus", "client_drift", "gamma", "potential",
)

NAN = float("nan")


@dataclass
class MetricsRecord:
    """Metrics at one communication round.

    ``client_drift`` describes the local phase that starts at this round, so
    the last record of a run leaves it as NaN. ``f_gap`` and ``potential`` are
    NaN when the optimal value is unknown.
    """

    round: int
    comm_rounds: int
    grad_evals: int
    grad_norm_sq: float
    f_gap: float = NAN
    consensus: float = NAN
    client_drift: float = NAN
    gamma: float = NAN
    potential: float = NAN
    drift_steps: Optional[list] = field(default=None, repr=False)

    def row(self) -> list[str]:
        return [format_float(getattr(self, c)) if isinstance(getattr(self, c), float)
                else str(getattr(self, c)) for c in CSV_COLUMNS]


def format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def consensus_distance(X: np.ndarray) -> float:
    """``(1/n) sum_i ||x_i - xbar||^2``."""
    D = X - X.mean(axis=1, keepdims=True)
    return float(np.sum(D * D) / X.shape[1])


def client_drift(local_snapshots, X_start: np.ndarray) -> tuple[float, list[float]]:
    """Accumulated deviation of the local iterates from the round's starting average.

    ``local_snapshots[k]`` is ``X^(t)+k`` for ``k = 0..K-1``. Returns the sum
    and the per-step values ``e_k``.
    """
    if len(local_snapshots) == 0:
        raise ValueError("client drift needs at least one local snapshot")
    xbar = X_start.mean(axis=1, keepdims=True)
    n = X_start.shape[1]
    per_step = [float(np.sum((Xk - xbar) ** 2) / n) for Xk in local_snapshots]
    return math.fsum(per_step), per_step


def correction_quality(C: np.ndarray, problem: Problem, xbar: np.ndarray) -> float:
    """``(1/(n L^2)) sum_i ||c_i + grad f_i(xbar) - grad f(xbar)||^2``."""
    xbar = np.asarray(xbar, dtype=float).reshape(-1)
    Gbar = full_gradient(problem, np.tile(xbar[:, None], (1, problem.n)))
    E = C + Gbar - Gbar.mean(axis=1, keepdims=True)
    return float(np.sum(E * E) / (problem.n * problem.L**2))


def global_grad_norm(problem: Problem, xbar: np.ndarray) -> float:
    g = problem.grad(xbar)
    return float(g @ g)


def potential_constants(p: float, v: float) -> tuple[float, float, float]:
    """The weights ``A, B, C`` of the Lyapunov function for mixing parameter ``p``."""
    return 72 * v**3 * p + 48 * v * p, 36 * v**3 * p, v * p


def potential(f_gap, gamma, consensus, p, K, eta_c, eta_s, L, v: float = 2.0) -> float:
    """Lyapunov combination of suboptimality, correction error and consensus distance.

    ``f_gap + A (K eta_c)^3 L^4 / (p eta_s^2) * gamma + B/(6 v^2) * K eta_c L^2 / p * consensus``
    """
    if not p > 0:
        raise ValueError(f"potential needs p > 0, got {p}")
    if not v > 1:
        raise ValueError(f"potential needs v > 1, got {v}")
    A, B, _ = potential_constants(p, v)
    Keta = K * eta_c
    return (f_gap
            + A * Keta**3 * L**4 / (p * eta_s**2) * gamma
            + B / (6 * v**2) * Keta * L**2 / p * consensus)


def record_for_state(state, problem, hp, W, f_star=None, v: float = 2.0) -> MetricsRecord:
    """Evaluate every round-level metric for the current state."""
    xbar = state.xbar
    rec = MetricsRecord(
        round=state.round,
        comm_rounds=state.comm_rounds,
        grad_evals=state.grad_evals,
        grad_norm_sq=global_grad_norm(problem, xbar),
        consensus=consensus_distance(state.X),
        gamma=correction_quality(state.correction(), problem, xbar),
    )
    if f_star is not None:
        rec.f_gap = problem.value(xbar) - f_star
        if W.p > 0:
            rec.potential = potential(rec.f_gap, rec.gamma, rec.consensus, W.p,
                                      hp.local_steps, hp.eta_c, hp.eta_s, problem.L, v)
    return rec
