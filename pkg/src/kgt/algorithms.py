"""Round-based simulation of decentralized gradient-tracking methods.

All variants share one state layout (columns are nodes) and one schedule for
the noise streams:

* a local step ``k`` of round ``t`` evaluates the stochastic gradient with
  stream index ``(t, k)``;
* methods that communicate every update (GT, large-batch GT) evaluate their
  gradient at ``X^(t)`` with index ``(t, 0)``; large-batch GT draws its
  ``K`` samples as ``(t, 0) .. (t, K-1)``;
* the initial correction / tracking variable uses the gradient at ``x0``
  with index ``(0, 0)``, i.e. the same sample the first local step sees.

With this schedule K-GT with ``K = 1`` and GT with ``eta = eta_s * eta_c``
consume identical samples and produce the same iterates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .problems import NoiseModel, Problem, full_gradient, stochastic_gradient
from .topology import MixingMatrix

__all__ = [
    "VARIANTS",
    "ConfigError",
    "DivergenceError",
    "StateError",
    "HyperParams",
    "AlgorithmState",
    "batch_gradient",
    "init_state",
    "kgt_local_phase",
    "kgt_communicate",
    "tracking_variable",
    "round_kgt",
    "round_gt",
    "round_periodical_gt",
    "round_periodical_gt_fullgrad",
    "round_large_batch_gt",
    "round_dsgd",
    "step",
    "run",
]

VARIANTS = ("kgt", "gt", "periodical_gt", "periodical_gt_fullgrad", "large_batch_gt", "dsgd")
_CORRECTION_VARIANTS = ("kgt", "periodical_gt_fullgrad")
_TRACKING_VARIANTS = ("gt", "periodical_gt", "large_batch_gt")

DIVERGENCE_NORM = 1e12


class ConfigError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, round: int, message: str = ""):
        self.round = round
        super().__init__(message or f"iterates diverged at round {round}")


class StateError(RuntimeError):
    pass


@dataclass(frozen=True)
class HyperParams:
    """Algorithm choice and stepsizes.

    ``K`` is the number of local steps, or the batch multiplier for
    ``large_batch_gt``. Methods that take a single stepsize per update (GT,
    large-batch GT) use ``eta = eta_s * eta_c``.
    """

    variant: str
    K: int = 1
    eta_c: float = 1e-3
    eta_s: float = 1.0
    T: int = 100
    correction_init: Optional[str] = None
    tracking_init: Optional[str] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if int(self.K) != self.K or self.K < 1:
            raise ConfigError(f"K must be an integer >= 1, got {self.K}")
        if not self.eta_c > 0 or not self.eta_s > 0:
            raise ConfigError(f"stepsizes must be positive, got eta_c={self.eta_c}, eta_s={self.eta_s}")
        if int(self.T) != self.T or self.T < 0:
            raise ConfigError(f"T must be a nonnegative integer, got {self.T}")
        if self.correction_init is not None:
            if self.variant not in _CORRECTION_VARIANTS:
                raise ConfigError(f"correction_init does not apply to variant {self.variant!r}")
            if self.correction_init not in ("exact", "zero"):
                raise ConfigError(f"correction_init must be exact or zero, got {self.correction_init!r}")
        if self.tracking_init is not None:
            if self.variant not in _TRACKING_VARIANTS:
                raise ConfigError(f"tracking_init does not apply to variant {self.variant!r}")
            if self.tracking_init not in ("mean", "local"):
                raise ConfigError(f"tracking_init must be mean or local, got {self.tracking_init!r}")

    @property
    def eta(self) -> float:
        return self.eta_s * self.eta_c

    @property
    def local_steps(self) -> int:
        """Gradient steps between two gossip rounds."""
        return 1 if self.variant in ("gt", "large_batch_gt") else self.K


@dataclass
class AlgorithmState:
    """Mutable per-run state.

    ``C`` is the correction (K-GT, full-batch periodical GT), ``Z`` the
    tracking variable and ``G`` the gradient it was last updated with (GT
    family). The ``local_*`` lists hold the iterates ``X^(t)+k``, the gradients
    used at them and, for periodical GT, ``Z^(t)+k`` for the most recent round.
    """

    X: np.ndarray
    C: Optional[np.ndarray] = None
    Z: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    round: int = 0
    grad_evals: int = 0
    comm_rounds: int = 0
    phase: str = "communicated"
    X_start: Optional[np.ndarray] = None
    local_iterates: list = field(default_factory=list)
    local_grads: list = field(default_factory=list)
    local_tracking: list = field(default_factory=list)

    @property
    def xbar(self) -> np.ndarray:
        return self.X.mean(axis=1)

    def correction(self) -> np.ndarray:
        """Correction currently applied on top of the local stochastic gradient."""
        if self.C is not None:
            return self.C
        if self.Z is not None:
            return self.Z - self.G
        return np.zeros_like(self.X)


def batch_gradient(problem, noise, X, round, K):
    """Mean of ``K`` stochastic gradients at ``X`` drawn with indices ``(round, 0..K-1)``."""
    G = stochastic_gradient(problem, noise, X, round, 0)
    for s in range(1, K):
        G += stochastic_gradient(problem, noise, X, round, s)
    return G / K if K > 1 else G


def init_state(problem: Problem, noise: NoiseModel, hp: HyperParams, x0) -> AlgorithmState:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (problem.d,):
        raise ValueError(f"x0 has {x0.size} entries, problem dimension is {problem.d}")
    X = np.tile(x0[:, None], (1, problem.n))
    state = AlgorithmState(X=X)
    v = hp.variant

    if v in _CORRECTION_VARIANTS:
        if (hp.correction_init or "exact") == "exact":
            G0 = stochastic_gradient(problem, noise, X, 0, 0)
            state.C = G0.mean(axis=1, keepdims=True) - G0
            state.grad_evals = 1
        else:
            state.C = np.zeros_like(X)
    elif v in _TRACKING_VARIANTS:
        batch = hp.K if v == "large_batch_gt" else 1
        G0 = batch_gradient(problem, noise, X, 0, batch)
        state.G = G0
        if (hp.tracking_init or "mean") == "mean":
            state.Z = np.tile(G0.mean(axis=1, keepdims=True), (1, problem.n))
        else:
            state.Z = G0.copy()
        state.grad_evals = batch
    return state


def _start_round(state):
    state.X_start = state.X.copy()
    state.local_iterates = []
    state.local_grads = []
    state.local_tracking = []


def _finish_round(state):
    state.round += 1
    state.comm_rounds += 1
    state.phase = "communicated"


def _comm_model(state, X_after, hp, W):
    # X^(t+1) = (X^(t) - eta_s (X^(t) - X^(t)+K)) W
    X0 = state.X_start
    return W.gossip(X0 - hp.eta_s * (X0 - X_after))


def kgt_local_phase(state, problem, noise, hp):
    """K corrected local SGD steps; leaves the state awaiting communication."""
    if state.phase != "communicated":
        raise StateError("local phase already executed for this round")
    _start_round(state)
    t = state.round
    for k in range(hp.K):
        state.local_iterates.append(state.X.copy())
        g = stochastic_gradient(problem, noise, state.X, t, k)
        state.local_grads.append(g)
        state.X = state.X - hp.eta_c * (g + state.C)
    state.grad_evals += hp.K
    state.phase = "local_done"
    return state


def tracking_variable(state, hp) -> np.ndarray:
    """``Z = (X^(t) - X^(t)+K) / (K eta_c)``, available between local phase and gossip."""
    if hp.variant != "kgt":
        raise StateError("tracking_variable is defined for kgt only")
    if state.phase != "local_done":
        raise StateError("tracking variable requires a completed local phase")
    return (state.X_start - state.X) / (hp.K * hp.eta_c)


def kgt_communicate(state, hp, W):
    Z = tracking_variable(state, hp)
    state.C = state.C + (W.gossip(Z) - Z)
    state.X = _comm_model(state, state.X, hp, W)
    _finish_round(state)
    return state


def round_kgt(state, problem, noise, hp, W):
    kgt_local_phase(state, problem, noise, hp)
    return kgt_communicate(state, hp, W)


def round_gt(state, problem, noise, hp, W):
    """One GT update ``X <- (X - eta Z) W``, ``Z <- Z W + G_new - G_old``."""
    return _round_tracking(state, problem, noise, hp, W, batch=1)


def round_large_batch_gt(state, problem, noise, hp, W):
    """GT with the mean of ``K`` independent samples per gradient estimate."""
    return _round_tracking(state, problem, noise, hp, W, batch=hp.K)


def _round_tracking(state, problem, noise, hp, W, batch):
    _start_round(state)
    state.local_iterates.append(state.X.copy())
    state.local_grads.append(state.G)
    state.X = W.gossip(state.X - hp.eta * state.Z)
    G_new = batch_gradient(problem, noise, state.X, state.round + 1, batch)
    state.Z = W.gossip(state.Z) + G_new - state.G
    state.G = G_new
    state.grad_evals += batch
    _finish_round(state)
    return state


def round_periodical_gt(state, problem, noise, hp, W):
    """GT that skips gossip for ``K - 1`` of every ``K`` updates.

    ``state.G`` always holds the sample the current ``Z`` was built with, so
    the gradient drawn at ``X^(t+1)`` during communication is the one the next
    round's first local step uses.
    """
    _start_round(state)
    t = state.round
    X, Z, G = state.X, state.Z, state.G
    for k in range(hp.K - 1):
        state.local_iterates.append(X)
        state.local_grads.append(G)
        state.local_tracking.append(Z)
        X = X - hp.eta_c * Z
        G_new = stochastic_gradient(problem, noise, X, t, k + 1)
        Z = Z + G_new - G
        G = G_new
    state.local_iterates.append(X)
    state.local_grads.append(G)
    state.local_tracking.append(Z)
    X_last = X - hp.eta_c * Z
    state.X = _comm_model(state, X_last, hp, W)
    G_next = stochastic_gradient(problem, noise, state.X, t + 1, 0)
    state.Z = W.gossip(Z) + G_next - G
    state.G = G_next
    state.grad_evals += hp.K
    _finish_round(state)
    return state


def round_periodical_gt_fullgrad(state, problem, noise, hp, W):
    """Periodical GT in corrected-SGD form with a full local gradient at the last step."""
    _start_round(state)
    t = state.round
    X = state.X
    for k in range(hp.K - 1):
        state.local_iterates.append(X)
        g = stochastic_gradient(problem, noise, X, t, k)
        state.local_grads.append(g)
        X = X - hp.eta_c * (g + state.C)
    state.local_iterates.append(X)
    g_full = full_gradient(problem, X)
    state.local_grads.append(g_full)
    X_last = X - hp.eta_c * (g_full + state.C)
    state.X = _comm_model(state, X_last, hp, W)
    state.C = W.gossip(state.C) + (W.gossip(g_full) - g_full)
    state.grad_evals += hp.K
    _finish_round(state)
    return state


def round_dsgd(state, problem, noise, hp, W):
    """K plain local SGD steps followed by one gossip average."""
    _start_round(state)
    t = state.round
    X = state.X
    for k in range(hp.K):
        state.local_iterates.append(X)
        g = stochastic_gradient(problem, noise, X, t, k)
        state.local_grads.append(g)
        X = X - hp.eta_c * g
    state.X = W.gossip(X)
    state.grad_evals += hp.K
    _finish_round(state)
    return state


_ROUNDS: dict[str, Callable] = {
    "kgt": round_kgt,
    "gt": round_gt,
    "periodical_gt": round_periodical_gt,
    "periodical_gt_fullgrad": round_periodical_gt_fullgrad,
    "large_batch_gt": round_large_batch_gt,
    "dsgd": round_dsgd,
}


def step(state, problem, noise, hp, W):
    """Advance ``state`` by one communication round of ``hp.variant``."""
    return _ROUNDS[hp.variant](state, problem, noise, hp, W)


def _check_finite(state):
    X = state.X
    if not np.all(np.isfinite(X)) or np.linalg.norm(X) > DIVERGENCE_NORM:
        raise DivergenceError(state.round)


def run(problem: Problem, noise: NoiseModel, hp: HyperParams, W: MixingMatrix,
        x0=None, metrics_hooks=None, collect_local: bool = False, f_star=None,
        v: float = 2.0):
    """Run ``hp.T`` rounds and return one ``MetricsRecord`` per round (``T + 1`` total).

    ``metrics_hooks`` are called as ``hook(state, record)`` once a record is
    complete, which for every record but the last is after the following
    round has executed. Non-finite iterates or ``||X||_F > 1e12`` raise
    ``DivergenceError``; the records gathered so far are attached as
    ``exc.records``.
    """
    from .metrics import record_for_state, client_drift

    if W.n != problem.n:
        raise ConfigError(f"topology has {W.n} nodes, problem has {problem.n}")
    if x0 is None:
        x0 = np.zeros(problem.d)
    hooks = list(metrics_hooks or [])
    if f_star is None and problem.kind == "quadratic":
        from .problems import quadratic_optimum
        f_star = quadratic_optimum(problem)[1]

    state = init_state(problem, noise, hp, x0)
    records = [record_for_state(state, problem, hp, W, f_star, v)]
    for _ in range(hp.T):
        step(state, problem, noise, hp, W)
        drift, per_step = client_drift(state.local_iterates, state.X_start)
        rec = records[-1]
        rec.client_drift = drift
        if collect_local:
            rec.drift_steps = per_step
        for hook in hooks:
            hook(state, rec)
        try:
            _check_finite(state)
        except DivergenceError as exc:
            exc.records = records
            raise
        records.append(record_for_state(state, problem, hp, W, f_star, v))
    for hook in hooks:
        hook(state, records[-1])
    return records
