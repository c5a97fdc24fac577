"""Gossip mixing matrices and their consensus contraction parameter.

A mixing matrix ``W`` is symmetric, doubly stochastic and nonnegative. Its
contraction parameter ``p`` is the largest value for which

    ||X W - Xbar||_F^2 <= (1 - p) ||X - Xbar||_F^2

holds for every ``X``. For symmetric ``W`` this is ``1 - rho**2`` with
``rho = ||W - 11^T/n||_2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "MixingMatrix",
    "TopologyError",
    "build_ring",
    "build_complete",
    "build_disconnected",
    "from_weights",
    "load_weights",
    "spectral_gap",
    "make_topology",
]

SYMMETRY_TOL = 1e-12
STOCHASTIC_TOL = 1e-10
EIG_TOL = 1e-10
# p values this close to 0 or 1 are snapped, so I and 11^T/n give exact answers
SNAP_TOL = 1e-12


class TopologyError(ValueError):
    """Raised when a matrix is not a valid mixing matrix."""


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Validated gossip weights with cached contraction parameter ``p``."""

    weights: np.ndarray
    p: float
    label: str = "custom"

    def __post_init__(self):
        self.weights.setflags(write=False)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def rho(self) -> float:
        return float(np.sqrt(max(0.0, 1.0 - self.p)))

    def gossip(self, X: np.ndarray) -> np.ndarray:
        """One averaging step ``X W`` on a d x n matrix."""
        return X @ self.weights

    def __repr__(self):
        return f"MixingMatrix(label={self.label!r}, n={self.n}, p={self.p:.6g})"


def _check_n(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise TopologyError(f"node count must be a positive integer, got {n!r}")


def _validate(W: np.ndarray) -> None:
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise TopologyError(f"mixing matrix must be square, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise TopologyError("mixing matrix has non-finite entries")

    asym = np.abs(W - W.T)
    if asym.max() > SYMMETRY_TOL:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise TopologyError(
            f"not symmetric: w[{i},{j}]={W[i, j]!r} but w[{j},{i}]={W[j, i]!r}"
        )

    if W.min() < 0:
        i, j = np.unravel_index(np.argmin(W), W.shape)
        raise TopologyError(f"negative entry: w[{i},{j}]={W[i, j]!r}")

    row_err = np.abs(W.sum(axis=1) - 1.0)
    if row_err.max() > STOCHASTIC_TOL:
        i = int(np.argmax(row_err))
        raise TopologyError(f"not doubly stochastic: row {i} sums to {W[i].sum()!r}")
    col_err = np.abs(W.sum(axis=0) - 1.0)
    if col_err.max() > STOCHASTIC_TOL:
        j = int(np.argmax(col_err))
        raise TopologyError(
            f"not doubly stochastic: column {j} sums to {W[:, j].sum()!r}"
        )


def _power_iteration_rho(M: np.ndarray, tol: float = EIG_TOL, maxiter: int = 100_000) -> float:
    # spectral radius of a symmetric matrix; used only if eigvalsh fails
    n = M.shape[0]
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxiter):
        w = M @ (M @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(nrm - lam) <= tol * max(1.0, nrm):
            lam = nrm
            break
        lam = nrm
    return float(np.sqrt(lam))


def spectral_gap(weights) -> float:
    """Contraction parameter ``p = 1 - rho**2`` of a symmetric mixing matrix.

    ``rho`` is the spectral norm of ``W - 11^T/n``, i.e. the largest eigenvalue
    magnitude once the consensus direction is projected out.
    """
    W = np.asarray(weights, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise TopologyError(f"mixing matrix must be square, got shape {W.shape}")
    if np.abs(W - W.T).max() > SYMMETRY_TOL:
        raise TopologyError("spectral gap requires a symmetric matrix")
    n = W.shape[0]
    M = W - np.full((n, n), 1.0 / n)
    M = 0.5 * (M + M.T)
    try:
        rho = float(np.max(np.abs(np.linalg.eigvalsh(M))))
    except np.linalg.LinAlgError:
        rho = _power_iteration_rho(M)
    p = 1.0 - rho * rho
    if p < SNAP_TOL:
        return 0.0
    if p > 1.0 - SNAP_TOL:
        return 1.0
    return p


def from_weights(weights, label: str = "custom") -> MixingMatrix:
    """Validate ``weights`` and wrap them with their contraction parameter."""
    W = np.array(weights, dtype=float, copy=True)
    _validate(W)
    return MixingMatrix(W, spectral_gap(W), label)


def build_ring(n: int) -> MixingMatrix:
    """Ring with uniform weight 1/3 on self and both neighbours.

    ``n == 2`` degenerates to weights 1/2 and ``n == 1`` to the 1x1 identity.
    """
    _check_n(n)
    if n == 1:
        W = np.ones((1, 1))
    elif n == 2:
        W = np.full((2, 2), 0.5)
    else:
        W = np.zeros((n, n))
        idx = np.arange(n)
        W[idx, idx] = 1.0 / 3
        W[idx, (idx + 1) % n] = 1.0 / 3
        W[idx, (idx - 1) % n] = 1.0 / 3
    return from_weights(W, "ring")


def build_complete(n: int) -> MixingMatrix:
    _check_n(n)
    return from_weights(np.full((n, n), 1.0 / n), "complete")


def build_disconnected(n: int) -> MixingMatrix:
    _check_n(n)
    return from_weights(np.eye(n), "disconnected")


def load_weights(path) -> MixingMatrix:
    """Read whitespace-separated rows of floats from ``path``."""
    path = Path(path)
    try:
        W = np.loadtxt(path, dtype=float, ndmin=2)
    except (OSError, ValueError) as exc:
        raise TopologyError(f"cannot read mixing matrix from {path}: {exc}") from exc
    return from_weights(W, f"file:{path}")


def make_topology(name: str, n: int) -> MixingMatrix:
    """Resolve a config topology name: ring, complete, disconnected or file:<path>."""
    if name.startswith("file:"):
        mm = load_weights(name[len("file:"):])
        if mm.n != n:
            raise TopologyError(f"topology file has {mm.n} nodes, problem has {n}")
        return mm
    builders = {
        "ring": build_ring,
        "complete": build_complete,
        "disconnected": build_disconnected,
    }
    try:
        return builders[name](n)
    except KeyError:
        raise TopologyError(
            f"unknown topology {name!r}; expected ring, complete, disconnected or file:<path>"
        ) from None
