"""Distributed objectives, the additive gradient-noise model and data partitioning.

Node ``i`` (1-indexed in the formulas, 0-indexed in arrays) holds

    f_i(x) = 1/2 ||A_i x - b_i||^2 + c * sum_j cos(x_j),    A_i^2 = (i^2/n) I,

with ``b_i ~ N(0, zeta_bar^2 / i^2 I)``. ``c = 0`` is the least-squares problem.
Iterates are stored column-wise: ``X`` has shape ``(d, n)`` and column ``i``
belongs to node ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Problem",
    "NoiseModel",
    "make_quadratic",
    "make_nonconvex",
    "make_problem",
    "full_gradient",
    "stochastic_gradient",
    "node_noise",
    "quadratic_optimum",
    "measure_heterogeneity",
    "partition_labels",
]


@dataclass(frozen=True, eq=False)
class Problem:
    """Per-node objective oracle.

    ``hess`` holds the scalar Hessian factors ``a_i = i^2/n`` and ``offsets``
    the columns ``b_i`` (shape ``(d, n)``).
    """

    kind: str
    hess: np.ndarray
    offsets: np.ndarray
    zeta_bar: float = 0.0
    c: float = 0.0
    data_seed: int = 0
    _sqrt_hess: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("quadratic", "nonconvex"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        object.__setattr__(self, "_sqrt_hess", np.sqrt(self.hess))
        self.hess.setflags(write=False)
        self.offsets.setflags(write=False)

    @property
    def n(self) -> int:
        return self.hess.shape[0]

    @property
    def d(self) -> int:
        return self.offsets.shape[0]

    @property
    def L(self) -> float:
        return float(self.hess.max() + self.c)

    @property
    def scaled_offsets(self) -> np.ndarray:
        """Columns ``A_i b_i``."""
        return self.offsets * self._sqrt_hess

    def local_values(self, X: np.ndarray) -> np.ndarray:
        """``f_i(x_i)`` for each column of ``X``."""
        _check_shape(self, X)
        resid = X * self._sqrt_hess - self.offsets
        vals = 0.5 * np.sum(resid * resid, axis=0)
        if self.c:
            vals = vals + self.c * np.sum(np.cos(X), axis=0)
        return vals

    def value(self, x: np.ndarray) -> float:
        """Global objective ``f(x) = mean_i f_i(x)``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(np.mean(self.local_values(np.tile(x[:, None], (1, self.n)))))

    def grad(self, x: np.ndarray) -> np.ndarray:
        """Global gradient at a single point."""
        x = np.asarray(x, dtype=float).reshape(-1)
        g = self.hess.mean() * x - self.scaled_offsets.mean(axis=1)
        if self.c:
            g = g - self.c * np.sin(x)
        return g


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian gradient noise with ``E||noise||^2 = sigma^2`` per node."""

    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")


def _check_shape(problem: Problem, X: np.ndarray) -> None:
    if X.shape != (problem.d, problem.n):
        raise ValueError(
            f"iterate matrix has shape {X.shape}, expected {(problem.d, problem.n)}"
        )


def make_quadratic(n: int, d: int = 10, zeta_bar: float = 0.0, seed: int = 0) -> Problem:
    return make_nonconvex(n, d, zeta_bar, 0.0, seed)


def make_nonconvex(n: int, d: int = 10, zeta_bar: float = 0.0, c: float = 1.0,
                   seed: int = 0) -> Problem:
    """Least squares plus ``c * sum_j cos(x_j)``; non-convex whenever ``c > 0``."""
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if zeta_bar < 0:
        raise ValueError(f"zeta_bar must be nonnegative, got {zeta_bar}")
    if c < 0:
        raise ValueError(f"c must be nonnegative, got {c}")
    idx = np.arange(1, n + 1, dtype=float)
    hess = idx**2 / n
    rng = np.random.default_rng(seed)
    offsets = rng.standard_normal((d, n)) * (zeta_bar / idx)
    kind = "nonconvex" if c > 0 else "quadratic"
    return Problem(kind, hess, offsets, float(zeta_bar), float(c), seed)


def make_problem(kind: str, n: int, d: int = 10, zeta_bar: float = 0.0,
                 c: float = 0.0, data_seed: int = 0) -> Problem:
    if kind == "quadratic":
        return make_quadratic(n, d, zeta_bar, data_seed)
    if kind == "nonconvex":
        return make_nonconvex(n, d, zeta_bar, c, data_seed)
    raise ValueError(f"unknown problem kind {kind!r}")


def full_gradient(problem: Problem, X: np.ndarray) -> np.ndarray:
    """Exact local gradients; column ``i`` is ``grad f_i(x_i)``."""
    _check_shape(problem, X)
    G = X * problem.hess - problem.scaled_offsets
    if problem.c:
        G -= problem.c * np.sin(X)
    return G


def node_noise(noise: NoiseModel, d: int, node: int, round: int, local_step: int) -> np.ndarray:
    """Noise vector for one node, a pure function of ``(seed, node, round, step)``.

    Uses Philox as a counter-based generator: the seed is the key and the
    remaining indices fill the upper counter words, so draws never depend on
    evaluation order.
    """
    bitgen = np.random.Philox(key=noise.seed, counter=[0, node, local_step, round])
    z = np.random.Generator(bitgen).standard_normal(d)
    return z * (noise.sigma / np.sqrt(d))


def stochastic_gradient(problem: Problem, noise: NoiseModel, X: np.ndarray,
                        round: int, local_step: int) -> np.ndarray:
    G = full_gradient(problem, X)
    if noise.sigma == 0:
        return G
    for i in range(problem.n):
        G[:, i] += node_noise(noise, problem.d, i, round, local_step)
    return G


def quadratic_optimum(problem: Problem) -> tuple[np.ndarray, float]:
    """Closed-form minimiser ``x* = (sum a_i)^-1 sum A_i b_i`` and ``f(x*)``."""
    if problem.kind != "quadratic":
        raise NotImplementedError("closed-form optimum only exists for quadratic problems")
    x_star = problem.scaled_offsets.sum(axis=1) / problem.hess.sum()
    return x_star, problem.value(x_star)


def measure_heterogeneity(problem: Problem, sample_points) -> tuple[float, list[tuple[float, float]]]:
    """Estimate ``zeta_bar^2`` with ``B = 1``.

    For each point ``x`` computes ``h = mean_i ||grad f_i(x)||^2`` and
    ``g = ||grad f(x)||^2``; the estimate is ``max(h - g)``. Returns the
    estimate and the ``(h, g)`` pairs.
    """
    points = [np.asarray(x, dtype=float).reshape(-1) for x in sample_points]
    if not points:
        raise ValueError("need at least one sample point")
    pairs = []
    for x in points:
        G = full_gradient(problem, np.tile(x[:, None], (1, problem.n)))
        h = float(np.mean(np.sum(G * G, axis=0)))
        gbar = G.mean(axis=1)
        pairs.append((h, float(gbar @ gbar)))
    return max(h - g for h, g in pairs), pairs


def partition_labels(labels, n: int, mode: str = "random", seed: int = 0) -> list[np.ndarray]:
    """Split sample indices across ``n`` nodes.

    ``random`` shuffles then splits into near-equal chunks; ``sorted`` orders
    indices by label (stable) and splits contiguously, so each node sees few
    classes.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("label list is empty")
    if n < 1 or n > labels.size:
        raise ValueError(f"need 1 <= n <= {labels.size}, got n={n}")
    if mode == "random":
        order = np.random.default_rng(seed).permutation(labels.size)
    elif mode == "sorted":
        order = np.argsort(labels, kind="stable")
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    return [np.sort(chunk) if mode == "random" else chunk
            for chunk in np.array_split(order, n)]
