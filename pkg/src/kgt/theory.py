"""Communication-round bounds and stepsize rules with unit big-O constants.

The rate functions predict scalings only: compare ratios between settings,
never absolute round counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "RateInputs",
    "rate_kgt",
    "rate_gt",
    "rate_periodical_gt",
    "rate_dsgd",
    "rate_terms",
    "all_rates",
    "stepsize_caps",
    "order_stepsizes",
    "psi",
    "tune_stepsize",
]


@dataclass(frozen=True)
class RateInputs:
    sigma: float
    n: int
    K: int
    p: float
    eps: float
    L: float = 1.0
    F0: float = 1.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        for name in ("n", "K", "p", "L", "F0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


def rate_terms(inp: RateInputs, variant: str, zeta_bar: float = 0.0) -> tuple[float, float, float]:
    """The (noise, transient, deterministic) terms for ``variant``, before the ``L F0`` factor."""
    s, n, K, p, eps = inp.sigma, inp.n, inp.K, inp.p, inp.eps
    if variant in ("kgt", "periodical_gt_fullgrad"):
        return s**2 / (n * K * eps**2), s / (p**2 * math.sqrt(K) * eps**1.5), 1 / (p**2 * eps)
    if variant == "periodical_gt":
        return s**2 / (n * K * eps**2), s / (p**2 * eps**1.5), 1 / (p**2 * eps)
    if variant == "gt":
        return s**2 / (n * eps**2), s / (p**1.5 * eps**1.5), 1 / (p**2 * eps)
    if variant == "dsgd":
        if zeta_bar < 0:
            raise ValueError(f"zeta_bar must be nonnegative, got {zeta_bar}")
        return (s**2 / (n * K * eps**2),
                (zeta_bar / p + s / math.sqrt(p * K)) / eps**1.5,
                1 / (p * eps))
    raise ValueError(f"no rate for variant {variant!r}")


def _bound(inp, variant, zeta_bar=0.0):
    return sum(rate_terms(inp, variant, zeta_bar)) * inp.L * inp.F0


def rate_kgt(inp: RateInputs) -> float:
    return _bound(inp, "kgt")


def rate_gt(inp: RateInputs) -> float:
    return _bound(inp, "gt")


def rate_periodical_gt(inp: RateInputs, fullgrad: bool = False) -> float:
    return _bound(inp, "periodical_gt_fullgrad" if fullgrad else "periodical_gt")


def rate_dsgd(inp: RateInputs, zeta_bar: float) -> float:
    return _bound(inp, "dsgd", zeta_bar)


def all_rates(inp: RateInputs, zeta_bar: float = 0.0) -> dict[str, float]:
    return {
        "kgt": rate_kgt(inp),
        "gt": rate_gt(inp),
        "periodical_gt": rate_periodical_gt(inp),
        "periodical_gt_fullgrad": rate_periodical_gt(inp, fullgrad=True),
        "dsgd": rate_dsgd(inp, zeta_bar),
    }


def stepsize_caps(p: float, K: int, L: float, v: float = 2.0) -> tuple[float, float, float]:
    """Explicit caps of the descent analysis: ``(p/(96 v K L), v p, p^2/(96 K L))``."""
    if v <= 1:
        raise ValueError(f"v must exceed 1, got {v}")
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    return p / (96 * v * K * L), v * p, p * p / (96 * K * L)


def order_stepsizes(p: float, K: int, L: float) -> tuple[float, float]:
    """Order-of-magnitude stepsizes ``eta_c = p/(K L)``, ``eta_s = p`` (unit constants)."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    return p / (K * L), p


def psi(eta: float, r0: float, b: float, e: float, T: int) -> float:
    """``r0 / ((T+1) eta) + b eta + e eta^2``."""
    if eta == 0:
        return 0.0 if r0 == 0 else math.inf
    if math.isinf(eta):
        return 0.0 if b == 0 and e == 0 else math.inf
    return r0 / ((T + 1) * eta) + b * eta + e * eta * eta


def tune_stepsize(r0: float, b: float, e: float, u: float, T: int) -> tuple[float, float]:
    """Pick ``eta <= 1/u`` minimising ``psi`` among closed-form candidates.

    Candidates are the minimisers of each pairwise trade-off,
    ``sqrt(r0/(b(T+1)))`` and ``(r0/(e(T+1)))^(1/3)``, their minimum and the
    cap ``1/u``, all clipped to the cap. ``u = 0`` means no cap.
    Returns ``(eta, bound)`` where ``bound`` is
    ``2 sqrt(b r0/(T+1)) + 2 e^(1/3) (r0/(T+1))^(2/3) + u r0/(T+1)``.
    """
    if min(r0, b, e, u) < 0 or T < 0:
        raise ValueError("tune_stepsize needs nonnegative parameters")
    m = r0 / (T + 1)
    bound = 2 * math.sqrt(b * m) + 2 * e ** (1 / 3) * m ** (2 / 3) + u * m
    cap = 1 / u if u > 0 else math.inf

    if r0 == 0:
        return 0.0, bound

    candidates = []
    if b > 0:
        candidates.append(math.sqrt(m / b))
    if e > 0:
        candidates.append((m / e) ** (1 / 3))
    if candidates:
        candidates.append(min(candidates))
    candidates.append(cap)
    candidates = [min(c, cap) for c in candidates]
    eta = min(candidates, key=lambda c: (psi(c, r0, b, e, T), c))
    return eta, bound
