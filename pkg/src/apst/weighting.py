"""Contribution weights and the bound constants of the approximate-matching PST.

Everything factorial-shaped goes through ``math.lgamma`` so that weights for
long suffixes neither underflow nor overflow.  Integer-order incomplete gamma
ratios are evaluated as partial Poisson sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class WeightParams:
    """Hyperparameters of the weighting function.

    ``lam`` is the Poisson rate that sets the preferred suffix length,
    ``xi`` damps approximate matches and ``epsilon`` is the Hamming budget.
    """

    lam: float
    xi: float
    epsilon: int = 0

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be a finite positive real, got {self.lam!r}")
        if not (0.0 < self.xi < 1.0):
            raise ValueError(f"xi must lie in (0, 1), got {self.xi!r}")
        if isinstance(self.epsilon, bool) or int(self.epsilon) != self.epsilon:
            raise ValueError(f"epsilon must be an integer, got {self.epsilon!r}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", int(self.epsilon))


def log_omega(i: int, k: int, p: WeightParams) -> float:
    if i < 1 or k < 0 or k > i:
        raise ValueError(f"need 1 <= i and 0 <= k <= i, got i={i}, k={k}")
    return 0.5 * (k * math.log1p(-p.xi) + i * math.log(p.lam) - p.lam - math.lgamma(i + 1))


def omega(i: int, k: int, p: WeightParams) -> float:
    """Weight of a tree node of length ``i`` lying ``k`` mismatches from the history."""
    return math.exp(log_omega(i, k, p))


def _poisson_terms(lam: float, lo: int, hi: int) -> list[float]:
    # e^-lam * lam^j / j! for j in [lo, hi]
    log_lam = math.log(lam)
    return [math.exp(j * log_lam - lam - math.lgamma(j + 1)) for j in range(lo, hi + 1)]


def gamma_bar(p: WeightParams) -> float:
    """Regularized upper incomplete gamma Gamma(1+eps, lam)/Gamma(1+eps).

    For integer order this is the Poisson CDF at ``eps``.
    """
    return math.fsum(_poisson_terms(p.lam, 0, p.epsilon))


def lemma3_bound(p: WeightParams) -> float:
    """Sum_{k<=eps} lam^k/k!, the length-free cap on the squared weight mass."""
    log_lam = math.log(p.lam)
    return math.fsum(math.exp(k * log_lam - math.lgamma(k + 1)) for k in range(p.epsilon + 1))


def cor21_bound(p: WeightParams) -> float:
    """exp(lam(1-xi)) - exp(-lam), the budget-free cap on the squared weight mass."""
    return math.exp(p.lam * (1.0 - p.xi)) - math.exp(-p.lam)


def lemma2_bound(t: int, p: WeightParams) -> float:
    """Length-dependent cap for a history of ``t - 1`` symbols.

    Equals ``-e^-lam + e^-lam * sum_{j<t} (lam(2-xi))^j / j!``; the j=0 term
    cancels the leading constant, so the sum starts at j=1.
    """
    if t < 1 or int(t) != t:
        raise ValueError(f"t must be a positive integer, got {t!r}")
    rate = p.lam * (2.0 - p.xi)
    log_rate = math.log(rate)
    return math.fsum(
        math.exp(j * log_rate - p.lam - math.lgamma(j + 1)) for j in range(1, int(t))
    )


def gamma_const(p: WeightParams) -> float:
    """The per-round cap on squared weight mass used in the step size."""
    return min(cor21_bound(p), lemma3_bound(p))


def regret_factor(p: WeightParams) -> float:
    """``3 + gamma``, the competitive ratio of both loss bounds."""
    return 3.0 + gamma_const(p)


def log_chernoff_factor(d: int, lam: float) -> float:
    if d < 1:
        raise ValueError(f"depth must be >= 1, got {d!r}")
    return d + d * math.log(lam) - d * math.log(d)


def chernoff_factor(d: int, p: WeightParams) -> float:
    """f(d) = e^d lam^d d^-d."""
    return math.exp(log_chernoff_factor(d, p.lam))


def u_lambda(d: int, p: WeightParams) -> float:
    """Chernoff upper bound on the weight mass of suffixes longer than ``d``."""
    return math.exp(math.log(gamma_bar(p)) + log_chernoff_factor(d, p.lam))


def min_depth(p: WeightParams) -> int:
    """Smallest depth the self-bounded learner may use, ceil(lam + eps)."""
    return max(1, math.ceil(p.lam + p.epsilon))


class OmegaTable:
    """Lazily grown table of ``omega(i, k)`` for ``k <= epsilon``.

    ``table[i][k]`` is the weight; row 0 is unused.  A custom ``weight``
    callable replaces the Poisson weights (the classical PST uses 2^(-i/2)).
    """

    def __init__(self, params: WeightParams, weight=None):
        self.params = params
        self.epsilon = params.epsilon
        self._weight = weight
        self.rows: list[list[float]] = [[]]

    def _row(self, i):
        kmax = min(self.epsilon, i)
        if self._weight is not None:
            return [self._weight(i, k) for k in range(kmax + 1)]
        return [omega(i, k, self.params) for k in range(kmax + 1)]

    def ensure(self, depth: int) -> list[list[float]]:
        rows = self.rows
        while len(rows) <= depth:
            rows.append(self._row(len(rows)))
        return rows

    def __call__(self, i: int, k: int) -> float:
        return self.ensure(i)[i][k]
