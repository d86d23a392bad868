"""Online learners for the approximate-matching prediction suffix tree.

Two regimes share one update rule:

* ``unbounded`` updates on any positive hinge loss and lets the tree grow
  to the full history length;
* ``self-bounded`` updates only when the loss exceeds 1/2 and grows a depth
  cap ``d`` just far enough to keep the accumulator invariant ``P^2 <= L``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .suffix_tree import ApproxSuffixTree, Match, match_triples, paused_gc, score_matches, score_only
from .weighting import (
    OmegaTable,
    WeightParams,
    gamma_bar,
    gamma_const,
    log_chernoff_factor,
    min_depth,
)

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    UNBOUNDED = "unbounded"
    SELF_BOUNDED = "self-bounded"


class InsertPolicy(str, Enum):
    EXACT_ONLY = "exact_only"
    FULL_NEIGHBORHOOD = "full_neighborhood"


class BoundViolation(AssertionError):
    """A quantity that a theorem guarantees came out on the wrong side."""


@dataclass(frozen=True)
class ApstConfig:
    params: WeightParams
    mode: Mode = Mode.SELF_BOUNDED
    insert_policy: InsertPolicy = InsertPolicy.EXACT_ONLY
    margin_gate: float | None = None
    delta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "insert_policy", InsertPolicy(self.insert_policy))
        default_gate = 0.5 if self.mode is Mode.SELF_BOUNDED else 0.0
        if self.margin_gate is None:
            object.__setattr__(self, "margin_gate", default_gate)
        elif self.mode is Mode.SELF_BOUNDED and self.margin_gate != 0.5:
            raise ValueError("the self-bounded learner requires margin_gate = 1/2")
        if self.delta is not None:
            if not 0.0 < self.delta < 1.0:
                raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")
            logger.warning("delta=%s is accepted but has no effect on the learner", self.delta)

    def to_dict(self) -> dict:
        return {
            "lambda": self.params.lam,
            "xi": self.params.xi,
            "epsilon": self.params.epsilon,
            "mode": self.mode.value,
            "insert_policy": self.insert_policy.value,
            "margin_gate": self.margin_gate,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ApstConfig":
        params = WeightParams(doc["lambda"], doc["xi"], doc["epsilon"])
        return cls(params, Mode(doc["mode"]), InsertPolicy(doc["insert_policy"]),
                   doc.get("margin_gate"))


@dataclass
class RoundRecord:
    t: int
    h: float
    y_hat: int
    y: int
    loss: float
    tau: float
    updated: bool
    d_after: int
    P_after: float
    L_after: float
    matches_count: int
    sum_omega_sq: float
    # weight mass of every node the update touched, including fresh inserts
    update_omega_sq: float = 0.0
    # multiclass only: per-class margins and per-class (d, P, L)
    scores: list | None = None
    class_d: list | None = None
    class_P: list | None = None
    class_L: list | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, doc: dict) -> "RoundRecord":
        return cls(**doc)


def sign(h: float) -> int:
    return 1 if h >= 0 else -1


def grow_depth(d_prev: int, p_prev: float, tau: float, ell: float,
               params: WeightParams, log_gbar: float | None = None) -> int:
    """Smallest admissible depth for a gated update.

    Returns the least ``d >= max(ceil(lam + eps), d_prev)`` with
    ``gamma_bar * f(d) <= ((sqrt(P^2 + tau*ell) - P) / (2 tau))^2``.
    """
    if not (ell > 0.5 and tau > 0):
        raise ValueError(f"depth growth needs ell > 1/2 and tau > 0, got {ell!r}, {tau!r}")
    if log_gbar is None:
        log_gbar = math.log(gamma_bar(params))
    # (sqrt(P^2 + tau ell) - P) / (2 tau), rewritten to avoid cancellation
    inner = ell / (2.0 * (math.sqrt(p_prev * p_prev + tau * ell) + p_prev))
    log_rhs = 2.0 * math.log(inner)
    d = max(min_depth(params), d_prev)
    while log_gbar + log_chernoff_factor(d, params.lam) > log_rhs:
        d += 1
    return d


class Hypothesis:
    """A (weight vector, scored tree) pair together with its weighting scheme."""

    def __init__(self, w: np.ndarray, tree: ApproxSuffixTree, table: OmegaTable):
        self.w = w
        self.tree = tree
        self.table = table
        self.epsilon = table.epsilon

    @classmethod
    def zero(cls, n_features: int, n_symbols: int, table: OmegaTable) -> "Hypothesis":
        return cls(np.zeros(n_features), ApproxSuffixTree(n_symbols), table)

    def squared_norms(self) -> tuple[float, float]:
        return float(self.w @ self.w), self.tree.squared_norm()

    def margin(self, x, history: Sequence[int], t: int, depth_cap: int | None = None):
        """Return ``(h, matches, sum of squared weights over matches)``.

        Matches are ``(node, i, k)`` tuples, grouped by length ``i``.
        """
        x = np.asarray(x, dtype=float)
        if x.shape != self.w.shape:
            raise ValueError(f"input dimension {x.shape} does not match weights {self.w.shape}")
        limit = t - 1 if depth_cap is None else min(t - 1, depth_cap)
        limit = min(limit, self.tree.max_depth)
        rows = self.table.ensure(limit)
        h, mass, matches = score_matches(self.tree.root, history, t, self.epsilon, limit, rows)
        if x.size:
            h += float(self.w @ x)
        return h, matches, mass

    def score(self, x, history: Sequence[int], t: int, depth_cap: int | None = None):
        """``margin`` without the match list: ``(h, mass)``."""
        x = np.asarray(x, dtype=float)
        if x.shape != self.w.shape:
            raise ValueError(f"input dimension {x.shape} does not match weights {self.w.shape}")
        limit = t - 1 if depth_cap is None else min(t - 1, depth_cap)
        limit = min(limit, self.tree.max_depth)
        rows = self.table.ensure(limit)
        h, mass = score_only(self.tree.root, history, t, self.epsilon, limit, rows)
        if x.size:
            h += float(self.w @ x)
        return h, mass

    def copy(self) -> "Hypothesis":
        return Hypothesis(self.w.copy(), self.tree.copy(), self.table)


class ApstLearner:
    """Binary online learner; also the per-class engine of the multiclass learner.

    ``weight`` overrides the Poisson weights and ``gamma`` the step-size
    constant; together they turn the learner into the classical PST.
    """

    def __init__(self, config: ApstConfig, n_features: int = 0, n_symbols: int = 2,
                 *, weight=None, gamma: float | None = None, strict: bool = False):
        self.config = config
        self.params = config.params
        self.self_bounded = config.mode is Mode.SELF_BOUNDED
        self.table = OmegaTable(self.params, weight)
        self.gamma = gamma_const(self.params) if gamma is None else float(gamma)
        self.log_gbar = math.log(gamma_bar(self.params))
        self.hyp = Hypothesis.zero(n_features, n_symbols, self.table)
        self.d = 0
        self.P = 0.0
        self.L = 0.0
        self.strict = strict

    @property
    def tree(self) -> ApproxSuffixTree:
        return self.hyp.tree

    @property
    def w(self) -> np.ndarray:
        return self.hyp.w

    def depth_cap(self, t: int) -> int:
        if self.self_bounded:
            return min(self.d, t - 1)
        return t - 1

    def predict(self, x, history: Sequence[int], t: int):
        """Margin, predicted sign and the match set at round ``t``."""
        h, matches, mass = self.hyp.margin(x, history, t, self.depth_cap(t))
        if self.strict and mass > self.gamma + 1e-9:
            raise BoundViolation(f"round {t}: weight mass {mass!r} exceeds gamma {self.gamma!r}")
        return h, sign(h), matches

    def gate(self, loss: float) -> bool:
        return loss > self.config.margin_gate

    def step_size(self, loss: float, x) -> float:
        xsq = 0.0
        if self.hyp.w.size:
            x = np.asarray(x, dtype=float)
            xsq = float(x @ x)
        return loss / (xsq + 2.0 + self.gamma)

    def learn(self, direction: int, tau: float, loss: float, x, history: Sequence[int],
              t: int, matches: list[Match]) -> float:
        """Apply one gated update in the given direction.

        Handles depth growth and the P/L accumulators in self-bounded mode.
        ``matches`` must be the prediction-time match set of this round.
        Returns the squared weight mass of every node touched.
        """
        cap_pred = self.depth_cap(t)
        if self.self_bounded:
            d = grow_depth(self.d, self.P, tau, loss, self.params, self.log_gbar)
            self.P += 2.0 * tau * math.exp(0.5 * (self.log_gbar + log_chernoff_factor(d, self.params.lam)))
            self.d = d
        self.L += tau * loss
        cap = self.depth_cap(t)
        if cap > cap_pred and self.tree.max_depth > cap_pred:
            matches = match_triples(self.tree.root, history, t, self.params.epsilon, cap)
        return self._apply(direction * tau, x, history, t, cap, matches)

    def _apply(self, step: float, x, history, t, cap, matches) -> float:
        if self.hyp.w.size:
            self.hyp.w += step * np.asarray(x, dtype=float)
        rows = self.table.ensure(max(cap, 1))
        mass = 0.0
        for node, i, k in matches:
            wgt = rows[i][k]
            node.g += step * wgt
            mass += wgt * wgt
        tree = self.tree
        if self.config.insert_policy is InsertPolicy.EXACT_ONLY:
            node = tree.root
            for i in range(1, cap + 1):
                sym = history[t - 1 - i]
                children = node.children
                child = children[sym] if children is not None else None
                if child is None:
                    # everything below a missing node is missing too
                    for j in range(i, cap + 1):
                        node = tree.add_child(node, history[t - 1 - j])
                        wgt = rows[j][0]
                        node.g = step * wgt
                        mass += wgt * wgt
                    break
                node = child
        else:
            eps = self.params.epsilon
            frontier = [(tree.root, 0)]
            for i in range(1, cap + 1):
                sym = history[t - 1 - i]
                level = []
                for node, k in frontier:
                    for s in range(tree.n_symbols):
                        kk = k if s == sym else k + 1
                        if kk > eps:
                            continue
                        children = node.children
                        child = children[s] if children is not None else None
                        if child is None:
                            child = tree.add_child(node, s)
                            wgt = rows[i][kk]
                            child.g = step * wgt
                            mass += wgt * wgt
                        level.append((child, kk))
                frontier = level
        return mass

    def update(self, x, y: int, h: float, history: Sequence[int], t: int,
               matches: list[Match] | None = None) -> RoundRecord:
        """Learn from the revealed sign ``y`` after predicting margin ``h``."""
        if y not in (-1, 1):
            raise ValueError(f"binary label must be -1 or +1, got {y!r}")
        if matches is None:
            _, matches, mass = self.hyp.margin(x, history, t, self.depth_cap(t))
        else:
            rows = self.table.ensure(matches[-1][1] if matches else 1)
            mass = sum(rows[i][k] ** 2 for _, i, k in matches)
        return self._update(x, y, h, history, t, matches, mass)

    def _update(self, x, y, h, history, t, matches, mass) -> RoundRecord:
        loss = max(0.0, 1.0 - y * h)
        tau = 0.0
        touched = 0.0
        updated = self.gate(loss)
        if updated:
            tau = self.step_size(loss, x)
            touched = self.learn(y, tau, loss, x, history, t, matches)
        return RoundRecord(t, h, sign(h), y, loss, tau, updated, self.d, self.P, self.L,
                           len(matches), mass, touched)

    def step(self, x, y: int, history: Sequence[int], t: int) -> RoundRecord:
        if y not in (-1, 1):
            raise ValueError(f"binary label must be -1 or +1, got {y!r}")
        h, matches, mass = self.hyp.margin(x, history, t, self.depth_cap(t))
        if self.strict and mass > self.gamma + 1e-9:
            raise BoundViolation(f"round {t}: weight mass {mass!r} exceeds gamma {self.gamma!r}")
        return self._update(x, y, h, history, t, matches, mass)

    def snapshot(self) -> Hypothesis:
        return self.hyp.copy()


def replay_losses(hyp: Hypothesis, symbols: Sequence[int], inputs=None,
                  depth_cap: int | None = None) -> list[float]:
    """Hinge losses a fixed binary hypothesis attains on a stream (no learning)."""
    T = len(symbols)
    if inputs is None:
        inputs = np.zeros((T, hyp.w.shape[0]))
    losses = []
    with paused_gc():
        for t in range(1, T + 1):
            h, _ = hyp.score(inputs[t - 1], symbols, t, depth_cap)
            y = 1 if symbols[t - 1] else -1
            losses.append(max(0.0, 1.0 - y * h))
    return losses


def run_binary(learner: ApstLearner, symbols: Sequence[int], inputs=None) -> list[RoundRecord]:
    """Drive a binary learner over a whole stream of 0/1 symbols."""
    T = len(symbols)
    if inputs is None:
        inputs = np.zeros((T, learner.w.shape[0]))
    trace = []
    with paused_gc():
        for t in range(1, T + 1):
            y = 1 if symbols[t - 1] else -1
            trace.append(learner.step(inputs[t - 1], y, symbols, t))
    return trace
