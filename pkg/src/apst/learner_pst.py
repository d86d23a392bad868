"""The classical exact-matching prediction suffix tree.

Suffix weights decay as ``2^(-i/2)`` and only exact suffixes are looked up
or updated.  The step size is ``loss / (||x||^2 + 2 + 1)``; the constant 1
caps ``sum_i 2^-i``, the squared weight mass of any exact match set.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .learner_apst import Hypothesis, RoundRecord, sign
from .suffix_tree import ApproxSuffixTree
from .weighting import OmegaTable, WeightParams

PST_GAMMA = 1.0


def pst_weight(i: int, k: int = 0) -> float:
    return 2.0 ** (-i / 2.0)


class PstLearner:
    def __init__(self, n_features: int = 0, n_symbols: int = 2):
        self.w = np.zeros(n_features)
        self.tree = ApproxSuffixTree(n_symbols)
        self.L = 0.0
        self._weights = [0.0]

    def _weight_row(self, depth):
        ws = self._weights
        while len(ws) <= depth:
            ws.append(pst_weight(len(ws)))
        return ws

    def predict(self, x, history: Sequence[int], t: int) -> tuple[float, int]:
        x = np.asarray(x, dtype=float)
        if x.shape != self.w.shape:
            raise ValueError(f"input dimension {x.shape} does not match weights {self.w.shape}")
        h = float(self.w @ x) if x.size else 0.0
        ws = self._weight_row(t - 1)
        node = self.tree.root
        for i in range(1, t):
            children = node.children
            node = children[history[t - 1 - i]] if children is not None else None
            if node is None:
                break
            h += ws[i] * node.g
        return h, sign(h)

    def update(self, x, y: int, h: float, history: Sequence[int], t: int) -> RoundRecord:
        if y not in (-1, 1):
            raise ValueError(f"binary label must be -1 or +1, got {y!r}")
        x = np.asarray(x, dtype=float)
        loss = max(0.0, 1.0 - y * h)
        tau = 0.0
        if loss > 0:
            tau = loss / (float(x @ x) + 2.0 + PST_GAMMA)
            self.L += tau * loss
            if x.size:
                self.w += y * tau * x
            ws = self._weight_row(t - 1)
            tree = self.tree
            node = tree.root
            for i in range(1, t):
                node = tree.add_child(node, history[t - 1 - i])
                node.g += y * ws[i] * tau
        return RoundRecord(t, h, sign(h), y, loss, tau, loss > 0, self.tree.max_depth,
                           0.0, self.L, 0, 0.0)

    def step(self, x, y: int, history: Sequence[int], t: int) -> RoundRecord:
        h, _ = self.predict(x, history, t)
        return self.update(x, y, h, history, t)

    def snapshot(self) -> Hypothesis:
        return Hypothesis(self.w.copy(), self.tree.copy(), pst_table())


def pst_table() -> OmegaTable:
    """Weight table for replaying a PST through the generic hypothesis code."""
    # the Poisson parameters are placeholders; ``pst_weight`` overrides them
    return OmegaTable(WeightParams(1.0, 0.5, 0), weight=pst_weight)


def pst_predict(learner: PstLearner, x, history, t):
    return learner.predict(x, history, t)


def pst_update(learner: PstLearner, x, y, h, history, t):
    return learner.update(x, y, h, history, t)
