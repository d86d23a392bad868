"""K-symbol prediction with one approximate suffix tree per symbol.

The decision is the argmax of the per-class margins (ties go to the smallest
symbol).  A wrong prediction updates exactly two trees: the true class moves
up and the predicted class moves down, both by ``tau * omega(i, k)``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .learner_apst import ApstConfig, ApstLearner, InsertPolicy, RoundRecord
from .sequences import Alphabet
from .suffix_tree import paused_gc


class MulticlassLearner:
    def __init__(self, config: ApstConfig, alphabet: Alphabet | int, n_features: int = 0,
                 *, tau_gamma_factor: float = 2.0):
        if isinstance(alphabet, int):
            alphabet = Alphabet(alphabet)
        if config.insert_policy is not InsertPolicy.EXACT_ONLY:
            raise ValueError("multiclass trees only support the exact_only insert policy")
        self.config = config
        self.alphabet = alphabet
        self.classes = [ApstLearner(config, n_features, alphabet.size)
                        for _ in range(alphabet.size)]
        self.gamma = self.classes[0].gamma
        self.tau_gamma_factor = tau_gamma_factor

    @property
    def max_depth(self) -> int:
        return max(c.tree.max_depth for c in self.classes)

    @property
    def depths(self) -> list[int]:
        return [c.tree.max_depth for c in self.classes]

    @property
    def node_count(self) -> int:
        return sum(c.tree.node_count for c in self.classes)

    def predict(self, x, history: Sequence[int], t: int, *, collect: bool = True):
        """Per-class margins, the argmax symbol and the per-class match sets.

        With ``collect=False`` the match sets are ``None``; ``update`` then
        re-walks only the trees it changes.
        """
        scores = []
        matches = []
        masses = []
        for c in self.classes:
            if collect:
                h, m, mass = c.hyp.margin(x, history, t, c.depth_cap(t))
            else:
                (h, mass), m = c.hyp.score(x, history, t, c.depth_cap(t)), None
            scores.append(h)
            matches.append(m)
            masses.append(mass)
        self._masses = masses
        return scores, argmax(scores), matches

    def update(self, x, y: int, scores: Sequence[float], history: Sequence[int], t: int,
               matches=None) -> RoundRecord:
        if not 0 <= y < self.alphabet.size:
            raise ValueError(f"symbol {y!r} out of alphabet of size {self.alphabet.size}")
        if matches is None:
            scores, _, matches = self.predict(x, history, t)
        y_hat = argmax(scores)
        masses = getattr(self, "_masses", None) or [0.0] * len(self.classes)
        loss = tau = 0.0
        touched = 0.0
        updated = y_hat != y
        if updated:
            loss = max(scores[k] + 1.0 - scores[y] for k in range(len(scores)) if k != y)
            x = np.asarray(x, dtype=float)
            tau = loss / (float(x @ x) + 2.0 + self.tau_gamma_factor * self.gamma)
            for cls, direction in ((y, 1), (y_hat, -1)):
                c = self.classes[cls]
                m = matches[cls]
                if m is None:
                    m = c.hyp.margin(x, history, t, c.depth_cap(t))[1]
                mass = c.learn(direction, tau, loss, x, history, t, m)
                touched = max(touched, mass)
        cs = self.classes
        # headline P/L: the class closest to violating P^2 <= L
        worst = max(cs, key=lambda c: c.P * c.P - c.L)
        return RoundRecord(
            t, scores[y_hat], y_hat, y, loss, tau, updated,
            self.max_depth_cap(), worst.P, worst.L,
            sum(len(m) for m in matches if m is not None), max(masses), touched, scores=list(scores),
            class_d=[c.d for c in cs], class_P=[c.P for c in cs], class_L=[c.L for c in cs],
        )

    def max_depth_cap(self) -> int:
        return max(c.d for c in self.classes)

    def step(self, x, y: int, history: Sequence[int], t: int) -> RoundRecord:
        scores, _, matches = self.predict(x, history, t, collect=False)
        return self.update(x, y, scores, history, t, matches)


def argmax(scores: Sequence[float]) -> int:
    best = 0
    for k in range(1, len(scores)):
        if scores[k] > scores[best]:
            best = k
    return best


def run_multiclass(learner: MulticlassLearner, symbols: Sequence[int],
                   inputs=None) -> list[RoundRecord]:
    T = len(symbols)
    if inputs is None:
        inputs = np.zeros((T, learner.classes[0].w.shape[0]))
    with paused_gc():
        return [learner.step(inputs[t - 1], symbols[t - 1], symbols, t) for t in range(1, T + 1)]
