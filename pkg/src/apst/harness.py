"""Experiment protocols, grid search, reference oracles and bound checks."""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .learner_apst import (
    ApstConfig,
    ApstLearner,
    Hypothesis,
    InsertPolicy,
    Mode,
    RoundRecord,
    replay_losses,
)
from .learner_pst import PST_GAMMA, PstLearner
from .multiclass import MulticlassLearner
from .sequences import Dataset, split
from .suffix_tree import ApproxSuffixTree, Match, hamming, paused_gc
from .weighting import WeightParams, gamma_const, min_depth, omega

PROTOCOLS = {
    "synthetic_402040": ((0.4, 0.2, 0.4), ("train", "validation", "test")),
    "real_3070": ((0.3, 0.7), ("train", "test")),
}

MODELS = ("pst", "apst", "apst-mc")


class OracleSizeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# reference oracles


def oracle_matches(tree: ApproxSuffixTree, history: Sequence[int], t: int, epsilon: int,
                   max_depth: int | None = None, limit: int = 100_000) -> list[Match]:
    """Brute force: compare every node's string with the history, no pruning."""
    if tree.node_count > limit:
        raise OracleSizeError(f"tree has {tree.node_count} nodes, oracle limit is {limit}")
    cap = t - 1 if max_depth is None else min(t - 1, max_depth)
    out = []
    for node in tree.nodes():
        s = node.spell()
        i = len(s)
        if i > cap:
            continue
        k = hamming(s, history[t - 1 - i : t - 1])
        if k <= epsilon:
            out.append(Match(node, i, k))
    return out


def oracle_sum_omega_sq(tree, history, t, params: WeightParams, max_depth=None) -> float:
    return math.fsum(omega(i, k, params) ** 2
                     for _, i, k in oracle_matches(tree, history, t, params.epsilon, max_depth))


def neighborhood_mass(t: int, params: WeightParams, n_symbols: int = 2) -> float:
    """Squared weight mass of the full epsilon-ball around every history suffix.

    A length-i string has ``C(i, k) (K-1)^k`` neighbours at distance exactly k.
    """
    total = []
    for i in range(1, t):
        for k in range(min(params.epsilon, i) + 1):
            total.append(math.comb(i, k) * (n_symbols - 1) ** k * omega(i, k, params) ** 2)
    return math.fsum(total)


def complete_tree(depth: int, n_symbols: int = 2) -> ApproxSuffixTree:
    tree = ApproxSuffixTree(n_symbols)
    frontier = [tree.root]
    for _ in range(depth):
        frontier = [tree.add_child(node, s) for node in frontier for s in range(n_symbols)]
    return tree


# ---------------------------------------------------------------------------
# models and protocols


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    config: ApstConfig | None = None

    def __post_init__(self):
        if self.kind not in MODELS:
            raise ValueError(f"unknown model {self.kind!r}; expected one of {MODELS}")
        if self.kind != "pst" and self.config is None:
            raise ValueError(f"model {self.kind!r} needs an ApstConfig")

    @property
    def key(self) -> tuple:
        if self.config is None:
            return (self.kind, 0.0, 0.0, 0)
        p = self.config.params
        return (self.kind, p.lam, p.xi, p.epsilon)

    def build(self, ds: Dataset):
        if self.kind == "pst":
            if not ds.alphabet.binary:
                raise ValueError("the pst baseline is binary only")
            return PstLearner(ds.n_features, 2)
        if self.kind == "apst":
            if not ds.alphabet.binary:
                raise ValueError("model 'apst' is binary; use 'apst-mc' for K > 2")
            return ApstLearner(self.config, ds.n_features, 2)
        return MulticlassLearner(self.config, ds.alphabet, ds.n_features)


def final_depth(learner) -> int:
    if isinstance(learner, MulticlassLearner):
        return learner.max_depth
    return learner.tree.max_depth


def final_node_count(learner) -> int:
    if isinstance(learner, MulticlassLearner):
        return learner.node_count
    return learner.tree.node_count


def run_online(learner, ds: Dataset, freeze_after: int | None = None) -> list[RoundRecord]:
    """One online pass; rounds after ``freeze_after`` predict without learning."""
    symbols = ds.symbols
    inputs = ds.inputs
    binary = not isinstance(learner, MulticlassLearner)
    with paused_gc():
        return _drive(learner, symbols, inputs, binary, freeze_after)


def _drive(learner, symbols, inputs, binary, freeze_after):
    trace = []
    for t in range(1, len(symbols) + 1):
        x = inputs[t - 1]
        y = (1 if symbols[t - 1] else -1) if binary else symbols[t - 1]
        if freeze_after is not None and t > freeze_after:
            if binary:
                h, y_hat = learner.predict(x, symbols, t)[:2]
                trace.append(RoundRecord(t, h, y_hat, y, max(0.0, 1 - y * h), 0.0, False,
                                         getattr(learner, "d", 0), getattr(learner, "P", 0.0),
                                         learner.L, 0, 0.0))
            else:
                scores, y_hat, _ = learner.predict(x, symbols, t)
                trace.append(RoundRecord(t, scores[y_hat], y_hat, y, 0.0, 0.0, False,
                                         learner.max_depth_cap(), 0.0, 0.0, 0, 0.0,
                                         scores=list(scores)))
            continue
        trace.append(learner.step(x, y, symbols, t))
    return trace


def segment_accuracy(trace: Sequence[RoundRecord], start: int, stop: int,
                     mask: Sequence[bool] | None) -> float:
    """Accuracy over rounds ``start+1 .. stop``, skipping corrupted positions."""
    hits = total = 0
    for r in trace[start:stop]:
        if mask is not None and mask[r.t - 1]:
            continue
        total += 1
        hits += r.y_hat == r.y
    return hits / total if total else float("nan")


@dataclass
class ReportRow:
    model: str
    lam: float
    xi: float
    epsilon: int
    mode: str
    seed: int
    protocol: str
    train_fraction: float
    train_acc: float
    val_acc: float
    test_acc: float
    final_depth: int
    node_count: int
    runtime: float

    @property
    def key(self) -> tuple:
        return (self.model, self.lam, self.xi, self.epsilon)


CSV_COLUMNS = [f.name for f in ReportRow.__dataclass_fields__.values()]


def run_protocol(ds: Dataset, model: ModelSpec, protocol: str = "synthetic_402040",
                 *, seed: int = 0, freeze_after_train: bool = False,
                 return_trace: bool = False):
    """Train online over the whole stream and score each protocol segment."""
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    fractions, names = PROTOCOLS[protocol]
    segments = dict(zip(names, split(ds, fractions)))
    learner = model.build(ds)
    t0 = time.perf_counter()
    freeze = segments["train"].stop if freeze_after_train else None
    trace = run_online(learner, ds, freeze)
    runtime = time.perf_counter() - t0
    acc = {name: segment_accuracy(trace, seg.start, seg.stop, ds.mask)
           for name, seg in segments.items()}
    cfg = model.config
    row = ReportRow(
        model=model.kind,
        lam=cfg.params.lam if cfg else 0.0,
        xi=cfg.params.xi if cfg else 0.0,
        epsilon=cfg.params.epsilon if cfg else 0,
        mode=cfg.mode.value if cfg else Mode.UNBOUNDED.value,
        seed=seed,
        protocol=protocol,
        train_fraction=fractions[0],
        train_acc=acc["train"],
        val_acc=acc.get("validation", float("nan")),
        test_acc=acc["test"],
        final_depth=final_depth(learner),
        node_count=final_node_count(learner),
        runtime=runtime,
    )
    if return_trace:
        return row, trace, learner
    return row


# ---------------------------------------------------------------------------
# grid search


@dataclass
class GridSpec:
    lambdas: Sequence[float] = (2, 4, 6, 8, 10, 12)
    xis: Sequence[float] = (0.5, 0.7, 0.9, 0.99)
    epsilons: Sequence[int] = (0, 1)
    models: Sequence[str] = ("apst",)
    seeds: Sequence[int] = (0,)
    mode: Mode = Mode.SELF_BOUNDED
    insert_policy: InsertPolicy = InsertPolicy.EXACT_ONLY

    @classmethod
    def multiclass(cls, **kw) -> "GridSpec":
        kw.setdefault("epsilons", (0, 1, 2))
        kw.setdefault("models", ("apst-mc",))
        return cls(**kw)

    def model_specs(self) -> list[ModelSpec]:
        specs = []
        for kind in self.models:
            if kind == "pst":
                specs.append(ModelSpec("pst"))
                continue
            for lam in self.lambdas:
                for xi in self.xis:
                    for eps in self.epsilons:
                        cfg = ApstConfig(WeightParams(float(lam), float(xi), int(eps)),
                                         self.mode, self.insert_policy)
                        specs.append(ModelSpec(kind, cfg))
        if not specs:
            raise ValueError("grid is empty")
        return specs


def _selection_key(row: ReportRow):
    score = row.val_acc if not math.isnan(row.val_acc) else row.train_acc
    if math.isnan(score):
        score = -1.0
    return (-score, row.final_depth, row.lam, row.xi, row.epsilon)


def select_best(rows: Iterable[ReportRow], where=None) -> ReportRow:
    """Highest validation accuracy; ties by smaller depth, then (lambda, xi, eps).

    Protocols without a validation segment select on training accuracy.
    """
    pool = [r for r in rows if where is None or where(r)]
    if not pool:
        raise ValueError("no rows to select from")
    return min(pool, key=_selection_key)


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    values = [v for v in values if not math.isnan(v)]
    if not values:
        return float("nan"), float("nan")
    if len(values) == 1:
        return values[0], 0.0
    return statistics.fmean(values), statistics.stdev(values)


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    protocol: str
    best: list[ReportRow] = field(default_factory=list)

    def best_by(self, where=None) -> list[ReportRow]:
        """Per (seed, model) grid-selected rows, optionally restricted first."""
        groups: dict[tuple, list[ReportRow]] = {}
        for r in self.rows:
            if where is None or where(r):
                groups.setdefault((r.seed, r.model), []).append(r)
        return [select_best(g) for _, g in sorted(groups.items())]

    def summary(self, where=None) -> dict:
        out = {}
        best = self.best_by(where)
        for model in sorted({r.model for r in best}):
            chosen = [r for r in best if r.model == model]
            acc_m, acc_s = _mean_std([r.test_acc for r in chosen])
            dep_m, dep_s = _mean_std([float(r.final_depth) for r in chosen])
            out[model] = {
                "n_seeds": len(chosen),
                "test_acc_mean": acc_m,
                "test_acc_std": acc_s,
                "depth_mean": dep_m,
                "depth_std": dep_s,
                "best_lambda_histogram": dict(sorted(Counter(r.lam for r in chosen).items())),
                "selected": [{"seed": r.seed, "lambda": r.lam, "xi": r.xi,
                              "epsilon": r.epsilon} for r in chosen],
            }
        return out

    def to_csv(self, with_runtime: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            doc = asdict(r)
            if not with_runtime:
                doc["runtime"] = 0.0
            writer.writerow([doc[c] for c in CSV_COLUMNS])
        return buf.getvalue()


def _run_task(args):
    ds, model, protocol, seed, freeze = args
    return run_protocol(ds, model, protocol, seed=seed, freeze_after_train=freeze)


def grid_search(datasets, grid: GridSpec, protocol: str = "synthetic_402040", *,
                jobs: int = 1, freeze_after_train: bool = False) -> ExperimentReport:
    """Run every grid point on every dataset.

    ``datasets`` is a single Dataset or a sequence of ``(seed, Dataset)`` pairs.
    Rows come back in (dataset, config) order regardless of ``jobs``.
    """
    if isinstance(datasets, Dataset):
        datasets = [(grid.seeds[0] if grid.seeds else 0, datasets)]
    specs = grid.model_specs()
    tasks = [(ds, spec, protocol, seed, freeze_after_train)
             for seed, ds in datasets for spec in specs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_run_task(t) for t in tasks]
    report = ExperimentReport(rows, protocol)
    report.best = report.best_by()
    return report


# ---------------------------------------------------------------------------
# bound verification


@dataclass
class Check:
    name: str
    passed: bool
    lhs: float
    rhs: float
    detail: str = ""
    # structural checks (monotonicity) carry no meaningful slack
    inequality: bool = True

    @property
    def slack(self) -> float:
        """Relative margin ``(rhs - lhs) / |rhs|``; negative means violated."""
        if not self.inequality:
            return 0.0 if self.passed else -1.0
        return (self.rhs - self.lhs) / max(abs(self.rhs), 1e-300)


@dataclass
class BoundReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def worst(self) -> Check | None:
        failed = [c for c in self.checks if not c.passed]
        if failed:
            return failed[0]
        ineq = [c for c in self.checks if c.inequality]
        return min(ineq, key=lambda c: c.slack) if ineq else None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [dict(asdict(c), slack=c.slack) for c in self.checks],
        }


def _leq(name, lhs, rhs, rel=1e-9, detail="") -> Check:
    return Check(name, lhs <= rhs + rel * abs(rhs) + 1e-300, lhs, rhs, detail)


def verify_bounds(trace: Sequence[RoundRecord], final_hyp: Hypothesis | None,
                  config: ApstConfig | None, *, symbols=None, inputs=None,
                  gamma: float | None = None, rel: float = 1e-9) -> BoundReport:
    """Check the per-round invariants and the cumulative loss bounds.

    ``config=None`` means the classical PST (constant 1 in place of gamma).
    The final-hypothesis comparison needs the stream (``symbols``) to replay.
    """
    checks: list[Check] = []
    if not trace:
        return BoundReport(checks)
    if gamma is None:
        gamma = gamma_const(config.params) if config is not None else PST_GAMMA
    self_bounded = config is not None and config.mode is Mode.SELF_BOUNDED
    multiclass = trace[0].scores is not None

    if not multiclass:
        worst = max(trace, key=lambda r: max(r.sum_omega_sq, r.update_omega_sq))
        checks.append(_leq("weight_mass", max(worst.sum_omega_sq, worst.update_omega_sq),
                           gamma + 1e-9, 0.0, f"worst round t={worst.t}"))

    if self_bounded:
        worst_pl = None
        for r in trace:
            pairs = zip(r.class_P, r.class_L) if r.class_P is not None else [(r.P_after, r.L_after)]
            for P, L in pairs:
                c = _leq("P_sq_le_L", P * P, L, rel, f"t={r.t}")
                if worst_pl is None or c.slack < worst_pl.slack:
                    worst_pl = c
        checks.append(worst_pl)
        floor = min_depth(config.params)
        ds = [r.d_after for r in trace]
        monotone = all(a <= b for a, b in zip(ds, ds[1:]))
        fired = [r for r in trace if r.updated]
        floor_ok = all(r.d_after >= floor for r in fired)
        checks.append(Check("depth_monotone", monotone and floor_ok, float(not monotone),
                            float(not floor_ok), f"floor {floor}", inequality=False))

    if multiclass:
        return BoundReport(checks)

    T = len(trace)
    ratio = 3.0 + gamma
    if self_bounded:
        lhs = math.fsum(r.loss ** 2 for r in trace if r.loss > 0.5)
    else:
        lhs = math.fsum(r.loss ** 2 for r in trace)
    checks.append(_leq("loss_bound_zero_hypothesis", lhs, ratio * T / 2.0, rel))

    if final_hyp is not None and symbols is not None:
        star = replay_losses(final_hyp, symbols, inputs)
        w_sq, g_sq = final_hyp.squared_norms()
        half_star = 0.5 * math.fsum(l * l for l in star)
        if self_bounded:
            rhs = ratio * ((1 + math.sqrt(5)) / 2 * math.sqrt(g_sq) + math.sqrt(w_sq)
                           + math.sqrt(half_star)) ** 2
        else:
            rhs = ratio * (w_sq + g_sq + half_star)
        checks.append(_leq("loss_bound_final_hypothesis", lhs, rhs, rel))
    return BoundReport(checks)
