import math
import random

import numpy as np
import pytest

from apst.learner_apst import (
    ApstConfig,
    ApstLearner,
    BoundViolation,
    InsertPolicy,
    Mode,
    RoundRecord,
    grow_depth,
    replay_losses,
    run_binary,
    sign,
)
from apst.learner_pst import PST_GAMMA, PstLearner, pst_weight
from apst.suffix_tree import collect_matches
from apst.synthgen import BINARY_MOTIF, MotifSpec, generate
from apst.weighting import WeightParams, chernoff_factor, gamma_bar, gamma_const, omega

from conftest import pm

UNB = Mode.UNBOUNDED
SB = Mode.SELF_BOUNDED


def make(lam=2, xi=0.5, eps=1, mode=UNB, policy=InsertPolicy.EXACT_ONLY, n=0, **kw):
    return ApstLearner(ApstConfig(WeightParams(lam, xi, eps), mode, policy), n, 2, **kw)


def test_sign_convention():
    assert sign(0.0) == 1 and sign(-1e-300) == -1


class TestPredict:
    def test_empty_tree_is_linear(self):
        ln = make(n=3)
        ln.hyp.w[:] = [0.2, -0.1, 0.4]
        x = np.array([0.5, 0.5, 0.1])
        h, y_hat, matches = ln.predict(x, pm("+-+"), 4)
        assert h == pytest.approx(0.2 * 0.5 - 0.05 + 0.04) and matches == []

    def test_exact_budget_uses_poisson_weights(self):
        ln = make(lam=3, xi=0.5, eps=0)
        for s, g in {"+": -1.0, "++": 4.0, "-++": -2.0}.items():
            ln.tree.upsert_path(pm(s)).g = g
        p = ln.params
        h, _, _ = ln.predict([], pm("--++"), 5)
        assert h == pytest.approx(-omega(1, 0, p) + 4 * omega(2, 0, p) - 2 * omega(3, 0, p))

    def test_only_distance_one_nodes_contribute(self):
        ln = make(lam=2, xi=0.5, eps=1)
        ln.tree.upsert_path(pm("+")).g = 1.5
        ln.tree.upsert_path(pm("++")).g = -0.75
        p = ln.params
        h, _, matches = ln.predict([], pm("+-"), 3)
        assert h == pytest.approx(omega(1, 1, p) * 1.5 - omega(2, 1, p) * 0.75, rel=1e-14)
        assert {(m[1], m[2]) for m in matches} == {(1, 1), (2, 1)}

    def test_dimension_checked(self):
        with pytest.raises(ValueError):
            make(n=2).predict([1.0], (1,), 1)


class TestUnbounded:
    def test_zero_loss_round_is_quiet(self):
        ln = make()
        ln.tree.upsert_path(pm("+")).g = 100.0
        rec = ln.step([], 1, pm("+"), 2)
        assert rec.loss == 0 and rec.tau == 0 and not rec.updated
        assert ln.tree.node_count == 1 and ln.tree.root.children[1].g == 100.0

    def test_second_round_worked_example(self):
        ln = make(lam=2, xi=0.5, eps=1)
        gamma = math.e - math.exp(-2)
        assert ln.gamma == pytest.approx(gamma, rel=1e-15)
        rec = ln.update([], 1, 0.0, pm("+"), 2)
        assert rec.loss == 1.0
        assert rec.tau == pytest.approx(1 / (2 + gamma), rel=1e-15)
        assert rec.tau == pytest.approx(0.218200232128, rel=1e-11)
        assert ln.tree.node_count == 1
        assert ln.tree.find(pm("+")).g == pytest.approx(rec.tau * math.sqrt(2 * math.exp(-2)))

    def test_update_moves_every_match(self):
        ln = make(lam=2, xi=0.5, eps=1)
        ln.tree.upsert_path(pm("--"))
        hist = pm("++")
        h, _, matches = ln.predict([], hist, 3)
        rec = ln.update([], -1, h, hist, 3, matches)
        p = ln.params
        # "-" sits at distance 1 from "+", "--" at distance 2 (outside the budget)
        assert ln.tree.find(pm("-")).g == pytest.approx(-rec.tau * omega(1, 1, p))
        assert ln.tree.find(pm("--")).g == 0.0
        assert ln.tree.find(pm("+")).g == pytest.approx(-rec.tau * omega(1, 0, p))
        assert ln.tree.find(pm("++")).g == pytest.approx(-rec.tau * omega(2, 0, p))

    def test_full_neighborhood_inserts_ball(self):
        ln = make(lam=2, xi=0.5, eps=1, policy=InsertPolicy.FULL_NEIGHBORHOOD)
        ln.step([], 1, pm("+-+"), 4)
        # every length-i string within distance 1 of the suffix: 2 + 3 + 4
        assert ln.tree.node_count == 9
        assert ln.tree.is_suffix_closed()

    def test_bad_label(self):
        with pytest.raises(ValueError):
            make().step([], 0, (1,), 1)


class TestGrowDepth:
    def test_matches_brute_force_scan(self):
        p = WeightParams(4, 0.5, 1)
        thr = 1 / (4 * 0.1)
        d = 5
        while gamma_bar(p) * chernoff_factor(d, p) > thr:
            d += 1
        assert grow_depth(0, 0.0, 0.1, 1.0, p) == d

    @pytest.mark.parametrize("lam,eps,P,tau,ell", [
        (2, 0, 0.0, 0.2, 1.0), (8, 1, 0.3, 0.05, 0.7), (12, 2, 1.4, 0.1, 1.9), (0.5, 0, 0.0, 0.3, 0.6)])
    def test_minimal_and_admissible(self, lam, eps, P, tau, ell):
        p = WeightParams(lam, 0.9, eps)
        rhs = ((math.sqrt(P * P + tau * ell) - P) / (2 * tau)) ** 2
        d = grow_depth(0, P, tau, ell, p)
        floor = math.ceil(lam + eps)
        assert d >= floor
        assert gamma_bar(p) * chernoff_factor(d, p) <= rhs * (1 + 1e-12)
        if d > floor:
            assert gamma_bar(p) * chernoff_factor(d - 1, p) > rhs

    def test_never_shrinks(self):
        assert grow_depth(40, 0.0, 0.1, 1.0, WeightParams(4, 0.5, 1)) == 40

    def test_generous_budget_keeps_floor(self):
        assert grow_depth(0, 0.0, 1e-6, 1.0, WeightParams(4, 0.5, 1)) == 5

    def test_requires_gate(self):
        with pytest.raises(ValueError):
            grow_depth(0, 0.0, 0.1, 0.4, WeightParams(4, 0.5, 1))


class TestSelfBounded:
    def test_gate_blocks_small_loss(self):
        ln = make(lam=2, xi=0.9, eps=0, mode=SB)
        ln.d = 2  # as if an earlier update had grown the cap
        ln.tree.upsert_path(pm("+")).g = 0.6 / omega(1, 0, ln.params)
        rec = ln.step([], 1, pm("+"), 2)
        assert rec.loss == pytest.approx(0.4)
        assert not rec.updated and rec.P_after == 0.0 and ln.tree.node_count == 1

    def test_constant_stream_goes_quiet(self):
        ln = make(lam=2, xi=0.9, eps=0, mode=SB)
        ys = [1] * 400
        trace = run_binary(ln, ys)
        assert trace[0].updated and trace[0].d_after >= 2
        last = max(r.t for r in trace if r.updated)
        assert last < 100
        assert all(r.h > 0.5 for r in trace[last:])
        assert len({r.d_after for r in trace[last - 1:]}) == 1
        assert ln.tree.max_depth <= trace[-1].d_after

    def test_invariants_on_noisy_stream(self):
        ds = generate(MotifSpec(BINARY_MOTIF, repetitions=125, noise_p=0.2, seed=4))
        ln = make(lam=4, xi=0.9, eps=1, mode=SB)
        trace = run_binary(ln, ds.symbols)
        ds_ = [r.d_after for r in trace]
        assert all(a <= b for a, b in zip(ds_, ds_[1:]))
        assert min(d for d in ds_ if d) >= 5
        for r in trace:
            assert r.P_after ** 2 <= r.L_after * (1 + 1e-9)
            assert r.sum_omega_sq <= ln.gamma + 1e-9
        assert ln.tree.max_depth <= trace[-1].d_after

    def test_margin_gate_fixed(self):
        with pytest.raises(ValueError):
            ApstConfig(WeightParams(2, 0.5), SB, margin_gate=0.2)

    def test_delta_accepted_with_warning(self, caplog):
        cfg = ApstConfig(WeightParams(2, 0.5), SB, delta=0.1)
        assert cfg.delta == 0.1
        assert "no effect" in caplog.text
        with pytest.raises(ValueError):
            ApstConfig(WeightParams(2, 0.5), SB, delta=1.5)


def test_strict_mode_trips_on_forged_gamma():
    ln = make(lam=4, xi=0.5, eps=1, gamma=1e-6, strict=True)
    ln.tree.upsert_path(pm("+"))
    with pytest.raises(BoundViolation):
        ln.step([], 1, pm("+"), 2)


class TestReplay:
    def test_zero_hypothesis(self):
        ln = make()
        assert replay_losses(ln.snapshot(), [0, 1, 1, 0, 1]) == [1.0] * 5

    def test_pure(self):
        ds = generate(MotifSpec(BINARY_MOTIF, repetitions=30, noise_p=0.2, seed=1))
        ln = make(lam=4, xi=0.9, eps=1)
        run_binary(ln, ds.symbols)
        snap = ln.snapshot()
        first = replay_losses(snap, ds.symbols)
        assert replay_losses(snap, ds.symbols) == first
        assert snap.tree.to_json() == ln.tree.to_json()


def test_deterministic():
    ds = generate(MotifSpec(BINARY_MOTIF, repetitions=50, noise_p=0.3, seed=9))
    a = run_binary(make(lam=4, eps=1, mode=SB), ds.symbols)
    b = run_binary(make(lam=4, eps=1, mode=SB), ds.symbols)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_record_round_trip():
    rec = RoundRecord(3, 0.1, 1, -1, 1.1, 0.2, True, 4, 0.5, 0.9, 2, 0.3, 0.4)
    assert RoundRecord.from_dict(rec.to_dict()) == rec
    assert "scores" not in rec.to_dict()


def test_reduces_to_pst_under_pst_weights():
    rng = random.Random(7)
    for _ in range(30):
        T = rng.randint(1, 50)
        ys = [rng.randrange(2) for _ in range(T)]
        a = make(eps=0, weight=pst_weight, gamma=PST_GAMMA)
        p = PstLearner()
        for t in range(1, T + 1):
            y = 1 if ys[t - 1] else -1
            ra, rp = a.step([], y, ys, t), p.step([], y, ys, t)
            assert ra.h == pytest.approx(rp.h, rel=1e-12, abs=1e-12)
            assert ra.tau == pytest.approx(rp.tau, rel=1e-12, abs=1e-15)
        assert {n.spell() for n in a.tree.nodes()} == {n.spell() for n in p.tree.nodes()}
