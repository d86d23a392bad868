# Watching the self-bounded learner grow its depth, then checking the
# cumulative-loss bounds on the trace it leaves behind.
from apst.harness import run_online, verify_bounds
from apst.learner_apst import ApstConfig, ApstLearner, Mode
from apst.synthgen import BINARY_MOTIF, MotifSpec, generate
from apst.weighting import WeightParams

ds = generate(MotifSpec(BINARY_MOTIF, repetitions=125, noise_p=0.2, seed=11))
learner = ApstLearner(ApstConfig(WeightParams(4, 0.9, 1), Mode.SELF_BOUNDED), 0, 2)
trace = run_online(learner, ds)

#%% depth only moves when an update pushes the budget over
changes = [(r.t, r.d_after) for a, r in zip(trace, trace[1:]) if r.d_after != a.d_after]
print("depth changes (round, new depth):", changes)
print("final tree:", learner.tree.node_count, "nodes")

#%% every inequality, with its slack
report = verify_bounds(trace, learner.snapshot(), learner.config, symbols=ds.symbols)
for check in report.checks:
    print(f"{check.name:28s} ok={check.passed} slack={check.slack:.4g}")
