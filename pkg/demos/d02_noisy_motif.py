# Exact vs approximate matching on a noisy periodic stream.
import statistics

from apst.harness import GridSpec, grid_search
from apst.synthgen import BINARY_MOTIF, MotifSpec, generate

#%% one noisy stream
ds = generate(MotifSpec(BINARY_MOTIF, repetitions=100, noise_p=0.2, seed=3))
print(len(ds.symbols), "symbols; first 24:", ds.symbols[:24])

#%% grid over (lambda, xi, eps) on five seeds, selection on the validation block
data = [(s, generate(MotifSpec(BINARY_MOTIF, repetitions=100, noise_p=0.2, seed=s)))
        for s in range(5)]
rep = grid_search(data, GridSpec())
for eps in (0, 1):  # the default grid covers eps 0 and 1
    best = rep.best_by(lambda r, e=eps: r.epsilon == e)
    print(f"eps={eps}: test accuracy", round(statistics.fmean(r.test_acc for r in best), 3))
