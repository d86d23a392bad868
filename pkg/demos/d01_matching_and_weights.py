# Approximate suffix matching on a small hand-built tree, and how the
# Poisson-shaped weights spread credit over suffix length and mismatches.
from apst.suffix_tree import ApproxSuffixTree, collect_matches
from apst.weighting import WeightParams, OmegaTable, gamma_const, lemma2_bound

#%% build a tree by hand; -1 -> symbol 0, +1 -> symbol 1
tree = ApproxSuffixTree(2)
for spelled, score in [((0,), 2.0), ((1,), -1.0), ((1, 0), 1.0), ((1, 1), 4.0),
                       ((0, 1, 1), -2.0), ((1, 1, 1, 1), 3.0)]:
    tree.upsert_path(spelled).g = score
print("nodes:", tree.node_count, "depth:", tree.max_depth)

#%% which nodes does the history (+ - + +) match at t = 5?
history = [1, 0, 1, 1]
for eps in (0, 1):
    hits = collect_matches(tree, history, 5, eps)
    print(f"eps={eps}:", [(m.node.spell(), m.i, m.k) for m in hits])

#%% weights: exact matches ignore xi, each mismatch multiplies by sqrt(1 - xi)
p = WeightParams(4, 0.9, 1)
tab = OmegaTable(p)
for i in range(1, 9):
    print(i, round(tab(i, 0), 4), round(tab(i, 1), 4))

#%% the squared mass of any match set stays under gamma
print("gamma:", gamma_const(p), " finite-t bound at t=30:", lemma2_bound(30, p))
