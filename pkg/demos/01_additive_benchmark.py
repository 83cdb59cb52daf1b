"""Additive benchmark: when the response has no interactions, the tree
collapses to its root and the root's additive model tells the whole story.

Runs in a few seconds at this reduced scale.
"""

import splinetree as st

# Simulate the 10-feature additive benchmark.  The surrogate response is
# the noiseless function value f; the noisy y plays the original response.
sim = st.simulate("f1", n=10_000, sigma=0.5, seed=42)
train = st.to_dataset(sim, rows=sim.train_idx)
test = st.to_dataset(sim, rows=sim.test_idx)

# Shared design: linear B-splines on 15 quantile knots per feature.
spec = st.build_spec(train, num_knots=15)
print(f"design: {spec.total_columns} columns for {len(spec.blocks)} features")

# Grow two levels, then prune with the default thresholds
# (R2 >= 0.99 or split gain < 2% of the root SSE).
root = st.grow(train, spec, st.GrowConfig(max_depth=2, num_bins=50))
pruned = st.prune(root, r2_threshold=0.99, dsse_fraction=0.02)
print(f"grown nodes: {sum(1 for _ in root.nodes())}, "
      f"after pruning: {sum(1 for _ in pruned.nodes())}")

# Fidelity = agreement with the surrogate response; accuracy = agreement
# with the original noisy response (its floor is the noise variance 0.25).
for label, part in (("train", train), ("test", test)):
    pred = st.predict(pruned, spec, part)
    fid = st.fidelity(pred, part.response)
    acc = st.accuracy(pred, part.original)
    print(f"{label:5s}  fidelity mse={fid.mse:.5f} r2={fid.r2:.4f}   "
          f"accuracy mse={acc['mse']:.4f} r2={acc['r2']:.4f}")

# Variance-based importance at the single leaf: the two noise features
# x9, x10 should be indistinguishable from zero.
table = st.leaf_importance(pruned, spec, train)
values = {b.feature: table.values[(0, b.feature)] for b in spec.blocks}
print("\nleaf importance (variance of each fitted effect):")
for name, v in sorted(values.items(), key=lambda t: -t[1]):
    bar = "#" * int(50 * v / max(values.values()))
    print(f"  {name:4s} {v:8.4f} {bar}")

# The fitted effect of x1 should track its true contribution 3*x1.
curve = st.effect_curve(pruned, spec, "x1", num_points=9)
truth = 3.0 * curve.grid
print("\nx1 effect curve vs 3*x1 (both centered):")
for g, v, t in zip(curve.grid, curve.values, truth - truth.mean()):
    print(f"  x1={g:+.2f}   fitted {v:+.3f}   true {t:+.3f}")
