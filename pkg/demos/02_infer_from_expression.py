"""Infer a PBN from the bundled 31-sample, 7-gene expression matrix.

The matrix was generated from a known Boolean network (shipped as
``melanoma_truth.spec``), so we can check that the inferred predictors match.
"""
# %%
from pbncontrol.attractors import estimate_attractor_frequencies, find_attractors
from pbncontrol.data import fixture_path, load_fixture
from pbncontrol.inference import build_pbn, median_quantize, read_expression_csv, select_predictors

import numpy as np

m = read_expression_csv(fixture_path("melanoma.csv"))
print(m.values.shape, m.genes)

# %% [markdown]
# Each gene is binarized at its median (values >= median become 1). Then every
# 3-gene predictor set is scored by its coefficient of determination (COD):
# how much better the best truth table predicts the gene than a constant.

# %%
bits = median_quantize(m)
print("ones per gene:", bits.sum(axis=0))
selected = select_predictors(bits, k=3, top=10, allow_self=False)
truth = load_fixture("melanoma_truth.spec")
for i, kept in enumerate(selected):
    best = kept[0]
    names = [m.genes[j] for j in best.predictors]
    ok = best.predictors == truth.nodes[i].inputs
    print(f"{m.genes[i]:>6}: {len(kept)} sets kept, best {names} COD {best.cod:.2f}  matches truth: {ok}")

# %% [markdown]
# The kept sets become the node's candidate functions, chosen with
# probability proportional to their COD.

# %%
spec = build_pbn(selected)
atts = find_attractors(spec)
est = estimate_attractor_frequencies(spec, atts, 20_000, 1000, np.random.default_rng(0))
for a, f in zip(atts, est.frequencies):
    print(f"attractor {' '.join(a.to_strings(spec.n))}: frequency {f:.3f}")
