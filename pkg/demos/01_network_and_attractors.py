"""Walk through the 10-gene fixture network: simulate it, find its
attractors and see how often the free-running network lands in each.

Run with ``python demos/01_network_and_attractors.py`` (a few seconds).
"""
# %%
import numpy as np

from pbncontrol.attractors import estimate_attractor_frequencies, find_attractors, least_frequent
from pbncontrol.data import load_fixture
from pbncontrol.pbn import state_to_str, step_natural, transition_support

spec = load_fixture("pbn10.spec")
print(f"{spec.n} genes")
for i, node in enumerate(spec.nodes[:3]):
    print(f"  g{i + 1}: inputs {[j + 1 for j in node.inputs]}, {len(node.tables)} functions, probs {node.probs}")

# %% [markdown]
# States are bit strings read g1..gn from left to right. A trajectory of the
# natural (uncontrolled) dynamics:

# %%
rng = np.random.default_rng(0)
s = int(rng.integers(2 ** spec.n))
for t in range(8):
    print(t, state_to_str(s, spec.n))
    s = step_natural(spec, s, rng)

# %% [markdown]
# The exact next-state distribution is a product over genes, so its support
# is small even though the state space has 1024 states.

# %%
sup = transition_support(spec, s)
for st, p in sorted(sup.as_dict().items(), key=lambda kv: -kv[1]):
    print(f"  {state_to_str(st, spec.n)}  {p:.3f}")

# %% [markdown]
# Attractors are the terminal strongly connected components of the state
# transition graph. Rolling the network forward from random starts shows which
# basins dominate; the rarest attractor is the natural choice of control target.

# %%
atts = find_attractors(spec)
est = estimate_attractor_frequencies(spec, atts, 20_000, 1000, rng)
for a, f in zip(atts, est.frequencies):
    shown = " ".join(a.to_strings(spec.n)[:3]) + (" ..." if len(a) > 3 else "")
    print(f"  attractor {a.index} ({len(a)} states): {shown}  frequency {f:.4f}")
target = least_frequent(atts, est)
print("target:", " ".join(target.to_strings(spec.n)))
