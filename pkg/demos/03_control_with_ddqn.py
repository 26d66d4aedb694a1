"""Train a DDQN agent to steer the 10-gene fixture into its rarest attractor.

The shipped configuration runs 300,000 iterations (several minutes). Pass a
smaller count on the command line for a quick look, e.g.
``python demos/03_control_with_ddqn.py 60000``.
"""
# %%
import logging
import sys

import numpy as np

from pbncontrol.agent import TrainConfig, config_dict, evaluate, random_baseline, train
from pbncontrol.cli import load_run_config, prepare

logging.basicConfig(level=logging.INFO, format="%(message)s")

run = load_run_config("pbn10")
if len(sys.argv) > 1:
    run.train = TrainConfig.from_dict(dict(config_dict(run.train), iterations=int(sys.argv[1])))
prep = prepare(run, seed=run.train.seed)
print("target:", " ".join(prep.target.to_strings(prep.spec.n)))

# %% [markdown]
# Each step the agent either flips one gene or does nothing, then the network
# makes one natural transition. Entering the target pays +5, sitting in another
# attractor costs -2, anything else -1.

# %%
res = train(prep.spec, prep.control, run.train)

# %% [markdown]
# Greedy evaluation versus picking interventions uniformly at random.

# %%
ev = evaluate(prep.spec, res.params, prep.control, 1000, seed=1)
base = random_baseline(prep.spec, prep.control, 1000, 100_000, np.random.default_rng(1))
print(f"DDQN:   success {ev.success_rate:.3f} within {run.train.horizon} steps, "
      f"{ev.mean_interventions:.2f} interventions on average")
print(f"random: {base.mean:.1f} interventions on average, "
      f"success {base.success_rate(run.train.horizon):.3f} within {run.train.horizon} steps")
