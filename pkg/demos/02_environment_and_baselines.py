"""Step through the episodic environment by hand, then run the baselines.

Run:  python3 demos/02_environment_and_baselines.py
"""
import numpy as np

from pathrl.baselines import run_random_agent, run_tree_agent
from pathrl.env import DiagnosisEnv, EnvConfig, diagnose_action
from pathrl.metrics import accuracy, mean_episode_length
from pathrl.schema import load_schema
from pathrl.synth import make_anemia_dataset, split

schema = load_schema("anemia")
parts = split(make_anemia_dataset(10_000, seed=7), seed=11)

# one manual episode: query two labs, then commit to a diagnosis
env = DiagnosisEnv(schema, EnvConfig(use_case="anemia"))
record = parts.test.x[0]
env.reset(record, int(parts.test.y[0]))
for name in ("hemoglobin", "gender"):
    out = env.step(schema.index(name))
    print(f"queried {name:<11} -> value {out.observation[schema.index(name)]:.2f} "
          f"reward {out.reward}")
out = env.step(diagnose_action(schema, schema.class_index("No anemia")))
print("diagnosed 'No anemia' ->", "correct" if out.reward > 0 else "wrong",
      f"(true: {schema.classes[int(parts.test.y[0])]})")

# the guideline-replaying agent is exact on clean data by construction
eps = run_tree_agent(parts.test)
print(f"\ntree-based agent: accuracy {100 * accuracy(eps):.1f}, "
      f"mean episode length {mean_episode_length(eps):.2f}")

# uniform random play gives the floor
eps = run_random_agent(parts.test.subset(range(10_000)), seed=5)
print(f"random agent:     accuracy {100 * accuracy(eps):.2f}, "
      f"mean episode length {mean_episode_length(eps):.2f}")
