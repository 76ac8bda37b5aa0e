"""Train a dueling prioritized-replay Q-learner on the anemia cohort.

A full desk-scale run (300k steps) takes a couple of minutes on one core;
pass --quick for a 30k-step smoke run.

Run:  python3 demos/03_train_dqn.py [--quick]
"""
import sys

from pathrl.drl import TrainConfig, evaluate_policy, select_checkpoint, train
from pathrl.env import EnvConfig
from pathrl.metrics import build_report
from pathrl.qnet import save_policy
from pathrl.synth import make_anemia_dataset, split

quick = "--quick" in sys.argv
steps = 30_000 if quick else 300_000

parts = split(make_anemia_dataset(1429, seed=7), seed=11)  # ~10k records
cfg = TrainConfig.for_algorithm("dueling", per=True, use_case="anemia",
                                total_timesteps=steps, seed=0)
print(f"training dueling DQN with prioritized replay for {steps} steps...")
checkpoints = train(parts.train, parts.validation, cfg)
print("validation accuracy per checkpoint:")
print("  " + " ".join(f"{c.validation_accuracy:.2f}" for c in checkpoints))

best = select_checkpoint(checkpoints, "accuracy")
episodes = evaluate_policy(best.artifact, parts.test,
                           config=EnvConfig(use_case="anemia", max_steps=cfg.max_steps))
report = build_report(episodes, parts.test.schema)
print(f"\nselected checkpoint t={best.timestep}")
print(f"test accuracy {100 * report.accuracy:.2f}, "
      f"mean episode length {report.mean_episode_length:.2f}")
for name, row in report.per_class.items():
    print(f"  {name:<40} recall {row['recall']:.2f} support {row['support']}")

save_policy("anemia_demo.policy", best.artifact)
print("\nsaved anemia_demo.policy")
