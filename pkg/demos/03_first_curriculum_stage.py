"""Train the first curriculum stage briefly and evaluate it.

Run with ``python3 demos/03_first_curriculum_stage.py [iterations]`` (default 40).

The robot spawns standing on a fixed board and learns to stay there.  A few
dozen iterations already move the mean episode reward; the acceptance suite
runs the same stage for 400 iterations.  The script prints a reward line every
ten iterations, then evaluates the final policy with and without exploration
noise.
"""
import sys

from skatemount.evaluate import evaluate_policy
from skatemount.ppo import PpoConfig
from skatemount.stages import default_stages
from skatemount.trainer import train_stage

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 40
stage = default_stages()["above_board"]


def show(stats):
    if stats.iteration % 10 == 0 or stats.iteration == iterations - 1:
        print(f"it {stats.iteration:4d}  mean episode reward {stats.mean_ep_reward:7.3f}  "
              f"length {stats.mean_ep_len:6.1f}  falls {stats.term_fell:3d}  lr {stats.learning_rate:.1e}")


ckpt, history = train_stage(stage, PpoConfig(), num_envs=64, seed=0, iterations=iterations, on_iteration=show)
for deterministic in (True, False):
    s = evaluate_policy(ckpt.policy, stage, 32, seed=1, deterministic=deterministic)
    label = "mean action" if deterministic else "sampled actions"
    print(f"eval ({label}): reward {s.mean_reward:.2f}, feet on board {s.mean_feet_on_board:.2f}, "
          f"success rate {s.success_rate:.2f}")
