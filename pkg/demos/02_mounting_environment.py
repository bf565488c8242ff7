"""One look inside the mounting environment.

Run with ``python3 demos/02_mounting_environment.py``.

Four robots are spawned in the 60 x 60 cm square around a fixed board and
driven by small random joint targets for two seconds.  The script prints the
observation layout, then the per-term reward breakdown averaged over the
batch, and finally why each finished episode ended.
"""
import numpy as np

from skatemount.env import VecEnv
from skatemount.stages import default_stages

stage = default_stages()["square_60cm"]
env = VecEnv(stage, num_envs=4, seed=0)
obs = env.observe()
print(f"stage {stage.id}: spawn {stage.spawn.kind} side {stage.spawn.side} m, board fixed: {stage.board_fixed}")
print(f"policy observation {obs.policy.shape[1]} values, critic observation {obs.critic.shape[1]} values "
      f"({len(env.edge_points)} deck edge points)")
print("robot base xy at reset:")
for i, p in enumerate(env.state.robot.base.position):
    print(f"  env {i}: ({p[0]:+.3f}, {p[1]:+.3f}) m, height {p[2]:.3f} m")

rng = np.random.default_rng(1)
sums, steps, finished = {}, 0, []
for _ in range(100):
    obs, reward, done, info = env.step(0.3 * rng.standard_normal((4, 12)))
    for k, v in info["breakdown"].weighted.items():
        sums[k] = sums.get(k, 0.0) + float(np.mean(v))
    steps += 1
    finished += info["episodes"]

print(f"\nmean weighted reward terms per control step over {steps} steps:")
for k, v in sums.items():
    if v:
        print(f"  {k:>16}: {v / steps:+.4f}")
print(f"\nfeet on deck now: {env.state.contact_flags.sum(axis=1).tolist()}")
for ep in finished:
    print(f"env {ep['env']} ended after {ep['length']} steps ({ep['cause']}), return {ep['return']:.2f}")
env.close()
