import math
from dataclasses import asdict, replace

import numpy as np
import pytest

from skatemount.checkpoint import Checkpoint
from skatemount.env import VecEnv
from skatemount.ppo import GaussianPolicy, PpoConfig, RolloutBuffer
from skatemount.skateboard import SkateboardParams
from skatemount.stages import default_stages
from skatemount.trainer import DimensionMismatchError, _seeds, collect_rollout, train_stage

SMALL = PpoConfig(actor_hidden=(32, 32), critic_hidden=(32, 32), steps_per_env=8)
STAGE = replace(default_stages()["above_board"], iterations=3)


def history_key(history):
    return [tuple(asdict(s).values()) for s in history]


def test_zero_iterations_returns_the_initialization():
    ckpt, history = train_stage(STAGE, SMALL, num_envs=4, seed=3, iterations=0, record_wall_time=False)
    assert history == [] and ckpt.iteration == 0 and ckpt.seed == 3
    _, init_rng, _, _ = _seeds(3, 0)
    fresh = GaussianPolicy.create(90, 93, 12, init_rng, SMALL.actor_hidden, SMALL.critic_hidden)
    for a, b in zip(ckpt.policy.arrays(), fresh.arrays()):
        np.testing.assert_array_equal(a, b)
    assert ckpt.learning_rate == SMALL.learning_rate


def test_fixed_seed_gives_identical_history():
    runs = [train_stage(STAGE, SMALL, num_envs=4, seed=7, record_wall_time=False) for _ in range(2)]
    assert history_key(runs[0][1]) == history_key(runs[1][1])
    for a, b in zip(runs[0][0].policy.arrays(), runs[1][0].policy.arrays()):
        np.testing.assert_array_equal(a, b)
    other, hist = train_stage(STAGE, SMALL, num_envs=4, seed=8, record_wall_time=False)
    assert history_key(hist) != history_key(runs[0][1])


def test_threaded_training_matches_serial():
    a = train_stage(STAGE, SMALL, num_envs=6, seed=1, num_workers=1, record_wall_time=False)
    b = train_stage(STAGE, SMALL, num_envs=6, seed=1, num_workers=3, record_wall_time=False)
    assert history_key(a[1]) == history_key(b[1])


def test_history_fields_and_callbacks():
    seen, saved = [], []
    ckpt, history = train_stage(STAGE, SMALL, num_envs=4, seed=0, on_iteration=seen.append,
                                checkpoint_every=2, on_checkpoint=saved.append)
    assert [s.iteration for s in history] == [0, 1, 2] and seen == history
    assert [c.iteration for c in saved] == [2, 3]
    for s in history:
        assert all(math.isfinite(v) for v in (s.surrogate, s.value, s.entropy, s.kl, s.learning_rate))
        assert 1e-5 <= s.learning_rate <= 1e-2
        assert s.wall_s > 0


def test_warm_start_carries_parameters_and_learning_rate():
    first, _ = train_stage(STAGE, SMALL, num_envs=4, seed=0, iterations=2)
    first.learning_rate = 4.2e-4
    ckpt, _ = train_stage(STAGE, SMALL, num_envs=4, seed=0, iterations=0, warm_start=first)
    assert ckpt.learning_rate == 4.2e-4 and ckpt.iteration == 2
    for a, b in zip(ckpt.policy.arrays(), first.policy.arrays()):
        np.testing.assert_array_equal(a, b)
    ckpt2, _ = train_stage(STAGE, SMALL, num_envs=4, seed=0, iterations=1, warm_start=first)
    assert ckpt2.iteration == 3
    # the warm-start source is not modified in place
    assert not all(np.array_equal(a, b) for a, b in zip(ckpt2.policy.arrays(), first.policy.arrays()))


def test_warm_start_dimension_mismatch_reports_both_sets():
    policy = GaussianPolicy.create(80, 83, 12, np.random.default_rng(0), (8,), (8,))
    with pytest.raises(DimensionMismatchError) as info:
        train_stage(STAGE, SMALL, num_envs=2, warm_start=Checkpoint(policy, 1e-3, 0, 0))
    assert "(80, 83, 12)" in str(info.value) and "(90, 93, 12)" in str(info.value)
    # a longer deck changes the number of edge points and hence the observation size
    ckpt, _ = train_stage(STAGE, SMALL, num_envs=2, iterations=0)
    longer = SkateboardParams(deck_length=0.9)
    with pytest.raises(DimensionMismatchError):
        train_stage(STAGE, SMALL, num_envs=2, warm_start=ckpt, board_params=longer)


def test_invalid_minibatch_split_is_rejected():
    with pytest.raises(ValueError, match="divide"):
        train_stage(STAGE, replace(SMALL, num_minibatches=5), num_envs=3, iterations=1)


def test_timeout_bootstrap_in_rollout():
    stage = replace(default_stages()["above_board"], terminations=("timeout",), episode_length_s=0.06)
    env = VecEnv(stage, 2, seed=0)
    policy = GaussianPolicy.create(90, 93, 12, np.random.default_rng(0), (8,), (8,))
    policy.critic.biases[-1][:] = 10.0          # V is about 10 everywhere
    buf = RolloutBuffer(3, 2, 90, 93, 12)
    obs = env.observe()
    _, episodes = collect_rollout(env, policy, buf, obs, np.random.default_rng(0), 0.99)
    assert len(episodes) == 2 and all(e["cause"] == "timeout" for e in episodes)
    assert buf.dones[2].all() and not buf.dones[:2].any()
    # the final reward carries gamma * V(terminal) on top of the per-step reward
    assert np.all(buf.rewards[2] > 0.99 * 9.0)
    assert np.all(np.abs(buf.rewards[:2]) < 5.0)
