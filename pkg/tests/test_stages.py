import math
import warnings

import numpy as np
import pytest
from scipy import stats

from skatemount.stages import (
    ConfigError, RewardConfig, SpawnConfig, StageConfig, check_stage, default_stages, sample_spawn_xy_yaw,
    validate_stage, with_overrides,
)


def draw(spawn, n, seed=0, **kw):
    rng = np.random.default_rng(seed)
    out = [sample_spawn_xy_yaw(spawn, rng, **kw) for _ in range(n)]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def test_default_stages_validate_cleanly():
    for sid, stage in default_stages().items():
        errors, warns = validate_stage(stage)
        assert errors == [] and warns == [], sid


def test_reverse_curriculum_order_and_board_mode():
    st = default_stages()
    assert st["above_board"].spawn.kind == "point"
    assert st["square_60cm"].spawn.side == pytest.approx(0.6)
    assert st["adjacent"].spawn.kind == "annulus"
    assert all(st[s].board_fixed for s in ("above_board", "square_60cm", "adjacent"))
    assert not st["free_board"].board_fixed
    assert "board_flipped" in st["free_board"].terminations


@pytest.mark.parametrize("field_path, stage", [
    ("stage.reward.sigma", StageConfig("above_board", reward=RewardConfig(sigma=-0.1))),
    ("stage.reward.sigma", StageConfig("above_board", reward=RewardConfig(sigma=0.0))),
    ("stage.spawn.radius_min", StageConfig("adjacent", spawn=SpawnConfig("annulus", radius_min=0.9, radius_max=0.5))),
    ("stage.spawn.kind", StageConfig("adjacent", spawn=SpawnConfig("disc"))),
    ("stage.id", StageConfig("not_a_stage")),
    ("stage.terminations", StageConfig("above_board", terminations=("timeout", "bored"))),
    ("stage.joint_pos_noise", StageConfig("above_board", joint_pos_noise=-1.0)),
    ("stage.episode_length_s", StageConfig("above_board", episode_length_s=0.0)),
])
def test_invalid_stage_reports_the_offending_field(field_path, stage):
    errors, _ = validate_stage(stage)
    assert field_path in [p for p, _ in errors]
    with pytest.raises(ConfigError) as info:
        check_stage(stage)
    assert field_path in str(info.value)


def test_all_violations_are_reported_together():
    stage = StageConfig("above_board", joint_pos_noise=-1.0, push_force=-2.0, reward=RewardConfig(sigma=-1.0))
    paths = {p for p, _ in validate_stage(stage)[0]}
    assert {"stage.joint_pos_noise", "stage.push_force", "stage.reward.sigma"} <= paths


def test_square_stage_with_other_side_warns_but_runs():
    stage = with_overrides(default_stages()["square_60cm"], spawn=SpawnConfig("square", side=0.8))
    errors, warns = validate_stage(stage)
    assert errors == []
    assert [p for p, _ in warns] == ["stage.spawn.side"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert check_stage(stage) is stage
    assert any("60 x 60 cm" in str(w.message) for w in caught)


def test_square_sampler_is_uniform_on_60cm_square():
    xy, _ = draw(SpawnConfig("square", side=0.6), 100_000)
    assert np.all(np.abs(xy) <= 0.3)
    for axis in range(2):
        res = stats.kstest(xy[:, axis], stats.uniform(loc=-0.3, scale=0.6).cdf)
        assert res.pvalue > 0.01
    # independence of the two axes: quadrant counts are balanced
    counts = np.histogram2d(xy[:, 0], xy[:, 1], bins=2, range=[[-0.3, 0.3]] * 2)[0].ravel()
    assert stats.chisquare(counts).pvalue > 0.01


def test_square_sampler_follows_board_pose():
    xy, yaw = draw(SpawnConfig("square", side=0.6, yaw_range=0.2), 2000, board_xy=(1.0, -2.0), board_yaw=math.pi / 2)
    local = xy - [1.0, -2.0]
    assert np.all(np.abs(local) <= 0.3 + 1e-12)
    assert np.all(np.abs(yaw - math.pi / 2) <= 0.2 + 1e-12)


def test_annulus_bounds_and_area_uniformity():
    spawn = SpawnConfig("annulus", radius_min=0.45, radius_max=0.8)
    xy, _ = draw(spawn, 50_000)
    r = np.linalg.norm(xy, axis=1)
    assert r.min() >= 0.45 - 1e-12 and r.max() <= 0.8 + 1e-12
    # uniform by area: r^2 is uniform on [rmin^2, rmax^2]
    res = stats.kstest(r ** 2, stats.uniform(loc=0.45 ** 2, scale=0.8 ** 2 - 0.45 ** 2).cdf)
    assert res.pvalue > 0.01


def test_face_board_heading_points_at_deck():
    xy, yaw = draw(SpawnConfig("annulus", radius_min=0.5, radius_max=0.6, face_board=True), 500)
    bearing = np.arctan2(-xy[:, 1], -xy[:, 0])
    np.testing.assert_allclose(np.angle(np.exp(1j * (yaw - bearing))), 0.0, atol=1e-12)


def test_point_spawn_is_exact_without_jitter():
    xy, yaw = draw(SpawnConfig("point", center=(0.1, -0.05)), 10)
    np.testing.assert_array_equal(xy, [[0.1, -0.05]] * 10)
    np.testing.assert_array_equal(yaw, 0.0)


def test_yaw_is_wrapped():
    _, yaw = draw(SpawnConfig("point", yaw_range=math.pi), 1000, board_yaw=3.0)
    assert np.all((yaw >= -math.pi) & (yaw < math.pi))


def test_episode_steps():
    assert StageConfig("above_board").episode_steps(0.02) == 250
