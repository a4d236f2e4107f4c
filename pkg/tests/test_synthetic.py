import numpy as np
import pytest

import helpers
from rgbdvo.geometry import MotionTwist, exp_twist
from rgbdvo.residuals import evaluate_residuals
from rgbdvo.synthetic import (Scene, generate_sequence, render_synthetic_pair,
                              render_view, scene_preset)


def test_flat_scene_depth_is_base_depth():
    k = helpers.synth_intrinsics(96, 72)
    scene = Scene(base_depth=2.0, texture_base=0.5, texture_amplitude=0.3,
                  texture_period=0.4)
    _, depth = render_view(scene, exp_twist(MotionTwist.zero()), k, 96, 72)
    np.testing.assert_allclose(depth.data, 2.0, atol=1e-9)
    assert depth.valid.all()


def test_axial_translation_shifts_depth():
    k = helpers.synth_intrinsics(96, 72)
    scene = Scene(base_depth=2.0, texture_base=0.5, texture_amplitude=0.3,
                  texture_period=0.4)
    xi = MotionTwist(np.array([0.0, 0.0, -0.5]), np.zeros(3))
    _, depth = render_view(scene, exp_twist(xi), k, 96, 72)
    np.testing.assert_allclose(depth.data, 1.5, atol=1e-9)


def test_pair_photo_consistent_at_true_twist():
    # On an occlusion-free scene both residual channels at the true motion
    # stay under the bilinear interpolation error bound kappa * h^2 / 4
    # (two interpolated reads, each off by at most kappa h^2 / 8).
    scene = Scene(base_depth=2.0, tilt_x=0.1, tilt_y=0.05,
                  bump_amplitude=0.05, bump_period=1.6,
                  texture_base=0.5, texture_amplitude=0.3, texture_period=0.4,
                  bump_phase=(0.7, 1.3), texture_phase=(0.2, 2.1))
    xi = MotionTwist(np.array([0.005, -0.003, 0.004]),
                     np.array([0.001, -0.002, 0.0015]))
    pair = helpers.render_pair(scene, xi, 96, 72)
    system = evaluate_residuals(pair, xi)
    px = 2.4 / pair.intrinsics.fx  # worst-case metric pixel on the tilt
    bound_i = 0.3 * (2 * np.pi * px / 0.4) ** 2 / 4.0
    bound_d = 0.05 * (2 * np.pi * px / 1.6) ** 2 / 4.0
    assert np.abs(system.intensity_residuals).max() < bound_i
    assert np.abs(system.depth_residuals).max() < bound_d


def test_render_pair_echoes_true_twist():
    xi = MotionTwist(np.array([0.01, 0.0, -0.005]), np.array([0.0, 0.003, 0.0]))
    k = helpers.synth_intrinsics(48, 36)
    pair, echoed = render_synthetic_pair(helpers.rich_scene(), xi, k, 48, 36)
    np.testing.assert_array_equal(echoed.as_vector(), xi.as_vector())
    assert pair.second.timestamp > pair.first.timestamp


def test_sequence_timestamps_and_pose_chain():
    scene = helpers.rich_scene()
    k = helpers.synth_intrinsics(48, 36)
    tw = MotionTwist(np.array([0.004, 0.0, 0.003]), np.array([0.0, 0.002, 0.0]))
    pairs, poses, stamps = generate_sequence(scene, [tw, tw], k, 48, 36,
                                             fps=10.0)
    assert len(pairs) == 2 and len(poses) == 3
    np.testing.assert_allclose(stamps, [0.0, 0.1, 0.2], atol=1e-12)
    np.testing.assert_allclose(poses[0].matrix(), np.eye(4), atol=1e-12)
    # Camera-to-world chain: the relative motion between consecutive poses
    # recovers the commanded twist.
    for i in range(2):
        rel = poses[i + 1].inverse().compose(poses[i]).matrix()
        np.testing.assert_allclose(rel, exp_twist(tw).matrix(), atol=1e-9)


def test_sequence_pairs_consistent_with_commanded_motion():
    scene = helpers.rich_scene()
    k = helpers.synth_intrinsics(48, 36)
    tw = MotionTwist(np.array([0.004, 0.0, 0.003]), np.array([0.0, 0.002, 0.0]))
    pairs, _, _ = generate_sequence(scene, [tw], k, 48, 36)
    system = evaluate_residuals(pairs[0], tw)
    # Rich preset has mild self-occlusion, so only a loose absolute cap here;
    # the photo-consistency test above pins the occlusion-free bound.
    assert np.abs(system.intensity_residuals).max() < 0.1
    zero = evaluate_residuals(pairs[0], MotionTwist.zero())
    assert (np.abs(system.intensity_residuals).mean()
            < np.abs(zero.intensity_residuals).mean())


def test_depth_noise_quantized_to_sensor_grid():
    xi = MotionTwist(np.array([0.002, 0.0, 0.0]), np.zeros(3))
    k = helpers.synth_intrinsics(48, 36)
    rng = np.random.default_rng(17)
    pair, _ = render_synthetic_pair(helpers.rich_scene(), xi, k, 48, 36,
                                    depth_noise=0.01, rng=rng)
    steps = pair.first.depth.data[pair.first.depth.valid] * 5000.0
    np.testing.assert_allclose(steps, np.round(steps), atol=1e-6)
    clean, _ = render_synthetic_pair(helpers.rich_scene(), xi, k, 48, 36)
    diff = pair.first.depth.data - clean.first.depth.data
    assert np.abs(diff).max() > 1e-4  # noise actually applied
    assert np.abs(diff).std() < 0.05


def test_render_deterministic_given_seed():
    xi = MotionTwist(np.array([0.002, 0.0, 0.001]), np.zeros(3))
    k = helpers.synth_intrinsics(32, 24)
    a, _ = render_synthetic_pair(helpers.rich_scene(), xi, k, 32, 24,
                                 depth_noise=0.01,
                                 rng=np.random.default_rng(3))
    b, _ = render_synthetic_pair(helpers.rich_scene(), xi, k, 32, 24,
                                 depth_noise=0.01,
                                 rng=np.random.default_rng(3))
    np.testing.assert_array_equal(a.first.depth.data, b.first.depth.data)
    np.testing.assert_array_equal(a.second.intensity.data,
                                  b.second.intensity.data)


def test_degenerate_scene_rejected():
    k = helpers.synth_intrinsics(32, 24)
    with pytest.raises(ValueError):
        render_view(Scene(base_depth=-1.0), exp_twist(MotionTwist.zero()),
                    k, 32, 24)


def test_scene_presets_render():
    rng = np.random.default_rng(9)
    k = helpers.synth_intrinsics(32, 24)
    for name in ("rich", "poor_texture", "poor_structure", "flat", "steps"):
        scene = scene_preset(name, rng)
        intensity, depth = render_view(scene, exp_twist(MotionTwist.zero()),
                                       k, 32, 24)
        assert intensity.data.shape == (24, 32)
        assert depth.valid.all()


def test_unknown_preset_rejected():
    with pytest.raises(ValueError):
        scene_preset("cityscape", np.random.default_rng(0))
