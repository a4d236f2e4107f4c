import numpy as np
import pytest

import helpers
from rgbdvo.dataset import Frame, FramePair
from rgbdvo.errors import DegenerateFrameError
from rgbdvo.geometry import MotionTwist
from rgbdvo.imaging import DepthImage, IntensityImage
from rgbdvo.residuals import (STUDENT_T_DOF, NormalTerms, QuadraticModel,
                              ResidualSystem, evaluate_jacobians,
                              evaluate_residuals, normal_terms, reweight,
                              robust_weights, weighted_values)


def test_identical_frames_zero_residuals():
    pair = helpers.identical_pair()
    system = evaluate_residuals(pair, MotionTwist.zero())
    assert system.size > 0
    # Warp roundtrip leaves ulp-level noise even at the identity.
    np.testing.assert_allclose(system.intensity_residuals, 0.0, atol=1e-12)
    np.testing.assert_allclose(system.depth_residuals, 0.0, atol=1e-12)
    np.testing.assert_array_equal(system.intensity_weights, 1.0)


def test_channels_share_pixel_rows():
    xi = helpers.small_twist(np.random.default_rng(2))
    pair = helpers.render_pair(helpers.rich_scene(), xi)
    system = evaluate_residuals(pair, MotionTwist.zero())
    n = system.size
    assert system.depth_residuals.shape == (n,)
    assert system.pixel_ids.shape == (n,)
    assert system.warped.shape == (n, 2)
    assert system.transformed_points.shape == (n, 3)
    assert np.unique(system.pixel_ids).size == n


def test_analytic_jacobians_match_finite_differences():
    rng = np.random.default_rng(8)
    xi = helpers.small_twist(rng)
    pair = helpers.render_pair(helpers.rich_scene(), xi)
    # Evaluate away from zero so warped coordinates sit at generic positions
    # inside their bilinear cells (at zero they land on the lattice).
    j_i, j_d, fd_i, fd_d = helpers.fd_jacobians(pair, xi)
    scale_i = max(np.abs(fd_i).max(), 1.0)
    scale_d = max(np.abs(fd_d).max(), 1.0)
    assert np.abs(j_i - fd_i).max() / scale_i < 1e-4
    assert np.abs(j_d - fd_d).max() / scale_d < 1e-4


def test_constant_intensity_kills_intensity_jacobian():
    pair = helpers.flat_pair(intensity=0.5, depth=2.0)
    system = evaluate_residuals(pair, MotionTwist.zero())
    system = evaluate_jacobians(pair, system)
    np.testing.assert_allclose(system.intensity_jacobian, 0.0, atol=1e-12)


def test_constant_depth_jacobian_structure():
    # With a fronto-parallel plane the depth gradient vanishes, so the depth
    # rows reduce to -d(q_z)/d(increment) = -(0, 0, 1, y, -x, 0): the x/y
    # translation and z rotation columns must be identically zero.
    pair = helpers.flat_pair(intensity=0.5, depth=2.0)
    system = evaluate_residuals(pair, MotionTwist.zero())
    system = evaluate_jacobians(pair, system)
    jd = system.depth_jacobian
    np.testing.assert_allclose(jd[:, 0], 0.0, atol=1e-12)
    np.testing.assert_allclose(jd[:, 1], 0.0, atol=1e-12)
    np.testing.assert_allclose(jd[:, 5], 0.0, atol=1e-12)
    np.testing.assert_allclose(jd[:, 2], -1.0, atol=1e-12)


def test_all_invalid_second_depth_degenerate():
    shape = (24, 32)
    intensity = IntensityImage(np.full(shape, 0.5))
    good = DepthImage.from_values(np.full(shape, 2.0))
    bad = DepthImage.from_values(np.zeros(shape))  # zeros are invalid
    pair = FramePair(Frame(0.0, intensity, good),
                     Frame(0.1, intensity, bad),
                     helpers.synth_intrinsics(*shape[::-1]))
    with pytest.raises(DegenerateFrameError):
        evaluate_residuals(pair, MotionTwist.zero())


def test_occlusion_threshold_drops_rows():
    xi = MotionTwist(np.array([0.0, 0.0, -0.05]), np.zeros(3))
    pair = helpers.render_pair(helpers.rich_scene(), xi)
    # Evaluated at zero twist the depth residuals are all near 0.05 m, so a
    # tight threshold removes every row.
    wide = evaluate_residuals(pair, MotionTwist.zero())
    assert np.abs(wide.depth_residuals).max() > 0.01
    with pytest.raises(DegenerateFrameError):
        evaluate_residuals(pair, MotionTwist.zero(), occlusion_threshold=1e-4)


def test_robust_weights_fixed_point_oracle():
    rng = np.random.default_rng(14)
    for _ in range(5):
        r = rng.standard_t(df=5, size=200) * 0.05
        weights = robust_weights(r)
        # Independent solve: iterate the scale map to machine precision from
        # a different start, then form the weights directly.
        var = 1.0
        for _ in range(10000):
            var = float(np.mean(r ** 2 * (STUDENT_T_DOF + 1.0)
                                / (STUDENT_T_DOF + r ** 2 / var)))
        oracle = (STUDENT_T_DOF + 1.0) / (STUDENT_T_DOF + r ** 2 / var)
        np.testing.assert_allclose(weights, oracle, atol=1e-4)


def test_robust_weights_properties():
    rng = np.random.default_rng(6)
    r = rng.normal(size=100) * 0.1
    w = robust_weights(r)
    assert np.all(w > 0)
    assert np.all(w <= (STUDENT_T_DOF + 1.0) / STUDENT_T_DOF + 1e-12)
    # Monotone: a larger magnitude residual never gets a larger weight.
    order = np.argsort(np.abs(r))
    assert np.all(np.diff(w[order]) <= 1e-12)


def test_robust_weights_scale_invariant():
    rng = np.random.default_rng(31)
    r = rng.normal(size=150) * 0.2
    np.testing.assert_allclose(robust_weights(r), robust_weights(3.0 * r),
                               rtol=1e-3)


def test_robust_weights_zero_residuals():
    np.testing.assert_array_equal(robust_weights(np.zeros(10)), 1.0)


def test_reweight_fills_both_channels():
    xi = helpers.small_twist(np.random.default_rng(4))
    pair = helpers.render_pair(helpers.rich_scene(), xi)
    system = evaluate_residuals(pair, MotionTwist.zero())
    reweight(system)
    assert not np.all(system.intensity_weights == 1.0)
    assert not np.all(system.depth_weights == 1.0)
    np.testing.assert_allclose(
        system.intensity_weights,
        robust_weights(system.intensity_residuals))


def test_weighted_values_hand_case():
    system = ResidualSystem(
        intensity_residuals=np.array([1.0, 2.0]),
        depth_residuals=np.array([3.0, 1.0]),
        pixel_ids=np.array([0, 1]),
        warped=np.zeros((2, 2)),
        transformed_points=np.ones((2, 3)),
        intensity_weights=np.array([0.5, 1.0]),
        depth_weights=np.array([1.0, 2.0]),
    )
    f_i, f_d = weighted_values(system)
    assert f_i == pytest.approx(0.5 * 1 + 1.0 * 4)
    assert f_d == pytest.approx(1.0 * 9 + 2.0 * 1)


def test_normal_terms_single_row_hand_case():
    system = ResidualSystem(
        intensity_residuals=np.array([2.0]),
        depth_residuals=np.array([2.0]),
        pixel_ids=np.array([0]),
        warped=np.zeros((1, 2)),
        transformed_points=np.ones((1, 3)),
        intensity_weights=np.ones(1),
        depth_weights=np.ones(1),
        intensity_jacobian=np.ones((1, 6)),
        depth_jacobian=np.ones((1, 6)),
    )
    terms = normal_terms(system)
    assert terms.intensity.value == pytest.approx(4.0)
    np.testing.assert_allclose(terms.intensity.gradient, 2.0 * np.ones(6))
    np.testing.assert_allclose(terms.intensity.hessian, np.ones((6, 6)))
    # Quadratic model at the Gauss-Newton expansion point reproduces value.
    assert terms.intensity.evaluate(np.zeros(6)) == pytest.approx(4.0)
    # And the model of a genuinely linear residual is exact for any step:
    # (r + J step)^2 with J step = 0.6.
    step = np.full(6, 0.1)
    assert terms.intensity.evaluate(step) == pytest.approx((2 + 0.6) ** 2)


def test_normal_terms_requires_jacobians():
    pair = helpers.identical_pair()
    system = evaluate_residuals(pair, MotionTwist.zero())
    with pytest.raises(ValueError):
        normal_terms(system)


def test_normal_terms_match_direct_accumulation():
    rng = np.random.default_rng(9)
    xi = helpers.small_twist(rng)
    pair = helpers.render_pair(helpers.rich_scene(), xi)
    system = evaluate_residuals(pair, MotionTwist.zero())
    system = evaluate_jacobians(pair, system)
    reweight(system)
    terms = normal_terms(system)
    for model, jac, w, r in (
            (terms.intensity, system.intensity_jacobian,
             system.intensity_weights, system.intensity_residuals),
            (terms.depth, system.depth_jacobian,
             system.depth_weights, system.depth_residuals)):
        assert isinstance(model, QuadraticModel)
        np.testing.assert_allclose(model.value, np.sum(w * r ** 2), rtol=1e-12)
        np.testing.assert_allclose(model.gradient, jac.T @ (w * r),
                                   rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(model.hessian, jac.T @ (w[:, None] * jac),
                                   rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(model.hessian, model.hessian.T)
    assert isinstance(terms, NormalTerms)
