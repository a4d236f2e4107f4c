import numpy as np
import pytest

import helpers
from rgbdvo.complexity import (ComplexityReport, TuningConfig, adaptive_lambda,
                               complexity_metric, complexity_report,
                               median_ratio_lambda, select_epsilon,
                               variance_ratio)
from rgbdvo.dataset import Frame, FramePair
from rgbdvo.errors import DegenerateScaleError
from rgbdvo.imaging import DepthImage, IntensityImage


def pair_from_arrays(i_arr, d_arr):
    intensity = IntensityImage(np.asarray(i_arr, dtype=np.float64))
    depth = DepthImage.from_values(np.asarray(d_arr, dtype=np.float64))
    h, w = intensity.data.shape
    k = helpers.synth_intrinsics(w, h)
    return FramePair(Frame(0.0, intensity, depth),
                     Frame(0.1, intensity, depth), k)


# The 3x3 interior has a single evaluated pixel, so the metric is just
# |down - up| + |right - left| around the center.
I_UNIT = [[0.0, 0.5, 0.0], [0.25, 0.5, 0.75], [1.0, 1.0, 0.5]]   # pi = 1
D_UNIT = [[1.5, 1.0, 1.25], [1.0, 1.5, 2.0], [1.75, 2.0, 1.5]]   # pi = 2


def test_complexity_constant_zero():
    assert complexity_metric(np.full((5, 7), 3.25)) == 0.0


def test_complexity_3x3_hand_case():
    assert complexity_metric(np.arange(1.0, 10.0).reshape(3, 3)) == 8.0


def test_complexity_ramp():
    ramp = np.tile(np.arange(6.0), (4, 1))
    assert complexity_metric(ramp) == 2.0


def test_complexity_scales_linearly():
    rng = np.random.default_rng(18)
    img = rng.random((9, 11))
    base = complexity_metric(img)
    for c in (2.0, 0.25, 7.5):
        assert complexity_metric(c * img) == pytest.approx(c * base,
                                                           rel=1e-12)


def test_complexity_too_small():
    with pytest.raises(ValueError):
        complexity_metric(np.ones((2, 5)))


def test_complexity_skips_invalid_neighborhoods():
    d = np.array([[1.0, 0.0, 1.2, 1.4],
                  [2.0, 1.1, 1.3, 1.5],
                  [1.0, 1.6, 1.8, 2.2]])
    depth = DepthImage.from_values(d)  # the zero becomes invalid
    # Interior (1,1) touches the invalid pixel and is skipped; only (1,2)
    # contributes: |1.8 - 1.2| + |1.5 - 1.1| = 1.0.
    assert complexity_metric(depth) == pytest.approx(1.0)


def test_variance_ratio_hand_case():
    checker = np.indices((4, 4)).sum(axis=0) % 2
    i_arr = checker.astype(np.float64)            # values {0, 1}, var 1/4
    d_arr = np.where(checker == 0, 0.5, 2.5)      # values {.5, 2.5}, var 1
    pair = pair_from_arrays(i_arr, d_arr)
    assert variance_ratio(pair.first.intensity, pair.first.depth) == 0.25


def test_variance_ratio_constant_depth_degenerate():
    pair = pair_from_arrays(I_UNIT, np.full((3, 3), 2.0))
    with pytest.raises(DegenerateScaleError):
        variance_ratio(pair.first.intensity, pair.first.depth)


def test_adaptive_lambda_exact_hand_case():
    # pi_I = 1, pi_D = 2, and both value multisets have variance 1/8, so
    # gamma = 1 and lambda = gamma^2 pi_D^2 / pi_I^2 = 4 exactly.
    pair = pair_from_arrays(I_UNIT, D_UNIT)
    assert adaptive_lambda(pair, TuningConfig()) == 4.0
    assert adaptive_lambda(pair, TuningConfig(weight_gain=2.5)) == 10.0


def test_adaptive_lambda_depth_rearrangement():
    # Same depth multiset (hence same variance), different spatial
    # arrangement: doubling the complexity quadruples lambda.
    d_mild = [[1.75, 1.0, 1.75], [2.0, 1.75, 2.5], [1.75, 1.5, 1.75]]
    d_sharp = [[1.75, 1.0, 1.75], [1.5, 1.75, 2.5], [1.75, 2.0, 1.75]]
    assert complexity_metric(np.array(d_sharp)) == pytest.approx(
        2.0 * complexity_metric(np.array(d_mild)))
    lam_mild = adaptive_lambda(pair_from_arrays(I_UNIT, d_mild),
                               TuningConfig())
    lam_sharp = adaptive_lambda(pair_from_arrays(I_UNIT, d_sharp),
                                TuningConfig())
    assert lam_sharp == pytest.approx(4.0 * lam_mild, rel=1e-12)


def test_adaptive_lambda_intensity_rearrangement():
    # Sharper texture with the same intensity histogram divides lambda by 4.
    i_mild = [[0.5, 0.25, 0.5], [0.75, 0.5, 1.0], [0.5, 0.5, 0.5]]
    i_sharp = [[0.5, 0.25, 0.5], [0.5, 0.5, 1.0], [0.5, 0.75, 0.5]]
    assert complexity_metric(np.array(i_sharp)) == pytest.approx(
        2.0 * complexity_metric(np.array(i_mild)))
    lam_mild = adaptive_lambda(pair_from_arrays(i_mild, D_UNIT),
                               TuningConfig())
    lam_sharp = adaptive_lambda(pair_from_arrays(i_sharp, D_UNIT),
                                TuningConfig())
    assert lam_sharp == pytest.approx(lam_mild / 4.0, rel=1e-12)


def test_adaptive_lambda_textureless_cap():
    pair = pair_from_arrays(np.full((3, 3), 0.5), D_UNIT)
    assert adaptive_lambda(pair, TuningConfig()) == TuningConfig().weight_cap
    assert adaptive_lambda(pair, TuningConfig(weight_cap=77.0)) == 77.0


def test_median_ratio_hand_cases():
    i_arr = np.full((3, 3), 0.5)
    pair = pair_from_arrays(i_arr, np.full((3, 3), 2.0))
    assert median_ratio_lambda(pair) == 0.0625
    dark = np.zeros((3, 3))
    dark[1, 1] = 0.5  # median stays 0
    assert median_ratio_lambda(pair_from_arrays(dark, np.full((3, 3), 2.0))) == 0.0


def test_median_ratio_sort_oracle():
    rng = np.random.default_rng(23)
    for _ in range(20):
        i_arr = rng.random((5, 5))
        d_arr = rng.uniform(0.5, 3.0, (5, 5))
        pair = pair_from_arrays(i_arr, d_arr)
        med = lambda v: sorted(v)[len(v) // 2]  # odd-length exact median
        expect = (med(list(i_arr.ravel())) / med(list(d_arr.ravel()))) ** 2
        assert median_ratio_lambda(pair) == pytest.approx(expect, rel=1e-12)


def test_median_ratio_no_valid_depth():
    intensity = IntensityImage(np.full((3, 3), 0.5))
    depth = DepthImage.from_values(np.zeros((3, 3)))
    pair = FramePair(Frame(0.0, intensity, depth),
                     Frame(0.1, intensity, depth),
                     helpers.synth_intrinsics(3, 3))
    with pytest.raises(DegenerateScaleError):
        median_ratio_lambda(pair)


def test_select_epsilon_branches():
    cfg = TuningConfig(structure_threshold=0.02, bound_min=1e-3, bound_max=1e3)
    structured = pair_from_arrays(I_UNIT, D_UNIT)  # pi_D = 2 > 0.02
    assert select_epsilon(structured, cfg) == 1e-3 * 9
    flat = pair_from_arrays(I_UNIT, np.full((3, 3), 2.0))  # pi_D = 0
    assert select_epsilon(flat, cfg) == 1e3 * 9


def test_select_epsilon_threshold_inclusive():
    # Complexity exactly at the threshold counts as structure-poor.
    cfg = TuningConfig(structure_threshold=2.0)
    pair = pair_from_arrays(I_UNIT, D_UNIT)  # pi_D = 2 exactly
    assert select_epsilon(pair, cfg) == cfg.bound_max * 9


def test_select_epsilon_counts_valid_pixels():
    d = np.array(D_UNIT)
    d[0, 0] = 0.0
    d[2, 2] = 0.0
    pair = pair_from_arrays(I_UNIT, d)
    cfg = TuningConfig()
    assert pair.first.depth.valid.sum() == 7
    assert select_epsilon(pair, cfg) == cfg.bound_min * 7


def test_tuning_config_validation():
    with pytest.raises(ValueError):
        TuningConfig(weight_gain=0.0)
    with pytest.raises(ValueError):
        TuningConfig(bound_min=1.0, bound_max=1.0)
    with pytest.raises(ValueError):
        TuningConfig(bound_min=-1.0)
    with pytest.raises(ValueError):
        TuningConfig(weight_mode="huber")
    with pytest.raises(ValueError):
        TuningConfig(fixed_weight=-0.5)


def test_complexity_report_modes():
    pair = pair_from_arrays(I_UNIT, D_UNIT)
    rep = complexity_report(pair, TuningConfig())
    assert isinstance(rep, ComplexityReport)
    assert rep.intensity_complexity == 1.0
    assert rep.depth_complexity == 2.0
    assert rep.variance_ratio == pytest.approx(1.0)
    assert rep.depth_weight == 4.0
    assert rep.depth_bound == select_epsilon(pair, TuningConfig())
    fixed = complexity_report(pair, TuningConfig(weight_mode="fixed",
                                                 fixed_weight=0.7))
    assert fixed.depth_weight == 0.7
    tyk = complexity_report(pair, TuningConfig(weight_mode="tykkala"))
    assert tyk.depth_weight == median_ratio_lambda(pair)


def test_complexity_report_constant_depth_falls_back():
    pair = pair_from_arrays(I_UNIT, np.full((3, 3), 2.0))
    rep = complexity_report(pair, TuningConfig(fixed_weight=0.3))
    assert rep.depth_weight == 0.3
    assert np.isnan(rep.variance_ratio)
