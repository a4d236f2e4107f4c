"""Shared fixtures-by-hand for the test suite.

Everything here is deterministic given the rng the caller passes in, so
expected values frozen in the tests stay meaningful.
"""

from __future__ import annotations

import os

import numpy as np

from rgbdvo.dataset import Frame, FramePair
from rgbdvo.geometry import CameraIntrinsics, MotionTwist, exp_twist, oplus
from rgbdvo.imaging import DepthImage, IntensityImage
from rgbdvo.residuals import (ResidualSystem, evaluate_jacobians,
                              evaluate_residuals, reweight)
from rgbdvo.synthetic import Scene, render_synthetic_pair


def synth_intrinsics(width: int, height: int) -> CameraIntrinsics:
    """Kinect-like pinhole scaled to the requested raster."""
    focal = 525.0 * width / 640.0
    return CameraIntrinsics(focal, focal, (width - 1) / 2.0, (height - 1) / 2.0)


def rich_scene(rng: np.random.Generator | None = None) -> Scene:
    """Well-textured, well-structured scene with optional random phases."""
    if rng is None:
        phases = (0.7, 1.3, 0.2, 2.1)
    else:
        phases = tuple(rng.uniform(0.0, 2.0 * np.pi, size=4))
    return Scene(
        base_depth=2.0,
        tilt_x=0.15,
        tilt_y=0.1,
        bump_amplitude=0.2,
        bump_period=0.8,
        bump_phase=(phases[0], phases[1]),
        texture_base=0.5,
        texture_amplitude=0.3,
        texture_period=0.4,
        texture_phase=(phases[2], phases[3]),
    )


def small_twist(rng: np.random.Generator, translation: float = 0.01,
                rotation: float = 0.005) -> MotionTwist:
    t = rng.uniform(-translation, translation, size=3)
    r = rng.uniform(-rotation, rotation, size=3)
    return MotionTwist(t, r)


def render_pair(scene: Scene, xi: MotionTwist, width: int = 96,
                height: int = 72, **kwargs) -> FramePair:
    pair, _ = render_synthetic_pair(scene, xi, synth_intrinsics(width, height),
                                    width, height, **kwargs)
    return pair


def identical_pair(width: int = 96, height: int = 72,
                   scene: Scene | None = None) -> FramePair:
    """Two frames holding the very same rendered images."""
    pair = render_pair(scene or rich_scene(), MotionTwist.zero(), width, height)
    first = pair.first
    return FramePair(first, Frame(first.timestamp + 0.1, first.intensity,
                                  first.depth), pair.intrinsics)


def flat_pair(width: int = 8, height: int = 6, intensity: float = 0.5,
              depth: float = 2.0) -> FramePair:
    """Constant-intensity constant-depth pair built directly from arrays."""
    img = IntensityImage(np.full((height, width), intensity))
    dep = DepthImage.from_values(np.full((height, width), depth))
    k = synth_intrinsics(width, height)
    return FramePair(Frame(0.0, img, dep), Frame(0.1, img, dep), k)


_FD_STEP = 1e-6
_CREASE_GUARD = 1e-3


def fd_jacobians(pair: FramePair, xi: MotionTwist):
    """Central finite differences of both residual channels over the twist.

    Perturbs through the same retraction the solver uses.  Rows are matched
    by pixel id across all thirteen evaluations, and rows whose warp lands
    within a guard band of a pixel-lattice line are dropped because the
    bilinear interpolant is not differentiable there.

    Returns (J_analytic_I, J_analytic_D, J_fd_I, J_fd_D) over the kept rows.
    """
    base = evaluate_jacobians(pair, evaluate_residuals(pair, xi))
    keep_ids = set(base.pixel_ids.tolist())
    evals = {}
    for axis in range(6):
        for sign in (+1.0, -1.0):
            delta = np.zeros(6)
            delta[axis] = sign * _FD_STEP
            shifted = oplus(xi, MotionTwist.from_vector(delta))
            system = evaluate_residuals(pair, shifted)
            evals[(axis, sign)] = system
            keep_ids &= set(system.pixel_ids.tolist())

    frac = base.warped - np.floor(base.warped)
    interior = np.all((frac > _CREASE_GUARD) & (frac < 1.0 - _CREASE_GUARD),
                      axis=1)
    keep_ids &= set(base.pixel_ids[interior].tolist())
    keep = np.array(sorted(keep_ids), dtype=np.int64)

    def rows(system: ResidualSystem, ids):
        index = {pid: i for i, pid in enumerate(system.pixel_ids.tolist())}
        sel = np.array([index[p] for p in ids], dtype=np.int64)
        return system.intensity_residuals[sel], system.depth_residuals[sel]

    base_index = {pid: i for i, pid in enumerate(base.pixel_ids.tolist())}
    sel = np.array([base_index[p] for p in keep], dtype=np.int64)
    fd_i = np.empty((keep.size, 6))
    fd_d = np.empty((keep.size, 6))
    for axis in range(6):
        ri_p, rd_p = rows(evals[(axis, +1.0)], keep)
        ri_m, rd_m = rows(evals[(axis, -1.0)], keep)
        fd_i[:, axis] = (ri_p - ri_m) / (2.0 * _FD_STEP)
        fd_d[:, axis] = (rd_p - rd_m) / (2.0 * _FD_STEP)
    return (base.intensity_jacobian[sel], base.depth_jacobian[sel], fd_i, fd_d)


def random_system(rng: np.random.Generator, n: int = 40) -> ResidualSystem:
    """Dense synthetic residual system with full-rank jacobians."""
    j_i = rng.normal(size=(n, 6))
    j_d = rng.normal(size=(n, 6))
    return ResidualSystem(
        intensity_residuals=rng.normal(scale=0.1, size=n),
        depth_residuals=rng.normal(scale=0.1, size=n),
        pixel_ids=np.arange(n, dtype=np.int64),
        warped=np.zeros((n, 2)),
        transformed_points=np.tile(np.array([0.0, 0.0, 2.0]), (n, 1)),
        intensity_weights=rng.uniform(0.5, 1.5, size=n),
        depth_weights=rng.uniform(0.5, 1.5, size=n),
        intensity_jacobian=j_i,
        depth_jacobian=j_d,
    )


def write_tum_sequence(root: str, stamps, intensities, depths,
                       groundtruth: str | None = None,
                       depth_offset: float = 0.0) -> None:
    """Lay out a recorded sequence: rgb/, depth/, index files, optional truth.

    intensities are float arrays in [0,1]; depths are float meters (0 marks
    a hole).  Depth timestamps get depth_offset added to exercise the
    association tolerance.
    """
    from PIL import Image

    os.makedirs(os.path.join(root, "rgb"), exist_ok=True)
    os.makedirs(os.path.join(root, "depth"), exist_ok=True)
    rgb_lines = ["# color images", "# timestamp filename"]
    depth_lines = ["# depth images", "# timestamp filename"]
    for stamp, img, dep in zip(stamps, intensities, depths):
        name = "%.6f" % stamp
        gray = np.clip(np.asarray(img) * 255.0, 0, 255).astype(np.uint8)
        rgb = np.stack([gray] * 3, axis=-1)
        Image.fromarray(rgb).save(
            os.path.join(root, "rgb", name + ".png"))
        raw = np.round(np.asarray(dep) * 5000.0).astype(np.uint16)
        Image.fromarray(raw).save(
            os.path.join(root, "depth", name + ".png"))
        rgb_lines.append("%s rgb/%s.png" % (name, name))
        depth_lines.append("%.6f depth/%s.png" % (stamp + depth_offset, name))
    with open(os.path.join(root, "rgb.txt"), "w") as fh:
        fh.write("\n".join(rgb_lines) + "\n")
    with open(os.path.join(root, "depth.txt"), "w") as fh:
        fh.write("\n".join(depth_lines) + "\n")
    if groundtruth is not None:
        with open(os.path.join(root, "groundtruth.txt"), "w") as fh:
            fh.write(groundtruth)
