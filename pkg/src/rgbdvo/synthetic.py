"""Analytic test scenes rendered by ray casting.

A scene is a textured height field z = h(x, y) in the world frame, which
coincides with the first camera frame.  Because surface and texture are
closed-form, rendered pairs come with exact ground-truth motion and the
true image gradients are known up to the root-finder tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import DEPTH_SCALE, Frame, FramePair
from .geometry import (CameraIntrinsics, MotionTwist, RigidTransform,
                       exp_twist)
from .imaging import DepthImage, IntensityImage

__all__ = [
    "Scene",
    "render_view",
    "render_synthetic_pair",
    "generate_sequence",
    "scene_preset",
]


@dataclass(frozen=True)
class Scene:
    """Height field plus a sinusoidal texture, both analytic in world x/y.

    depth(x, y) = base_depth + tilt.(x, y)
                + bump_amplitude * sin(2 pi x / bump_period + phase_x)
                               * sin(2 pi y / bump_period + phase_y)
                + step_height * [x > step_position]
    texture(x, y) = texture_base
                + texture_amplitude * (sin(..x..) + sin(..y..)) / 2
    """

    base_depth: float = 2.0
    tilt_x: float = 0.0
    tilt_y: float = 0.0
    bump_amplitude: float = 0.0
    bump_period: float = 0.8
    bump_phase: tuple = (0.0, 0.0)
    step_height: float = 0.0
    step_position: float = 0.0
    texture_base: float = 0.5
    texture_amplitude: float = 0.3
    texture_period: float = 0.4
    texture_phase: tuple = (0.0, 0.0)

    def height(self, x, y):
        z = (self.base_depth + self.tilt_x * x + self.tilt_y * y)
        if self.bump_amplitude != 0.0:
            w = 2.0 * np.pi / self.bump_period
            z = z + self.bump_amplitude * (np.sin(w * x + self.bump_phase[0])
                                           * np.sin(w * y + self.bump_phase[1]))
        if self.step_height != 0.0:
            z = z + self.step_height * (x > self.step_position)
        return z

    def texture(self, x, y):
        w = 2.0 * np.pi / self.texture_period
        val = self.texture_base + 0.5 * self.texture_amplitude * (
            np.sin(w * x + self.texture_phase[0])
            + np.sin(w * y + self.texture_phase[1]))
        return np.clip(val, 0.0, 1.0)


def _cast_rays(scene: Scene, dirs: np.ndarray, origin: np.ndarray):
    """First intersection of rays origin + s * dirs (world frame) with the
    surface, by bracketing on a coarse sweep and long bisection."""
    n = dirs.shape[0]
    span = (abs(scene.base_depth) + abs(scene.bump_amplitude)
            + abs(scene.step_height) + 5.0 * (abs(scene.tilt_x) + abs(scene.tilt_y))
            + 2.0)
    s_grid = np.linspace(1e-3, 3.0 * span, 384)

    def miss(s):
        # Signed height of the ray point above the surface.
        p = origin[None, :] + s[:, None] * dirs
        return p[:, 2] - scene.height(p[:, 0], p[:, 1])

    values = np.empty((s_grid.size, n))
    for idx, s in enumerate(s_grid):
        values[idx] = miss(np.full(n, s))
    below = values < 0
    if not np.all(below[0]):
        bad = int(np.count_nonzero(~below[0]))
        raise ValueError(f"{bad} rays start outside the surface volume")
    # First sweep sample past the surface brackets the visible crossing.
    first_above = np.argmax(~below, axis=0)
    if np.any(first_above == 0):
        raise ValueError("some rays never reach the surface inside the sweep")
    lo = s_grid[first_above - 1]
    hi = s_grid[first_above]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        fmid = miss(mid)
        lower = fmid < 0
        lo = np.where(lower, mid, lo)
        hi = np.where(lower, hi, mid)
    s_hit = 0.5 * (lo + hi)
    return origin[None, :] + s_hit[:, None] * dirs


def render_view(scene: Scene, pose: RigidTransform, k: CameraIntrinsics,
                width: int, height: int):
    """Render the scene from a camera at `pose` (world-to-camera).

    Returns (IntensityImage, DepthImage); every pixel is valid.
    """
    vv, uu = np.mgrid[0:height, 0:width].astype(np.float64)
    dirs_cam = np.stack([
        (uu.ravel() - k.cx) / k.fx,
        (vv.ravel() - k.cy) / k.fy,
        np.ones(width * height),
    ], axis=1)
    inv = pose.inverse()
    dirs_world = dirs_cam @ inv.rotation.T
    origin = inv.translation
    hits_world = _cast_rays(scene, dirs_world, origin)
    hits_cam = pose.apply(hits_world)
    depth = hits_cam[:, 2].reshape(height, width)
    intensity = scene.texture(hits_world[:, 0], hits_world[:, 1]).reshape(height, width)
    return (IntensityImage(intensity),
            DepthImage(depth, np.ones_like(depth, dtype=bool)))


def _degrade_depth(depth: DepthImage, noise_sigma: float,
                   rng: np.random.Generator) -> DepthImage:
    """Sensor-style degradation: additive noise plus 16-bit quantization."""
    data = depth.data.copy()
    if noise_sigma > 0:
        data = data + rng.normal(0.0, noise_sigma, size=data.shape)
    data = np.round(data * DEPTH_SCALE) / DEPTH_SCALE
    data = np.maximum(data, 1.0 / DEPTH_SCALE)
    return DepthImage(data, depth.valid)


def render_synthetic_pair(scene: Scene, xi_true: MotionTwist,
                          k: CameraIntrinsics, width: int = 160,
                          height: int = 120, *, depth_noise: float = 0.0,
                          rng=None, timestamps=(0.0, 0.1)):
    """Render a frame pair: first camera at identity, second at exp(xi_true).

    Returns (FramePair, MotionTwist) echoing the true motion.
    """
    i1, d1 = render_view(scene, RigidTransform.identity(), k, width, height)
    i2, d2 = render_view(scene, exp_twist(xi_true), k, width, height)
    if depth_noise > 0.0 or rng is not None:
        rng = rng if rng is not None else np.random.default_rng(0)
        d1 = _degrade_depth(d1, depth_noise, rng)
        d2 = _degrade_depth(d2, depth_noise, rng)
    pair = FramePair(Frame(timestamps[0], i1, d1),
                     Frame(timestamps[1], i2, d2), k)
    return pair, xi_true


def scene_preset(name: str, rng=None) -> Scene:
    """Named scene families used by the command line and the test suite."""
    rng = rng if rng is not None else np.random.default_rng(0)
    phases = tuple(rng.uniform(0.0, 2.0 * np.pi, size=4))
    base = Scene(bump_phase=phases[:2], texture_phase=phases[2:])
    if name == "rich":
        return replace(base, bump_amplitude=0.18, bump_period=0.9,
                       texture_period=0.45, texture_amplitude=0.35)
    if name == "poor_texture":
        # Contrast is kept but gradients are flattened: the texture varies
        # over scales much larger than the image footprint.
        return replace(base, bump_amplitude=0.22, bump_period=0.7,
                       texture_period=12.0, texture_amplitude=0.4)
    if name == "poor_structure":
        return replace(base, bump_amplitude=0.0, tilt_x=0.02,
                       texture_period=0.45, texture_amplitude=0.35)
    if name == "flat":
        return replace(base, bump_amplitude=0.0,
                       texture_period=0.45, texture_amplitude=0.35)
    if name == "steps":
        return replace(base, bump_amplitude=0.0, step_height=0.4,
                       step_position=0.05, texture_period=0.45,
                       texture_amplitude=0.35)
    raise ValueError(f"unknown scene preset {name!r}")


def generate_sequence(scene: Scene, true_twists, k: CameraIntrinsics,
                      width: int = 160, height: int = 120, fps: float = 10.0,
                      *, depth_noise: float = 0.0, rng=None):
    """Render a multi-frame sequence from per-pair true motions.

    Returns (pairs, poses) where poses[i] is the camera-to-world transform
    of frame i (frame 0 at identity) sampled at 1/fps spacing.
    """
    world_to_cam = [RigidTransform.identity()]
    for xi in true_twists:
        world_to_cam.append(exp_twist(xi).compose(world_to_cam[-1]))
    views = []
    rng = rng if rng is not None else np.random.default_rng(0)
    for i, pose in enumerate(world_to_cam):
        intensity, depth = render_view(scene, pose, k, width, height)
        if depth_noise > 0.0:
            depth = _degrade_depth(depth, depth_noise, rng)
        views.append(Frame(i / fps, intensity, depth))
    pairs = [FramePair(views[i], views[i + 1], k)
             for i in range(len(views) - 1)]
    poses = [p.inverse() for p in world_to_cam]
    timestamps = [f.timestamp for f in views]
    return pairs, poses, timestamps
