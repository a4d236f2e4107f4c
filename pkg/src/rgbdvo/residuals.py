"""Dense residuals, analytic Jacobians, robust weights, and normal terms.

For a pixel x with source depth d, the transformed point is
q = R backproject(x, d) + t and the warped coordinate y = project(q).
Residuals are
    intensity: I2(y) - I1(x)
    depth:     D2(y) - q_z
Jacobians are taken with respect to a left-multiplicative twist increment
at zero, so the point-transform Jacobian is [I | -[q]_x].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import FramePair
from .errors import DegenerateFrameError
from .geometry import MIN_DEPTH, MotionTwist, exp_twist
from .imaging import (bilinear_depth_grid, bilinear_grid, depth_gradient_grid,
                      gradient_grid)

__all__ = [
    "ResidualSystem",
    "QuadraticModel",
    "NormalTerms",
    "evaluate_residuals",
    "evaluate_jacobians",
    "robust_weights",
    "normal_terms",
    "weighted_values",
    "MIN_VALID_PIXELS",
    "OCCLUSION_THRESHOLD",
    "STUDENT_T_DOF",
]

# Fewer surviving pixels than twist parameters means the frame carries no
# usable motion information.
MIN_VALID_PIXELS = 6

# Depth residuals beyond this (meters) are treated as occlusions/disocclusions
# and dropped before any weighting.
OCCLUSION_THRESHOLD = 0.3

STUDENT_T_DOF = 5.0

_SCALE_FLOOR = 1e-24  # variance floor, i.e. a 1e-12 floor on sigma


@dataclass
class ResidualSystem:
    """Per-pixel residual rows for one (pair, twist) evaluation.

    Rows exist only for pixels that survived every validity test; both
    channels always share the same pixel set.  Jacobians are filled in by
    evaluate_jacobians and start as None.
    """

    intensity_residuals: np.ndarray
    depth_residuals: np.ndarray
    pixel_ids: np.ndarray
    warped: np.ndarray            # (n, 2) coordinates in the second frame
    transformed_points: np.ndarray  # (n, 3) in the second camera frame
    intensity_weights: np.ndarray
    depth_weights: np.ndarray
    intensity_jacobian: np.ndarray | None = None
    depth_jacobian: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.intensity_residuals.size


@dataclass(frozen=True)
class QuadraticModel:
    """value + 2 gradient . step + step . hessian . step for one channel."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray

    def evaluate(self, step: np.ndarray) -> float:
        step = np.asarray(step, dtype=np.float64)
        return float(self.value + 2.0 * self.gradient @ step
                     + step @ self.hessian @ step)


@dataclass(frozen=True)
class NormalTerms:
    intensity: QuadraticModel
    depth: QuadraticModel


def evaluate_residuals(pair: FramePair, xi: MotionTwist,
                       occlusion_threshold: float = OCCLUSION_THRESHOLD
                       ) -> ResidualSystem:
    """Warp every valid source pixel and compute both residual channels.

    Weights start at one.  Raises DegenerateFrameError when fewer than
    MIN_VALID_PIXELS pixels survive.
    """
    k = pair.intrinsics
    i1 = pair.first.intensity.data
    d1 = pair.first.depth
    i2 = pair.second.intensity.data
    d2 = pair.second.depth
    h, w = i1.shape

    ids = np.arange(h * w)
    keep = d1.valid.ravel().copy()
    depth = d1.data.ravel()

    uu = (ids % w).astype(np.float64)
    vv = (ids // w).astype(np.float64)

    ids, uu, vv, depth = ids[keep], uu[keep], vv[keep], depth[keep]

    transform = exp_twist(xi)
    points = np.stack([(uu - k.cx) * depth / k.fx,
                       (vv - k.cy) * depth / k.fy,
                       depth], axis=1)
    q = points @ transform.rotation.T + transform.translation

    keep = q[:, 2] > MIN_DEPTH
    ids, q = ids[keep], q[keep]
    uu, vv, depth = uu[keep], vv[keep], depth[keep]

    wu = k.fx * q[:, 0] / q[:, 2] + k.cx
    wv = k.fy * q[:, 1] / q[:, 2] + k.cy

    # One pixel of margin so gradients at the warped coordinate stay inside.
    keep = (wu >= 1.0) & (wu <= w - 2.0) & (wv >= 1.0) & (wv <= h - 2.0)
    ids, q, wu, wv = ids[keep], q[keep], wu[keep], wv[keep]
    uu, vv = uu[keep], vv[keep]

    i2_at = bilinear_grid(i2, wu, wv)
    d2_at, d2_ok = bilinear_depth_grid(d2, wu, wv)
    _, _, grad_ok = depth_gradient_grid(d2, wu, wv)

    r_i = i2_at - i1[vv.astype(int), uu.astype(int)]
    r_d = d2_at - q[:, 2]

    keep = d2_ok & grad_ok & (np.abs(r_d) <= occlusion_threshold)
    ids, q, wu, wv = ids[keep], q[keep], wu[keep], wv[keep]
    r_i, r_d = r_i[keep], r_d[keep]

    if ids.size < MIN_VALID_PIXELS:
        raise DegenerateFrameError(
            f"only {ids.size} valid pixels (need {MIN_VALID_PIXELS})")

    ones = np.ones(ids.size)
    return ResidualSystem(
        intensity_residuals=r_i,
        depth_residuals=r_d,
        pixel_ids=ids,
        warped=np.stack([wu, wv], axis=1),
        transformed_points=q,
        intensity_weights=ones,
        depth_weights=ones.copy(),
    )


def evaluate_jacobians(pair: FramePair, system: ResidualSystem) -> ResidualSystem:
    """Fill the analytic residual Jacobians (rows match system.pixel_ids).

    Chain rule: image gradient at the warped coordinate, the pinhole
    projection Jacobian, and the point-transform Jacobian [I | -[q]_x].
    The depth channel subtracts the derivative of the transformed z.
    """
    k = pair.intrinsics
    q = system.transformed_points
    wu = system.warped[:, 0]
    wv = system.warped[:, 1]
    n = system.size

    gi_u, gi_v = gradient_grid(pair.second.intensity.data, wu, wv)
    gd_u, gd_v, _ = depth_gradient_grid(pair.second.depth, wu, wv)

    x, y, z = q[:, 0], q[:, 1], q[:, 2]
    inv_z = 1.0 / z

    # Rows of d(projection)/dq, scaled by the focal lengths.
    pu = np.stack([k.fx * inv_z, np.zeros(n), -k.fx * x * inv_z ** 2], axis=1)
    pv = np.stack([np.zeros(n), k.fy * inv_z, -k.fy * y * inv_z ** 2], axis=1)

    # d(q)/d(increment) = [I | -skew(q)], one (3, 6) block per pixel.
    point_jac = np.zeros((n, 3, 6))
    point_jac[:, 0, 0] = 1.0
    point_jac[:, 1, 1] = 1.0
    point_jac[:, 2, 2] = 1.0
    point_jac[:, 0, 4] = z
    point_jac[:, 0, 5] = -y
    point_jac[:, 1, 3] = -z
    point_jac[:, 1, 5] = x
    point_jac[:, 2, 3] = y
    point_jac[:, 2, 4] = -x

    grad_i = gi_u[:, None] * pu + gi_v[:, None] * pv   # (n, 3) d r_I / dq
    grad_d = gd_u[:, None] * pu + gd_v[:, None] * pv

    system.intensity_jacobian = np.einsum("nk,nkj->nj", grad_i, point_jac)
    system.depth_jacobian = (np.einsum("nk,nkj->nj", grad_d, point_jac)
                             - point_jac[:, 2, :])
    return system


def robust_weights(residuals: np.ndarray, dof: float = STUDENT_T_DOF,
                   tol: float = 1e-6, max_iterations: int = 50) -> np.ndarray:
    """Student-t IRLS weights with the scale found by fixed-point iteration.

    All-zero residuals get unit weights (nothing to reweight).
    """
    r2 = np.asarray(residuals, dtype=np.float64) ** 2
    if r2.size == 0 or not np.any(r2 > 0):
        return np.ones_like(r2)
    var = max(float(r2.mean()), _SCALE_FLOOR)
    for _ in range(max_iterations):
        new = float(np.mean(r2 * (dof + 1.0) / (dof + r2 / var)))
        new = max(new, _SCALE_FLOOR)
        done = abs(new - var) < tol
        var = new
        if done:
            break
    return (dof + 1.0) / (dof + r2 / var)


def reweight(system: ResidualSystem, dof: float = STUDENT_T_DOF) -> ResidualSystem:
    """Recompute both channels' robust weights in place."""
    system.intensity_weights = robust_weights(system.intensity_residuals, dof)
    system.depth_weights = robust_weights(system.depth_residuals, dof)
    return system


def weighted_values(system: ResidualSystem):
    """Weighted sum-of-squares objective value of each channel."""
    f_i = float(system.intensity_weights @ system.intensity_residuals ** 2)
    f_d = float(system.depth_weights @ system.depth_residuals ** 2)
    return f_i, f_d


def _channel_terms(jac, weights, residuals) -> QuadraticModel:
    wr = weights * residuals
    hess = jac.T @ (weights[:, None] * jac)
    hess = 0.5 * (hess + hess.T)
    return QuadraticModel(
        value=float(weights @ residuals ** 2),
        gradient=jac.T @ wr,
        hessian=hess,
    )


def normal_terms(system: ResidualSystem) -> NormalTerms:
    """Accumulate per-channel values, gradients, and Gauss-Newton Hessians."""
    if system.intensity_jacobian is None or system.depth_jacobian is None:
        raise ValueError("evaluate_jacobians must run before normal_terms")
    return NormalTerms(
        intensity=_channel_terms(system.intensity_jacobian,
                                 system.intensity_weights,
                                 system.intensity_residuals),
        depth=_channel_terms(system.depth_jacobian,
                             system.depth_weights,
                             system.depth_residuals),
    )
