"""Rigid-body motion on SE(3) and the pinhole camera model.

Twists are parameterized as a translational part (meters) and a rotational
part (axis-angle, radians).  A twist describes the motion that maps point
coordinates expressed in the first camera frame into the second camera
frame: p2 = R p1 + t with (R, t) = exp_twist(xi).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidPixelError

__all__ = [
    "MotionTwist",
    "RigidTransform",
    "CameraIntrinsics",
    "PixelCoord",
    "MIN_DEPTH",
    "exp_twist",
    "log_transform",
    "oplus",
    "backproject",
    "transform_point",
    "z_component",
    "project",
    "warp",
]

# Transformed points this close to (or behind) the image plane cannot be
# projected; warp reports them as invalid.
MIN_DEPTH = 1e-6

# Below this rotation angle the closed-form Rodrigues coefficients lose
# precision and second-order Taylor expansions take over.
_SMALL_ANGLE = 1e-8


@dataclass(frozen=True)
class MotionTwist:
    """Six-parameter motion: translation first, axis-angle rotation second."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        lin = np.asarray(self.linear, dtype=np.float64).reshape(3).copy()
        ang = np.asarray(self.angular, dtype=np.float64).reshape(3).copy()
        if not (np.all(np.isfinite(lin)) and np.all(np.isfinite(ang))):
            raise ValueError("twist components must be finite")
        lin.setflags(write=False)
        ang.setflags(write=False)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "angular", ang)

    @classmethod
    def zero(cls) -> "MotionTwist":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, vec) -> "MotionTwist":
        vec = np.asarray(vec, dtype=np.float64).reshape(6)
        return cls(vec[:3], vec[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


@dataclass(frozen=True)
class RigidTransform:
    """Rotation matrix plus translation vector."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3).copy()
        tr = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()
        err = np.abs(rot @ rot.T - np.eye(3)).max()
        if err > 1e-9:
            raise ValueError(f"rotation is not orthonormal (error {err:.3e})")
        if abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        rot.setflags(write=False)
        tr.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equivalent to applying `other` first, then `self`."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -(self.rotation.T @ self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to a (3,) point or an (n, 3) batch."""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    def scaled(self, factor: float) -> "CameraIntrinsics":
        return CameraIntrinsics(self.fx * factor, self.fy * factor,
                                self.cx * factor, self.cy * factor)


@dataclass(frozen=True)
class PixelCoord:
    u: float
    v: float


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def _rotation_coeffs(theta: float):
    # sin(t)/t and (1-cos(t))/t^2 with Taylor fallbacks.
    if theta < _SMALL_ANGLE:
        return 1.0 - theta * theta / 6.0, 0.5 - theta * theta / 24.0
    return np.sin(theta) / theta, (1.0 - np.cos(theta)) / (theta * theta)


def exp_twist(xi: MotionTwist) -> RigidTransform:
    """Exponential map: Rodrigues rotation with the coupled translation."""
    psi = xi.angular
    theta = float(np.linalg.norm(psi))
    k = _skew(psi)
    k2 = k @ k
    a, b = _rotation_coeffs(theta)
    rot = np.eye(3) + a * k + b * k2
    if theta < _SMALL_ANGLE:
        c = 1.0 / 6.0 - theta * theta / 120.0
    else:
        c = (theta - np.sin(theta)) / theta ** 3
    coupling = np.eye(3) + b * k + c * k2
    return RigidTransform(rot, coupling @ xi.linear)


def _log_rotation(rot: np.ndarray) -> np.ndarray:
    trace = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(trace))
    vee = 0.5 * np.array([
        rot[2, 1] - rot[1, 2],
        rot[0, 2] - rot[2, 0],
        rot[1, 0] - rot[0, 1],
    ])
    if theta < _SMALL_ANGLE:
        return vee
    if np.pi - theta < 1e-6:
        # Near a half-turn the off-diagonal difference vanishes; recover the
        # axis from the symmetric part instead.
        sym = (rot + np.eye(3)) / 2.0
        axis_sq = np.clip(np.diag(sym), 0.0, None)
        axis = np.sqrt(axis_sq)
        k = int(np.argmax(axis))
        if axis[k] > 0:
            for i in range(3):
                if i != k:
                    axis[i] = sym[k, i] / axis[k] if axis[k] > 1e-12 else axis[i]
        norm = np.linalg.norm(axis)
        if norm > 0:
            axis = axis / norm
        if np.dot(axis, vee) < 0:
            axis = -axis
        return theta * axis
    return theta / (2.0 * np.sin(theta)) * np.array([
        rot[2, 1] - rot[1, 2],
        rot[0, 2] - rot[2, 0],
        rot[1, 0] - rot[0, 1],
    ])


def _coupling_inverse(psi: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(psi))
    k = _skew(psi)
    k2 = k @ k
    if theta < _SMALL_ANGLE:
        c = 1.0 / 12.0 + theta * theta / 720.0
    else:
        c = (1.0 / theta ** 2
             - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta)))
    return np.eye(3) - 0.5 * k + c * k2


def log_transform(transform: RigidTransform) -> MotionTwist:
    """Inverse of exp_twist."""
    psi = _log_rotation(transform.rotation)
    nu = _coupling_inverse(psi) @ transform.translation
    return MotionTwist(nu, psi)


def oplus(xi: MotionTwist, delta: MotionTwist) -> MotionTwist:
    """Left-multiplicative increment: the twist of exp(delta) . exp(xi)."""
    return log_transform(exp_twist(delta).compose(exp_twist(xi)))


def backproject(p: PixelCoord, depth: float, k: CameraIntrinsics) -> np.ndarray:
    """Lift a pixel with known depth to a 3-D point in the camera frame."""
    if not depth > 0:
        raise InvalidPixelError("depth must be positive")
    return np.array([
        (p.u - k.cx) * depth / k.fx,
        (p.v - k.cy) * depth / k.fy,
        depth,
    ])


def transform_point(xi: MotionTwist, point: np.ndarray) -> np.ndarray:
    return exp_twist(xi).apply(point)


def z_component(point: np.ndarray) -> float:
    return float(np.asarray(point)[2])


def project(point: np.ndarray, k: CameraIntrinsics) -> PixelCoord:
    """Pinhole projection of a point in front of the camera."""
    x, y, z = np.asarray(point, dtype=np.float64)
    if z <= MIN_DEPTH:
        raise InvalidPixelError(f"point depth {z} is behind the projection plane")
    return PixelCoord(k.fx * x / z + k.cx, k.fy * y / z + k.cy)


def warp(xi: MotionTwist, p: PixelCoord, depth: float,
         k: CameraIntrinsics) -> PixelCoord:
    """Full warp: backproject, move by the twist, reproject."""
    return project(transform_point(xi, backproject(p, depth, k)), k)
