"""Image containers, subpixel sampling, and the coarse-to-fine pyramid.

Pixel coordinates follow (u, v) = (column, row) with the origin at the
top-left pixel center.  Arrays are stored row-major, data[v, u].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidPixelError
from .geometry import PixelCoord

__all__ = [
    "IntensityImage",
    "DepthImage",
    "Pyramid",
    "sample_bilinear",
    "gradient",
    "build_pyramid",
    "downsample_intensity",
    "downsample_depth",
]


@dataclass(frozen=True)
class IntensityImage:
    """Single-channel image with values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2 or min(data.shape) < 3:
            raise ValueError("intensity image must be 2-D, at least 3x3")
        if not np.all(np.isfinite(data)):
            raise ValueError("intensity values must be finite")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("intensity values must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class DepthImage:
    """Depth map in meters plus a validity mask.

    Invalid entries are stored as 0.0 and are never read through the
    sampling interface.
    """

    data: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        valid = np.array(self.valid, dtype=bool, copy=True)
        if data.ndim != 2 or min(data.shape) < 3:
            raise ValueError("depth image must be 2-D, at least 3x3")
        if valid.shape != data.shape:
            raise ValueError("validity mask shape must match the data")
        good = data[valid]
        if good.size and not (np.all(np.isfinite(good)) and np.all(good > 0)):
            raise ValueError("valid depth entries must be finite and positive")
        data = np.where(valid, data, 0.0)
        data.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def from_values(cls, data) -> "DepthImage":
        """Treat non-positive or non-finite entries as missing."""
        data = np.asarray(data, dtype=np.float64)
        valid = np.isfinite(data) & (data > 0)
        return cls(data, valid)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Pyramid:
    """Per-frame image pyramid, finest level first."""

    intensity: tuple
    depth: tuple

    def __post_init__(self):
        if len(self.intensity) != len(self.depth) or not self.intensity:
            raise ValueError("pyramid needs matching, non-empty level lists")
        for fine, coarse in zip(self.intensity, self.intensity[1:]):
            if (coarse.width != fine.width // 2
                    or coarse.height != fine.height // 2):
                raise ValueError("each level must halve both dimensions")

    @property
    def levels(self) -> int:
        return len(self.intensity)


def _as_array(img) -> np.ndarray:
    if isinstance(img, (IntensityImage, DepthImage)):
        return img.data
    return np.asarray(img, dtype=np.float64)


def _corners(shape, u, v):
    """Corner indices and weights for bilinear interpolation.

    Coordinates exactly on the max edge fold onto the previous cell with a
    fractional part of 1, so only in-bounds corners carry weight.
    """
    h, w = shape
    u0 = np.clip(np.floor(u).astype(np.int64), 0, w - 2)
    v0 = np.clip(np.floor(v).astype(np.int64), 0, h - 2)
    fu = u - u0
    fv = v - v0
    weights = ((1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv)
    corners = ((v0, u0), (v0, u0 + 1), (v0 + 1, u0), (v0 + 1, u0 + 1))
    return corners, weights


def bilinear_grid(data: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized bilinear interpolation; coordinates must be in bounds."""
    corners, weights = _corners(data.shape, u, v)
    out = np.zeros_like(np.asarray(u, dtype=np.float64))
    for (cv, cu), wgt in zip(corners, weights):
        out += wgt * data[cv, cu]
    return out


def bilinear_depth_grid(depth: DepthImage, u: np.ndarray, v: np.ndarray):
    """Bilinear depth interpolation: (values, ok) where ok is False whenever
    any corner with nonzero weight is invalid."""
    corners, weights = _corners(depth.data.shape, u, v)
    out = np.zeros_like(np.asarray(u, dtype=np.float64))
    ok = np.ones(out.shape, dtype=bool)
    for (cv, cu), wgt in zip(corners, weights):
        out += wgt * depth.data[cv, cu]
        ok &= (wgt == 0) | depth.valid[cv, cu]
    return np.where(ok, out, 0.0), ok


def _check_bounds(img, p: PixelCoord):
    data = _as_array(img)
    h, w = data.shape
    if not (0.0 <= p.u <= w - 1 and 0.0 <= p.v <= h - 1):
        raise InvalidPixelError(f"({p.u}, {p.v}) outside [0, {w - 1}]x[0, {h - 1}]")


def sample_bilinear(img, p: PixelCoord) -> float:
    """Bilinearly interpolated value at a subpixel coordinate.

    Depth samples are invalid (raise) if any contributing neighbor is
    invalid; integer coordinates return the stored value exactly.
    """
    _check_bounds(img, p)
    u = np.asarray([p.u], dtype=np.float64)
    v = np.asarray([p.v], dtype=np.float64)
    if isinstance(img, DepthImage):
        val, ok = bilinear_depth_grid(img, u, v)
        if not ok[0]:
            raise InvalidPixelError(f"invalid depth neighbor at ({p.u}, {p.v})")
        return float(val[0])
    return float(bilinear_grid(_as_array(img), u, v)[0])


def gradient_grid(data: np.ndarray, u: np.ndarray, v: np.ndarray):
    """Exact derivative of the bilinear interpolant at each coordinate.

    This is the slope of the surface actually sampled by bilinear_grid,
    so residual Jacobians built from it agree with finite differences of
    the sampled values to rounding error (away from cell boundaries,
    where the interpolant is not differentiable).
    """
    h, w = data.shape
    u0 = np.clip(np.floor(u).astype(np.int64), 0, w - 2)
    v0 = np.clip(np.floor(v).astype(np.int64), 0, h - 2)
    fu = u - u0
    fv = v - v0
    du = ((1 - fv) * (data[v0, u0 + 1] - data[v0, u0])
          + fv * (data[v0 + 1, u0 + 1] - data[v0 + 1, u0]))
    dv = ((1 - fu) * (data[v0 + 1, u0] - data[v0, u0])
          + fu * (data[v0 + 1, u0 + 1] - data[v0, u0 + 1]))
    return du, dv


def depth_gradient_grid(depth: DepthImage, u: np.ndarray, v: np.ndarray):
    """Bilinear-interpolant derivative on a depth map.

    The slope involves all four corners of the cell whatever the
    fractional position, so ok requires the full cell to be valid.
    """
    h, w = depth.data.shape
    u0 = np.clip(np.floor(np.asarray(u)).astype(np.int64), 0, w - 2)
    v0 = np.clip(np.floor(np.asarray(v)).astype(np.int64), 0, h - 2)
    ok = (depth.valid[v0, u0] & depth.valid[v0, u0 + 1]
          & depth.valid[v0 + 1, u0] & depth.valid[v0 + 1, u0 + 1])
    du, dv = gradient_grid(depth.data, u, v)
    return du, dv, ok


def gradient(img, p: PixelCoord) -> np.ndarray:
    """Image gradient (d/du, d/dv) at a subpixel coordinate."""
    data = _as_array(img)
    h, w = data.shape
    if not (1.0 <= p.u <= w - 2 and 1.0 <= p.v <= h - 2):
        raise InvalidPixelError("gradient needs one pixel of margin from borders")
    u = np.asarray([p.u], dtype=np.float64)
    v = np.asarray([p.v], dtype=np.float64)
    if isinstance(img, DepthImage):
        du, dv, ok = depth_gradient_grid(img, u, v)
        if not ok[0]:
            raise InvalidPixelError(f"invalid depth neighbor near ({p.u}, {p.v})")
        return np.array([du[0], dv[0]])
    du, dv = gradient_grid(data, u, v)
    return np.array([du[0], dv[0]])


def downsample_intensity(data: np.ndarray) -> np.ndarray:
    """Average 2x2 blocks; odd trailing rows/columns are dropped."""
    h, w = data.shape
    h2, w2 = h // 2, w // 2
    blocks = data[:h2 * 2, :w2 * 2].reshape(h2, 2, w2, 2)
    return blocks.mean(axis=(1, 3))


def downsample_depth(data: np.ndarray, valid: np.ndarray):
    """Average only the valid entries of each 2x2 block.

    Blocks with no valid entry come out invalid.
    """
    h, w = data.shape
    h2, w2 = h // 2, w // 2
    d = np.where(valid, data, 0.0)[:h2 * 2, :w2 * 2].reshape(h2, 2, w2, 2)
    m = valid[:h2 * 2, :w2 * 2].reshape(h2, 2, w2, 2)
    counts = m.sum(axis=(1, 3))
    sums = d.sum(axis=(1, 3))
    out_valid = counts > 0
    out = np.divide(sums, counts, out=np.zeros_like(sums), where=out_valid)
    return out, out_valid


def build_pyramid(intensity: IntensityImage, depth: DepthImage,
                  levels: int = 3) -> Pyramid:
    """Coarse-to-fine pyramid by 2x2 averaging.

    The finest image must be at least 3 * 2**(levels - 1) pixels per side so
    every level keeps an interior.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if intensity.data.shape != depth.data.shape:
        raise ValueError("intensity and depth must share a resolution")
    need = 3 * 2 ** (levels - 1)
    if intensity.width < need or intensity.height < need:
        raise ValueError(
            f"{intensity.width}x{intensity.height} too small for {levels} levels"
        )
    intensities = [intensity]
    depths = [depth]
    for _ in range(levels - 1):
        intensities.append(IntensityImage(downsample_intensity(intensities[-1].data)))
        d, m = downsample_depth(depths[-1].data, depths[-1].valid)
        depths.append(DepthImage(d, m))
    return Pyramid(tuple(intensities), tuple(depths))
