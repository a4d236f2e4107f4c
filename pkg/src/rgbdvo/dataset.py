"""Sequence ingestion for the TUM RGB-D layout.

A sequence directory holds rgb.txt and depth.txt ("timestamp path" per
line, '#' comments allowed) and optionally groundtruth.txt ("timestamp
tx ty tz qx qy qz qw").  Depth PNGs are 16-bit with 5000 units per meter
and zero marking missing measurements.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import SequenceFormatError
from .geometry import CameraIntrinsics
from .imaging import (DepthImage, IntensityImage, build_pyramid)

__all__ = [
    "Frame",
    "FramePair",
    "SequenceManifest",
    "DEFAULT_INTRINSICS",
    "DEPTH_SCALE",
    "load_sequence",
    "decode_frame",
    "pair_pyramid",
    "associate",
]

# Factory calibration of the reference sensor; used when no override is given.
DEFAULT_INTRINSICS = CameraIntrinsics(525.0, 525.0, 319.5, 239.5)

DEPTH_SCALE = 5000.0  # 16-bit depth units per meter

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

MAX_TIME_OFFSET = 0.02  # seconds; rgb/depth pairs further apart are not matched


@dataclass(frozen=True)
class Frame:
    timestamp: float
    intensity: IntensityImage
    depth: DepthImage

    def __post_init__(self):
        if self.intensity.data.shape != self.depth.data.shape:
            raise ValueError("intensity and depth resolutions differ")


@dataclass(frozen=True)
class FramePair:
    first: Frame
    second: Frame
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        if self.first.intensity.data.shape != self.second.intensity.data.shape:
            raise ValueError("frames in a pair must share a resolution")
        if not self.second.timestamp > self.first.timestamp:
            raise ValueError("second frame must be later than the first")


@dataclass
class SequenceManifest:
    """Associated rgb/depth entries plus any ground-truth poses."""

    root: str
    pairs: list = field(default_factory=list)   # (rgb_ts, rgb_path, depth_ts, depth_path)
    groundtruth: list = field(default_factory=list)  # (ts, tx, ty, tz, qx, qy, qz, qw)


def _parse_indexed(path, n_fields):
    """Parse 'timestamp field...' lines, reporting bad lines by number."""
    rows = []
    last_ts = None
    with open(path, "r") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != n_fields:
                raise SequenceFormatError(
                    path, line_number,
                    f"expected {n_fields} fields, found {len(parts)}")
            try:
                ts = float(parts[0])
            except ValueError:
                raise SequenceFormatError(
                    path, line_number, f"bad timestamp {parts[0]!r}") from None
            if last_ts is not None and ts <= last_ts:
                raise SequenceFormatError(
                    path, line_number, "timestamps must increase")
            last_ts = ts
            rows.append((ts, parts[1:], line_number))
    return rows


def associate(first_stamps, second_stamps, max_offset=MAX_TIME_OFFSET):
    """Greedy nearest-timestamp matching.

    Candidate pairs within the window are sorted by absolute time offset
    (ties broken by the timestamps themselves, so the result is order
    stable) and claimed greedily; each entry matches at most once.
    Returns index pairs sorted by the first stream's timestamp.
    """
    first_stamps = np.asarray(first_stamps, dtype=np.float64)
    second_stamps = np.asarray(second_stamps, dtype=np.float64)
    candidates = []
    for i, ta in enumerate(first_stamps):
        for j, tb in enumerate(second_stamps):
            dt = abs(ta - tb)
            if dt <= max_offset:
                candidates.append((dt, ta, tb, i, j))
    candidates.sort()
    taken_a, taken_b = set(), set()
    matches = []
    for _, _, _, i, j in candidates:
        if i in taken_a or j in taken_b:
            continue
        taken_a.add(i)
        taken_b.add(j)
        matches.append((i, j))
    matches.sort(key=lambda ij: first_stamps[ij[0]])
    return matches


def load_sequence(root, max_offset=MAX_TIME_OFFSET) -> SequenceManifest:
    """Read the index files of a sequence directory and associate streams."""
    rgb_file = os.path.join(root, "rgb.txt")
    depth_file = os.path.join(root, "depth.txt")
    rgb_rows = _parse_indexed(rgb_file, 2)
    depth_rows = _parse_indexed(depth_file, 2)
    manifest = SequenceManifest(root=str(root))
    matches = associate([r[0] for r in rgb_rows], [r[0] for r in depth_rows],
                        max_offset)
    for i, j in matches:
        rgb_ts, (rgb_rel,), _ = rgb_rows[i]
        depth_ts, (depth_rel,), _ = depth_rows[j]
        manifest.pairs.append((rgb_ts, os.path.join(root, rgb_rel),
                               depth_ts, os.path.join(root, depth_rel)))
    gt_file = os.path.join(root, "groundtruth.txt")
    if os.path.exists(gt_file):
        for ts, fields, line_number in _parse_indexed(gt_file, 8):
            try:
                vals = [float(x) for x in fields]
            except ValueError:
                raise SequenceFormatError(
                    gt_file, line_number, "bad pose value") from None
            manifest.groundtruth.append((ts, *vals))
    return manifest


def _decode_intensity(path) -> IntensityImage:
    img = np.asarray(Image.open(path))
    if img.ndim == 3:
        rgb = img[..., :3].astype(np.float64)
        gray = (LUMA_WEIGHTS[0] * rgb[..., 0]
                + LUMA_WEIGHTS[1] * rgb[..., 1]
                + LUMA_WEIGHTS[2] * rgb[..., 2])
    else:
        gray = img.astype(np.float64)
    return IntensityImage(np.clip(gray / 255.0, 0.0, 1.0))


def _decode_depth(path) -> DepthImage:
    raw = np.asarray(Image.open(path))
    if raw.ndim != 2:
        raise ValueError(f"{path}: depth image must be single-channel")
    data = raw.astype(np.float64) / DEPTH_SCALE
    return DepthImage(data, raw > 0)


def decode_frame(rgb_path, depth_path, timestamp: float) -> Frame:
    """Decode one rgb/depth file pair into a frame."""
    intensity = _decode_intensity(rgb_path)
    depth = _decode_depth(depth_path)
    if intensity.data.shape != depth.data.shape:
        raise ValueError(
            f"resolution mismatch: {rgb_path} is {intensity.data.shape}, "
            f"{depth_path} is {depth.data.shape}")
    return Frame(timestamp, intensity, depth)


def pair_pyramid(pair: FramePair, levels: int) -> list:
    """Per-level FramePairs, finest first, with intrinsics halved per level."""
    p1 = build_pyramid(pair.first.intensity, pair.first.depth, levels)
    p2 = build_pyramid(pair.second.intensity, pair.second.depth, levels)
    out = []
    k = pair.intrinsics
    for lvl in range(levels):
        out.append(FramePair(
            Frame(pair.first.timestamp, p1.intensity[lvl], p1.depth[lvl]),
            Frame(pair.second.timestamp, p2.intensity[lvl], p2.depth[lvl]),
            k,
        ))
        k = k.scaled(0.5)
    return out
