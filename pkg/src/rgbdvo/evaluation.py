"""Trajectory accumulation and drift evaluation.

Drift is measured as a relative pose error: for an estimate P and a
reference Q, E = (Q_t^-1 Q_{t+d})^-1 (P_t^-1 P_{t+d}) over a fixed time
interval d, and the per-sample error is the translation norm of E
divided by the interval, in meters per second.  The reference is
interpolated to the estimate's timestamps, never the other way round.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError
from .geometry import MotionTwist, RigidTransform, exp_twist

__all__ = [
    "Trajectory",
    "DriftReport",
    "quat_to_rotation",
    "rotation_to_quat",
    "accumulate",
    "interpolate_pose",
    "drift_rmse",
    "emit_report",
    "parse_report",
    "write_trajectory",
    "read_trajectory",
]

_SUMMARY_HEADER = ("sequence,method,lambda_mode,rmse_drift_mps,"
                   "max_error_mps,mean_runtime_ms,frames")
_PER_FRAME_HEADER = "timestamp,trans_error_mps"


@dataclass(frozen=True)
class Trajectory:
    """Timestamped absolute poses, timestamps strictly increasing."""

    timestamps: np.ndarray
    poses: tuple

    def __post_init__(self):
        stamps = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        if stamps.size == 0:
            raise ValueError("trajectory must contain at least one pose")
        if stamps.size != len(self.poses):
            raise ValueError("timestamp and pose counts differ")
        if stamps.size > 1 and not np.all(np.diff(stamps) > 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", stamps)
        object.__setattr__(self, "poses", tuple(self.poses))

    def __len__(self) -> int:
        return len(self.poses)


@dataclass
class DriftReport:
    rmse_drift: float
    max_error: float
    per_frame_errors: list
    mean_runtime_per_match: float = 0.0
    sequence: str = ""
    method: str = ""
    lambda_mode: str = ""
    frames: int = 0

    def __post_init__(self):
        if self.rmse_drift < 0:
            raise ValueError("rmse must be nonnegative")
        if self.rmse_drift > self.max_error + 1e-12 * (1.0 + self.max_error):
            raise ValueError("rmse cannot exceed the maximum error")


def quat_to_rotation(q) -> np.ndarray:
    """Unit quaternion (qx, qy, qz, qw) to a rotation matrix."""
    x, y, z, w = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rotation_to_quat(matrix: np.ndarray) -> np.ndarray:
    """Rotation matrix to (qx, qy, qz, qw) with qw >= 0."""
    m = np.asarray(matrix, dtype=np.float64)
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    if trace > 0:
        s = np.sqrt(trace + 1.0) * 2.0
        quat = np.array([(m[2, 1] - m[1, 2]) / s,
                         (m[0, 2] - m[2, 0]) / s,
                         (m[1, 0] - m[0, 1]) / s,
                         0.25 * s])
    else:
        i = int(np.argmax([m[0, 0], m[1, 1], m[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2.0
        vec = np.empty(3)
        vec[i] = 0.25 * s
        vec[j] = (m[j, i] + m[i, j]) / s
        vec[k] = (m[k, i] + m[i, k]) / s
        quat = np.concatenate([vec, [(m[k, j] - m[j, k]) / s]])
    quat /= np.linalg.norm(quat)
    if quat[3] < 0:
        quat = -quat
    return quat


def _slerp(qa: np.ndarray, qb: np.ndarray, frac: float) -> np.ndarray:
    if float(qa @ qb) < 0:
        qb = -qb
    dot = min(max(float(qa @ qb), -1.0), 1.0)
    if dot > 1.0 - 1e-12:
        out = (1.0 - frac) * qa + frac * qb
        return out / np.linalg.norm(out)
    theta = np.arccos(dot)
    return (np.sin((1.0 - frac) * theta) * qa
            + np.sin(frac * theta) * qb) / np.sin(theta)


def accumulate(pair_estimates, max_gap: float = 0.5) -> Trajectory:
    """Chain per-pair twists onto an identity start pose.

    pair_estimates is a list of ((t_first, t_second), MotionTwist).  The
    twist maps first-frame points into the second frame, so the absolute
    pose update is P_next = P_prev * exp(twist)^-1.
    """
    if not pair_estimates:
        raise ValueError("no pair estimates to accumulate")
    stamps = [float(pair_estimates[0][0][0])]
    poses = [RigidTransform.identity()]
    previous_end = None
    for (t_first, t_second), twist in pair_estimates:
        if previous_end is not None and abs(t_first - previous_end) > max_gap:
            warnings.warn("timestamp gap of %.3f s between pair estimates"
                          % abs(t_first - previous_end))
        if not isinstance(twist, MotionTwist):
            twist = MotionTwist.from_vector(np.asarray(twist, dtype=np.float64))
        poses.append(poses[-1].compose(exp_twist(twist).inverse()))
        stamps.append(float(t_second))
        previous_end = float(t_second)
    return Trajectory(np.array(stamps), tuple(poses))


def interpolate_pose(trajectory: Trajectory, stamp: float) -> RigidTransform:
    """Pose at an arbitrary time: linear translation, slerp rotation.

    Exact at sample timestamps.  Raises EvaluationError outside the span.
    """
    stamps = trajectory.timestamps
    if stamp < stamps[0] or stamp > stamps[-1]:
        raise EvaluationError("query time %.6f outside trajectory span "
                              "[%.6f, %.6f]" % (stamp, stamps[0], stamps[-1]))
    idx = int(np.searchsorted(stamps, stamp))
    if idx < len(stamps) and stamps[idx] == stamp:
        return trajectory.poses[idx]
    lo, hi = idx - 1, idx
    frac = (stamp - stamps[lo]) / (stamps[hi] - stamps[lo])
    pose_lo, pose_hi = trajectory.poses[lo], trajectory.poses[hi]
    translation = (1.0 - frac) * pose_lo.translation + frac * pose_hi.translation
    quat = _slerp(rotation_to_quat(pose_lo.rotation),
                  rotation_to_quat(pose_hi.rotation), frac)
    return RigidTransform(quat_to_rotation(quat), translation)


def drift_rmse(estimated: Trajectory, ground_truth: Trajectory,
               interval: float = 1.0, pairing_slack: float | None = None) -> DriftReport:
    """Relative-pose drift of an estimate against an interpolated reference.

    For every estimated timestamp t whose partner t+interval lands on (or
    within pairing_slack of) a later estimated timestamp, the relative
    pose error over that window contributes one sample.
    """
    if interval <= 0:
        raise ValueError("interval must be positive")
    slack = 0.1 * interval if pairing_slack is None else pairing_slack
    stamps = estimated.timestamps
    per_frame = []
    for i in range(len(stamps)):
        target = stamps[i] + interval
        j = int(np.argmin(np.abs(stamps - target)))
        if j <= i or abs(stamps[j] - target) > slack:
            continue
        try:
            q_i = interpolate_pose(ground_truth, stamps[i])
            q_j = interpolate_pose(ground_truth, stamps[j])
        except EvaluationError:
            continue
        ref_rel = q_i.inverse().compose(q_j)
        est_rel = estimated.poses[i].inverse().compose(estimated.poses[j])
        error = ref_rel.inverse().compose(est_rel)
        per_frame.append((float(stamps[i]),
                          float(np.linalg.norm(error.translation)) / interval))
    if not per_frame:
        raise EvaluationError(
            "no evaluable windows: trajectories do not overlap over the "
            "requested interval")
    errors = np.array([e for _, e in per_frame])
    return DriftReport(
        rmse_drift=float(np.sqrt(np.mean(errors ** 2))),
        max_error=float(np.max(errors)),
        per_frame_errors=per_frame,
        frames=len(estimated),
    )


def _fmt(value: float) -> str:
    return "%.9g" % value


def emit_report(report: DriftReport, path) -> None:
    """Deterministic CSV: summary section, then optional per-frame section.

    Timestamps keep microsecond precision; measured values use nine
    significant digits.
    """
    lines = [_SUMMARY_HEADER,
             ",".join([report.sequence, report.method, report.lambda_mode,
                       _fmt(report.rmse_drift), _fmt(report.max_error),
                       _fmt(report.mean_runtime_per_match),
                       str(int(report.frames))])]
    if report.per_frame_errors:
        lines.append(_PER_FRAME_HEADER)
        for stamp, error in report.per_frame_errors:
            lines.append("%.6f,%s" % (stamp, _fmt(error)))
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def parse_report(path) -> DriftReport:
    with open(path, "r", encoding="ascii") as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    if len(lines) < 2 or lines[0] != _SUMMARY_HEADER:
        raise EvaluationError("unrecognized report layout in %s" % path)
    # The sequence label is free text and may itself contain commas; all
    # other summary fields cannot, so split from the right.
    fields = lines[1].split(",")
    if len(fields) < 7:
        raise EvaluationError("short summary row in %s" % path)
    fields = [",".join(fields[:-6])] + fields[-6:]
    per_frame = []
    if len(lines) > 2:
        if lines[2] != _PER_FRAME_HEADER:
            raise EvaluationError("unrecognized per-frame header in %s" % path)
        for line in lines[3:]:
            stamp, error = line.split(",")
            per_frame.append((float(stamp), float(error)))
    return DriftReport(
        rmse_drift=float(fields[3]),
        max_error=float(fields[4]),
        per_frame_errors=per_frame,
        mean_runtime_per_match=float(fields[5]),
        sequence=fields[0],
        method=fields[1],
        lambda_mode=fields[2],
        frames=int(fields[6]),
    )


def write_trajectory(trajectory: Trajectory, path) -> None:
    """Emit "timestamp tx ty tz qx qy qz qw" lines, one pose per line."""
    lines = []
    for stamp, pose in zip(trajectory.timestamps, trajectory.poses):
        quat = rotation_to_quat(pose.rotation)
        values = [_fmt(v) for v in (*pose.translation, *quat)]
        lines.append("%.6f %s" % (stamp, " ".join(values)))
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def read_trajectory(path) -> Trajectory:
    stamps = []
    poses = []
    with open(path, "r", encoding="ascii") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise EvaluationError("expected 8 fields per pose line")
            stamps.append(float(parts[0]))
            translation = np.array([float(v) for v in parts[1:4]])
            quat = np.array([float(v) for v in parts[4:8]])
            poses.append(RigidTransform(quat_to_rotation(quat), translation))
    return Trajectory(np.array(stamps), tuple(poses))
