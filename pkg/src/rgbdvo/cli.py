"""Command-line front end.

Runs one odometry method over a recorded sequence or a synthetic
scenario, writes the estimated trajectory and a drift report, and maps
failures onto stable exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure.  Partial output files are removed on any failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .bounded import align_bounded
from .complexity import (WEIGHT_MODES, TuningConfig, adaptive_lambda,
                         median_ratio_lambda)
from .dataset import (DEFAULT_INTRINSICS, FramePair, decode_frame,
                      load_sequence)
from .errors import (DegenerateFrameError, DegenerateScaleError,
                     EvaluationError, InfeasibleBoundError,
                     SequenceFormatError)
from .evaluation import (DriftReport, Trajectory, accumulate, drift_rmse,
                         emit_report, quat_to_rotation, write_trajectory)
from .geometry import CameraIntrinsics, MotionTwist, RigidTransform
from .synthetic import generate_sequence, scene_preset
from .weighted import AlignmentResult, SolverSettings, align_weighted

__all__ = ["RunConfig", "UsageError", "run", "main"]

METHODS = ("single", "weighted", "bounded", "tykkala")
SCENE_PRESETS = ("rich", "poor_texture", "poor_structure", "flat", "steps")

_TWIST_KEYS = ("tx", "ty", "tz", "rx", "ry", "rz")
# Gentle default motion: a few millimeters and ~0.1 degree per frame.
_DEFAULT_MOTION = {"tx": 0.004, "ty": 0.0, "tz": 0.003,
                   "rx": 0.0, "ry": 0.002, "rz": 0.0}


class UsageError(Exception):
    """Bad invocation: flags, config file, or synthetic spec."""


@dataclass
class RunConfig:
    input_path: str | None
    synthetic_spec: str | None
    method: str
    tuning: TuningConfig
    settings: SolverSettings
    intrinsics: CameraIntrinsics | None
    out_trajectory: str | None
    out_report: str | None
    seed: int
    no_timing: bool

    def __post_init__(self):
        if (self.input_path is None) == (self.synthetic_spec is None):
            raise UsageError("exactly one of --input / --synthetic is required")
        if self.method not in METHODS:
            raise UsageError("unknown method %r" % (self.method,))


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the contract wants 1.
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rgbdvo", add_help=True,
                     description="Dense RGB-D odometry over a sequence or a "
                                 "synthetic scene")
    parser.add_argument("--input", help="sequence directory (rgb.txt, depth.txt)")
    parser.add_argument("--synthetic",
                        help="scene spec: preset[:key=value,...]; presets: "
                             + ", ".join(SCENE_PRESETS))
    parser.add_argument("--method", choices=METHODS)
    parser.add_argument("--lambda-mode", dest="lambda_mode",
                        choices=WEIGHT_MODES)
    parser.add_argument("--lambda", dest="fixed_weight", type=float,
                        help="depth weight for --lambda-mode fixed")
    parser.add_argument("--phi", type=float, help="gain of the adaptive weight")
    parser.add_argument("--delta", type=float,
                        help="depth-complexity threshold for the bound choice")
    parser.add_argument("--eps-min", dest="eps_min", type=float,
                        help="tight per-pixel depth bound")
    parser.add_argument("--eps-max", dest="eps_max", type=float,
                        help="loose per-pixel depth bound")
    parser.add_argument("--levels", type=int, help="pyramid levels")
    parser.add_argument("--max-iters", dest="max_iters", type=int,
                        help="iterations per pyramid level")
    parser.add_argument("--out-trajectory", help="estimated trajectory path")
    parser.add_argument("--out-report", help="drift report CSV path")
    parser.add_argument("--seed", type=int, help="synthetic scene seed")
    parser.add_argument("--config", help="key=value file; flags override it")
    parser.add_argument("--intrinsics", help="fx,fy,cx,cy override")
    parser.add_argument("--no-timing", dest="no_timing", action="store_true",
                        default=None,
                        help="report zero runtime for reproducible files")
    return parser


def _read_config_file(path) -> dict:
    values = {}
    try:
        with open(path, "r", encoding="ascii") as handle:
            for number, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError("%s:%d: expected key=value" % (path, number))
                key, value = line.split("=", 1)
                values[key.strip()] = value.strip()
    except OSError as err:
        raise UsageError("cannot read config file: %s" % err)
    return values


def _merge(cli_value, file_values: dict, key: str, default, convert):
    if cli_value is not None:
        return cli_value
    if key in file_values:
        raw = file_values[key]
        try:
            return convert(raw)
        except ValueError:
            raise UsageError("config key %s: bad value %r" % (key, raw))
    return default


def _to_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _parse_intrinsics(raw: str) -> CameraIntrinsics:
    parts = raw.split(",")
    if len(parts) != 4:
        raise UsageError("--intrinsics expects fx,fy,cx,cy")
    try:
        fx, fy, cx, cy = (float(p) for p in parts)
    except ValueError:
        raise UsageError("--intrinsics expects four numbers")
    return CameraIntrinsics(fx, fy, cx, cy)


def parse_args(argv=None) -> RunConfig:
    args = _build_parser().parse_args(argv)
    file_values = _read_config_file(args.config) if args.config else {}

    method = _merge(args.method, file_values, "method", "weighted", str)
    lambda_mode = _merge(args.lambda_mode, file_values, "lambda-mode",
                         "complexity", str)
    if lambda_mode not in WEIGHT_MODES:
        raise UsageError("unknown lambda-mode %r" % (lambda_mode,))
    fixed_weight = _merge(args.fixed_weight, file_values, "lambda", 1.0, float)
    phi = _merge(args.phi, file_values, "phi", 1.0, float)
    delta = _merge(args.delta, file_values, "delta", 0.02, float)
    eps_min = _merge(args.eps_min, file_values, "eps-min", 1e-3, float)
    eps_max = _merge(args.eps_max, file_values, "eps-max", 1e3, float)
    levels = _merge(args.levels, file_values, "levels", 3, int)
    max_iters = _merge(args.max_iters, file_values, "max-iters", 50, int)
    seed = _merge(args.seed, file_values, "seed", 0, int)
    no_timing = _merge(args.no_timing, file_values, "no-timing", False, _to_bool)
    input_path = _merge(args.input, file_values, "input", None, str)
    synthetic = _merge(args.synthetic, file_values, "synthetic", None, str)
    out_trajectory = _merge(args.out_trajectory, file_values,
                            "out-trajectory", None, str)
    out_report = _merge(args.out_report, file_values, "out-report", None, str)
    intrinsics_raw = _merge(args.intrinsics, file_values, "intrinsics",
                            None, str)

    try:
        tuning = TuningConfig(weight_gain=phi, structure_threshold=delta,
                              bound_min=eps_min, bound_max=eps_max,
                              weight_mode=lambda_mode,
                              fixed_weight=fixed_weight)
        settings = SolverSettings(max_iterations=max_iters,
                                  pyramid_levels=levels)
    except ValueError as err:
        raise UsageError(str(err))

    return RunConfig(
        input_path=input_path,
        synthetic_spec=synthetic,
        method=method,
        tuning=tuning,
        settings=settings,
        intrinsics=_parse_intrinsics(intrinsics_raw) if intrinsics_raw else None,
        out_trajectory=out_trajectory,
        out_report=out_report,
        seed=seed,
        no_timing=no_timing,
    )


def _parse_synthetic_spec(spec: str, seed: int):
    """preset[:key=value,...] -> (scene, options dict)."""
    name, _, rest = spec.partition(":")
    if name not in SCENE_PRESETS:
        raise UsageError("unknown scene preset %r" % (name,))
    options = {"frames": 30, "width": 160, "height": 120,
               "noise": 0.0, "fps": 10.0}
    options.update(_DEFAULT_MOTION)
    int_keys = ("frames", "width", "height")
    if rest:
        for item in rest.split(","):
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or key not in options:
                raise UsageError("bad synthetic option %r" % (item,))
            try:
                options[key] = int(value) if key in int_keys else float(value)
            except ValueError:
                raise UsageError("bad synthetic value %r" % (item,))
    if options["frames"] < 2:
        raise UsageError("synthetic sequence needs at least 2 frames")
    scene = scene_preset(name, np.random.default_rng(seed))
    return scene, options


def _synthetic_intrinsics(width: int, height: int) -> CameraIntrinsics:
    focal = DEFAULT_INTRINSICS.fx * width / 640.0
    return CameraIntrinsics(focal, focal, (width - 1) / 2.0, (height - 1) / 2.0)


def _load_synthetic(config: RunConfig):
    scene, options = _parse_synthetic_spec(config.synthetic_spec, config.seed)
    k = config.intrinsics or _synthetic_intrinsics(options["width"],
                                                   options["height"])
    twist = MotionTwist.from_vector(np.array(
        [options[key] for key in _TWIST_KEYS]))
    n_pairs = options["frames"] - 1
    pairs, poses, stamps = generate_sequence(
        scene, [twist] * n_pairs, k, options["width"], options["height"],
        fps=options["fps"], depth_noise=options["noise"],
        rng=np.random.default_rng(config.seed + 1))
    truth = Trajectory(np.array(stamps), tuple(poses))
    return pairs, truth


def _load_recorded(config: RunConfig):
    manifest = load_sequence(config.input_path)
    if not manifest.pairs:
        raise SequenceFormatError(config.input_path, 0,
                                  "no associated rgb/depth pairs")
    k = config.intrinsics or DEFAULT_INTRINSICS
    frames = [decode_frame(rgb_path, depth_path, rgb_ts)
              for rgb_ts, rgb_path, _, depth_path in manifest.pairs]
    pairs = [FramePair(frames[i], frames[i + 1], k)
             for i in range(len(frames) - 1)]
    truth = None
    if manifest.groundtruth:
        stamps = np.array([row[0] for row in manifest.groundtruth])
        poses = tuple(
            RigidTransform(quat_to_rotation(np.array(row[4:8])),
                           np.array(row[1:4]))
            for row in manifest.groundtruth)
        truth = Trajectory(stamps, poses)
    return pairs, truth


def _pair_weight(config: RunConfig, pair: FramePair) -> float:
    if config.method == "single":
        return 0.0
    if config.method == "tykkala":
        return median_ratio_lambda(pair)
    mode = config.tuning.weight_mode
    if mode == "fixed":
        return config.tuning.fixed_weight
    if mode == "tykkala":
        return median_ratio_lambda(pair)
    try:
        return adaptive_lambda(pair, config.tuning)
    except DegenerateScaleError:
        # Perfectly flat depth: the adaptive rule is undefined, keep the
        # configured fixed weight instead of aborting the run.
        return config.tuning.fixed_weight


def _align_pair(config: RunConfig, pair: FramePair,
                init: MotionTwist) -> AlignmentResult:
    if config.method == "bounded":
        return align_bounded(pair, init, config.tuning, config.settings)
    return align_weighted(pair, init, _pair_weight(config, pair),
                          config.settings)


def run(config: RunConfig) -> DriftReport | None:
    """Run odometry per the config; write requested outputs; return the
    report when one was computed."""
    if config.input_path is not None:
        pairs, truth = _load_recorded(config)
        sequence_label = os.path.basename(os.path.normpath(config.input_path))
    else:
        pairs, truth = _load_synthetic(config)
        sequence_label = config.synthetic_spec
    if not pairs:
        raise SequenceFormatError(sequence_label, 0, "fewer than two frames")

    estimates = []
    runtimes = []
    init = MotionTwist.zero()
    for pair in pairs:
        started = time.perf_counter()
        result = _align_pair(config, pair, init)
        runtimes.append((time.perf_counter() - started) * 1e3)
        init = result.xi
        estimates.append(((pair.first.timestamp, pair.second.timestamp),
                          result.xi))
    trajectory = accumulate(estimates)
    mean_runtime = 0.0 if config.no_timing else float(np.mean(runtimes))

    report = None
    if truth is not None:
        report = drift_rmse(trajectory, truth, interval=1.0)
    elif config.out_report is not None:
        # No reference available: emit a summary whose error fields are nan.
        report = DriftReport(rmse_drift=float("nan"), max_error=float("nan"),
                             per_frame_errors=[], frames=len(trajectory))
    if report is not None:
        report.sequence = sequence_label
        report.method = config.method
        report.lambda_mode = (config.tuning.weight_mode
                              if config.method == "weighted" else
                              {"single": "fixed", "tykkala": "tykkala",
                               "bounded": ""}[config.method])
        report.mean_runtime_per_match = mean_runtime
        report.frames = len(trajectory)

    if config.out_trajectory is not None:
        write_trajectory(trajectory, config.out_trajectory)
    if config.out_report is not None and report is not None:
        emit_report(report, config.out_report)
    return report


def main(argv=None) -> int:
    written = []
    try:
        config = parse_args(argv)
    except UsageError as err:
        print("rgbdvo: %s" % err, file=sys.stderr)
        return 1
    if config.out_trajectory is not None:
        written.append(config.out_trajectory)
    if config.out_report is not None:
        written.append(config.out_report)
    try:
        report = run(config)
    except UsageError as err:
        _remove_partials(written)
        print("rgbdvo: %s" % err, file=sys.stderr)
        return 1
    except (SequenceFormatError, EvaluationError, FileNotFoundError,
            OSError, ValueError) as err:
        _remove_partials(written)
        print("rgbdvo: data error: %s" % err, file=sys.stderr)
        return 2
    except (DegenerateFrameError, DegenerateScaleError, InfeasibleBoundError,
            np.linalg.LinAlgError, ArithmeticError) as err:
        _remove_partials(written)
        print("rgbdvo: numerical failure: %s" % err, file=sys.stderr)
        return 3
    if report is not None and np.isfinite(report.rmse_drift):
        print("drift rmse: %.9g m/s over %d frames (max %.9g m/s)"
              % (report.rmse_drift, report.frames, report.max_error))
    return 0


def _remove_partials(paths) -> None:
    for path in paths:
        try:
            if os.path.exists(path):
                os.remove(path)
        except OSError:
            pass


if __name__ == "__main__":
    sys.exit(main())
