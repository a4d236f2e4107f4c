"""Dense RGB-D visual odometry.

Frame-to-frame camera motion from aligned intensity/depth pairs, with
two ways of trading the photometric error against the geometric one: a
scalarized Gauss-Newton iteration whose depth weight adapts to image
complexity, and a bounded formulation that caps the depth error and
minimizes the intensity error subject to that cap via an embedded
second-order cone solver.
"""

from .bounded import (QcqpInstance, align_bounded, bounded_step, build_qcqp,
                      qcqp_to_socp, solve_qcqp_dual)
from .complexity import (ComplexityReport, TuningConfig, adaptive_lambda,
                         complexity_metric, complexity_report,
                         median_ratio_lambda, select_epsilon, variance_ratio)
from .cone import ConeProblem, ConeSolution, solve_cone
from .dataset import (DEFAULT_INTRINSICS, Frame, FramePair, SequenceManifest,
                      associate, decode_frame, load_sequence, pair_pyramid)
from .errors import (DegenerateFrameError, DegenerateScaleError,
                     EvaluationError, InfeasibleBoundError, InvalidPixelError,
                     SequenceFormatError)
from .evaluation import (DriftReport, Trajectory, accumulate, drift_rmse,
                         emit_report, interpolate_pose, parse_report,
                         read_trajectory, write_trajectory)
from .geometry import (CameraIntrinsics, MotionTwist, PixelCoord,
                       RigidTransform, backproject, exp_twist, log_transform,
                       oplus, project, transform_point, warp)
from .imaging import (DepthImage, IntensityImage, Pyramid, build_pyramid,
                      downsample_depth, downsample_intensity, gradient,
                      sample_bilinear)
from .residuals import (NormalTerms, QuadraticModel, ResidualSystem,
                        evaluate_jacobians, evaluate_residuals, normal_terms,
                        reweight, robust_weights, weighted_values)
from .synthetic import (Scene, generate_sequence, render_synthetic_pair,
                        render_view, scene_preset)
from .weighted import (AlignmentResult, SolverSettings, align_weighted,
                       gauss_newton_step)

__version__ = "0.1.0"
