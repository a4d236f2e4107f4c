"""Coarse-to-fine Gauss-Newton alignment of the weighted joint objective.

Each iteration re-evaluates residuals, recomputes robust weights, solves
the stacked normal equations, and applies the step through the
left-multiplicative increment.  A step-halving safeguard keeps the
scalarized objective non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataset import FramePair, pair_pyramid
from .errors import DegenerateFrameError
from .geometry import MotionTwist, oplus
from .residuals import (NormalTerms, evaluate_jacobians, evaluate_residuals,
                        normal_terms, reweight, weighted_values)

__all__ = [
    "SolverSettings",
    "AlignmentResult",
    "gauss_newton_step",
    "align_weighted",
]

MAX_STEP_HALVINGS = 5

# Levenberg fallback schedule, engaged only when factorization fails.
_DAMPING_START = 1e-6
_DAMPING_LIMIT = 1e2
_DAMPING_GROWTH = 10.0


@dataclass(frozen=True)
class SolverSettings:
    max_iterations: int = 50       # per pyramid level
    step_tolerance: float = 1e-7
    objective_tolerance: float = 1e-9  # relative decrease
    pyramid_levels: int = 3

    def __post_init__(self):
        if self.max_iterations < 1 or self.pyramid_levels < 1:
            raise ValueError("iteration and level counts must be positive")
        if self.step_tolerance <= 0 or self.objective_tolerance <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class AlignmentResult:
    xi: MotionTwist
    final_intensity_value: float
    final_depth_value: float
    weight_used: float
    iterations: tuple
    converged: bool
    valid_pixel_count: int
    depth_bound_used: float | None = None
    bound_relaxations: int = 0


def gauss_newton_step(terms: NormalTerms, weight: float) -> np.ndarray:
    """Solve the stacked normal equations for the twist increment.

    Cholesky first; on factorization failure a diagonal Levenberg term is
    grown until the system factors.  Raises DegenerateFrameError when even
    the largest damping cannot make the system positive definite.
    """
    hess = terms.intensity.hessian + weight * terms.depth.hessian
    grad = terms.intensity.gradient + weight * terms.depth.gradient
    if not (np.all(np.isfinite(hess)) and np.all(np.isfinite(grad))):
        raise DegenerateFrameError("normal terms are not finite")
    try:
        factor = scipy.linalg.cho_factor(hess)
        return scipy.linalg.cho_solve(factor, -grad)
    except np.linalg.LinAlgError:
        pass
    damping = _DAMPING_START
    # Marquardt scaling, floored at identity so an all-zero Hessian
    # (e.g. constant intensity with weight 0) still damps to a solvable
    # system instead of looping on a zero diagonal.
    scale = np.diag(hess).copy()
    floor = max(np.max(scale), 0.0) * 1e-12 if np.any(scale > 0) else 1.0
    diag = np.diag(np.maximum(scale, floor))
    while damping <= _DAMPING_LIMIT:
        try:
            factor = scipy.linalg.cho_factor(hess + damping * diag)
            return scipy.linalg.cho_solve(factor, -grad)
        except np.linalg.LinAlgError:
            damping *= _DAMPING_GROWTH
    raise DegenerateFrameError("normal system is singular even after damping")


def _objective(pair_level: FramePair, xi: MotionTwist, weight: float):
    """(system, F_I + weight * F_D) with fresh robust weights at xi."""
    system = reweight(evaluate_residuals(pair_level, xi))
    f_i, f_d = weighted_values(system)
    return system, f_i + weight * f_d, f_i, f_d


def align_weighted(pair: FramePair, init: MotionTwist, weight: float,
                   settings: SolverSettings = SolverSettings()) -> AlignmentResult:
    """Estimate the frame-to-frame twist by minimizing the joint objective.

    weight = 0 reduces to the intensity-only method through the very same
    code path.
    """
    levels = pair_pyramid(pair, settings.pyramid_levels)
    xi = init
    iteration_counts = []
    converged = False
    final = None

    for level in reversed(levels):
        iterations = 0
        converged = False
        system, f_bar, f_i, f_d = _objective(level, xi, weight)
        while iterations < settings.max_iterations:
            iterations += 1
            terms = normal_terms(evaluate_jacobians(level, system))
            step = gauss_newton_step(terms, weight)
            if np.linalg.norm(step) < settings.step_tolerance:
                converged = True
                break

            accepted = False
            for _ in range(MAX_STEP_HALVINGS + 1):
                candidate = oplus(xi, MotionTwist.from_vector(step))
                try:
                    cand = _objective(level, candidate, weight)
                except DegenerateFrameError:
                    cand = None
                if cand is not None and cand[1] <= f_bar:
                    accepted = True
                    break
                step = step / 2.0
            if not accepted:
                # No decrease even with tiny steps: the level is done.
                break

            xi = candidate
            system, new_f_bar, f_i, f_d = cand
            decrease = f_bar - new_f_bar
            f_bar = new_f_bar
            if decrease <= settings.objective_tolerance * max(f_bar, 1e-30):
                converged = True
                break
        iteration_counts.append(iterations)
        final = (system, f_i, f_d)

    system, f_i, f_d = final
    return AlignmentResult(
        xi=xi,
        final_intensity_value=f_i,
        final_depth_value=f_d,
        weight_used=weight,
        iterations=tuple(iteration_counts),
        converged=converged,
        valid_pixel_count=system.size,
    )
