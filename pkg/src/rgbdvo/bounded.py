"""Bounded-objective alignment.

Instead of scalarizing the two error channels, each Gauss-Newton
iteration minimizes the linearized intensity objective subject to an
explicit budget on the linearized depth objective,

    minimize    || Wi^(1/2) (Ji d + ri) ||^2
    subject to  || Wd^(1/2) (Jd d + rd) ||^2 <= eps,

posed as a small second-order cone program and solved by the embedded
interior-point method.  A dual bisection on the same constrained
quadratic problem is provided as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .complexity import TuningConfig, select_epsilon
from .cone import (STATUS_INFEASIBLE, STATUS_OPTIMAL, ConeProblem,
                   ConeSolution, solve_cone)
from .dataset import FramePair, pair_pyramid
from .errors import DegenerateFrameError, InfeasibleBoundError
from .geometry import MotionTwist, oplus
from .residuals import (NormalTerms, QuadraticModel, ResidualSystem,
                        evaluate_jacobians, evaluate_residuals, normal_terms,
                        reweight, weighted_values)
from .weighted import MAX_STEP_HALVINGS, AlignmentResult, SolverSettings

__all__ = [
    "QcqpInstance",
    "build_qcqp",
    "qcqp_to_socp",
    "solve_qcqp_dual",
    "bounded_step",
    "align_bounded",
]

# Slack applied to the bound when the current point must be admitted.
_RELAX_FACTOR = 1.0 + 1e-3


@dataclass(frozen=True)
class QcqpInstance:
    """Quadratic objective, quadratic constraint, scalar budget."""

    objective: QuadraticModel
    constraint: QuadraticModel
    bound: float

    def __post_init__(self):
        if not (np.isfinite(self.bound) and self.bound > 0):
            raise ValueError("bound must be positive and finite")


def build_qcqp(terms: NormalTerms, bound: float) -> QcqpInstance:
    return QcqpInstance(objective=terms.intensity, constraint=terms.depth,
                        bound=bound)


def qcqp_to_socp(system: ResidualSystem, bound: float) -> ConeProblem:
    """Cone form of the constrained step problem.

    Variables are (t, d) with t an epigraph scalar for the intensity
    residual norm.  Two cones: (t, Wi^(1/2)(Ji d + ri)) and
    (sqrt(eps), Wd^(1/2)(Jd d + rd)).  Row n+1 of h carries sqrt(eps).
    """
    if system.intensity_jacobian is None or system.depth_jacobian is None:
        raise ValueError("system is missing jacobians")
    if bound <= 0:
        raise ValueError("bound must be positive")
    sqrt_wi = np.sqrt(system.intensity_weights)
    sqrt_wd = np.sqrt(system.depth_weights)
    ji = sqrt_wi[:, None] * system.intensity_jacobian
    jd = sqrt_wd[:, None] * system.depth_jacobian
    ri = sqrt_wi * system.intensity_residuals
    rd = sqrt_wd * system.depth_residuals
    n = ri.size

    c = np.zeros(7)
    c[0] = 1.0
    G = np.zeros((2 * n + 2, 7))
    h = np.zeros(2 * n + 2)
    G[0, 0] = -1.0
    G[1:n + 1, 1:] = -ji
    h[1:n + 1] = ri
    h[n + 1] = np.sqrt(bound)
    G[n + 2:, 1:] = -jd
    h[n + 2:] = rd
    return ConeProblem(c, G, h, (n + 1, n + 1))


def bounded_step(system: ResidualSystem, bound: float,
                 reduce: bool = True) -> ConeSolution:
    return solve_cone(qcqp_to_socp(system, bound), reduce=reduce)


def solve_qcqp_dual(instance: QcqpInstance, tolerance: float = 1e-12,
                    max_bisections: int = 300):
    """Solve the constrained quadratic step by dual bisection.

    The stationary step d(mu) = -(H0 + mu H1)^{-1} (g0 + mu g1) makes the
    constraint value monotone nonincreasing in mu, so a sign change
    brackets the active multiplier.  Returns (step, multiplier).  Raises
    InfeasibleBoundError when even the constraint's own minimizer
    violates the budget.
    """
    obj, con = instance.objective, instance.constraint

    def step_at(mu: float) -> np.ndarray:
        hess = obj.hessian + mu * con.hessian
        grad = obj.gradient + mu * con.gradient
        try:
            return scipy.linalg.cho_solve(scipy.linalg.cho_factor(hess), -grad)
        except (np.linalg.LinAlgError, ValueError):
            sol, *_ = np.linalg.lstsq(hess, -grad, rcond=None)
            return sol

    def slack(mu: float) -> float:
        return con.evaluate(step_at(mu)) - instance.bound

    least, *_ = np.linalg.lstsq(con.hessian, -con.gradient, rcond=None)
    attainable = con.evaluate(least)
    if attainable > instance.bound * (1.0 + 1e-9) + 1e-15:
        raise InfeasibleBoundError(
            "constraint minimum %.6g exceeds bound %.6g"
            % (attainable, instance.bound))

    if slack(0.0) <= 0.0:
        return step_at(0.0), 0.0

    lo, hi = 0.0, 1.0
    for _ in range(200):
        if slack(hi) <= 0.0:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise InfeasibleBoundError("no multiplier satisfies the bound")

    for _ in range(max_bisections):
        mid = 0.5 * (lo + hi)
        if slack(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tolerance * max(1.0, hi):
            break
    return step_at(hi), hi


def _intensity_objective(pair_level: FramePair, xi: MotionTwist):
    system = reweight(evaluate_residuals(pair_level, xi))
    f_i, f_d = weighted_values(system)
    return system, f_i, f_d


def align_bounded(pair: FramePair, init: MotionTwist,
                  tuning: TuningConfig = TuningConfig(),
                  settings: SolverSettings = SolverSettings()) -> AlignmentResult:
    """Estimate the frame-to-frame twist under an explicit depth budget.

    The budget is chosen at the finest level from the depth complexity
    statistic and rescaled on coarser levels by the ratio of valid source
    depth pixels.  When a linearized subproblem is certified infeasible
    the budget is relaxed, for that iteration only, to just above the
    current depth value so the zero step becomes admissible; every such
    relaxation is counted on the result.
    """
    levels = pair_pyramid(pair, settings.pyramid_levels)
    finest_bound = select_epsilon(levels[0], tuning)
    finest_count = max(int(levels[0].first.depth.valid.sum()), 1)

    xi = init
    iteration_counts = []
    relaxations = 0
    converged = False
    final = None

    for level in reversed(levels):
        count = max(int(level.first.depth.valid.sum()), 1)
        bound = finest_bound * (count / finest_count)
        iterations = 0
        converged = False
        system, f_i, f_d = _intensity_objective(level, xi)
        while iterations < settings.max_iterations:
            iterations += 1
            system = evaluate_jacobians(level, system)

            solution = solve_cone(qcqp_to_socp(system, bound))
            if solution.status == STATUS_INFEASIBLE:
                relaxations += 1
                relaxed = max(f_d, bound) * _RELAX_FACTOR
                solution = solve_cone(qcqp_to_socp(system, relaxed))
                if solution.status == STATUS_INFEASIBLE:
                    raise InfeasibleBoundError(
                        "relaxed depth bound still certified infeasible")
            if solution.status != STATUS_OPTIMAL or not np.all(
                    np.isfinite(solution.primal)):
                raise DegenerateFrameError(
                    "cone subproblem did not reach optimality")

            step = solution.primal[1:]
            if np.linalg.norm(step) < settings.step_tolerance:
                converged = True
                break

            accepted = False
            for _ in range(MAX_STEP_HALVINGS + 1):
                candidate = oplus(xi, MotionTwist.from_vector(step))
                try:
                    cand = _intensity_objective(level, candidate)
                except DegenerateFrameError:
                    cand = None
                if cand is not None and cand[1] <= f_i:
                    accepted = True
                    break
                step = step / 2.0
            if not accepted:
                break

            xi = candidate
            system, new_f_i, f_d = cand
            decrease = f_i - new_f_i
            f_i = new_f_i
            if decrease <= settings.objective_tolerance * max(f_i, 1e-30):
                converged = True
                break
        iteration_counts.append(iterations)
        final = (system, f_i, f_d)

    system, f_i, f_d = final
    return AlignmentResult(
        xi=xi,
        final_intensity_value=f_i,
        final_depth_value=f_d,
        weight_used=float("nan"),
        iterations=tuple(iteration_counts),
        converged=converged,
        valid_pixel_count=system.size,
        depth_bound_used=finest_bound,
        bound_relaxations=relaxations,
    )
