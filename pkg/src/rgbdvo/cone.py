"""Self-contained second-order cone solver.

Solves   minimize    c . x
         subject to  G x + s = h,  s in K
where K is a product of second-order cones {(u0, ub) : u0 >= ||ub||},
using a homogeneous primal-dual path-following iteration with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step.  Problems
whose cones are tall least-squares blocks are first compressed by a QR
factorization, which preserves every cone norm up to a constant row.

The homogeneous embedding also certifies primal infeasibility (a dual
ray with G'z = 0, h.z < 0), which is how an unsatisfiable depth bound is
detected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = ["ConeProblem", "ConeSolution", "solve_cone"]

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_MAX_ITER = "max_iter"

_STEP_DAMPING = 0.98
_MIN_DENOMINATOR = 1e-14


@dataclass(frozen=True)
class ConeProblem:
    """Standard-form cone program data.

    cone_dims lists the row count of each second-order cone block of G/h,
    in order; the first row of each block is the cone's scalar component.
    """

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cone_dims: tuple

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64).reshape(-1)
        G = np.asarray(self.G, dtype=np.float64)
        h = np.asarray(self.h, dtype=np.float64).reshape(-1)
        if G.shape != (h.size, c.size):
            raise ValueError("G must be (len(h), len(c))")
        if sum(self.cone_dims) != h.size or any(d < 1 for d in self.cone_dims):
            raise ValueError("cone_dims must partition the rows of G")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "cone_dims", tuple(int(d) for d in self.cone_dims))


@dataclass
class ConeSolution:
    primal: np.ndarray
    dual: np.ndarray
    status: str
    gap: float
    iterations: int


def _blocks(dims):
    start = 0
    for d in dims:
        yield start, start + d
        start += d


class _Breakdown(Exception):
    """Scaling or directions are no longer numerically meaningful."""


def _soc_margin(u):
    """u0 - ||ub||; positive inside the cone."""
    return u[0] - np.linalg.norm(u[1:])


def _soc_residual(u):
    """Hyperbolic norm squared, factored as (u0-||ub||)(u0+||ub||) to stay
    accurate when the point rides the cone boundary."""
    tail = np.linalg.norm(u[1:])
    return (u[0] - tail) * (u[0] + tail)


def _push_interior(u, floor: float = 1e-6):
    """Shift the scalar component until the point is safely interior."""
    margin = _soc_margin(u)
    if margin <= floor:
        u = u.copy()
        u[0] += 1.0 + floor - margin
    return u


def _nt_scaling(s, z):
    """Nesterov-Todd scaling W for one cone: W z = W^{-1} s (W symmetric).

    Also returns the hyperbolic determinant of the scaled point
    lambda = W z, which equals sqrt(res_s * res_z) exactly; computing it
    from lambda itself would cancel catastrophically near the boundary.
    """
    res_s = _soc_residual(s)
    res_z = _soc_residual(z)
    if res_s <= 0 or res_z <= 0:
        raise _Breakdown
    norm_s, norm_z = np.sqrt(res_s), np.sqrt(res_z)
    sn = s / norm_s
    zn = z / norm_z
    gamma = np.sqrt((1.0 + sn @ zn) / 2.0)
    w = (sn + np.concatenate(([zn[0]], -zn[1:]))) / (2.0 * gamma)
    # W = eta*V with V the square root of the hyperbolic Householder map
    # 2ww' - J; then W^2 z = s exactly, and V^-1 = JVJ flips the
    # off-diagonal blocks.
    dim = s.size
    v = np.empty((dim, dim))
    v[0, 0] = w[0]
    v[0, 1:] = w[1:]
    v[1:, 0] = w[1:]
    v[1:, 1:] = np.eye(dim - 1) + np.outer(w[1:], w[1:]) / (1.0 + w[0])
    eta = np.sqrt(norm_s / norm_z)
    wmat = eta * v
    winv = v.copy()
    winv[0, 1:] = -w[1:]
    winv[1:, 0] = -w[1:]
    winv /= eta
    det_lam = norm_s * norm_z
    return wmat, winv, det_lam


def _jordan_product(u, v):
    out = np.empty_like(u)
    out[0] = u @ v
    out[1:] = u[0] * v[1:] + v[0] * u[1:]
    return out


def _jordan_solve(lam, r, det):
    """Solve lam o y = r for y, with lam's hyperbolic determinant given."""
    if det <= 0 or lam[0] <= 0:
        raise _Breakdown
    y0 = (lam[0] * r[0] - lam[1:] @ r[1:]) / det
    yb = (r[1:] - y0 * lam[1:]) / lam[0]
    return np.concatenate(([y0], yb))


def _cone_identity(dims):
    e = np.zeros(sum(dims))
    for a, _ in _blocks(dims):
        e[a] = 1.0
    return e


def _max_step(u, du, dims):
    """Largest alpha in [0, 1] keeping u + alpha du inside every cone."""
    alpha = 1.0
    for a, b in _blocks(dims):
        u0, ub = u[a], u[a + 1:b]
        d0, db = du[a], du[a + 1:b]
        # Smallest positive root of (u0 + t d0)^2 - ||ub + t db||^2 = 0;
        # the margin is positive at t = 0, so the first root is the exit.
        qa = d0 * d0 - db @ db
        qb = 2.0 * (u0 * d0 - ub @ db)
        qc = _soc_residual(u[a:b])
        best = np.inf
        if abs(qa) < 1e-300:
            if qb < 0:
                best = -qc / qb
        else:
            disc = qb * qb - 4.0 * qa * qc
            if disc >= 0:
                sq = np.sqrt(disc)
                roots = [t for t in ((-qb - sq) / (2 * qa),
                                     (-qb + sq) / (2 * qa)) if t > 0]
                if roots:
                    best = min(roots)
        # The scalar component must also stay positive.
        if d0 < 0:
            best = min(best, -u0 / d0)
        alpha = min(alpha, best)
    return max(0.0, min(1.0, alpha))


def _reduce_problem(problem: ConeProblem):
    """Compress tall cones via QR.  Each cone block below its first row is
    a least-squares term ||A x + w||; projecting onto the column span of A
    (plus one constant row holding the residual norm) preserves it."""
    n_var = problem.c.size
    new_rows_g = []
    new_rows_h = []
    new_dims = []
    back_maps = []  # (orig_slice, Q, offset_unit, new_slice_start)
    row_cursor = 0
    for a, b in _blocks(problem.cone_dims):
        dim = b - a
        if dim <= n_var + 2:
            new_rows_g.append(problem.G[a:b])
            new_rows_h.append(problem.h[a:b])
            new_dims.append(dim)
            back_maps.append((a, b, None, None, row_cursor))
            row_cursor += dim
            continue
        tail_g = problem.G[a + 1:b]
        tail_h = problem.h[a + 1:b]
        q, r = np.linalg.qr(-tail_g)            # tail residual = tail_h + A x
        proj = q.T @ tail_h
        perp = tail_h - q @ proj
        offset = float(np.linalg.norm(perp))
        g_block = np.vstack([problem.G[a:a + 1], -r, np.zeros((1, n_var))])
        h_block = np.concatenate([problem.h[a:a + 1], proj, [offset]])
        new_rows_g.append(g_block)
        new_rows_h.append(h_block)
        new_dims.append(g_block.shape[0])
        unit = perp / offset if offset > 0 else None
        back_maps.append((a, b, q, unit, row_cursor))
        row_cursor += g_block.shape[0]
    reduced = ConeProblem(problem.c, np.vstack(new_rows_g),
                          np.concatenate(new_rows_h), tuple(new_dims))
    return reduced, back_maps


def _expand_dual(problem: ConeProblem, reduced_dual, back_maps):
    """Map a reduced-problem dual vector back to original cone rows."""
    dual = np.zeros(problem.h.size)
    for (a, b, q, unit, start) in back_maps:
        if q is None:
            dual[a:b] = reduced_dual[start:start + (b - a)]
            continue
        width = q.shape[1]
        dual[a] = reduced_dual[start]
        tail = q @ reduced_dual[start + 1:start + 1 + width]
        if unit is not None:
            tail = tail + unit * reduced_dual[start + 1 + width]
        dual[a + 1:b] = tail
    return dual


def _initial_point(c, G, h, dims):
    """Least-squares start shifted into the cone interior."""
    x0, *_ = np.linalg.lstsq(G, h, rcond=None)
    s0 = h - G @ x0
    z0, *_ = np.linalg.lstsq(G.T, -c, rcond=None)
    s = np.empty_like(s0)
    z = np.empty_like(z0)
    for a, b in _blocks(dims):
        s[a:b] = _push_interior(s0[a:b])
        z[a:b] = _push_interior(z0[a:b])
    return x0, s, z


def _polish(c, G, h, dims, x0, z0):
    """Newton refinement of a near-optimal point on the active-cone
    stationarity system.

    An interior-point iterate close to the solution identifies which cones
    are tight.  Holding that active set fixed, exact stationarity
    (c + G' z = 0 with z on each active cone's boundary normal) plus exact
    boundary membership is a square system in (x, multipliers); Newton on
    it converges quadratically from the warm start, so a 1e-5-accurate
    iterate comes back 1e-12-accurate.  Returns (x, s, z) or None when the
    active set is ambiguous or the refinement misbehaves.
    """
    s0 = h - G @ x0
    zmax = max(float(z0[a]) for a, _ in _blocks(dims))
    if not np.isfinite(zmax) or zmax <= 0:
        return None
    actives = []
    for a, b in _blocks(dims):
        margin = _soc_margin(s0[a:b])
        scale_i = 1.0 + abs(float(s0[a]))
        if z0[a] >= 1e-6 * zmax and margin <= 1e-3 * scale_i:
            if b - a < 2 or np.linalg.norm(s0[a + 1:b]) <= 0:
                return None           # no boundary normal at the vertex
            actives.append((a, b))
        elif margin < -1e-9 * scale_i:
            return None               # "inactive" yet outside: ambiguous
    if not actives:
        return None

    n = c.size
    k = len(actives)
    nu = np.array([max(float(z0[a]), 0.0) for a, _ in actives])
    x = x0.copy()
    c_scale = max(1.0, float(np.linalg.norm(c)))
    best = None
    for _ in range(4):
        u = h - G @ x
        stat = c.copy()
        bound = np.empty(k)
        hess = np.zeros((n, n))
        cols = np.empty((n, k))
        degenerate = False
        for j, (a, b) in enumerate(actives):
            tail = u[a + 1:b]
            norm = float(np.linalg.norm(tail))
            if norm <= 0:
                degenerate = True
                break
            unit = tail / norm
            a1 = G[a + 1:b]
            col = G[a] - a1.T @ unit
            stat += nu[j] * col
            bound[j] = u[a] - norm
            cols[:, j] = col
            hess += nu[j] * (a1.T @ ((a1 - np.outer(unit, unit @ a1)) / norm))
        if degenerate:
            break
        err = max(float(np.linalg.norm(stat)),
                  float(np.abs(bound).max()) if k else 0.0)
        if best is None or err < best[0]:
            best = (err, x.copy(), nu.copy())
        if err <= 1e-15 * c_scale:
            break
        jac = np.zeros((n + k, n + k))
        jac[:n, :n] = hess
        jac[:n, n:] = cols
        jac[n:, :n] = -cols.T
        try:
            delta = np.linalg.solve(jac, -np.concatenate([stat, bound]))
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(delta)):
            break
        x = x + delta[:n]
        nu = nu + delta[n:]
    if best is None:
        return None
    _, x, nu = best
    if np.any(nu < -1e-9 * max(1.0, float(np.abs(nu).max()))):
        return None
    s = h - G @ x
    z = np.zeros_like(h)
    for j, (a, b) in enumerate(actives):
        tail = s[a + 1:b]
        norm = float(np.linalg.norm(tail))
        if norm <= 0:
            return None
        weight = max(float(nu[j]), 0.0)
        z[a] = weight
        z[a + 1:b] = -(weight / norm) * tail
    for a, b in _blocks(dims):
        if _soc_margin(s[a:b]) < -1e-9 * (1.0 + abs(float(s[a]))):
            return None
    return x, s, z


def _newton_direction(q_mat, r_mat, stacked, gq, gr, G, h, c, dims, scalings,
                      lam, dets, tau, kappa, bp, bd, bg, bs, bk,
                      refine: int = 3):
    """Direction (dx, ds, dz, dtau, dkappa) solving the linearized
    homogeneous system

        G dx + ds - h dtau      = bp
        G' dz + c dtau          = bd
        c.dx + h.dz + dkappa    = bg
        lam o (Winv ds + W dz)  = bs
        kappa dtau + tau dkappa = bk

    through the thin QR of the scaled constraint matrix Winv G = Q R.
    Solving with Q and triangular R instead of the normal matrix
    G' Winv^2 G squares-roots its condition number; on top of that, ds,
    dz and dkappa are back-filled from the three feasibility equations
    (dz via the iteration-independent QR of G itself), so every rounding
    error lands in the complementarity rows, where the centering term
    absorbs it.  Feasibility residuals then contract by exactly
    (1 - alpha) per step instead of being re-polluted near convergence.
    A few rounds of whole-system iterative refinement mop up the rest.
    """

    def w_apply(vec):
        out = np.empty_like(vec)
        for (a, b), (wmat, _, _) in zip(_blocks(dims), scalings):
            out[a:b] = wmat @ vec[a:b]
        return out

    def winv_apply(vec):
        out = np.empty_like(vec)
        for (a, b), (_, winv, _) in zip(_blocks(dims), scalings):
            out[a:b] = winv @ vec[a:b]
        return out

    def rsolve(w):
        return scipy.linalg.solve_triangular(r_mat, w, lower=False)

    def rtsolve(w):
        return scipy.linalg.solve_triangular(r_mat, w, trans='T', lower=False)

    u = winv_apply(h)
    y_c = rtsolve(c)
    x2 = rsolve(q_mat.T @ u - y_c)
    z2 = winv_apply(stacked @ x2 - u)
    # The dtau denominator c.x2 + h.z2 - kappa/tau equals
    #   -||(I - Q Q') Winv h||^2 - ||R^-T c||^2 - kappa/tau,
    # a sum of nonpositive terms; evaluating it in that form keeps its sign
    # when the naive subtraction would cancel and blow up the direction.
    proj = u - q_mat @ (q_mat.T @ u)
    denom = -float(proj @ proj) - float(y_c @ y_c) - kappa / tau
    if denom > -_MIN_DENOMINATOR:
        denom = -_MIN_DENOMINATOR

    def solve_once(bp_, bd_, bg_, bs_, bk_):
        psi = np.empty_like(bs_)
        for (a, b), det in zip(_blocks(dims), dets):
            psi[a:b] = _jordan_solve(lam[a:b], bs_[a:b], det)
        wpsi = w_apply(psi)
        v = winv_apply(wpsi - bp_)
        x1 = rsolve(rtsolve(bd_) - q_mat.T @ v)
        z1 = winv_apply(stacked @ x1 + v)
        d_tau = float(bg_ - c @ x1 - h @ z1 - bk_ / tau) / denom
        dx = x1 + d_tau * x2
        dz = z1 + d_tau * z2
        ds = bp_ - G @ dx + h * d_tau
        if gq is not None:
            err_d = bd_ - G.T @ dz - c * d_tau
            dz = dz + gq @ scipy.linalg.solve_triangular(
                gr, err_d, trans='T', lower=False)
        d_kappa = float(bg_ - c @ dx - h @ dz)
        return dx, ds, dz, d_tau, d_kappa

    direction = solve_once(bp, bd, bg, bs, bk)
    scale = max(1.0, np.linalg.norm(bp), np.linalg.norm(bd),
                np.linalg.norm(bs), abs(bg), abs(bk))
    err_prev = np.inf
    for _ in range(refine):
        dx, ds, dz, d_tau, d_kappa = direction
        e_p = bp - (G @ dx + ds - h * d_tau)
        e_d = bd - (G.T @ dz + c * d_tau)
        e_g = bg - float(c @ dx + h @ dz + d_kappa)
        wds = winv_apply(ds)
        wdz = w_apply(dz)
        e_s = bs.copy()
        for a, b in _blocks(dims):
            e_s[a:b] -= _jordan_product(lam[a:b], wds[a:b] + wdz[a:b])
        e_k = bk - (kappa * d_tau + tau * d_kappa)
        err = max(np.linalg.norm(e_p), np.linalg.norm(e_d),
                  np.linalg.norm(e_s), abs(e_g), abs(e_k))
        if not np.isfinite(err) or err >= err_prev or err <= 1e-14 * scale:
            break
        err_prev = err
        cx, cs, cz, ctau, ckappa = solve_once(e_p, e_d, e_g, e_s, e_k)
        direction = (dx + cx, ds + cs, dz + cz, d_tau + ctau,
                     d_kappa + ckappa)
    return direction


def solve_cone(problem: ConeProblem, max_iterations: int = 100,
               gap_tolerance: float = 1e-9, feas_tolerance: float = 1e-9,
               reduce: bool = True) -> ConeSolution:
    """Solve a second-order cone program to high accuracy.

    Fully deterministic: no randomized choices anywhere.  Status is
    "optimal", "infeasible" (certified by a dual ray), or "max_iter".
    """
    if reduce:
        reduced, back_maps = _reduce_problem(problem)
    else:
        reduced, back_maps = problem, None

    c, G, h, dims = reduced.c, reduced.G, reduced.h, reduced.cone_dims
    n_cones = len(dims)
    e = _cone_identity(dims)

    # Iteration-independent thin QR of G, used to keep dual feasibility
    # exact when the scaled solves degrade near convergence.  Skipped for
    # rank-deficient G (the correction would amplify noise instead).
    gq, gr = np.linalg.qr(G)
    diag_g = np.abs(np.diag(gr)) if G.shape[0] >= G.shape[1] else np.zeros(1)
    if diag_g.size == 0 or diag_g.min() <= 1e-12 * max(diag_g.max(), 1.0):
        gq, gr = None, None

    x, s, z = _initial_point(c, G, h, dims)
    tau, kappa = 1.0, 1.0

    best = None
    stalls = 0
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        rd = G.T @ z + c * tau
        rp = G @ x + s - h * tau
        rg = kappa + c @ x + h @ z

        # Checks use the de-homogenized candidate.
        xc, sc, zc = x / tau, s / tau, z / tau
        pres = np.linalg.norm(G @ xc + sc - h) / max(1.0, np.linalg.norm(h))
        dres = np.linalg.norm(G.T @ zc + c) / max(1.0, np.linalg.norm(c))
        gap = float(sc @ zc)
        relgap = gap / max(1.0, abs(float(c @ xc)))
        merit = max(pres / feas_tolerance, dres / feas_tolerance,
                    min(gap, relgap) / gap_tolerance)
        if best is None or merit < best[0]:
            best = (merit, xc, zc, gap, relgap, pres, dres)
        if merit <= 1.0:
            break

        # Dual ray => no primal point satisfies the constraints.
        hz = float(h @ z)
        if hz < -1e-12:
            ray = z / (-hz)
            if np.linalg.norm(G.T @ ray) <= feas_tolerance * 10:
                in_cone = all(_soc_margin(ray[a:b]) >= -1e-12
                              for a, b in _blocks(dims))
                if in_cone:
                    dual = ray if back_maps is None else _expand_dual(
                        problem, ray, back_maps)
                    return ConeSolution(np.full(c.size, np.nan), dual,
                                        STATUS_INFEASIBLE, gap, iteration)

        mu = (float(s @ z) + tau * kappa) / (n_cones + 1)
        if mu <= 0 or not np.isfinite(mu):
            break

        try:
            x, s, z, tau, kappa, alpha = _iterate(
                x, s, z, tau, kappa, c, G, h, dims, e, n_cones,
                rd, rp, rg, mu, gq, gr)
        except (_Breakdown, ValueError, np.linalg.LinAlgError):
            break
        if not np.isfinite(tau) or tau <= 0:
            break
        # Two consecutive vanishing steps mean the iteration has frozen
        # against a cone boundary; the polish below finishes the job.
        stalls = stalls + 1 if alpha < 1e-8 else 0
        if stalls >= 2:
            break

    if best is None:
        return ConeSolution(np.zeros(problem.c.size),
                            np.zeros(problem.h.size),
                            STATUS_MAX_ITER, np.inf, iteration)
    return _finish(problem, back_maps, c, G, h, dims, best, iteration,
                   feas_tolerance, gap_tolerance)


def _finish(problem, back_maps, c, G, h, dims, best, iterations,
            feas_tolerance, gap_tolerance):
    """Polish the best iterate and judge it against the tolerances."""
    merit, xc, zc, gap, relgap, pres, dres = best
    polished = _polish(c, G, h, dims, xc, zc)
    if polished is not None:
        px, ps, pz = polished
        ppres = np.linalg.norm(G @ px + ps - h) / max(1.0, np.linalg.norm(h))
        pdres = np.linalg.norm(G.T @ pz + c) / max(1.0, np.linalg.norm(c))
        pgap = abs(float(ps @ pz))
        prelgap = pgap / max(1.0, abs(float(c @ px)))
        pmerit = max(ppres / feas_tolerance, pdres / feas_tolerance,
                     min(pgap, prelgap) / gap_tolerance)
        if pmerit < merit:
            merit, xc, zc, gap = pmerit, px, pz, pgap
    status = STATUS_OPTIMAL if merit <= 1.0 else STATUS_MAX_ITER
    dual = zc if back_maps is None else _expand_dual(problem, zc, back_maps)
    return ConeSolution(xc, dual, status, gap, iterations)


def _iterate(x, s, z, tau, kappa, c, G, h, dims, e, n_cones, rd, rp, rg, mu,
             gq, gr):
    """One Mehrotra predictor-corrector step of the homogeneous model."""
    scalings = [_nt_scaling(s[a:b], z[a:b]) for a, b in _blocks(dims)]
    winvs = [winv for _, winv, _ in scalings]
    dets = [det for _, _, det in scalings]
    lam = np.empty_like(s)
    for (a, b), (wmat, _, _) in zip(_blocks(dims), scalings):
        lam[a:b] = wmat @ z[a:b]

    # Thin QR of the scaled constraint matrix, shared by predictor and
    # corrector.  A rank-deficient stack (degenerate image content) gets a
    # tiny appended ridge so R stays invertible.
    stacked = np.vstack([winv @ G[a:b] for (a, b), winv
                         in zip(_blocks(dims), winvs)])
    n_var = stacked.shape[1]
    q_mat, r_mat = np.linalg.qr(stacked)
    diag = np.abs(np.diag(r_mat)) if r_mat.shape[0] >= n_var else np.zeros(1)
    scale = float(diag.max()) if diag.size else 0.0
    if stacked.shape[0] < n_var or scale == 0.0 or diag.min() <= 1e-12 * scale:
        ridge = 1e-10 * max(scale, 1.0)
        q_mat, r_mat = np.linalg.qr(
            np.vstack([stacked, ridge * np.eye(n_var)]))
        q_mat = q_mat[:stacked.shape[0]]
        if np.abs(np.diag(r_mat)).min() <= 0.0:
            raise _Breakdown

    lam_lam = np.empty_like(lam)
    for a, b in _blocks(dims):
        lam_lam[a:b] = _jordan_product(lam[a:b], lam[a:b])

    # Predictor (affine) direction.
    dx_a, ds_a, dz_a, dtau_a, dkappa_a = _newton_direction(
        q_mat, r_mat, stacked, gq, gr, G, h, c, dims, scalings, lam, dets,
        tau, kappa, -rp, -rd, -rg, -lam_lam, -tau * kappa)

    alpha = min(_max_step(s, ds_a, dims), _max_step(z, dz_a, dims))
    if dtau_a < 0:
        alpha = min(alpha, -tau / dtau_a)
    if dkappa_a < 0:
        alpha = min(alpha, -kappa / dkappa_a)
    alpha = min(alpha, 1.0)

    mu_aff = (float((s + alpha * ds_a) @ (z + alpha * dz_a))
              + (tau + alpha * dtau_a) * (kappa + alpha * dkappa_a)) / (n_cones + 1)
    sigma = min(1.0, max(0.0, (mu_aff / mu))) ** 3

    # Corrector with the Mehrotra cross term in scaled space.
    ds_scaled = np.empty_like(lam)
    dz_scaled = np.empty_like(lam)
    for (a, b), (wmat, winv, _) in zip(_blocks(dims), scalings):
        ds_scaled[a:b] = winv @ ds_a[a:b]
        dz_scaled[a:b] = wmat @ dz_a[a:b]
    d_s = sigma * mu * e - lam_lam
    for a, b in _blocks(dims):
        d_s[a:b] -= _jordan_product(ds_scaled[a:b], dz_scaled[a:b])
    d_kt = sigma * mu - tau * kappa - dtau_a * dkappa_a

    dx, ds, dz, dtau, dkappa = _newton_direction(
        q_mat, r_mat, stacked, gq, gr, G, h, c, dims, scalings, lam, dets,
        tau, kappa, -rp, -rd, -rg, d_s, d_kt)

    alpha = min(_max_step(s, ds, dims), _max_step(z, dz, dims))
    if dtau < 0:
        alpha = min(alpha, -tau / dtau)
    if dkappa < 0:
        alpha = min(alpha, -kappa / dkappa)
    alpha = min(_STEP_DAMPING * alpha, 1.0)

    return (x + alpha * dx, s + alpha * ds, z + alpha * dz,
            tau + alpha * dtau, kappa + alpha * dkappa, alpha)
