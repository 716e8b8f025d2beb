"""Single-sphere solver: the dual QP on the capped simplex plus primal recovery.

Given a Gram matrix, a member set S and a penalty C with C * |S| >= 1, the
sphere is found by maximizing

    f(a) = sum_i a_i K[i, i] - a' K a      over  {a : sum a = 1, 0 <= a_i <= C}

by projected-gradient ascent with exact sort-based projection onto the capped
simplex, an anchored damped-Newton polish on the free coordinates, and a
primal-dual gap certificate.  The radius and per-point errors are then
recovered from the induced distances by a one-dimensional piecewise-linear
minimization (`recover_radius`), which is total (it needs no free support
vector) and returns the smallest minimizer on ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InfeasibleSubproblemError, InputError
from .kernels import GramMatrix

MAX_ITERATIONS = 50_000
_POLISH_EVERY = 5


@dataclass(frozen=True)
class SolverTolerances:
    """All numeric tolerances used by the sphere solver, in one place."""

    feasibility: float = 1e-7
    duality_gap: float = 1e-8
    objective: float = 1e-6


DEFAULT_TOLS = SolverTolerances()


@dataclass(frozen=True)
class SvddSolution:
    """One solved sphere.

    ``alpha``, ``errors`` and ``distances_sq`` are indexed like ``members``
    (ascending global point indices).  ``objective`` is the primal value
    radius_sq + C * sum(errors); ``gap`` is the certified distance to the dual
    optimum at termination.
    """

    members: tuple[int, ...]
    alpha: np.ndarray
    radius_sq: float
    errors: np.ndarray
    distances_sq: np.ndarray
    objective: float
    C: float
    support_free: tuple[int, ...]
    support_bound: tuple[int, ...]
    dual_objective: float
    gap: float
    iterations: int


def project_capped_simplex(v, cap: float) -> np.ndarray:
    """Euclidean projection of v onto {a : sum a = 1, 0 <= a_i <= cap}.

    Exact: the shift tau with sum(clip(v - tau, 0, cap)) = 1 is located by
    sorting the breakpoints {v_i} and {v_i - cap} of that piecewise-linear
    budget function and interpolating on the crossing segment.
    """
    v = np.asarray(v, dtype=float)
    m = v.size
    if m == 0:
        raise InputError("cannot project an empty vector")
    if cap * m < 1.0 - 1e-12:
        raise InfeasibleSubproblemError(
            f"capped simplex is empty: cap {cap} * size {m} < 1"
        )
    if cap * m <= 1.0 + 1e-12:
        return np.full(m, cap)

    bps = np.unique(np.concatenate([v, v - cap]))
    # phi is nonincreasing in tau; phi(bps[0]) = m * cap >= 1, phi(bps[-1]) = 0.
    phi = np.clip(v[None, :] - bps[:, None], 0.0, cap).sum(axis=1)
    k = int(np.searchsorted(-phi, -1.0, side="right")) - 1
    if phi[k] <= 1.0 + 1e-15:
        tau = bps[k]
    else:
        # phi is exactly linear between consecutive breakpoints, and
        # phi[k] > 1 > phi[k + 1] here, so the denominator is positive
        tau = bps[k] + (phi[k] - 1.0) * (bps[k + 1] - bps[k]) / (phi[k] - phi[k + 1])
    a = np.clip(v - tau, 0.0, cap)
    interior = (a > 0.0) & (a < cap)
    if interior.any():
        # absorb rounding drift so the weights sum to 1 at machine precision
        a[interior] += (1.0 - a.sum()) / interior.sum()
        np.clip(a, 0.0, cap, out=a)
    return a


def recover_radius(distances_sq, C: float) -> tuple[float, np.ndarray]:
    """Radius and errors minimizing g(R) = R + C * sum(max(0, d2 - R)), R >= 0.

    g is convex piecewise linear with breakpoints at the d2 values; the
    smallest minimizer is returned on ties (so a sphere holding exactly 1/C
    points collapses to R = 0).
    """
    d2 = np.asarray(distances_sq, dtype=float)
    n = d2.size
    if n == 0:
        raise InputError("recover_radius needs at least one distance")
    if np.any(d2 < 0.0):
        raise InputError("squared distances must be nonnegative")
    if C * n < 1.0 - 1e-12:
        raise InputError(f"C * n = {C * n} < 1: penalty slope never turns nonnegative")
    d_sorted = np.sort(d2)
    # slope of g just right of the k-th smallest distance is 1 - C * (n - k)
    slopes = 1.0 - C * (n - np.arange(n + 1))
    k = int(np.argmax(slopes >= -1e-12))
    R = 0.0 if k == 0 else float(d_sorted[k - 1])
    xi = np.maximum(0.0, d2 - R)
    return R, xi


def _newton_polish(K, q, a, cap, rounds=8):
    """Damped Newton rounds on the free set, anchored at the current iterate.

    Each round solves the Levenberg-damped KKT system for an ascent direction
    on the currently free coordinates (sum held fixed via a multiplier),
    line-searches it to the nearest bound, and keeps the move only if the
    dual value improves.  Anchoring at the iterate keeps this safe on the
    near-singular Gram blocks where a cold active-set jump lands nowhere.
    Returns an improved point or None.
    """
    m = a.size
    x = a
    Kx = K @ x
    fx = float(q @ x - x @ Kx)
    lam = 1e-10 * max(1.0, float(np.trace(K)) / m)
    improved_any = False
    for _ in range(rounds):
        g = q - 2.0 * Kx
        up = x >= cap - 1e-9
        low = (x <= 1e-9) & ~up
        free = ~(low | up)
        nf = int(free.sum())
        if nf == 0:
            break
        A = np.zeros((nf + 1, nf + 1))
        A[:nf, :nf] = 2.0 * K[np.ix_(free, free)]
        A[:nf, :nf].flat[:: nf + 1] += lam
        A[:nf, nf] = -1.0
        A[nf, :nf] = 1.0
        rhs = np.empty(nf + 1)
        rhs[:nf] = g[free]
        rhs[nf] = 0.0
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(sol)):
            break
        d = np.zeros(m)
        d[free] = sol[:nf]
        dmax = np.abs(d).max()
        if dmax < 1e-16:
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            t_hi = np.where(d > 0, (cap - x) / d, np.inf)
            t_lo = np.where(d < 0, -x / d, np.inf)
        t = min(1.0, float(np.minimum(t_hi, t_lo).min()))
        improved = False
        for _ in range(30):
            xc = project_capped_simplex(np.clip(x + t * d, 0.0, cap), cap)
            Kxc = K @ xc
            fc = float(q @ xc - xc @ Kxc)
            if fc > fx + 1e-16:
                x, Kx, fx = xc, Kxc, fc
                improved = True
                improved_any = True
                break
            t *= 0.5
        if not improved:
            break
    return x if improved_any else None


def _as_member_tuple(members) -> tuple[int, ...]:
    idx = tuple(sorted(int(i) for i in members))
    if not idx:
        raise InputError("member set is empty")
    if len(set(idx)) != len(idx):
        raise InputError("member set contains duplicates")
    return idx


def solve_svdd(
    gram_matrix: GramMatrix,
    members,
    C: float,
    warm_alpha=None,
    tols: SolverTolerances = DEFAULT_TOLS,
    max_iters: int = MAX_ITERATIONS,
) -> SvddSolution:
    """Solve the single-sphere subproblem on the given member set.

    ``warm_alpha`` (length len(members), aligned with the sorted member order)
    is projected onto the capped simplex to seed the ascent; on any problem
    with it the solver falls back to the uniform weight 1/|S| clipped to C.
    Raises InfeasibleSubproblemError when C * |S| < 1 and ConvergenceError
    (carrying the best iterate and its gap) if the iteration cap is hit.
    """
    idx = _as_member_tuple(members)
    m = len(idx)
    if not C > 0:
        raise InputError("C must be positive")
    if C * m < 1.0 - 1e-12:
        raise InfeasibleSubproblemError(
            f"sphere with {m} members infeasible for C={C}: C*|S| < 1"
        )
    K = gram_matrix.values[np.ix_(idx, idx)]
    q = np.ascontiguousarray(np.diag(K))

    a = None
    if warm_alpha is not None:
        w = np.asarray(warm_alpha, dtype=float)
        if w.shape == (m,) and np.all(np.isfinite(w)):
            a = project_capped_simplex(w, C)
    if a is None:
        a = np.full(m, min(1.0 / m, C))
        a = project_capped_simplex(a, C)

    # Gershgorin bound on the gradient Lipschitz constant 2*lambda_max(K)
    L = 2.0 * max(float(np.abs(K).sum(axis=1).max()), 1e-12)
    step = 1.0 / L
    Ka = K @ a
    best_gap = np.inf
    best = None

    for it in range(max_iters):
        dual = float(q @ a - a @ Ka)
        d2 = q - 2.0 * Ka + float(a @ Ka)
        np.maximum(d2, 0.0, out=d2)
        R, xi = recover_radius(d2, C)
        primal = float(R + C * xi.sum())
        gap = max(primal - dual, 0.0)
        if gap < best_gap:
            best_gap = gap
            best = (a.copy(), d2.copy(), R, xi.copy(), primal, dual)
        if gap <= tols.duality_gap:
            return _assemble(idx, a, d2, R, xi, C, dual, gap, it, tols.feasibility)

        # the gradient phase does the bulk moves; the anchored Newton polish
        # takes over in the endgame, where projected gradient crawls on
        # ill-conditioned faces
        endgame = gap <= 1e-3 * max(1.0, abs(dual))
        if endgame or it % _POLISH_EVERY == 0:
            cand = _newton_polish(K, q, a, C)
            if cand is not None:
                Kc = K @ cand
                if float(q @ cand - cand @ Kc) > dual:
                    a, Ka = cand, Kc
                    continue

        g = q - 2.0 * Ka
        trial = step
        for _ in range(60):
            a_new = project_capped_simplex(a + trial * g, C)
            Ka_new = K @ a_new
            d = a_new - a
            # sufficient increase: by the projection inequality g @ d >=
            # |d|^2 / trial, so this demands genuine ascent whenever d != 0
            # and always holds once trial <= 1/L
            needed = float(g @ d) - 0.5 * float(d @ d) / trial
            if float(q @ a_new - a_new @ Ka_new) >= dual + needed - 1e-15:
                break
            trial *= 0.5
        a, Ka = a_new, Ka_new

    raise ConvergenceError(
        f"no convergence after {max_iters} iterations (gap {best_gap:.3e})",
        alpha=best[0] if best else None,
        gap=best_gap,
        iterations=max_iters,
    )


def _assemble(idx, a, d2, R, xi, C, dual, gap, iters, feas_tol):
    a = np.clip(a, 0.0, C)
    free = tuple(
        g for g, ai in zip(idx, a) if feas_tol < ai < C - feas_tol
    )
    bound = tuple(g for g, ai in zip(idx, a) if ai >= C - feas_tol)
    objective = float(R + C * xi.sum())
    return SvddSolution(
        members=idx,
        alpha=a,
        radius_sq=float(R),
        errors=xi,
        distances_sq=d2,
        objective=objective,
        C=float(C),
        support_free=free,
        support_bound=bound,
        dual_objective=dual,
        gap=float(gap),
        iterations=iters,
    )


def zero_radius_sphere(gram_matrix: GramMatrix, members, C: float) -> SvddSolution:
    """Degenerate sphere at the feature centroid with radius zero.

    This is the optimum of the radius-floored subproblem min R + C*sum(xi),
    R >= 0 when C * |S| < 1 (the penalty slope is then positive everywhere, so
    the radius collapses and the best center is the centroid).  The capped
    simplex bound on alpha does not apply in this regime; alpha is uniform.
    """
    idx = _as_member_tuple(members)
    m = len(idx)
    K = gram_matrix.values[np.ix_(idx, idx)]
    a = np.full(m, 1.0 / m)
    Ka = K @ a
    d2 = np.maximum(np.diag(K) - 2.0 * Ka + float(a @ Ka), 0.0)
    objective = float(C * d2.sum())
    return SvddSolution(
        members=idx,
        alpha=a,
        radius_sq=0.0,
        errors=d2.copy(),
        distances_sq=d2,
        objective=objective,
        C=float(C),
        support_free=(),
        support_bound=(),
        dual_objective=objective,
        gap=0.0,
        iterations=0,
    )


def svdd_objective_monotone_check(
    gram_matrix: GramMatrix, members, extra: int, C: float, tol: float = 1e-7
) -> bool:
    """Whether adding ``extra`` to the member set keeps the objective from dropping.

    Must always hold (the added hinge term is nonnegative); exposed as a test
    hook because it is the validity basis for the branch-and-bound lower bound.
    """
    idx = _as_member_tuple(members)
    if extra in idx:
        raise InputError(f"extra point {extra} already belongs to the member set")
    base = solve_svdd(gram_matrix, idx, C).objective
    grown = solve_svdd(gram_matrix, idx + (int(extra),), C).objective
    return grown >= base - tol
