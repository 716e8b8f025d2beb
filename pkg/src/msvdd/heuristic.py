"""Alternating location-allocation baseline.

Starts from a uniform random partition into p clusters, fits one sphere per
cluster with a per-cluster penalty C_k = 1/(nu * N_k), reassigns every point
to the sphere with the smallest boundary excess, and repeats until the
assignment stops changing.  Because C_k tracks the cluster sizes, a raw
alternation step can occasionally tick the objective upward; the loop then
reverts to the previous state and stops, so the reported per-iteration
objective sequence is nonincreasing by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernels import GramMatrix
from .solution import (
    Assignment,
    IncumbentRecord,
    MsvddSolution,
    SolveStatus,
    canonical_objective,
    sphere_distances_sq,
)
from .svdd import solve_svdd


@dataclass(frozen=True)
class HeuristicConfig:
    p: int
    nu: float
    max_iters: int = 100
    restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise InputError("p must be >= 1")
        if not 0.0 < self.nu <= 1.0:
            raise InputError("nu must lie in (0, 1]")
        if self.max_iters < 1:
            raise InputError("max_iters must be >= 1")
        if self.restarts < 1:
            raise InputError("restarts must be >= 1")


def reassign(gram_matrix: GramMatrix, spheres) -> Assignment:
    """Send each point to the sphere with the smallest boundary excess.

    Excess is max(0, d2 - R); ties are broken by the smaller distance, then by
    the lower sphere index.
    """
    d2 = sphere_distances_sq(gram_matrix, spheres)
    radii = np.array([s.radius_sq for s in spheres])
    excess = np.maximum(0.0, d2 - radii[None, :])
    n = d2.shape[0]
    choice = np.empty(n, dtype=np.int16)
    for i in range(n):
        # lexsort is stable: primary key excess, then distance, then index
        choice[i] = np.lexsort((d2[i], excess[i]))[0]
    return Assignment(choice)


def _initial_partition(n, p, rng) -> np.ndarray:
    sphere_of = rng.integers(0, p, size=n).astype(np.int16)
    counts = np.bincount(sphere_of, minlength=p)
    for j in range(p):
        while counts[j] == 0:
            donor = int(np.argmax(counts))
            pool = np.flatnonzero(sphere_of == donor)
            pick = int(pool[rng.integers(0, pool.size)])
            sphere_of[pick] = j
            counts[donor] -= 1
            counts[j] += 1
    return sphere_of


def _repair_empty(sphere_of, d2, radii, p):
    """Reseed empty clusters with the point carrying the largest current excess."""
    counts = np.bincount(sphere_of, minlength=p)
    while np.any(counts == 0):
        j = int(np.argmin(counts))
        excess = np.maximum(0.0, d2[np.arange(sphere_of.size), sphere_of] - radii[sphere_of])
        movable = counts[sphere_of] > 1
        if not movable.any():
            break
        cand = np.flatnonzero(movable)
        own_d2 = d2[np.arange(sphere_of.size), sphere_of]
        order = np.lexsort((cand, -own_d2[cand], -excess[cand]))
        pick = int(cand[order[0]])
        counts[sphere_of[pick]] -= 1
        sphere_of[pick] = j
        counts[j] += 1
    return sphere_of


def _solve_clusters(gram_matrix, sphere_of, p, nu):
    spheres = []
    for j in range(p):
        members = np.flatnonzero(sphere_of == j)
        C_k = 1.0 / (nu * members.size)
        spheres.append(solve_svdd(gram_matrix, members, C_k))
    return spheres


def _single_run(gram_matrix, p, nu, max_iters, rng, t0):
    n = gram_matrix.n
    sphere_of = _initial_partition(n, p, rng)
    history: list[float] = []
    log: list[IncumbentRecord] = []
    state = None
    for _ in range(max_iters):
        spheres = _solve_clusters(gram_matrix, sphere_of, p, nu)
        obj = canonical_objective([s.objective for s in spheres])
        if state is not None and obj > state[2] + 1e-12:
            break  # alternation ticked upward; keep the previous state
        history.append(obj)
        state = (sphere_of.copy(), spheres, obj)
        if not log or obj < log[-1].objective - 1e-12:
            log.append(IncumbentRecord(obj, time.perf_counter() - t0, sphere_of.copy()))
        new_assign = reassign(gram_matrix, spheres).sphere_of
        d2 = sphere_distances_sq(gram_matrix, spheres)
        radii = np.array([s.radius_sq for s in spheres])
        new_assign = _repair_empty(new_assign, d2, radii, p)
        if np.array_equal(new_assign, sphere_of):
            break
        sphere_of = new_assign
    return state, history, log


def solve_heuristic(gram_matrix: GramMatrix, config: HeuristicConfig) -> MsvddSolution:
    """Best solution over seeded restarts of the alternating procedure.

    Every sphere in the result was solved with its own C_k = 1/(nu * N_k);
    the status is never OPTIMAL.
    """
    n = gram_matrix.n
    if n < config.p:
        raise InputError(f"need at least p={config.p} points, got {n}")
    t0 = time.perf_counter()
    best = None
    for r in range(config.restarts):
        rng = np.random.default_rng([config.seed, r])
        state, history, log = _single_run(
            gram_matrix, config.p, config.nu, config.max_iters, rng, t0
        )
        if best is None or state[2] < best[0][2] - 1e-12:
            best = (state, history, log)
    (sphere_of, spheres, obj), history, log = best
    return MsvddSolution(
        assignment=Assignment(sphere_of),
        spheres=tuple(spheres),
        objective=obj,
        status=SolveStatus.TIME_LIMIT_INCUMBENT,
        p=config.p,
        C=float("nan"),
        enforce_cardinality=False,
        incumbent_log=tuple(log),
        iterate_objectives=tuple(history),
    )
