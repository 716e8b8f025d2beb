"""Shared solution containers for the exact and heuristic multisphere solvers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernels import GramMatrix
from .svdd import SvddSolution, solve_svdd, zero_radius_sphere

UNASSIGNED = -1


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    # best feasible solution without an optimality certificate (time limit hit,
    # or produced by the heuristic, which never certifies optimality)
    TIME_LIMIT_INCUMBENT = "time_limit_incumbent"
    INFEASIBLE = "infeasible"


@dataclass
class Assignment:
    """Point-to-sphere map; entries are sphere ids or UNASSIGNED (-1)."""

    sphere_of: np.ndarray

    def __post_init__(self):
        self.sphere_of = np.asarray(self.sphere_of, dtype=np.int16)

    @classmethod
    def empty(cls, n: int) -> "Assignment":
        return cls(np.full(n, UNASSIGNED, dtype=np.int16))

    @property
    def n(self) -> int:
        return self.sphere_of.size

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.sphere_of == j)

    def counts(self, p: int) -> np.ndarray:
        assigned = self.sphere_of[self.sphere_of >= 0]
        return np.bincount(assigned, minlength=p)[:p]

    def is_complete(self) -> bool:
        return bool(np.all(self.sphere_of >= 0))

    def with_point(self, i: int, j: int) -> "Assignment":
        out = self.sphere_of.copy()
        out[i] = j
        return Assignment(out)

    def copy(self) -> "Assignment":
        return Assignment(self.sphere_of.copy())


@dataclass(frozen=True)
class IncumbentRecord:
    """One improving feasible solution found during a solve."""

    objective: float
    wall_time: float
    sphere_of: np.ndarray


@dataclass
class MsvddSolution:
    """A complete multisphere solution.

    For exact solves ``objective`` is sum(R_j) + C * sum(xi_i) under the
    global C; for heuristic solves each sphere carries its own per-cluster C
    and ``objective`` sums the per-sphere values accordingly.
    ``iterate_objectives`` is only populated by the heuristic (one entry per
    alternation step).
    """

    assignment: Assignment
    spheres: tuple[SvddSolution, ...]
    objective: float
    status: SolveStatus
    p: int
    C: float
    enforce_cardinality: bool
    node_count: int = 0
    incumbent_log: tuple[IncumbentRecord, ...] = ()
    lower_bound: float = math.nan
    iterate_objectives: tuple[float, ...] = ()

    @property
    def radii(self) -> np.ndarray:
        return np.array([s.radius_sq for s in self.spheres])

    def xi_full(self) -> np.ndarray:
        """Per-point errors, each taken from the point's assigned sphere."""
        xi = np.zeros(self.assignment.n)
        for s in self.spheres:
            xi[list(s.members)] = s.errors
        return xi

    @property
    def relative_gap(self) -> float:
        if self.status is SolveStatus.INFEASIBLE:
            return math.nan
        diff = self.objective - self.lower_bound
        if not math.isfinite(diff) or abs(diff) <= 1e-12:
            return 0.0
        return diff / self.objective


def canonical_objective(values) -> float:
    """Sum of per-sphere objectives evaluated in canonical sorted order.

    Sorting before summing makes the total bit-identical under any
    permutation of sphere labels.
    """
    return float(np.sort(np.asarray(values, dtype=float)).sum())


def sphere_distances_sq(gram_matrix: GramMatrix, spheres) -> np.ndarray:
    """(n, p) squared feature distances from every training point to every
    sphere center, computed from Gram entries alone."""
    K = gram_matrix.values
    diag = np.diag(K)
    cols = []
    for s in spheres:
        idx = list(s.members)
        w = K[:, idx] @ s.alpha
        quad = float(s.alpha @ K[np.ix_(idx, idx)] @ s.alpha)
        cols.append(diag - 2.0 * w + quad)
    d2 = np.stack(cols, axis=1)
    np.maximum(d2, 0.0, out=d2)
    return d2


def min_members(C: float, enforce_cardinality: bool) -> int:
    """Minimum member count per sphere: ceil(1/C) under the cardinality rule.

    The small slack absorbs floating error in 1/C so e.g. C = 1/3 yields 3.
    """
    if not enforce_cardinality:
        return 1
    return max(1, int(math.ceil(1.0 / C - 1e-9)))


def solve_sphere(
    gram_matrix: GramMatrix,
    members,
    C: float,
    enforce_cardinality: bool = True,
    warm_alpha=None,
) -> SvddSolution:
    """Single-sphere subproblem with the radius-floored fallback.

    With cardinality enforcement every solved sphere has C * |S| >= 1 and this
    is a plain dual solve.  Without it, spheres smaller than 1/C collapse to
    the zero-radius centroid solution.
    """
    members = tuple(members)
    if not enforce_cardinality and C * len(members) < 1.0 - 1e-12:
        return zero_radius_sphere(gram_matrix, members, C)
    return solve_svdd(gram_matrix, members, C, warm_alpha=warm_alpha)


def evaluate_assignment(
    gram_matrix: GramMatrix,
    assignment: Assignment,
    p: int,
    C: float,
    enforce_cardinality: bool = True,
) -> MsvddSolution | None:
    """Re-solve every sphere of a complete assignment under a single global C.

    Returns None when the assignment is infeasible for the requested model
    (an empty sphere, or a sphere below the ceil(1/C) cardinality floor).
    """
    if not assignment.is_complete():
        raise InputError("evaluate_assignment needs a complete assignment")
    counts = assignment.counts(p)
    floor = min_members(C, enforce_cardinality)
    if np.any(counts < floor):
        return None
    spheres = tuple(
        solve_sphere(gram_matrix, assignment.members(j), C, enforce_cardinality)
        for j in range(p)
    )
    return MsvddSolution(
        assignment=assignment.copy(),
        spheres=spheres,
        objective=canonical_objective([s.objective for s in spheres]),
        status=SolveStatus.TIME_LIMIT_INCUMBENT,
        p=p,
        C=C,
        enforce_cardinality=enforce_cardinality,
    )
