"""Kernel functions and Gram-matrix construction.

All solver geometry is expressed through pairwise kernel values, so the plain
Euclidean setting is just the linear kernel applied to raw coordinates.  The
RBF convention is fixed as K(x, y) = exp(-||x - y||^2 / sigma_squared), with
sigma_squared appearing directly in the denominator (no extra factor of 2).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InputError

# Distances computed through kernel expansions can land a hair below zero from
# floating-point cancellation; anything within this band is clamped to 0.
DISTANCE_CLAMP = 1e-9

ALPHA_SUM_TOL = 1e-8


class KernelKind(enum.Enum):
    LINEAR = "linear"
    RBF = "rbf"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice; ``sigma_squared`` is required (and must be > 0) for RBF."""

    kind: KernelKind
    sigma_squared: float | None = None

    def __post_init__(self):
        kind = self.kind
        if isinstance(kind, str):
            kind = KernelKind(kind.lower())
            object.__setattr__(self, "kind", kind)
        if kind is KernelKind.RBF:
            if self.sigma_squared is None or not self.sigma_squared > 0:
                raise InputError("RBF kernel requires sigma_squared > 0")


LINEAR = KernelSpec(KernelKind.LINEAR)


def rbf(sigma_squared: float) -> KernelSpec:
    return KernelSpec(KernelKind.RBF, float(sigma_squared))


@dataclass(frozen=True)
class GramMatrix:
    """Cached pairwise kernel values; immutable and safe to share across workers."""

    values: np.ndarray
    spec: KernelSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError("Gram matrix must be square")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Kernel value for a single pair of points."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise InputError(f"point dimensions differ: {x.shape[0]} vs {y.shape[0]}")
    if spec.kind is KernelKind.LINEAR:
        return float(x @ y)
    return float(np.exp(-np.sum((x - y) ** 2) / spec.sigma_squared))


def cross_kernel(spec: KernelSpec, X, Y) -> np.ndarray:
    """Kernel values between two point sets, as an (len(X), len(Y)) block."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"point dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
    if spec.kind is KernelKind.LINEAR:
        return X @ Y.T
    sq = (
        np.sum(X * X, axis=1)[:, None]
        - 2.0 * (X @ Y.T)
        + np.sum(Y * Y, axis=1)[None, :]
    )
    return np.exp(-np.maximum(sq, 0.0) / spec.sigma_squared)


def gram(spec: KernelSpec, points) -> GramMatrix:
    """Build the full Gram matrix once per dataset/kernel pair.

    Symmetry is enforced by construction and the RBF diagonal is pinned to
    exactly 1.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise InputError("cannot build a Gram matrix from an empty point set")
    values = cross_kernel(spec, pts, pts)
    values = 0.5 * (values + values.T)
    if spec.kind is KernelKind.RBF:
        np.fill_diagonal(values, 1.0)
    return GramMatrix(values, spec)


def feature_distance_sq(gram_matrix: GramMatrix, i: int, alpha) -> float:
    """Squared feature-space distance from point i to the weighted center.

    The center is the alpha-weighted combination of all mapped points, so the
    value is computed purely from Gram entries:

        K[i, i] - 2 * K[i] @ alpha + alpha @ K @ alpha

    ``alpha`` must sum to 1.  Small negative results from cancellation are
    clamped to zero.
    """
    K = gram_matrix.values
    a = np.asarray(alpha, dtype=float)
    if a.shape != (K.shape[0],):
        raise InputError(f"alpha length {a.size} does not match {K.shape[0]} points")
    if abs(a.sum() - 1.0) > ALPHA_SUM_TOL:
        raise InputError("alpha weights must sum to 1")
    Ka = K @ a
    v = float(K[i, i] - 2.0 * Ka[i] + a @ Ka)
    if -DISTANCE_CLAMP <= v < 0.0:
        return 0.0
    return v
