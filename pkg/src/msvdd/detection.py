"""Decision rules, anomaly scores, and AUC-ROC evaluation.

The fitted rule is binary (a point is regular when it falls inside at least
one sphere, boundary included).  For ranking metrics the scalar score is the
signed boundary excess min_j (d_j^2(x) - R_j): zero exactly on a boundary,
negative inside, positive outside, and monotone in the rule.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .errors import InputError, UndefinedMetricError
from .kernels import GramMatrix, KernelKind, KernelSpec, cross_kernel
from .solution import MsvddSolution

BOUNDARY_TOL = 1e-9


class Label(enum.Enum):
    REGULAR = "regular"
    OUTLIER = "outlier"


@dataclass(frozen=True)
class DetectionModel:
    """Spheres in dual form: weight rows over the training points plus radii.

    Everything needed to score new points through kernel evaluations alone;
    ``alpha_quad`` caches alpha' K alpha per sphere.
    """

    kernel_spec: KernelSpec
    train_points: np.ndarray
    alphas: np.ndarray      # (p, n_train)
    radii: np.ndarray       # (p,)
    alpha_quad: np.ndarray  # (p,)

    @classmethod
    def from_solution(
        cls, solution: MsvddSolution, gram_matrix: GramMatrix, train_points
    ) -> "DetectionModel":
        pts = np.atleast_2d(np.asarray(train_points, dtype=float))
        n = pts.shape[0]
        p = len(solution.spheres)
        alphas = np.zeros((p, n))
        quad = np.zeros(p)
        radii = np.zeros(p)
        K = gram_matrix.values
        for j, s in enumerate(solution.spheres):
            idx = list(s.members)
            alphas[j, idx] = s.alpha
            quad[j] = float(s.alpha @ K[np.ix_(idx, idx)] @ s.alpha)
            radii[j] = s.radius_sq
        return cls(gram_matrix.spec, pts, alphas, radii, quad)


def model_distances_sq(model: DetectionModel, X) -> np.ndarray:
    """(m, p) squared feature distances from query points to sphere centers."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.train_points.shape[1]:
        raise InputError(
            f"query dimension {X.shape[1]} does not match training dimension "
            f"{model.train_points.shape[1]}"
        )
    if model.kernel_spec.kind is KernelKind.LINEAR:
        kxx = np.sum(X * X, axis=1)
    else:
        kxx = np.ones(X.shape[0])
    kxt = cross_kernel(model.kernel_spec, X, model.train_points)
    d2 = kxx[:, None] - 2.0 * (kxt @ model.alphas.T) + model.alpha_quad[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def score_points(model: DetectionModel, X) -> np.ndarray:
    """Signed boundary excess min_j (d_j^2 - R_j) for each query point."""
    d2 = model_distances_sq(model, X)
    return np.min(d2 - model.radii[None, :], axis=1)


def anomaly_score(model: DetectionModel, x) -> float:
    return float(score_points(model, np.atleast_2d(np.asarray(x, dtype=float)))[0])


def classify(model: DetectionModel, x) -> Label:
    """Regular iff the point lies inside (or on the boundary of) some sphere."""
    return Label.REGULAR if anomaly_score(model, x) <= BOUNDARY_TOL else Label.OUTLIER


@dataclass(frozen=True)
class RocResult:
    """ROC curve with outliers as the positive class, thresholds descending."""

    auc: float
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_roc(scores, labels) -> RocResult:
    """Rank-based AUC with average-rank tie handling, plus the ROC curve.

    ``labels`` flags outliers truthy; outliers are expected to score higher.
    Perfect separation gives 1, anti-separation 0.  Raises when only one class
    is present.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool).ravel()
    if s.ravel().shape != y.shape:
        raise InputError("scores and labels must have equal length")
    s = s.ravel()
    n_out = int(y.sum())
    n_reg = y.size - n_out
    if n_out == 0 or n_reg == 0:
        raise UndefinedMetricError("AUC needs both regular and outlier labels")

    ranks = _average_ranks(s)
    u = ranks[y].sum() - n_out * (n_out + 1) / 2.0
    auc = u / (n_out * n_reg)

    desc = np.argsort(-s, kind="mergesort")
    ss = s[desc]
    yy = y[desc]
    # one curve point per distinct score (ties grouped into a single step)
    last_of_group = np.flatnonzero(np.r_[ss[1:] != ss[:-1], True])
    tp = np.cumsum(yy)[last_of_group]
    fp = np.cumsum(~yy)[last_of_group]
    thresholds = np.r_[np.inf, ss[last_of_group]]
    tpr = np.r_[0.0, tp / n_out]
    fpr = np.r_[0.0, fp / n_reg]
    return RocResult(auc=float(auc), thresholds=thresholds, fpr=fpr, tpr=tpr)


def roc_csv_rows(roc: RocResult) -> list[dict]:
    return [
        {"threshold": float(t), "fpr": float(f), "tpr": float(r)}
        for t, f, r in zip(roc.thresholds, roc.fpr, roc.tpr)
    ]


def write_roc_csv(roc: RocResult, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["threshold", "fpr", "tpr"])
        writer.writeheader()
        for row in roc_csv_rows(roc):
            writer.writerow(row)


def linear_centers(model: DetectionModel) -> np.ndarray:
    """Explicit sphere centers in input coordinates (linear kernel only)."""
    if model.kernel_spec.kind is not KernelKind.LINEAR:
        raise InputError("explicit centers exist only for the linear kernel")
    return model.alphas @ model.train_points


def geometric_scores(model: DetectionModel, X) -> np.ndarray:
    """Scores recomputed directly in input space: min_j ||x - c_j||^2 - R_j.

    Independent coordinate-space path for the linear kernel; must agree with
    `score_points` to high precision.
    """
    centers = linear_centers(model)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    diffs = X[:, None, :] - centers[None, :, :]
    d2 = np.sum(diffs * diffs, axis=2)
    return np.min(d2 - model.radii[None, :], axis=1)
