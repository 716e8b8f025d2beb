import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msvdd.detection import (
    DetectionModel,
    Label,
    anomaly_score,
    auc_roc,
    classify,
    geometric_scores,
    linear_centers,
    model_distances_sq,
    roc_csv_rows,
    score_points,
)
from msvdd.errors import InputError, UndefinedMetricError
from msvdd.exact import MsvddProblem, solve_exact
from msvdd.kernels import LINEAR, KernelKind, KernelSpec, gram, rbf
from oracles import trapezoid_auc


def manual_model(centers, radii):
    """Model whose 'training points' are exactly the sphere centers."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    p = centers.shape[0]
    alphas = np.eye(p)
    quad = np.sum(centers * centers, axis=1)
    return DetectionModel(
        KernelSpec(KernelKind.LINEAR), centers, alphas, np.asarray(radii, float), quad
    )


class TestScores:
    def test_center_scores_minus_radius(self):
        m = manual_model([[0.0, 0.0]], [2.0])
        assert anomaly_score(m, [0.0, 0.0]) == pytest.approx(-2.0, abs=1e-12)
        assert classify(m, [0.0, 0.0]) is Label.REGULAR

    def test_boundary_counts_as_regular(self):
        m = manual_model([[0.0, 0.0]], [1.0])
        assert anomaly_score(m, [1.0, 0.0]) == pytest.approx(0.0, abs=1e-12)
        assert classify(m, [1.0, 0.0]) is Label.REGULAR

    def test_outside_positive_excess(self):
        m = manual_model([[0.0, 0.0]], [1.0])
        assert anomaly_score(m, [2.0, 0.0]) == pytest.approx(3.0, abs=1e-12)
        assert classify(m, [2.0, 0.0]) is Label.OUTLIER

    def test_min_over_spheres(self):
        m = manual_model([[0.0, 0.0], [10.0, 0.0]], [1.0, 4.0])
        assert anomaly_score(m, [9.0, 0.0]) == pytest.approx(-3.0, abs=1e-12)

    def test_dimension_mismatch(self):
        m = manual_model([[0.0, 0.0]], [1.0])
        with pytest.raises(InputError):
            anomaly_score(m, [1.0, 2.0, 3.0])

    def test_kernel_expansion_equals_geometry_for_linear(self, rng):
        pts = rng.normal(scale=1.5, size=(12, 2))
        g = gram(LINEAR, pts)
        sol = solve_exact(MsvddProblem(gram=g, p=2, C=0.5, seed=0))
        model = DetectionModel.from_solution(sol, g, pts)
        queries = rng.normal(scale=2.5, size=(40, 2))
        via_kernel = score_points(model, queries)
        via_geometry = geometric_scores(model, queries)
        assert np.allclose(via_kernel, via_geometry, atol=1e-9)

    def test_linear_centers_shape(self, rng):
        pts = rng.normal(size=(8, 2))
        g = gram(LINEAR, pts)
        sol = solve_exact(MsvddProblem(gram=g, p=2, C=0.5, seed=0))
        model = DetectionModel.from_solution(sol, g, pts)
        assert linear_centers(model).shape == (2, 2)
        rbf_model = DetectionModel.from_solution(
            sol, gram(rbf(0.5), pts), pts
        )
        with pytest.raises(InputError):
            linear_centers(rbf_model)

    def test_training_members_score_nonpositive_inside(self, rng):
        pts = rng.normal(size=(10, 2))
        g = gram(rbf(0.5), pts)
        sol = solve_exact(MsvddProblem(gram=g, p=2, C=1.0, seed=0))
        model = DetectionModel.from_solution(sol, g, pts)
        scores = score_points(model, pts)
        xi = sol.xi_full()
        # points with zero error sit inside or on their sphere
        assert np.all(scores[xi <= 1e-9] <= 1e-6)


class TestAucRoc:
    def test_perfect_separation(self):
        roc = auc_roc([1, 2, 3, 4], [0, 0, 1, 1])
        assert roc.auc == 1.0

    def test_anti_separation(self):
        roc = auc_roc([1, 2, 3, 4], [1, 1, 0, 0])
        assert roc.auc == 0.0

    def test_ties_average_rank(self):
        roc = auc_roc([1, 1, 2, 2], [0, 1, 0, 1])
        assert roc.auc == 0.5

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedMetricError):
            auc_roc([1, 2], [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            auc_roc([1, 2, 3], [0, 1])

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_curve_monotone_and_trapezoid_identity(self, seed):
        r = np.random.default_rng(seed)
        n = int(r.integers(4, 60))
        scores = r.normal(size=n)
        if r.random() < 0.4:
            scores = np.round(scores, 1)  # force ties
        labels = r.integers(0, 2, size=n)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        roc = auc_roc(scores, labels)
        assert np.all(np.diff(roc.fpr) >= 0)
        assert np.all(np.diff(roc.tpr) >= 0)
        assert roc.fpr[0] == 0.0 and roc.tpr[0] == 0.0
        assert roc.fpr[-1] == 1.0 and roc.tpr[-1] == 1.0
        assert abs(roc.auc - trapezoid_auc(roc.fpr, roc.tpr)) <= 1e-12

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_invariance_under_increasing_transform(self, seed):
        r = np.random.default_rng(seed)
        n = int(r.integers(4, 40))
        scores = r.normal(size=n)
        labels = r.integers(0, 2, size=n)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        base = auc_roc(scores, labels).auc
        warped = auc_roc(np.expm1(2.0 * scores), labels).auc
        assert warped == pytest.approx(base, abs=1e-12)

    def test_csv_rows(self):
        roc = auc_roc([1, 2, 3, 4], [0, 1, 0, 1])
        rows = roc_csv_rows(roc)
        assert rows[0]["threshold"] == float("inf")
        assert {"threshold", "fpr", "tpr"} == set(rows[0])
        assert len(rows) == len(roc.thresholds)

    def test_csv_file_export(self, tmp_path):
        import csv

        from msvdd.detection import write_roc_csv

        roc = auc_roc([1, 2, 3, 4], [0, 1, 0, 1])
        path = tmp_path / "roc.csv"
        write_roc_csv(roc, path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(roc.thresholds)
        assert float(rows[-1]["fpr"]) == 1.0 and float(rows[-1]["tpr"]) == 1.0


class TestScoreRuleConsistency:
    def test_classify_matches_score_sign(self, rng):
        pts = rng.normal(size=(10, 2))
        g = gram(LINEAR, pts)
        sol = solve_exact(MsvddProblem(gram=g, p=2, C=0.5, seed=0))
        model = DetectionModel.from_solution(sol, g, pts)
        for x in rng.normal(scale=2.0, size=(25, 2)):
            s = anomaly_score(model, x)
            expected = Label.REGULAR if s <= 1e-9 else Label.OUTLIER
            assert classify(model, x) is expected
