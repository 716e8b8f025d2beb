import csv
import json
import os

import numpy as np
import pytest

from msvdd.errors import InputError
from msvdd.experiments import (
    MODEL_EXACT,
    MODEL_HEURISTIC,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    emit_plot_data,
    load_dataset,
    run_cross_validation,
    run_gap_study,
)
from msvdd.kernels import KernelKind, KernelSpec


def small_config(out_dir, **overrides):
    base = dict(
        mode="both",
        p_grid=(2,),
        C_grid=(0.5, 1.0),
        nu_grid=(0.2, 0.4),
        kernels=(KernelSpec(KernelKind.LINEAR),),
        data={
            "type": "synthetic",
            "n_train": 14,
            "n_val": 12,
            "n_test": 20,
            "noise_levels": [0.1],
        },
        seeds=(0, 1),
        out_dir=str(out_dir),
        heuristic_restarts=2,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_round_trip(self, tmp_path):
        config = small_config(tmp_path, kernels=(KernelSpec(KernelKind.RBF, 0.25),))
        again = config_from_dict(config_to_dict(config))
        assert again == config

    def test_validation(self, tmp_path):
        with pytest.raises(InputError):
            small_config(tmp_path, mode="fancy")
        with pytest.raises(InputError):
            small_config(tmp_path, C_grid=(0.0,))
        with pytest.raises(InputError):
            small_config(tmp_path, nu_grid=(1.5,))
        with pytest.raises(InputError):
            small_config(tmp_path, p_grid=())


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cv")
    config = small_config(out)
    rows = run_cross_validation(config)
    return config, rows


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    out = tmp_path_factory.mktemp("gap")
    config = small_config(out, mode="exact", C_grid=(0.5,), seeds=(0,), p_grid=(2,))
    rows = run_gap_study(config)
    return config, rows


class TestRunCrossValidation:
    def test_report_rows_cover_models(self, run):
        config, rows = run
        models = {r["model"] for r in rows}
        assert models == {MODEL_EXACT, MODEL_HEURISTIC}
        for row in rows:
            assert row["n_seeds"] == len(config.seeds)
            assert 0.0 <= row["mean_test_auc"] <= 1.0

    def test_artifacts_written(self, run):
        config, _ = run
        for name in (
            "report.csv",
            "report.txt",
            "cells.csv",
            "timings.csv",
            "resolved_config.json",
        ):
            assert os.path.exists(os.path.join(config.out_dir, name))

    def test_every_report_cell_references_runs(self, run):
        config, rows = run
        cells = {c["run_id"]: c for c in read_csv(os.path.join(config.out_dir, "cells.csv"))}
        for row in rows:
            for run_id in row["run_ids"].split(";"):
                assert run_id in cells
                assert cells[run_id]["error"] == ""

    def test_cell_count_matches_grid(self, run):
        config, _ = run
        cells = read_csv(os.path.join(config.out_dir, "cells.csv"))
        expected = (
            len(config.seeds)
            * len(config.p_grid)
            * (len(config.C_grid) + len(config.nu_grid))
        )
        assert len(cells) == expected

    def test_heuristic_rows_carry_implied_C(self, run):
        _, rows = run
        heur = [r for r in rows if r["model"] == MODEL_HEURISTIC]
        assert heur and all(r["implied_C"] != "" for r in heur)
        for r in heur:
            assert r["implied_C"] == pytest.approx(
                r["p"] / (r["param_value"] * 14), abs=1e-12
            )

    def test_infeasible_cells_recorded_not_fatal(self, tmp_path):
        # C = 0.05 needs 20 points per sphere but the train split has 14
        config = small_config(
            tmp_path / "infeas", mode="exact", C_grid=(0.05, 1.0), seeds=(0,)
        )
        run_cross_validation(config)
        cells = read_csv(os.path.join(config.out_dir, "cells.csv"))
        bad = [c for c in cells if c["param_value"] == "0.05"]
        good = [c for c in cells if c["param_value"] == "1.0"]
        assert bad and all(c["error"] != "" for c in bad)
        assert good and all(c["error"] == "" for c in good)


class TestDeterminism:
    def test_deterministic_artifacts_byte_identical(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            run_cross_validation(small_config(out, seeds=(3,)))
        for name in ("report.csv", "cells.csv", "report.txt"):
            with open(out_a / name, "rb") as fa, open(out_b / name, "rb") as fb:
                assert fa.read() == fb.read(), name

    def test_worker_pool_matches_serial(self, tmp_path):
        serial = tmp_path / "serial"
        pooled = tmp_path / "pooled"
        run_cross_validation(small_config(serial, seeds=(0, 1), workers=1))
        run_cross_validation(small_config(pooled, seeds=(0, 1), workers=2))
        for name in ("report.csv", "cells.csv"):
            with open(serial / name, "rb") as fa, open(pooled / name, "rb") as fb:
                assert fa.read() == fb.read(), name


class TestRunGapStudy:
    def test_requires_exact_mode(self, tmp_path):
        with pytest.raises(InputError):
            run_gap_study(small_config(tmp_path, mode="both"))

    def test_rows_strictly_decreasing_and_final_zero(self, study):
        config, rows = study
        assert rows
        objs = [r["objective"] for r in rows]
        assert all(b < a for a, b in zip(objs, objs[1:]))
        assert rows[-1]["gap"] == pytest.approx(0.0, abs=1e-12)

    def test_gap_formula_recomputes(self, study):
        config, rows = study
        z_opt = rows[-1]["objective"]
        for r in rows:
            assert r["gap"] == pytest.approx(
                (r["objective"] - z_opt) / r["objective"], abs=1e-12
            )
            assert r["reference"] == "optimal"

    def test_file_preserves_row_order_verbatim(self, study):
        config, rows = study
        on_disk = read_csv(os.path.join(config.out_dir, "incumbents.csv"))
        assert [r["run_id"] for r in on_disk] == [r["run_id"] for r in rows]
        assert [float(r["test_auc"]) for r in on_disk] == [
            pytest.approx(r["test_auc"]) for r in rows
        ]


class TestEmitPlotData:
    def test_bundle_from_cv_results(self, tmp_path):
        config = small_config(tmp_path / "cv", seeds=(0,))
        run_cross_validation(config)
        written = emit_plot_data(config.out_dir)
        names = {os.path.basename(p) for p in written}
        assert {"profile.csv", "auc_curve.csv"} <= names

        profile = read_csv(os.path.join(config.out_dir, "profile.csv"))
        fractions = [float(r["fraction_solved"]) for r in profile]
        assert all(0.0 < f <= 1.0 for f in fractions)
        assert fractions == sorted(fractions)
        assert fractions[-1] == 1.0

        curve = read_csv(os.path.join(config.out_dir, "auc_curve.csv"))
        combos = {(r["model"], r["p"], r["param_value"]) for r in curve}
        assert len(curve) == len(combos)
        exact_rows = [r for r in curve if r["model"] == MODEL_EXACT]
        assert len(exact_rows) == len(config.p_grid) * len(config.C_grid)

    def test_scatter_and_spheres_from_solve_artifacts(self, tmp_path, rng):
        from msvdd.data import SyntheticSpec, generate_synthetic, write_dataset_csv
        from msvdd.exact import MsvddProblem, solve_exact
        from msvdd.experiments import solution_to_dict
        from msvdd.kernels import LINEAR, gram

        out = tmp_path / "solve"
        os.makedirs(out)
        ds = generate_synthetic(SyntheticSpec(16, 10, 10, noise_level=0.1, seed=0))
        write_dataset_csv(ds, out / "dataset.csv")
        train = ds.subset("train")
        g = gram(LINEAR, train.points)
        sol = solve_exact(MsvddProblem(gram=g, p=2, C=0.5, seed=0))
        with open(out / "solution.json", "w") as fh:
            json.dump(solution_to_dict(sol, train.points), fh)
        written = emit_plot_data(str(out))
        names = {os.path.basename(p) for p in written}
        assert {"scatter.csv", "spheres.csv"} <= names
        spheres = read_csv(out / "spheres.csv")
        assert len(spheres) == 2
        assert "center_x1" in spheres[0] and "radius_sq" in spheres[0]
        assert all("alpha_ref" in s for s in spheres)

    def test_gap_bundle(self, tmp_path):
        config = small_config(
            tmp_path / "gap", mode="exact", C_grid=(0.5,), seeds=(0,)
        )
        run_gap_study(config)
        written = emit_plot_data(config.out_dir)
        names = {os.path.basename(p) for p in written}
        assert "gap_vs_auc.csv" in names
        rows = read_csv(os.path.join(config.out_dir, "gap_vs_auc.csv"))
        assert rows and {"run_id", "gap", "test_auc", "objective"} == set(rows[0])


class TestLoadDataset:
    def test_libsvm_protocol(self, tmp_path):
        path = tmp_path / "toy.libsvm"
        rng = np.random.default_rng(0)
        lines = []
        for _ in range(80):
            lines.append(f"1 1:{rng.normal():.4f} 2:{rng.normal():.4f}")
        for _ in range(30):
            lines.append(f"9 1:{rng.normal() + 4:.4f} 2:{rng.normal() + 4:.4f}")
        path.write_text("\n".join(lines) + "\n")
        config = ExperimentConfig(
            mode="heuristic",
            data={
                "type": "libsvm",
                "path": str(path),
                "anomaly_classes": [9],
                "anomaly_fractions": [0.1],
            },
            out_dir=str(tmp_path),
        )
        ds = load_dataset(config, 0.1, seed=0)
        train = ds.subset("train")
        assert train.n == 24 + round(0.1 * 24)
        # scaled into the unit box on the train split
        assert train.points.min() >= -1.0 - 1e-9
        assert train.points.max() <= 1.0 + 1e-9
