import csv
import json
from dataclasses import asdict

import numpy as np
import pytest

from caprox import GridResult, GridSpec, RegKind, SolverConfig, emit_results, run_nrsfm_study, run_phase_grid


def tiny_spec(**kw):
    base = dict(problem="sparse", sigma_axis=(0.0, 0.1), mu_axis=(0.0, 0.2),
                trials_per_cell=2, base_seed=3, n=24, cardinality=3, delta=0.2)
    base.update(kw)
    return GridSpec(**base)


class TestGridSpecValidation:
    def test_axes_must_increase(self):
        with pytest.raises(ValueError):
            tiny_spec(sigma_axis=(0.1, 0.1))
        with pytest.raises(ValueError):
            tiny_spec(mu_axis=(0.5, 0.2))

    def test_axes_nonempty(self):
        with pytest.raises(ValueError):
            tiny_spec(sigma_axis=())

    def test_trials_positive(self):
        with pytest.raises(ValueError):
            tiny_spec(trials_per_cell=0)

    def test_default_regularizers(self):
        assert tiny_spec().regularizers == (RegKind.CAPPED, RegKind.L1)
        lr = tiny_spec(problem="lowrank", rows=6, cols=6, rank=2)
        assert lr.regularizers == (RegKind.CAPPED, RegKind.NUCLEAR)


class TestRunPhaseGrid:
    def test_shapes_and_counts(self):
        grid = run_phase_grid(tiny_spec())
        assert len(grid.cells) == 4  # 2 sigma x 2 mu
        for cell in grid.cells:
            assert len(cell.trials) == 2 * 2  # trials x regularizers
            for agg in cell.aggregates.values():
                assert 0.0 <= agg.target_fraction <= 1.0

    def test_bit_reproducible(self):
        a = run_phase_grid(tiny_spec())
        b = run_phase_grid(tiny_spec())
        assert [asdict(r) for r in a.records()] == [asdict(r) for r in b.records()]

    def test_thread_count_does_not_change_results(self, monkeypatch):
        a = run_phase_grid(tiny_spec())
        monkeypatch.setenv("CAPROX_THREADS", "3")
        b = run_phase_grid(tiny_spec())
        assert [asdict(r) for r in a.records()] == [asdict(r) for r in b.records()]

    def test_mu_zero_row_reduces_to_least_squares(self):
        grid = run_phase_grid(tiny_spec())
        for cell in grid.cells:
            if cell.mu != 0.0:
                continue
            by_reg = {}
            for rec in cell.trials:
                by_reg.setdefault(rec.regularizer, []).append(rec.distance)
            a, b = by_reg["capped"], by_reg["l1"]
            assert all(abs(x - y) <= 1e-8 for x, y in zip(a, b))

    def test_convex_baseline_threshold_pairing(self):
        grid = run_phase_grid(tiny_spec())
        for rec in grid.records():
            if rec.regularizer == "l1" and rec.mu > 0:
                assert rec.threshold == pytest.approx(np.sqrt(rec.mu), abs=0)

    def test_certificate_only_for_known_delta(self):
        grid = run_phase_grid(tiny_spec())
        for rec in grid.records():
            if rec.regularizer == "capped" and rec.mu > 0:
                assert rec.verified is not None
            else:
                assert rec.verified is None

    def test_gaussian_operator_has_no_certificates(self):
        grid = run_phase_grid(tiny_spec(operator="gaussian", gaussian_rows=18,
                                        sigma_axis=(0.05,), mu_axis=(0.2,)))
        for rec in grid.records():
            assert rec.verified is None

    def test_lowrank_grid_runs(self):
        spec = tiny_spec(problem="lowrank", rows=6, cols=6, rank=2,
                         sigma_axis=(0.0,), mu_axis=(0.5,), trials_per_cell=2)
        grid = run_phase_grid(spec)
        recs = grid.records()
        assert {r.regularizer for r in recs} == {"capped", "nuclear"}
        assert all(np.isfinite(r.distance) for r in recs)

    def test_noise_free_column_fully_verified(self):
        # sqrt(mu) sits below every ground-truth magnitude these seeds draw,
        # so z equals the ground truth and every certificate passes; the
        # solver must clear the stationarity gate, hence the tight config
        spec = tiny_spec(sigma_axis=(0.0,), mu_axis=(0.0016,), trials_per_cell=4,
                         n=30, cardinality=3, base_seed=12,
                         solver=SolverConfig(tol_obj=1e-15, tol_step=1e-12, accept_rtol=0.0))
        grid = run_phase_grid(spec)
        agg = grid.cells[0].aggregates["capped"]
        assert agg.verified_fraction == 1.0
        assert agg.mean_distance <= 1e-6


class TestEmitResults:
    def test_empty_grid_gives_header_only_csv(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_results(GridResult(spec={}, cells=[]), path, "csv")
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("sigma_index,")

    def test_row_counts(self, tmp_path):
        grid = run_phase_grid(tiny_spec(trials_per_cell=1))
        path = tmp_path / "grid.csv"
        emit_results(grid, path, "csv")
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        # 4 cells x 1 trial x 2 regularizers
        assert len(rows) == 8

    def test_json_roundtrip_preserves_numbers(self, tmp_path):
        grid = run_phase_grid(tiny_spec(trials_per_cell=1))
        path = tmp_path / "grid.json"
        emit_results(grid, path, "json")
        doc = json.loads(path.read_text())
        assert doc["schema"] == "caprox-grid-v1"
        assert doc["spec"]["base_seed"] == 3
        recs = grid.records()
        assert len(doc["records"]) == len(recs)
        for got, want in zip(doc["records"], (asdict(r) for r in recs)):
            assert got == want  # json floats round-trip exactly

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_results(GridResult(spec={}, cells=[]), tmp_path / "x", "xml")

    def test_io_error_has_path_context(self):
        with pytest.raises(OSError, match="no/such/dir"):
            emit_results(GridResult(spec={}, cells=[]), "no/such/dir/out.csv", "csv")


MU_SWEEP = (1e-8, 0.25, 1.0, 4.0, 9.0, 16.0, 30.0)


@pytest.fixture(scope="module")
def noisy():
    return run_nrsfm_study(12, 8, 2, 0.05, MU_SWEEP, False, seed=0)


class TestNrsfmStudy:
    MU = MU_SWEEP

    def test_capped_reaches_target_rank_noise_free(self):
        tight = SolverConfig(tol_obj=1e-15, tol_step=1e-11, max_iters=20000, accept_rtol=0.0)
        curves = run_nrsfm_study(12, 8, 2, 0.0, (0.25, 1.0, 4.0, 9.0), False, seed=1,
                                 solver_config=tight)
        hits = [r for r in curves["capped"] if r.rank == 2]
        assert hits and min(r.data_fit for r in hits) <= 1e-6

    def test_small_mu_approaches_least_squares(self, noisy):
        recs = {r.mu: r for r in noisy["capped"]}
        assert recs[1e-8].rank > 2
        assert recs[1e-8].data_fit <= min(r.data_fit for r in noisy["capped"]) + 1e-9

    def test_fit_nonincreasing_in_rank(self, noisy):
        best = {}
        for r in noisy["capped"]:
            best[r.rank] = min(best.get(r.rank, np.inf), r.data_fit)
        ranks = sorted(best)
        for lo, hi in zip(ranks, ranks[1:]):
            assert best[hi] <= best[lo] * (1 + 1e-6) + 1e-9

    def test_derivative_variant_runs_and_emits(self, tmp_path):
        curves = run_nrsfm_study(8, 6, 2, 0.05, (1.0, 4.0), True, seed=2)
        assert all(r.with_derivative for recs in curves.values() for r in recs)
        path = tmp_path / "nrsfm.csv"
        emit_results(curves, path, "csv")
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4  # 2 regularizers x 2 mu

    def test_nuclear_curve_present(self, noisy):
        assert len(noisy["nuclear"]) == len(self.MU)
