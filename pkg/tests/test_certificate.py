import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from caprox import (
    CertificateReport,
    DenseOp,
    Instance,
    MissingDeltaError,
    NotStationaryError,
    RegKind,
    Regularizer,
    SolverConfig,
    check_certificate,
    compute_z,
    forbidden_interval,
    gen_rip_dense,
    make_lowrank_instance,
    make_sparse_instance,
    solve,
    stationarity_residual,
    verified_fraction,
)

SQ2 = math.sqrt(2.0)


def one_dim(b, delta=0.5, target=1):
    return Instance(DenseOp(np.array([[1.0 / SQ2]])), np.array([float(b)]),
                    delta=delta, target=target)


class TestComputeZ:
    def test_identity_operator_returns_b(self):
        rng = np.random.default_rng(0)
        b = rng.standard_normal(6)
        inst = Instance(DenseOp(np.eye(6)), b)
        for _ in range(3):
            x = rng.standard_normal(6)
            assert_allclose(compute_z(x, inst), b, atol=1e-14)

    def test_one_dim(self):
        inst = one_dim(1.0)
        assert_allclose(compute_z(np.zeros(1), inst), [1.0 / SQ2], rtol=1e-15)

    def test_noise_free_fixed_point_identity(self):
        # b = A(X0) with square calibrated operator: z at X0 equals X0
        op = gen_rip_dense(25, 25, 0.2, seed=1, shape_in=(5, 5))
        rng = np.random.default_rng(2)
        X0 = rng.standard_normal((5, 2)) @ rng.standard_normal((5, 2)).T
        inst = Instance(op, op.apply(X0), delta=0.2, target=2)
        assert_allclose(compute_z(X0, inst), X0, atol=1e-10)


class TestForbiddenInterval:
    def test_contains_threshold(self):
        for mu in (0.3, 1.0, 5.0):
            for delta in (0.1, 0.5, 0.9):
                lo, hi = forbidden_interval(mu, delta)
                assert lo <= math.sqrt(mu) <= hi

    def test_monotone_nesting(self):
        lo1, hi1 = forbidden_interval(1.0, 0.2)
        lo2, hi2 = forbidden_interval(1.0, 0.4)
        assert lo2 < lo1 and hi2 > hi1

    def test_validation(self):
        with pytest.raises(ValueError):
            forbidden_interval(1.0, 0.0)
        with pytest.raises(ValueError):
            forbidden_interval(0.0, 0.5)


class TestCheckCertificate1d:
    def test_small_b_passes(self):
        rep = check_certificate(np.zeros(1), one_dim(0.5), 1.0)
        assert rep.passed
        assert_allclose(rep.z_values, [0.5 / SQ2], rtol=1e-12)
        assert rep.interval_low == 0.5 and rep.interval_high == 2.0
        assert rep.delta_source == "instance"

    def test_middle_b_fails(self):
        rep = check_certificate(np.zeros(1), one_dim(1.0), 1.0)
        assert not rep.passed
        assert rep.margin < 0

    def test_large_b_free_point_passes(self):
        b = 1.5
        rep = check_certificate(np.array([SQ2 * b]), one_dim(b), 1.0)
        assert rep.passed
        assert_allclose(rep.z_values, [SQ2 * b], rtol=1e-12)

    def test_boundary_value_fails_closed_interval(self):
        # z lands exactly on the lower endpoint: closed interval, so no pass
        b = 0.5 * SQ2  # z = b/sqrt(2) = 0.5
        rep = check_certificate(np.zeros(1), one_dim(b), 1.0)
        assert not rep.passed
        assert rep.margin == 0.0

    def test_margin_policy(self):
        rep = check_certificate(np.zeros(1), one_dim(0.5), 1.0, margin=0.2)
        assert not rep.passed  # distance ~0.146 < required 0.2


class TestStationarityGate:
    def test_non_stationary_refused(self):
        with pytest.raises(NotStationaryError):
            check_certificate(np.array([0.5]), one_dim(1.5), 1.0)

    def test_residual_value(self):
        inst = one_dim(1.5)
        x = np.array([0.5])
        r = stationarity_residual(x, inst, 1.0)
        z = compute_z(x, inst)[0]
        expect = abs((z if abs(z) > 1.0 else 0.0) - 0.5)
        assert_allclose(r, expect, rtol=1e-12)

    def test_zero_not_stationary_for_large_b(self):
        # b > sqrt(2): the origin stops being stationary and is refused
        with pytest.raises(NotStationaryError):
            check_certificate(np.zeros(1), one_dim(2.0), 1.0)


class TestDeltaAndTarget:
    def test_missing_delta(self):
        inst = one_dim(0.5, delta=None)
        with pytest.raises(MissingDeltaError):
            check_certificate(np.zeros(1), inst, 1.0)

    def test_user_delta_recorded(self):
        inst = one_dim(0.5, delta=None)
        rep = check_certificate(np.zeros(1), inst, 1.0, delta=0.5)
        assert rep.delta_source == "user" and rep.passed

    def test_missing_target(self):
        inst = one_dim(0.5, target=None)
        with pytest.raises(ValueError):
            check_certificate(np.zeros(1), inst, 1.0)

    def test_no_silent_delta_substitution(self):
        # passing a different delta changes the interval; the report records it
        rep = check_certificate(np.zeros(1), one_dim(0.5, delta=0.5), 1.0, delta=0.9)
        assert rep.delta == 0.9 and rep.delta_source == "user"
        assert rep.interval_low == pytest.approx(0.1)


class TestEndToEnd:
    def test_sparse_noise_free_verification(self):
        op = gen_rip_dense(60, 60, 0.2, seed=3)
        inst = make_sparse_instance(60, 5, 0.0, op, seed=4, delta=0.2)
        gt = inst.ground_truth
        mn = np.min(np.abs(gt[gt != 0.0]))
        mu = (0.5 * 0.8 * mn) ** 2
        res = solve(inst, Regularizer(RegKind.CAPPED, mu),
                    SolverConfig(tol_obj=1e-15, tol_step=1e-12, accept_rtol=0.0))
        rep = check_certificate(res.solution, inst, mu)
        assert rep.passed
        assert rep.separation == 5
        # card(x_s) = 5 and c = 5: the stronger sparsest-point claim needs card < c/2
        assert not rep.minimal_implication
        rep_wide = check_certificate(res.solution, inst, mu, target=11)
        assert rep_wide.minimal_implication

    def test_lowrank_noise_free_verification(self):
        op = gen_rip_dense(36, 36, 0.2, seed=5, shape_in=(6, 6))
        inst = make_lowrank_instance(6, 6, 2, 0.0, op, seed=6, delta=0.2)
        s = np.linalg.svd(inst.ground_truth, compute_uv=False)
        mu = (0.5 * 0.8 * s[1]) ** 2
        res = solve(inst, Regularizer(RegKind.CAPPED, mu),
                    SolverConfig(tol_obj=1e-15, tol_step=1e-12, accept_rtol=0.0))
        rep = check_certificate(res.solution, inst, mu)
        assert rep.passed


class TestVerifiedFraction:
    def _report(self, passed):
        return CertificateReport(passed=passed, margin=0.0, z_values=[], interval_low=0.0,
                                 interval_high=1.0, mu=1.0, delta=0.2, delta_source="user",
                                 separation=1, solution_card_or_rank=0,
                                 minimal_implication=False, stationarity_residual=0.0,
                                 margin_policy=0.0)

    def test_counts(self):
        assert verified_fraction([self._report(True)] * 3) == 1.0
        assert verified_fraction([self._report(False)] * 2) == 0.0
        mixed = [self._report(True)] * 3 + [self._report(False)]
        assert verified_fraction(mixed) == 0.75

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            verified_fraction([])


def test_report_json_roundtrip(tmp_path):
    rep = check_certificate(np.zeros(1), one_dim(0.5), 1.0)
    path = tmp_path / "report.json"
    rep.to_json(path)
    doc = json.loads(path.read_text())
    assert doc["passed"] is True
    assert doc["mu"] == 1.0 and doc["delta"] == 0.5
    rebuilt = CertificateReport.from_dict(doc)
    assert rebuilt == rep
