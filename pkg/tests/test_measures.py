"""Measure changes: parameter shifts, preservation clauses, drift identity."""

from __future__ import annotations

import numpy as np
import pytest

from defaultable import (MeasureChangeError, RiskPremiumSpec, SpecAffine,
                         apply_measure_change, assemble_premium,
                         risk_premia_at, verify_drift_condition)

from oracles import CAL
from sampling import (PREMIUM_CLAUSES, random_admissible, random_premium,
                      violate_premium)


def _zero_rate(d):
    return SpecAffine.zero(d)


class TestParameterShift:
    def test_shift_formula(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            params = random_admissible(rng)
            p = random_premium(rng, params)
            qp = apply_measure_change(params, p)
            np.testing.assert_allclose(qp.params.A,
                                       params.A + params.Sigma @ p.Theta,
                                       atol=1e-14)
            np.testing.assert_allclose(qp.params.b,
                                       params.b + params.Sigma @ p.thetahat,
                                       atol=1e-14)

    def test_volatility_blocks_untouched(self):
        rng = np.random.default_rng(12)
        params = random_admissible(rng)
        qp = apply_measure_change(params, random_premium(rng, params))
        assert np.array_equal(qp.params.Sigma, params.Sigma)
        assert np.array_equal(qp.params.alpha, params.alpha)
        assert np.array_equal(qp.params.beta, params.beta)
        assert np.array_equal(qp.params.x0, params.x0)

    def test_identity_premium_is_a_fixed_point(self, jtd_affine):
        params, lamP, _ = jtd_affine
        qp = apply_measure_change(params, RiskPremiumSpec.identity(lamP))
        assert np.array_equal(qp.params.A, params.A)
        assert np.array_equal(qp.params.b, params.b)
        assert qp.lambdaQ is lamP

    def test_calibrated_shift_values(self, jtd, premium, jtd_affine):
        # hand arithmetic: A[0,0] + sigmabar*Theta11 and b[0] + sigmabar*theta1hat
        params = jtd_affine[0]
        spec = assemble_premium(jtd, premium)
        qp = apply_measure_change(params, spec)
        assert qp.params.A[0, 0] == pytest.approx(CAL["A_Q_00"], abs=1e-12)
        assert qp.params.b[0] == pytest.approx(CAL["b_Q_0"], abs=1e-12)

    def test_rate_carried_through(self, jtd_affine):
        params, lamP, _ = jtd_affine
        rate = SpecAffine(0.02, np.zeros(3))
        qp = apply_measure_change(params, RiskPremiumSpec.identity(lamP), rate)
        assert qp.rate is rate

    def test_dimension_mismatch(self, jtd_affine):
        params = jtd_affine[0]
        bad = RiskPremiumSpec(np.zeros(2), np.zeros((2, 2)),
                              SpecAffine(0.1, np.array([0.1, 0.0])))
        with pytest.raises(ValueError):
            apply_measure_change(params, bad)


class TestPreservationClauses:
    @pytest.mark.parametrize("clause", PREMIUM_CLAUSES)
    def test_single_violation_names_its_clause(self, clause):
        rng = np.random.default_rng(100 + PREMIUM_CLAUSES.index(clause))
        for _ in range(25):
            params = random_admissible(rng)
            good = random_premium(rng, params)
            bad = violate_premium(rng, params, good, clause)
            with pytest.raises(MeasureChangeError) as info:
                apply_measure_change(params, bad)
            assert info.value.clause == clause

    def test_error_carries_indices_and_message(self, jtd_affine):
        params, lamP, _ = jtd_affine
        # push the variance drift below its floor by a large shift
        bad = RiskPremiumSpec(np.array([-10.0, 0.0, 0.0]), np.zeros((3, 3)), lamP)
        with pytest.raises(MeasureChangeError) as info:
            apply_measure_change(params, bad)
        assert info.value.clause == "drift-floor"
        assert info.value.indices == (0,)
        assert str(info.value).startswith("[drift-floor][0]")

    def test_boundary_shift_accepted(self):
        # a shift landing exactly on the drift floor stays admissible
        rng = np.random.default_rng(77)
        params = random_admissible(rng)
        i = 0
        floor = 0.5 * params.Sigma[i, i] ** 2 * params.beta[i, i] - params.b[i]
        thetahat = np.zeros(params.d)
        thetahat[i] = floor / params.Sigma[i, i]
        spec = RiskPremiumSpec(thetahat, np.zeros((params.d, params.d)),
                               SpecAffine(0.1, np.zeros(params.d)))
        qp = apply_measure_change(params, spec)
        assert qp.params.b[i] == pytest.approx(
            0.5 * params.Sigma[i, i] ** 2 * params.beta[i, i], abs=1e-12)


class TestDriftIdentity:
    def test_calibrated_premium_closes_the_identity(self, jtd, premium, jtd_affine):
        params, lamP, rate = jtd_affine
        spec = assemble_premium(jtd, premium)
        report = verify_drift_condition(params, spec, rate, lamP)
        assert report.ok
        assert report.max_abs < 1e-12

    def test_perturbed_premium_is_detected(self, jtd, premium, jtd_affine):
        params, lamP, rate = jtd_affine
        spec = assemble_premium(jtd, premium)
        th = spec.thetahat.copy()
        th[2] += 1e-3
        bumped = RiskPremiumSpec(th, spec.Theta, spec.lambdaQ)
        report = verify_drift_condition(params, bumped, rate, lamP)
        assert not report.ok
        # the idiosyncratic channel has volatility sqrt(1 - rho^2)
        assert abs(report.constant) == pytest.approx(
            np.sqrt(1.0 - jtd.rho ** 2) * 1e-3, rel=1e-9)
        assert abs(report.constant) > 1e-6

    def test_log_price_channel_flagged_as_unrepairable(self, jtd, premium,
                                                       jtd_affine):
        params, lamP, rate = jtd_affine
        spec = assemble_premium(jtd, premium)
        Theta = spec.Theta.copy()
        Theta[2, 2] += 1e-3
        bumped = RiskPremiumSpec(spec.thetahat, Theta, spec.lambdaQ)
        report = verify_drift_condition(params, bumped, rate, lamP)
        out = report.to_dict()
        assert not out["ok"]
        assert "note" in out
        clean = verify_drift_condition(params, spec, rate, lamP).to_dict()
        assert "note" not in clean

    def test_report_serializes(self, jtd, premium, jtd_affine):
        params, lamP, rate = jtd_affine
        report = verify_drift_condition(params, assemble_premium(jtd, premium),
                                        rate, lamP)
        out = report.to_dict()
        assert set(out) >= {"ok", "tol", "constant", "state"}
        assert isinstance(out["state"], list)


class TestPointwisePremia:
    def test_calibrated_event_premium(self, jtd, premium, jtd_affine, x0):
        params, lamP, _ = jtd_affine
        spec = assemble_premium(jtd, premium)
        theta, gamma = risk_premia_at(params, spec, lamP, x0)
        assert gamma == pytest.approx(CAL["gamma_at_x0"], abs=1e-12)
        # diffusive premia by hand: (thetahat + Theta x) / sqrt(R(x))
        want = (spec.thetahat + spec.Theta @ x0) / np.sqrt(
            params.alpha + x0 @ params.beta)
        np.testing.assert_allclose(theta, want, atol=1e-14)

    def test_event_premium_above_minus_one(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            params = random_admissible(rng)
            spec = random_premium(rng, params)
            lamP = SpecAffine(0.05, np.concatenate([
                0.1 + rng.random(params.m), np.zeros(params.d - params.m)]))
            x = params.x0 + 0.1 * rng.random(params.d)
            _, gamma = risk_premia_at(params, spec, lamP, x)
            assert gamma > -1.0

    def test_boundary_state_rejected(self, jtd, premium, jtd_affine):
        params, lamP, _ = jtd_affine
        spec = assemble_premium(jtd, premium)
        with pytest.raises(ValueError, match="interior"):
            risk_premia_at(params, spec, lamP, np.array([0.0, 0.003, 0.0]))
        with pytest.raises(ValueError, match="interior"):
            risk_premia_at(params, spec, SpecAffine.zero(3),
                           np.array([0.07, 0.003, 0.0]))


class TestSpecValidation:
    def test_premium_shape_checked(self):
        with pytest.raises(ValueError):
            RiskPremiumSpec(np.zeros(3), np.zeros((2, 3)),
                            SpecAffine(0.1, np.zeros(3)))
        with pytest.raises(ValueError, match="dimension"):
            RiskPremiumSpec(np.zeros(3), np.zeros((3, 3)),
                            SpecAffine(0.1, np.zeros(2)))

    def test_premium_arrays_frozen(self, jtd, premium):
        spec = assemble_premium(jtd, premium)
        with pytest.raises(ValueError):
            spec.thetahat[0] = 9.9
