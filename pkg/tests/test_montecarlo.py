"""Path simulation: reproducibility, estimator contracts, exact references."""

from __future__ import annotations

import math

import numpy as np
import pytest

from defaultable import (AffineModelParams, CdsSchedule, PathBatch,
                         PricingContext, QModelParams, SimConfig, SpecAffine,
                         estimate, load_batch, save_batch, simulate,
                         survival_probability)

from oracles import (flat_annuity, flat_bond, flat_protection_leg,
                     flat_survival)

RATE = 0.02
HAZ = 0.3
LOG_DRIFT = 0.05


def _deterministic_params() -> AffineModelParams:
    # zero volatility: the state, intensity and rate paths are exact, so
    # every estimator reduces to a binomial or a known constant
    return AffineModelParams(
        d=2, m=1,
        A=np.array([[-0.5, 0.0], [0.0, 0.0]]),
        b=np.array([0.5, LOG_DRIFT]),
        Sigma=np.zeros((2, 2)),
        alpha=np.array([0.0, 0.1]),
        beta=np.array([[1.0, 0.0], [0.0, 0.0]]),
        x0=np.array([1.0, 0.0]),
    )


def _deterministic_q() -> QModelParams:
    return QModelParams(_deterministic_params(),
                        SpecAffine(0.0, np.array([HAZ, 0.0])),
                        SpecAffine(RATE, np.zeros(2)))


def _p_batch(n=20000, T=1.0, seed=7, **kw):
    return simulate(_deterministic_params(),
                    intensity=SpecAffine(0.0, np.array([HAZ, 0.0])),
                    rate=SpecAffine(RATE, np.zeros(2)),
                    T=T, cfg=SimConfig(n, n_steps_per_year=16, seed=seed), **kw)


class TestConfigValidation:
    def test_bounds(self):
        with pytest.raises(ValueError, match="at least one path"):
            SimConfig(0)
        with pytest.raises(ValueError, match="step per year"):
            SimConfig(10, n_steps_per_year=0)
        with pytest.raises(ValueError, match="unknown scheme"):
            SimConfig(10, scheme="milstein")
        with pytest.raises(ValueError, match="seed"):
            SimConfig(10, seed=-1)

    def test_antithetic_restrictions(self):
        with pytest.raises(ValueError, match="Euler"):
            SimConfig(10, scheme="exact-cir", antithetic=True)
        with pytest.raises(ValueError, match="even"):
            SimConfig(11, antithetic=True)

    def test_model_frame_errors(self, jtd_affine):
        params, lamP, rate = jtd_affine
        cfg = SimConfig(8)
        with pytest.raises(ValueError, match="needs an intensity"):
            simulate(params, T=1.0, cfg=cfg)
        with pytest.raises(ValueError, match="carries its own"):
            simulate(_deterministic_q(), intensity=lamP, T=1.0, cfg=cfg)
        with pytest.raises(TypeError):
            simulate("not a model", T=1.0, cfg=cfg)
        with pytest.raises(ValueError, match="horizon"):
            simulate(params, intensity=lamP, T=0.0, cfg=cfg)
        with pytest.raises(ValueError, match="observation times"):
            simulate(params, intensity=lamP, T=1.0, cfg=cfg, obs_times=[2.0])

    def test_exact_scheme_structure_checks(self, jtd_affine):
        params, lamP, _ = jtd_affine
        cfg = SimConfig(8, scheme="exact-cir")
        coupled = AffineModelParams(
            d=3, m=2, A=np.array(params.A) + np.array([[0.0, 0.1, 0.0]] + [[0.0] * 3] * 2),
            b=params.b, Sigma=params.Sigma, alpha=params.alpha,
            beta=params.beta, x0=params.x0)
        with pytest.raises(ValueError, match="must be diagonal"):
            simulate(coupled, intensity=lamP, T=1.0, cfg=cfg)
        with pytest.raises(ValueError, match="its own noise"):
            simulate(_deterministic_params(),
                     intensity=SpecAffine(0.0, np.array([HAZ, 0.0])),
                     T=1.0, cfg=SimConfig(8, scheme="exact-cir"))


class TestReproducibility:
    def test_same_seed_same_paths(self, jtd_affine):
        params, lamP, _ = jtd_affine
        cfg = SimConfig(512, seed=11, scheme="exact-cir")
        a = simulate(params, intensity=lamP, T=0.5, cfg=cfg)
        b = simulate(params, intensity=lamP, T=0.5, cfg=cfg)
        assert np.array_equal(a.X_T, b.X_T)
        assert np.array_equal(a.threshold, b.threshold)
        assert np.array_equal(a.default_time, b.default_time, equal_nan=True)

    def test_thread_count_invisible(self, jtd_affine):
        # two full substream blocks, reduced serially and with a pool
        params, lamP, _ = jtd_affine
        cfg = SimConfig(2 * 65536, n_steps_per_year=4, seed=3,
                        scheme="exact-cir")
        serial = simulate(params, intensity=lamP, T=0.25, cfg=cfg, threads=1)
        pooled = simulate(params, intensity=lamP, T=0.25, cfg=cfg, threads=4)
        assert np.array_equal(serial.X_T, pooled.X_T)
        assert np.array_equal(serial.cum_lambda_obs, pooled.cum_lambda_obs)
        assert np.array_equal(serial.default_time, pooled.default_time,
                              equal_nan=True)
        assert set(serial.substream.tolist()) == {0, 1}
        got, se = estimate(serial, "survival")
        got2, se2 = estimate(pooled, "survival")
        assert got == got2 and se == se2

    def test_different_seeds_differ(self, jtd_affine):
        params, lamP, _ = jtd_affine
        a = simulate(params, intensity=lamP, T=0.5, cfg=SimConfig(256, seed=1))
        b = simulate(params, intensity=lamP, T=0.5, cfg=SimConfig(256, seed=2))
        assert not np.array_equal(a.X_T, b.X_T)


class TestPathStructure:
    def test_positive_block_stays_nonnegative(self, jtd_affine):
        params, lamP, _ = jtd_affine
        for scheme in ("full-truncation-euler", "exact-cir"):
            batch = simulate(params, intensity=lamP, T=1.0,
                             cfg=SimConfig(1024, seed=5, scheme=scheme))
            assert np.all(batch.X_T[:, :2] >= 0.0)
            if scheme == "exact-cir":
                assert batch.truncation_count == 0

    def test_observation_snapshots(self, jtd_affine):
        params, lamP, _ = jtd_affine
        batch = simulate(params, intensity=lamP, T=1.0,
                         cfg=SimConfig(128, seed=5),
                         obs_times=[0.333, 0.5, 1.0])
        np.testing.assert_allclose(batch.obs_times, [0.333, 0.5, 1.0])
        assert batch.obs_index(0.5) == 1
        with pytest.raises(ValueError, match="not among the recorded"):
            batch.obs_index(0.75)
        # integrated intensity can only grow
        assert np.all(np.diff(batch.cum_lambda_obs, axis=1) >= 0.0)

    def test_default_bookkeeping(self, jtd_affine):
        params, lamP, _ = jtd_affine
        batch = simulate(params, intensity=lamP, T=3.0,
                         cfg=SimConfig(4096, seed=9, scheme="exact-cir"))
        defaulted = ~np.isnan(batch.default_time)
        assert 0 < defaulted.sum() < batch.n_paths
        assert np.all(batch.default_time[defaulted] <= 3.0)
        assert np.all(np.isnan(batch.disc_at_default[~defaulted]))
        assert np.all(batch.disc_at_default[defaulted] <= 1.0)
        # defaulted exactly when the trigger was crossed by the horizon
        k = batch.obs_index(3.0)
        assert np.array_equal(defaulted, ~batch.alive_at(k))


class TestExactReferences:
    def test_survival_binomial(self):
        batch = _p_batch()
        got, se = estimate(batch, "survival")
        want = flat_survival(HAZ, 1.0)
        assert se > 0.0
        assert abs(got - want) < 4.0 * se

    def test_cdf_splits_at_the_deterministic_price(self):
        batch = _p_batch()
        below, _ = estimate(batch, "cdf", level=math.exp(LOG_DRIFT) + 0.01)
        above, _ = estimate(batch, "cdf", level=math.exp(LOG_DRIFT) - 0.01)
        got, _ = estimate(batch, "survival")
        assert below == got  # the whole surviving mass sits at one point
        assert above == 0.0

    def test_bond_and_options(self):
        T = 1.0
        batch = simulate(_deterministic_q(), T=T,
                         cfg=SimConfig(20000, n_steps_per_year=16, seed=13))
        bond, bond_se = estimate(batch, "bond")
        assert abs(bond - flat_bond(HAZ, RATE, T)) < 4.0 * bond_se

        stock_T = math.exp(LOG_DRIFT * T)
        call, call_se = estimate(batch, "call", strike=1.0)
        want_call = math.exp(-RATE * T) * (stock_T - 1.0) * flat_survival(HAZ, T)
        assert abs(call - want_call) < 4.0 * call_se

        K = 1.2
        put, put_se = estimate(batch, "put", strike=K)
        want_put = math.exp(-RATE * T) * (
            (K - stock_T) * flat_survival(HAZ, T)
            + K * (1.0 - flat_survival(HAZ, T)))
        assert abs(put - want_put) < 4.0 * put_se

    def test_cds_spread(self):
        dates = np.linspace(0.0, 1.0, 5)
        batch = simulate(_deterministic_q(), T=1.0,
                         cfg=SimConfig(20000, n_steps_per_year=16, seed=17),
                         obs_times=dates[1:])
        sched = CdsSchedule(dates, 0.6)
        got, se = estimate(batch, "cds", schedule=sched)
        want = 0.6 * flat_protection_leg(HAZ, RATE, 1.0) \
            / flat_annuity(HAZ, RATE, dates)
        assert abs(got - want) < 4.0 * se

    def test_transform_at_zero_is_survival_mass(self):
        batch = _p_batch()
        value, se = estimate(batch, "transform", z=np.zeros(2))
        got, _ = estimate(batch, "survival")
        assert value.real == pytest.approx(got, abs=1e-12)
        assert value.imag == 0.0
        assert se.real > 0.0

    def test_exact_transition_moments(self, jtd, jtd_affine):
        # terminal variance factor against the square-root diffusion mean
        params, lamP, _ = jtd_affine
        T = 2.0
        batch = simulate(params, intensity=lamP, T=T,
                         cfg=SimConfig(65536, seed=23, scheme="exact-cir"))
        v_T = batch.X_T[:, 0]
        want = jtd.vhat + (jtd.v0 - jtd.vhat) * math.exp(-jtd.k * T)
        se = v_T.std(ddof=1) / math.sqrt(v_T.size)
        assert abs(v_T.mean() - want) < 4.0 * se

    def test_schemes_agree_on_survival(self, jtd, premium, jtd_affine):
        params, lamP, _ = jtd_affine
        analytic = survival_probability(
            PricingContext.from_heston(jtd, premium), 1.0)
        for scheme in ("exact-cir", "full-truncation-euler"):
            batch = simulate(params, intensity=lamP, T=1.0,
                             cfg=SimConfig(65536, seed=29, scheme=scheme))
            got, se = estimate(batch, "survival")
            bias = 0.0 if scheme == "exact-cir" else 2e-3  # Euler step bias
            assert abs(got - analytic) < 4.0 * se + bias


class TestEstimatorContracts:
    def test_measure_mismatch(self):
        p = _p_batch(n=64)
        q = simulate(_deterministic_q(), T=1.0, cfg=SimConfig(64))
        with pytest.raises(ValueError, match="physical-measure functional"):
            estimate(q, "survival")
        with pytest.raises(ValueError, match="priced functional"):
            estimate(p, "bond")

    def test_argument_validation(self):
        p = _p_batch(n=64, obs_times=[0.5, 1.0])
        with pytest.raises(ValueError, match="price level"):
            estimate(p, "cdf")
        with pytest.raises(ValueError, match="unknown functional"):
            estimate(p, "straddle")
        with pytest.raises(ValueError, match="initial vector"):
            estimate(p, "transform")
        with pytest.raises(ValueError, match="horizon only"):
            estimate(p, "transform", z=np.zeros(2), at=0.5)
        q = simulate(_deterministic_q(), T=1.0, cfg=SimConfig(64))
        with pytest.raises(ValueError, match="strike"):
            estimate(q, "call")
        with pytest.raises(ValueError, match="simulation start"):
            estimate(q, "cds",
                     schedule=CdsSchedule(np.array([0.5, 1.0]), 0.6))
        with pytest.raises(ValueError, match="past the simulated horizon"):
            estimate(q, "cds",
                     schedule=CdsSchedule(np.array([0.0, 2.0]), 0.6))

    def test_estimate_at_earlier_observation(self):
        p = _p_batch(obs_times=[0.5, 1.0])
        half, _ = estimate(p, "survival", at=0.5)
        full, _ = estimate(p, "survival")
        assert half >= full
        assert half == pytest.approx(flat_survival(HAZ, 0.5), abs=0.01)

    def test_se_shrinks_with_path_count(self, jtd_affine):
        params, lamP, _ = jtd_affine
        small = simulate(params, intensity=lamP, T=1.0,
                         cfg=SimConfig(4096, seed=31, scheme="exact-cir"))
        large = simulate(params, intensity=lamP, T=1.0,
                         cfg=SimConfig(16384, seed=31, scheme="exact-cir"))
        _, se_small = estimate(small, "survival")
        _, se_large = estimate(large, "survival")
        assert 1.8 < se_small / se_large < 2.2


class TestAntithetic:
    def test_pairing_and_estimates(self, jtd, premium, jtd_affine):
        params, lamP, _ = jtd_affine
        cfg = SimConfig(8192, seed=37, antithetic=True)
        batch = simulate(params, intensity=lamP, T=0.5, cfg=cfg)
        analytic = survival_probability(
            PricingContext.from_heston(jtd, premium), 0.5)
        got, se = estimate(batch, "survival")
        assert se > 0.0
        assert abs(got - analytic) < 4.0 * se + 2e-3  # Euler grid bias allowance


class TestRoundTrip:
    def test_save_load(self, jtd_affine, tmp_path):
        params, lamP, _ = jtd_affine
        batch = simulate(params, intensity=lamP, T=1.0,
                         cfg=SimConfig(512, seed=41, scheme="exact-cir"),
                         obs_times=[0.5, 1.0])
        path = tmp_path / "batch.bin"
        save_batch(batch, str(path))
        again = load_batch(str(path))
        assert isinstance(again, PathBatch)
        assert again.measure == batch.measure
        assert again.horizon == batch.horizon
        assert again.config == batch.config
        np.testing.assert_array_equal(again.obs_times, batch.obs_times)
        np.testing.assert_array_equal(again.substream, batch.substream)
        for name in ("X_T", "log_price_obs", "cum_lambda_obs", "cum_rate_obs",
                     "threshold"):
            assert np.array_equal(getattr(again, name), getattr(batch, name))
        for name in ("default_time", "disc_at_default"):
            assert np.array_equal(getattr(again, name), getattr(batch, name),
                                  equal_nan=True)
        # estimates computed from the reloaded batch are bit-identical
        assert estimate(again, "survival") == estimate(batch, "survival")
