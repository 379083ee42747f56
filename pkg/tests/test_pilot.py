import math

import numpy as np
import pytest

import negsamp as ns
from negsamp import ConfigError, ContractError, DegenerateInputError
from negsamp.model import LogOddsModel, Theta
from negsamp.pilot import (
    ADD_UNIFORM,
    BETA_NOISE,
    INTERCEPT_SHIFT,
    Perturb,
    PilotConfig,
    build_bundles,
    build_pilot,
    compute_omega,
    draw_pilot,
    fit_pilot,
    perturb_pilot,
)
from negsamp.sampling import OPT_L, OPT_P, UNIFORM, SamplingPlan, sampling_probability

LIN = LogOddsModel.linear()


def _imbalanced(n=20_000, d=2, alpha=-4.5, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    theta = Theta(alpha, np.full(d, 0.5))
    p = ns.probability(LIN, theta, x)
    y = (rng.random(n) < p).astype(np.int8)
    return ns.Dataset(x=x, y=y), theta


class TestDrawPilot:
    def test_expected_per_class_counts(self):
        data, _ = _imbalanced(seed=1)
        cfg = PilotConfig(per_class_size=100)
        pilot = draw_pilot(data, cfg, seed=3)
        # each class is a binomial with mean per_class_size (or the whole
        # class when it is smaller); allow 5 standard deviations
        for cls, n_cls in ((1, data.n1), (0, data.n0)):
            got = int((pilot.y == cls).sum())
            expect = min(100, n_cls)
            sd = math.sqrt(100 * max(0.0, 1 - 100 / n_cls)) if n_cls > 100 else 0.0
            assert abs(got - expect) <= 5 * sd + 1

    def test_small_class_is_kept_whole(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(500, 1))
        y = np.zeros(500, dtype=np.int8)
        y[:7] = 1
        data = ns.Dataset(x=x, y=y)
        pilot = draw_pilot(data, PilotConfig(per_class_size=50), seed=0)
        assert int((pilot.y == 1).sum()) == 7

    def test_deterministic(self):
        data, _ = _imbalanced(seed=4)
        cfg = PilotConfig(per_class_size=60)
        a = draw_pilot(data, cfg, seed=11)
        b = draw_pilot(data, cfg, seed=11)
        assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()

    def test_too_small_for_fit(self):
        data, _ = _imbalanced(d=3, seed=5)
        with pytest.raises(ContractError):
            draw_pilot(data, PilotConfig(per_class_size=3), seed=0)

    def test_no_negatives_in_population(self):
        data = ns.Dataset(x=np.zeros((3, 1)), y=np.ones(3, dtype=np.int8))
        with pytest.raises(DegenerateInputError):
            draw_pilot(data, PilotConfig(per_class_size=2), seed=0)


class TestFitPilot:
    def test_recovers_balanced_parameter(self):
        rng = np.random.default_rng(6)
        n, d = 4000, 2
        x = rng.normal(size=(n, d))
        theta = Theta(0.3, np.array([0.8, -0.4]))
        y = (rng.random(n) < ns.probability(LIN, theta, x)).astype(np.int8)
        theta_tilde, m_inv = fit_pilot(ns.Dataset(x=x, y=y))
        np.testing.assert_allclose(theta_tilde.as_vector(), theta.as_vector(), atol=0.15)

    def test_inverse_information_matches_fit(self):
        data, _ = _imbalanced(n=2000, alpha=-1.0, seed=7)
        theta_tilde, m_inv = fit_pilot(data)
        result = ns.fit_mle(data)
        np.testing.assert_allclose(m_inv, np.linalg.inv(result.neg_hessian), rtol=1e-6)
        np.testing.assert_allclose(m_inv, m_inv.T)

    def test_near_singular_information_warns(self):
        # a duplicated feature column makes the information rank-deficient
        rng = np.random.default_rng(8)
        z = rng.normal(size=200)
        x = np.column_stack([z, z])
        y = (rng.random(200) < 1 / (1 + np.exp(-z))).astype(np.int8)
        with pytest.warns(RuntimeWarning):
            theta_tilde, m_inv = fit_pilot(ns.Dataset(x=x, y=y), max_iter=200)
        assert np.all(np.isfinite(m_inv))


class TestComputeOmega:
    def test_matches_direct_formula(self):
        data, _ = _imbalanced(n=5000, seed=9)
        pilot = draw_pilot(data, PilotConfig(per_class_size=40), seed=1)
        scores = lambda rows: np.abs(rows[:, 0]) + 0.5
        omega = compute_omega(data, pilot, scores)
        t = scores(pilot.x)
        pos = pilot.y == 1
        direct = (
            2 * data.n1 * t[pos].sum() + 2 * data.n0 * t[~pos].sum()
        ) / (pilot.n * data.n)
        assert omega == pytest.approx(direct, rel=1e-12)

    def test_constant_scores_give_that_constant(self):
        # with equal class shares restored, a constant score is its own mean
        data, _ = _imbalanced(n=3000, seed=10)
        pilot = draw_pilot(data, PilotConfig(per_class_size=30), seed=2)
        n1p = int((pilot.y == 1).sum())
        n0p = pilot.n - n1p
        omega = compute_omega(data, pilot, lambda rows: np.full(rows.shape[0], 3.0))
        expect = 3.0 * 2 * (data.n1 * n1p + data.n0 * n0p) / (pilot.n * data.n)
        assert omega == pytest.approx(expect, rel=1e-12)

    def test_rejects_bad_scores(self):
        data, _ = _imbalanced(n=1000, seed=11)
        pilot = draw_pilot(data, PilotConfig(per_class_size=20), seed=3)
        with pytest.raises(ContractError):
            compute_omega(data, pilot, lambda rows: np.ones(rows.shape[0] - 1))
        with pytest.raises(ContractError):
            compute_omega(data, pilot, lambda rows: -np.ones(rows.shape[0]))
        with pytest.raises(DegenerateInputError):
            compute_omega(data, pilot, lambda rows: np.zeros(rows.shape[0]))


class TestPerturb:
    def test_none_is_identity(self):
        t = Theta(-1.0, np.array([1.0, 2.0]))
        assert perturb_pilot(t, None, seed=0) is t

    def test_add_uniform_bounds_and_determinism(self):
        t = Theta(-1.0, np.array([1.0, 2.0]))
        mode = Perturb(ADD_UNIFORM, 1.5)
        a = perturb_pilot(t, mode, seed=5)
        b = perturb_pilot(t, mode, seed=5)
        np.testing.assert_array_equal(a.as_vector(), b.as_vector())
        delta = a.as_vector() - t.as_vector()
        assert np.all(delta >= 0.0) and np.all(delta <= 1.5)
        c = perturb_pilot(t, mode, seed=6)
        assert not np.array_equal(c.as_vector(), a.as_vector())

    def test_intercept_shift(self):
        t = Theta(-1.0, np.array([1.0]))
        mode = Perturb(INTERCEPT_SHIFT, 0.2)
        out = perturb_pilot(t, mode, seed=0, log_imbalance=math.log(50.0))
        np.testing.assert_array_equal(out.beta, t.beta)
        assert 0.0 <= out.alpha - t.alpha <= 0.2 * math.log(50.0)

    def test_intercept_shift_needs_imbalance(self):
        with pytest.raises(ConfigError):
            perturb_pilot(Theta(0.0, np.zeros(1)), Perturb(INTERCEPT_SHIFT, 0.1), seed=0)

    def test_beta_noise_leaves_alpha(self):
        t = Theta(-1.0, np.array([1.0, 2.0]))
        out = perturb_pilot(t, Perturb(BETA_NOISE, 0.3), seed=1)
        assert out.alpha == t.alpha
        assert not np.array_equal(out.beta, t.beta)

    def test_zero_scale_changes_nothing(self):
        t = Theta(-1.0, np.array([1.0, 2.0]))
        for kind in (ADD_UNIFORM, BETA_NOISE):
            out = perturb_pilot(t, Perturb(kind, 0.0), seed=2)
            np.testing.assert_array_equal(out.as_vector(), t.as_vector())

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            Perturb("multiply", 1.0)


class TestBuildBundles:
    def test_uniform_maps_to_none(self):
        data, _ = _imbalanced(seed=12)
        bundles = build_bundles(data, PilotConfig(50), (UNIFORM,), 0, 1)
        assert bundles == {UNIFORM: None}

    def test_shared_fit_distinct_normalizers(self):
        data, _ = _imbalanced(seed=13)
        bundles = build_bundles(data, PilotConfig(80), (OPT_P, OPT_L), 0, 1)
        bp, bl = bundles[OPT_P], bundles[OPT_L]
        np.testing.assert_array_equal(bp.theta_tilde.as_vector(), bl.theta_tilde.as_vector())
        assert bp.omega_tilde != bl.omega_tilde
        assert bp.m_tilde_inv is not None

    def test_unknown_scheme(self):
        data, _ = _imbalanced(seed=14)
        with pytest.raises(ConfigError):
            build_bundles(data, PilotConfig(50), ("cluster",), 0, 1)

    def test_build_pilot_rejects_uniform(self):
        data, _ = _imbalanced(seed=15)
        with pytest.raises(ConfigError):
            build_pilot(data, PilotConfig(50), UNIFORM, seed=0)

    def test_normalizer_calibrates_inclusion_rate(self):
        # with omega from the same population, the mean sampling probability
        # over negatives lands within 10% of rho when no clamp binds
        rng = np.random.default_rng(16)
        n, d = 150_000, 2
        x = rng.normal(size=(n, d))
        theta = Theta(-5.5, np.full(d, 0.5))
        y = (rng.random(n) < ns.probability(LIN, theta, x)).astype(np.int8)
        data = ns.Dataset(x=x, y=y)
        assert data.n0 >= 100_000
        rho = 0.001
        bundle = build_pilot(data, PilotConfig(200), OPT_P, seed=21)
        plan = SamplingPlan(OPT_P, rho, pilot=bundle)
        pi = sampling_probability(plan, data.x[data.y == 0])
        assert not np.any(pi >= 1.0)
        assert abs(pi.mean() / rho - 1.0) < 0.10
