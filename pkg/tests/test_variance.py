import numpy as np
import pytest

import negsamp as ns
from negsamp import ConditioningError, ContractError
from negsamp.model import Theta
from negsamp.sampling import OPT_P, UNIFORM, PilotBundle, SamplingPlan
from negsamp.variance import (
    VarianceReport,
    mse,
    plugin_mf,
    plugin_variances,
    verify_opt_phi,
)


def _design(seed, n=400, d=2):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    y = np.zeros(n, dtype=np.int8)
    y[: max(2, n // 50)] = 1
    return ns.Dataset(x=x, y=y)


def _aug(x):
    return np.column_stack([np.ones(x.shape[0]), x])


class TestPluginMf:
    def test_zero_beta_gives_second_moments(self):
        data = _design(0, n=300, d=1)
        got = plugin_mf(data, Theta(-3.0, np.zeros(1)))
        aug = _aug(data.x)
        np.testing.assert_allclose(got, aug.T @ aug / data.n, rtol=1e-12)

    def test_matches_direct_loop(self):
        data = _design(1, n=50, d=3)
        theta = Theta(-2.0, np.array([0.3, -0.2, 0.5]))
        got = plugin_mf(data, theta)
        expect = np.zeros((4, 4))
        for i in range(data.n):
            gi = np.concatenate(([1.0], data.x[i]))
            expect += np.exp(data.x[i] @ theta.beta) * np.outer(gi, gi)
        np.testing.assert_allclose(got, expect / data.n, rtol=1e-10)

    def test_symmetric_psd(self):
        for seed in range(5):
            data = _design(seed + 2)
            theta = Theta(-1.0, np.random.default_rng(seed).normal(size=2))
            m = plugin_mf(data, theta)
            np.testing.assert_allclose(m, m.T, rtol=1e-12)
            assert np.linalg.eigvalsh(m).min() >= -1e-10

    def test_permutation_invariant(self):
        data = _design(7, n=120)
        theta = Theta(-1.5, np.array([0.4, 0.1]))
        perm = np.random.default_rng(8).permutation(data.n)
        shuffled = ns.Dataset(x=data.x[perm], y=data.y[perm])
        np.testing.assert_allclose(
            plugin_mf(data, theta), plugin_mf(shuffled, theta), rtol=1e-12
        )

    def test_quadrature_agreement_standard_normal(self):
        # for x ~ N(0,1) and d=1 the entries of E[e^{xb} (1,x)(1,x)'] have
        # closed forms: E e^{xb} = e^{b^2/2}, E x e^{xb} = b e^{b^2/2},
        # E x^2 e^{xb} = (1+b^2) e^{b^2/2}
        rng = np.random.default_rng(9)
        n = 1_000_000
        x = rng.normal(size=(n, 1))
        y = np.zeros(n, dtype=np.int8)
        y[0] = 1
        data = ns.Dataset(x=x, y=y)
        b = 0.8
        got = plugin_mf(data, Theta(0.0, np.array([b])))
        s = np.exp(b * b / 2)
        expect = s * np.array([[1.0, b], [b, 1 + b * b]])
        np.testing.assert_allclose(got, expect, rtol=0.02)


class TestPluginVariances:
    def test_direct_formula_small_case(self):
        data = _design(10, n=60, d=2)
        theta = Theta(-2.5, np.array([0.6, -0.3]))
        plan = SamplingPlan(UNIFORM, 0.05)
        rep = plugin_variances(data, theta, plan)

        aug = _aug(data.x)
        ef = np.exp(data.x @ theta.beta)
        phi = np.ones(data.n)  # uniform: pi = rho everywhere
        c_hat = np.exp(theta.alpha) / 0.05
        mf = (aug * ef[:, None]).T @ aug / data.n
        mf_inv = np.linalg.inv(mf)
        v_f = ef.mean() * mf_inv
        mid = (aug * (ef * ef / phi)[:, None]).T @ aug / data.n
        v_w = v_f + c_hat * ef.mean() * mf_inv @ mid @ mf_inv
        lam = (aug * (ef / (1 + c_hat * ef / phi))[:, None]).T @ aug / data.n
        v_lik = ef.mean() * np.linalg.inv(lam)

        np.testing.assert_allclose(rep.v_f, v_f, rtol=1e-10)
        np.testing.assert_allclose(rep.v_w, v_w, rtol=1e-10)
        np.testing.assert_allclose(rep.v_lik, v_lik, rtol=1e-10)
        assert rep.c_hat == pytest.approx(c_hat, rel=1e-12)

    def test_two_atom_closed_form(self):
        # x in {-1, 1} equiprobable and beta = 0: e^f = 1, M_f has entries
        # [[1, xbar], [xbar, 1]], and with phi = 1 the sandwich middle equals
        # M_f, so V_sub = c_hat * M_f^{-1} and V_w = (1 + c_hat) V_f
        x = np.array([[-1.0], [1.0], [-1.0], [1.0]])
        y = np.array([1, 0, 0, 1])
        data = ns.Dataset(x=x, y=y)
        theta = Theta(-3.0, np.zeros(1))
        plan = SamplingPlan(UNIFORM, 0.1)
        rep = plugin_variances(data, theta, plan)
        c_hat = np.exp(-3.0) / 0.1
        np.testing.assert_allclose(rep.v_f, np.eye(2), rtol=1e-12)
        np.testing.assert_allclose(rep.v_w, (1 + c_hat) * np.eye(2), rtol=1e-12)
        np.testing.assert_allclose(rep.v_lik, (1 + c_hat) * np.eye(2), rtol=1e-12)

    def test_zero_c_collapses_everything(self):
        data = _design(11)
        theta = Theta(-2.0, np.array([0.5, 0.5]))
        plan = SamplingPlan(UNIFORM, 0.01)
        rep = plugin_variances(data, theta, plan, c_hat=0.0)
        np.testing.assert_allclose(rep.v_w, rep.v_f, atol=1e-10)
        np.testing.assert_allclose(rep.v_lik, rep.v_f, atol=1e-10)

    def test_ordering_over_random_configs(self):
        rng = np.random.default_rng(12)
        for trial in range(25):
            n = int(rng.integers(80, 300))
            d = int(rng.integers(1, 4))
            data = _design(int(rng.integers(1 << 30)), n=n, d=d)
            theta = Theta(float(rng.uniform(-4, -1)), rng.normal(0, 0.6, d))
            rho = float(rng.uniform(0.01, 0.3))
            if rng.random() < 0.5:
                plan = SamplingPlan(UNIFORM, rho)
            else:
                bundle = PilotBundle(theta_tilde=Theta(0.0, np.zeros(d)), omega_tilde=1.0)
                plan = SamplingPlan(OPT_P, rho, pilot=bundle)
            rep = plugin_variances(data, theta, plan)
            assert rep.traces[2] <= rep.traces[1] + 1e-9
            assert np.linalg.eigvalsh(rep.v_w - rep.v_lik).min() >= -1e-9
            assert np.linalg.eigvalsh(rep.v_w - rep.v_f).min() >= -1e-9
            assert np.linalg.eigvalsh(rep.v_lik - rep.v_f).min() >= -1e-9

    def test_singular_information_raises(self):
        rng = np.random.default_rng(13)
        z = rng.normal(size=50)
        x = np.column_stack([z, z])
        y = np.zeros(50, dtype=np.int8)
        y[:3] = 1
        data = ns.Dataset(x=x, y=y)
        with pytest.raises(ConditioningError):
            plugin_variances(data, Theta(-2.0, np.zeros(2)), SamplingPlan(UNIFORM, 0.1))

    def test_theta_dimension_checked(self):
        data = _design(14)
        with pytest.raises(ContractError):
            plugin_variances(data, Theta(-2.0, np.zeros(3)), SamplingPlan(UNIFORM, 0.1))


class TestVarianceReport:
    def test_traces_match_matrices(self):
        m = np.diag([1.0, 2.0])
        rep = VarianceReport(v_f=m, v_w=2 * m, v_lik=1.5 * m, c_hat=0.3)
        assert rep.traces == (3.0, 6.0, 4.5)

    def test_to_json_round_trip(self):
        m = np.eye(2)
        rep = VarianceReport(v_f=m, v_w=m, v_lik=m, c_hat=0.0, theta_source="fit")
        blob = rep.to_json()
        assert blob["traces"]["v_f"] == 2.0
        assert blob["theta_source"] == "fit"
        np.testing.assert_array_equal(np.asarray(blob["v_w"]), m)

    def test_validation(self):
        with pytest.raises(ContractError):
            VarianceReport(v_f=np.zeros(3), v_w=np.eye(3), v_lik=np.eye(3), c_hat=0.1)
        with pytest.raises(ContractError):
            VarianceReport(v_f=np.eye(2), v_w=np.eye(2), v_lik=np.eye(2), c_hat=-0.1)


class TestMse:
    def test_exact_match_is_zero(self):
        truth = Theta(1.0, np.array([2.0]))
        assert mse([truth, truth], truth) == 0.0

    def test_single_distance(self):
        truth = Theta(0.0, np.array([0.0]))
        assert mse([Theta(2.0, np.array([0.0]))], truth) == pytest.approx(4.0)

    def test_three_replicates(self):
        truth = Theta(0.0, np.array([0.0]))
        ests = [
            Theta(1.0, np.array([0.0])),
            Theta(0.0, np.array([2.0])),
            Theta(3.0, np.array([0.0])),
        ]
        assert mse(ests, truth) == pytest.approx(14.0 / 3.0)

    def test_accepts_raw_vectors(self):
        truth = Theta(0.0, np.array([0.0]))
        assert mse([np.array([0.0, 3.0])], truth) == pytest.approx(9.0)

    def test_errors(self):
        truth = Theta(0.0, np.array([0.0]))
        with pytest.raises(ContractError):
            mse([], truth)
        with pytest.raises(ContractError):
            mse([Theta(0.0, np.zeros(2))], truth)


class TestAsymptoticCalibration:
    def test_replication_covariance_tracks_plugin_v_lik(self):
        # the theory predicts cov(theta_hat) ~ V_lik / N1 (the normalizer
        # sqrt(N1) equals sqrt(N e^alpha * E e^f) up to o(1), and V carries
        # the E e^f factor); a 35% band absorbs Monte Carlo noise plus the
        # finite-N asymptotic gap.  Measured ratio at this seed: 0.84.
        from negsamp.experiments import Design, generate
        from negsamp import streams

        design = Design(
            "normal", n=500_000, d=6, alpha_true=-8.7939453125, target_ratio=1 / 400
        )
        plan = SamplingPlan(UNIFORM, 0.02)
        master = 424242
        ests, n1s = [], []
        for r in range(120):
            data, truth = generate(design, streams.derive_seed(master, 1, r))
            sub = ns.draw_subsample(data, plan, rng_seed=streams.derive_seed(master, 2, r))
            res = ns.fit_lik(sub)
            assert res.converged
            ests.append(res.theta_hat.as_vector())
            n1s.append(data.n1)
        emp_trace = float(np.trace(np.cov(np.stack(ests), rowvar=False, ddof=1)))

        data, truth = generate(design, streams.derive_seed(master, 1, 0))
        rep = plugin_variances(data, truth, plan)
        ratio = float(np.mean(n1s)) * emp_trace / rep.traces[2]
        assert 0.65 <= ratio <= 1.35


class TestVerifyOptPhi:
    def test_unit_exponent_attains_minimum(self):
        data = _design(15, n=2000, d=2)
        theta = Theta(-4.0, np.array([0.8, -0.5]))
        report = verify_opt_phi(data, theta, rho=0.01)
        assert report["optimal_attains_min"]
        assert report["argmin"] == 1.0
        assert report["traces"][1.0] < report["traces"][0.0]

    def test_grid_must_include_optimum(self):
        data = _design(16)
        with pytest.raises(ContractError):
            verify_opt_phi(data, Theta(-2.0, np.zeros(2)), rho=0.01, grid=(0.0, 2.0))

    def test_rho_validated(self):
        data = _design(17)
        with pytest.raises(ContractError):
            verify_opt_phi(data, Theta(-2.0, np.zeros(2)), rho=0.0)
