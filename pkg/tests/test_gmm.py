import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from scorecompose import gmm as G
from scorecompose.rng import stream

from oracles import PRIOR, mp_log_density, mp_posterior


class TestComponentValidation:
    def test_rejects_bad_std(self):
        with pytest.raises(ValueError):
            G.GaussianComponent(0.0, 0.0, 1.0)

    def test_rejects_bad_weight(self):
        with pytest.raises(ValueError):
            G.GaussianComponent(0.0, 1.0, 0.0)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            G.Gmm1D.from_arrays([0.0, 1.0], [1.0, 1.0], [0.5, 0.6])

    def test_empty_mixture(self):
        with pytest.raises(ValueError):
            G.Gmm1D(())


class TestLogDensity:
    def test_standard_normal_peak(self):
        assert G.log_density(G.Gmm1D.single(0.0, 1.0), 0.0) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)

    def test_symmetry(self, prior):
        assert G.log_density(prior, 0.0) == G.log_density(prior, -0.0)
        assert G.log_density(prior, 1.3) == pytest.approx(G.log_density(prior, -1.3), abs=1e-14)

    def test_matches_high_precision_sum(self, prior):
        for x in (-4.0, 0.0, 2.2, 9.0):
            assert G.log_density(prior, x) == pytest.approx(float(mp_log_density(PRIOR, x)), rel=1e-13)

    def test_far_tail_does_not_underflow(self, prior):
        val = G.log_density(prior, -400.0, 0.005)
        assert math.isfinite(val)
        assert val == pytest.approx(float(mp_log_density(PRIOR, -400.0, 0.005)), rel=1e-12)

    def test_rejects_non_finite(self, prior):
        with pytest.raises(ValueError):
            G.log_density(prior, float("nan"))

    def test_integrates_to_one(self, trimodal):
        val, _ = integrate.quad(lambda x: G.density(trimodal, x), -30, 30, points=[-1, 0.5, 3], limit=200)
        assert val == pytest.approx(1.0, abs=1e-10)


class TestScore:
    def test_zero_at_single_mode(self):
        assert G.score(G.Gmm1D.single(-2.0, 0.225), -2.0) == 0.0

    def test_zero_at_symmetric_center(self, prior):
        assert G.score(prior, 0.0) == 0.0

    def test_finite_difference(self, prior):
        h = 1e-5
        fd = (G.log_density(prior, -3.0 + h) - G.log_density(prior, -3.0 - h)) / (2 * h)
        assert abs(G.score(prior, -3.0) - fd) / abs(fd) < 1e-6

    @settings(max_examples=200, deadline=None)
    @given(x=st.floats(-10, 10), sigma=st.sampled_from([0.0, 0.1, 0.5, 2.0, 10.0]))
    def test_finite_difference_property(self, x, sigma):
        g = G.Gmm1D.from_arrays([-1.0, 0.5, 3.0], [0.3, 1.2, 0.7], [0.2, 0.5, 0.3])
        if abs(G.log_density(g, x, sigma)) >= 50:
            return
        h = 1e-5
        fd = (G.log_density(g, x + h, sigma) - G.log_density(g, x - h, sigma)) / (2 * h)
        exact = G.score(g, x, sigma)
        assert abs(exact - fd) <= 1e-6 * max(abs(exact), 1.0)

    def test_vectorized(self, prior):
        xs = np.array([-3.0, 0.0, 2.0])
        np.testing.assert_array_equal(G.score(prior, xs), [G.score(prior, x) for x in xs])


class TestDiffusion:
    def test_ve_convolution_identity(self):
        out = G.diffuse_ve(G.Gmm1D.single(-4.0, 0.9), 80.0)
        c = out.components[0]
        assert c.mean == -4.0
        assert c.var == pytest.approx(0.81 + 6400.0, rel=1e-15)

    def test_ve_small_sigma_limit(self, prior):
        grid = np.linspace(-8, 8, 161)
        np.testing.assert_allclose(G.density(G.diffuse_ve(prior, 1e-9), grid), G.density(prior, grid), atol=1e-6)

    def test_ve_rejects_non_positive(self, prior):
        with pytest.raises(ValueError):
            G.diffuse_ve(prior, 0.0)

    def test_ve_quadrature_at_origin(self, prior):
        s = 0.6325
        val, _ = integrate.quad(
            lambda u: G.density(prior, u) * math.exp(-u * u / (2 * s * s)) / (s * math.sqrt(2 * math.pi)),
            -15, 15, points=[-4, 0, 4], epsabs=1e-14, limit=200)
        assert G.density(G.diffuse_ve(prior, s), 0.0) == pytest.approx(val, abs=1e-8)

    def test_ve_trapezoid_convolution_grid(self, prior):
        # trapezoid convolution of base density with N(0, s^2) on a fine grid
        u = np.linspace(-25, 25, 20001)
        base = G.density(prior, u)
        for s in (0.3, 1.0, 4.0):
            xs = np.linspace(-12, 12, 49)
            kern = np.exp(-(xs[:, None] - u) ** 2 / (2 * s * s)) / (s * math.sqrt(2 * math.pi))
            conv = np.trapezoid(base * kern, u, axis=1)
            np.testing.assert_allclose(G.density(G.diffuse_ve(prior, s), xs), conv, atol=1e-6)

    def test_vp_identity_boundary(self, prior):
        assert G.diffuse_vp(prior, 1.0, 0.0) == prior

    def test_vp_noise_boundary(self, prior):
        a = 1e-6
        out = G.diffuse_vp(prior, a, math.sqrt(1 - a * a))
        np.testing.assert_allclose(out.means, 0.0, atol=1e-5)
        np.testing.assert_allclose(out.variances, 1.0, atol=1e-9)

    def test_vp_formula_and_monte_carlo(self):
        out = G.diffuse_vp(G.Gmm1D.single(-4.0, 0.9), 0.8, 0.6)
        assert out.means[0] == pytest.approx(-3.2, abs=1e-15)
        assert out.variances[0] == pytest.approx(0.8784, abs=1e-15)
        rng = stream(11)
        z = 0.8 * rng.normal(-4.0, 0.9, 200_000) + 0.6 * rng.standard_normal(200_000)
        assert z.mean() == pytest.approx(-3.2, abs=4 * math.sqrt(0.8784 / 2e5))
        assert z.var() == pytest.approx(0.8784, rel=0.01)

    def test_vp_rejects_constraint_violation(self, prior):
        with pytest.raises(ValueError):
            G.diffuse_vp(prior, 0.8, 0.8)


class TestComponentPosterior:
    @pytest.mark.parametrize("sigma", [0.0, 0.5, 80.0])
    def test_symmetric_center(self, prior, sigma):
        np.testing.assert_allclose(G.component_posterior(prior, 0.0, sigma), [0.5, 0.5], atol=1e-15)

    def test_far_component_log_space(self, prior):
        r = G.component_posterior(prior, -4.0, 0.0)
        expected = float(mp_posterior(PRIOR, -4.0)[1])
        assert expected == pytest.approx(math.exp(-64 / 1.62), rel=1e-12)
        assert r[1] < 1e-15
        assert r[1] == pytest.approx(expected, rel=1e-12)

    def test_heavy_diffusion_washes_out(self, prior):
        np.testing.assert_allclose(G.component_posterior(prior, 0.0, 80.0), [0.5, 0.5], atol=1e-6)

    @settings(max_examples=300, deadline=None)
    @given(x=st.floats(-50, 50), sigma=st.sampled_from([0.0, 1e-6, 0.005, 1.0, 80.0]))
    def test_normalized(self, x, sigma):
        g = G.Gmm1D.from_arrays([-4.0, 4.0], [0.9, 0.9], [0.5, 0.5])
        r = G.component_posterior(g, x, sigma)
        assert np.all((r >= 0) & (r <= 1))
        assert abs(r.sum() - 1.0) <= 1e-12


class TestConditionalAndGuidanceScores:
    def test_conditional_zero_at_mean(self, prior):
        assert G.conditional_score(prior, 4.0, 3.0, 1) == 0.0

    def test_conditional_value(self, prior):
        expected = -(-3.1 + 4.0) / 0.81
        assert G.conditional_score(prior, -3.1, 0.0, 0) == pytest.approx(expected, rel=1e-14)
        h = 1e-5
        comp = G.Gmm1D.single(-4.0, 0.9)
        fd = (G.log_density(comp, -3.1 + h) - G.log_density(comp, -3.1 - h)) / (2 * h)
        assert G.conditional_score(prior, -3.1, 0.0, 0) == pytest.approx(fd, rel=1e-6)

    def test_conditional_matches_single_component_score(self):
        g = G.Gmm1D.single(0.7, 1.3)
        for x in (-2.0, 0.0, 3.0):
            assert G.conditional_score(g, x, 0.4, 0) == G.score(g, x, 0.4)

    def test_index_errors(self, prior):
        with pytest.raises(IndexError):
            G.conditional_score(prior, 0.0, 0.0, 2)
        with pytest.raises(IndexError):
            G.posterior_guidance_score(prior, 0.0, 0.0, -1)

    def test_single_component_has_no_guidance(self):
        g = G.Gmm1D.single(1.0, 0.5)
        np.testing.assert_array_equal(G.posterior_guidance_score(g, np.linspace(-5, 5, 11), 0.3, 0), 0.0)

    def test_sign_at_center(self, prior):
        assert G.posterior_guidance_score(prior, 0.0, 1.0, 0) < 0

    def test_finite_difference_of_log_posterior(self, prior):
        h = 1e-5
        fd = (G.log_component_posterior(prior, -1.6 + h, 0.5, 0)
              - G.log_component_posterior(prior, -1.6 - h, 0.5, 0)) / (2 * h)
        exact = G.posterior_guidance_score(prior, -1.6, 0.5, 0)
        assert abs(exact - fd) / abs(fd) < 1e-6

    @pytest.mark.parametrize("sigma", [0.0, 0.005, 0.3, 1.0, 5.0, 80.0])
    def test_mixture_score_identity(self, trimodal, sigma):
        x = np.linspace(-12, 12, 241)
        r = G.component_posterior(trimodal, x, sigma)
        cond = np.stack([G.conditional_score(trimodal, x, sigma, k) for k in range(3)], axis=-1)
        marginal = G.diffuse_ve(trimodal, sigma) if sigma > 0 else trimodal
        assert np.max(np.abs(G.score(marginal, x) - np.sum(r * cond, axis=-1))) <= 1e-10

    @pytest.mark.parametrize("sigma", [0.0, 0.005, 0.3, 1.0, 5.0, 80.0])
    def test_bayes_identity(self, prior, trimodal, sigma):
        x = np.linspace(-12, 12, 241)
        for g in (prior, trimodal):
            for k in range(len(g)):
                rhs = G.conditional_score(g, x, sigma, k) - G.score(g, x, sigma)
                assert np.max(np.abs(G.posterior_guidance_score(g, x, sigma, k) - rhs)) <= 1e-12

    def test_matches_high_precision_posterior_gradient(self, prior):
        # d/dx log r_0 = sum_j r_j (s_0 - s_j), evaluated with 50-digit arithmetic
        for x, sigma in ((-1.6, 0.5), (-30.0, 0.005), (2.0, 3.0)):
            r = mp_posterior(PRIOR, x, sigma)
            var = 0.81 + sigma ** 2
            s = [-(x + 4.0) / var, -(x - 4.0) / var]
            expected = float(sum(rj * (s[0] - sj) for rj, sj in zip(r, s)))
            assert G.posterior_guidance_score(prior, x, sigma, 0) == pytest.approx(expected, rel=1e-9)


class TestSampling:
    def test_law_of_large_numbers(self):
        draws = G.sample_gmm(G.Gmm1D.single(-2.0, 0.225), stream(3), 100_000)
        assert abs(draws.mean() + 2.0) < 3 * 0.225 / math.sqrt(1e5)

    def test_deterministic(self, prior):
        a = G.sample_gmm(prior, stream(9), 1000)
        b = G.sample_gmm(prior, stream(9), 1000)
        assert a.tobytes() == b.tobytes()
        assert G.sample_gmm(prior, stream(9)) == G.sample_gmm(prior, stream(9))

    def test_bimodal_balance(self, prior):
        draws = G.sample_gmm(prior, stream(5), 100_000)
        assert abs(np.mean(draws < 0) - 0.5) < 3 * math.sqrt(0.25 / 1e5)
