import math

import numpy as np
import pytest

from vmfista.metrics import d_norm_sq
from vmfista.problems import (ConvolutionOperator, KLTVDeblur,
                              WeightedL2Denoise, build_kl_metric,
                              build_wl2_metric, convolve, convolve_adjoint,
                              div_adjoint, gaussian_psf, grad_op, tv_value)


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gf[i] = (fp - fm) / (2.0 * h)
    return g


class TestTotalVariation:
    def test_constant_image(self):
        assert tv_value(np.full((5, 5), 3.2)) == 0.0

    def test_hand_computed_two_by_two(self):
        x = np.array([[0.0, 1.0], [0.0, 1.0]])
        assert tv_value(x, 1.0) == pytest.approx(2.0)

    def test_positive_homogeneity(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(6, 6))
        for c in (-2.0, 0.5, 3.0):
            assert tv_value(c * x) == pytest.approx(abs(c) * tv_value(x))


class TestGradDiv:
    def test_gradient_of_constant(self):
        assert np.all(grad_op(np.full((4, 4), 7.0)) == 0.0)

    def test_adjoint_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = rng.normal(size=(8, 6))
            w = rng.normal(size=(8, 6, 2))
            lhs = float(np.vdot(grad_op(x), w))
            rhs = float(np.vdot(x, div_adjoint(w)))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_operator_norm_bound_by_power_iteration(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(16, 16))
        for _ in range(200):
            x = div_adjoint(grad_op(x))
            x /= np.linalg.norm(x)
        norm_sq = float(np.vdot(grad_op(x), grad_op(x)))
        assert norm_sq <= 8.0
        assert norm_sq > 7.0  # the bound is nearly tight on a 16x16 grid


class TestGaussianPsf:
    def test_delta_limit(self):
        assert np.array_equal(gaussian_psf(0.0), np.array([[1.0]]))

    @pytest.mark.parametrize("sigma,size", [(1.4, 9), (3.2, 17)])
    def test_normalization(self, sigma, size):
        k = gaussian_psf(sigma, size)
        assert k.shape == (size, size)
        assert k.sum() == pytest.approx(1.0)

    def test_symmetry(self):
        k = gaussian_psf(2.0)
        assert np.allclose(k, k[::-1, ::-1])
        assert np.allclose(k, k[::-1, :])
        assert np.allclose(k, k[:, ::-1])

    def test_default_support(self):
        assert gaussian_psf(1.4).shape == (2 * math.ceil(4.2) + 1,) * 2

    def test_bad_size(self):
        with pytest.raises(ValueError):
            gaussian_psf(1.0, 4)


class TestConvolutionOperator:
    def test_identity_psf(self):
        op = ConvolutionOperator(np.array([[1.0]]))
        x = np.random.default_rng(3).normal(size=(5, 5))
        assert np.array_equal(op.apply(x), x)

    def test_constant_preserved(self):
        op = ConvolutionOperator(gaussian_psf(1.4))
        x = np.full((16, 16), 2.5)
        assert np.allclose(op.apply(x), 2.5, atol=1e-12)

    def test_adjoint_pairs(self):
        rng = np.random.default_rng(4)
        op = ConvolutionOperator(gaussian_psf(1.4))
        for _ in range(100):
            x = rng.normal(size=(12, 12))
            w = rng.normal(size=(12, 12))
            lhs = float(np.vdot(convolve(x, op), w))
            rhs = float(np.vdot(x, convolve_adjoint(w, op)))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_spatial_dct_agreement(self):
        rng = np.random.default_rng(5)
        for sigma in (0.8, 1.4, 3.2):
            spatial = ConvolutionOperator(gaussian_psf(sigma), method="spatial")
            dct = ConvolutionOperator(gaussian_psf(sigma), method="dct")
            x = rng.normal(size=(24, 24))
            assert np.allclose(spatial.apply(x), dct.apply(x), atol=1e-10)

    def test_kernel_too_large(self):
        op = ConvolutionOperator(gaussian_psf(3.2))
        with pytest.raises(ValueError):
            op.apply(np.zeros((8, 8)))

    def test_asymmetric_kernel_rejected(self):
        bad = np.array([[0.0, 0.2, 0.0], [0.2, 0.4, 0.2], [0.0, 0.0, 0.0]])
        with pytest.raises(ValueError):
            ConvolutionOperator(bad / bad.sum())


class TestWeightedL2:
    def setup_method(self):
        rng = np.random.default_rng(6)
        self.z = rng.poisson(40.0, (8, 8)).astype(float)
        self.model = WeightedL2Denoise(self.z, 1.0, 0.1)

    def test_residual_vanishes(self):
        x = self.z - 1.0
        assert self.model.f_value(x) == pytest.approx(0.0)
        assert np.allclose(self.model.f_grad(x), 0.0)

    def test_scalar_example(self):
        m = WeightedL2Denoise(np.array([[0.0]]), 1.0, 0.1)
        assert m.f_value(np.array([[1.0]])) == pytest.approx(2.0)
        assert m.f_grad(np.array([[1.0]]))[0, 0] == pytest.approx(2.0)

    def test_constants(self):
        assert self.model.sigma_f == pytest.approx(1.0 / (self.z.max() + 1.0))
        assert self.model.L_f == pytest.approx(1.0 / (self.z.min() + 1.0))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        for _ in range(3):
            x = rng.uniform(0.0, 50.0, (8, 8))
            g = self.model.f_grad(x)
            g_fd = central_difference(self.model.f_value, x.copy(), h=1e-5)
            assert np.allclose(g, g_fd, rtol=1e-6, atol=1e-8)

    def test_strong_convexity_inequality(self):
        rng = np.random.default_rng(8)
        sf = self.model.sigma_f
        for _ in range(100):
            x = rng.uniform(0.0, 60.0, (8, 8))
            y = rng.uniform(0.0, 60.0, (8, 8))
            lhs = self.model.f_value(y)
            rhs = self.model.f_value(x) \
                + float(np.vdot(self.model.f_grad(x), y - x)) \
                + 0.5 * sf * float(np.sum((y - x) ** 2))
            assert lhs >= rhs - 1e-9 * max(1.0, abs(lhs))

    def test_descent_lemma_floor(self):
        # tau <= eta_inf / L_f always satisfies the scaled descent test
        rng = np.random.default_rng(9)
        metric = build_wl2_metric(self.z, 1.0, 2.0)
        tau = metric.eta_inf / self.model.L_f
        smooth = self.model.smooth()
        for _ in range(50):
            y = rng.uniform(0.0, 60.0, (8, 8))
            x = rng.uniform(0.0, 60.0, (8, 8))
            d = x - y
            breg = smooth.value(x) - smooth.value(y) \
                - float(np.vdot(smooth.grad(y), d))
            assert breg <= d_norm_sq(d, metric) / (2.0 * tau) * (1 + 1e-12)


class TestKl:
    def setup_method(self):
        rng = np.random.default_rng(10)
        self.op = ConvolutionOperator(gaussian_psf(1.0))
        truth = rng.uniform(0.0, 5.0, (10, 10))
        self.z = rng.poisson(self.op.apply(truth) + 0.5).astype(float)
        self.model = KLTVDeblur(self.z, 0.5, self.op, 0.01, 1e-3)

    def test_perfect_fit_is_zero(self):
        x = np.random.default_rng(11).uniform(0.5, 3.0, (10, 10))
        z_fit = self.op.apply(x) + 0.5
        model = KLTVDeblur(z_fit, 0.5, self.op, 0.01)
        assert model.kl_value(x) == pytest.approx(0.0, abs=1e-10)
        assert np.allclose(model.kl_grad(x), 0.0, atol=1e-10)

    def test_scalar_examples(self):
        ident = ConvolutionOperator(np.array([[1.0]]))
        m = KLTVDeblur(np.array([[2.0]]), 1.0, ident, 0.1)
        assert m.kl_value(np.array([[1.0]])) == pytest.approx(0.0)
        m0 = m.kl_value(np.array([[0.0]]))
        assert m0 == pytest.approx(2.0 * math.log(2.0) - 1.0)

    def test_nonnegative(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            x = rng.uniform(0.0, 6.0, (10, 10))
            assert self.model.kl_value(x) >= -1e-12

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        x = rng.uniform(0.5, 5.0, (10, 10))
        g = self.model.kl_grad(x)
        g_fd = central_difference(self.model.kl_value, x.copy(), h=1e-6)
        assert np.allclose(g, g_fd, rtol=1e-6, atol=1e-7)

    def test_lipschitz_overestimate_formula(self):
        expected = self.z.max() / 0.25
        assert self.model.L_f == pytest.approx(expected, rel=1e-10)

    def test_descent_at_formula_step(self):
        rng = np.random.default_rng(14)
        smooth = self.model.smooth()
        tau = 1.0 / self.model.L_f
        for _ in range(30):
            y = rng.uniform(0.0, 6.0, (10, 10))
            x = rng.uniform(0.0, 6.0, (10, 10))
            d = x - y
            breg = smooth.value(x) - smooth.value(y) \
                - float(np.vdot(smooth.grad(y), d))
            assert breg <= float(np.sum(d * d)) / (2.0 * tau) * (1 + 1e-12)

    def test_zero_log_zero_convention(self):
        ident = ConvolutionOperator(np.array([[1.0]]))
        m = KLTVDeblur(np.array([[0.0]]), 1.0, ident, 0.1)
        # z = 0: value reduces to (x + b) - z
        assert m.kl_value(np.array([[2.0]])) == pytest.approx(3.0)


class TestMetricBuilders:
    def test_wl2_identity_at_gamma_one(self):
        m = build_wl2_metric(np.array([[3.0]]), 1.0, 1.0)
        assert np.allclose(m.weights, 1.0)

    def test_wl2_inside_window(self):
        m = build_wl2_metric(np.array([[3.0]]), 1.0, 10.0)
        assert m.weights[0, 0] == pytest.approx(0.25)

    def test_kl_identity_case(self):
        ident = ConvolutionOperator(np.array([[1.0]]))
        m = build_kl_metric(np.ones((3, 3)), ident, 4.0)
        assert np.allclose(m.weights, 1.0)

    def test_kl_clamped_below(self):
        ident = ConvolutionOperator(np.array([[1.0]]))
        m = build_kl_metric(np.array([[0.25]]), ident, 2.0)
        assert m.weights[0, 0] == pytest.approx(2.0)

    def test_bounds_are_gamma(self):
        ident = ConvolutionOperator(np.array([[1.0]]))
        m = build_kl_metric(np.array([[0.25]]), ident, 2.0)
        assert (m.eta_inf, m.eta_sup) == (0.5, 2.0)


class TestCompositeAssembly:
    def test_wl2_composite_value(self):
        z = np.array([[1.0, 2.0], [0.0, 4.0]])
        model = WeightedL2Denoise(z, 0.5, 0.3)
        prob = model.to_composite()
        x = np.array([[1.0, 1.0], [0.0, 2.0]])
        expected = model.f_value(x) + tv_value(x, 0.3)
        assert prob.value(x) == pytest.approx(expected)

    def test_kl_composite_includes_quadratic(self):
        ident = ConvolutionOperator(np.array([[1.0]]))
        z = np.array([[2.0, 1.0]])
        model = KLTVDeblur(z, 0.5, ident, 0.3, eps_q=0.1)
        prob = model.to_composite()
        x = np.array([[1.0, 1.0]])
        expected = model.kl_value(x) + tv_value(x, 0.3) \
            + 0.05 * float(np.sum(x * x))
        assert prob.value(x) == pytest.approx(expected)
        assert prob.nonsmooth.mu_g == pytest.approx(0.1)
