import itertools

import numpy as np
import pytest

from hype_attention.encoding import HypeHeadParams, build_bias_hype
from hype_attention.gradcheck import (attention_param_grads, bias_param_grads, fd_step,
                                      finite_difference_param_grads, relative_gap)
from hype_attention.tensor import random_fill


def central_diff(f, x):
    h = fd_step(x)
    return (f(x + h) - f(x - h)) / (2 * h)


class TestBiasGrads:
    def test_zero_slope_closed_form(self):
        L = 6
        d_mu, d_tau = bias_param_grads(L, HypeHeadParams(0.0, 1.7))
        offsets = np.arange(L)[None, :] - np.arange(L)[:, None]
        np.testing.assert_array_equal(d_mu, -1.7 * offsets)
        np.testing.assert_array_equal(d_tau, np.zeros((L, L)))

    def test_tau_derivative_is_unit_amplitude_bias(self):
        p = HypeHeadParams(0.13, -2.5)
        _, d_tau = bias_param_grads(9, p)
        np.testing.assert_array_equal(d_tau, build_bias_hype(9, HypeHeadParams(0.13, 1.0)).values)

    def test_matches_finite_differences(self):
        L, mu, tau = 8, 0.1, 1.0
        d_mu, d_tau = bias_param_grads(L, HypeHeadParams(mu, tau))
        fd_mu = central_diff(lambda m: build_bias_hype(L, HypeHeadParams(m, tau)).values, mu)
        fd_tau = central_diff(lambda t: build_bias_hype(L, HypeHeadParams(mu, t)).values, tau)
        np.testing.assert_allclose(d_mu, fd_mu, rtol=1e-6, atol=1e-9)
        np.testing.assert_allclose(d_tau, fd_tau, rtol=1e-6, atol=1e-9)


class TestAttentionGrads:
    def test_zero_amplitude_kills_slope_gradient(self, qkv):
        Q, K, V = qkv(10, 4)
        g = attention_param_grads(Q, K, V, HypeHeadParams(0.3, 0.0))
        assert g.d_mu == 0.0
        assert g.d_tau != 0.0

    def test_zero_values_zero_gradients(self, qkv):
        Q, K, _ = qkv(10, 4)
        g = attention_param_grads(Q, K, np.zeros((10, 4)), HypeHeadParams(0.3, 1.0))
        assert g.d_mu == 0.0 and g.d_tau == 0.0

    def test_random_case(self, qkv):
        Q, K, V = qkv(16, 8, seed=31)
        p = HypeHeadParams(0.02, 1.0)
        a = attention_param_grads(Q, K, V, p)
        f = finite_difference_param_grads(Q, K, V, p)
        assert relative_gap(a.d_mu, f.d_mu) <= 1e-5
        assert relative_gap(a.d_tau, f.d_tau) <= 1e-5
        assert a.loss_kind == "sum"

    @pytest.mark.parametrize("causal", [False, True])
    def test_cotangent_and_causal(self, qkv, causal):
        Q, K, V = qkv(12, 4, seed=2)
        G = random_fill(12, 4, 99)
        p = HypeHeadParams(0.05, 1.5)
        a = attention_param_grads(Q, K, V, p, causal=causal, cotangent=G)
        f = finite_difference_param_grads(Q, K, V, p, causal=causal, cotangent=G)
        c = attention_param_grads(Q, K, V, p, causal=causal, cotangent=G, path="concat")
        assert a.loss_kind == "cotangent"
        assert relative_gap(a.d_mu, f.d_mu) <= 1e-5 and relative_gap(a.d_tau, f.d_tau) <= 1e-5
        assert relative_gap(a.d_mu, c.d_mu) <= 1e-10 and relative_gap(a.d_tau, c.d_tau) <= 1e-10

    @pytest.mark.parametrize("L,d,mu,tau", list(itertools.product(
        [4, 16, 64], [2, 8], [0.0, 0.001, 0.01], [0.0, 1.0, 2.0])))
    def test_parameter_grid(self, qkv, L, d, mu, tau):
        Q, K, V = qkv(L, d, seed=L * 10 + d)
        p = HypeHeadParams(mu, tau)
        a = attention_param_grads(Q, K, V, p)
        c = attention_param_grads(Q, K, V, p, path="concat")
        f = finite_difference_param_grads(Q, K, V, p)
        for name in ("d_mu", "d_tau"):
            assert np.isfinite(getattr(a, name))
            assert relative_gap(getattr(a, name), getattr(f, name)) <= 1e-5
            assert relative_gap(getattr(a, name), getattr(c, name)) <= 1e-10

    def test_bad_path(self, qkv):
        Q, K, V = qkv(4, 2)
        with pytest.raises(ValueError):
            attention_param_grads(Q, K, V, HypeHeadParams(0.1), path="autodiff")


def test_relative_gap():
    assert relative_gap(0.0, 0.0) == 0.0
    assert relative_gap(1.0, 1.0 + 1e-6) == pytest.approx(1e-6 / (1 + 1e-6), rel=1e-9)
