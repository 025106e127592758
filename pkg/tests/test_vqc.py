"""Variational circuit block: closed-form fixed points, dense-matrix oracle
agreement, and exact gradients versus central finite differences."""
from __future__ import annotations

import numpy as np
import pytest

from qvuln.qsim import apply_gate, expect_z, h, init_state, ry
from qvuln.vqc import (
    EvalCounter,
    VqcParams,
    init_vqc_params,
    vqc_forward,
    vqc_gradients,
    zeros_like_params,
)

import dense_oracle

FD_STEP = 1e-5


def manual_params(d_in: int = 4) -> VqcParams:
    return VqcParams(
        in_proj=np.zeros((4, d_in)),
        bias=np.zeros(4),
        angles=np.zeros((2, 4, 3)),
        out_scale=np.array(1.0),
        out_shift=np.array(0.0),
    )


def random_params(rng: np.random.Generator, d_in: int) -> VqcParams:
    params = init_vqc_params(d_in, rng)
    params.bias = rng.uniform(-0.5, 0.5, size=4)
    params.angles = rng.uniform(-np.pi, np.pi, size=(2, 4, 3))
    params.out_scale = np.array(rng.uniform(0.5, 2.0))
    params.out_shift = np.array(rng.uniform(-0.5, 0.5))
    return params


def fd_gradient(params: VqcParams, x: np.ndarray, upstream: np.ndarray, array: np.ndarray) -> np.ndarray:
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + FD_STEP
        hi = float(upstream @ vqc_forward(params, x).values)
        flat[j] = orig - FD_STEP
        lo = float(upstream @ vqc_forward(params, x).values)
        flat[j] = orig
        grad.reshape(-1)[j] = (hi - lo) / (2 * FD_STEP)
    return grad


class TestForward:
    def test_zero_fixed_point(self):
        out = vqc_forward(manual_params(), np.zeros(4))
        np.testing.assert_allclose(out.values, np.zeros(4), atol=1e-15)

    def test_identity_projection_example(self):
        # encoding alone would leave qubit 0 at -sin(0.5); the ring's final
        # CNOT (3 -> 0) has a |+> control, which zeroes that expectation
        params = manual_params()
        params.in_proj = np.eye(4)
        x = np.array([np.tan(0.5), 0.0, 0.0, 0.0])
        out = vqc_forward(params, x)

        enc_only = dense_oracle.encode_state(x)
        assert abs(dense_oracle.z_expectation(enc_only, 0, 4) - (-np.sin(0.5))) < 1e-12

        oracle = dense_oracle.circuit_expectations(x, np.zeros((2, 4, 3)))
        np.testing.assert_allclose(out.values, oracle, atol=1e-12)
        assert abs(out.values[0]) < 1e-12

    def test_pre_scaling_expectations_bounded(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            params = random_params(rng, 5)
            out = vqc_forward(params, rng.uniform(-3, 3, size=5))
            assert np.all(np.abs(out.cache.expectations) <= 1.0 + 1e-12)

    def test_scale_and_shift_applied(self):
        rng = np.random.default_rng(2)
        params = random_params(rng, 3)
        x = rng.uniform(-1, 1, size=3)
        e = vqc_forward(params, x).cache.expectations
        params.out_scale = np.array(3.0)
        params.out_shift = np.array(10.0)
        np.testing.assert_allclose(vqc_forward(params, x).values, 3.0 * e + 10.0, atol=1e-14)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            d_in = int(rng.integers(2, 7))
            params = random_params(rng, d_in)
            x = rng.uniform(-2, 2, size=d_in)
            out = vqc_forward(params, x)
            a = params.in_proj @ x + params.bias
            oracle = float(params.out_scale) * dense_oracle.circuit_expectations(
                a, params.angles
            ) + float(params.out_shift)
            np.testing.assert_allclose(out.values, oracle, atol=1e-10)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        params = random_params(rng, 4)
        x = rng.uniform(-1, 1, size=4)
        first = vqc_forward(params, x).values
        second = vqc_forward(params, x).values
        assert np.array_equal(first, second)

    def test_input_shape_error(self):
        with pytest.raises(ValueError):
            vqc_forward(manual_params(d_in=4), np.zeros(3))


class TestGradients:
    def test_parameter_shift_identity_on_single_qubit(self):
        # d<Z>/dtheta at theta = pi/2 equals (cos(pi) - cos(0)) / 2 = -1
        shifted = []
        for sign in (1.0, -1.0):
            state = apply_gate(init_state(1), ry(np.pi / 2 + sign * np.pi / 2, 0))
            shifted.append(expect_z(state, 0))
        assert abs((shifted[0] - shifted[1]) / 2.0 + 1.0) < 1e-12

    def test_zero_upstream(self):
        rng = np.random.default_rng(7)
        params = random_params(rng, 4)
        grads, dx = vqc_gradients(params, rng.uniform(-1, 1, size=4), np.zeros(4))
        for arr in grads.tree().values():
            assert np.all(arr == 0)
        assert np.all(dx == 0)

    def test_shift_gradient_is_upstream_sum(self):
        rng = np.random.default_rng(8)
        params = random_params(rng, 4)
        x = rng.uniform(-1, 1, size=4)
        upstream = np.array([1.0, 1.0, 1.0, 1.0])
        grads, _ = vqc_gradients(params, x, upstream)
        assert float(grads.out_shift) == 4.0
        expected_scale = float(upstream @ vqc_forward(params, x).cache.expectations)
        assert abs(float(grads.out_scale) - expected_scale) < 1e-12

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(31)
        for _ in range(6):
            d_in = int(rng.integers(2, 7))
            params = random_params(rng, d_in)
            x = rng.uniform(-2, 2, size=d_in)
            upstream = rng.uniform(-1, 1, size=4)
            grads, dx = vqc_gradients(params, x, upstream)
            for name, arr in grads.tree().items():
                fd = fd_gradient(params, x, upstream, getattr(params, name))
                np.testing.assert_allclose(arr, fd, atol=1e-6, err_msg=name)
            fd_x = np.zeros_like(x)
            for j in range(x.size):
                orig = x[j]
                x[j] = orig + FD_STEP
                hi = float(upstream @ vqc_forward(params, x).values)
                x[j] = orig - FD_STEP
                lo = float(upstream @ vqc_forward(params, x).values)
                x[j] = orig
                fd_x[j] = (hi - lo) / (2 * FD_STEP)
            np.testing.assert_allclose(dx, fd_x, atol=1e-6)

    def test_input_shape_error(self):
        with pytest.raises(ValueError):
            vqc_gradients(manual_params(d_in=4), np.zeros(5), np.ones(4))


class TestEvalCounter:
    def test_forward_counts_one(self):
        counter = EvalCounter()
        vqc_forward(manual_params(), np.zeros(4), counter)
        assert counter.count == 1

    def test_gradients_count_sixty_five(self):
        # 32 rotation slots, two shifted rows each, plus one unshifted row
        rng = np.random.default_rng(12)
        params = random_params(rng, 4)
        counter = EvalCounter()
        vqc_gradients(params, np.ones(4), np.ones(4), counter)
        assert counter.count == 65


class TestInit:
    def test_shapes_and_ranges(self):
        rng = np.random.default_rng(42)
        params = init_vqc_params(6, rng)
        assert params.in_proj.shape == (4, 6)
        assert params.d_in == 6
        assert np.all(params.bias == 0)
        assert params.angles.shape == (2, 4, 3)
        k = 1.0 / np.sqrt(6)
        assert np.all(np.abs(params.in_proj) <= k)
        assert np.all(np.abs(params.angles) <= 0.1 * np.pi)
        assert float(params.out_scale) == 1.0
        assert float(params.out_shift) == 0.0

    def test_seeded_reproducibility(self):
        a = init_vqc_params(4, np.random.default_rng(9))
        b = init_vqc_params(4, np.random.default_rng(9))
        for name, arr in a.tree().items():
            assert np.array_equal(arr, b.tree()[name])

    def test_zeros_like(self):
        params = init_vqc_params(3, np.random.default_rng(1))
        zeros = zeros_like_params(params)
        for arr in zeros.tree().values():
            assert np.all(arr == 0)
        assert zeros.in_proj.shape == params.in_proj.shape
