import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntkcomplete.activations import (Activation, dual, dual_derivative,
                                     iterated_dual, kappa)
from ntkcomplete.errors import DomainError

RELU = Activation.relu()
LINEAR = Activation.linear()


def test_relu_dual_exact_values():
    assert dual(RELU, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert dual(RELU, 0.0) == pytest.approx(1.0 / math.pi, abs=1e-15)
    assert dual(RELU, -1.0) == pytest.approx(0.0, abs=1e-15)


def test_relu_dual_derivative_exact_values():
    assert dual_derivative(RELU, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert dual_derivative(RELU, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert dual_derivative(RELU, -1.0) == pytest.approx(0.0, abs=1e-15)


def test_linear_dual_is_identity():
    assert dual(LINEAR, 0.37) == 0.37
    assert dual_derivative(LINEAR, -0.8) == 1.0


def test_clamp_within_tolerance():
    assert dual(RELU, 1.0 + 5e-8) == pytest.approx(1.0)
    assert dual(RELU, -1.0 - 5e-8) == pytest.approx(0.0)


def test_domain_error_beyond_tolerance():
    with pytest.raises(DomainError):
        dual(RELU, 1.0 + 1e-6)
    with pytest.raises(DomainError):
        dual_derivative(RELU, -1.001)


def test_iterated_dual():
    assert iterated_dual(RELU, 0, 0.5) == 0.5
    assert iterated_dual(RELU, 2, 1.0) == pytest.approx(1.0, abs=1e-15)
    manual = dual(RELU, dual(RELU, 0.0))
    assert iterated_dual(RELU, 2, 0.0) == pytest.approx(manual, abs=1e-15)
    assert iterated_dual(RELU, 2, 0.0) == pytest.approx(
        dual(RELU, 1.0 / math.pi), abs=1e-15)


def test_kappa_known_values():
    assert kappa(RELU, 1, 1.0) == pytest.approx(2.0, abs=1e-12)
    assert kappa(RELU, 1, 0.0) == pytest.approx(1.0 / math.pi, abs=1e-12)
    for xi in (-0.9, -0.25, 0.0, 0.6, 1.0):
        assert kappa(LINEAR, 1, xi) == pytest.approx(2 * xi, abs=1e-15)
        assert kappa(LINEAR, 3, xi) == pytest.approx(4 * xi, abs=1e-15)


def test_kappa_depth_at_fixed_point():
    for d in range(1, 6):
        assert kappa(RELU, d, 1.0) == pytest.approx(d + 1, abs=1e-12)


def test_kappa_vectorized_matches_scalar():
    xs = np.linspace(-1, 1, 11)
    vec = kappa(RELU, 3, xs)
    for x, v in zip(xs, vec):
        assert v == pytest.approx(kappa(RELU, 3, float(x)), abs=0)


def test_kappa_rejects_bad_depth():
    with pytest.raises(ValueError):
        kappa(RELU, 0, 0.5)


@given(st.floats(-1.0, 1.0))
def test_relu_dual_bounds(xi):
    value = dual(RELU, xi)
    assert 0.0 <= value <= 1.0


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_relu_dual_nondecreasing(a, b):
    lo, hi = sorted((a, b))
    assert dual(RELU, lo) <= dual(RELU, hi) + 1e-15


@settings(max_examples=25)
@given(st.floats(0.0, 0.95), st.floats(-1.0, 1.0))
def test_leaky_dual_normalized_at_one(slope, xi):
    act = Activation.leaky_relu(slope)
    assert dual(act, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert abs(dual(act, xi)) <= 1.0 + 1e-12


def _correlated_gaussians(xi, n, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n)
    v = xi * u + math.sqrt(1 - xi * xi) * rng.standard_normal(n)
    return u, v


@pytest.mark.parametrize("xi", [-1.0, -0.5, 0.0, 0.5, 1.0])
def test_relu_dual_monte_carlo(xi):
    u, v = _correlated_gaussians(xi, 1_000_000, seed=11)
    samples = 2.0 * np.maximum(u, 0) * np.maximum(v, 0)
    err = 3 * samples.std() / math.sqrt(len(samples))
    assert abs(samples.mean() - dual(RELU, xi)) <= max(err, 1e-12)


@pytest.mark.parametrize("xi", [-1.0, -0.5, 0.0, 0.5, 1.0])
@pytest.mark.parametrize("slope", [0.05, 0.3])
def test_leaky_dual_monte_carlo(xi, slope):
    act = Activation.leaky_relu(slope)
    u, v = _correlated_gaussians(xi, 1_000_000, seed=13)
    phi_u = np.where(u > 0, u, slope * u)
    phi_v = np.where(v > 0, v, slope * v)
    c2 = 2.0 / (1.0 + slope * slope)
    samples = c2 * phi_u * phi_v
    err = 3 * samples.std() / math.sqrt(len(samples))
    assert abs(samples.mean() - dual(act, xi)) <= max(err, 1e-12)
    d_u = np.where(u > 0, 1.0, slope)
    d_v = np.where(v > 0, 1.0, slope)
    dsamples = c2 * d_u * d_v
    derr = 3 * dsamples.std() / math.sqrt(len(dsamples))
    assert abs(dsamples.mean() - dual_derivative(act, xi)) <= max(derr, 1e-12)


def test_activation_validation():
    with pytest.raises(ValueError):
        Activation("relu", slope=0.1)
    with pytest.raises(ValueError):
        Activation.leaky_relu(1.0)
    with pytest.raises(ValueError):
        Activation("swish")
