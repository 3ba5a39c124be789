"""Shared brute-force oracles, deliberately loop-based and independent of
the vectorized library code they check."""

import numpy as np
import pytest


def brute_force_windowed_products(channels: np.ndarray, q: int) -> np.ndarray:
    """Quadruple-loop windowed channel inner products, circular indexing."""
    c, m, n = channels.shape
    alpha = (q - 1) // 2
    out = np.zeros((m, n, m, n))
    for i in range(m):
        for j in range(n):
            for i2 in range(m):
                for j2 in range(n):
                    total = 0.0
                    for a in range(-alpha, alpha + 1):
                        for b in range(-alpha, alpha + 1):
                            total += float(
                                channels[:, (i + a) % m, (j + b) % n]
                                @ channels[:, (i2 + a) % m, (j2 + b) % n])
                    out[i, j, i2, j2] = total
    return out


def relu_dual_reference(xi: float) -> float:
    xi = min(1.0, max(-1.0, xi))
    return (xi * (np.pi - np.arccos(xi)) + np.sqrt(max(0.0, 1 - xi * xi))) / np.pi


def relu_dual_derivative_reference(xi: float) -> float:
    xi = min(1.0, max(-1.0, xi))
    return (np.pi - np.arccos(xi)) / np.pi


def brute_force_one_hidden_layer(sigma0: np.ndarray, q: int) -> np.ndarray:
    """Loop transcription of the one-hidden-layer kernel: dual transform of
    the windowed correlations, then the window sum of sigma + sigma_dot * k."""
    m, n = sigma0.shape[:2]
    alpha = (q - 1) // 2
    sig1 = np.zeros_like(sigma0)
    sig1d = np.zeros_like(sigma0)
    for i in range(m):
        for j in range(n):
            for i2 in range(m):
                for j2 in range(n):
                    norm = np.sqrt(sigma0[i, j, i, j] * sigma0[i2, j2, i2, j2])
                    xi = sigma0[i, j, i2, j2] / norm
                    sig1[i, j, i2, j2] = norm * relu_dual_reference(xi) / q ** 2
                    sig1d[i, j, i2, j2] = relu_dual_derivative_reference(xi) / q ** 2
    out = np.zeros_like(sigma0)
    for i in range(m):
        for j in range(n):
            for i2 in range(m):
                for j2 in range(n):
                    total = 0.0
                    for a in range(-alpha, alpha + 1):
                        for b in range(-alpha, alpha + 1):
                            u = ((i + a) % m, (j + b) % n, (i2 + a) % m, (j2 + b) % n)
                            total += sig1[u] + sig1d[u] * sigma0[u]
                    out[i, j, i2, j2] = total
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
