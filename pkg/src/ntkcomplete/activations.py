"""Dual activations and the depth-d kernel scalar recursion.

The dual of an activation phi is the normalized Gaussian expectation
xi -> c^2 E[phi(u) phi(v)] over standard bivariate Gaussians with
correlation xi, with c chosen so the dual equals 1 at xi = 1.  For the
homogeneous activations supported here the dual has a closed form, and
the depth-d kernel scalar follows the recursion

    kappa_d(xi) = dual^(d)(xi) + kappa_{d-1}(xi) * dual'(dual^(d-1)(xi))

with kappa_0(xi) = xi and dual^(h) the h-fold composition of the dual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# Gram entries of unit vectors routinely exceed 1 by a few ulps; clamp
# instead of erroring within this tolerance.
XI_TOLERANCE = 1e-7

_KINDS = ("relu", "leaky_relu", "linear")


@dataclass(frozen=True)
class Activation:
    """A homogeneous elementwise nonlinearity.

    kind is one of "relu", "leaky_relu", "linear"; slope is the negative-side
    slope and is present exactly for leaky_relu (0 <= slope < 1).
    """

    kind: str
    slope: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "leaky_relu":
            if self.slope is None or not 0.0 <= self.slope < 1.0:
                raise ValueError("leaky_relu requires 0 <= slope < 1")
        elif self.slope is not None:
            raise ValueError(f"{self.kind} takes no slope")

    @staticmethod
    def relu() -> "Activation":
        return Activation("relu")

    @staticmethod
    def leaky_relu(slope: float) -> "Activation":
        return Activation("leaky_relu", slope)

    @staticmethod
    def linear() -> "Activation":
        return Activation("linear")

    def __str__(self) -> str:
        if self.kind == "leaky_relu":
            return f"leaky_relu(slope={self.slope})"
        return self.kind


def _clamp(xi):
    xi = np.asarray(xi, dtype=np.float64)
    if np.any(np.abs(xi) > 1.0 + XI_TOLERANCE):
        worst = float(np.max(np.abs(xi)))
        raise DomainError(
            f"correlation {worst} outside [-1-{XI_TOLERANCE}, 1+{XI_TOLERANCE}]"
        )
    return np.clip(xi, -1.0, 1.0)


def _relu_dual(xi: np.ndarray) -> np.ndarray:
    return (xi * (np.pi - np.arccos(xi)) + np.sqrt(np.maximum(0.0, 1.0 - xi * xi))) / np.pi


def _relu_dual_derivative(xi: np.ndarray) -> np.ndarray:
    return (np.pi - np.arccos(xi)) / np.pi


def dual(act: Activation, xi):
    """Evaluate the dual activation at correlation xi (scalar or array).

    The leaky_relu dual follows from writing phi = (1-a)*relu + a*id and
    expanding the Gaussian expectation bilinearly: E[relu(u) relu(v)] is
    half the relu dual, E[relu(u) v] = xi/2, E[uv] = xi.  Normalizing so
    the value at 1 is 1 divides by (1 + a^2)/2.
    """
    xi = _clamp(xi)
    if act.kind == "linear":
        out = xi
    elif act.kind == "relu":
        out = _relu_dual(xi)
    else:
        a = act.slope
        out = ((1.0 - a) ** 2 * _relu_dual(xi) + 2.0 * a * xi) / (1.0 + a * a)
    return out if out.ndim else float(out)


def dual_derivative(act: Activation, xi):
    """Derivative of the dual activation at correlation xi."""
    xi = _clamp(xi)
    if act.kind == "linear":
        out = np.ones_like(xi)
    elif act.kind == "relu":
        out = _relu_dual_derivative(xi)
    else:
        a = act.slope
        out = ((1.0 - a) ** 2 * _relu_dual_derivative(xi) + 2.0 * a) / (1.0 + a * a)
    return out if out.ndim else float(out)


def iterated_dual(act: Activation, h: int, xi):
    """h-fold composition of the dual; h = 0 returns xi unchanged."""
    if h < 0:
        raise ValueError("composition count must be nonnegative")
    out = _clamp(xi)
    for _ in range(h):
        out = dual(act, out)
        out = np.asarray(out, dtype=np.float64)
    return out if out.ndim else float(out)


def kappa(act: Activation, d: int, xi):
    """Depth-d kernel scalar kappa_d(xi) for a d-hidden-layer network."""
    if d < 1:
        raise ValueError("depth must be at least 1")
    it = _clamp(xi)  # dual^(h-1) at the start of step h
    k = it.copy()
    for _ in range(d):
        k = dual(act, it) + k * dual_derivative(act, it)
        it = np.asarray(dual(act, it), dtype=np.float64)
    return k if np.ndim(k) else float(k)
