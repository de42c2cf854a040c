"""Composite quadrature on the uniform grid x_i = i * dx of [0, 1].

Every integral over [0, x_i] uses composite Simpson when i is even. For odd
i >= 3 the last three intervals use the Simpson 3/8 rule, which keeps every
row fourth-order; a single interval (i = 1) falls back to the trapezoid rule.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def rule_weights(m: int, dx: float) -> np.ndarray:
    """Weights for integrating samples f_0..f_m over [0, m * dx]."""
    w = np.zeros(m + 1)
    if m == 0:
        return w
    if m == 1:
        w[:] = 0.5 * dx
        return w
    if m % 2 == 0:
        simpson_end = m
    else:
        simpson_end = m - 3
    if simpson_end > 0:
        w[0:simpson_end + 1:2] += 2.0
        w[1:simpson_end:2] += 4.0
        w[0] -= 1.0
        w[simpson_end] -= 1.0
        w[: simpson_end + 1] *= dx / 3.0
    if m % 2 == 1:
        w[m - 3 : m + 1] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * dx / 8.0)
    return w


@lru_cache(maxsize=32)
def _volterra_weights(N: int, dx: float) -> np.ndarray:
    W = np.zeros((N + 1, N + 1))
    for i in range(1, N + 1):
        W[i, : i + 1] = rule_weights(i, dx)
    W.setflags(write=False)
    return W


def volterra_weights(N: int, dx: float) -> np.ndarray:
    """Lower-triangular W with (W f)_i ~ integral of f over [0, x_i]."""
    return _volterra_weights(int(N), float(dx))


def volterra_operator(kernel: np.ndarray, dx: float) -> np.ndarray:
    """Matrix of f -> (integral_0^{x_i} kernel(x_i, y) f(y) dy)_i."""
    kernel = np.asarray(kernel, dtype=float)
    N = kernel.shape[0] - 1
    return volterra_weights(N, dx) * kernel


def integrate(f, dx: float) -> float | np.ndarray:
    """Integral over [0, 1] of samples f along axis 0."""
    f = np.asarray(f, dtype=float)
    w = rule_weights(f.shape[0] - 1, dx)
    return np.tensordot(w, f, axes=(0, 0))


def norm_sq(f, dx: float) -> float:
    """Squared L2(0, 1) norm of grid samples."""
    f = np.asarray(f, dtype=float)
    return float(integrate(f * f, dx))


def derivative(f, dx: float) -> np.ndarray:
    """Second-order finite-difference derivative of grid samples."""
    return np.gradient(np.asarray(f, dtype=float), dx, edge_order=2)
