"""Volterra backstepping transforms on grid snapshots.

    w = u - int_0^x k(x, y) u(y) dy - gamma(x) X        (u -> w)
    u = w + int_0^x n(x, y) w(y) dy + psi(x) X          (w -> u)
    z = w - int_0^x q(x, y) w(y) dy                     (w -> z)
    w = z + int_0^x l(x, y) z(y) dy                     (z -> w)

The ODE state X passes through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kernels import KernelSet
from .quadrature import volterra_operator


class GridMismatchError(ValueError):
    """A field and a kernel set live on different grids."""


@dataclass(frozen=True)
class Field:
    dx: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        N = int(round(1.0 / self.dx))
        if values.shape[0] != N + 1:
            raise ValueError(
                f"field needs 1/dx + 1 = {N + 1} samples, got {values.shape[0]}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class CoupledState:
    X: np.ndarray
    field: Field

    def __post_init__(self):
        X = np.array(self.X, dtype=float).ravel()
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

    @classmethod
    def from_arrays(cls, X, values, dx: float) -> "CoupledState":
        return cls(X=X, field=Field(dx=dx, values=values))


class TransformOperators:
    """Precomputed quadrature matrices of the four transforms for one kernel set."""

    def __init__(self, kernels: KernelSet):
        self.kernels = kernels

    @cached_property
    def k_op(self):
        return volterra_operator(self.kernels.k, self.kernels.dx)

    @cached_property
    def n_op(self):
        return volterra_operator(self.kernels.n_, self.kernels.dx)

    @cached_property
    def q_op(self):
        return volterra_operator(self.kernels.q, self.kernels.dx)

    @cached_property
    def l_op(self):
        return volterra_operator(self.kernels.l, self.kernels.dx)

    def u_to_w(self, X, u):
        return u - self.k_op @ u - self.kernels.gamma @ X

    def w_to_u(self, X, w):
        return w + self.n_op @ w + self.kernels.psi @ X

    def w_to_z(self, w):
        return w - self.q_op @ w

    def z_to_w(self, z):
        return z + self.l_op @ z

    def u_to_z(self, X, u):
        return self.w_to_z(self.u_to_w(X, u))

    def z_to_u(self, X, z):
        return self.w_to_u(X, self.z_to_w(z))


_OPERATOR_CACHE: dict[int, TransformOperators] = {}


def operators(kernels: KernelSet) -> TransformOperators:
    key = id(kernels)
    ops = _OPERATOR_CACHE.get(key)
    if ops is None or ops.kernels is not kernels:
        ops = TransformOperators(kernels)
        if len(_OPERATOR_CACHE) > 16:
            _OPERATOR_CACHE.clear()
        _OPERATOR_CACHE[key] = ops
    return ops


def check_grid(state: CoupledState, kernels: KernelSet) -> None:
    if state.field.values.shape[0] != kernels.N + 1 or abs(state.field.dx - kernels.dx) > 1e-12:
        raise GridMismatchError(
            f"state grid (dx={state.field.dx}, {state.field.values.shape[0]} nodes) "
            f"does not match kernel grid (dx={kernels.dx}, {kernels.N + 1} nodes)"
        )
    if state.X.shape[0] != kernels.n_state:
        raise GridMismatchError(
            f"ODE state has dimension {state.X.shape[0]}, kernels expect {kernels.n_state}"
        )


def _wrap(state: CoupledState, values) -> CoupledState:
    return CoupledState(X=state.X, field=Field(dx=state.field.dx, values=values))


def u_to_w(state: CoupledState, kernels: KernelSet) -> CoupledState:
    check_grid(state, kernels)
    return _wrap(state, operators(kernels).u_to_w(state.X, state.field.values))


def w_to_u(state: CoupledState, kernels: KernelSet) -> CoupledState:
    check_grid(state, kernels)
    return _wrap(state, operators(kernels).w_to_u(state.X, state.field.values))


def w_to_z(state: CoupledState, kernels: KernelSet) -> CoupledState:
    check_grid(state, kernels)
    return _wrap(state, operators(kernels).w_to_z(state.field.values))


def z_to_w(state: CoupledState, kernels: KernelSet) -> CoupledState:
    check_grid(state, kernels)
    return _wrap(state, operators(kernels).z_to_w(state.field.values))


def u_to_z(state: CoupledState, kernels: KernelSet) -> CoupledState:
    return w_to_z(u_to_w(state, kernels), kernels)


def z_to_u(state: CoupledState, kernels: KernelSet) -> CoupledState:
    return w_to_u(z_to_w(state, kernels), kernels)
