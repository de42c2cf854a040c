"""Boundary feedback laws (Dirichlet and Neumann) with amplitude saturation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kernels import KernelSet
from .plant import DIRICHLET, NEUMANN, check_actuation
from .quadrature import integrate
from .transform import CoupledState, GridMismatchError, check_grid, operators


def saturate(U, u_bar):
    """sign(U) * min(|U|, u_bar)."""
    if not u_bar > 0:
        raise ValueError("u_bar must be positive")
    return np.clip(U, -u_bar, u_bar) if np.ndim(U) else float(min(max(U, -u_bar), u_bar))


def dirichlet_u(state: CoupledState, kernels: KernelSet) -> float:
    """U = int k(1,y) u dy + gamma(1) X + int q(1,y) w(y) dy, w = u_to_w(u)."""
    check_grid(state, kernels)
    dx = kernels.dx
    u = state.field.values
    w = operators(kernels).u_to_w(state.X, u)
    return float(
        integrate(kernels.k[-1] * u, dx)
        + kernels.gamma[-1] @ state.X
        + integrate(kernels.q[-1] * w, dx)
    )


def neumann_u(state: CoupledState, kernels: KernelSet) -> float:
    """U = int k_x(1,y) u dy + gamma'(1) X + q(1,1) w(1) + int q_x(1,y) w(y) dy."""
    check_grid(state, kernels)
    dx = kernels.dx
    u = state.field.values
    w = operators(kernels).u_to_w(state.X, u)
    return float(
        integrate(kernels.kx[-1] * u, dx)
        + kernels.gamma_prime[-1] @ state.X
        + kernels.q[-1, -1] * w[-1]
        + integrate(kernels.qx[-1] * w, dx)
    )


def dirichlet_u_target(state_z: CoupledState, kernels: KernelSet) -> float:
    """The Dirichlet law written in target coordinates (X, z).

    U = int n(1,y) [z + int_0^y l z] dy + psi(1) X + int l(1,y) z dy.
    """
    check_grid(state_z, kernels)
    dx = kernels.dx
    z = state_z.field.values
    w = operators(kernels).z_to_w(z)
    return float(
        integrate(kernels.n_[-1] * w, dx)
        + kernels.psi[-1] @ state_z.X
        + integrate(kernels.l[-1] * z, dx)
    )


def neumann_u_target(state_z: CoupledState, kernels: KernelSet) -> float:
    """The Neumann law in target coordinates.

    U = int n_x(1,y) [z + int_0^y l z] dy + psi'(1) X + l(1,1) z(1)
        + int l_x(1,y) z dy.
    """
    check_grid(state_z, kernels)
    dx = kernels.dx
    z = state_z.field.values
    w = operators(kernels).z_to_w(z)
    return float(
        integrate(kernels.nx[-1] * w, dx)
        + kernels.psi_prime[-1] @ state_z.X
        + kernels.l[-1, -1] * z[-1]
        + integrate(kernels.lx[-1] * z, dx)
    )


@dataclass(frozen=True)
class ControlLaw:
    actuation: str
    kernels: KernelSet
    u_bar: float = math.inf
    saturated: bool = True

    def __post_init__(self):
        object.__setattr__(self, "actuation", check_actuation(self.actuation))
        if not self.u_bar > 0:
            raise ValueError("u_bar must be positive")

    def unsaturated(self, state: CoupledState) -> float:
        if self.actuation == DIRICHLET:
            return dirichlet_u(state, self.kernels)
        return neumann_u(state, self.kernels)

    def __call__(self, state: CoupledState) -> float:
        U = self.unsaturated(state)
        return saturate(U, self.u_bar) if self.saturated else U

    @cached_property
    def gains(self) -> tuple[np.ndarray, np.ndarray]:
        """(g_X, g_u) with unsaturated U = g_X . X + g_u . u.

        Both laws are linear in the state, so the coefficients are read off
        by applying the literal law to unit vectors.
        """
        ks = self.kernels
        n, N = ks.n_state, ks.N
        zero_u = np.zeros(N + 1)
        gX = np.array([
            self.unsaturated(CoupledState.from_arrays(np.eye(n)[i], zero_u, ks.dx))
            for i in range(n)
        ])
        gu = np.array([
            self.unsaturated(CoupledState.from_arrays(np.zeros(n), np.eye(N + 1)[j], ks.dx))
            for j in range(N + 1)
        ])
        return gX, gu

    def evaluate(self, X, u) -> tuple[float, float]:
        """(unsaturated U, applied U) for raw arrays, using the cached gains."""
        gX, gu = self.gains
        if u.shape[0] != gu.shape[0]:
            raise GridMismatchError("field does not match the control-law grid")
        U = float(gX @ X + gu @ u)
        applied = saturate(U, self.u_bar) if self.saturated else U
        return U, applied


__all__ = [
    "ControlLaw", "DIRICHLET", "NEUMANN", "dirichlet_u", "dirichlet_u_target",
    "neumann_u", "neumann_u_target", "saturate",
]
