"""Backstepping kernels of the two Volterra transforms and their inverses.

Direct transform (X, u) -> (X, w) uses gamma(x) and k(x, y); its inverse uses
psi(x) and n(x, y). The second transform (X, w) -> (X, z) uses q(x, y) and
its inverse l(x, y). All tables live on the uniform grid x_i = i * dx and the
two-dimensional ones are stored as (N+1, N+1) arrays that are zero above the
diagonal (only 0 <= y_j <= x_i is meaningful).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .plant import DesignGains, PlantParams, grid_size
from .special import bessel_ratio_series, expm

DEFAULT_DX = 0.04
DEFAULT_QUAD_TOL = 1e-7


class QuadratureResolutionError(ValueError):
    """Kernel quadrature cannot meet the requested tolerance on this grid."""

    def __init__(self, message, required_dx):
        super().__init__(message)
        self.required_dx = required_dx


def _block_generator(Abar: np.ndarray) -> np.ndarray:
    n = Abar.shape[0]
    M = np.zeros((2 * n, 2 * n))
    M[:n, n:] = Abar
    M[n:, :n] = np.eye(n)
    return M


def _row_exponential(K: np.ndarray, Abar: np.ndarray, xs) -> tuple[np.ndarray, np.ndarray]:
    """Rows K cosh-type solution of f'' = f Abar, f(0) = K, f'(0) = 0, and f'."""
    n = Abar.shape[0]
    M = _block_generator(Abar)
    left = np.hstack([K, np.zeros((1, n))])
    left_d = left @ M
    vals = np.empty((len(xs), n))
    ders = np.empty((len(xs), n))
    for i, x in enumerate(xs):
        E = expm(M * x)[:, :n]
        vals[i] = (left @ E)[0]
        ders[i] = (left_d @ E)[0]
    return vals, ders


def compute_gamma_psi(plant: PlantParams, gains: DesignGains, xs):
    """Sample gamma, gamma', psi, psi' at the points ``xs``.

    gamma solves gamma'' = gamma (A - aI) and psi solves
    psi'' = psi (A + BK - aI), both with value K and zero slope at x = 0.

    Returns
    -------
    gamma, gamma_prime, psi, psi_prime : ndarray, shape (len(xs), n)
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1:
        raise ValueError("grid must be one-dimensional")
    if np.any(np.diff(xs) < 0) or (xs.size and (xs[0] < 0 or xs[-1] > 1)):
        raise ValueError("grid must be sorted inside [0, 1]")
    n = plant.n
    I = np.eye(n)
    Acl = gains.closed_loop(plant)
    gamma, gamma_p = _row_exponential(gains.K, plant.A - plant.a * I, xs)
    psi, psi_p = _row_exponential(gains.K, Acl - plant.a * I, xs)
    return gamma, gamma_p, psi, psi_p


def _cumulative_simpson(f_half: np.ndarray, dx: float) -> np.ndarray:
    """Cumulative integral at x_m = m*dx from samples on the half-step grid."""
    left = f_half[0:-1:2]
    mid = f_half[1::2]
    right = f_half[2::2]
    pieces = (dx / 6.0) * (left + 4.0 * mid + right)
    out = np.zeros((pieces.shape[0] + 1,) + pieces.shape[1:])
    out[1:] = np.cumsum(pieces, axis=0)
    return out


def _toeplitz_lower(values: np.ndarray) -> np.ndarray:
    """T[i, j] = values[i - j] for j <= i, zero above the diagonal."""
    N1 = values.shape[0]
    i, j = np.indices((N1, N1))
    T = np.where(j <= i, values[np.clip(i - j, 0, N1 - 1)], 0.0)
    return T


def compute_k_n(gamma_half, psi_half, plant: PlantParams, dx: float,
                tol: float = DEFAULT_QUAD_TOL):
    """k(x, y) = int_0^{x-y} gamma(s) B ds and n(x, y) likewise with psi.

    ``gamma_half`` and ``psi_half`` are samples on the half-step grid
    s_m = m * dx / 2, m = 0..2N, so every grid interval gets its own Simpson
    panel. Since k depends only on x - y the tables are lower Toeplitz;
    k_x(x, y) = gamma(x - y) B exactly.

    Raises
    ------
    QuadratureResolutionError
        If the Richardson estimate of the quadrature error exceeds ``tol``
        relative to the kernel scale.
    """
    gamma_half = np.asarray(gamma_half, dtype=float)
    psi_half = np.asarray(psi_half, dtype=float)
    if gamma_half.shape[0] % 2 != 1 or psi_half.shape != gamma_half.shape:
        raise ValueError("half-step samples must have 2N + 1 rows for both kernels")
    B = plant.B[:, 0]
    out = []
    for f_half in (gamma_half, psi_half):
        g = f_half @ B
        fine = _cumulative_simpson(g, dx)
        # coarse Simpson with step dx on even nodes for the error estimate
        on_grid = g[::2]
        even = 2 * ((on_grid.shape[0] - 1) // 2)
        err = 0.0
        if even >= 2:
            coarse = _cumulative_simpson(on_grid[: even + 1], 2.0 * dx)
            err = float(np.max(np.abs(fine[: even + 1 : 2] - coarse))) / 15.0
        scale = max(np.max(np.abs(fine)), 1.0)
        if err > tol * scale:
            required = dx * (tol * scale / err) ** 0.25
            raise QuadratureResolutionError(
                f"kernel quadrature error {err:.3g} exceeds tolerance {tol * scale:.3g}; "
                f"use dx <= {required:.4g}",
                required_dx=required,
            )
        out.append((_toeplitz_lower(fine), _toeplitz_lower(g[::2])))
    (k, kx), (nn, nx) = out
    return k, kx, nn, nx


def q_l_point(a_plus_c: float, x, y):
    """q, q_x, l, l_x at points (x, y) with 0 <= y <= x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam = float(a_plus_c)
    s = lam * (x * x - y * y)
    G_pos = bessel_ratio_series(s)
    G_neg = bessel_ratio_series(-s)
    dG_pos = bessel_ratio_series(s, derivative=True)
    dG_neg = bessel_ratio_series(-s, derivative=True)
    q = -0.5 * lam * x * G_pos
    l = -0.5 * lam * x * G_neg
    qx = -0.5 * lam * (G_pos + 2.0 * lam * x * x * dG_pos)
    lx = -0.5 * lam * (G_neg - 2.0 * lam * x * x * dG_neg)
    return q, qx, l, lx


def q_l_y_derivative(a_plus_c: float, x, y):
    """q_y and l_y, used by the boundary-condition diagnostics."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam = float(a_plus_c)
    s = lam * (x * x - y * y)
    qy = lam * lam * x * y * bessel_ratio_series(s, derivative=True)
    ly = -lam * lam * x * y * bessel_ratio_series(-s, derivative=True)
    return qy, ly


def compute_q_l(a: float, c: float, xs):
    """Tables of q, q_x, l, l_x on the triangle of the grid ``xs``.

    q(x, y) = -(a+c) x I1(sqrt(s)) / sqrt(s) and l likewise with J1, where
    s = (a+c)(x^2 - y^2); both are evaluated as power series in s so a
    negative a + c needs no special branch.
    """
    xs = np.asarray(xs, dtype=float)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    lower = Y <= X + 1e-15
    Yc = np.where(lower, Y, X)
    q, qx, l, lx = q_l_point(a + c, X, Yc)
    return tuple(np.where(lower, t, 0.0) for t in (q, qx, l, lx))


@dataclass(frozen=True)
class KernelSet:
    """Sampled kernels on the grid x_i = i * dx (immutable)."""

    dx: float
    x: np.ndarray
    gamma: np.ndarray
    gamma_prime: np.ndarray
    psi: np.ndarray
    psi_prime: np.ndarray
    k: np.ndarray
    kx: np.ndarray
    n_: np.ndarray
    nx: np.ndarray
    q: np.ndarray
    qx: np.ndarray
    l: np.ndarray
    lx: np.ndarray
    plant: PlantParams | None = field(default=None, compare=False, repr=False)
    gains: DesignGains | None = field(default=None, compare=False, repr=False)

    TABLES = ("gamma", "gamma_prime", "psi", "psi_prime", "k", "kx", "n_", "nx",
              "q", "qx", "l", "lx")

    def __post_init__(self):
        for name in self.TABLES + ("x",):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def N(self) -> int:
        return self.x.shape[0] - 1

    @property
    def n_state(self) -> int:
        return self.gamma.shape[1]

    @property
    def a_plus_c(self) -> float:
        # q(x, x) = -(a + c) x / 2
        return float(-2.0 * self.q[-1, -1] / self.x[-1]) if self.x[-1] > 0 else 0.0

    def refined(self, factor: int = 2) -> "KernelSet":
        """Recompute on a grid ``factor`` times finer (needs plant and gains)."""
        if self.plant is None or self.gains is None:
            raise ValueError("refinement needs the generating plant and gains")
        return compute_kernels(self.plant, self.gains, self.dx / factor)

    def with_table(self, name: str, values) -> "KernelSet":
        """Copy with one table replaced (used to inject faults in diagnostics)."""
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d[name] = np.asarray(values, dtype=float)
        return KernelSet(**d)

    def to_dict(self) -> dict:
        d = {
            "dx": self.dx,
            "grids": {"x": self.x.tolist()},
            "tables": {name: getattr(self, name).tolist() for name in self.TABLES},
        }
        if self.plant is not None and self.gains is not None:
            d["parameters"] = {"plant": self.plant.to_dict(), "gains": self.gains.to_dict()}
        return d

    def to_json(self, path=None, **kwargs) -> str:
        text = json.dumps(self.to_dict(), **kwargs)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSet":
        tables = {name: np.asarray(d["tables"][name], dtype=float) for name in cls.TABLES}
        plant = gains = None
        if "parameters" in d:
            plant = PlantParams.from_dict(d["parameters"]["plant"])
            gains = DesignGains.from_dict(d["parameters"]["gains"])
        x = np.asarray(d["grids"]["x"], dtype=float)
        for name in ("gamma", "gamma_prime", "psi", "psi_prime"):
            tables[name] = tables[name].reshape(x.shape[0], -1)
        return cls(dx=float(d["dx"]), x=x, plant=plant, gains=gains, **tables)

    @classmethod
    def from_json(cls, source) -> "KernelSet":
        if hasattr(source, "read"):
            return cls.from_dict(json.load(source))
        text = str(source)
        if text.lstrip().startswith("{"):
            return cls.from_dict(json.loads(text))
        with open(text) as fh:
            return cls.from_dict(json.load(fh))


def compute_kernels(plant: PlantParams, gains: DesignGains, dx: float = DEFAULT_DX,
                    tol: float = DEFAULT_QUAD_TOL) -> KernelSet:
    """All kernel tables for ``plant`` and ``gains`` on the grid of step ``dx``."""
    N = grid_size(dx)
    gains.closed_loop(plant)  # shape check
    xs = np.linspace(0.0, 1.0, N + 1)
    half = np.linspace(0.0, 1.0, 2 * N + 1)
    g_h, gp_h, p_h, pp_h = compute_gamma_psi(plant, gains, half)
    k, kx, nn, nx = compute_k_n(g_h, p_h, plant, dx, tol=tol)
    q, qx, l, lx = compute_q_l(plant.a, gains.c, xs)
    return KernelSet(
        dx=float(dx), x=xs,
        gamma=g_h[::2], gamma_prime=gp_h[::2], psi=p_h[::2], psi_prime=pp_h[::2],
        k=k, kx=kx, n_=nn, nx=nx, q=q, qx=qx, l=l, lx=lx,
        plant=plant, gains=gains,
    )


def _second_diff(f: np.ndarray, dx: float) -> np.ndarray:
    return (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (dx * dx)


def _pde_residual(T: np.ndarray, dx: float, coeff: float) -> float:
    """max |T_xx - T_yy - coeff * T| over interior triangle nodes."""
    N = T.shape[0] - 1
    worst = 0.0
    for i in range(2, N):
        j = np.arange(1, i - 1 + 1)
        j = j[j <= i - 1]
        if j.size == 0:
            continue
        Txx = (T[i + 1, j] - 2 * T[i, j] + T[i - 1, j]) / dx**2
        Tyy = (T[i, j + 1] - 2 * T[i, j] + T[i, j - 1]) / dx**2
        worst = max(worst, float(np.max(np.abs(Txx - Tyy - coeff * T[i, j]))))
    return worst


def _y_derivative_at_zero(T: np.ndarray, dx: float) -> np.ndarray:
    """One-sided second-order d/dy at y = 0 for rows i >= 2."""
    return (-3.0 * T[2:, 0] + 4.0 * T[2:, 1] - T[2:, 2]) / (2.0 * dx)


def verify_kernel_pdes(kernels: KernelSet, plant: PlantParams, gains: DesignGains) -> dict:
    """Residuals of the kernel equations on the sampled tables.

    Returns a dict of max-abs residuals: ODE residuals of gamma and psi,
    interior PDE residuals of k, n, q, l, boundary-condition violations at
    y = 0, diagonal-identity violations and derivative-consistency gaps
    (centered differences against the stored x-derivatives). Interior and
    boundary entries are O(dx^2); diagonal entries are exact up to rounding.
    """
    dx = kernels.dx
    n = plant.n
    I = np.eye(n)
    B = plant.B[:, 0]
    x = kernels.x
    lam = plant.a + gains.c
    Abar_g = plant.A - plant.a * I
    Abar_p = gains.closed_loop(plant) - plant.a * I
    g, gp, p, pp = kernels.gamma, kernels.gamma_prime, kernels.psi, kernels.psi_prime
    rep = {}
    rep["gamma_ode"] = float(np.max(np.abs(_second_diff(g, dx) - g[1:-1] @ Abar_g)))
    rep["psi_ode"] = float(np.max(np.abs(_second_diff(p, dx) - p[1:-1] @ Abar_p)))
    rep["gamma_initial"] = float(max(np.max(np.abs(g[0] - gains.K[0])), np.max(np.abs(gp[0]))))
    rep["psi_initial"] = float(max(np.max(np.abs(p[0] - gains.K[0])), np.max(np.abs(pp[0]))))
    rep["k_pde"] = _pde_residual(kernels.k, dx, 0.0)
    rep["n_pde"] = _pde_residual(kernels.n_, dx, 0.0)
    rep["q_pde"] = _pde_residual(kernels.q, dx, lam)
    rep["l_pde"] = _pde_residual(kernels.l, dx, -lam)
    rep["k_boundary"] = float(np.max(np.abs(_y_derivative_at_zero(kernels.k, dx) + g[2:] @ B)))
    rep["n_boundary"] = float(np.max(np.abs(_y_derivative_at_zero(kernels.n_, dx) + p[2:] @ B)))
    rep["q_boundary"] = float(np.max(np.abs(_y_derivative_at_zero(kernels.q, dx))))
    rep["l_boundary"] = float(np.max(np.abs(_y_derivative_at_zero(kernels.l, dx))))
    diag = np.diag_indices_from(kernels.k)
    target = -0.5 * lam * x
    rep["k_diagonal"] = float(np.max(np.abs(kernels.k[diag])))
    rep["n_diagonal"] = float(np.max(np.abs(kernels.n_[diag])))
    rep["q_diagonal"] = float(np.max(np.abs(kernels.q[diag] - target)))
    rep["l_diagonal"] = float(np.max(np.abs(kernels.l[diag] - target)))
    cd = lambda f: (f[2:] - f[:-2]) / (2 * dx)  # noqa: E731
    rep["gamma_derivative"] = float(np.max(np.abs(cd(g) - gp[1:-1])))
    rep["psi_derivative"] = float(np.max(np.abs(cd(p) - pp[1:-1])))
    N = kernels.N
    kx_gap = qx_gap = lx_gap = 0.0
    for j in range(0, N - 1):
        i = np.arange(j + 1, N)
        kx_gap = max(kx_gap, float(np.max(np.abs((kernels.k[i + 1, j] - kernels.k[i - 1, j]) / (2 * dx) - kernels.kx[i, j]))))
        qx_gap = max(qx_gap, float(np.max(np.abs((kernels.q[i + 1, j] - kernels.q[i - 1, j]) / (2 * dx) - kernels.qx[i, j]))))
        lx_gap = max(lx_gap, float(np.max(np.abs((kernels.l[i + 1, j] - kernels.l[i - 1, j]) / (2 * dx) - kernels.lx[i, j]))))
    rep["kx_derivative"] = kx_gap
    rep["qx_derivative"] = qx_gap
    rep["lx_derivative"] = lx_gap
    return rep


DIAGONAL_KEYS = ("k_diagonal", "n_diagonal", "q_diagonal", "l_diagonal")


def kernel_scale(kernels: KernelSet) -> float:
    """Magnitude used to normalise residuals (largest table entry, at least 1)."""
    return float(max(1.0, *(np.max(np.abs(getattr(kernels, t))) for t in KernelSet.TABLES)))
