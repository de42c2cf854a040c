"""Explicit finite-difference integration of the delayed ODE-heat cascade.

Interior nodes use forward Euler in time and centred second differences in
space. The free end x = 0 always carries u_x(0) = 0 through the ghost value
u_{-1} = u_1. At x = 1 the saturated control is either imposed as a boundary
value (Dirichlet) or as the flux u_x(1) = sat(U) through the ghost value
u_{N+1} = u_{N-1} + 2 dx sat(U) (Neumann). Delayed terms are read from a ring
buffer with linear interpolation in time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .controller import ControlLaw
from .kernels import KernelSet
from .plant import DIRICHLET, NEUMANN, DesignGains, InitialData, PlantParams, check_actuation, grid_size
from .quadrature import derivative, norm_sq, volterra_operator
from .transform import operators

DEFAULT_DT = 2e-4
DIVERGENCE_THRESHOLD = 1e12

COMPLETED = "completed"
DIVERGED = "diverged"


class CFLError(ValueError):
    """The explicit scheme would be unstable: dt > dx^2 / 2."""


class LagOutOfWindowError(LookupError):
    """A delayed sample was requested outside the stored history window."""


def check_cfl(dt: float, dx: float) -> None:
    if not dt > 0:
        raise CFLError("dt must be positive")
    if dt > 0.5 * dx * dx * (1 + 1e-12):
        raise CFLError(f"dt = {dt:g} violates dt <= dx^2/2 = {0.5 * dx * dx:g}")


class HistoryBuffer:
    """Ring buffer of the last ceil(h/dt) + 2 states, backed by the initial history.

    Times t <= 0 are served by the initial history functions directly; later
    times are interpolated linearly between stored steps.
    """

    def __init__(self, initial: InitialData, n: int, n_nodes: int, dt: float, h: float):
        self.initial = initial
        self.dt = float(dt)
        self.size = int(math.ceil(h / dt)) + 2
        self.X = np.zeros((self.size, n))
        self.u = np.zeros((self.size, n_nodes))
        self.latest = -1
        self._const = None
        if not callable(initial.X) and not callable(initial.u):
            self._const = (initial.X_at(0.0), initial.u_at(0.0))

    def push(self, step: int, X, u) -> None:
        if step != self.latest + 1:
            raise ValueError("history steps must be pushed consecutively")
        j = step % self.size
        self.X[j] = X
        self.u[j] = u
        self.latest = step

    def _initial(self, s: float):
        if self._const is not None:
            return self._const
        return self.initial.X_at(s), self.initial.u_at(s)

    def sample(self, s: float):
        """(X(s), u(., s))."""
        if s <= 0.0:
            return self._initial(s)
        pos = s / self.dt
        near = round(pos)
        if abs(pos - near) < 1e-9 * max(1.0, pos):
            pos = float(near)
        k0 = int(math.floor(pos))
        frac = pos - k0
        k1 = k0 + (1 if frac > 0 else 0)
        if k1 > self.latest or k0 < self.latest - self.size + 1:
            raise LagOutOfWindowError(
                f"time {s:g} outside stored window "
                f"[{max(0, self.latest - self.size + 1) * self.dt:g}, {self.latest * self.dt:g}]"
            )
        i0 = k0 % self.size
        if frac == 0.0:
            return self.X[i0], self.u[i0]
        i1 = k1 % self.size
        return ((1 - frac) * self.X[i0] + frac * self.X[i1],
                (1 - frac) * self.u[i0] + frac * self.u[i1])


def delayed_sample(history: HistoryBuffer, t: float, tau_profile):
    """(X(t - tau(t)), u(., t - tau(t)))."""
    tau = tau_profile(t) if callable(tau_profile) else float(tau_profile)
    return history.sample(t - tau)


@dataclass(frozen=True)
class ZeroLaw:
    """U = 0 for every state; used for open-loop and pure-heat runs."""

    actuation: str
    n: int
    dx: float
    u_bar: float = math.inf

    def evaluate(self, X, u):
        return 0.0, 0.0


def _laplacian(u: np.ndarray, dx: float, flux_right: float | None) -> np.ndarray:
    """u_xx at every node with u_x(0) = 0 and, if given, u_x(1) = flux_right."""
    out = np.empty_like(u)
    inv = 1.0 / (dx * dx)
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) * inv
    out[0] = 2.0 * (u[1] - u[0]) * inv
    if flux_right is not None:
        out[-1] = 2.0 * (u[-2] - u[-1] + dx * flux_right) * inv
    else:
        out[-1] = 0.0
    return out


def step_explicit(plant: PlantParams, law, history: HistoryBuffer, t: float, dt: float,
                  dx: float, X: np.ndarray, u: np.ndarray):
    """Advance (X, u) from t to t + dt.

    Returns (X_new, u_new, U, applied): the unsaturated and applied control.
    For Neumann actuation they are evaluated at t; for Dirichlet the new
    boundary value solves u_N = sat(g_u[N] u_N + rest) with the linear part
    inverted exactly (the applied value is then clamped).
    """
    check_cfl(dt, dx)
    Xd, ud = delayed_sample(history, t, plant.delay_profile)
    dX = plant.A @ X + plant.A1 @ Xd + plant.B[:, 0] * u[0]
    X_new = X + dt * dX
    if law.actuation == NEUMANN:
        U, applied = law.evaluate(X, u)
        lap = _laplacian(u, dx, applied)
        u_new = u + dt * (lap + plant.a * u + plant.a2 * ud)
        return X_new, u_new, U, applied
    lap = _laplacian(u, dx, None)
    u_new = u + dt * (lap + plant.a * u + plant.a2 * ud)
    U, applied = _dirichlet_boundary(law, X_new, u_new)
    u_new[-1] = applied
    return X_new, u_new, U, applied


def _dirichlet_boundary(law, X, u):
    if isinstance(law, ZeroLaw):
        return 0.0, 0.0
    gX, gu = law.gains
    alpha = gu[-1]
    rest = float(gX @ X + gu[:-1] @ u[:-1])
    U = rest / (1.0 - alpha)
    applied = min(max(U, -law.u_bar), law.u_bar)
    return U, applied


@dataclass(frozen=True)
class Trajectory:
    """Recorded closed-loop run.

    Scalar series are sampled every ``record_stride`` steps, field snapshots
    every ``field_stride`` steps. ``norm_sq`` is |X|^2 + ||u||^2 (+ ||u_x||^2
    for Neumann actuation) and ``state_norm_sq`` always omits the derivative.
    """

    dt: float
    dx: float
    actuation: str
    times: np.ndarray
    X: np.ndarray
    U: np.ndarray
    applied: np.ndarray
    sat_active: np.ndarray
    norm_sq: np.ndarray
    state_norm_sq: np.ndarray
    field_times: np.ndarray
    fields: np.ndarray
    V: np.ndarray | None = None
    V_initial_sup: float | None = None
    halanay_violations: int = 0
    status: str = COMPLETED
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("times", "X", "U", "applied", "sat_active", "norm_sq", "state_norm_sq",
                     "field_times", "fields", "V"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def diverged(self) -> bool:
        return self.status == DIVERGED

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def summary(self) -> dict:
        return {
            "status": self.status,
            "final_time": self.final_time,
            "initial_norm_sq": float(self.norm_sq[0]),
            "terminal_norm_sq": float(self.norm_sq[-1]),
            "max_norm_sq": float(np.max(self.norm_sq)),
            "max_abs_U": float(np.max(np.abs(self.U))),
            "max_abs_applied": float(np.max(np.abs(self.applied))),
            "saturated_samples": int(np.count_nonzero(self.sat_active)),
            "halanay_violations": self.halanay_violations if self.V is not None else None,
            "V_max": None if self.V is None else float(np.max(self.V)),
            "V_initial_sup": self.V_initial_sup,
        }

    def to_csv(self, path) -> None:
        n = self.X.shape[1]
        header = ["t"] + [f"X_{i + 1}" for i in range(n)] + ["U", "sat_active", "norm_sq"]
        if self.V is not None:
            header.append("V")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(self.times.shape[0]):
                row = [repr(float(self.times[k]))]
                row += [repr(float(v)) for v in self.X[k]]
                row += [repr(float(self.applied[k])), int(self.sat_active[k]),
                        repr(float(self.norm_sq[k]))]
                if self.V is not None:
                    row.append(repr(float(self.V[k])))
                w.writerow(row)

    def dump_fields(self, path) -> None:
        """One row per field snapshot: t followed by the grid values."""
        N = self.fields.shape[1] - 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x={i * self.dx:.6g}" for i in range(N + 1)])
            for t, row in zip(self.field_times, self.fields):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


class _Monitor:
    """V = X'PX + p1 ||z||^2 (+ p2 ||z_x||^2) on the transformed state."""

    def __init__(self, tuning, kernels: KernelSet, actuation: str):
        self.t = tuning
        self.ops = operators(kernels)
        self.dx = kernels.dx
        self.actuation = actuation
        self.P = np.atleast_2d(np.asarray(tuning.P, dtype=float))

    def value_z(self, X, z) -> float:
        v = float(X @ self.P @ X) + self.t.p1 * norm_sq(z, self.dx)
        if self.actuation == NEUMANN and self.t.p2:
            v += self.t.p2 * norm_sq(derivative(z, self.dx), self.dx)
        return v

    def value(self, X, u) -> float:
        return self.value_z(X, self.ops.u_to_z(X, u))


def _halanay_violations(times, V, V_hist_sup, delta0, delta1, h, rtol=1e-3) -> int:
    """Count samples where the discrete V' + 2 d0 V - 2 d1 sup V exceeds rtol * sup V."""
    count = 0
    j0 = 0
    for k in range(len(V) - 1):
        dVdt = (V[k + 1] - V[k]) / (times[k + 1] - times[k])
        while times[j0] < times[k] - h:
            j0 += 1
        sup = max(float(np.max(V[j0:k + 1])), V_hist_sup if times[k] - h < 0 else -math.inf)
        if dVdt + 2 * delta0 * V[k] - 2 * delta1 * sup > rtol * sup:
            count += 1
    return count


def _norms(X, u, dx, actuation):
    base = float(X @ X) + norm_sq(u, dx)
    if actuation == NEUMANN:
        return base + norm_sq(derivative(u, dx), dx), base
    return base, base


def simulate(plant: PlantParams, law, initial: InitialData, T: float, dt: float = DEFAULT_DT,
             monitor=None, record_stride: int = 1, field_stride: int = 50,
             divergence_threshold: float = DIVERGENCE_THRESHOLD) -> Trajectory:
    """Integrate the closed loop in original coordinates up to time T.

    ``law`` is a :class:`ControlLaw` or :class:`ZeroLaw`. With ``monitor``
    (a tuning witness carrying P, p1, p2, delta0, delta1) V is recorded on the
    transformed state and the discrete Halanay inequality is checked. A run
    whose norm exceeds ``divergence_threshold`` stops with status "diverged".
    """
    if isinstance(law, ControlLaw):
        dx, kernels = law.kernels.dx, law.kernels
    else:
        dx, kernels = law.dx, None
    actuation = check_actuation(law.actuation)
    check_cfl(dt, dx)
    if not T > 0:
        raise ValueError("horizon T must be positive")
    N = grid_size(dx)
    n = plant.n
    lo, hi = plant.delay_profile.bounds
    X = initial.X_at(0.0).copy()
    u = initial.u_at(0.0).copy()
    if X.shape[0] != n or u.shape[0] != N + 1:
        raise ValueError("initial data does not match the plant dimension or the grid")
    mon = None
    if monitor is not None:
        if kernels is None:
            raise ValueError("monitoring needs a ControlLaw with kernels")
        mon = _Monitor(monitor, kernels, actuation)
    history = HistoryBuffer(initial, n, N + 1, dt, hi)
    n_steps = int(round(T / dt))
    times, Xs, Us, applied_s, sats, norms, snorms, Vs = [], [], [], [], [], [], [], []
    ftimes, fields = [], []

    def record(k, X, u, U, applied):
        t = k * dt
        times.append(t)
        Xs.append(X.copy())
        Us.append(U)
        applied_s.append(applied)
        sats.append(abs(U) > law.u_bar)
        ns, base = _norms(X, u, dx, actuation)
        norms.append(ns)
        snorms.append(base)
        if mon is not None:
            Vs.append(mon.value(X, u))
        return ns

    if isinstance(law, ControlLaw):
        U0, a0 = law.evaluate(X, u)
    else:
        U0, a0 = 0.0, 0.0
    history.push(0, X, u)
    record(0, X, u, U0, a0)
    ftimes.append(0.0)
    fields.append(u.copy())
    status = COMPLETED
    for k in range(n_steps):
        t = k * dt
        X, u, U, applied = step_explicit(plant, law, history, t, dt, dx, X, u)
        history.push(k + 1, X, u)
        if (k + 1) % record_stride == 0 or k + 1 == n_steps:
            ns = record(k + 1, X, u, U, applied)
        else:
            ns = float(X @ X) + float(u @ u) * dx
        if (k + 1) % field_stride == 0:
            ftimes.append((k + 1) * dt)
            fields.append(u.copy())
        if not math.isfinite(ns) or ns > divergence_threshold:
            if times[-1] != (k + 1) * dt:
                record(k + 1, X, u, U, applied)
            status = DIVERGED
            break

    V = V_sup = None
    violations = 0
    if mon is not None:
        V = np.array(Vs)
        if callable(initial.X) or callable(initial.u):
            thetas = np.linspace(-hi, 0.0, 41)
            V_sup = max(mon.value(initial.X_at(s), initial.u_at(s)) for s in thetas)
        else:
            V_sup = float(V[0])
        violations = _halanay_violations(np.array(times), V, V_sup, monitor.delta0,
                                         monitor.delta1, hi)
    return Trajectory(
        dt=dt, dx=dx, actuation=actuation, times=np.array(times), X=np.array(Xs),
        U=np.array(Us), applied=np.array(applied_s), sat_active=np.array(sats, dtype=bool),
        norm_sq=np.array(norms), state_norm_sq=np.array(snorms),
        field_times=np.array(ftimes), fields=np.array(fields), V=V, V_initial_sup=V_sup,
        halanay_violations=violations, status=status,
        meta={"tau_bounds": (lo, hi), "record_stride": record_stride},
    )


def target_forcing(kernels: KernelSet) -> np.ndarray:
    """g(x) = gamma(x) - int_0^x q(x, y) gamma(y) dy, one row per node."""
    return kernels.gamma - volterra_operator(kernels.q, kernels.dx) @ kernels.gamma


def simulate_target(plant: PlantParams, gains: DesignGains, kernels: KernelSet,
                    initial_z: InitialData, T: float, actuation: str = DIRICHLET,
                    dt: float = DEFAULT_DT, record_stride: int = 1, field_stride: int = 50,
                    divergence_threshold: float = DIVERGENCE_THRESHOLD) -> Trajectory:
    """Integrate the target cascade (X, z) directly.

        X' = (A + BK) X + A1 X(t - tau) + B z(0, t)
        z_t = z_xx - c z + a2 z(t - tau) - g(x) (A1 - a2 I) X(t - tau)

    with z_x(0) = 0 and z(1) = 0 (Dirichlet) or z_x(1) = 0 (Neumann).
    """
    actuation = check_actuation(actuation)
    dx = kernels.dx
    check_cfl(dt, dx)
    N = grid_size(dx)
    n = plant.n
    _, hi = plant.delay_profile.bounds
    Acl = gains.closed_loop(plant)
    D = plant.A1 - plant.a2 * np.eye(n)
    gD = target_forcing(kernels) @ D  # (N+1, n)
    X = initial_z.X_at(0.0).copy()
    z = initial_z.u_at(0.0).copy()
    if X.shape[0] != n or z.shape[0] != N + 1:
        raise ValueError("initial data does not match the plant dimension or the grid")
    history = HistoryBuffer(initial_z, n, N + 1, dt, hi)
    history.push(0, X, z)
    n_steps = int(round(T / dt))
    times, Xs, norms, ftimes, fields = [0.0], [X.copy()], [], [0.0], [z.copy()]
    norms.append(_norms(X, z, dx, actuation)[0])
    flux = 0.0 if actuation == NEUMANN else None
    status = COMPLETED
    for k in range(n_steps):
        t = k * dt
        Xd, zd = delayed_sample(history, t, plant.delay_profile)
        X_new = X + dt * (Acl @ X + plant.A1 @ Xd + plant.B[:, 0] * z[0])
        z_new = z + dt * (_laplacian(z, dx, flux) - gains.c * z + plant.a2 * zd - gD @ Xd)
        if actuation == DIRICHLET:
            z_new[-1] = 0.0
        X, z = X_new, z_new
        history.push(k + 1, X, z)
        if (k + 1) % record_stride == 0 or k + 1 == n_steps:
            times.append((k + 1) * dt)
            Xs.append(X.copy())
            norms.append(_norms(X, z, dx, actuation)[0])
        if (k + 1) % field_stride == 0:
            ftimes.append((k + 1) * dt)
            fields.append(z.copy())
        if not math.isfinite(norms[-1]) or norms[-1] > divergence_threshold:
            status = DIVERGED
            break
    m = len(times)
    zeros = np.zeros(m)
    return Trajectory(
        dt=dt, dx=dx, actuation=actuation, times=np.array(times), X=np.array(Xs),
        U=zeros, applied=zeros, sat_active=np.zeros(m, dtype=bool),
        norm_sq=np.array(norms), state_norm_sq=np.array(norms),
        field_times=np.array(ftimes), fields=np.array(fields), status=status,
        meta={"coordinates": "target"},
    )
