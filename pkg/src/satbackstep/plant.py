"""Plant description, design gains and delay profiles for the ODE-heat cascade.

The cascade is

    X'(t)   = A X(t) + A1 X(t - tau(t)) + B u(0, t)
    u_t     = u_xx + a u(x, t) + a2 u(x, t - tau(t)),   u_x(0, t) = 0

with the boundary input acting either as u(1, t) = U(t) (Dirichlet) or
u_x(1, t) = U(t) (Neumann), and 0 < h0 <= tau(t) <= h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
ACTUATIONS = (DIRICHLET, NEUMANN)


def check_actuation(actuation: str) -> str:
    act = str(actuation).lower()
    if act not in ACTUATIONS:
        raise ValueError(f"actuation must be one of {ACTUATIONS}, got {actuation!r}")
    return act


def _as_matrix(value, name, shape=None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {arr.shape}")
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DelayProfile:
    """Time-varying delay tau(t).

    ``kind`` is ``"constant"`` (tau = value) or ``"sinusoid"``
    (tau = (h0 + h)/2 + (h - h0)/2 * sin(omega t)).
    """

    kind: str = "constant"
    value: float = 0.4
    h0: float = 0.0
    h: float = 0.0
    omega: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "sinusoid"):
            raise ValueError(f"unknown delay profile type {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise ValueError("constant delay must be positive")
        if self.kind == "sinusoid" and not (0 < self.h0 <= self.h):
            raise ValueError("sinusoidal delay needs 0 < h0 <= h")

    @classmethod
    def constant(cls, value: float) -> "DelayProfile":
        return cls(kind="constant", value=float(value))

    @classmethod
    def sinusoid(cls, h0: float, h: float, omega: float = 1.0) -> "DelayProfile":
        return cls(kind="sinusoid", h0=float(h0), h=float(h), omega=float(omega))

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind == "constant":
            return self.value, self.value
        return self.h0, self.h

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return self.value
        mid = 0.5 * (self.h0 + self.h)
        amp = 0.5 * (self.h - self.h0)
        return mid + amp * math.sin(self.omega * t)

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"type": "constant", "value": self.value}
        return {"type": "sinusoid", "h0": self.h0, "h": self.h, "omega": self.omega}

    @classmethod
    def from_dict(cls, d: dict) -> "DelayProfile":
        kind = d.get("type", "constant")
        if kind == "constant":
            return cls.constant(d["value"])
        if kind == "sinusoid":
            return cls.sinusoid(d["h0"], d["h"], d.get("omega", 1.0))
        raise ValueError(f"unknown delay profile type {kind!r}")


@dataclass(frozen=True)
class PlantParams:
    A: np.ndarray
    A1: np.ndarray
    B: np.ndarray
    a: float
    a2: float
    h0: float
    h: float
    u_bar: float = math.inf
    delay_profile: DelayProfile | None = None

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "A1", _as_matrix(self.A1, "A1", (n, n)))
        B = np.asarray(self.B, dtype=float).reshape(-1, 1)
        object.__setattr__(self, "B", _as_matrix(B, "B", (n, 1)))
        for name in ("a", "a2", "h0", "h", "u_bar"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.h0 > 0:
            raise ValueError("delay lower bound h0 must be positive")
        if self.h < self.h0:
            raise ValueError("delay upper bound h must satisfy h >= h0")
        if not self.u_bar > 0:
            raise ValueError("saturation level u_bar must be positive")
        profile = self.delay_profile
        if profile is None:
            profile = DelayProfile.constant(self.h)
        elif isinstance(profile, dict):
            profile = DelayProfile.from_dict(profile)
        lo, hi = profile.bounds
        if lo < self.h0 - 1e-12 or hi > self.h + 1e-12:
            raise ValueError(
                f"delay profile range [{lo}, {hi}] leaves [h0, h] = [{self.h0}, {self.h}]"
            )
        object.__setattr__(self, "delay_profile", profile)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def controllability_rank(self) -> int:
        n = self.n
        blocks = [self.B]
        for _ in range(n - 1):
            blocks.append(self.A @ blocks[-1])
        return int(np.linalg.matrix_rank(np.hstack(blocks)))

    def is_controllable(self) -> bool:
        return self.controllability_rank() == self.n

    def check_controllable(self) -> None:
        rank = self.controllability_rank()
        if rank != self.n:
            raise ValueError(f"(A, B) is not controllable: rank {rank} < n = {self.n}")

    def replace(self, **changes) -> "PlantParams":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return PlantParams(**d)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "A1": self.A1.tolist(),
            "B": self.B.tolist(),
            "a": self.a,
            "a2": self.a2,
            "h0": self.h0,
            "h": self.h,
            "u_bar": self.u_bar if math.isfinite(self.u_bar) else None,
            "delay_profile": self.delay_profile.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlantParams":
        u_bar = d.get("u_bar")
        return cls(
            A=d["A"],
            A1=d["A1"],
            B=d["B"],
            a=d["a"],
            a2=d["a2"],
            h0=d["h0"],
            h=d["h"],
            u_bar=math.inf if u_bar is None else u_bar,
            delay_profile=DelayProfile.from_dict(d["delay_profile"])
            if d.get("delay_profile")
            else None,
        )


@dataclass(frozen=True)
class DesignGains:
    K: np.ndarray
    c: float

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        if K.shape[0] != 1:
            K = K.reshape(1, -1)
        object.__setattr__(self, "K", _as_matrix(K, "K"))
        object.__setattr__(self, "c", float(self.c))
        if not self.c > 0:
            raise ValueError("target damping c must be positive")

    def closed_loop(self, plant: PlantParams) -> np.ndarray:
        if self.K.shape != (1, plant.n):
            raise ValueError(f"K must have shape (1, {plant.n}), got {self.K.shape}")
        return plant.A + plant.B @ self.K

    def is_hurwitz(self, plant: PlantParams) -> bool:
        return bool(np.all(np.linalg.eigvals(self.closed_loop(plant)).real < 0))

    def to_dict(self) -> dict:
        return {"K": self.K.tolist(), "c": self.c}

    @classmethod
    def from_dict(cls, d: dict) -> "DesignGains":
        return cls(K=d["K"], c=d["c"])


# Reference data sets used throughout the tests and the bundled scenarios.
def example1() -> tuple[PlantParams, DesignGains]:
    plant = PlantParams(A=[[1.0]], A1=[[0.4]], B=[[1.0]], a=0.2, a2=0.1,
                        h0=0.4, h=0.4, u_bar=20.0)
    return plant, DesignGains(K=[[-2.0]], c=0.8)


def example2() -> tuple[PlantParams, DesignGains]:
    plant = PlantParams(A=[[1.0]], A1=[[0.4]], B=[[1.0]], a=0.2, a2=0.1,
                        h0=0.4, h=0.4, u_bar=50.0)
    return plant, DesignGains(K=[[-4.0]], c=1.8)


HistoryFn = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class InitialData:
    """History (X(theta), u(., theta)) on [-h, 0].

    ``X`` and ``u`` are either arrays (constant in theta) or callables of theta.
    ``u`` arrays/callables return samples on the simulation grid.
    """

    X: np.ndarray | HistoryFn
    u: np.ndarray | HistoryFn
    _meta: dict = field(default_factory=dict, compare=False)

    def X_at(self, theta: float) -> np.ndarray:
        if callable(self.X):
            return np.asarray(self.X(theta), dtype=float).ravel()
        return np.asarray(self.X, dtype=float).ravel()

    def u_at(self, theta: float) -> np.ndarray:
        if callable(self.u):
            return np.asarray(self.u(theta), dtype=float).ravel()
        return np.asarray(self.u, dtype=float).ravel()

    @classmethod
    def constant(cls, X, u) -> "InitialData":
        X = np.asarray(X, dtype=float).ravel().copy()
        u = np.asarray(u, dtype=float).ravel().copy()
        X.setflags(write=False)
        u.setflags(write=False)
        return cls(X=X, u=u)

    @classmethod
    def cosine(cls, X, amplitude: float, dx: float, mode: int = 1) -> "InitialData":
        x = grid(dx)
        return cls.constant(X, amplitude * np.cos(mode * np.pi * x))


def grid_size(dx: float) -> int:
    """Number of intervals N with N * dx == 1."""
    N = int(round(1.0 / dx))
    if N < 1 or abs(N * dx - 1.0) > 1e-9:
        raise ValueError(f"dx = {dx} does not divide [0, 1] into an integer number of steps")
    return N


def grid(dx: float) -> np.ndarray:
    N = grid_size(dx)
    return np.linspace(0.0, 1.0, N + 1)
