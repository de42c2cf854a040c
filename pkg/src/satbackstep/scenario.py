"""Scenario files: one JSON document describing a design-and-simulation run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .certify import SearchConfig, TuningParams
from .plant import (
    DIRICHLET, NEUMANN, DelayProfile, DesignGains, InitialData, PlantParams,
    check_actuation, example1, example2, grid,
)
from .quadrature import derivative, norm_sq
from .simulator import DEFAULT_DT, check_cfl


@dataclass(frozen=True)
class InitialSpec:
    """Constant-in-theta initial history: X and either a cosine or raw u values."""

    X: tuple[float, ...]
    kind: str = "cosine"
    amplitude: float = 0.0
    mode: int = 1
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "X", tuple(float(v) for v in np.ravel(self.X)))
        if self.kind not in ("cosine", "values"):
            raise ValueError(f"unknown initial-data type {self.kind!r}")
        if self.kind == "values":
            if self.values is None:
                raise ValueError("initial data of type 'values' needs a value list")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def field(self, dx: float) -> np.ndarray:
        x = grid(dx)
        if self.kind == "cosine":
            return self.amplitude * np.cos(self.mode * np.pi * x)
        values = np.asarray(self.values, dtype=float)
        if values.shape[0] != x.shape[0]:
            raise ValueError(f"initial u has {values.shape[0]} samples, grid has {x.shape[0]}")
        return values

    def build(self, dx: float) -> InitialData:
        return InitialData.constant(np.asarray(self.X), self.field(dx))

    def norms(self, dx: float) -> dict:
        """max |X0|, ||u0||^2 and ||u0'||^2 for the admissible-set test."""
        u = self.field(dx)
        return {
            "X0_max": float(np.linalg.norm(self.X)),
            "u0_norm_sq": norm_sq(u, dx),
            "u0_deriv_norm_sq": norm_sq(derivative(u, dx), dx),
        }

    def to_dict(self) -> dict:
        if self.kind == "cosine":
            u = {"type": "cosine", "amplitude": self.amplitude, "mode": self.mode}
        else:
            u = {"type": "values", "values": list(self.values)}
        return {"X": list(self.X), "u": u}

    @classmethod
    def from_dict(cls, d: dict) -> "InitialSpec":
        u = d.get("u", {"type": "cosine", "amplitude": 0.0})
        if isinstance(u, list):
            return cls(X=d["X"], kind="values", values=u)
        kind = u.get("type", "cosine")
        if kind == "cosine":
            return cls(X=d["X"], amplitude=float(u.get("amplitude", 0.0)), mode=int(u.get("mode", 1)))
        return cls(X=d["X"], kind=kind, values=u.get("values"))


@dataclass(frozen=True)
class SimulationSpec:
    T: float = 10.0
    dx: float = 0.04
    dt: float = DEFAULT_DT
    initial: InitialSpec = field(default_factory=lambda: InitialSpec(X=(0.0,)))
    monitor: bool = False
    record_stride: int = 1

    def to_dict(self, delay_profile: DelayProfile) -> dict:
        return {
            "T": self.T, "dx": self.dx, "dt": self.dt,
            "delay_profile": delay_profile.to_dict(),
            "initial_data": self.initial.to_dict(),
            "monitor": self.monitor, "record_stride": self.record_stride,
        }


@dataclass(frozen=True)
class Scenario:
    name: str
    plant: PlantParams
    gains: DesignGains
    actuation: str = DIRICHLET
    tuning: dict = field(default_factory=dict)
    simulation: SimulationSpec = field(default_factory=SimulationSpec)
    search: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "actuation", check_actuation(self.actuation))
        unknown = set(self.tuning) - {"delta0", "delta1", "r", "r1"}
        if unknown:
            raise ValueError(f"unknown tuning keys {sorted(unknown)}")
        check_cfl(self.simulation.dt, self.simulation.dx)
        if len(self.simulation.initial.X) != self.plant.n:
            raise ValueError("initial X does not match the plant dimension")

    def tuning_params(self) -> TuningParams:
        default = 0.3 if self.actuation == DIRICHLET else 0.5
        t = {"delta0": default, "delta1": default, "r": 1.0, "r1": 1.0}
        t.update(self.tuning)
        return TuningParams(**t)

    def search_config(self, seed: int | None = None) -> SearchConfig:
        cfg = SearchConfig(**self.search)
        return cfg if seed is None else replace(cfg, seed=int(seed))

    def with_grid(self, dx: float | None = None, dt: float | None = None) -> "Scenario":
        sim = self.simulation
        sim = replace(sim, dx=sim.dx if dx is None else float(dx), dt=sim.dt if dt is None else float(dt))
        return replace(self, simulation=sim)

    def to_dict(self) -> dict:
        plant = self.plant.to_dict()
        profile = self.plant.delay_profile
        plant.pop("delay_profile")
        return {
            "name": self.name,
            "actuation": self.actuation,
            "plant": plant,
            "gains": self.gains.to_dict(),
            "tuning": dict(self.tuning),
            "simulation": self.simulation.to_dict(profile),
            "search": dict(self.search),
            "output": dict(self.output),
        }

    def to_json(self, path=None, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        text = json.dumps(self.to_dict(), **kwargs)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        sim = dict(d.get("simulation", {}))
        plant_d = dict(d["plant"])
        if "delay_profile" in sim:
            plant_d["delay_profile"] = sim.pop("delay_profile")
        plant = PlantParams.from_dict(plant_d)
        initial = InitialSpec.from_dict(sim.pop("initial_data", {"X": [0.0] * plant.n}))
        simulation = SimulationSpec(
            T=float(sim.get("T", 10.0)), dx=float(sim.get("dx", 0.04)),
            dt=float(sim.get("dt", DEFAULT_DT)), initial=initial,
            monitor=bool(sim.get("monitor", False)),
            record_stride=int(sim.get("record_stride", 1)),
        )
        return cls(
            name=d.get("name", "scenario"),
            plant=plant,
            gains=DesignGains.from_dict(d["gains"]),
            actuation=d.get("actuation", DIRICHLET),
            tuning=dict(d.get("tuning", {})),
            simulation=simulation,
            search=dict(d.get("search", {})),
            output=dict(d.get("output", {})),
        )

    @classmethod
    def from_json(cls, source) -> "Scenario":
        text = str(source)
        if text.lstrip().startswith("{"):
            return cls.from_dict(json.loads(text))
        return cls.from_dict(json.loads(Path(text).read_text()))


def _ex1(name, X0, amp, **plant_changes) -> Scenario:
    plant, gains = example1()
    if plant_changes:
        plant = plant.replace(**plant_changes)
    return Scenario(
        name=name, plant=plant, gains=gains, actuation=DIRICHLET,
        tuning={"delta0": 0.3, "delta1": 0.3, "r": 1.0},
        simulation=SimulationSpec(T=10.0, initial=InitialSpec(X=(X0,), amplitude=amp)),
    )


def _ex2(name, X0, amp, **plant_changes) -> Scenario:
    plant, gains = example2()
    if plant_changes:
        plant = plant.replace(**plant_changes)
    return Scenario(
        name=name, plant=plant, gains=gains, actuation=NEUMANN,
        tuning={"delta0": 0.5, "delta1": 0.5, "r": 1.0, "r1": 1.0},
        simulation=SimulationSpec(T=10.0, initial=InitialSpec(X=(X0,), amplitude=amp)),
    )


BUNDLED = {
    "example1": lambda: _ex1("example1", 0.82, 0.29),
    "example1-outside": lambda: _ex1("example1-outside", 5.0, 4.0),
    # A1 = a2 I removes the coupling term R, which makes the LMIs feasible
    "example1-matched": lambda: replace(_ex1("example1-matched", 0.7, 0.2, a2=0.4),
                                        simulation=SimulationSpec(
                                            T=10.0, initial=InitialSpec(X=(0.7,), amplitude=0.2),
                                            monitor=True)),
    "example2": lambda: _ex2("example2", 0.26, 0.05),
    "example2-outside": lambda: _ex2("example2-outside", 3.0, 0.05),
    "example2-matched": lambda: _ex2("example2-matched", 0.1, 0.02, a2=0.4),
}


def bundled_scenario(name: str) -> Scenario:
    try:
        return BUNDLED[name]()
    except KeyError:
        raise KeyError(f"unknown bundled scenario {name!r}; choose from {sorted(BUNDLED)}") from None


def load_scenario(ref: str) -> Scenario:
    """A bundled scenario name or a path to a scenario JSON file."""
    if ref in BUNDLED:
        return bundled_scenario(ref)
    return Scenario.from_json(Path(ref).read_text())


__all__ = [
    "BUNDLED", "InitialSpec", "Scenario", "SimulationSpec", "bundled_scenario",
    "load_scenario",
]
