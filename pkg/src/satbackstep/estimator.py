"""scikit-learn style wrapper around the design pipeline.

``fit`` computes the kernels and (optionally) the LMI certificate;
``transform`` maps stacked states [X, u] to target coordinates [X, z];
``inverse_transform`` maps back and ``predict`` returns the applied control.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .certify import SearchConfig, TuningParams, admissible_set_membership, minimize_beta
from .controller import ControlLaw
from .kernels import DEFAULT_DX, compute_kernels
from .plant import DIRICHLET, DesignGains, PlantParams, check_actuation, grid_size
from .simulator import DEFAULT_DT, simulate
from .transform import operators


def check_plant(plant) -> PlantParams:
    if isinstance(plant, dict):
        plant = PlantParams.from_dict(plant)
    if not isinstance(plant, PlantParams):
        raise TypeError(f"plant must be PlantParams or a dict, got {type(plant).__name__}")
    plant.check_controllable()
    return plant


def check_gains(gains, plant: PlantParams) -> DesignGains:
    if isinstance(gains, dict):
        gains = DesignGains.from_dict(gains)
    if not isinstance(gains, DesignGains):
        raise TypeError(f"gains must be DesignGains or a dict, got {type(gains).__name__}")
    if not gains.is_hurwitz(plant):
        raise ValueError("A + BK is not Hurwitz")
    return gains


def check_states(S, n: int, N: int) -> np.ndarray:
    """Validate a 2-D array whose rows are stacked states [X (n), u (N + 1)]."""
    S = check_array(S, ensure_2d=True, dtype=float)
    if S.shape[1] != n + N + 1:
        raise ValueError(f"each row needs n + N + 1 = {n + N + 1} entries, got {S.shape[1]}")
    return S


class BacksteppingDesign(TransformerMixin, BaseEstimator):
    """Backstepping boundary controller with a saturation certificate.

    Parameters
    ----------
    plant : PlantParams or dict
    gains : DesignGains or dict
    actuation : {"dirichlet", "neumann"}
    dx : float
        Spatial grid step; 1/dx must be an integer.
    delta0, delta1, r, r1 : float
        Tuning of the Halanay LMIs. ``delta0=None`` picks 0.3 (Dirichlet) or
        0.5 (Neumann) for both rates.
    certify : bool
        Run the beta minimisation during ``fit``.
    seed, n_seeds, max_evals : int
        Derivative-free search controls.

    Attributes
    ----------
    kernels_ : KernelSet
    certificate_ : Certificate or None
    law_ : ControlLaw
    """

    def __init__(self, plant=None, gains=None, actuation=DIRICHLET, dx=DEFAULT_DX,
                 delta0=None, delta1=None, r=1.0, r1=1.0, certify=True, seed=0,
                 n_seeds=8, max_evals=3000):
        self.plant = plant
        self.gains = gains
        self.actuation = actuation
        self.dx = dx
        self.delta0 = delta0
        self.delta1 = delta1
        self.r = r
        self.r1 = r1
        self.certify = certify
        self.seed = seed
        self.n_seeds = n_seeds
        self.max_evals = max_evals

    def _tuning(self, actuation) -> TuningParams:
        default = 0.3 if actuation == DIRICHLET else 0.5
        d0 = default if self.delta0 is None else self.delta0
        d1 = d0 if self.delta1 is None else self.delta1
        return TuningParams(delta0=d0, delta1=d1, r=self.r, r1=self.r1)

    def fit(self, X=None, y=None):
        """Compute kernels and the certificate. ``X`` and ``y`` are ignored."""
        plant = check_plant(self.plant)
        gains = check_gains(self.gains, plant)
        actuation = check_actuation(self.actuation)
        grid_size(self.dx)
        self.plant_, self.gains_, self.actuation_ = plant, gains, actuation
        self.kernels_ = compute_kernels(plant, gains, self.dx)
        self.law_ = ControlLaw(actuation, self.kernels_, plant.u_bar)
        self.certificate_ = None
        if self.certify:
            cfg = SearchConfig(n_seeds=self.n_seeds, seed=self.seed, max_evals=self.max_evals)
            self.certificate_ = minimize_beta(plant, gains, actuation, self._tuning(actuation),
                                              cfg, kernels=self.kernels_)
        self.n_state_ = plant.n
        self.n_nodes_ = self.kernels_.N + 1
        self.n_features_in_ = self.n_state_ + self.n_nodes_
        return self

    def _split(self, S):
        check_is_fitted(self, "kernels_")
        S = check_states(S, self.n_state_, self.kernels_.N)
        return S[:, : self.n_state_], S[:, self.n_state_:]

    def transform(self, X):
        """Rows [X, u] -> [X, z]."""
        Xs, U = self._split(X)
        ops = operators(self.kernels_)
        Z = np.array([ops.u_to_z(x, u) for x, u in zip(Xs, U)])
        return np.hstack([Xs, Z])

    def inverse_transform(self, X):
        """Rows [X, z] -> [X, u]."""
        Xs, Z = self._split(X)
        ops = operators(self.kernels_)
        U = np.array([ops.z_to_u(x, z) for x, z in zip(Xs, Z)])
        return np.hstack([Xs, U])

    def predict(self, X):
        """Applied (saturated) boundary control for each stacked state."""
        Xs, U = self._split(X)
        return np.array([self.law_.evaluate(x, u)[1] for x, u in zip(Xs, U)])

    def decision_function(self, X):
        """Unsaturated control for each stacked state."""
        Xs, U = self._split(X)
        return np.array([self.law_.evaluate(x, u)[0] for x, u in zip(Xs, U)])

    def membership(self, X0_max, u0_norm_sq, u0_deriv_norm_sq=None):
        check_is_fitted(self, "certificate_")
        if self.certificate_ is None:
            raise ValueError("fit with certify=True to evaluate membership")
        return admissible_set_membership(self.certificate_, X0_max, u0_norm_sq, u0_deriv_norm_sq)

    def simulate(self, initial, T, dt=DEFAULT_DT, monitor=None, **kwargs):
        """Closed-loop run; ``monitor=True`` uses the certificate witness."""
        check_is_fitted(self, "kernels_")
        if monitor is True:
            if self.certificate_ is None or not self.certificate_.feasible:
                raise ValueError("monitoring needs a feasible certificate")
            monitor = self.certificate_.tuning
        return simulate(self.plant_, self.law_, initial, T, dt=dt, monitor=monitor or None, **kwargs)

    @property
    def beta_(self) -> float:
        check_is_fitted(self, "certificate_")
        return math.inf if self.certificate_ is None else self.certificate_.beta
