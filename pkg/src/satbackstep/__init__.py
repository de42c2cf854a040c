"""Saturated backstepping boundary control of a delayed ODE-heat cascade."""

from .certify import (
    Certificate, SearchConfig, TuningParams, admissible_set_membership,
    assemble_dirichlet_lmis, assemble_neumann_lmis, check_feasibility, halanay_decay,
    minimize_beta, saturation_constants_dirichlet, saturation_constants_neumann, zeta_bound,
)
from .controller import ControlLaw, dirichlet_u, neumann_u, saturate
from .estimator import BacksteppingDesign
from .kernels import KernelSet, compute_gamma_psi, compute_k_n, compute_kernels, verify_kernel_pdes
from .plant import (
    DIRICHLET, NEUMANN, DelayProfile, DesignGains, InitialData, PlantParams, example1, example2,
)
from .scenario import Scenario, bundled_scenario, load_scenario
from .simulator import Trajectory, simulate, simulate_target
from .transform import CoupledState, Field, u_to_w, u_to_z, w_to_u, w_to_z, z_to_u, z_to_w

__version__ = "0.1.0"

__all__ = [
    "BacksteppingDesign", "Certificate", "ControlLaw", "CoupledState", "DIRICHLET",
    "DelayProfile", "DesignGains", "Field", "InitialData", "KernelSet", "NEUMANN",
    "PlantParams", "Scenario", "SearchConfig", "Trajectory", "TuningParams",
    "admissible_set_membership", "assemble_dirichlet_lmis", "assemble_neumann_lmis",
    "bundled_scenario", "check_feasibility", "compute_gamma_psi", "compute_k_n",
    "compute_kernels", "dirichlet_u", "example1", "example2", "halanay_decay",
    "load_scenario", "minimize_beta", "neumann_u", "saturate",
    "saturation_constants_dirichlet", "saturation_constants_neumann", "simulate",
    "simulate_target", "u_to_w", "u_to_z", "verify_kernel_pdes", "w_to_u", "w_to_z",
    "z_to_u", "z_to_w", "zeta_bound",
]
