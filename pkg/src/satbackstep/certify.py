"""LMI stability certificates and domain-of-attraction estimates.

The closed-loop target system is certified through Halanay's inequality with
the Lyapunov function V = X'PX + p1 ||z||^2 (+ p2 ||z_x||^2 for Neumann
actuation). Saturation avoidance adds

    P <= beta I,  p1 <= beta  (p2 <= beta),
    P ubar^2 / kappa - c1^2 I >= 0,  p1 ubar^2 / kappa - c2^2 >= 0  (...)

with kappa = 2 (Dirichlet) or 3 (Neumann), and beta is minimised by a
derivative-free search.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .kernels import KernelSet, compute_kernels
from .plant import DIRICHLET, NEUMANN, DesignGains, PlantParams, check_actuation

PI2 = math.pi**2
DEFAULT_MARGIN = 1e-9

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNDETERMINED = "undetermined"


class HalanayError(ValueError):
    """The decay-rate hypotheses 0 <= delta1 <= delta0, h > 0 are violated."""


def halanay_decay(delta0: float, delta1: float, h: float) -> float:
    """Unique root of delta = delta0 - delta1 * exp(2 delta h) in [0, delta0 - delta1]."""
    delta0, delta1, h = float(delta0), float(delta1), float(h)
    if not h > 0:
        raise HalanayError("delay bound h must be positive")
    if delta1 < 0:
        raise HalanayError("delta1 must be non-negative")
    if delta1 > delta0:
        raise HalanayError(f"delta1 = {delta1} exceeds delta0 = {delta0}")
    if delta1 == 0.0:
        return delta0
    hi = delta0 - delta1
    if hi == 0.0:
        return 0.0
    g = lambda d: d - delta0 + delta1 * math.exp(2.0 * d * h)  # noqa: E731
    return float(brentq(g, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))


@dataclass
class TuningParams:
    """Tuning scalars and the LMI decision variables (the witness)."""

    delta0: float
    delta1: float
    r: float = 1.0
    r1: float = 1.0
    lam: float = 1.0
    lam1: float = 0.0
    p1: float = 1.0
    p2: float = 0.0
    P: np.ndarray | None = None

    def __post_init__(self):
        if self.P is not None:
            self.P = np.atleast_2d(np.asarray(self.P, dtype=float))

    def validate(self, actuation: str = DIRICHLET, n: int | None = None) -> None:
        actuation = check_actuation(actuation)
        if not (0 < self.delta1 <= self.delta0):
            raise ValueError("tuning needs 0 < delta1 <= delta0")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if not self.p1 > 0:
            raise ValueError("p1 must be positive")
        if actuation == DIRICHLET:
            if not (0 < self.lam <= 2 * self.p1):
                raise ValueError("Dirichlet tuning needs 0 < lambda <= 2 p1")
        else:
            if not (0 < self.r1 < 2):
                raise ValueError("Neumann tuning needs 0 < r1 < 2")
            if not self.lam > 0 or self.lam1 < 0:
                raise ValueError("Neumann tuning needs lambda > 0 and lambda1 >= 0")
            if self.p2 < 0:
                raise ValueError("p2 must be non-negative")
        if self.P is None:
            raise ValueError("P is required")
        if n is not None and self.P.shape != (n, n):
            raise ValueError(f"P must be {n}x{n}")
        if not np.allclose(self.P, self.P.T, atol=1e-12):
            raise ValueError("P must be symmetric")
        if np.linalg.eigvalsh(self.P).min() <= 0:
            raise ValueError("P must be positive definite")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["P"] = None if self.P is None else np.asarray(self.P).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TuningParams":
        return cls(**d)


# --------------------------------------------------------------------------
# kernel maxima and bound constants


def kernel_maxima(kernels: KernelSet, refine: bool = True) -> dict:
    """Grid maxima entering zeta and the saturation constants.

    With ``refine`` the maxima are taken on the grid refined by 2 (which
    contains every original node and all midpoints), when the kernel set
    carries its generating parameters.
    """
    ks = kernels
    if refine and ks.plant is not None and ks.gains is not None:
        ks = kernels.refined(2)
    rows = lambda T: np.linalg.norm(T, axis=1)  # noqa: E731
    lower = np.tril(np.ones_like(ks.q, dtype=bool))
    tri = lambda T: float(np.max(np.abs(T[lower])))  # noqa: E731
    return {
        "gamma": float(np.max(rows(ks.gamma))),
        "gamma_prime": float(np.max(rows(ks.gamma_prime))),
        "k": tri(ks.k),
        "kx": tri(ks.kx),
        "q": tri(ks.q),
        "q_diag": float(np.max(np.abs(np.diag(ks.q)))),
        "qx": tri(ks.qx),
        "l": tri(ks.l),
        "n_row1": float(np.max(np.abs(ks.n_[-1]))),
        "nx_row1": float(np.max(np.abs(ks.nx[-1]))),
        "l_row1": float(np.max(np.abs(ks.l[-1]))),
        "lx_row1": float(np.max(np.abs(ks.lx[-1]))),
        "psi_1": float(np.linalg.norm(ks.psi[-1])),
        "psi_prime_1": float(np.linalg.norm(ks.psi_prime[-1])),
        "l_11": float(abs(ks.l[-1, -1])),
    }


def zeta_bound(kernels: KernelSet, refine: bool = True) -> float:
    """(1 + max|q|)^2 (max|gamma|)^2 over the kernel grid."""
    m = kernel_maxima(kernels, refine)
    return (1.0 + m["q"]) ** 2 * m["gamma"] ** 2


def saturation_constants_dirichlet(kernels: KernelSet, refine: bool = True) -> dict:
    m = kernel_maxima(kernels, refine)
    c1 = m["psi_1"]
    c2 = m["n_row1"] * (1.0 + m["l"]) + m["l_row1"]
    M1 = 1.0 + 2.0 * (m["gamma"] * (1.0 + m["q"])) ** 2
    M2 = 2.0 * (1.0 + m["k"]) ** 2 * (1.0 + m["q"]) ** 2
    return {"c1": c1, "c2": c2, "M1": M1, "M2": M2}


def saturation_constants_neumann(kernels: KernelSet, refine: bool = True) -> dict:
    m = kernel_maxima(kernels, refine)
    c1 = m["psi_prime_1"]
    xi = m["nx_row1"] * (1.0 + m["l"]) + m["lx_row1"]
    c3 = m["l_11"]
    c2 = math.sqrt(2.0) * c3 + xi
    qq = (m["q_diag"] + m["qx"]) ** 2
    M1 = (8.0 * qq + 2.0 * (1.0 + m["q"]) ** 2) * m["gamma"] ** 2 + 4.0 * m["gamma_prime"] ** 2 + 1.0
    M2 = (8.0 * qq * (1.0 + m["k"]) ** 2 + 4.0 * m["kx"] ** 2
          + 2.0 * (1.0 + m["k"]) ** 2 * (1.0 + m["q"]) ** 2)
    return {"c1": c1, "c2": c2, "c3": c3, "xi": xi, "M1": M1, "M2": M2}


# --------------------------------------------------------------------------
# LMI assembly


def _xi_block(plant: PlantParams, gains: DesignGains, P, lam, delta0, delta1) -> np.ndarray:
    n = plant.n
    Acl = gains.closed_loop(plant)
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape != (n, n):
        raise ValueError(f"P must have shape ({n}, {n}), got {P.shape}")
    th11 = P @ Acl + Acl.T @ P + 2.0 * delta0 * P
    Xi = np.zeros((2 * n + 1, 2 * n + 1))
    Xi[:n, :n] = th11
    Xi[:n, n:2 * n] = P @ plant.A1
    Xi[n:2 * n, :n] = (P @ plant.A1).T
    Xi[:n, 2 * n] = (P @ plant.B)[:, 0]
    Xi[2 * n, :n] = (P @ plant.B)[:, 0]
    Xi[n:2 * n, n:2 * n] = -2.0 * delta1 * P
    Xi[2 * n, 2 * n] = -lam
    return Xi


def _r_block(plant: PlantParams, zeta: float) -> np.ndarray:
    n = plant.n
    D = plant.A1 - plant.a2 * np.eye(n)
    R = np.zeros((2 * n + 1, 2 * n + 1))
    R[n:2 * n, n:2 * n] = zeta * D.T @ D
    return R


def assemble_dirichlet_lmis(plant: PlantParams, gains: DesignGains, tuning: TuningParams,
                            zeta: float) -> tuple[np.ndarray, np.ndarray]:
    """Theta1 = Xi + p1/r R  ((2n+1) x (2n+1)) and the 2 x 2 Theta2."""
    t = tuning
    Xi = _xi_block(plant, gains, t.P, t.lam, t.delta0, t.delta1)
    Th1 = Xi + (t.p1 / t.r) * _r_block(plant, zeta)
    c, a2 = gains.c, plant.a2
    th2_11 = (-2.0 * c + 2.0 * t.delta0 + t.r - PI2 / 2.0) * t.p1 + PI2 / 4.0 * t.lam
    Th2 = np.array([[th2_11, a2 * t.p1], [a2 * t.p1, -2.0 * t.delta1 * t.p1]])
    return Th1, Th2


def assemble_neumann_lmis(plant: PlantParams, gains: DesignGains, tuning: TuningParams,
                          zeta: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Theta1_bar, the 3 x 3 Theta2_bar and the scalar inequality value (<= 0)."""
    t = tuning
    Xi = _xi_block(plant, gains, t.P, t.lam, t.delta0, t.delta1)
    Th1 = Xi + (t.p1 / t.r + t.p2 / t.r1) * _r_block(plant, zeta)
    c, a2 = gains.c, plant.a2
    Th2 = np.array([
        [(-2.0 * c + 2.0 * t.delta0 + t.r) * t.p1 + 2.0 * t.lam, a2 * t.p1, 0.0],
        [a2 * t.p1, -2.0 * t.delta1 * t.p1, -a2 * t.p2],
        [0.0, -a2 * t.p2, -(2.0 - t.r1) * t.p2 + t.lam1],
    ])
    scalar = (-2.0 * t.p1 - 2.0 * t.p2 * c + t.lam + 2.0 * t.delta0 * t.p2
              - PI2 / 4.0 * t.lam1)
    return Th1, Th2, float(scalar)


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    max_eigs: tuple[float, ...]

    def __bool__(self):
        return self.feasible


def check_feasibility(matrices, margin: float = DEFAULT_MARGIN) -> FeasibilityResult:
    """True iff every symmetric matrix has largest eigenvalue <= -margin."""
    eigs = []
    for M in matrices:
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[0] != M.shape[1]:
            raise ValueError(f"matrix must be square, got {M.shape}")
        scale = max(1.0, float(np.max(np.abs(M))))
        if np.max(np.abs(M - M.T)) > 1e-10 * scale:
            raise ValueError("matrix is not symmetric")
        eigs.append(float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1]))
    return FeasibilityResult(all(e <= -margin for e in eigs), tuple(eigs))


# --------------------------------------------------------------------------
# beta minimisation


@dataclass
class SearchConfig:
    n_seeds: int = 8
    seed: int = 0
    max_evals: int = 3000
    min_step: float = 1e-7
    beta_cap: float = 1e6
    beta_floor: float = 1e-9
    rel_width: float = 1e-3
    margin: float = DEFAULT_MARGIN
    infeasible_tol: float = 1e-6


@dataclass
class Certificate:
    actuation: str
    status: str
    beta: float = math.inf
    decay_delta: float = 0.0
    zeta: float = 0.0
    xi: float | None = None
    c1: float = 0.0
    c2: float = 0.0
    c3: float | None = None
    M1: float = 0.0
    M2: float = 0.0
    tuning: TuningParams | None = None
    lmi_max_eigs: dict = field(default_factory=dict)
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    @property
    def admissible_radius(self) -> float:
        return 1.0 / self.beta if self.beta > 0 else math.inf

    @property
    def coefficients(self) -> list[float]:
        coef = [self.beta * self.M1, self.beta * self.M2]
        if self.actuation == NEUMANN:
            coef.append(4.0 * self.beta)
        return coef

    def to_dict(self) -> dict:
        t = self.tuning
        finite = lambda v: v if v is None or math.isfinite(v) else None  # noqa: E731
        return {
            "actuation": self.actuation,
            "feasible": self.feasible,
            "status": self.status,
            "beta": finite(self.beta),
            "delta": self.decay_delta,
            "constants": {"zeta": self.zeta, "xi": self.xi, "c1": self.c1, "c2": self.c2,
                          "c3": self.c3, "M1": self.M1, "M2": self.M2},
            "tuning": None if t is None else {"delta0": t.delta0, "delta1": t.delta1,
                                              "r": t.r, "r1": t.r1},
            "witness": None if t is None or t.P is None else {
                "P": np.asarray(t.P).tolist(), "p1": t.p1, "p2": t.p2,
                "lambda": t.lam, "lambda1": t.lam1},
            "admissible_set": {
                "coefficients": [finite(c) for c in self.coefficients] if self.feasible else None,
                "radius": finite(self.admissible_radius) if self.feasible else None,
            },
            "lmi_max_eigs": self.lmi_max_eigs,
            "message": self.message,
        }

    def to_json(self, path=None, **kwargs) -> str:
        text = json.dumps(self.to_dict(), **kwargs)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        const = d.get("constants", {})
        tuning = None
        if d.get("tuning"):
            w = d.get("witness") or {}
            tuning = TuningParams(
                delta0=d["tuning"]["delta0"], delta1=d["tuning"]["delta1"],
                r=d["tuning"].get("r", 1.0), r1=d["tuning"].get("r1", 1.0),
                lam=w.get("lambda", 1.0), lam1=w.get("lambda1", 0.0),
                p1=w.get("p1", 1.0), p2=w.get("p2", 0.0), P=w.get("P"),
            )
        beta = d.get("beta")
        return cls(
            actuation=d["actuation"], status=d["status"],
            beta=math.inf if beta is None else beta, decay_delta=d.get("delta", 0.0),
            zeta=const.get("zeta", 0.0), xi=const.get("xi"), c1=const.get("c1", 0.0),
            c2=const.get("c2", 0.0), c3=const.get("c3"), M1=const.get("M1", 0.0),
            M2=const.get("M2", 0.0), tuning=tuning,
            lmi_max_eigs=d.get("lmi_max_eigs", {}), message=d.get("message", ""),
        )

    @classmethod
    def from_json(cls, source) -> "Certificate":
        text = str(source)
        if text.lstrip().startswith("{"):
            return cls.from_dict(json.loads(text))
        with open(text) as fh:
            return cls.from_dict(json.load(fh))


def _sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v)) if v > -700 else 0.0


class _Problem:
    """Normalised constraint violation phi(v; beta) for the derivative-free search.

    phi <= 0 iff the decoded witness satisfies every constraint: strict LMIs
    with the margin, P <= beta I, p_i <= beta and the saturation bounds.
    LMI eigenvalues are divided by the witness scale so the trivial witness
    (everything -> 0) is not a spurious minimiser.
    """

    def __init__(self, plant, gains, actuation, base: TuningParams, zeta, consts, margin):
        self.plant, self.gains, self.actuation = plant, gains, actuation
        self.base, self.zeta, self.margin = base, zeta, margin
        n = plant.n
        self.n = n
        self.tril = np.tril_indices(n)
        self.n_chol = len(self.tril[0])
        kappa = 2.0 if actuation == DIRICHLET else 3.0
        ub2 = plant.u_bar**2
        self.P_min = kappa * consts["c1"] ** 2 / ub2
        self.p1_min = kappa * consts["c2"] ** 2 / ub2
        self.p2_min = kappa * consts.get("c3", 0.0) ** 2 / ub2 if actuation == NEUMANN else 0.0
        self.dim = self.n_chol + (2 if actuation == DIRICHLET else 4)

    @property
    def beta_lower(self) -> float:
        return max(self.P_min, self.p1_min, self.p2_min)

    def decode(self, v) -> TuningParams:
        n = self.n
        L = np.zeros((n, n))
        L[self.tril] = v[: self.n_chol]
        d = np.diag_indices(n)
        L[d] = np.exp(np.clip(L[d], -300, 300))
        P = L @ L.T
        rest = v[self.n_chol:]
        p1 = math.exp(min(rest[0], 300))
        if self.actuation == DIRICHLET:
            lam = 2.0 * p1 * _sigmoid(rest[1])
            return replace(self.base, P=P, p1=p1, lam=lam, p2=0.0, lam1=0.0)
        p2 = math.exp(min(rest[1], 300))
        lam = math.exp(min(rest[2], 300))
        lam1 = math.exp(min(rest[3], 300))
        return replace(self.base, P=P, p1=p1, p2=p2, lam=lam, lam1=lam1)

    def encode(self, t: TuningParams) -> np.ndarray:
        L = np.linalg.cholesky(np.asarray(t.P, dtype=float))
        d = np.diag_indices(self.n)
        L[d] = np.log(L[d])
        v = list(L[self.tril])
        v.append(math.log(t.p1))
        if self.actuation == DIRICHLET:
            frac = min(max(t.lam / (2.0 * t.p1), 1e-12), 1 - 1e-12)
            v.append(math.log(frac / (1.0 - frac)))
        else:
            v += [math.log(max(t.p2, 1e-300)), math.log(t.lam), math.log(max(t.lam1, 1e-300))]
        return np.array(v, dtype=float)

    def lmis(self, t: TuningParams):
        if self.actuation == DIRICHLET:
            Th1, Th2 = assemble_dirichlet_lmis(self.plant, self.gains, t, self.zeta)
            return [Th1, Th2], None
        Th1, Th2, s = assemble_neumann_lmis(self.plant, self.gains, t, self.zeta)
        return [Th1, Th2], s

    def violations(self, t: TuningParams, beta: float) -> list[float]:
        P_eigs = np.linalg.eigvalsh(t.P)
        scale = max(P_eigs[-1], t.p1, t.p2, t.lam, t.lam1)
        mats, scalar = self.lmis(t)
        out = [(np.linalg.eigvalsh(M)[-1] + self.margin) / scale for M in mats]
        if scalar is not None:
            out.append(scalar / scale)
        out.append((P_eigs[-1] - beta) / beta)
        out.append((t.p1 - beta) / beta)
        out.append((self.P_min - P_eigs[0]) / beta)
        out.append((self.p1_min - t.p1) / beta)
        if self.actuation == NEUMANN:
            out.append((t.p2 - beta) / beta)
            out.append((self.p2_min - t.p2) / beta)
        return out

    def phi(self, v, beta: float) -> float:
        t = self.decode(v)
        if not (np.all(np.isfinite(t.P)) and math.isfinite(t.p1)):
            return math.inf
        return float(max(self.violations(t, beta)))


def _pattern_search(f, x0, step0, rng, max_evals, min_step, stop_below):
    """Coordinate search with expanding/shrinking steps plus random directions.

    Returns (x, fx, reason) where reason is "found" (fx < stop_below),
    "converged" (all steps below min_step) or "budget".
    """
    x = np.array(x0, dtype=float)
    fx = f(x)
    evals = 1
    dim = x.shape[0]
    steps = np.full(dim, float(step0))
    while True:
        if fx < stop_below:
            return x, fx, "found"
        if np.max(steps) < min_step:
            return x, fx, "converged"
        if evals >= max_evals:
            return x, fx, "budget"
        improved = False
        for i in rng.permutation(dim):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[i] += sign * steps[i]
                fy = f(y)
                evals += 1
                if fy < fx:
                    x, fx = y, fy
                    steps[i] *= 2.0
                    improved = True
                    break
        if not improved:
            radius = float(np.mean(steps))
            for _ in range(2 * dim):
                d = rng.standard_normal(dim)
                d *= radius / np.linalg.norm(d)
                y = x + d
                fy = f(y)
                evals += 1
                if fy < fx:
                    x, fx = y, fy
                    improved = True
                    break
        if not improved:
            steps *= 0.5


def _seed_point(problem: _Problem, beta: float, rng, k: int) -> np.ndarray:
    n = problem.n
    base = problem.base
    jitter = 0 if k == 0 else 1
    P = 0.5 * beta * np.eye(n) * math.exp(jitter * rng.normal(0, 0.5))
    p1 = 0.5 * beta * math.exp(jitter * rng.normal(0, 0.5))
    t = replace(base, P=P, p1=p1, lam=p1 * (0.9 + 0.5 * jitter * rng.random()),
                p2=0.5 * beta * math.exp(jitter * rng.normal(0, 0.5)),
                lam1=0.1 * beta * math.exp(jitter * rng.normal(0, 1.0)))
    v = problem.encode(t)
    if jitter:
        v = v + rng.normal(0, 0.3, size=v.shape)
    return v


def _feasible_at(problem: _Problem, beta: float, cfg: SearchConfig, rng, warm=None):
    """(witness or None, best phi, reason) for a fixed beta."""
    f = lambda v: problem.phi(v, beta)  # noqa: E731
    starts = []
    if warm is not None:
        starts.append(warm)
    for k in range(cfg.n_seeds):
        starts.append(_seed_point(problem, beta, rng, k))
    best = (None, math.inf, "converged")
    all_converged = True
    for v0 in starts:
        v, fv, reason = _pattern_search(f, v0, 0.5, rng, cfg.max_evals, cfg.min_step, 0.0)
        if reason == "found":
            return problem.decode(v), fv, "found", v
        if reason == "budget":
            all_converged = False
        if fv < best[1]:
            best = (v, fv, reason)
    return None, best[1], "converged" if all_converged else "budget", best[0]


def _finalize_checks(problem: _Problem, t: TuningParams, beta: float, margin: float):
    mats, scalar = problem.lmis(t)
    res = check_feasibility(mats, margin)
    P_eigs = np.linalg.eigvalsh(t.P)
    ok = bool(res.feasible)
    ok &= scalar is None or scalar <= 0.0
    ok &= P_eigs[-1] <= beta * (1 + 1e-12) and t.p1 <= beta * (1 + 1e-12)
    ok &= P_eigs[0] >= problem.P_min * (1 - 1e-12) and t.p1 >= problem.p1_min * (1 - 1e-12)
    if problem.actuation == NEUMANN:
        ok &= t.p2 <= beta * (1 + 1e-12) and t.p2 >= problem.p2_min * (1 - 1e-12)
    eigs = {"theta1": res.max_eigs[0], "theta2": res.max_eigs[1]}
    if scalar is not None:
        eigs["scalar"] = scalar
    return ok, eigs


def minimize_beta(plant: PlantParams, gains: DesignGains, actuation: str = DIRICHLET,
                  tuning_seed: TuningParams | None = None,
                  search_config: SearchConfig | None = None,
                  kernels: KernelSet | None = None, dx: float = 0.04) -> Certificate:
    """Smallest beta (largest admissible set) with a verified LMI witness.

    Outer bisection on beta (geometric while the bracket spans more than a
    factor 2) between the saturation lower bound and ``beta_cap``; inner
    feasibility by derivative-free pattern search from several seeds.
    ``tuning_seed`` fixes delta0, delta1, r, r1 (defaults delta0 = delta1 = 0.3,
    r = r1 = 1).
    """
    actuation = check_actuation(actuation)
    cfg = search_config or SearchConfig()
    base = tuning_seed or TuningParams(delta0=0.3, delta1=0.3)
    if not (0 < base.delta1 <= base.delta0):
        raise ValueError("tuning needs 0 < delta1 <= delta0")
    if actuation == NEUMANN and not (0 < base.r1 < 2):
        raise ValueError("Neumann tuning needs 0 < r1 < 2")
    if kernels is None:
        kernels = compute_kernels(plant, gains, dx)
    zeta = zeta_bound(kernels)
    if actuation == DIRICHLET:
        consts = saturation_constants_dirichlet(kernels)
    else:
        consts = saturation_constants_neumann(kernels)
    delta = halanay_decay(base.delta0, base.delta1, plant.h)
    cert = Certificate(
        actuation=actuation, status=INFEASIBLE, decay_delta=delta, zeta=zeta,
        xi=consts.get("xi"), c1=consts["c1"], c2=consts["c2"], c3=consts.get("c3"),
        M1=consts["M1"], M2=consts["M2"],
    )
    Acl = gains.closed_loop(plant)
    shifted = np.linalg.eigvals(Acl + base.delta0 * np.eye(plant.n)).real
    if np.any(shifted >= 0):
        cert.message = (
            "A + BK + delta0 I is not Hurwitz, so P(A+BK) + (A+BK)'P + 2 delta0 P < 0 "
            "has no solution P > 0"
        )
        return cert

    problem = _Problem(plant, gains, actuation, base, zeta, consts, cfg.margin)
    rng = np.random.default_rng(cfg.seed)
    hi = cfg.beta_cap
    witness, fbest, reason, v_hi = _feasible_at(problem, hi, cfg, rng)
    if witness is None:
        cert.status = INFEASIBLE if (reason == "converged" and fbest > cfg.infeasible_tol) else UNDETERMINED
        cert.message = (
            f"no LMI witness found at beta cap {hi:g}; best normalised violation {fbest:.3g} "
            f"({'search converged' if reason == 'converged' else 'search budget exhausted'})"
        )
        if cert.status == UNDETERMINED and reason == "converged":
            cert.message += "; violation below the infeasibility tolerance"
        return cert
    lo = max(problem.beta_lower, cfg.beta_floor)
    if lo >= hi:
        cert.message = "saturation lower bound exceeds the beta cap"
        return cert
    undetermined_steps = 0
    while (hi - lo) > cfg.rel_width * hi:
        mid = math.sqrt(lo * hi) if hi > 2.0 * lo else 0.5 * (lo + hi)
        # scaled previous witness keeps the homogeneous LMIs feasible
        warm = v_hi.copy()
        warm_t = problem.decode(warm)
        s = mid / hi
        warm = problem.encode(replace(warm_t, P=warm_t.P * s, p1=warm_t.p1 * s,
                                      p2=warm_t.p2 * s, lam=warm_t.lam * s,
                                      lam1=warm_t.lam1 * s))
        w, f_mid, reason, v = _feasible_at(problem, mid, cfg, rng, warm=warm)
        if w is not None:
            hi, witness, v_hi = mid, w, v
        else:
            lo = mid
            if reason == "budget":
                undetermined_steps += 1
    P_eigs = np.linalg.eigvalsh(witness.P)
    beta = float(max(P_eigs[-1], witness.p1, witness.p2 if actuation == NEUMANN else 0.0))
    ok, eigs = _finalize_checks(problem, witness, beta, cfg.margin)
    cert.beta = beta
    cert.tuning = witness
    cert.lmi_max_eigs = eigs
    cert.status = FEASIBLE if ok else UNDETERMINED
    cert.message = "verified witness" if ok else "witness failed final verification"
    if undetermined_steps:
        cert.message += f"; {undetermined_steps} bisection probes exhausted the search budget"
    return cert


def verify_certificate(cert: Certificate, plant: PlantParams, gains: DesignGains,
                       margin: float = DEFAULT_MARGIN) -> bool:
    """Re-check a certificate's witness against every constraint at its beta."""
    if cert.tuning is None or cert.tuning.P is None:
        return False
    consts = {"c1": cert.c1, "c2": cert.c2, "c3": cert.c3 or 0.0}
    problem = _Problem(plant, gains, cert.actuation, cert.tuning, cert.zeta, consts, margin)
    ok, _ = _finalize_checks(problem, cert.tuning, cert.beta, margin)
    return ok


def admissible_set_membership(cert: Certificate, X0_max: float, u0_norm_sq: float,
                              u0_deriv_norm_sq: float | None = None) -> tuple[float, bool]:
    """beta (M1 |X0|^2 + M2 ||u0||^2 [+ 4 ||u0'||^2]) and whether it is <= 1."""
    if not cert.feasible:
        raise ValueError("membership needs a feasible certificate")
    value = cert.M1 * float(X0_max) ** 2 + cert.M2 * float(u0_norm_sq)
    if cert.actuation == NEUMANN:
        if u0_deriv_norm_sq is None:
            raise ValueError("Neumann membership needs the derivative norm ||u0'||^2")
        value += 4.0 * float(u0_deriv_norm_sq)
    value *= cert.beta
    return value, value <= 1.0
