"""Acceptance criteria, each checked at its stated tolerance.

Every test records a single PASS/FAIL line (shown in the terminal summary)
before asserting. Criteria 1, 2, 3 and 5 are known not to be reproducible
from the published formulas; they still run at full strength and fail.
"""

import math
import time

import numpy as np
import pytest

from satbackstep import (
    Certificate, ControlLaw, InitialData, PlantParams, admissible_set_membership,
    compute_kernels, halanay_decay, minimize_beta, saturation_constants_dirichlet,
    saturation_constants_neumann, simulate, verify_kernel_pdes,
)
from satbackstep.controller import dirichlet_u, dirichlet_u_target
from satbackstep.plant import grid
from satbackstep.scenario import load_scenario
from satbackstep.simulator import ZeroLaw, simulate_target
from satbackstep.transform import CoupledState, operators, u_to_z

from .conftest import smooth_state


def within(value, target, tol):
    return value is not None and math.isfinite(value) and abs(value - target) <= tol


def fmt(checks):
    return "; ".join(f"{name}={value:.5g} [{'ok' if ok else 'x'}]" for name, value, ok in checks)


@pytest.fixture(scope="module")
def ex1_cert(ex1, ex1_kernels):
    start = time.perf_counter()
    cert = minimize_beta(*ex1, "dirichlet", kernels=ex1_kernels)
    return cert, time.perf_counter() - start


@pytest.fixture(scope="module")
def ex2_cert(ex2, ex2_kernels):
    sc = load_scenario("example2")
    return minimize_beta(*ex2, "neumann", sc.tuning_params(), kernels=ex2_kernels)


def test_criterion_1_example1_constants(ex1_kernels, acceptance_log):
    c = saturation_constants_dirichlet(ex1_kernels)
    checks = [("c1", c["c1"], within(c["c1"], 0.91, 0.01)),
              ("c2", c["c2"], within(c["c2"], 2.93, 0.05)),
              ("M1", c["M1"], within(c["M1"], 18.15, 0.2)),
              ("M2", c["M2"], within(c["M2"], 30.31, 0.4))]
    ok = all(flag for _, _, flag in checks)
    assert acceptance_log(1, ok, "Example 1 constants: " + fmt(checks))


def test_criterion_2_example1_beta(ex1, ex1_cert, acceptance_log):
    cert, elapsed = ex1_cert
    verified = cert.feasible and cert.beta <= 0.076
    bm1, bm2 = (cert.coefficients if cert.feasible else (math.nan, math.nan))
    checks = [("beta", cert.beta, verified),
              ("beta*M1", bm1, within(bm1, 1.34, 0.03)),
              ("beta*M2", bm2, within(bm2, 2.24, 0.05)),
              ("seconds", elapsed, elapsed <= 60)]
    ok = all(flag for _, _, flag in checks)
    detail = f"Example 1 beta search {cert.status}: " + fmt(checks)
    if not cert.feasible:
        detail += f" ({cert.message})"
    assert acceptance_log(2, ok, detail)


def test_criterion_3_example2(ex2_kernels, ex2_cert, acceptance_log):
    c = saturation_constants_neumann(ex2_kernels)
    cert = ex2_cert
    coef = cert.coefficients if cert.feasible else [math.nan] * 3
    checks = [("c1", c["c1"], within(c["c1"], 6.98, 0.02)),
              ("c3", c["c3"], c["c3"] == 1.0),
              ("c2", c["c2"], within(c["c2"], 9.9, 0.1)),
              ("M1", c["M1"], within(c["M1"], 118.7, 1.0)),
              ("M2", c["M2"], within(c["M2"], 141.8, 1.5)),
              ("beta", cert.beta, cert.feasible and cert.beta <= 0.121),
              ("beta*M1", coef[0], within(coef[0], 13.96, 0.2)),
              ("beta*M2", coef[1], within(coef[1], 16.67, 0.2)),
              ("4beta", coef[2], within(coef[2], 0.47, 0.01))]
    ok = all(flag for _, _, flag in checks)
    assert acceptance_log(3, ok, f"Example 2 ({cert.status}): " + fmt(checks))


def test_criterion_4_membership(ex1_cert, acceptance_log):
    # The Example 1 certificate computed here is infeasible (criterion 2), so the
    # membership functional is evaluated with the published beta, M1 and M2.
    own, _ = ex1_cert
    published = Certificate("dirichlet", "feasible", beta=0.0739, M1=18.15, M2=30.31)
    values = {}
    for name in ("example1", "example1-outside"):
        spec = load_scenario(name).simulation.initial
        n = spec.norms(0.04)
        values[name] = admissible_set_membership(published, n["X0_max"], n["u0_norm_sq"])
    (vin, inside), (vout, outside) = values["example1"], values["example1-outside"]
    checks = [("inside", vin, within(vin, 0.99, 0.01) and inside),
              ("outside", vout, within(vout, 51.4, 0.5) and not outside)]
    ok = all(flag for _, _, flag in checks)
    note = "" if own.feasible else " (published coefficients; own certificate infeasible)"
    assert acceptance_log(4, ok, "membership: " + fmt(checks) + note)


def run_scenario(name, kernels):
    sc = load_scenario(name)
    assert sc.simulation.dx == 0.04 and sc.simulation.dt == 2e-4
    assert sc.plant.delay_profile.kind == "constant" and sc.plant.delay_profile.value == 0.4
    law = ControlLaw(sc.actuation, kernels, sc.plant.u_bar)
    start = time.perf_counter()
    traj = simulate(sc.plant, law, sc.simulation.initial.build(0.04), 10.0, dt=2e-4,
                    record_stride=5)
    return traj, time.perf_counter() - start


def test_criterion_5_simulation(ex1_kernels, acceptance_log):
    inside, t_in = run_scenario("example1", ex1_kernels)
    outside, t_out = run_scenario("example1-outside", ex1_kernels)
    ratio = inside.norm_sq[-1] / inside.norm_sq[0]
    late_sat = int(np.count_nonzero(inside.sat_active[inside.times >= 1.0]))
    hit = outside.norm_sq > 1e3
    checks = [("inside terminal/initial", ratio, inside.status == "completed" and ratio <= 1e-2),
              ("saturated samples after t=1", late_sat, late_sat == 0),
              ("outside max norm", float(np.max(outside.norm_sq)),
               bool(np.any(hit & (outside.times < 10.0)))),
              ("max run seconds", max(t_in, t_out), max(t_in, t_out) <= 60)]
    ok = all(flag for _, _, flag in checks)
    assert acceptance_log(5, ok, "simulation: " + fmt(checks))


def test_criterion_6_property_suites(ex1, ex1_kernels, ex1_kernels_fine, acceptance_log):
    plant, gains = ex1
    checks = []

    # kernel-PDE residuals: second-order convergence under grid halving
    coarse = verify_kernel_pdes(ex1_kernels, plant, gains)
    fine = verify_kernel_pdes(compute_kernels(plant, gains, 0.02), plant, gains)
    keys = ("q_pde", "l_pde", "gamma_ode", "psi_ode", "q_boundary", "l_boundary")
    worst = min(coarse[k] / fine[k] for k in keys)
    checks.append(("min residual ratio", worst, worst >= 3.0))

    # transform round trips at dx = 0.01
    rng = np.random.default_rng(0)
    ops = operators(ex1_kernels_fine)
    x = grid(0.01)
    rt = 0.0
    for _ in range(5):
        X, u = smooth_state(rng, x)
        rt = max(rt, np.max(np.abs(ops.z_to_u(X, ops.u_to_z(X, u)) - u)))
    checks.append(("round trip", rt, rt <= 1e-6))

    # dual representation of the control law
    gap = 0.0
    for _ in range(5):
        X, u = smooth_state(rng, x)
        state = CoupledState.from_arrays(X, u, 0.01)
        gap = max(gap, abs(dirichlet_u(state, ex1_kernels_fine)
                           - dirichlet_u_target(u_to_z(state, ex1_kernels_fine), ex1_kernels_fine)))
    checks.append(("dual control", gap, gap <= 1e-4))

    # original-vs-target simulation (unsaturated, consistent boundary data)
    law = ControlLaw("dirichlet", ex1_kernels, saturated=False)
    x = grid(0.04)
    X0, u0 = np.array([0.3]), 0.1 * np.cos(np.pi * x / 2)
    u0[-1] = law.evaluate(X0, u0)[0]
    ops = operators(ex1_kernels)
    orig = simulate(plant, law, InitialData.constant(X0, u0), 1.0, field_stride=500)
    targ = simulate_target(plant, gains, ex1_kernels,
                           InitialData.constant(X0, ops.u_to_z(X0, u0)), 1.0, field_stride=500)
    mapped = np.array([ops.u_to_z(Xk, uk) for Xk, uk in zip(orig.X[::500], orig.fields)])
    dual = float(np.max(np.abs(mapped - targ.fields)))
    tol = 0.04**2 + 2e-4
    checks.append(("dual simulation", dual, dual <= tol))

    # Halanay fixed point and V <= sup V along a certified run
    resid = 0.0
    for d0, d1 in [(0.3, 0.2997), (0.5, 0.25), (0.5, 0.1)]:
        dd = halanay_decay(d0, d1, 0.4)
        resid = max(resid, abs(dd - d0 + d1 * math.exp(2 * dd * 0.4)))
    checks.append(("Halanay residual", resid, resid <= 1e-10))
    sc = load_scenario("example1-matched")
    ks = compute_kernels(sc.plant, sc.gains, 0.04)
    cert = minimize_beta(sc.plant, sc.gains, "dirichlet", sc.tuning_params(), kernels=ks)
    traj = simulate(sc.plant, ControlLaw("dirichlet", ks, sc.plant.u_bar),
                    sc.simulation.initial.build(0.04), sc.simulation.T,
                    monitor=cert.tuning, record_stride=5)
    excess = float(np.max(traj.V) / traj.V_initial_sup)
    checks.append(("max V / sup V0 (matched)", excess,
                   cert.feasible and excess <= 1.0 + 1e-9 and traj.halanay_violations == 0))

    ok = all(flag for _, _, flag in checks)
    assert acceptance_log(6, ok, "property suites: " + fmt(checks))


def test_criterion_7_heat_oracle(acceptance_log):
    plant = PlantParams(A=[[0.0]], A1=[[0.0]], B=[[0.0]], a=0.0, a2=0.0, h0=0.4, h=0.4)
    x = grid(0.04)
    traj = simulate(plant, ZeroLaw("neumann", 1, 0.04), InitialData.constant([0.0], np.cos(np.pi * x)),
                    0.1, dt=2e-4, field_stride=500)
    err = float(np.max(np.abs(traj.fields[-1] - math.exp(-np.pi**2 * 0.1) * np.cos(np.pi * x))))
    assert traj.field_times[-1] == pytest.approx(0.1)
    assert acceptance_log(7, err <= 2e-3, f"heat oracle max error {err:.3g} (tol 2e-3)")
