import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satbackstep import (
    ControlLaw, DelayProfile, InitialData, PlantParams, compute_kernels, minimize_beta, simulate,
)
from satbackstep.plant import grid
from satbackstep.simulator import (
    CFLError, HistoryBuffer, LagOutOfWindowError, ZeroLaw, delayed_sample, simulate_target,
)
from satbackstep.transform import operators


def heat_plant(a=0.0, **kw):
    base = dict(A=[[0.0]], A1=[[0.0]], B=[[0.0]], a=a, a2=0.0, h0=0.4, h=0.4)
    base.update(kw)
    return PlantParams(**base)


@pytest.mark.parametrize("actuation", ["neumann", "dirichlet"])
def test_heat_oracle(actuation):
    # Neumann: cos(pi x) keeps u_x = 0 at both ends; Dirichlet: cos(pi x / 2) vanishes at 1
    dx, T, a = 0.04, 0.2, 0.3
    k = math.pi if actuation == "neumann" else math.pi / 2
    x = grid(dx)
    law = ZeroLaw(actuation, 1, dx)
    init = InitialData.constant([0.0], np.cos(k * x))
    traj = simulate(heat_plant(a=a), law, init, T, dt=2e-4, field_stride=1000)
    exact = np.cos(k * x) * math.exp((a - k * k) * T)
    assert traj.field_times[-1] == pytest.approx(T)
    assert np.max(np.abs(traj.fields[-1] - exact)) <= 2e-3


def test_zero_data_gives_zero_trajectory(ex1_kernels, ex1):
    plant, _ = ex1
    law = ControlLaw("dirichlet", ex1_kernels, plant.u_bar)
    traj = simulate(plant, law, InitialData.constant([0.0], np.zeros(26)), 0.5)
    assert np.all(traj.X == 0) and np.all(traj.fields == 0) and np.all(traj.U == 0)
    assert traj.status == "completed"


def test_cfl_violation_rejected(ex1):
    law = ZeroLaw("dirichlet", 1, 0.04)
    with pytest.raises(CFLError):
        simulate(ex1[0], law, InitialData.constant([0.0], np.zeros(26)), 1.0, dt=1e-3)


def test_initial_data_shape_checked(ex1):
    law = ZeroLaw("dirichlet", 1, 0.04)
    with pytest.raises(ValueError):
        simulate(ex1[0], law, InitialData.constant([0.0], np.zeros(10)), 1.0)


# history buffer ---------------------------------------------------------------------


def test_history_serves_initial_function_for_non_positive_times():
    init = InitialData(X=lambda s: np.array([s]), u=lambda s: np.full(3, 2 * s))
    hb = HistoryBuffer(init, 1, 3, 0.01, 0.4)
    hb.push(0, np.array([0.0]), np.zeros(3))
    X, u = hb.sample(-0.25)
    assert X[0] == -0.25 and np.all(u == -0.5)


def test_history_exact_lookup_and_window():
    hb = HistoryBuffer(InitialData.constant([0.0], np.zeros(2)), 1, 2, 0.1, 0.3)
    for k in range(20):
        hb.push(k, np.array([float(k)]), np.full(2, float(k)))
    assert hb.sample(1.7)[0][0] == 17.0
    assert hb.sample(1.75)[0][0] == pytest.approx(17.5)
    with pytest.raises(LagOutOfWindowError):
        hb.sample(0.5)
    with pytest.raises(LagOutOfWindowError):
        hb.sample(2.0)
    with pytest.raises(ValueError):
        hb.push(30, np.zeros(1), np.zeros(2))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.5, 8.0), st.integers(0, 10_000))
def test_time_varying_delay_matches_dense_storage(amp_frac, omega, seed):
    rng = np.random.default_rng(seed)
    dt, h = 0.01, 0.4
    profile = DelayProfile.sinusoid(amp_frac * h, h, omega)
    values = rng.normal(size=300)
    init = InitialData.constant([values[0]], np.zeros(2))
    hb = HistoryBuffer(init, 1, 2, dt, h)
    times = dt * np.arange(300)
    for k, v in enumerate(values):
        hb.push(k, np.array([v]), np.full(2, v))
        t = k * dt
        got = delayed_sample(hb, t, profile)[0][0]
        s = t - profile(t)
        oracle = values[0] if s <= 0 else np.interp(s, times[: k + 1], values[: k + 1])
        assert got == pytest.approx(oracle, abs=1e-12)


# closed loop ------------------------------------------------------------------------


def test_original_and_target_simulations_agree(ex1, ex1_kernels):
    plant, gains = ex1
    ks = ex1_kernels
    x = grid(ks.dx)
    u0 = 0.05 * np.cos(np.pi * x / 2)
    init = InitialData.constant([0.1], u0)
    law = ControlLaw("dirichlet", ks, plant.u_bar)
    orig = simulate(plant, law, init, 0.5)
    assert not np.any(orig.sat_active)
    ops = operators(ks)
    z0 = ops.u_to_z(np.array([0.1]), u0)
    target = simulate_target(plant, gains, ks, InitialData.constant([0.1], z0), 0.5)
    np.testing.assert_allclose(orig.X[-1], target.X[-1], rtol=2e-3)
    z_end = ops.u_to_z(orig.X[-1], orig.fields[-1])
    scale = np.max(np.abs(target.fields[-1]))
    assert np.max(np.abs(z_end - target.fields[-1])) <= 5e-2 * scale


@pytest.mark.slow
def test_grid_convergence(ex1):
    plant, gains = ex1
    ends = []
    for dx in (0.04, 0.02, 0.01):
        ks = compute_kernels(plant, gains, dx)
        x = grid(dx)
        init = InitialData.constant([0.3], 0.1 * np.cos(np.pi * x))
        traj = simulate(plant, ControlLaw("dirichlet", ks, plant.u_bar), init, 1.0,
                        dt=0.125 * dx * dx, record_stride=1000)
        ends.append(traj.X[-1, 0])
    d1, d2 = abs(ends[0] - ends[1]), abs(ends[1] - ends[2])
    assert d2 < d1 / 2
    assert d2 < 1e-3


def test_open_loop_divergence_is_flagged():
    plant = heat_plant(A=[[5.0]], B=[[1.0]])
    traj = simulate(plant, ZeroLaw("dirichlet", 1, 0.1), InitialData.constant([1.0], np.zeros(11)),
                    5.0, dt=1e-3, divergence_threshold=1e3)
    assert traj.status == "diverged" and traj.diverged
    assert traj.norm_sq[-1] > 1e3
    assert traj.final_time < 5.0


def test_saturation_is_respected(ex1, ex1_kernels):
    plant, _ = ex1
    x = grid(0.04)
    law = ControlLaw("dirichlet", ex1_kernels, plant.u_bar)
    traj = simulate(plant, law, InitialData.constant([5.0], 4 * np.cos(np.pi * x)), 1.0,
                    record_stride=10)
    assert np.any(traj.sat_active)
    assert np.max(np.abs(traj.applied)) <= plant.u_bar
    assert np.all(traj.fields[:, -1] <= plant.u_bar + 1e-12)


def test_csv_and_field_export(tmp_path, ex2, ex2_kernels):
    plant, _ = ex2
    x = grid(0.04)
    law = ControlLaw("neumann", ex2_kernels, plant.u_bar)
    traj = simulate(plant, law, InitialData.constant([0.26], 0.05 * np.cos(np.pi * x)), 0.2,
                    record_stride=100, field_stride=250)
    traj.to_csv(tmp_path / "t.csv")
    traj.dump_fields(tmp_path / "f.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["t", "X_1", "U", "sat_active", "norm_sq"]
    assert len(rows) == 1 + traj.times.shape[0]
    assert float(rows[-1][0]) == pytest.approx(0.2)
    fields = np.loadtxt(tmp_path / "f.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(fields[:, 1:], traj.fields)
    s = traj.summary()
    assert s["status"] == "completed" and s["halanay_violations"] is None


@pytest.mark.slow
def test_matched_run_satisfies_halanay(ex1):
    plant, gains = ex1
    plant = plant.replace(a2=0.4)
    ks = compute_kernels(plant, gains, 0.04)
    cert = minimize_beta(plant, gains, "dirichlet", kernels=ks)
    x = grid(0.04)
    traj = simulate(plant, ControlLaw("dirichlet", ks, plant.u_bar),
                    InitialData.constant([0.7], 0.2 * np.cos(np.pi * x)), 5.0,
                    monitor=cert.tuning, record_stride=5)
    assert traj.halanay_violations == 0
    assert np.all(traj.V <= traj.V_initial_sup * (1 + 1e-3))
    assert traj.V[-1] < 0.1 * traj.V[0]
