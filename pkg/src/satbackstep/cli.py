"""Command-line entry point: design, simulate, verify-kernels, report.

Exit codes: 0 ok, 1 internal error, 2 infeasible certificate, 3 undetermined
certificate, 4 missing artifact, 5 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .certify import Certificate, admissible_set_membership, minimize_beta
from .controller import ControlLaw, dirichlet_u, dirichlet_u_target, neumann_u, neumann_u_target
from .kernels import DIAGONAL_KEYS, KernelSet, compute_kernels, kernel_scale, verify_kernel_pdes
from .plant import DIRICHLET, InitialData, grid
from .scenario import BUNDLED, load_scenario
from .simulator import simulate, simulate_target
from .transform import CoupledState, operators, u_to_z

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_UNDETERMINED = 3
EXIT_MISSING = 4
EXIT_VERIFY_FAILED = 5

log = logging.getLogger("satbackstep")

KERNELS_FILE = "kernels.json"
CERTIFICATE_FILE = "certificate.json"
SUMMARY_FILE = "summary.json"
TRAJECTORY_FILE = "trajectory.csv"
FIELDS_FILE = "fields.csv"

EXACT_KEYS = DIAGONAL_KEYS + ("gamma_initial", "psi_initial")


class MissingArtifact(FileNotFoundError):
    pass


def _scenario(args):
    sc = load_scenario(args.scenario)
    return sc.with_grid(dx=getattr(args, "dx", None), dt=getattr(args, "dt", None))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2))


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifact(f"missing artifact {path}; run 'satbackstep design' first")
    return path


def cmd_design(args) -> int:
    sc = _scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kernels = compute_kernels(sc.plant, sc.gains, sc.simulation.dx)
    cert = minimize_beta(sc.plant, sc.gains, sc.actuation, sc.tuning_params(),
                         sc.search_config(args.seed), kernels=kernels)
    kernels.to_json(out / KERNELS_FILE)
    cert.to_json(out / CERTIFICATE_FILE, indent=2)
    print(f"scenario {sc.name}: {cert.status}")
    if cert.feasible:
        coef = ", ".join(f"{c:.4g}" for c in cert.coefficients)
        print(f"beta = {cert.beta:.6g}, radius = {cert.admissible_radius:.4g}, coefficients = ({coef})")
    else:
        print(f"diagnostic: {cert.message}", file=sys.stderr)
    print(f"c1 = {cert.c1:.4g}, c2 = {cert.c2:.4g}, M1 = {cert.M1:.4g}, M2 = {cert.M2:.4g}, "
          f"zeta = {cert.zeta:.4g}")
    if cert.status == "infeasible":
        return EXIT_INFEASIBLE
    if cert.status == "undetermined":
        return EXIT_UNDETERMINED
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    out = Path(args.out)
    kernels = KernelSet.from_json(_require(out / KERNELS_FILE))
    cert = Certificate.from_json(_require(out / CERTIFICATE_FILE))
    if abs(kernels.dx - sc.simulation.dx) > 1e-12:
        log.info("using the kernel grid dx = %g", kernels.dx)
        sc = sc.with_grid(dx=kernels.dx)
    law = ControlLaw(sc.actuation, kernels, sc.plant.u_bar)
    initial = sc.simulation.initial.build(kernels.dx)
    monitor = cert.tuning if (sc.simulation.monitor and cert.feasible) else None
    traj = simulate(sc.plant, law, initial, sc.simulation.T, dt=sc.simulation.dt,
                    monitor=monitor, record_stride=sc.simulation.record_stride,
                    field_stride=int(sc.output.get("field_dump_stride", 50)))
    traj.to_csv(out / TRAJECTORY_FILE)
    traj.dump_fields(out / FIELDS_FILE)
    summary = traj.summary()
    norms = sc.simulation.initial.norms(kernels.dx)
    if cert.feasible:
        value, inside = admissible_set_membership(
            cert, norms["X0_max"], norms["u0_norm_sq"],
            norms["u0_deriv_norm_sq"] if sc.actuation != DIRICHLET else None)
        summary["membership"] = {"value": value, "inside": inside}
    else:
        summary["membership"] = None
        summary["membership_note"] = f"certificate is {cert.status}; no admissible set"
    tail = traj.times >= 1.0
    summary["saturated_samples_after_t1"] = int(np.count_nonzero(traj.sat_active[tail]))
    summary["converged"] = bool(traj.status == "completed"
                                and summary["terminal_norm_sq"] <= 1e-2 * max(summary["initial_norm_sq"], 1e-300))
    summary["scenario"] = sc.name
    summary["initial_norms"] = norms
    _write_json(out / SUMMARY_FILE, summary)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _random_state(n, dx, rng, modes=4):
    x = grid(dx)
    u = sum(rng.normal() / (m + 1) ** 2 * np.cos(m * np.pi * x) for m in range(modes))
    return rng.normal(size=n), u


def verification_report(sc, kernels: KernelSet, seed: int = 0, dual_sim_T: float = 0.5) -> dict:
    """Pass/fail per property with the measured residual and tolerance."""
    plant, gains, dx = sc.plant, sc.gains, kernels.dx
    scale = kernel_scale(kernels)
    props = {}

    def add(name, value, tol):
        props[name] = {"value": float(value), "tol": float(tol), "pass": bool(value <= tol)}

    res = verify_kernel_pdes(kernels, plant, gains)
    for key, value in res.items():
        tol = 1e-10 * scale if key in EXACT_KEYS else 5.0 * dx * dx * scale + 1e-9
        add(f"kernel.{key}", value, tol)

    rng = np.random.default_rng(seed)
    ops = operators(kernels)
    X, u = _random_state(plant.n, dx, rng)
    rt_tol = 10.0 * dx**4 * scale**2 + 1e-12
    w = ops.u_to_w(X, u)
    add("transform.u_w_u", np.max(np.abs(ops.w_to_u(X, w) - u)), rt_tol)
    z = ops.w_to_z(w)
    add("transform.w_z_w", np.max(np.abs(ops.z_to_w(z) - w)), rt_tol)

    state = CoupledState.from_arrays(X, u, dx)
    zs = u_to_z(state, kernels)
    if sc.actuation == DIRICHLET:
        gap = abs(dirichlet_u(state, kernels) - dirichlet_u_target(zs, kernels))
    else:
        gap = abs(neumann_u(state, kernels) - neumann_u_target(zs, kernels))
    add("controller.dual_representation", gap, 1e-4)

    # original loop (unsaturated) mapped to target coordinates vs direct target run
    dt = min(sc.simulation.dt, 0.25 * dx * dx)
    law = ControlLaw(sc.actuation, kernels, saturated=False)
    X0, u0 = _random_state(plant.n, dx, rng)
    if sc.actuation == DIRICHLET:
        u0[-1] = law.evaluate(X0, u0)[0]
    orig = simulate(plant, law, InitialData.constant(X0, u0), dual_sim_T, dt=dt,
                    field_stride=max(1, int(round(0.1 / dt))))
    z0 = ops.u_to_z(X0, u0)
    targ = simulate_target(plant, gains, kernels, InitialData.constant(X0, z0), dual_sim_T,
                           sc.actuation, dt=dt, field_stride=max(1, int(round(0.1 / dt))))
    mapped = np.array([ops.u_to_z(Xk, uk) for Xk, uk in
                       zip(orig.X[:: max(1, int(round(0.1 / dt)))], orig.fields)])
    m = min(len(mapped), len(targ.fields))
    zmax = max(1.0, float(np.max(np.abs(targ.fields[:m]))))
    gap = float(np.max(np.abs(mapped[:m] - targ.fields[:m]))) / zmax
    add("simulation.dual_target", gap, (dx * dx + dt) * scale)
    return {"scenario": sc.name, "dx": dx, "properties": props,
            "all_pass": all(p["pass"] for p in props.values())}


def cmd_verify(args) -> int:
    sc = _scenario(args)
    if args.kernels:
        kernels = KernelSet.from_json(_require(Path(args.kernels)))
        sc = sc.with_grid(dx=kernels.dx)
    else:
        kernels = compute_kernels(sc.plant, sc.gains, sc.simulation.dx)
    report = verification_report(sc, kernels, seed=args.seed)
    text = json.dumps(report, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verification.json").write_text(text)
    print(text)
    return EXIT_OK if report["all_pass"] else EXIT_VERIFY_FAILED


def cmd_report(args) -> int:
    out = Path(args.out)
    cert = Certificate.from_json(_require(out / CERTIFICATE_FILE))
    lines = [f"actuation: {cert.actuation}", f"status: {cert.status}"]
    if cert.message:
        lines.append(f"message: {cert.message}")
    lines.append(f"decay rate delta: {cert.decay_delta:.6g}")
    consts = {"zeta": cert.zeta, "c1": cert.c1, "c2": cert.c2, "c3": cert.c3, "xi": cert.xi,
              "M1": cert.M1, "M2": cert.M2}
    lines.append("constants: " + ", ".join(f"{k} = {v:.4g}" for k, v in consts.items() if v is not None))
    if cert.feasible:
        lines.append(f"beta: {cert.beta:.6g} (radius {cert.admissible_radius:.4g})")
        lines.append("admissible-set coefficients: "
                     + ", ".join(f"{c:.4g}" for c in cert.coefficients))
    summary_path = out / SUMMARY_FILE
    if summary_path.exists():
        s = json.loads(summary_path.read_text())
        lines.append(f"simulation: {s['status']}, terminal |X|^2+||u||^2 = {s['terminal_norm_sq']:.4g}"
                     f" (initial {s['initial_norm_sq']:.4g}), max |U| = {s['max_abs_U']:.4g}, "
                     f"saturated samples = {s['saturated_samples']}")
        if s.get("membership"):
            lines.append(f"membership value: {s['membership']['value']:.4g}")
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="satbackstep", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    scen_help = f"scenario JSON file or bundled name ({', '.join(sorted(BUNDLED))})"

    d = sub.add_parser("design", help="compute kernels and the LMI certificate")
    d.add_argument("--scenario", required=True, help=scen_help)
    d.add_argument("--out", required=True)
    d.add_argument("--dx", type=float)
    d.add_argument("--seed", type=int, default=None, help="optimizer restart seed")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="run the closed loop with designed kernels")
    s.add_argument("--scenario", required=True, help=scen_help)
    s.add_argument("--out", required=True)
    s.add_argument("--dx", type=float)
    s.add_argument("--dt", type=float)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify-kernels", help="kernel residuals, round trips, dual oracles")
    v.add_argument("--scenario", required=True, help=scen_help)
    v.add_argument("--kernels", help="kernel table JSON to check instead of recomputing")
    v.add_argument("--out")
    v.add_argument("--dx", type=float)
    v.add_argument("--dt", type=float)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="summarise design and simulation artifacts")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
