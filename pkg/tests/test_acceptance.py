"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` or directly as a script.
Each check returns ``(passed, detail)``; the wall-clock time is part of the
verdict and is compared against the criterion's budget.
"""
import math
import sys
import time

import numpy as np
import pytest

from magflow.examples.burns import (build_burns_system, burns_certificate_experiment,
                                    non_anosov_witness)
from magflow.examples.cohomology import (half_plane_primitive, homology_relation_check,
                                         magnetic_length, orbit_curve, perturbed_curves)
from magflow.flow import FlowSettings, integrate, speed_residual
from magflow.geom import (Box, MagneticIntensity, MagneticSystem, UnitTangent, curvature_fd_error,
                          exponential_cylinder, flat_plane, half_plane, round_sphere, tanh_cylinder,
                          wavy_plane)
from magflow.hyperbolic import (HyperbolicCylinder, closed_orbit_length_formula, conjugacy_matrix,
                                find_closed_orbit, hypercycle_ray_report, intertwining_sweep,
                                mls_scaling_table)
from magflow.stability import jacobi_solve, riccati_jacobi_consistency, riccati_solve


def hp(b):
    return MagneticSystem(half_plane(), MagneticIntensity.constant(b))


def check_mls_scaling():
    rows = mls_scaling_table([1.0, 2.0, 3.7], [0.0, 0.3, 0.5, 0.9])
    worst = max(r.abs_err if r.converged else math.inf for r in rows)
    return len(rows) == 12 and worst < 1e-6, f"12 orbits, max |period - l/sqrt(1-b^2)| = {worst:.2e}"


def check_hypercycle():
    b, ell = 0.5, 2.0
    c = math.sqrt(1 - b * b)
    start = UnitTangent((b, c), math.atan2(c, b))
    period = closed_orbit_length_formula(ell, b)
    traj = integrate(hp(b), start, FlowSettings(period, sample_spacing=1e-3))
    rep = hypercycle_ray_report(b, traj)
    ok = rep["sqrt"] < 1e-6 and rep["follows"] == "sqrt" and traj.times[-1] == period
    return ok, (f"dist to (rb, r sqrt(1-b^2)) = {rep['sqrt']:.2e}, "
                f"to (rb, r(1-b^2)) = {rep['printed']:.2e}, follows {rep['follows']}")


def check_psl():
    sweep = intertwining_sweep(n=100, seed=0, t_max=5.0)
    identity = all(np.array_equal(conjugacy_matrix(0.0, b), np.eye(2)) for b in (-0.9, 0.0, 0.5))
    ok = sweep["max_residual"] < 1e-11 and identity
    return ok, f"100 draws, max residual {sweep['max_residual']:.2e}, c_0 == I: {identity}"


def _consistency_fleet():
    start = UnitTangent((0.1, 1.0), 0.7)
    cases = [(hp(b), start, 5.0) for b in (0.0, 0.5, 0.8)]
    cases += [
        (MagneticSystem(flat_plane(), MagneticIntensity.constant(0.0)), start, 5.0),
        (MagneticSystem(tanh_cylinder(), MagneticIntensity.constant(0.0)), start, 5.0),
        (MagneticSystem(exponential_cylinder(0.7), MagneticIntensity.constant(0.3)), start, 5.0),
        # positive curvature: stop well before the first conjugate point
        (MagneticSystem(round_sphere(), MagneticIntensity.constant(0.0)),
         UnitTangent((0.1, 0.2), 0.7), 2.0),
    ]
    pairs = [(1.0, 1.0), (1.0, 0.5), (2.0, 3.0)]
    worst = 0.0
    for k, (system, st, T) in enumerate(cases):
        traj = integrate(system, st, FlowSettings(T, sample_spacing=1e-2))
        y0, ydot0 = pairs[k % len(pairs)]
        worst = max(worst, riccati_jacobi_consistency(system, traj, y0, ydot0).residual)
    return len(cases), worst


def check_riccati():
    system = hp(0.0)
    traj = integrate(system, UnitTangent((0.0, 1.0), 0.7), FlowSettings(5.0))
    run = riccati_solve(system, traj, 0.0)
    t = np.linspace(0.0, 5.0, 501)
    tanh_err = float(np.max(np.abs(run(t) - np.tanh(t))))
    fixed = 0.0
    for b in (0.0, 0.5):
        c = math.sqrt(1 - b * b)
        tr = integrate(hp(b), UnitTangent((0.4, 1.3), 2.0), FlowSettings(5.0))
        fixed = max(fixed, abs(riccati_solve(hp(b), tr, c).final - c))
    n_cases, consistency = _consistency_fleet()
    ok = tanh_err < 1e-8 and fixed < 1e-8 and consistency < 1e-7
    return ok, (f"|u - tanh| = {tanh_err:.2e}, |u(T) - sqrt(1-b^2)| = {fixed:.2e}, "
                f"consistency on {n_cases} orbits = {consistency:.2e}")


def check_burns_construction():
    burns = build_burns_system()
    report = burns.clauses
    clauses = {c.name: c for c in report}
    grid_core, grid_out = clauses["magnetic_core"], clauses["magnetic_outside"]
    w = non_anosov_witness(burns.profile)
    ex = burns.exactness()
    ok = (all(c.passed for c in report) and w["holds"] and w["K0"] > 0
          and w["parallel_geodesic_curvature"] == 0.0 and abs(ex["total"]) < 1e-8)
    # a passing clause stores bound - sup as its margin
    core_sup, out_sup = 0.5 - grid_core.margin, -0.75 - grid_out.margin
    return ok, (f"{len(report)} clauses on 2001-point grids, core sup {core_sup:.4f} <= 1/2, "
                f"outside sup {out_sup:.6f} <= -3/4 (margin {grid_out.margin:.1e}), "
                f"K(0) = {w['K0']:.3g}, "
                f"|flux| = {abs(ex['total']):.1e}")


def check_burns_certificate():
    burns = build_burns_system()
    first = burns_certificate_experiment(burns, n=10_000, seed=0)
    again = burns_certificate_experiment(burns, n=10_000, seed=0)
    cert = first.certificate
    blow_ups = sum(1 for v in cert.violations if v["kind"] == "blowup")
    same = first.to_json() == again.to_json()
    ok = cert.passed and blow_ups == 0 and same
    return ok, (f"{cert.n} samples, {len(cert.violations)} violations, {blow_ups} blow-ups, "
                f"u(T) in [{cert.u_T_min:.4f}, {cert.u_T_max:.4f}], re-run identical: {same}")


def check_minimality():
    cyl = HyperbolicCylinder(2.0)
    orbit = find_closed_orbit(cyl.system(0.5), cyl, 1, UnitTangent((0.0, 1.0), math.pi / 2))
    prim = half_plane_primitive(half_plane(), 0.5)
    ref = orbit_curve(orbit)
    L_ref = magnetic_length(prim, ref, ref)
    gaps = [magnetic_length(prim, c, ref) - L_ref
            for c in perturbed_curves(orbit, cyl, 200, seed=0)]
    return min(gaps) >= -1e-9, f"200 perturbations, min L - L_ref = {min(gaps):.2e}"


def check_invariants():
    results = {}
    rng = np.random.default_rng(0)

    system = MagneticSystem(wavy_plane(0.4), MagneticIntensity.constant(0.3))
    gap = 0.0
    for _ in range(10):
        start = UnitTangent(tuple(rng.uniform(-0.5, 0.5, 2)), rng.uniform(0, 2 * math.pi))
        t1, t2 = rng.uniform(0.2, 2.0, 2)
        a = integrate(system, start, FlowSettings(t1))
        ab = integrate(system, a.end, FlowSettings(t2))
        whole = integrate(system, start, FlowSettings(t1 + t2))
        gap = max(gap, float(np.max(np.abs(ab.end.as_array() - whole.end.as_array()))))
    results["semigroup"] = (gap < 1e-7, gap)

    speed = 0.0
    for _ in range(10):
        start = UnitTangent((rng.uniform(-1, 1), rng.uniform(0.5, 2)), rng.uniform(0, 2 * math.pi))
        traj = integrate(hp(rng.uniform(-1.5, 1.5)), start, FlowSettings(2.0, sample_spacing=5e-4))
        speed = max(speed, speed_residual(traj))
    results["unit_speed"] = (speed < 1e-6, speed)

    fleet = [(half_plane(), Box(-2, 2, 0.2, 3)), (round_sphere(), Box(-3, 3, -3, 3)),
             (wavy_plane(0.3), Box(-4, 4, -4, 4)), (tanh_cylinder(), Box(-5, 5, 0, 2 * math.pi)),
             (exponential_cylinder(0.7), Box(-5, 5, 0, 2 * math.pi))]
    fd = max(curvature_fd_error(chart, 101, box) for chart, box in fleet)
    results["curvature_fd"] = (fd < 1e-6, fd)

    worst = -math.inf
    for _ in range(10):
        start = UnitTangent(tuple(rng.uniform(-0.5, 0.5, 2)), rng.uniform(0, 2 * math.pi))
        traj = integrate(system, start, FlowSettings(3.0))
        u0, du = rng.uniform(0, 2, 2)
        lo, hi = riccati_solve(system, traj, u0), riccati_solve(system, traj, u0 + du)
        t_end = min(x for x in (lo.blow_up, hi.blow_up, 3.0) if x is not None)
        t = np.linspace(0, t_end, 200)[:-1]
        worst = max(worst, float(np.max(lo(t) - hi(t))))
    results["comparison"] = (worst <= 1e-9, worst)

    sphere = MagneticSystem(round_sphere(), MagneticIntensity.radial(lambda x: 0.5 * np.sin(x),
                                                                   lambda x: 0.5 * np.cos(x)))
    traj = integrate(sphere, UnitTangent((0.2, 0.1), 0.4), FlowSettings(6.0))
    a, b = jacobi_solve(sphere, traj, 1.0, 0.0), jacobi_solve(sphere, traj, 0.3, 1.0)
    drift = float(np.ptp(a.y * b.ydot - b.y * a.ydot))
    results["wronskian"] = (drift < 1e-9, drift)

    sym = max(abs(homology_relation_check(A, A, c, -c, chi))
              for A in (1.0, 4 * math.pi, 37.5) for c in (0.0, 0.3, -0.8) for chi in (-2, -6))
    results["homology_symmetry"] = (sym == 0.0, sym)

    ok = all(p for p, _ in results.values())
    detail = ", ".join(f"{k} {'ok' if p else 'BAD'} ({v:.1e})" for k, (p, v) in results.items())
    return ok, detail


CRITERIA = [
    (1, "MLS scaling law", check_mls_scaling, 30.0),
    (2, "hypercycle invariance", check_hypercycle, 5.0),
    (3, "PSL intertwining", check_psl, 1.0),
    (4, "Riccati analytics", check_riccati, 5.0),
    (5, "Burns construction", check_burns_construction, 10.0),
    (6, "Burns Anosov certificate", check_burns_certificate, 2 * 300.0),
    (7, "magnetic length minimality", check_minimality, 60.0),
    (8, "structural invariants", check_invariants, 60.0),
]


def run_criterion(number, title, check, budget):
    """Run one check; return ``(passed, line)``.

    The certificate budget covers two runs (the re-run is part of the check).
    """
    t0 = time.perf_counter()
    try:
        passed, detail = check()
    except Exception as exc:  # a crash is a failure, reported on its line
        passed, detail = False, f"{type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - t0
    passed = bool(passed) and elapsed < budget
    verdict = "PASS" if passed else "FAIL"
    return passed, f"{verdict} [{number}] {title}: {detail} ({elapsed:.2f}s, budget {budget:g}s)"


@pytest.mark.parametrize("number, title, check, budget", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number, title, check, budget, capsys):
    passed, line = run_criterion(number, title, check, budget)
    with capsys.disabled():
        print("\n" + line)
    assert passed, line


if __name__ == "__main__":
    outcomes = [run_criterion(*c) for c in CRITERIA]
    for _, line in outcomes:
        print(line)
    sys.exit(0 if all(p for p, _ in outcomes) else 1)
