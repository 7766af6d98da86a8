import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magflow.flow import FlowSettings, integrate
from magflow.geom import (Box, DomainError, MagneticIntensity, MagneticSystem, UnitTangent,
                          flat_plane, half_plane, round_sphere, wavy_plane)
from magflow.stability import (SamplerBox, anosov_certificate, jacobi_solve, riccati_jacobi_consistency,
                               riccati_solve)

HYP = settings(derandomize=True, deadline=None, max_examples=15)


def orbit(system, start=UnitTangent((0.0, 1.0), 0.7), T=5.0):
    return integrate(system, start, FlowSettings(T))


def hp(b):
    return MagneticSystem(half_plane(), MagneticIntensity.constant(b))


@pytest.fixture(scope="module")
def geodesic():
    system = hp(0.0)
    return system, orbit(system)


# --- Riccati ------------------------------------------------------------------------

def test_riccati_fixed_point(geodesic):
    system, traj = geodesic
    run = riccati_solve(system, traj, 1.0)
    assert np.max(np.abs(run.values - 1.0)) < 1e-12
    assert run.blow_up is None and run.times[-1] == 5.0 and run.values[0] == 1.0


def test_riccati_tanh(geodesic):
    system, traj = geodesic
    run = riccati_solve(system, traj, 0.0)
    assert run.final == pytest.approx(0.9999092, abs=1e-7)
    assert np.max(np.abs(run.values - np.tanh(run.times))) < 1e-9
    t = np.linspace(0, 5, 37)
    assert np.max(np.abs(run(t) - np.tanh(t))) < 1e-9


@pytest.mark.parametrize("b", [0.0, 0.3, 0.5, -0.8])
def test_riccati_magnetic_fixed_point(b):
    system = hp(b)
    traj = orbit(system, UnitTangent((0.4, 1.3), 2.0))
    run = riccati_solve(system, traj, math.sqrt(1 - b * b))
    assert np.max(np.abs(run.values - math.sqrt(1 - b * b))) < 1e-9


def test_riccati_horizon_checks(geodesic):
    system, traj = geodesic
    with pytest.raises(DomainError):
        riccati_solve(system, traj, 0.0, horizon=6.0)
    with pytest.raises(ValueError):
        riccati_solve(system, traj, 0.0, horizon=0.0)
    assert riccati_solve(system, traj, 0.0, horizon=2.0).final == pytest.approx(math.tanh(2.0),
                                                                                abs=1e-10)


def test_riccati_blow_up_detected():
    # K = +1/4: u' = -u^2 - 1/4 from 0 gives u = -tan(t/2)/2, blow-up at pi
    system = MagneticSystem(flat_plane(), MagneticIntensity.constant(0.5))
    traj = orbit(system, UnitTangent((0, 0), 0), T=8.0)
    run = riccati_solve(system, traj, 0.0)
    assert run.blow_up == pytest.approx(math.pi, abs=1e-6)
    t = run.times[run.times < 3.0]
    assert np.allclose(run.values[:len(t)], -0.5 * np.tan(t / 2), atol=1e-8)


@given(st.floats(-0.5, 0.5), st.floats(0, 2 * math.pi), st.floats(0, 2), st.floats(0, 2))
@HYP
def test_riccati_comparison_principle(offset, phi, u0, du):
    system = MagneticSystem(wavy_plane(0.4), MagneticIntensity.constant(0.3))
    traj = orbit(system, UnitTangent((offset, offset), phi), T=3.0)
    lo = riccati_solve(system, traj, u0)
    hi = riccati_solve(system, traj, u0 + du)
    t_end = min(x for x in (lo.blow_up, hi.blow_up, 3.0) if x is not None)
    t = np.linspace(0, t_end, 200)[:-1]
    assert np.all(lo(t) <= hi(t) + 1e-9)


@pytest.mark.parametrize("b", [0.0, 0.5, 0.8])
def test_monotone_convergence_rate(b):
    c = math.sqrt(1 - b * b)
    system = hp(b)
    traj = orbit(system, T=10.0)
    for u0 in (0.0, 0.3, 2.0, 5.0):
        run = riccati_solve(system, traj, u0)
        gap = np.abs(run.values - c)
        assert np.all(np.diff(gap) <= 1e-12)
        # exact solution: |u - c| <= C exp(-2 c t) with C from the initial gap
        C = 2 * abs(u0 - c) / (u0 + c) * c + abs(u0 - c)
        for T in (2.0, 5.0, 10.0):
            k = np.searchsorted(run.times, T)
            assert gap[k] < C * math.exp(-c * T) + 1e-12


# --- Jacobi -------------------------------------------------------------------------

def test_jacobi_exponential(geodesic):
    system, traj = geodesic
    run = jacobi_solve(system, traj, 1.0, 1.0)
    assert np.max(np.abs(run.y / np.exp(run.times) - 1)) < 1e-10


def test_jacobi_cosh(geodesic):
    system, traj = geodesic
    run = jacobi_solve(system, traj, 1.0, 0.0)
    assert np.max(np.abs(run.y / np.cosh(run.times) - 1)) < 1e-10
    assert np.max(np.abs(run.ydot - np.sinh(run.times)) / np.cosh(run.times)) < 1e-10


def test_jacobi_superposition():
    system = MagneticSystem(wavy_plane(0.3), MagneticIntensity.constant(0.4))
    traj = orbit(system, UnitTangent((0.1, 0.2), 1.0), T=4.0)
    a = jacobi_solve(system, traj, 1.0, 0.0)
    b = jacobi_solve(system, traj, 0.0, 1.0)
    ab = jacobi_solve(system, traj, 1.0, 1.0)
    assert np.max(np.abs(a.y + b.y - ab.y)) < 1e-9
    assert np.max(np.abs(a.ydot + b.ydot - ab.ydot)) < 1e-9


def test_jacobi_wronskian():
    system = MagneticSystem(round_sphere(), MagneticIntensity.radial(lambda x: 0.5 * np.sin(x),
                                                                   lambda x: 0.5 * np.cos(x)))
    traj = orbit(system, UnitTangent((0.2, 0.1), 0.4), T=6.0)
    a = jacobi_solve(system, traj, 1.0, 0.0)
    b = jacobi_solve(system, traj, 0.3, 1.0)
    W = a.y * b.ydot - b.y * a.ydot
    assert np.ptp(W) < 1e-9


# --- consistency --------------------------------------------------------------------

def test_consistency_exponential(geodesic):
    system, traj = geodesic
    res = riccati_jacobi_consistency(system, traj, 1.0, 1.0)
    assert res.residual < 1e-8 and not res.zero_approach and res.t_star == 5.0


@pytest.mark.parametrize("b", [0.3, 0.5])
def test_consistency_fixed_point_pair(b):
    system = hp(b)
    traj = orbit(system)
    assert float(riccati_jacobi_consistency(system, traj, 1.0, math.sqrt(1 - b * b))) < 1e-8


def test_consistency_positive_curvature_zero():
    system = MagneticSystem(round_sphere(), MagneticIntensity.constant(0.0))
    traj = orbit(system, UnitTangent((0.0, 0.0), 0.0), T=3.0)
    res = riccati_jacobi_consistency(system, traj, 1.0, 0.0)
    assert res.zero_approach
    assert res.t_star == pytest.approx(math.pi / 2, abs=1e-5)
    assert res.blow_up is not None and res.blow_up == pytest.approx(math.pi / 2, abs=1e-5)


def test_consistency_generic_orbit_before_zero():
    system = MagneticSystem(wavy_plane(0.3), MagneticIntensity.constant(0.2))
    traj = orbit(system, UnitTangent((0.3, 0.0), 0.2), T=2.0)
    assert riccati_jacobi_consistency(system, traj, 1.0, 0.5).residual < 1e-8


def test_consistency_needs_nonzero_y0(geodesic):
    with pytest.raises(ValueError):
        riccati_jacobi_consistency(*geodesic, 0.0, 1.0)


# --- certificate --------------------------------------------------------------------

def test_certificate_geodesic_passes():
    rep = anosov_certificate(hp(0.0), SamplerBox((-1, 1), (0.5, 2)), T=5, H=3, n=100, seed=1)
    assert rep.passed and rep.violations == []
    assert rep.u_T_min > 0.99 and rep.u_T_max < 1.01


def test_certificate_magnetic_half_plane():
    rep = anosov_certificate(hp(0.5), SamplerBox((-1, 1), (0.5, 2)), T=8, H=3, n=100, seed=2)
    assert rep.passed
    assert rep.u_T_min == pytest.approx(math.sqrt(0.75), abs=1e-4)
    assert rep.u_T_max == pytest.approx(math.sqrt(0.75), abs=1e-4)


def test_certificate_positive_toy_fails():
    system = MagneticSystem(flat_plane(), MagneticIntensity.constant(0.5))
    rep = anosov_certificate(system, SamplerBox((-1, 1), (-1, 1)), T=10, H=3, n=20, seed=0,
                             u0_policy=(0.0,))
    assert not rep.passed and len(rep.violations) == 20
    kinds = {v["uT_or_blowup"]["kind"] for v in rep.violations}
    assert kinds == {"blowup"}
    assert all(v["uT_or_blowup"]["t"] == pytest.approx(math.pi, abs=1e-5) for v in rep.violations)


def test_certificate_bound_violation_and_exit():
    # at T = 0.1 u has barely moved from 0, below 1/H
    rep = anosov_certificate(hp(0.0), SamplerBox((-1, 1), (0.5, 2)), T=0.1, H=3, n=5, seed=0)
    kinds = sorted({v["uT_or_blowup"]["kind"] for v in rep.violations})
    assert kinds == ["bound"]
    assert all(v["u0"] == 0.0 for v in rep.violations)
    small = MagneticSystem(half_plane(Box(-1, 1, 0.5, 2)), MagneticIntensity.constant(0.0))
    rep = anosov_certificate(small, SamplerBox((-0.5, 0.5), (0.9, 1.1)), T=5, H=3, n=5, seed=0)
    assert {v["uT_or_blowup"]["kind"] for v in rep.violations} == {"exit"}


def test_certificate_deterministic_and_thread_independent():
    args = (MagneticSystem(wavy_plane(0.2), MagneticIntensity.constant(1.2)),
            SamplerBox((-1, 1), (-1, 1)), 3.0, 3.0, 40, 7)
    a = anosov_certificate(*args).to_json()
    b = anosov_certificate(*args).to_json()
    c = anosov_certificate(*args, threads=3).to_json()
    assert a == b == c
    d = anosov_certificate(*args[:-1], 8).to_json()
    assert d != a


def test_certificate_report_schema():
    rep = anosov_certificate(hp(0.5), SamplerBox((-1, 1), (0.5, 2)), 2.0, 3.0, 4, 0,
                             config={"name": "demo"})
    data = json.loads(rep.to_json())
    for key in ("config", "seed", "n", "T", "H", "pass", "violations", "u0_policy", "sampler",
                "note"):
        assert key in data
    assert data["u0_policy"] == [0.0, 3.0] and data["config"] == {"name": "demo"}
    assert rep.summary().startswith("PASS")


def test_certificate_errors():
    box = SamplerBox((-1, 1), (0.5, 2))
    with pytest.raises(DomainError):
        anosov_certificate(hp(0.0), SamplerBox((-1, 1), (-0.5, 2)), 1.0, 3.0, 5, 0)
    with pytest.raises(ValueError):
        anosov_certificate(hp(0.0), box, 0.0, 3.0, 5, 0)
    with pytest.raises(ValueError):
        anosov_certificate(hp(0.0), box, 1.0, 1.0, 5, 0)
    with pytest.raises(ValueError):
        anosov_certificate(hp(0.0), box, 1.0, 3.0, 0, 0)
    with pytest.raises(ValueError):
        SamplerBox((1, -1), (0.5, 2)).check(half_plane())


def test_sampler_draws_inside_box():
    box = SamplerBox((-1, 1), (0.5, 2), (0.0, 1.0))
    pts = box.draw(500, 3)
    assert pts.shape == (500, 3)
    assert np.all(pts[:, 0] >= -1) and np.all(pts[:, 0] <= 1)
    assert np.all(pts[:, 1] >= 0.5) and np.all(pts[:, 2] <= 1.0)
    assert np.array_equal(pts, box.draw(500, 3))
