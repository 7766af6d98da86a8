"""Riccati and Jacobi equations along magnetic geodesics, and the sampled
Anosov certificate.

Along an orbit the magnetic curvature ``K(t)`` enters

    u' + u^2 + K(t) = 0        (Riccati)
    y'' + K(t) y = 0           (Jacobi)

and ``u = y'/y`` links the two. If every solution with ``u(0) >= 0`` stays in
``[1/H, H]`` at a fixed time ``T`` the flow is Anosov; the certificate below
tests this on finitely many sampled orbits, which is evidence, not a proof.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _dopri
from ._io import json_text
from .flow import Trajectory
from .geom import DomainError, MagneticSystem, magnetic_curvature_at

BLOWUP = 1e8
CERTIFICATE_NOTE = ("empirical check over finitely many sampled orbits, a finite horizon "
                    "and the extreme initial values only; not a proof of the Anosov property")


@dataclass
class RiccatiRun:
    trajectory: Trajectory
    u0: float
    times: np.ndarray
    values: np.ndarray
    blow_up: Optional[float] = None
    dense: Optional[_dopri.DenseSteps] = field(default=None, repr=False)

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def __call__(self, t):
        return self.dense(t)[..., 0]


@dataclass
class JacobiRun:
    trajectory: Trajectory
    y0: float
    ydot0: float
    times: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    dense: Optional[_dopri.DenseSteps] = field(default=None, repr=False)

    def __call__(self, t):
        """``(y, y')`` at ``t``."""
        return self.dense(t)


def _curvature_along(system: MagneticSystem, trajectory: Trajectory):
    def K(t):
        Y = np.atleast_2d(trajectory.interpolate(t))
        return magnetic_curvature_at(system, Y[:, 0], Y[:, 1], Y[:, 2])
    return K


def _check_horizon(trajectory: Trajectory, horizon: Optional[float]) -> float:
    T = trajectory.duration if horizon is None else float(horizon)
    if not T > 0:
        raise ValueError("horizon must be positive")
    if T > trajectory.duration * (1 + 1e-12):
        raise DomainError(f"horizon {T} exceeds the trajectory ({trajectory.duration})")
    return T


def _grid(trajectory: Trajectory, t_end: float) -> np.ndarray:
    t = trajectory.times[trajectory.times < t_end]
    return np.append(t, t_end)


def riccati_solve(system: MagneticSystem, trajectory: Trajectory, u0: float, *,
                  horizon: Optional[float] = None, rel_tol: float = 1e-11,
                  abs_tol: float = 1e-12, blow_up: float = BLOWUP) -> RiccatiRun:
    """Solve ``u' = -u^2 - K`` along ``trajectory`` from ``u(0) = u0``.

    ``K`` comes from the trajectory's dense interpolant. Reaching
    ``|u| = blow_up`` stops the run and records the time in ``blow_up``.
    """
    T = _check_horizon(trajectory, horizon)
    K = _curvature_along(system, trajectory)

    def fun(t, Y):
        return -Y * Y - K(t)[:, None]

    def event(t, Y):
        return blow_up - np.abs(Y)

    sol = _dopri.integrate_lanes(fun, np.array([[float(u0)]]), T, rtol=rel_tol, atol=abs_tol,
                                 events=event, record=True)
    t_stop = float(sol.t[0])
    blown = int(sol.status[0]) >= _dopri.EVENT
    times = _grid(trajectory, t_stop)
    values = sol.dense[0](times)[:, 0]
    values[0], values[-1] = u0, sol.y[0, 0]
    return RiccatiRun(trajectory, float(u0), times, values,
                      blow_up=t_stop if blown else None, dense=sol.dense[0])


def jacobi_solve(system: MagneticSystem, trajectory: Trajectory, y0: float, ydot0: float, *,
                 horizon: Optional[float] = None, rel_tol: float = 1e-12,
                 abs_tol: float = 1e-13) -> JacobiRun:
    """Solve ``y'' + K y = 0`` along ``trajectory``."""
    T = _check_horizon(trajectory, horizon)
    K = _curvature_along(system, trajectory)

    def fun(t, Y):
        return np.column_stack([Y[:, 1], -K(t) * Y[:, 0]])

    sol = _dopri.integrate_lanes(fun, np.array([[float(y0), float(ydot0)]]), T,
                                 rtol=rel_tol, atol=abs_tol, record=True)
    times = _grid(trajectory, T)
    Y = sol.dense[0](times)
    Y[0] = (y0, ydot0)
    Y[-1] = sol.y[0]
    return JacobiRun(trajectory, float(y0), float(ydot0), times, Y[:, 0].copy(),
                     Y[:, 1].copy(), dense=sol.dense[0])


@dataclass
class ConsistencyResult:
    residual: float
    t_star: float
    zero_approach: bool
    blow_up: Optional[float]

    def __float__(self):
        return self.residual


def riccati_jacobi_consistency(system: MagneticSystem, trajectory: Trajectory, y0: float,
                               ydot0: float, *, horizon: Optional[float] = None,
                               zero_tol: float = 1e-6, n_grid: int = 2001) -> ConsistencyResult:
    """Sup of ``|u - y'/y|`` up to the first time ``|y| < zero_tol``.

    ``u`` solves the Riccati equation from ``ydot0 / y0``. Whether the
    Riccati run blew up is reported alongside.
    """
    if y0 == 0:
        raise ValueError("y0 must be non-zero")
    jac = jacobi_solve(system, trajectory, y0, ydot0, horizon=horizon)
    ric = riccati_solve(system, trajectory, ydot0 / y0, horizon=horizon)
    T = jac.times[-1]
    t = np.linspace(0.0, T, n_grid)
    sign0 = math.copysign(1.0, y0)

    def reached(y):
        return (np.abs(y) < zero_tol) | (np.sign(y) != sign0)

    hit = np.nonzero(reached(jac(t)[:, 0]))[0]
    t_star = T
    if hit.size:
        lo, hi = t[hit[0] - 1], t[hit[0]]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if reached(jac(mid)[0]):
                hi = mid
            else:
                lo = mid
        t_star = lo
    t_end = t_star if ric.blow_up is None else min(t_star, ric.blow_up)
    tt = np.linspace(0.0, t_end, n_grid)
    Y = jac(tt)
    res = float(np.max(np.abs(ric(tt) - Y[:, 1] / Y[:, 0])))
    return ConsistencyResult(res, float(t_star), bool(hit.size), ric.blow_up)


# --- certificate ------------------------------------------------------------

@dataclass(frozen=True)
class SamplerBox:
    """Uniform box of initial states ``(p, q, phi)``."""

    p_range: Tuple[float, float]
    q_range: Tuple[float, float]
    phi_range: Tuple[float, float] = (0.0, 2 * math.pi)

    def check(self, chart):
        for lo, hi in (self.p_range, self.q_range, self.phi_range):
            if not lo <= hi:
                raise ValueError("sampler box has an empty side")
        corners = [(p, q) for p in self.p_range for q in self.q_range]
        if not all(bool(chart.contains(p, q)) for p, q in corners):
            raise DomainError(f"sampler box {self} is off-chart")

    def draw(self, n: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        lo = np.array([self.p_range[0], self.q_range[0], self.phi_range[0]])
        hi = np.array([self.p_range[1], self.q_range[1], self.phi_range[1]])
        return lo + (hi - lo) * rng.random((n, 3))

    def to_dict(self):
        return {"p_range": list(self.p_range), "q_range": list(self.q_range),
                "phi_range": list(self.phi_range)}


@dataclass
class CertificateReport:
    n: int
    T: float
    H: float
    u0_policy: Tuple[float, ...]
    seed: int
    sampler: SamplerBox
    violations: List[dict]
    u_T_min: float
    u_T_max: float
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "config": self.config, "seed": self.seed, "n": self.n, "T": self.T, "H": self.H,
            "u0_policy": list(self.u0_policy), "sampler": self.sampler.to_dict(),
            "pass": self.passed, "violations": self.violations,
            "u_T_min": self.u_T_min, "u_T_max": self.u_T_max, "note": CERTIFICATE_NOTE,
        }

    def to_json(self) -> str:
        return json_text(self.to_dict())

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict}: {self.n} samples x {len(self.u0_policy)} initial values, T={self.T:g}, "
                f"H={self.H:g}, u(T) in [{self.u_T_min:.6g}, {self.u_T_max:.6g}], "
                f"{len(self.violations)} violations")


def joint_rhs(system: MagneticSystem):
    """Flow plus Riccati on rows ``(p, q, phi, u)``."""
    chart, b = system.chart, system.intensity

    def fun(t, Y):
        p, q, phi, u = Y[:, 0], Y[:, 1], Y[:, 2], Y[:, 3]
        dp, dq = chart.velocity(p, q, phi)
        dphi = b(p, q) + chart.turning(p, q, phi)
        du = -u * u - magnetic_curvature_at(system, p, q, phi)
        return np.stack([dp, dq, dphi, du], axis=1)

    return fun


def _run_lanes(system, Y0, T, rtol, atol, blow_up):
    chart = system.chart

    def events(t, Y):
        return np.column_stack([chart.margin(Y[:, 0], Y[:, 1]), blow_up - np.abs(Y[:, 3])])

    return _dopri.integrate_lanes(joint_rhs(system), Y0, T, rtol=rtol, atol=atol, events=events)


def anosov_certificate(system: MagneticSystem, sampler: SamplerBox, T: float, H: float,
                       n: int, seed: int, *, u0_policy: Optional[Sequence[float]] = None,
                       threads: int = 1, rel_tol: float = 1e-8, abs_tol: float = 1e-10,
                       blow_up: float = BLOWUP, config: Optional[dict] = None) -> CertificateReport:
    """Sampled test of ``1/H <= u(T) <= H`` for the extreme initial values.

    Each of the ``n`` seeded initial states is paired with every ``u0`` in
    ``u0_policy`` (default ``(0, H)``; by order preservation the extremes
    bound every ``u0`` between them). Orbit and Riccati value are integrated
    jointly lane by lane, so the report does not depend on ``threads``.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if not H > 1:
        raise ValueError("H must exceed 1")
    if n < 1:
        raise ValueError("n must be at least 1")
    sampler.check(system.chart)
    policy = tuple(float(v) for v in (u0_policy if u0_policy is not None else (0.0, H)))
    states = sampler.draw(n, seed)
    m = len(policy)
    Y0 = np.column_stack([np.repeat(states, m, axis=0), np.tile(policy, n)])

    threads = max(1, int(threads))
    chunks = np.array_split(np.arange(len(Y0)), threads)
    chunks = [c for c in chunks if c.size]

    def work(idx):
        return _run_lanes(system, Y0[idx], T, rel_tol, abs_tol, blow_up)

    if len(chunks) == 1:
        sols = [work(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            sols = list(pool.map(work, chunks))
    status = np.concatenate([s.status for s in sols])
    t_stop = np.concatenate([s.t for s in sols])
    uT = np.concatenate([s.y[:, 3] for s in sols])

    violations = []
    for lane in range(len(Y0)):
        st, u = int(status[lane]), float(uT[lane])
        if st == _dopri.DONE and 1.0 / H <= u <= H:
            continue
        if st == _dopri.DONE:
            outcome = {"kind": "bound", "u_T": u}
        elif st == _dopri.EVENT + 1:
            outcome = {"kind": "blowup", "t": float(t_stop[lane])}
        elif st == _dopri.EVENT:
            outcome = {"kind": "exit", "t": float(t_stop[lane])}
        else:
            outcome = {"kind": "underflow", "t": float(t_stop[lane])}
        violations.append({"index": lane // m, "state": [float(v) for v in Y0[lane, :3]],
                           "u0": policy[lane % m], "uT_or_blowup": outcome})
    violations.sort(key=lambda v: (v["index"], v["u0"]))
    done = status == _dopri.DONE
    return CertificateReport(
        n=int(n), T=float(T), H=float(H), u0_policy=policy, seed=int(seed), sampler=sampler,
        violations=violations,
        u_T_min=float(np.min(uT[done])) if done.any() else math.nan,
        u_T_max=float(np.max(uT[done])) if done.any() else math.nan,
        config=dict(config or {}))
