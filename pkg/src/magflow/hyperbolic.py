"""Constant curvature testbed.

Hyperbolic cylinders ``H / <z -> e^l z>`` with constant magnetic intensity,
closed magnetic geodesics found by shooting, and the PSL(2, R) matrix model
of the magnetic flow with the conjugacy between ``b`` and ``-b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import _dopri
from ._io import csv_text
from .flow import FlowSettings, Trajectory, exit_event, integrate, lane_rhs
from .geom import DomainError, MagneticIntensity, MagneticSystem, UnitTangent, half_plane

SHOOTING_SETTINGS = dict(rel_tol=1e-12, abs_tol=1e-12)


class ShootingError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class HyperbolicCylinder:
    """Quotient of the half-plane by the dilation ``z -> exp(l) z``."""

    translation_length: float

    def __post_init__(self):
        if not self.translation_length > 0:
            raise ValueError("translation length must be positive")

    def factor(self, n: int = 1) -> float:
        return math.exp(n * self.translation_length)

    def deck(self, point, n: int = 1):
        k = self.factor(n)
        return np.asarray(point, dtype=float) * k

    def deck_state(self, state: UnitTangent, n: int = 1) -> UnitTangent:
        # dilations preserve Euclidean angles
        return UnitTangent(tuple(self.deck(state.point, n)), state.angle)

    def deck_vector(self, vector, n: int = 1):
        return np.asarray(vector, dtype=float) * self.factor(n)

    def system(self, b: float) -> MagneticSystem:
        return MagneticSystem(half_plane(), MagneticIntensity.constant(b))


@dataclass
class ClosedOrbit:
    initial: UnitTangent
    period: float
    winding: int
    trajectory: Trajectory
    residual: float
    iterations: int


def closed_orbit_length_formula(ell: float, b: float) -> float:
    """Length ``l / sqrt(1 - b^2)`` of the closed magnetic geodesic."""
    if not ell > 0:
        raise DomainError("translation length must be positive")
    if not abs(b) < 1:
        raise DomainError(f"|b| = {abs(b)} >= 1: no closed magnetic geodesic")
    return ell / math.sqrt(1.0 - b * b)


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _shoot(system, cylinder, n, Z, settings):
    """Residuals of the deck-periodicity condition for rows ``(phi, x, period)``."""
    m = Z.shape[0]
    y0 = np.column_stack([Z[:, 1], np.ones(m), Z[:, 0]])
    sol = _dopri.integrate_lanes(
        lane_rhs(system), y0, Z[:, 2], rtol=settings.rel_tol, atol=settings.abs_tol,
        events=exit_event(system.chart))
    if np.any(sol.status != _dopri.DONE):
        return np.full((m, 3), np.inf)
    k = cylinder.factor(n)
    end = sol.y
    return np.column_stack([end[:, 0] / k - Z[:, 1], end[:, 1] / k - 1.0,
                            _wrap(end[:, 2] - Z[:, 0])])


def _jacobian(system, cylinder, n, z, F, settings, fd_step):
    Fp = _shoot(system, cylinder, n, z[None, :] + np.diag([fd_step] * 3), settings)
    return ((Fp - F[None, :]) / fd_step).T


def _newton(system, cylinder, n, z, settings, tol, max_iter, fd_step, max_halvings=8):
    """Damped Newton; returns ``(z, residual, iterations, jacobian)``."""
    F = _shoot(system, cylinder, n, z[None, :], settings)[0]
    res = float(np.max(np.abs(F)))
    it = 0
    J = None
    while res >= tol:
        if it >= max_iter:
            raise ShootingError("shooting did not converge", res)
        it += 1
        J = _jacobian(system, cylinder, n, z, F, settings, fd_step)
        try:
            dz = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            raise ShootingError("singular shooting Jacobian", res)
        lam = 1.0
        for _ in range(max_halvings):
            z_try = z + lam * dz
            if z_try[2] > 0:
                F_try = _shoot(system, cylinder, n, z_try[None, :], settings)[0]
                res_try = float(np.max(np.abs(F_try)))
                if res_try < res:
                    break
            lam *= 0.5
        else:
            raise ShootingError("line search failed", res)
        z, F, res = z_try, F_try, res_try
    if J is None:
        J = _jacobian(system, cylinder, n, z, F, settings, fd_step)
    return z, res, it, J


def _tangent(system, cylinder, n, z, J, b, settings, fd_step):
    """``dz/db`` along the solution branch."""
    F0 = _shoot(system.with_intensity(MagneticIntensity.constant(b)), cylinder, n,
                z[None, :], settings)[0]
    F1 = _shoot(system.with_intensity(MagneticIntensity.constant(b + fd_step)), cylinder, n,
                z[None, :], settings)[0]
    return np.linalg.solve(J, -(F1 - F0) / fd_step)


def find_closed_orbit(system: MagneticSystem, cylinder: HyperbolicCylinder, winding: int,
                      guess: UnitTangent, period_guess: Optional[float] = None,
                      settings: Optional[FlowSettings] = None, tol: float = 1e-10,
                      max_iter: int = 50, fd_step: float = 1e-7,
                      guess_b: float = 0.0) -> ClosedOrbit:
    """Shoot for the closed orbit in the class of ``deck**winding``.

    Unknowns are the initial angle, the initial ``x`` on the line ``y = 1``
    and the period; the residual is the sup-norm gap between the endpoint
    pulled back by the deck map and the start. Damped Newton with a
    forward-difference Jacobian whose columns are integrated as extra lanes.
    If Newton fails from ``guess``, the guess is first converged at
    intensity ``guess_b`` and then continued to the target with a tangent
    predictor.
    """
    if winding == 0:
        raise ValueError("winding must be non-zero")
    b_target = float(system.intensity(0.0, 1.0))
    if not abs(b_target) < 1:
        raise DomainError("shooting needs |b| < 1")
    if settings is None:
        settings = FlowSettings(horizon=1.0, **SHOOTING_SETTINGS)
    n = int(winding)
    if period_guess is None:
        period_guess = abs(n) * cylinder.translation_length
    # y = 1 normalisation of the guess
    z0 = np.array([guess.angle, guess.p / guess.q, period_guess])
    try:
        # short leash: far guesses go to continuation quickly
        z, res, iterations, _ = _newton(system, cylinder, n, z0, settings, tol,
                                        min(max_iter, 10), fd_step, max_halvings=4)
    except ShootingError:
        z, res, iterations = _continue(system, cylinder, n, z0, float(guess_b), b_target,
                                       settings, tol, max_iter, fd_step)
    start = UnitTangent((z[1], 1.0), z[0])
    traj = integrate(system, start, FlowSettings(horizon=z[2], rel_tol=settings.rel_tol,
                                                 abs_tol=settings.abs_tol,
                                                 sample_spacing=settings.sample_spacing or 1e-3))
    return ClosedOrbit(initial=start, period=float(z[2]), winding=n, trajectory=traj,
                       residual=res, iterations=iterations)


def _continue(system, cylinder, n, z, b_cur, b_target, settings, tol, max_iter, fd_step):
    def at(b):
        return system.with_intensity(MagneticIntensity.constant(b))

    z, res, iterations, J = _newton(at(b_cur), cylinder, n, z, settings, tol, max_iter, fd_step)
    db = b_target - b_cur
    while b_cur != b_target:
        step = db if abs(b_target - b_cur) > abs(db) else b_target - b_cur
        dz = _tangent(system, cylinder, n, z, J, b_cur, settings, fd_step)
        try:
            z_new, res, it, J_new = _newton(at(b_cur + step), cylinder, n, z + step * dz,
                                            settings, tol, min(max_iter, 10), fd_step)
        except ShootingError as exc:
            db = 0.5 * step
            if abs(db) < 1e-4:
                raise ShootingError("continuation in b stalled", exc.residual)
            continue
        iterations += it
        z, J = z_new, J_new
        b_cur = b_target if step == b_target - b_cur else b_cur + step
    return z, res, iterations


@dataclass
class MLSRow:
    ell: float
    b: float
    period_shot: float
    period_formula: float
    abs_err: float
    converged: bool
    residual: float = math.nan


def mls_scaling_table(ells: Sequence[float], bs: Sequence[float], winding: int = 1,
                      settings: Optional[FlowSettings] = None) -> List[MLSRow]:
    """Shot versus closed-form closed-orbit lengths on hyperbolic cylinders.

    Rows are sorted by ``(ell, b)``; each shot starts from the previous row's
    orbit (continuation in ``b``) and falls back to the geodesic axis.
    Shooting failures are flagged per row.
    """
    rows = []
    for ell in sorted(set(float(e) for e in ells)):
        cyl = HyperbolicCylinder(ell)
        prev = None
        for b in sorted(set(float(v) for v in bs), key=lambda v: (abs(v), v)):
            formula = closed_orbit_length_formula(ell, b)
            system = cyl.system(b)
            guesses = []
            if prev is not None and prev[2] * b >= 0:
                guesses.append(prev)
            guesses.append((UnitTangent((0.0, 1.0), math.pi / 2), abs(winding) * ell, 0.0))
            orbit, residual = None, math.nan
            for guess, pg, gb in guesses:
                try:
                    orbit = find_closed_orbit(system, cyl, winding, guess, pg, settings,
                                              guess_b=gb)
                    break
                except ShootingError as exc:
                    residual = exc.residual
            if orbit is None:
                rows.append(MLSRow(ell, b, math.nan, formula, math.nan, False, residual))
                continue
            prev = (orbit.initial, orbit.period, b)
            rows.append(MLSRow(ell, b, orbit.period, formula, abs(orbit.period - formula),
                               True, orbit.residual))
    rows.sort(key=lambda r: (r.ell, r.b))
    return rows


def mls_table_csv(rows: Sequence[MLSRow]) -> str:
    return csv_text(["ell", "b", "period_shot", "period_formula", "abs_err", "converged"],
                    [(r.ell, r.b, r.period_shot, r.period_formula, r.abs_err, r.converged)
                     for r in rows])


def hypercycle_ray_report(b: float, trajectory: Trajectory) -> dict:
    """Distances of an orbit from the two candidate invariant rays.

    ``sqrt`` is the unit-normalised direction ``(b, sqrt(1 - b^2))``;
    ``printed`` is the direction ``(b, 1 - b^2)``.
    """
    pts = trajectory.points
    out = {}
    for key, d in (("sqrt", (b, math.sqrt(1 - b * b))), ("printed", (b, 1 - b * b))):
        d = np.asarray(d) / np.hypot(*d)
        dist = np.abs(pts[:, 0] * d[1] - pts[:, 1] * d[0])
        out[key] = float(np.max(dist))
    out["follows"] = min(("sqrt", "printed"), key=lambda k: out[k])
    return out


# --- PSL(2, R) model -----------------------------------------------------------

def psl_generator(b: float) -> np.ndarray:
    """Generator ``(1/2) [[1, b], [-b, -1]]`` of the magnetic flow."""
    return 0.5 * np.array([[1.0, b], [-b, -1.0]])


def mat_exp(m, t: float = 1.0) -> np.ndarray:
    """``exp(t m)`` for a real 2x2 matrix, in closed form.

    Splits off the trace; the traceless part squares to ``-det`` times the
    identity, giving the cosh/cos branches.
    """
    A = t * np.asarray(m, dtype=float)
    tau = 0.5 * (A[0, 0] + A[1, 1])
    A0 = A - tau * np.eye(2)
    delta = -(A0[0, 0] * A0[1, 1] - A0[0, 1] * A0[1, 0])
    if abs(delta) < 1e-8:
        c = 1 + delta / 2 + delta ** 2 / 24
        s = 1 + delta / 6 + delta ** 2 / 120
    elif delta > 0:
        r = math.sqrt(delta)
        c, s = math.cosh(r), math.sinh(r) / r
    else:
        r = math.sqrt(-delta)
        c, s = math.cos(r), math.sin(r) / r
    return math.exp(tau) * (c * np.eye(2) + s * A0)


def conjugacy_matrix(s: float, b: float) -> np.ndarray:
    """The family ``(1 - s b^2)^-1 [[1, -s b], [-s b, 1]]``."""
    den = 1.0 - s * b * b
    if abs(den) < 1e-14:
        raise DomainError("conjugacy prefactor is singular (s b^2 = 1)")
    return np.array([[1.0, -s * b], [-s * b, 1.0]]) / den


def intertwining_residual(b: float, t: float) -> float:
    """Max-entry gap in ``X^b c = c X^-b`` and its exponentiated form."""
    if not abs(b) < 1:
        raise DomainError("|b| must be < 1")
    X, Xm = psl_generator(b), psl_generator(-b)
    c = conjugacy_matrix(1.0, b)
    lie = np.max(np.abs(X @ c - c @ Xm))
    group = np.max(np.abs(mat_exp(X, t) @ c - c @ mat_exp(Xm, t)))
    return float(max(lie, group))


def intertwining_sweep(n: int = 100, seed: int = 0, t_max: float = 5.0) -> dict:
    """Seeded sweep of :func:`intertwining_residual` over ``|b| < 1``."""
    rng = np.random.default_rng(seed)
    bs = rng.uniform(-1.0, 1.0, n)
    bs = np.where(np.abs(bs) >= 1, 0.0, bs)
    ts = rng.uniform(-t_max, t_max, n)
    draws = []
    for b, t in zip(bs, ts):
        draws.append({"b": float(b), "t": float(t), "residual": intertwining_residual(b, t),
                      "det_c": float(np.linalg.det(conjugacy_matrix(1.0, b)))})
    c0 = conjugacy_matrix(0.0, 0.5)
    return {
        "seed": int(seed),
        "n": int(n),
        "t_max": float(t_max),
        "max_residual": max(d["residual"] for d in draws),
        "c0_is_identity": bool(np.array_equal(c0, np.eye(2))),
        "draws": draws,
    }
