"""Integration of unit-speed magnetic geodesics in (point, angle) form.

A unit-speed curve with prescribed geodesic curvature ``b`` satisfies

    point' = v(point, phi)
    phi'   = b(point) + turning(point, phi)

where ``v`` is the unit vector with frame angle ``phi`` and ``turning`` is
the angle rate of a plain geodesic in the chart frame. Unit speed therefore
holds exactly; only the curvature constraint is subject to integration error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import _dopri
from ._io import csv_text
from .geom import DomainError, MagneticSystem, UnitTangent


class StiffnessError(RuntimeError):
    """The adaptive step size underflowed."""


@dataclass(frozen=True)
class FlowSettings:
    horizon: float
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float = math.inf
    sample_spacing: Optional[float] = None

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            tol = getattr(self, name)
            if not 0.0 < tol <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2], got {tol}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")

    @property
    def spacing(self) -> float:
        # h^2 |x''| / 8 < 10 rel_tol for |x''| ~ 1
        if self.sample_spacing is not None:
            return self.sample_spacing
        return min(0.05, math.sqrt(80.0 * self.rel_tol))


@dataclass
class StepStats:
    accepted: int
    rejected: int
    max_local_error: float
    interpolation_error: float = 0.0


@dataclass
class Trajectory:
    """Time-sampled orbit with its dense interpolant."""

    system: MagneticSystem
    times: np.ndarray
    points: np.ndarray  # (n, 2)
    angles: np.ndarray  # (n,)
    stats: StepStats
    exited: bool = False
    dense: Optional[_dopri.DenseSteps] = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def start(self) -> UnitTangent:
        return self.state(0)

    @property
    def end(self) -> UnitTangent:
        return self.state(-1)

    def state(self, i: int) -> UnitTangent:
        return UnitTangent(tuple(self.points[i]), self.angles[i])

    @property
    def states(self):
        return [self.state(i) for i in range(len(self))]

    def interpolate(self, t):
        """Array ``(..., 3)`` of ``(p, q, phi)`` at times ``t``."""
        if self.dense is not None:
            return self.dense(t)
        t = np.asarray(t, dtype=float)
        cols = [np.interp(t, self.times, c) for c in
                (self.points[:, 0], self.points[:, 1], self.angles)]
        return np.stack(cols, axis=-1)

    def at(self, t: float) -> UnitTangent:
        p, q, phi = self.interpolate(float(t))
        return UnitTangent((p, q), phi)

    def to_csv(self) -> str:
        res = curvature_residuals(self.system, self)
        revolution = getattr(self.system.chart, "periodic_q", False)
        header = (["t", "s", "theta", "phi", "k_residual"] if revolution
                  else ["t", "x", "y", "phi", "k_residual"])
        rows = zip(self.times, self.points[:, 0], self.points[:, 1], self.angles, res)
        return csv_text(header, rows)


def magnetic_rhs(system: MagneticSystem, state: UnitTangent) -> Tuple[Tuple[float, float], float]:
    """Time derivative ``((dp, dq), dphi)`` of the flow at ``state``."""
    chart = system.chart
    p, q, phi = state.p, state.q, state.angle
    if not chart.contains(p, q):
        raise DomainError(f"state {state} is off-chart")
    dp, dq = chart.velocity(p, q, phi)
    dphi = system.intensity(p, q) + chart.turning(p, q, phi)
    return (float(dp), float(dq)), float(dphi)


def lane_rhs(system: MagneticSystem):
    """Vectorised right-hand side on ``(m, 3)`` state arrays."""
    chart, b = system.chart, system.intensity

    def fun(t, Y):
        p, q, phi = Y[:, 0], Y[:, 1], Y[:, 2]
        dp, dq = chart.velocity(p, q, phi)
        dphi = b(p, q) + chart.turning(p, q, phi)
        return np.stack([dp, dq, dphi], axis=1)

    return fun


def exit_event(chart):
    def g(t, Y):
        return np.asarray(chart.margin(Y[:, 0], Y[:, 1]), dtype=float)[:, None]
    return g


def integrate(system: MagneticSystem, start: UnitTangent, settings: FlowSettings,
              *, sample: bool = True) -> Trajectory:
    """Integrate the magnetic flow from ``start`` over ``[0, settings.horizon]``.

    Leaving the chart truncates the trajectory at the exit time and sets
    ``exited``. With ``sample=False`` only the endpoints are stored (the
    dense interpolant is always kept).
    """
    return integrate_many(system, [start], settings, sample=sample)[0]


def integrate_many(system: MagneticSystem, starts, settings: FlowSettings,
                   *, sample: bool = True):
    """:func:`integrate` for several starts, batched as lanes of one run.

    Each lane keeps its own step control, so results match one-by-one runs.
    """
    chart = system.chart
    starts = list(starts)
    for st in starts:
        if not chart.contains(st.p, st.q):
            raise DomainError(f"start {st} is off-chart")
    Y0 = np.array([st.as_array() for st in starts])
    sol = _dopri.integrate_lanes(
        lane_rhs(system), Y0, settings.horizon,
        rtol=settings.rel_tol, atol=settings.abs_tol, max_step=settings.max_step,
        events=exit_event(chart), record=True)
    out = []
    for i, start in enumerate(starts):
        status = int(sol.status[i])
        if status == _dopri.UNDERFLOW:
            raise StiffnessError(f"step size underflow at t={sol.t[i]}")
        out.append(_trajectory(system, start, sol, i, settings, sample))
    return out


def _trajectory(system, start, sol, i, settings, sample):
    dense = sol.dense[i]
    t_end = float(sol.t[i])
    if sample:
        n = max(2, int(math.ceil(t_end / settings.spacing)) + 1)
        times = np.linspace(0.0, t_end, n)
        Y = dense(times)
        Y[0] = start.as_array()
        Y[-1] = sol.y[i]
        mid = 0.5 * (times[1:] + times[:-1])
        Ym = dense(mid)
        lin = 0.5 * (Y[1:] + Y[:-1])
        interp_err = float(np.max(np.abs(Ym - lin) / np.maximum(np.abs(Ym), 1.0)))
    else:
        times = np.array([0.0, t_end])
        Y = np.vstack([start.as_array(), sol.y[i]])
        interp_err = math.nan
    stats = StepStats(accepted=int(sol.n_accepted[i]), rejected=int(sol.n_rejected[i]),
                      max_local_error=float(sol.max_error[i]),
                      interpolation_error=interp_err)
    return Trajectory(system=system, times=times, points=Y[:, :2].copy(), angles=Y[:, 2].copy(),
                      stats=stats, exited=int(sol.status[i]) >= _dopri.EVENT, dense=dense)


def curvature_residuals(system: MagneticSystem, trajectory: Trajectory) -> np.ndarray:
    """Per-sample ``|k_g - b|`` with ``k_g`` rebuilt from the sampled angles."""
    chart = system.chart
    t = trajectory.times
    p, q = trajectory.points[:, 0], trajectory.points[:, 1]
    phi = trajectory.angles
    if len(t) < 3:
        dphi = np.gradient(phi, t) if len(t) > 1 else np.zeros_like(phi)
    else:
        dphi = np.gradient(phi, t, edge_order=2)
    k = dphi - chart.turning(p, q, phi)
    return np.abs(k - system.intensity(p, q))


def geodesic_curvature_residual(system: MagneticSystem, trajectory: Trajectory) -> float:
    """Sup over samples of ``|k_g(t) - b(gamma(t))|``."""
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    return float(np.max(curvature_residuals(system, trajectory)))


def speed_residual(trajectory: Trajectory) -> float:
    """Max deviation from unit speed of finite-differenced positions."""
    chart = trajectory.system.chart
    t = trajectory.times
    p, q = trajectory.points[:, 0], trajectory.points[:, 1]
    dp = np.gradient(p, t, edge_order=2)
    dq = np.gradient(q, t, edge_order=2)
    return float(np.max(np.abs(chart.speed(p, q, dp, dq) - 1.0)))


def band_occupation_time(trajectory: Trajectory, interval: Tuple[float, float],
                         tol: float = 1e-9) -> float:
    """Total time the first coordinate spends inside ``interval``.

    Crossings between samples are located by bisection on the dense output.
    """
    lo, hi = interval
    t = trajectory.times
    s = trajectory.points[:, 0]
    inside = (s >= lo) & (s <= hi)

    def s_at(x):
        return float(trajectory.interpolate(x)[0])

    def crossing(ta, tb, was_inside):
        # boundary the orbit crosses between ta and tb
        sa, sb = s_at(ta), s_at(tb)
        level = lo if (min(sa, sb) < lo <= max(sa, sb)) else hi
        while tb - ta > tol:
            tm = 0.5 * (ta + tb)
            sm = s_at(tm)
            if (lo <= sm <= hi) == was_inside:
                ta = tm
            else:
                tb = tm
        return 0.5 * (ta + tb), level

    total = 0.0
    enter = t[0] if inside[0] else None
    for i in range(1, len(t)):
        if inside[i] == inside[i - 1]:
            continue
        tc, _ = crossing(t[i - 1], t[i], bool(inside[i - 1]))
        if inside[i]:
            enter = tc
        else:
            total += tc - enter
            enter = None
    if enter is not None:
        total += t[-1] - enter
    return float(total)
