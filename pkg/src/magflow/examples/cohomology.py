"""Cohomology bookkeeping and the magnetic length functional.

For an exact system ``b Omega = d theta`` the flux of ``b Omega`` through a
homotopy between two closed curves is a difference of line integrals of
``theta``, which is how the magnetic length is evaluated here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from ..geom import Box, DomainError, MagneticIntensity, area_integral
from ..hyperbolic import ClosedOrbit, HyperbolicCylinder


class HomotopyError(ValueError):
    """Curves lie in different free homotopy classes."""


def cohomology_constant(chart, intensity: MagneticIntensity, euler_characteristic: int,
                        region: Optional[Box] = None) -> float:
    """``(1 / (2 pi chi)) * int b Omega`` over ``region`` (default: the chart)."""
    if euler_characteristic == 0:
        raise DomainError("Euler characteristic must be non-zero")
    total = area_integral(chart, intensity, region).value
    return total / (2.0 * math.pi * euler_characteristic)


def cohomology_constant_from_flux(flux: float, euler_characteristic: int) -> float:
    if euler_characteristic == 0:
        raise DomainError("Euler characteristic must be non-zero")
    return flux / (2.0 * math.pi * euler_characteristic)


def homology_relation_check(A1: float, A2: float, c1: float, c2: float,
                            euler_characteristic: int) -> float:
    """Gap in ``A1 (1 + 2 pi chi c2^2 / A2) = A2 (1 + 2 pi chi c1^2 / A1)``."""
    if not (A1 > 0 and A2 > 0):
        raise ValueError("areas must be positive")
    if euler_characteristic == 0:
        raise DomainError("Euler characteristic must be non-zero")
    k = 2.0 * math.pi * euler_characteristic
    return abs(A1 * (1.0 + k * c2 * c2 / A2) - A2 * (1.0 + k * c1 * c1 / A1))


# --- primitives -----------------------------------------------------------------

@dataclass(frozen=True)
class ExactPrimitive:
    """1-form ``theta = P dp + Q dq`` with ``d theta = b Omega``."""

    chart: object
    intensity: MagneticIntensity
    coefficients: Callable  # (p, q) -> (P, Q)

    def __call__(self, p, q):
        return self.coefficients(p, q)

    def pair(self, points, vectors):
        """``theta(point)(vector)`` row by row."""
        P, Q = self.coefficients(points[:, 0], points[:, 1])
        return P * vectors[:, 0] + Q * vectors[:, 1]

    def fd_error(self, region: Box, n: int = 41, h: float = 1e-5) -> float:
        """Max relative gap between ``d theta`` (central differences) and ``b Omega``."""
        p, q = np.meshgrid(np.linspace(region.p_min, region.p_max, n),
                           np.linspace(region.q_min, region.q_max, n))
        hp = h * max(1.0, region.p_max - region.p_min)
        hq = h * max(1.0, region.q_max - region.q_min)
        dQ = (self.coefficients(p + hp, q)[1] - self.coefficients(p - hp, q)[1]) / (2 * hp)
        dP = (self.coefficients(p, q + hq)[0] - self.coefficients(p, q - hq)[0]) / (2 * hq)
        target = self.intensity(p, q) * self.chart.area_density(p, q)
        scale = np.maximum(np.abs(target), np.max(np.abs(target)) * 1e-3 + 1e-300)
        return float(np.max(np.abs(dQ - dP - target) / scale))


def half_plane_primitive(chart, b: float) -> ExactPrimitive:
    """``theta = (b / y) dx``; invariant under dilations."""
    b = float(b)
    return ExactPrimitive(chart, MagneticIntensity.constant(b),
                          lambda x, y: (b / y, 0.0 * x))


def revolution_primitive(chart, intensity: MagneticIntensity, knots=(),
                         panel: float = 0.25) -> ExactPrimitive:
    """``theta = B(s) dtheta`` with ``B(s) = int_0^s b r``.

    ``B`` is a cumulative composite Gauss-Legendre sum over panels of width
    at most ``panel`` whose ends include 0, ``knots`` and the query points.
    """
    x_gl, w_gl = np.polynomial.legendre.leggauss(16)

    def density(s):
        return intensity(s, 0.0 * s) * chart.radius(s)

    def B(s):
        s_arr = np.asarray(s, dtype=float)
        flat = s_arr.ravel()
        lo_s, hi_s = min(0.0, flat.min()), max(0.0, flat.max())
        ends = np.unique(np.concatenate([[0.0], flat, [k for k in knots if lo_s < k < hi_s]]))
        # split each gap into equal panels
        gaps = np.diff(ends)
        counts = np.maximum(1, np.ceil(gaps / panel).astype(int))
        width = np.repeat(gaps / counts, counts)
        first = np.cumsum(counts) - counts
        lo = np.repeat(ends[:-1], counts) + width * (np.arange(counts.sum()) - np.repeat(first, counts))
        nodes = lo[:, None] + 0.5 * width[:, None] * (x_gl + 1.0)
        pieces = 0.5 * width * (density(nodes.ravel()).reshape(nodes.shape) @ w_gl)
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        at_ends = cum[np.concatenate([[0], np.cumsum(counts)])]
        at_ends = at_ends - at_ends[np.searchsorted(ends, 0.0)]
        out = at_ends[np.searchsorted(ends, flat)].reshape(s_arr.shape)
        return out if s_arr.ndim else float(out)

    return ExactPrimitive(chart, intensity, lambda s, th: (0.0 * np.asarray(s) + 0.0 * th,
                                                           B(s) + 0.0 * th))


# --- closed curves --------------------------------------------------------------

@dataclass(frozen=True)
class ClosedCurve:
    """Closed curve on the cylinder parameterised over ``[0, 1)``.

    ``position`` and ``velocity`` (derivative in the parameter) take an array
    of parameters. The curve closes up to ``deck**winding``.
    """

    position: Callable
    velocity: Callable
    winding: int
    n_samples: int = 2048

    def nodes(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.n_samples

    def samples(self):
        tau = self.nodes()
        return self.position(tau), self.velocity(tau)

    def reparameterized(self, sigma: Callable, dsigma: Callable) -> "ClosedCurve":
        """``tau -> curve(sigma(tau))`` for an increasing ``sigma`` of ``[0, 1]``."""
        pos, vel = self.position, self.velocity
        return ClosedCurve(lambda t: pos(sigma(t)),
                           lambda t: vel(sigma(t)) * np.asarray(dsigma(t))[:, None],
                           self.winding, self.n_samples)


def riemannian_length(chart, curve: ClosedCurve) -> float:
    # periodic trapezoid rule
    X, V = curve.samples()
    return float(np.mean(chart.speed(X[:, 0], X[:, 1], V[:, 0], V[:, 1])))


def line_integral(primitive: ExactPrimitive, curve: ClosedCurve) -> float:
    X, V = curve.samples()
    return float(np.mean(primitive.pair(X, V)))


def orbit_curve(orbit: ClosedOrbit, n_samples: int = 2048) -> ClosedCurve:
    """The closed orbit as a :class:`ClosedCurve` (time rescaled to ``[0, 1)``)."""
    traj, P = orbit.trajectory, orbit.period
    chart = traj.system.chart

    def position(tau):
        return traj.interpolate(np.asarray(tau) * P)[:, :2]

    def velocity(tau):
        Y = traj.interpolate(np.asarray(tau) * P)
        dp, dq = chart.velocity(Y[:, 0], Y[:, 1], Y[:, 2])
        return P * np.column_stack([dp, dq])

    return ClosedCurve(position, velocity, orbit.winding, n_samples)


def magnetic_length(primitive: ExactPrimitive, curve: ClosedCurve,
                    reference: ClosedCurve) -> float:
    """Length of ``curve`` corrected by the flux between it and ``reference``.

    The flux through the annulus swept from ``reference`` to ``curve`` is
    ``int_curve theta - int_reference theta``; with the counterclockwise
    orientation used for geodesic curvature it enters with a minus sign, so
    that the closed magnetic geodesic minimises the functional.
    """
    if curve.winding != reference.winding:
        raise HomotopyError(f"winding {curve.winding} differs from reference "
                            f"winding {reference.winding}")
    chart = primitive.chart
    flux = line_integral(primitive, curve) - line_integral(primitive, reference)
    return riemannian_length(chart, curve) - flux


def perturbed_curves(orbit: ClosedOrbit, cylinder: HyperbolicCylinder, count: int,
                     seed: int, amplitude: float = 0.05, modes: int = 4,
                     n_samples: int = 2048) -> List[ClosedCurve]:
    """Seeded smooth perturbations of a closed orbit lying on a ray.

    In log-polar coordinates ``z = exp(rho + i alpha)`` the orbit is
    ``alpha = alpha0``, ``rho = rho0 + n l tau``. Each curve adds random
    trigonometric polynomials to ``alpha`` and ``rho`` whose sup norm is at
    most ``amplitude``.
    """
    x0, y0 = orbit.initial.point
    alpha0, rho0 = math.atan2(y0, x0), 0.5 * math.log(x0 * x0 + y0 * y0)
    span = orbit.winding * cylinder.translation_length
    rng = np.random.default_rng(seed)
    k = np.arange(1, modes + 1)
    curves = []
    for _ in range(count):
        coef = rng.standard_normal((2, 2 * modes + 1))
        # sup norm bounded by the l1 norm of the coefficients
        coef *= amplitude * rng.random((2, 1)) / np.sum(np.abs(coef), axis=1, keepdims=True)
        curves.append(_log_polar_curve(alpha0, rho0, span, coef, k, orbit.winding, n_samples))
    return curves


def _log_polar_curve(alpha0, rho0, span, coef, k, winding, n_samples) -> ClosedCurve:
    def trig(c, tau):
        w = 2 * np.pi * np.outer(tau, k)
        f = c[0] + np.cos(w) @ c[1:len(k) + 1] + np.sin(w) @ c[len(k) + 1:]
        df = 2 * np.pi * (-np.sin(w) @ (k * c[1:len(k) + 1]) + np.cos(w) @ (k * c[len(k) + 1:]))
        return f, df

    def parts(tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        f, df = trig(coef[0], tau)
        g, dg = trig(coef[1], tau)
        return alpha0 + f, df, rho0 + span * tau + g, span + dg

    def position(tau):
        a, _, r, _ = parts(tau)
        return np.exp(r)[:, None] * np.column_stack([np.cos(a), np.sin(a)])

    def velocity(tau):
        a, da, r, dr = parts(tau)
        e = np.exp(r)
        return np.column_stack([e * (dr * np.cos(a) - da * np.sin(a)),
                                e * (dr * np.sin(a) + da * np.cos(a))])

    return ClosedCurve(position, velocity, winding, n_samples)
