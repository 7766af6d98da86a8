"""Charts, magnetic intensities and curvature quantities on surfaces.

Two chart families are supported:

* :class:`ConformalChart` -- a rectangle carrying ``exp(2*lam) (dx^2 + dy^2)``.
* :class:`RevolutionChart` -- a cylinder ``ds^2 + r(s)^2 dtheta^2`` with
  ``r(s) = exp(int_0^s u)``, periodic in ``theta``.

All point-wise methods are vectorised: coordinates may be floats or numpy
arrays of matching shape. Tangent directions are encoded by an angle ``phi``
measured counterclockwise from the first coordinate axis of an orthonormal
frame, so a :class:`UnitTangent` is a g-unit vector by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy import integrate

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """A point lies outside the chart (or intensity) domain."""


class IntegrationError(RuntimeError):
    """Quadrature met non-finite integrand values."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned coordinate rectangle ``[p_min, p_max] x [q_min, q_max]``."""

    p_min: float
    p_max: float
    q_min: float
    q_max: float

    def __post_init__(self):
        if not (self.p_min < self.p_max and self.q_min < self.q_max):
            raise ValueError(f"degenerate box {self}")

    def contains(self, p, q):
        return ((p >= self.p_min) & (p <= self.p_max)
                & (q >= self.q_min) & (q <= self.q_max))

    def covers(self, other: "Box") -> bool:
        return (self.p_min <= other.p_min and self.p_max >= other.p_max
                and self.q_min <= other.q_min and self.q_max >= other.q_max)

    @property
    def scale(self) -> float:
        widths = [w for w in (self.p_max - self.p_min, self.q_max - self.q_min)
                  if np.isfinite(w)]
        return min(widths) if widths else 1.0


def _fd_gradient(fn, p, q, h):
    fp = (fn(p + h, q) - fn(p - h, q)) / (2 * h)
    fq = (fn(p, q + h) - fn(p, q - h)) / (2 * h)
    return fp, fq


@dataclass(frozen=True)
class ConformalChart:
    """Rectangle with metric ``exp(2*lam) (dx^2 + dy^2)``.

    ``log_factor`` is ``lam(x, y)``; its gradient and the Gaussian curvature
    may be supplied in closed form, otherwise finite differences are used.
    """

    log_factor: Callable
    domain: Box
    log_factor_gradient: Optional[Callable] = None
    curvature_fn: Optional[Callable] = None
    name: str = "conformal"

    periodic_q = False

    def fd_step(self, p, q):
        """Central-difference step: ``1e-5`` times the local scale.

        The local scale is the distance to the domain boundary, capped at 1,
        so that steps stay small against the metric's own length scale
        (``y`` on the half-plane).
        """
        return 1e-5 * np.clip(self.margin(p, q), 1e-6, 1.0)

    def contains(self, p, q):
        return self.domain.contains(p, q)

    def margin(self, p, q):
        d = self.domain
        return np.minimum(np.minimum(p - d.p_min, d.p_max - p),
                          np.minimum(q - d.q_min, d.q_max - q))

    def gradient(self, p, q):
        if self.log_factor_gradient is not None:
            return self.log_factor_gradient(p, q)
        return _fd_gradient(self.log_factor, p, q, self.fd_step(p, q))

    def velocity(self, p, q, phi):
        """Coordinate components of the unit vector with angle ``phi``."""
        w = np.exp(-self.log_factor(p, q))
        return w * np.cos(phi), w * np.sin(phi)

    def turning(self, p, q, phi):
        """Angle rate of a g-geodesic: ``dphi/dt = b + turning``."""
        lx, ly = self.gradient(p, q)
        return np.exp(-self.log_factor(p, q)) * (-np.sin(phi) * lx + np.cos(phi) * ly)

    def area_density(self, p, q):
        return np.exp(2 * self.log_factor(p, q))

    def speed(self, p, q, dp, dq):
        return np.exp(self.log_factor(p, q)) * np.hypot(dp, dq)

    def gaussian_curvature(self, p, q):
        if self.curvature_fn is not None:
            return self.curvature_fn(p, q)
        return self.fd_curvature(p, q)

    def fd_curvature(self, p, q):
        """``-exp(-2 lam) * Laplacian(lam)`` by central differences."""
        if self.log_factor_gradient is not None:
            h = self.fd_step(p, q)
            gx = self.log_factor_gradient
            lap = ((gx(p + h, q)[0] - gx(p - h, q)[0])
                   + (gx(p, q + h)[1] - gx(p, q - h)[1])) / (2 * h)
        else:
            h = 10 * self.fd_step(p, q)
            lam = self.log_factor
            lap = (lam(p + h, q) + lam(p - h, q) + lam(p, q + h) + lam(p, q - h)
                   - 4 * lam(p, q)) / h ** 2
        return -np.exp(-2 * self.log_factor(p, q)) * lap

    def default_region(self) -> Box:
        return self.domain


@dataclass(frozen=True)
class RevolutionChart:
    """Cylinder ``(s, theta)`` with metric ``ds^2 + r(s)^2 dtheta^2``.

    ``profile`` is ``u(s) = r'(s)/r(s)``; ``log_radius`` is ``int_0^s u``.
    ``breakpoints`` lists profile knots, used to split quadratures.
    """

    profile: Callable
    s_range: Tuple[float, float]
    profile_derivative: Optional[Callable] = None
    log_radius: Optional[Callable] = None
    breakpoints: Tuple[float, ...] = ()
    name: str = "revolution"

    periodic_q = True

    def __post_init__(self):
        lo, hi = self.s_range
        if not lo < hi:
            raise ValueError("empty s_range")

    @property
    def domain(self) -> Box:
        return Box(self.s_range[0], self.s_range[1], 0.0, TWO_PI)

    @property
    def fd_step(self) -> float:
        return 1e-5 * min(1.0, self.s_range[1] - self.s_range[0])

    def contains(self, s, theta=0.0):
        lo, hi = self.s_range
        return (s >= lo) & (s <= hi) & np.isfinite(theta)

    def margin(self, s, theta=0.0):
        lo, hi = self.s_range
        return np.minimum(s - lo, hi - s)

    def profile_slope(self, s):
        if self.profile_derivative is not None:
            return self.profile_derivative(s)
        h = self.fd_step
        return (self.profile(s + h) - self.profile(s - h)) / (2 * h)

    def _log_radius(self, s):
        if self.log_radius is not None:
            return self.log_radius(s)
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.array([integrate.quad(self.profile, 0.0, x, limit=200)[0] for x in s_arr.ravel()])
        out = out.reshape(s_arr.shape)
        return out if np.ndim(s) else float(out[0])

    def radius(self, s):
        return np.exp(self._log_radius(s))

    def velocity(self, s, theta, phi):
        return np.cos(phi), np.sin(phi) / self.radius(s)

    def turning(self, s, theta, phi):
        # the +theta parallel through s has geodesic curvature u(s)
        return -self.profile(s) * np.sin(phi)

    def area_density(self, s, theta=0.0):
        return self.radius(s) + 0.0 * theta

    def speed(self, s, theta, ds, dtheta):
        return np.hypot(ds, self.radius(s) * dtheta)

    def gaussian_curvature(self, s, theta=0.0):
        u = self.profile(s)
        return -self.profile_slope(s) - u * u + 0.0 * theta

    def fd_curvature(self, s, theta=0.0):
        h = self.fd_step
        du = (self.profile(s + h) - self.profile(s - h)) / (2 * h)
        u = self.profile(s)
        return -du - u * u + 0.0 * theta

    def default_region(self) -> Box:
        return self.domain


@dataclass(frozen=True)
class MagneticIntensity:
    """Scalar magnetic intensity ``b`` with its differential ``db``."""

    value: Callable
    differential: Optional[Callable] = None
    name: str = "intensity"
    domain: Optional[Box] = None
    fd_step: float = 1e-5

    def __call__(self, p, q):
        return self.value(p, q)

    def d(self, p, q):
        if self.differential is not None:
            return self.differential(p, q)
        return _fd_gradient(self.value, p, q, self.fd_step)

    def __neg__(self) -> "MagneticIntensity":
        value, diff = self.value, self.d
        name = self.name[1:] if self.name.startswith("-") else "-" + self.name
        return MagneticIntensity(
            value=lambda p, q: -value(p, q),
            differential=lambda p, q: tuple(-c for c in diff(p, q)),
            name=name, domain=self.domain, fd_step=self.fd_step)

    @classmethod
    def constant(cls, b: float) -> "MagneticIntensity":
        b = float(b)
        return cls(value=lambda p, q: b + 0.0 * p + 0.0 * q,
                   differential=lambda p, q: (0.0 * p, 0.0 * q),
                   name=f"constant({b!r})")

    @classmethod
    def radial(cls, fn: Callable, dfn: Optional[Callable] = None, name="radial") -> "MagneticIntensity":
        """Intensity depending on the first coordinate only (e.g. ``b(s)``)."""
        diff = None
        if dfn is not None:
            diff = lambda p, q: (dfn(p) + 0.0 * q, 0.0 * p + 0.0 * q)  # noqa: E731
        return cls(value=lambda p, q: fn(p) + 0.0 * q, differential=diff, name=name)


@dataclass(frozen=True)
class MagneticSystem:
    chart: object
    intensity: MagneticIntensity

    def __post_init__(self):
        dom = self.intensity.domain
        if dom is not None and not dom.covers(self.chart.domain):
            raise DomainError("intensity domain does not cover the chart")

    def with_intensity(self, intensity: MagneticIntensity) -> "MagneticSystem":
        return MagneticSystem(self.chart, intensity)

    def reversed(self) -> "MagneticSystem":
        """The system ``(g, -b)``."""
        return MagneticSystem(self.chart, -self.intensity)


@dataclass(frozen=True)
class UnitTangent:
    """A g-unit tangent vector: base point plus direction angle."""

    point: Tuple[float, float]
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "point", (float(self.point[0]), float(self.point[1])))
        object.__setattr__(self, "angle", float(self.angle))

    @property
    def p(self) -> float:
        return self.point[0]

    @property
    def q(self) -> float:
        return self.point[1]

    def reversed(self) -> "UnitTangent":
        return UnitTangent(self.point, self.angle + math.pi)

    def as_array(self) -> np.ndarray:
        return np.array([self.point[0], self.point[1], self.angle])


def _check_point(chart, p, q):
    if not np.all(chart.contains(p, q)):
        raise DomainError(f"point ({p}, {q}) outside {chart.name} domain")


def rotate90(state: UnitTangent) -> UnitTangent:
    """Quarter turn ``v -> iv`` in the counterclockwise orientation."""
    return UnitTangent(state.point, math.fmod(state.angle + math.pi / 2, TWO_PI))


def gaussian_curvature(chart, point) -> float:
    p, q = point
    _check_point(chart, p, q)
    return float(chart.gaussian_curvature(p, q))


def magnetic_curvature_at(system: MagneticSystem, p, q, phi):
    """Vectorised ``K - db(iv) + b^2`` at states ``(p, q, phi)``."""
    chart, b = system.chart, system.intensity
    ip, iq = chart.velocity(p, q, phi + math.pi / 2)
    bp, bq = b.d(p, q)
    bv = b(p, q)
    return chart.gaussian_curvature(p, q) - (bp * ip + bq * iq) + bv * bv


def magnetic_curvature(system: MagneticSystem, state: UnitTangent) -> float:
    _check_point(system.chart, state.p, state.q)
    return float(magnetic_curvature_at(system, state.p, state.q, state.angle))


class Quadrature(NamedTuple):
    value: float
    error: float


def area_integral(chart, field: Callable, region: Optional[Box] = None,
                  epsabs: float = 1e-13, epsrel: float = 1e-12) -> Quadrature:
    """Integrate ``field(p, q)`` against the area form over ``region``.

    Adaptive Gauss-Kronrod in both directions; profile knots of revolution
    charts are passed to the inner quadrature as break points.
    """
    region = chart.default_region() if region is None else region
    dom = chart.domain
    if not (region.p_min >= dom.p_min and region.p_max <= dom.p_max):
        raise DomainError("region exceeds chart domain")
    if not chart.periodic_q and not (region.q_min >= dom.q_min and region.q_max <= dom.q_max):
        raise DomainError("region exceeds chart domain")

    def integrand(p, q):
        val = field(p, q) * chart.area_density(p, q)
        if not np.isfinite(val):
            raise IntegrationError(f"non-finite integrand at ({p}, {q})")
        return val

    knots = [k for k in getattr(chart, "breakpoints", ())
             if region.p_min < k < region.p_max]
    opts_p = {"limit": 200, "epsabs": epsabs, "epsrel": epsrel}
    if knots:
        opts_p["points"] = knots
    opts_q = {"limit": 200, "epsabs": epsabs, "epsrel": epsrel}
    val, err = integrate.nquad(lambda q, p: integrand(p, q),
                               [(region.q_min, region.q_max), (region.p_min, region.p_max)],
                               opts=[opts_q, opts_p])
    return Quadrature(float(val), float(err))


def curvature_fd_error(chart, n: int = 101, region: Optional[Box] = None, inset: float = 0.05) -> float:
    """Max relative gap between analytic and finite-difference curvature.

    Evaluated on an ``n x n`` grid kept ``inset`` (fraction of the width)
    away from the region boundary.
    """
    region = chart.default_region() if region is None else region
    dp = (region.p_max - region.p_min) * inset
    dq = (region.q_max - region.q_min) * inset
    P, Q = np.meshgrid(np.linspace(region.p_min + dp, region.p_max - dp, n),
                       np.linspace(region.q_min + dq, region.q_max - dq, n))
    k = chart.gaussian_curvature(P, Q)
    k_fd = chart.fd_curvature(P, Q)
    return float(np.max(np.abs(k - k_fd) / np.maximum(np.abs(k), 1.0)))


def differential_fd_error(intensity: MagneticIntensity, region: Box, n: int = 101) -> float:
    P, Q = np.meshgrid(np.linspace(region.p_min, region.p_max, n),
                       np.linspace(region.q_min, region.q_max, n))
    bp, bq = intensity.d(P, Q)
    fp, fq = _fd_gradient(intensity.value, P, Q, intensity.fd_step)
    scale = np.maximum(np.hypot(bp, bq), 1.0)
    return float(np.max(np.hypot(bp - fp, bq - fq) / scale))


# --- builtin chart families -------------------------------------------------

def half_plane(domain: Optional[Box] = None) -> ConformalChart:
    """Upper half-plane with ``(dx^2 + dy^2) / y^2``, curvature -1."""
    domain = domain or Box(-1e6, 1e6, 1e-9, 1e12)
    return ConformalChart(
        log_factor=lambda x, y: -np.log(y) + 0.0 * x,
        log_factor_gradient=lambda x, y: (0.0 * x + 0.0 * y, -1.0 / y + 0.0 * x),
        curvature_fn=lambda x, y: -1.0 + 0.0 * x + 0.0 * y,
        domain=domain, name="halfplane")


def flat_plane(domain: Optional[Box] = None) -> ConformalChart:
    domain = domain or Box(-1e6, 1e6, -1e6, 1e6)
    return ConformalChart(
        log_factor=lambda x, y: 0.0 * x + 0.0 * y,
        log_factor_gradient=lambda x, y: (0.0 * x + 0.0 * y, 0.0 * x + 0.0 * y),
        curvature_fn=lambda x, y: 0.0 * x + 0.0 * y,
        domain=domain, name="flat")


def round_sphere(domain: Optional[Box] = None) -> ConformalChart:
    """Stereographic chart of the unit sphere, curvature +1."""
    domain = domain or Box(-1e3, 1e3, -1e3, 1e3)

    def grad(x, y):
        w = 1.0 + x * x + y * y
        return -2.0 * x / w, -2.0 * y / w

    return ConformalChart(
        log_factor=lambda x, y: math.log(2.0) - np.log1p(x * x + y * y),
        log_factor_gradient=grad,
        curvature_fn=lambda x, y: 1.0 + 0.0 * x + 0.0 * y,
        domain=domain, name="sphere")


def wavy_plane(amplitude: float = 0.3, domain: Optional[Box] = None) -> ConformalChart:
    """``lam = A sin(x) cos(y)``; curvature of mixed sign."""
    A = float(amplitude)
    domain = domain or Box(-10.0, 10.0, -10.0, 10.0)
    lam = lambda x, y: A * np.sin(x) * np.cos(y)  # noqa: E731
    return ConformalChart(
        log_factor=lam,
        log_factor_gradient=lambda x, y: (A * np.cos(x) * np.cos(y), -A * np.sin(x) * np.sin(y)),
        curvature_fn=lambda x, y: 2 * A * np.sin(x) * np.cos(y) * np.exp(-2 * lam(x, y)),
        domain=domain, name=f"wavy({A!r})")


def _log_cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2 * x)) - math.log(2.0)


def tanh_cylinder(s_range=(-30.0, 30.0)) -> RevolutionChart:
    """``u = tanh``: ``r = cosh s``, curvature identically -1."""
    return RevolutionChart(
        profile=np.tanh,
        profile_derivative=lambda s: 1.0 / np.cosh(s) ** 2,
        log_radius=_log_cosh,
        s_range=tuple(s_range), name="tanh")


def flat_cylinder(s_range=(-1e6, 1e6)) -> RevolutionChart:
    return RevolutionChart(
        profile=lambda s: 0.0 * s,
        profile_derivative=lambda s: 0.0 * s,
        log_radius=lambda s: 0.0 * s,
        s_range=tuple(s_range), name="flat_cylinder")


def exponential_cylinder(kappa: float, s_range=(-30.0, 30.0)) -> RevolutionChart:
    """``u = kappa`` constant: ``r = exp(kappa s)``, curvature ``-kappa^2``."""
    k = float(kappa)
    return RevolutionChart(
        profile=lambda s: k + 0.0 * s,
        profile_derivative=lambda s: 0.0 * s,
        log_radius=lambda s: k * s,
        s_range=tuple(s_range), name=f"exponential({k!r})")
