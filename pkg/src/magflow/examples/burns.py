"""Exact Anosov magnetic system on a non-Anosov surface of revolution.

The profile ``u`` is ``tanh`` except on ``[-delta, delta]``, where an odd
quintic with slope ``-a`` at the origin makes the parallel ``s = 0`` a closed
geodesic through positive curvature. The profile ``v`` agrees with ``u`` on
``[-delta1, delta1]``, blends over ``[delta1, delta2]`` and is then
``c tanh(c s)`` with ``c^2 = 1 + eps``, i.e. curvature ``-1 - eps``. The
magnetic intensity is a bump equal to 1/2 on ``[-delta2, delta2]`` that
decays to zero at ``delta4``; its negative on a second copy makes the doubled
system exact.
"""

from __future__ import annotations

import math
from functools import cached_property
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate as spi

from .._io import csv_text, json_text
from ..flow import FlowSettings, band_occupation_time, integrate_many
from ..geom import MagneticIntensity, MagneticSystem, RevolutionChart, UnitTangent, _log_cosh
from ..stability import CertificateReport, SamplerBox, anosov_certificate

QUARTER_TANH = math.tanh(0.25)
GRID = 2001


class ConstructionError(ValueError):
    """Some construction clauses fail; ``failures`` lists them."""

    def __init__(self, failures):
        self.failures = list(failures)
        names = ", ".join(f.name for f in self.failures)
        super().__init__(f"Burns construction invalid: {names}")


def _sech2(x):
    return 1.0 / np.cosh(x) ** 2


def _hermite(x0, x1, p0, m0, p1, m1) -> Polynomial:
    """Cubic in the global variable matching value and slope at both ends."""
    h = x1 - x0
    t = Polynomial([-x0 / h, 1.0 / h])
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    h11 = t**3 - t**2
    return p0 * h00 + h * m0 * h10 + p1 * h01 + h * m1 * h11


@dataclass(frozen=True)
class BurnsProfile:
    """Parameters of the profiles ``u`` and ``v``.

    ``perturbed=False`` keeps ``u = tanh`` (no core modification).
    """

    delta: float = 0.05
    delta1: float = 0.5
    delta2: float = 1.0
    delta3: float = 3.0
    delta4: float = 15.0
    epsilon: float = 0.01
    a: float = 0.1
    perturbed: bool = True

    @property
    def c(self) -> float:
        return math.sqrt(1.0 + self.epsilon)

    def ordering_ok(self) -> bool:
        return (0 < self.delta < 0.25 < self.delta1 < self.delta2 < self.delta3 < self.delta4
                and self.epsilon > 0)

    def constructible(self) -> bool:
        return 0 < self.delta < self.delta1 < self.delta2 and self.epsilon > -1

    # core quintic -a s + c3 s^3 + c5 s^5, C^1 to tanh at delta
    @cached_property
    def _core(self):
        d, a = self.delta, self.a
        M = np.array([[d**3, d**5], [3 * d**2, 5 * d**4]])
        rhs = np.array([math.tanh(d) + a * d, 1.0 / math.cosh(d) ** 2 + a])
        c3, c5 = np.linalg.solve(M, rhs)
        return Polynomial([0.0, -a, 0.0, c3, 0.0, c5])

    @cached_property
    def _blend(self) -> Polynomial:
        c, d1, d2 = self.c, self.delta1, self.delta2
        p0, m0 = self.u(d1), self.du(d1)
        return _hermite(d1, d2, float(p0), float(m0), c * math.tanh(c * d2),
                        c * c / math.cosh(c * d2) ** 2)

    def u(self, s):
        s = np.asarray(s, dtype=float)
        out = np.tanh(s)
        if self.perturbed:
            core = np.abs(s) <= self.delta
            out = np.where(core, self._core(s), out)
        return out

    def du(self, s):
        s = np.asarray(s, dtype=float)
        out = _sech2(s)
        if self.perturbed:
            out = np.where(np.abs(s) <= self.delta, self._core.deriv()(s), out)
        return out

    def v(self, s):
        s = np.asarray(s, dtype=float)
        x = np.abs(s)
        c = self.c
        blend = self._blend
        out = np.where(x <= self.delta1, self.u(x),
                       np.where(x <= self.delta2, blend(x), c * np.tanh(c * x)))
        return np.sign(s) * out

    def dv(self, s):
        x = np.abs(np.asarray(s, dtype=float))
        c = self.c
        blend = self._blend
        return np.where(x <= self.delta1, self.du(x),
                        np.where(x <= self.delta2, blend.deriv()(x), c * c * _sech2(c * x)))

    def log_radius(self, s):
        """``int_0^s v``, in closed form piece by piece."""
        x = np.abs(np.asarray(s, dtype=float))
        d, d1, d2, c = self.delta, self.delta1, self.delta2, self.c
        if self.perturbed:
            core_int = self._core.integ()
            r_d = float(core_int(d))
            inner = np.where(x <= d, core_int(x), r_d + _log_cosh(x) - _log_cosh(d))
        else:
            inner = _log_cosh(x)
        r_d1 = (float(self._core.integ()(d)) + _log_cosh(d1) - _log_cosh(d)
                if self.perturbed else float(_log_cosh(d1)))
        blend_int = self._blend.integ()
        mid = r_d1 + blend_int(x) - float(blend_int(d1))
        r_d2 = r_d1 + float(blend_int(d2) - blend_int(d1))
        tail = r_d2 + _log_cosh(c * x) - _log_cosh(c * d2)
        return np.where(x <= d1, inner, np.where(x <= d2, mid, tail))

    def curvature_u(self, s):
        u = self.u(s)
        return -self.du(s) - u * u

    def curvature_v(self, s):
        v = self.v(s)
        return -self.dv(s) - v * v

    def chart(self, s_range=(-30.0, 30.0)) -> RevolutionChart:
        knots = (self.delta, self.delta1, self.delta2)
        return RevolutionChart(profile=self.v, profile_derivative=self.dv,
                               log_radius=self.log_radius,
                               breakpoints=tuple(sorted({-k for k in knots} | set(knots) | {0.0})),
                               s_range=tuple(s_range), name="burns_v")


@dataclass(frozen=True)
class BumpIntensity:
    """``b_+``: ``height`` on ``[-delta2, delta2]``, cubic smoothstep to 0 at ``delta4``."""

    delta2: float = 1.0
    delta4: float = 15.0
    epsilon: float = 0.01
    height: float = 0.5

    def _x(self, s):
        w = self.delta4 - self.delta2
        return np.clip((np.abs(np.asarray(s, dtype=float)) - self.delta2) / w, 0.0, 1.0)

    def value(self, s):
        x = self._x(s)
        return self.height * (1.0 - x * x * (3.0 - 2.0 * x))

    def slope(self, s):
        s = np.asarray(s, dtype=float)
        x = self._x(s)
        w = self.delta4 - self.delta2
        return -np.sign(s) * self.height * 6.0 * x * (1.0 - x) / w

    def intensity(self, sign: float = 1.0) -> MagneticIntensity:
        k = float(sign)
        return MagneticIntensity.radial(lambda s: k * self.value(s), lambda s: k * self.slope(s),
                                        name="b_plus" if k > 0 else "b_minus")


# --- validation -----------------------------------------------------------------

@dataclass
class Clause:
    name: str
    description: str
    passed: bool
    margin: float
    witness: Optional[float] = None
    value: Optional[float] = None


def _worst(s, excess, name, description, tol=0.0):
    """Clause from ``excess <= tol`` on a grid; the witness is the worst point."""
    i = int(np.argmax(excess))
    ok = bool(excess[i] <= tol)
    return Clause(name, description, ok, float(-excess[i]),
                  None if ok else float(s[i]), None if ok else float(excess[i]))


def _two_sided(lo, hi, n=GRID):
    pos = np.linspace(lo, hi, n)
    return np.concatenate([-pos[::-1], pos])


def magnetic_curvature_sup(profile: BurnsProfile, bump: BumpIntensity, s):
    """``max_phi K^{g_v, b}(s, phi) = K_v + |b'| + b^2``."""
    b = bump.value(s)
    return profile.curvature_v(s) + np.abs(bump.slope(s)) + b * b


def validate(profile: BurnsProfile, bump: BumpIntensity, s_max: float = 30.0) -> List[Clause]:
    """Evaluate every construction clause on grids of ``GRID`` points."""
    p = profile
    out = [Clause("ordering", "0 < delta < 1/4 < delta1 < delta2 < delta3 < delta4, eps > 0",
                  p.ordering_ok(), 0.0)]
    if not out[0].passed:
        out[0].value = float(p.delta)
    if not p.constructible() or not bump.delta2 < bump.delta4:
        return out
    shared = max(abs(bump.delta2 - p.delta2), abs(bump.delta4 - p.delta4),
                 abs(bump.epsilon - p.epsilon))
    out.append(Clause("shared_parameters", "profile and bump agree on delta2, delta4, eps",
                      shared == 0.0, -shared, None, None if shared == 0.0 else shared))
    d, d1, d2, d4 = p.delta, p.delta1, p.delta2, bump.delta4
    core = np.linspace(-d, d, GRID)
    outer = _two_sided(d, max(s_max, d4 + 1.0))
    tiny = 1e-12
    out.append(_worst(outer, np.abs(p.u(outer) - np.tanh(outer)), "u_tanh_outside",
                      "u = tanh outside [-delta, delta]", tiny))
    out.append(_worst(core, np.abs(p.u(core)) - QUARTER_TANH, "u_bound_core",
                      "|u| < tanh(1/4) on [-delta, delta]", -tiny))
    out.append(_worst(core, p.curvature_u(core) - 0.25, "u_curvature_core",
                      "K_u < 1/4 on [-delta, delta]", -tiny))
    u0 = float(p.u(0.0))
    out.append(Clause("u_zero", "u(0) = 0", u0 == 0.0, -abs(u0), None if u0 == 0 else 0.0, u0))
    du0 = float(p.du(0.0))
    out.append(Clause("u_slope", "u'(0) < 0", du0 < 0, -du0, None if du0 < 0 else 0.0,
                      None if du0 < 0 else du0))
    inner = np.linspace(-d1, d1, GRID)
    out.append(_worst(inner, np.abs(p.v(inner) - p.u(inner)), "v_equals_u",
                      "v = u on [-delta1, delta1]", tiny))
    trans = _two_sided(d1, d2)
    out.append(_worst(trans, p.curvature_v(trans) - 1.0, "v_curvature_transition",
                      "K_v <= 1 for delta1 <= |s| <= delta2", tiny))
    tail = _two_sided(d2 + 1e-9, max(s_max, d4 + 1.0))
    out.append(_worst(tail, np.abs(p.curvature_v(tail) + 1.0 + p.epsilon), "v_curvature_tail",
                      "K_v = -1 - eps for |s| > delta2", 1e-10))
    b = bump
    beyond = _two_sided(d4, max(s_max, d4 + 1.0))
    out.append(_worst(beyond, np.abs(b.value(beyond)), "b_support",
                      "b_+ supported in [-delta4, delta4]", 0.0))
    every = _two_sided(0.0, max(s_max, d4 + 1.0))
    vals = b.value(every)
    out.append(_worst(every, np.maximum(-vals, vals - 0.5), "b_range", "0 <= b_+ <= 1/2", 0.0))
    plateau = np.linspace(-d2, d2, GRID)
    out.append(_worst(plateau, np.abs(b.value(plateau) - 0.5), "b_plateau",
                      "b_+ = 1/2 on [-delta2, delta2]", tiny))
    shoulder = _two_sided(0.0, d4)
    out.append(_worst(shoulder, np.abs(b.slope(shoulder)) + b.value(shoulder) ** 2
                      - 0.25 - b.epsilon, "b_slope", "|b_+'| + b_+^2 < 1/4 + eps", -tiny))
    out.append(_worst(core, magnetic_curvature_sup(p, b, core) - 0.5, "magnetic_core",
                      "K^{g_v,b} <= 1/2 on C_delta", tiny))
    out.append(_worst(outer, magnetic_curvature_sup(p, b, outer) + 0.75, "magnetic_outside",
                      "K^{g_v,b} <= -3/4 outside C_delta", tiny))
    return out


def non_anosov_witness(profile: BurnsProfile) -> dict:
    """The parallel ``s = 0`` is a closed geodesic through ``K > 0``."""
    k_geo = float(profile.v(0.0))  # geodesic curvature of the parallel
    K0 = float(profile.curvature_v(0.0))
    return {"parallel_geodesic_curvature": k_geo, "K0": K0,
            "closed_geodesic": k_geo == 0.0, "positive_curvature": K0 > 0,
            "holds": k_geo == 0.0 and K0 > 0}


@dataclass
class BurnsSystem:
    profile: BurnsProfile
    bump: BumpIntensity
    plus: MagneticSystem
    minus: MagneticSystem
    clauses: List[Clause] = field(repr=False)

    def copy_integral(self, sign: float = 1.0, with_radius: bool = True) -> float:
        """``int b Omega`` over one copy (``with_radius=False``: ``2 pi int b ds``)."""
        p, b = self.profile, self.bump
        d4 = b.delta4
        knots = [k for k in (-b.delta2, -p.delta1, -p.delta, 0.0, p.delta, p.delta1, b.delta2)
                 if -d4 < k < d4]

        def f(s):
            w = float(np.exp(p.log_radius(s))) if with_radius else 1.0
            return sign * float(b.value(s)) * w

        val, _ = spi.quad(f, -d4, d4, points=knots, limit=400, epsabs=1e-13, epsrel=1e-13)
        return 2.0 * math.pi * val

    def exactness(self) -> dict:
        plus, minus = self.copy_integral(1.0), self.copy_integral(-1.0)
        plus_flat, minus_flat = self.copy_integral(1.0, False), self.copy_integral(-1.0, False)
        return {"plus": plus, "minus": minus, "total": plus + minus,
                "plus_without_radius": plus_flat, "minus_without_radius": minus_flat,
                "total_without_radius": plus_flat + minus_flat}

    def cohomology_constant(self, euler_characteristic: int = -2) -> float:
        if euler_characteristic == 0:
            raise ValueError("Euler characteristic must be non-zero")
        return self.exactness()["total"] / (2 * math.pi * euler_characteristic)


def validation_report(profile: BurnsProfile, bump: BumpIntensity, s_max: float = 30.0) -> dict:
    clauses = validate(profile, bump, s_max)
    report = {"profile": asdict(profile), "bump": asdict(bump),
              "clauses": [asdict(c) for c in clauses],
              "failed": [c.name for c in clauses if not c.passed],
              "witness": non_anosov_witness(profile) if profile.constructible() else None}
    report["valid"] = not report["failed"]
    return report


def build_burns_system(profile: Optional[BurnsProfile] = None,
                       bump: Optional[BumpIntensity] = None,
                       s_range=(-30.0, 30.0)) -> BurnsSystem:
    """Validate and assemble the ``b_+`` and ``b_-`` copies."""
    profile = profile or BurnsProfile()
    bump = bump or BumpIntensity(delta2=profile.delta2, delta4=profile.delta4,
                                 epsilon=profile.epsilon)
    clauses = validate(profile, bump, max(abs(s_range[0]), abs(s_range[1])))
    failed = [c for c in clauses if not c.passed]
    if failed:
        raise ConstructionError(failed)
    chart = profile.chart(s_range)
    return BurnsSystem(profile, bump, MagneticSystem(chart, bump.intensity(1.0)),
                       MagneticSystem(chart, bump.intensity(-1.0)), clauses)


# --- certificate experiment -----------------------------------------------------

@dataclass
class BurnsExperiment:
    certificate: CertificateReport
    band_times: np.ndarray
    band_states: np.ndarray
    band_cap: float
    reversal_error: float
    exactness: dict

    @property
    def band_max(self) -> float:
        return float(np.max(self.band_times))

    @property
    def passed(self) -> bool:
        return (self.certificate.passed and self.band_max < self.band_cap
                and self.reversal_error < 1e-6 and abs(self.exactness["total"]) < 1e-8)

    def to_dict(self) -> dict:
        d = self.certificate.to_dict()
        d["band"] = {"samples": int(len(self.band_times)), "max_time": self.band_max,
                     "cap": self.band_cap, "below_cap": self.band_max < self.band_cap}
        d["reversal_max_error"] = self.reversal_error
        d["exactness"] = self.exactness
        d["experiment_pass"] = self.passed
        return d

    def to_json(self) -> str:
        return json_text(self.to_dict())

    def band_csv(self) -> str:
        rows = [(i, *st, t) for i, (st, t) in enumerate(zip(self.band_states, self.band_times))]
        return csv_text(["index", "s0", "theta0", "phi0", "band_time"], rows)


def _state_gap(a: UnitTangent, b: UnitTangent) -> float:
    def wrap(x):
        return abs((x + math.pi) % (2 * math.pi) - math.pi)
    return max(abs(a.p - b.p), wrap(a.q - b.q), wrap(a.angle - b.angle))


def burns_certificate_experiment(burns: BurnsSystem, *, n: int = 10_000, T: float = 4.0,
                                 H: float = 3.0, seed: int = 0, threads: int = 1,
                                 band_samples: int = 256, band_cap: float = 3.0,
                                 reversal_samples: int = 16,
                                 config: Optional[dict] = None) -> BurnsExperiment:
    """Sampled Anosov certificate for the ``b_+`` copy plus side checks.

    Band occupation of ``C_delta`` and the time-reversal symmetry between
    the two copies are measured on the first seeded samples only.
    """
    d4 = burns.bump.delta4
    sampler = SamplerBox((-d4, d4), (0.0, 2 * math.pi))
    cert = anosov_certificate(burns.plus, sampler, T, H, n, seed, threads=threads,
                              config=config)
    states = sampler.draw(n, seed)
    starts = [UnitTangent(st[:2], st[2]) for st in states]
    settings = FlowSettings(horizon=T, rel_tol=1e-10, abs_tol=1e-10, sample_spacing=0.01)
    delta = burns.profile.delta
    band = [band_occupation_time(tr, (-delta, delta))
            for tr in integrate_many(burns.plus, starts[:band_samples], settings)]
    tight = FlowSettings(horizon=T, rel_tol=1e-12, abs_tol=1e-12)
    fwd = integrate_many(burns.plus, starts[:reversal_samples], tight, sample=False)
    bwd = integrate_many(burns.minus, [tr.end.reversed() for tr in fwd], tight, sample=False)
    rev = max((_state_gap(tr.end.reversed(), st) for tr, st in zip(bwd, starts)), default=0.0)
    return BurnsExperiment(cert, np.array(band), states[:band_samples], float(band_cap), rev,
                           burns.exactness())
