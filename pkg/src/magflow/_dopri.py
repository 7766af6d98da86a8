"""Vectorised Dormand-Prince 5(4) integrator.

Every row of the state array is an independent "lane" with its own time,
step size and error control, so a batch of trajectories gives bit-for-bit
the same result as integrating each lane on its own. Lanes that finish,
trigger an event or underflow are dropped from the active set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# Dormand & Prince (1980) coefficients, with the 4th-order continuous
# extension used by Hairer's DOPRI5.
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th and embedded 4th order weights (7 stages, FSAL)
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200,
              -22 / 525, 1 / 40])
P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423,
     69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1 / 5

DONE = 0
EVENT = 1  # event k is reported as EVENT + k
UNDERFLOW = -1
RUNNING = -2


class StepSizeUnderflow(RuntimeError):
    """Raised when the adaptive step size collapses below machine spacing."""


@dataclass
class DenseSteps:
    """Piecewise quartic interpolant over accepted steps of one lane."""

    t0: np.ndarray  # (n,)
    h: np.ndarray  # (n,)
    y0: np.ndarray  # (n, dim)
    Q: np.ndarray  # (n, dim, 4)

    @property
    def t_start(self) -> float:
        return float(self.t0[0])

    @property
    def t_stop(self) -> float:
        return float(self.t0[-1] + self.h[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        lo, hi = self.t_start, self.t_stop
        span = max(abs(lo), abs(hi), 1.0)
        if np.any(t < lo - 1e-12 * span) or np.any(t > hi + 1e-12 * span):
            raise ValueError(
                f"interpolation outside [{lo}, {hi}]")
        idx = np.searchsorted(self.t0, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.t0) - 1)
        x = (t - self.t0[idx]) / self.h[idx]
        y = _dense_eval(self.y0[idx], self.h[idx], self.Q[idx], x)
        return y[0] if scalar else y


@dataclass
class LaneSolution:
    t: np.ndarray
    y: np.ndarray
    status: np.ndarray
    n_accepted: np.ndarray
    n_rejected: np.ndarray
    max_error: np.ndarray
    dense: Optional[list] = None


def _combine(w, K):
    """``sum_s w[s] K[s]`` accumulated stage by stage.

    Elementwise accumulation keeps each lane's arithmetic independent of the
    batch shape (BLAS reductions are not).
    """
    out = np.zeros(K.shape[1:-1] + np.shape(w)[1:]) if np.ndim(w) > 1 else np.zeros(K.shape[1:])
    for s_, ws in enumerate(w):
        if np.any(ws != 0.0):
            out = out + ws * K[s_]
    return out


def _rms(x):
    return np.sqrt(np.mean(x * x, axis=-1))


def _initial_step(fun, t, y, f0, rtol, atol, max_step, span):
    scale = atol + rtol * np.abs(y)
    d0 = _rms(y / scale)
    d1 = _rms(f0 / scale)
    with np.errstate(divide="ignore", over="ignore"):
        h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
    h0 = np.minimum(h0, np.minimum(span, max_step))
    y1 = y + h0[:, None] * f0
    f1 = fun(t + h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    big = np.maximum(d1, d2)
    h1 = np.where(big <= 1e-15, np.maximum(1e-6, h0 * 1e-3),
                  (0.01 / np.maximum(big, 1e-300)) ** (1 / 5))
    return np.minimum(np.minimum(100 * h0, h1), np.minimum(span, max_step))


def _dense_eval(y, h, Q, x):
    # Horner in x; Q holds the coefficients of x, x^2, x^3, x^4
    x = x[:, None]
    poly = ((Q[:, :, 3] * x + Q[:, :, 2]) * x + Q[:, :, 1]) * x + Q[:, :, 0]
    return y + h[:, None] * (poly * x)


def integrate_lanes(
    fun: Callable,
    y0,
    t_end,
    *,
    t0=0.0,
    rtol: float = 1e-10,
    atol: float = 1e-10,
    max_step: float = np.inf,
    events: Optional[Callable] = None,
    record: bool = False,
    max_iterations: int = 10_000_000,
) -> LaneSolution:
    """Integrate ``y' = fun(t, y)`` lane by lane.

    ``fun`` receives times of shape ``(m,)`` and states ``(m, dim)`` for the
    currently active lanes. ``events(t, y)`` returns an ``(m, k)`` array; a
    lane stops when component ``j`` goes from positive to non-positive, and
    the crossing is located by bisection on the dense output.
    """
    y = np.array(y0, dtype=float, copy=True)
    if y.ndim == 1:
        y = y[None, :]
    n, dim = y.shape
    t = np.broadcast_to(np.asarray(t0, dtype=float), (n,)).copy()
    t_end = np.broadcast_to(np.asarray(t_end, dtype=float), (n,)).copy()
    if np.any(t_end <= t):
        raise ValueError("t_end must exceed t0 for every lane")

    status = np.full(n, RUNNING, dtype=int)
    n_acc = np.zeros(n, dtype=int)
    n_rej = np.zeros(n, dtype=int)
    max_err = np.zeros(n)
    rec = [] if record else None

    f = fun(t, y)
    h = _initial_step(fun, t, y, f, rtol, atol, max_step, t_end - t)
    g_old = events(t, y) if events is not None else None

    active = np.arange(n)
    ya, ta, fa, ha = y, t, f, h
    ga = g_old
    for _ in range(max_iterations):
        if active.size == 0:
            break
        te = t_end[active]
        remaining = te - ta
        hs = np.minimum(ha, remaining)
        # snap to the end when within a hair of it
        last = hs >= remaining * (1 - 1e-12)
        hs = np.where(last, remaining, hs)

        K = np.empty((7,) + ya.shape)
        K[0] = fa
        for s in range(1, 6):
            dy = np.zeros_like(ya)
            for j, a in enumerate(A[s]):
                if a != 0.0:
                    dy += a * K[j]
            K[s] = fun(ta + C[s] * hs, ya + hs[:, None] * dy)
        y_new = ya + hs[:, None] * _combine(B, K)
        t_new = np.where(last, te, ta + hs)
        K[6] = fun(t_new, y_new)
        err = hs[:, None] * _combine(E, K)
        scale = atol + rtol * np.maximum(np.abs(ya), np.abs(y_new))
        norm = _rms(err / scale)
        norm = np.where(np.isfinite(norm) & np.all(np.isfinite(y_new), axis=1),
                        norm, np.inf)
        ok = norm <= 1.0

        with np.errstate(divide="ignore"):
            grow = np.where(norm == 0, MAX_FACTOR,
                            np.minimum(MAX_FACTOR, SAFETY * norm ** ERR_EXP))
            shrink = np.where(np.isfinite(norm),
                              np.maximum(MIN_FACTOR, SAFETY * norm ** ERR_EXP),
                              MIN_FACTOR)
        factor = np.where(ok, grow, shrink)
        h_next = np.minimum(hs * factor, max_step)

        lane_status = np.full(active.size, RUNNING, dtype=int)
        underflow = (~ok) & (h_next < 10 * np.spacing(np.maximum(np.abs(ta), 1.0)))
        lane_status[underflow] = UNDERFLOW

        Q = None
        if np.any(ok):
            Q = _combine(P, K[:, :, :, None])
            stop_t = t_new.copy()
            stop_y = y_new.copy()
            if events is not None:
                g_new = events(t_new, y_new)
                hit = ok[:, None] & (ga > 0) & (g_new <= 0)
                lanes_hit = np.nonzero(hit.any(axis=1))[0]
                if lanes_hit.size:
                    th, yh, which = _locate(events, ta[lanes_hit], hs[lanes_hit],
                                            ya[lanes_hit], Q[lanes_hit],
                                            hit[lanes_hit])
                    stop_t[lanes_hit] = th
                    stop_y[lanes_hit] = yh
                    lane_status[lanes_hit] = EVENT + which
                ga = np.where(ok[:, None], g_new, ga)
            finished = ok & last & (lane_status == RUNNING)
            lane_status[finished] = DONE

            acc = np.nonzero(ok)[0]
            gidx = active[acc]
            n_acc[gidx] += 1
            max_err[gidx] = np.maximum(max_err[gidx], np.max(np.abs(err[acc]), axis=1))
            if rec is not None:
                h_rec = hs[acc].copy()
                ev = lane_status[acc] >= EVENT
                # truncate recorded step at the located event
                h_rec[ev] = stop_t[acc][ev] - ta[acc][ev]
                Q_rec = Q[acc].copy()
                if np.any(ev):
                    # re-express the quartic on the shortened step
                    r = (h_rec[ev] / hs[acc][ev])
                    scale_pows = np.stack([r, r ** 2, r ** 3, r ** 4], axis=-1)
                    Q_rec[ev] = Q_rec[ev] * (scale_pows / r[:, None])[:, None, :]
                rec.append((gidx, ta[acc].copy(), h_rec, ya[acc].copy(), Q_rec))
            ya = np.where(ok[:, None], stop_y, ya)
            ta = np.where(ok, stop_t, ta)
            fa = np.where(ok[:, None], K[6], fa)
        rej = np.nonzero(~ok)[0]
        n_rej[active[rej]] += 1
        ha = h_next

        done = lane_status != RUNNING
        if np.any(done):
            gd = active[done]
            status[gd] = lane_status[done]
            t[gd] = ta[done]
            y[gd] = ya[done]
            keep = ~done
            active = active[keep]
            ya, ta, fa, ha = ya[keep], ta[keep], fa[keep], ha[keep]
            if ga is not None:
                ga = ga[keep]
    else:  # pragma: no cover
        raise RuntimeError("iteration cap reached")

    dense = None
    if rec is not None:
        dense = _split_records(rec, n, dim)
    return LaneSolution(t=t, y=y, status=status, n_accepted=n_acc,
                        n_rejected=n_rej, max_error=max_err, dense=dense)


def _locate(events, t, h, y, Q, hit, iterations=60):
    """Bisect for the earliest event crossing inside each step."""
    lo = np.zeros(t.size)
    hi = np.ones(t.size)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        ym = _dense_eval(y, h, Q, mid)
        gm = events(t + mid * h, ym)
        crossed = np.any(hit & (gm <= 0), axis=1)
        hi = np.where(crossed, mid, hi)
        lo = np.where(crossed, lo, mid)
    y_hit = _dense_eval(y, h, Q, hi)
    g_hit = events(t + hi * h, y_hit)
    which = np.argmax(hit & (g_hit <= 0), axis=1)
    return t + hi * h, y_hit, which


def _split_records(rec, n, dim):
    if not rec:
        # every lane failed on its first step
        return [DenseSteps(t0=np.empty(0), h=np.empty(0), y0=np.empty((0, dim)),
                           Q=np.empty((0, dim, 4))) for _ in range(n)]
    lanes = np.concatenate([r[0] for r in rec])
    order = np.argsort(lanes, kind="stable")
    lanes = lanes[order]
    cols = [np.concatenate([r[k] for r in rec])[order] for k in range(1, 5)]
    out = []
    bounds = np.searchsorted(lanes, np.arange(n + 1))
    for i in range(n):
        sl = slice(bounds[i], bounds[i + 1])
        out.append(DenseSteps(t0=cols[0][sl], h=cols[1][sl], y0=cols[2][sl], Q=cols[3][sl]))
    return out
