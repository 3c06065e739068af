"""Adaptive Dormand-Prince 5(4) stepping with quartic dense output.

The stepper works in conformable time ``u`` and records one interpolant per
accepted step so that a finished segment can be evaluated anywhere.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .errors import IntegrationError

# Dormand-Prince 5(4) tableau and Shampine's continuous extension.
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
STEP_FLOOR = 1e-10


class DenseSegment:
    """Piecewise interpolant of one segment, indexed by conformable time.

    Each piece covers ``[u0, u1]`` and evaluates as
    ``y0 + h * Q @ [x, x**2, x**3, x**4]`` with ``x = (u - u0) / h``;
    constant pieces have ``Q = 0``.
    """

    def __init__(self, dim):
        self.dim = dim
        self._u0, self._u1, self._h, self._y0, self._q = [], [], [], [], []
        self._frozen = False

    def append(self, u0, u1, h, y0, q):
        self._u0.append(u0)
        self._u1.append(u1)
        self._h.append(h)
        self._y0.append(np.array(y0, dtype=float))
        self._q.append(np.zeros((self.dim, 4)) if q is None else q)

    def append_constant(self, u0, u1, y):
        self.append(u0, u1, 1.0, y, None)

    def freeze(self):
        self.u0 = np.array(self._u0)
        self.u1 = np.array(self._u1)
        self.h = np.array(self._h)
        self.y0 = np.array(self._y0).reshape(len(self._u0), self.dim)
        self.q = np.array(self._q).reshape(len(self._u0), self.dim, 4)
        self._frozen = True
        return self

    @property
    def u_end(self):
        return self.u1[-1]

    @property
    def n_pieces(self):
        return len(self.u0)

    def __call__(self, u):
        """Evaluate at scalar or array conformable times (clamped to the segment)."""
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        idx = np.searchsorted(self.u1, u_arr, side="left")
        idx = np.clip(idx, 0, len(self.u1) - 1)
        x = (u_arr - self.u0[idx]) / self.h[idx]
        powers = np.stack([x, x**2, x**3, x**4], axis=-1)
        out = self.y0[idx] + self.h[idx, None] * np.einsum("kdj,kj->kd", self.q[idx], powers)
        if np.ndim(u) == 0:
            return out[0]
        return out


def _rms(x):
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(fun, y0, f0, tol, span):
    scale = tol + tol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = fun(y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return max(min(100 * h0, h1, span), STEP_FLOOR)


def _checked(fun, y, u):
    f = fun(y)
    if not np.all(np.isfinite(f)):
        raise IntegrationError(f"vector field returned non-finite values at u={u}", t=u, state=np.array(y))
    return f


def _dopri_step(fun, y, f, h, u):
    k = np.empty((7, y.size))
    k[0] = f
    for i in range(1, 6):
        dy = h * (_A[i] @ k[:i])
        k[i] = _checked(fun, y + dy, u + _C[i] * h)
    y_new = y + h * (_B @ k[:6])
    k[6] = _checked(fun, y_new, u + h)
    err = h * (_E @ k)
    return y_new, err, k


def _first_guard_root(guards, dense_piece, g0, g1, u_a, u_b):
    """Earliest conformable time in (u_a, u_b] where a guard changes sign."""
    hits = np.flatnonzero(((g0 * g1) < 0) | ((g1 == 0) & (g0 != 0)))
    best, best_i = None, None
    for i in hits:
        if g1[i] == 0:
            root = u_b
        else:
            root = brentq(lambda s: guards(dense_piece(s))[i], u_a, u_b, xtol=1e-14, rtol=1e-15)
        if best is None or root < best:
            best, best_i = root, int(i)
    return best, best_i


def integrate(fun, y0, u_end, tol, *, hooks=None, zero_deadband=None, max_steps=2_000_000,
              max_forced=200_000, to_time=None):
    """Integrate ``dy/du = fun(y)`` on ``[0, u_end]`` and return a DenseSegment.

    ``hooks`` is an object with ``guards``, ``on_event`` and ``after_step``
    methods (see :class:`fts_impulsive.simulator.VectorField`). When
    ``zero_deadband`` is given, a state whose norm falls below it is clamped
    to exactly zero and the rest of the segment is emitted as zero.
    ``to_time`` maps conformable time back to physical time for error
    reporting.
    """
    y = np.array(y0, dtype=float)
    dim = y.size
    seg = DenseSegment(dim)
    report = to_time or (lambda s: s)
    u = 0.0
    if u_end <= 0.0:
        seg.append_constant(0.0, 0.0, y)
        return seg.freeze()

    def settled(state):
        return zero_deadband is not None and np.linalg.norm(state) <= zero_deadband

    if settled(y):
        seg.append_constant(0.0, u_end, np.zeros(dim))
        return seg.freeze()

    f = _checked(fun, y, u)
    h = _initial_step(fun, y, f, tol, u_end)
    steps = forced = 0
    guards = hooks.guards if hooks is not None else None
    g_prev = guards(y) if guards is not None else None
    if g_prev is None:
        guards = None

    while u < u_end:
        steps += 1
        if steps > max_steps:
            raise IntegrationError("step budget exhausted", t=report(u), state=y.copy())
        last = h >= u_end - u
        if last:
            h = u_end - u
        y_new, err, k = _dopri_step(fun, y, f, h, u)
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _rms(err / scale)
        if err_norm > 1.0:
            if h > STEP_FLOOR:
                h = max(STEP_FLOOR, h * max(MIN_FACTOR, SAFETY * err_norm ** (-0.2)))
                continue
            forced += 1
            if forced > max_forced:
                raise IntegrationError(
                    "step size underflow: error test keeps failing at the step floor",
                    t=report(u), state=y.copy(),
                )
        if not np.all(np.isfinite(y_new)):
            raise IntegrationError("solution became non-finite", t=report(u), state=y_new)

        u_new = u_end if last else u + h
        q = k.T @ _P
        piece_y0, piece_h, piece_u0 = y.copy(), h, u

        def piece(s, _y0=piece_y0, _h=piece_h, _u0=piece_u0, _q=q):
            x = (s - _u0) / _h
            return _y0 + _h * (_q @ np.array([x, x * x, x**3, x**4]))

        event_i = None
        if guards is not None:
            g_new = guards(y_new)
            root, event_i = _first_guard_root(guards, piece, g_prev, g_new, u, u_new)
            if event_i is not None:
                u_new = root
                y_new = piece(root)

        seg.append(u, u_new, h, y, q)
        u = u_new
        y = y_new
        changed = False
        if event_i is not None:
            y = hooks.on_event(y, event_i)
            changed = True
        if hooks is not None:
            y_after = hooks.after_step(y)
            if y_after is not y:
                y = y_after
                changed = True

        if settled(y):
            if u < u_end:
                seg.append_constant(u, u_end, np.zeros(dim))
            break
        if event_i is None and not changed:
            f = k[6]
        else:
            f = _checked(fun, y, u)
        if guards is not None:
            g_prev = guards(y)
        factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** (-0.2))
        h = max(STEP_FLOOR, h * max(factor, MIN_FACTOR) if err_norm <= 1 else h)
    return seg.freeze()
