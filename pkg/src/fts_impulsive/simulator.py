"""Piecewise simulation of conformable systems with delayed impulses.

Between impulses the state obeys ``T^q S = F(S)`` anchored at the previous
impulse instant; at ``t_j`` it jumps to ``G_j(S(t_j^- - tau_j))``. Each
segment is integrated as an ordinary ODE in conformable time, and the delayed
argument of the jump is read from the current segment's dense output (the
schedule guarantees it lies inside that segment).
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import integrator
from .calculus import Order, SegmentFrame, conformable_time, inverse_conformable_time, make_frame
from .errors import ConfigurationError, DomainError

DEFAULT_DEADBAND = 1e-10
SIGN_DEADBAND = 1e-12


def sgn(x, deadband=0.0):
    """Sign with ``sgn(0) = 0``; magnitudes at or below ``deadband`` count as zero."""
    x = np.asarray(x, dtype=float)
    out = np.sign(x)
    if deadband > 0:
        out = np.where(np.abs(x) <= deadband, 0.0, out)
    return out


def spow(x, p):
    """Sign-preserving power ``sgn(x) * |x|**p``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** p


def sqrt_clamped(x):
    """Square root with tiny negative round-off clamped to zero."""
    return np.sqrt(np.maximum(np.asarray(x, dtype=float), 0.0))


class VectorField:
    """Right-hand side ``F`` of the flow, plus optional event hooks.

    Subclasses with switching logic override :meth:`guards`,
    :meth:`on_event`, :meth:`after_step` and :meth:`on_segment_start`.

    With ``zero_crossings`` set, every state component is a guard: a step in
    which a component changes sign is cut at the crossing and the component
    is set to exactly zero. This keeps non-Lipschitz finite-time dynamics
    from overshooting the origin and stalling there. A component whose
    magnitude falls to ``snap_below`` or less after an accepted step is also
    set to zero; without this, fields like ``-|s|^(1/3)`` can park one
    component at a spurious fixed point of the step map just short of zero.
    """

    def __init__(self, dim: int, fn: Callable[[np.ndarray], np.ndarray], zero_fixed: bool = True,
                 zero_crossings: bool = False, snap_below: float | None = DEFAULT_DEADBAND):
        if dim <= 0:
            raise ConfigurationError("dimension must be positive", field="dim")
        self.dim = int(dim)
        self._fn = fn
        self.zero_fixed = bool(zero_fixed)
        self.zero_crossings = bool(zero_crossings)
        self.snap_below = snap_below
        if self.zero_fixed:
            at_zero = np.asarray(self.eval(np.zeros(self.dim)), dtype=float)
            if at_zero.shape != (self.dim,) or np.any(np.abs(at_zero) > 1e-12):
                raise ConfigurationError("vector field flagged zero_fixed but F(0) != 0", field="system")

    def eval(self, state):
        return np.asarray(self._fn(state), dtype=float).reshape(self.dim)

    __call__ = eval

    def guards(self, state):
        return np.array(state, dtype=float) if self.zero_crossings else None

    def on_event(self, state, index):
        state = np.array(state, dtype=float)
        state[index] = 0.0
        return state

    def after_step(self, state):
        if not self.zero_crossings or not self.snap_below:
            return state
        small = (np.abs(state) <= self.snap_below) & (state != 0)
        if not small.any():
            return state
        state = np.array(state, dtype=float)
        state[small] = 0.0
        return state

    def on_segment_start(self, state):
        return state


@dataclass(frozen=True)
class ImpulseEvent:
    """Impulse at ``t`` mapping the state at ``t^- - tau`` through ``jump``."""

    t: float
    tau: float
    jump: Callable[[np.ndarray], np.ndarray]
    linear_gain: float | None = None

    def __post_init__(self):
        if self.tau < 0:
            raise ConfigurationError(f"impulse delay must be >= 0, got {self.tau}", field="delays")
        if self.linear_gain is None:
            return
        if not np.isfinite(self.linear_gain):
            raise ConfigurationError("impulse gain must be finite", field="gains")

    @classmethod
    def linear(cls, t, tau, gain):
        gain = float(gain)
        return cls(float(t), float(tau), lambda s, g=gain: g * np.asarray(s, dtype=float), gain)

    def apply(self, state):
        if self.linear_gain is not None:
            return self.linear_gain * np.asarray(state, dtype=float)
        return np.asarray(self.jump(state), dtype=float)


@dataclass(frozen=True)
class ImpulseSchedule:
    """Ordered impulses with delays bounded by ``tau_max``."""

    events: tuple[ImpulseEvent, ...] = ()
    tau_max: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.tau_max is None:
            object.__setattr__(self, "tau_max", max((e.tau for e in self.events), default=0.0))

    @classmethod
    def linear(cls, times, delays, gains, tau_max=None):
        times = list(times)
        delays = _broadcast(delays, len(times), "delays")
        gains = _broadcast(gains, len(times), "gains")
        return cls(tuple(ImpulseEvent.linear(t, d, g) for t, d, g in zip(times, delays, gains)), tau_max)

    @property
    def times(self):
        return [e.t for e in self.events]

    @property
    def delays(self):
        return [e.tau for e in self.events]

    def validate(self, t0: float = 0.0):
        """Raise ConfigurationError unless ``t_{j-1} <= t_j - tau_j <= t_j`` for all j.

        A zero delay is a delay-free impulse acting on the left limit at ``t_j``.
        """
        previous = t0
        for j, e in enumerate(self.events, start=1):
            if e.t <= previous and j > 1:
                raise ConfigurationError(f"impulse times must increase strictly (t_{j}={e.t})", field="times")
            if e.tau > self.tau_max:
                raise ConfigurationError(f"tau_{j}={e.tau} exceeds tau_max={self.tau_max}", field="delays")
            # tau_j = 0 reads the left limit S(t_j^-), so only the lower bound can fail
            if not previous <= e.t - e.tau:
                raise ConfigurationError(
                    f"impulse {j} violates t_(j-1) <= t_j - tau_j "
                    f"({previous} <= {e.t} - {e.tau})",
                    field="delays",
                )
            previous = e.t
        return self

    def __len__(self):
        return len(self.events)


def _broadcast(value, n, name):
    if np.ndim(value) == 0:
        return [float(value)] * n
    value = [float(v) for v in value]
    if len(value) != n:
        raise ConfigurationError(f"{name} has {len(value)} entries for {n} impulses", field=name)
    return value


@dataclass(frozen=True)
class JumpRecord:
    t: float
    tau: float
    pre: np.ndarray
    delayed: np.ndarray
    post: np.ndarray


@dataclass(frozen=True)
class Segment:
    t_left: float
    t_right: float
    frame: SegmentFrame
    dense: integrator.DenseSegment

    def at(self, t):
        t = np.clip(np.asarray(t, dtype=float), self.t_left, self.t_right)
        dt = t - self.t_left
        q = self.frame.q
        u = dt if q == 1.0 else dt**q / q
        return self.dense(u)

    @property
    def settled_from(self):
        """Physical time after which this segment is the constant zero, if any."""
        d = self.dense
        if d.n_pieces and not np.any(d.q[-1]) and not np.any(d.y0[-1]):
            return inverse_conformable_time(d.u0[-1], self.frame)
        return None


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-continuous solution, right-continuous at impulse instants."""

    segments: tuple[Segment, ...]
    jumps: tuple[JumpRecord, ...]
    order: Order
    t0: float
    initial_state: np.ndarray
    output: np.ndarray | None = field(default=None)

    @property
    def horizon(self):
        return self.segments[-1].t_right

    @property
    def dim(self):
        if self.output is not None:
            return self.output.shape[0]
        return self.initial_state.size

    def _out(self, y):
        return y if self.output is None else y @ self.output.T

    def _check(self, t):
        if t < self.t0 or t > self.horizon:
            raise DomainError(f"t={t} outside [{self.t0}, {self.horizon}]")

    def _segment_right(self, t):
        lefts = [s.t_left for s in self.segments]
        return self.segments[max(bisect.bisect_right(lefts, t) - 1, 0)]

    def _segment_left(self, t):
        lefts = [s.t_left for s in self.segments]
        return self.segments[max(bisect.bisect_left(lefts, t) - 1, 0)]

    def sample(self, t):
        """Right-continuous state at ``t`` (post-impulse value at jump instants)."""
        self._check(t)
        return self._out(self._segment_right(t).at(t))

    def sample_pre(self, t):
        """Left limit ``S(t^-)``; equals :meth:`sample` away from jumps."""
        self._check(t)
        if t == self.t0:
            return self._out(self.segments[0].at(t))
        return self._out(self._segment_left(t).at(t))

    def sample_grid(self, ts):
        """Right-continuous samples on a nondecreasing grid, as an (m, dim) array."""
        ts = np.asarray(ts, dtype=float)
        if ts.size and (ts[0] < self.t0 or ts[-1] > self.horizon):
            raise DomainError("grid leaves the trajectory's time span")
        lefts = np.array([s.t_left for s in self.segments])
        idx = np.clip(np.searchsorted(lefts, ts, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty((ts.size, self.initial_state.size))
        for k in np.unique(idx):
            mask = idx == k
            out[mask] = self.segments[k].at(ts[mask])
        return self._out(out)

    def project(self, matrix):
        """View of this trajectory through a linear output map."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if self.output is not None:
            matrix = matrix @ self.output
        return Trajectory(self.segments, self.jumps, self.order, self.t0, self.initial_state, matrix)

    def jump_records(self):
        """Jump records expressed in output coordinates."""
        return [
            JumpRecord(j.t, j.tau, self._out(j.pre), self._out(j.delayed), self._out(j.post))
            for j in self.jumps
        ]


def integrate_segment(field: VectorField, s_start, frame: SegmentFrame, t_end: float, tol: float,
                      zero_deadband: float | None = None):
    """Solve one segment ``[frame.t_start, t_end]`` and return its dense record."""
    if t_end < frame.t_start:
        raise DomainError(f"t_end={t_end} precedes segment start {frame.t_start}")
    if tol <= 0:
        raise DomainError("tolerance must be positive")
    s_start = np.asarray(s_start, dtype=float)
    if not np.all(np.isfinite(s_start)):
        raise DomainError("initial segment state is not finite")
    u_end = conformable_time(t_end, frame)
    return integrator.integrate(
        field.eval, s_start, u_end, tol,
        hooks=field, zero_deadband=zero_deadband if field.zero_fixed else None,
        to_time=lambda u: inverse_conformable_time(u, frame),
    )


def simulate(field: VectorField, schedule: ImpulseSchedule, order, s0, horizon: float,
             tol: float = 1e-10, t0: float = 0.0, zero_deadband: float | None = DEFAULT_DEADBAND):
    """Simulate the impulsive system on ``[t0, horizon]``.

    Impulses scheduled after ``horizon`` are ignored; an impulse exactly at
    ``horizon`` is applied and leaves a degenerate final segment.
    """
    order = order if isinstance(order, Order) else Order(order)
    s0 = np.asarray(s0, dtype=float).reshape(-1)
    if s0.size != field.dim:
        raise ConfigurationError(f"initial state has {s0.size} entries, field expects {field.dim}",
                                 field="initial_state")
    if not np.all(np.isfinite(s0)):
        raise ConfigurationError("initial state is not finite", field="initial_state")
    if not horizon > t0:
        raise ConfigurationError("horizon must exceed t0", field="horizon")
    schedule.validate(t0)
    for e in schedule.events:
        if np.any(e.apply(np.zeros(field.dim)) != 0):
            raise ConfigurationError(f"jump map at t={e.t} does not send 0 to 0", field="gains")

    segments, jumps = [], []
    t_left, state = float(t0), s0.copy()
    events = [e for e in schedule.events if e.t <= horizon]
    for event in events + [None]:
        t_right = horizon if event is None else event.t
        frame = make_frame(t_left, order)
        state = field.on_segment_start(state)
        dense = integrate_segment(field, state, frame, t_right, tol, zero_deadband)
        seg = Segment(t_left, t_right, frame, dense)
        segments.append(seg)
        if event is None:
            break
        t_delay = event.t - event.tau
        # the schedule invariant keeps the delayed instant inside this segment
        if not (t_left <= t_delay <= t_right):
            raise ConfigurationError(f"delayed instant {t_delay} left segment [{t_left}, {t_right}]",
                                     field="delays")
        pre = seg.at(t_right)
        delayed = seg.at(t_delay)
        post = event.apply(delayed)
        if zero_deadband is not None and field.zero_fixed and np.linalg.norm(post) <= zero_deadband:
            post = np.zeros_like(post)
        jumps.append(JumpRecord(event.t, event.tau, pre, delayed, post))
        t_left, state = event.t, post
    if segments[-1].t_right < horizon:
        raise AssertionError("segments do not reach the horizon")
    return Trajectory(tuple(segments), tuple(jumps), order, float(t0), s0)
