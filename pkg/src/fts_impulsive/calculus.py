"""Conformable fractional-order derivative and integral.

Every operator is anchored at the left endpoint ``t_start`` of the current
inter-impulse interval. The change of variables

    u = (t - t_start)**q / q

has unit conformable derivative, so a conformable ODE ``T^q S = F(S)`` on a
segment is exactly the ordinary ODE ``dS/du = F(S)``. The simulator relies on
that reduction; the numeric derivative below is only a test oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from scipy import integrate

from .errors import DomainError, IntegrationError


@dataclass(frozen=True)
class Order:
    """Fractional order ``q`` in (0, 1]."""

    q: float

    def __post_init__(self):
        q = float(self.q)
        if not (0.0 < q <= 1.0) or math.isnan(q):
            raise DomainError(f"fractional order must lie in (0, 1], got {self.q!r}")
        object.__setattr__(self, "q", q)

    def __float__(self):
        return self.q


@dataclass(frozen=True)
class SegmentFrame:
    """Anchor of the conformable operators on one inter-impulse segment."""

    t_start: float
    order: Order

    @property
    def q(self) -> float:
        return self.order.q


def _as_order(order) -> Order:
    return order if isinstance(order, Order) else Order(order)


def make_frame(t_start: float, order) -> SegmentFrame:
    return SegmentFrame(float(t_start), _as_order(order))


def conformable_time(t: float, frame: SegmentFrame) -> float:
    """Map physical time to conformable time ``(t - t_start)**q / q``."""
    dt = t - frame.t_start
    if dt < 0:
        raise DomainError(f"t={t} precedes segment anchor {frame.t_start}")
    q = frame.q
    if q == 1.0:
        return dt
    return dt**q / q


def inverse_conformable_time(u: float, frame: SegmentFrame) -> float:
    """Inverse of :func:`conformable_time`."""
    if u < 0:
        raise DomainError(f"conformable time must be nonnegative, got {u}")
    q = frame.q
    if q == 1.0:
        return frame.t_start + u
    return frame.t_start + (q * u) ** (1.0 / q)


def default_step(t: float) -> float:
    return max(1e-6, 1e-6 * abs(t))


def cfo_derivative_numeric(
    h: Callable[[float], float],
    t: float,
    frame: SegmentFrame,
    step: float | None = None,
) -> float:
    """Central-difference estimate of ``(t - t_start)**(1-q) * h'(t)``.

    Only valid for differentiable ``h`` and strictly inside the segment; the
    one-sided limit at the anchor is deliberately not offered.
    """
    if t <= frame.t_start:
        raise DomainError(f"derivative needs t > t_start ({t} <= {frame.t_start})")
    if step is None:
        step = default_step(t)
    if step <= 0:
        raise DomainError("finite-difference step must be positive")
    slope = (h(t + step) - h(t - step)) / (2.0 * step)
    return (t - frame.t_start) ** (1.0 - frame.q) * slope


def cfo_integral_numeric(
    h: Callable[[float], float],
    frame: SegmentFrame,
    t_end: float,
    tol: float = 1e-10,
) -> float:
    """Conformable integral ``int_{t_start}^{t_end} h(s) (s - t_start)**(q-1) ds``.

    The weight is singular at the anchor for ``q < 1``. Substituting the
    conformable time ``u`` turns the integral into ``int_0^U h(s(u)) du`` with
    a regular integrand, which adaptive Gauss-Kronrod handles directly.
    """
    if t_end < frame.t_start:
        raise DomainError(f"t_end={t_end} precedes segment anchor {frame.t_start}")
    if tol <= 0:
        raise DomainError("tolerance must be positive")
    upper = conformable_time(t_end, frame)
    if upper == 0.0:
        return 0.0

    def integrand(u):
        s = inverse_conformable_time(u, frame)
        value = h(s)
        if not math.isfinite(value):
            raise IntegrationError(f"integrand is not finite at s={s}", t=s)
        return value

    value, _ = integrate.quad(integrand, 0.0, upper, epsabs=tol, epsrel=tol, limit=200)
    return value
