"""Settling-time bounds and impulse-schedule checks for finite-time stability.

Four regimes are covered: stabilizing impulses with and without delay, and
destabilizing impulses with and without delay. Each checker returns a
:class:`Certificate` carrying the bound, the impulse count the bound was
built from, and the pass/fail detail of every scalar condition it tested.

All formulas are written for the origin ``t0``. Schedules and the no-impulse
settling time are shifted to ``t0 = 0`` before the bounds are evaluated, which
is exact because the flow is autonomous and the conformable operators restart
at every impulse.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .calculus import Order
from .errors import ConfigurationError, DomainError

REL_SLACK = 1e-12

NO_IMPULSE = "no-impulse"
STABILIZING_DELAYED = "stabilizing-delayed"
STABILIZING_DELAY_FREE = "stabilizing-delay-free"
DESTABILIZING_DELAYED = "destabilizing-delayed"
DESTABILIZING_DELAY_FREE = "destabilizing-delay-free"
STABILIZING_REGIMES = (STABILIZING_DELAYED, STABILIZING_DELAY_FREE)
DESTABILIZING_REGIMES = (DESTABILIZING_DELAYED, DESTABILIZING_DELAY_FREE)


@dataclass(frozen=True)
class FlowConditionParams:
    """Flow inequality ``T^q V <= -c V**eta`` with initial value ``v0``."""

    c: float
    eta: float
    order: Order
    v0: float
    t0: float = 0.0

    def __post_init__(self):
        if not isinstance(self.order, Order):
            object.__setattr__(self, "order", Order(self.order))
        if not self.c > 0:
            raise ConfigurationError(f"c must be positive, got {self.c}", field="c")
        if not 0 < self.eta < 1:
            raise ConfigurationError(f"eta must lie in (0, 1), got {self.eta}", field="eta")
        if not self.v0 >= 0:
            raise ConfigurationError(f"v0 must be nonnegative, got {self.v0}", field="v0")

    @property
    def q(self):
        return self.order.q

    @property
    def alpha(self):
        return self.c * (1.0 - self.eta) / self.q


@dataclass(frozen=True)
class JumpConditionParams:
    """Jump factors ``beta_j``, their bound ``beta``, comparison ratio ``gamma`` and max delay."""

    beta_js: tuple[float, ...]
    beta: float
    gamma: float
    tau_max: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta_js", tuple(float(b) for b in self.beta_js))
        if not self.beta > 0:
            raise ConfigurationError(f"beta must be positive, got {self.beta}", field="beta")
        for j, b in enumerate(self.beta_js, start=1):
            if not 0 < b <= self.beta * (1 + REL_SLACK):
                raise ConfigurationError(f"beta_{j}={b} outside (0, beta={self.beta}]", field="beta_js")
        if self.tau_max < 0:
            raise ConfigurationError("tau_max must be nonnegative", field="tau_max")

    @classmethod
    def uniform(cls, beta_js, gamma, tau_max=0.0):
        beta_js = tuple(beta_js)
        if not beta_js:
            raise ConfigurationError("cannot infer beta from an empty list", field="beta_js")
        return cls(beta_js, max(beta_js), gamma, tau_max)

    def require_stabilizing(self):
        if not 0 < self.beta < 1:
            raise ConfigurationError(f"stabilizing regime needs beta in (0, 1), got {self.beta}", field="beta")
        if not self.beta < self.gamma < 1:
            raise ConfigurationError(
                f"stabilizing regime needs gamma in (beta, 1) = ({self.beta}, 1), got {self.gamma}",
                field="gamma",
            )

    def require_destabilizing(self):
        if not self.beta >= 1:
            raise ConfigurationError(f"destabilizing regime needs beta >= 1, got {self.beta}", field="beta")
        if not self.gamma >= self.beta:
            raise ConfigurationError(
                f"destabilizing regime needs gamma >= beta = {self.beta}, got {self.gamma}", field="gamma"
            )


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    lhs: float
    rhs: float
    relation: str = "<="


@dataclass
class Certificate:
    """Outcome of one settling-time certificate check."""

    valid: bool
    regime: str
    gamma_s0: float
    settling_bound: float
    impulse_count: int
    conditions: list[ConditionCheck] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def failed_conditions(self):
        return [c.name for c in self.conditions if not c.passed]

    def to_dict(self):
        out = asdict(self)
        out["failed_conditions"] = self.failed_conditions
        return out


def _le(lhs, rhs):
    return lhs <= rhs + REL_SLACK * max(1.0, abs(lhs), abs(rhs))


def _gt(lhs, rhs):
    return lhs > rhs - REL_SLACK * max(abs(lhs), abs(rhs))


def gamma_s0(p: FlowConditionParams) -> float:
    """Settling time without impulses: ``t0 + (v0**(1-eta) / alpha)**(1/q)``."""
    if p.v0 == 0:
        return p.t0
    return p.t0 + (p.v0 ** (1.0 - p.eta) / p.alpha) ** (1.0 / p.q)


def beta_from_linear_gain(gain: float, eta: float, v_homogeneity: float = 2.0) -> float:
    """Jump factor ``beta_j`` produced by the scalar jump ``S -> gain * S``.

    For ``V`` homogeneous of degree ``k`` the jump multiplies ``V`` by
    ``gain**k``, and matching ``beta_j**(1/(1-eta))`` gives
    ``beta_j = gain**(k (1 - eta))``.
    """
    if not gain > 0:
        raise DomainError(f"gain must be positive (pass |gain| for sign-flipping jumps), got {gain}")
    if not 0 < eta < 1:
        raise DomainError(f"eta must lie in (0, 1), got {eta}")
    if not v_homogeneity > 0:
        raise DomainError("homogeneity degree must be positive")
    return gain ** (v_homogeneity * (1.0 - eta))


def _params_dict(p, j, gamma_value, extra=None):
    d = {
        "q": p.q, "c": p.c, "eta": p.eta, "alpha": p.alpha, "v0": p.v0, "t0": p.t0,
        "beta": j.beta if j is not None else None,
        "gamma": gamma_value,
        "tau": j.tau_max if j is not None else None,
    }
    if extra:
        d.update(extra)
    return d


def _relative(p, impulse_times):
    times = [float(t) - p.t0 for t in impulse_times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigurationError("impulse times must increase strictly", field="times")
    return times


def _trivial(p, j, regime_note):
    return Certificate(True, NO_IMPULSE, p.t0, p.t0, 0, notes=[regime_note],
                       params=_params_dict(p, j, j.gamma if j else None))


def certify_no_impulse(p: FlowConditionParams) -> Certificate:
    g = gamma_s0(p)
    return Certificate(True, NO_IMPULSE, g, g, 0, params=_params_dict(p, None, None))


def certify_stabilizing_delayed(p: FlowConditionParams, j: JumpConditionParams,
                                impulse_times: Sequence[float],
                                expected_count: int | None = None) -> Certificate:
    """Stabilizing delayed impulses.

    Counts the ``N`` impulses before the no-impulse settling time and checks

    * ``t_N <= (gamma^N (1 - beta/gamma)/(1 - beta) G^q - beta/(1 - beta) tau^q)^(1/q)``
    * ``gamma^N (1 - beta/gamma) G^q - beta tau^q > 0``

    giving the bound ``(gamma^N)^(1/q) G``. ``expected_count`` lets a caller
    assert how many impulses it intends to fall before ``G``; a mismatch is
    reported as the failed condition ``impulse-count-premise``.
    """
    j.require_stabilizing()
    if p.v0 == 0:
        return _trivial(p, j, "zero initial Lyapunov value")
    times = _relative(p, impulse_times)
    g_abs = gamma_s0(p)
    g = g_abs - p.t0
    q, beta, gamma, tau = p.q, j.beta, j.gamma, j.tau_max
    n = sum(1 for t in times if t < g)
    params = _params_dict(p, j, gamma, {"N": n})
    if n == 0:
        note = "no impulse before the no-impulse settling time"
        return Certificate(True, NO_IMPULSE, g_abs, g_abs, 0, notes=[note], params=params)

    gq = g**q
    core = gamma**n * (1.0 - beta / gamma)
    positivity = core * gq - beta * tau**q
    inner = core / (1.0 - beta) * gq - beta / (1.0 - beta) * tau**q
    t_limit = inner ** (1.0 / q) if inner > 0 else float("nan")
    t_n = times[n - 1]
    conditions = [
        ConditionCheck("last-impulse-instant", inner > 0 and _le(t_n, t_limit), t_n, t_limit, "<="),
        ConditionCheck("gamma-positivity", _gt(positivity, 0.0), positivity, 0.0, ">"),
    ]
    if expected_count is not None:
        conditions.append(ConditionCheck("impulse-count-premise", expected_count == n,
                                         float(n), float(expected_count), "=="))
    bound = p.t0 + (gamma**n) ** (1.0 / q) * g
    cert = Certificate(all(c.passed for c in conditions), STABILIZING_DELAYED, g_abs, bound, n,
                       conditions, params=params)
    return cert


def certify_stabilizing_delay_free(p: FlowConditionParams, j: JumpConditionParams,
                                   impulse_times: Sequence[float]) -> Certificate:
    """Stabilizing impulses without delay.

    Finite-time stability holds for any such schedule with bound ``G``. If in
    addition ``t_N <= (gamma^N (1 - beta/gamma)/(1 - beta))^(1/q) G``, the
    sharper bound ``(gamma^N)^(1/q) G`` applies.
    """
    j.require_stabilizing()
    if p.v0 == 0:
        return _trivial(p, j, "zero initial Lyapunov value")
    times = _relative(p, impulse_times)
    g_abs = gamma_s0(p)
    g = g_abs - p.t0
    q, beta, gamma = p.q, j.beta, j.gamma
    n = sum(1 for t in times if t < g)
    params = _params_dict(p, j, gamma, {"N": n, "tau": 0.0})
    if n == 0:
        return Certificate(True, STABILIZING_DELAY_FREE, g_abs, g_abs, 0,
                           notes=["no impulse before the no-impulse settling time"], params=params)
    t_limit = (gamma**n * (1.0 - beta / gamma) / (1.0 - beta)) ** (1.0 / q) * g
    t_n = times[n - 1]
    check = ConditionCheck("last-impulse-instant", _le(t_n, t_limit), t_n, t_limit, "<=")
    if check.passed:
        bound = p.t0 + (gamma**n) ** (1.0 / q) * g
        return Certificate(True, STABILIZING_DELAY_FREE, g_abs, bound, n, [check], params=params)
    note = "schedule-specific bound unavailable"
    return Certificate(True, STABILIZING_DELAY_FREE, g_abs, g_abs, n, [], notes=[note],
                       params=dict(params, schedule_check=asdict(check)))


def _first_crossing(times, ratio, q, g):
    """Least ``j >= 1`` with ``t_j >= (ratio**(j-1))**(1/q) g``; exhaustion counts as +inf."""
    for idx, t in enumerate(times, start=1):
        if t >= (ratio ** (idx - 1)) ** (1.0 / q) * g:
            return idx
    return len(times) + 1


def certify_destabilizing_delayed(p: FlowConditionParams, j: JumpConditionParams,
                                  impulse_times: Sequence[float]) -> Certificate:
    """Destabilizing delayed impulses.

    Requires ``gamma >= beta + beta tau^q / G^q``. ``N0`` is the first index
    whose impulse arrives no earlier than ``(gamma^(N0-1))^(1/q) G``, and the
    bound is that threshold.
    """
    j.require_destabilizing()
    if p.v0 == 0:
        return _trivial(p, j, "zero initial Lyapunov value")
    times = _relative(p, impulse_times)
    g_abs = gamma_s0(p)
    g = g_abs - p.t0
    q, beta, gamma, tau = p.q, j.beta, j.gamma, j.tau_max
    n0 = _first_crossing(times, gamma, q, g)
    required = beta + beta * tau**q / g**q
    check = ConditionCheck("gamma-vs-beta-tau", _le(required, gamma), gamma, required, ">=")
    bound = p.t0 + (gamma ** (n0 - 1)) ** (1.0 / q) * g
    notes = []
    if n0 == len(times) + 1 and times:
        notes.append("schedule exhausted before threshold; later impulses assumed absent")
    return Certificate(check.passed, DESTABILIZING_DELAYED, g_abs, bound, n0, [check], notes,
                       params=_params_dict(p, j, gamma, {"N0": n0}))


def certify_destabilizing_delay_free(p: FlowConditionParams, j: JumpConditionParams,
                                     impulse_times: Sequence[float]) -> Certificate:
    """Destabilizing impulses without delay: thresholds use ``beta`` in place of ``gamma``."""
    if not j.beta >= 1:
        raise ConfigurationError(f"destabilizing regime needs beta >= 1, got {j.beta}", field="beta")
    if p.v0 == 0:
        return _trivial(p, j, "zero initial Lyapunov value")
    times = _relative(p, impulse_times)
    g_abs = gamma_s0(p)
    g = g_abs - p.t0
    n0 = _first_crossing(times, j.beta, p.q, g)
    bound = p.t0 + (j.beta ** (n0 - 1)) ** (1.0 / p.q) * g
    notes = []
    if n0 == len(times) + 1 and times:
        notes.append("schedule exhausted before threshold; later impulses assumed absent")
    return Certificate(True, DESTABILIZING_DELAY_FREE, g_abs, bound, n0, [], notes,
                       params=_params_dict(p, j, j.beta, {"N0": n0, "tau": 0.0}))


def certify(p: FlowConditionParams, j: JumpConditionParams | None, impulse_times: Sequence[float],
            regime: str, delay_free: bool = False, expected_count: int | None = None) -> Certificate:
    """Dispatch on ``regime`` in {"none", "stabilizing", "destabilizing"}.

    ``expected_count`` is forwarded to the stabilizing delayed check only.
    """
    if regime in ("none", NO_IMPULSE) or j is None:
        return certify_no_impulse(p)
    if regime == "stabilizing":
        fn = certify_stabilizing_delay_free if delay_free else certify_stabilizing_delayed
    elif regime == "destabilizing":
        fn = certify_destabilizing_delay_free if delay_free else certify_destabilizing_delayed
    else:
        raise ConfigurationError(f"unknown certificate regime {regime!r}", field="regime")
    if fn is certify_stabilizing_delayed:
        return fn(p, j, impulse_times, expected_count)
    return fn(p, j, impulse_times)


def optimal_gamma(p: FlowConditionParams, j: JumpConditionParams, impulse_times: Sequence[float],
                  regime: str, delay_free: bool = False, n_grid: int = 2000):
    """Grid-search ``gamma`` for the smallest valid settling bound.

    Stabilizing regimes search ``(beta, 1)``; destabilizing ones search
    ``[beta, 4 beta]``. Returns ``(gamma, certificate)`` or ``(None, None)``
    when no grid point yields a valid schedule-specific certificate.
    """
    if regime == "stabilizing":
        grid = np.linspace(j.beta, 1.0, n_grid + 2)[1:-1]
    elif regime == "destabilizing":
        grid = np.linspace(j.beta, 4.0 * j.beta, n_grid)
    else:
        raise ConfigurationError(f"unknown certificate regime {regime!r}", field="regime")
    best = (None, None)
    for gamma in grid:
        trial = JumpConditionParams(j.beta_js, j.beta, float(gamma), j.tau_max)
        cert = certify(p, trial, impulse_times, regime, delay_free)
        if not cert.valid or "schedule-specific bound unavailable" in cert.notes:
            continue
        if best[1] is None or cert.settling_bound < best[1].settling_bound:
            best = (float(gamma), cert)
    return best
