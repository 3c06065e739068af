"""Runtime checks of Lyapunov inequalities along simulated trajectories."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .certificates import JumpConditionParams
from .errors import ConfigurationError
from .simulator import Trajectory

FLOW_RTOL = 1e-7
JUMP_RTOL = 1e-9


@dataclass(frozen=True)
class LyapunovSpec:
    """Positive-definite ``v`` with flow parameters ``c`` and ``eta``."""

    v: Callable[[np.ndarray], np.ndarray]
    eta: float
    c: float
    spot_checks: int = 64

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigurationError("c must be positive", field="c")
        if not 0 < self.eta < 1:
            raise ConfigurationError("eta must lie in (0, 1)", field="eta")

    def check_positive_definite(self, dim, seed=0):
        """Spot-check ``v(0) = 0`` and ``v(s) > 0`` on random nonzero states."""
        if self.values(np.zeros((1, dim)))[0] != 0:
            return False
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(self.spot_checks, dim)) * rng.uniform(1e-3, 10, size=(self.spot_checks, 1))
        return bool(np.all(self.values(pts) > 0))

    def values(self, states):
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return np.asarray([self.v(s) for s in states], dtype=float)

    @classmethod
    def quadratic(cls, eta, c, scale=1.0):
        """``V(s) = scale * |s|^2``."""
        return cls(lambda s, k=scale: k * float(np.dot(s, s)), eta, c)


@dataclass(frozen=True)
class FlowViolation:
    t: float
    lhs: float
    rhs: float


@dataclass(frozen=True)
class JumpViolation:
    t: float
    v_post: float
    allowed: float


@dataclass
class MonitorReport:
    flow_violations: list[FlowViolation] = field(default_factory=list)
    jump_violations: list[JumpViolation] = field(default_factory=list)
    empirical_settling: float | None = None
    max_envelope_slack: float = 0.0
    eps: float | None = None
    grid_points: int = 0

    @property
    def consistent(self):
        return not self.flow_violations and not self.jump_violations

    def merge(self, other: "MonitorReport"):
        return MonitorReport(
            self.flow_violations + other.flow_violations,
            self.jump_violations + other.jump_violations,
            self.empirical_settling if other.empirical_settling is None else other.empirical_settling,
            max(self.max_envelope_slack, other.max_envelope_slack),
            other.eps if other.eps is not None else self.eps,
            self.grid_points + other.grid_points,
        )

    def summary(self):
        return {
            "flow_violations": len(self.flow_violations),
            "jump_violations": len(self.jump_violations),
            "empirical_settling": self.empirical_settling,
            "max_envelope_slack": self.max_envelope_slack,
            "eps": self.eps,
        }


def check_flow_envelope(traj: Trajectory, spec: LyapunovSpec, grid_step: float | None = None,
                        rtol: float = FLOW_RTOL) -> MonitorReport:
    """Verify ``V^(1-eta)(t) <= V^(1-eta)(t_seg) - alpha (t - t_seg)^q`` on every segment.

    Once the right-hand side is negative, ``V`` must be zero, so the
    comparison is made against its positive part. ``grid_step`` defaults to a
    thousandth of each segment's length. ``max_envelope_slack`` is the largest
    observed value of ``lhs - rhs`` (nonpositive when the envelope holds).
    """
    q = traj.order.q
    alpha = spec.c * (1.0 - spec.eta) / q
    expo = 1.0 - spec.eta
    report = MonitorReport()
    report.max_envelope_slack = -np.inf
    for seg in traj.segments:
        length = seg.t_right - seg.t_left
        if length <= 0:
            continue
        step = grid_step if grid_step is not None else 1e-3 * length
        n = max(int(np.ceil(length / step)), 1)
        ts = np.linspace(seg.t_left, seg.t_right, n + 1)[:-1]
        states = seg.at(ts)
        if traj.output is not None:
            states = states @ traj.output.T
        w = spec.values(states) ** expo
        w0 = w[0]
        rhs = np.maximum(w0 - alpha * (ts - seg.t_left) ** q, 0.0)
        slack = w - rhs
        tol = rtol * (1.0 + abs(w0))
        report.max_envelope_slack = max(report.max_envelope_slack, float(slack.max()))
        for k in np.flatnonzero(slack > tol):
            report.flow_violations.append(FlowViolation(float(ts[k]), float(w[k]), float(rhs[k])))
        report.grid_points += ts.size
    if report.max_envelope_slack == -np.inf:
        report.max_envelope_slack = 0.0
    return report


def check_jump_condition(traj: Trajectory, spec: LyapunovSpec, j: JumpConditionParams,
                         rtol: float = JUMP_RTOL) -> MonitorReport:
    """Verify ``V(post) <= beta_j^(1/(1-eta)) V(delayed)`` at every recorded jump."""
    jumps = traj.jump_records()
    if len(jumps) > len(j.beta_js):
        raise ConfigurationError(
            f"{len(jumps)} jumps but only {len(j.beta_js)} jump factors", field="beta_js"
        )
    report = MonitorReport()
    for rec, beta_j in zip(jumps, j.beta_js):
        v_post = float(spec.v(rec.post))
        allowed = beta_j ** (1.0 / (1.0 - spec.eta)) * float(spec.v(rec.delayed))
        if v_post > allowed + rtol * max(abs(allowed), 1e-300):
            report.jump_violations.append(JumpViolation(rec.t, v_post, allowed))
    return report


def empirical_settling_time(traj: Trajectory, eps: float, grid_step: float | None = None,
                            refine: bool = True) -> float | None:
    """Earliest grid time after which the state norm stays at or below ``eps``.

    The grid defaults to 20000 intervals over the horizon and always contains
    the impulse instants. With ``refine`` the crossing is bisected on the
    dense output between the last violating grid point and the next one.
    """
    if eps <= 0:
        raise ConfigurationError("eps must be positive", field="eps")
    t0, t1 = traj.t0, traj.horizon
    step = grid_step if grid_step is not None else (t1 - t0) / 20000
    ts = np.union1d(np.linspace(t0, t1, max(int(np.ceil((t1 - t0) / step)), 1) + 1),
                    [r.t for r in traj.jumps if r.t <= t1])
    norms = np.linalg.norm(traj.sample_grid(ts), axis=1)
    above = np.flatnonzero(norms > eps)
    if above.size == 0:
        return float(t0)
    last = above[-1]
    if last == ts.size - 1:
        return None
    lo, hi = ts[last], ts[last + 1]
    if not refine:
        return float(hi)
    # stay inside one continuity interval for the bisection
    if any(lo < r.t <= hi for r in traj.jumps):
        return float(hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(traj.sample(mid)) > eps:
            lo = mid
        else:
            hi = mid
    return float(hi)


def monitor(traj: Trajectory, spec: LyapunovSpec, j: JumpConditionParams | None = None,
            eps: float = 1e-6, grid_step: float | None = None) -> MonitorReport:
    """Flow envelope, jump condition and empirical settling time in one report."""
    report = check_flow_envelope(traj, spec, grid_step)
    if j is not None and traj.jumps:
        report = report.merge(check_jump_condition(traj, spec, j))
    report.empirical_settling = empirical_settling_time(traj, eps)
    report.eps = eps
    return report
