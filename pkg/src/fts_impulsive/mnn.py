"""Drive-response memristive networks with delayed impulses and a finite-time controller.

The drive network is ``T^q x_r = -a_r x_r + sum_s b_rs(x_r) f_s(x_s) + I_r`` where
each weight switches between an upper-branch value (``|x_r| <= Theta_r``) and a
lower-branch value. The response network has the same form plus the control
``u_r = -lambda_r e_r - zeta_r sgn(e_r) - vartheta_r |e_r|^rho sgn(e_r)`` acting
on the error ``e = y - x``. Impulses scale both networks by ``mu_j`` using the
state delayed by ``tau_j``.

The simulated system is the concrete switched selection of the associated
differential inclusion. The discontinuous ``zeta sgn(e)`` term is handled with
sliding modes: when an error component reaches zero and the remaining drift
on that component is dominated by ``zeta_r``, the response neuron is locked to
the drive neuron (the equivalent control of the Filippov solution) until the
drift exceeds ``zeta_r`` again.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import certificates as cert
from .calculus import Order
from .errors import ConfigurationError
from .monitor import LyapunovSpec
from .simulator import (
    DEFAULT_DEADBAND, SIGN_DEADBAND, ImpulseSchedule, Trajectory, VectorField, sgn, simulate, spow,
)


@dataclass(frozen=True)
class Activation:
    """Bounded Lipschitz activation ``scale * kind(z)``."""

    kind: str
    scale: float = 1.0

    _FUNCS = {"tanh": np.tanh, "sin": np.sin}

    def __post_init__(self):
        if self.kind not in self._FUNCS:
            raise ConfigurationError(f"unknown activation {self.kind!r}", field="activations")

    def __call__(self, z):
        return self.scale * self._FUNCS[self.kind](z)

    @property
    def lipschitz(self):
        return abs(self.scale)

    @property
    def bound(self):
        return abs(self.scale)


@dataclass(frozen=True)
class MnnParams:
    """Network weights, thresholds, activations and inputs."""

    a: np.ndarray
    b_hi: np.ndarray
    b_lo: np.ndarray
    theta: np.ndarray
    activations: tuple[Activation, ...]
    external_input: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        n = a.size
        b_hi = np.asarray(self.b_hi, dtype=float).reshape(n, n)
        b_lo = np.asarray(self.b_lo, dtype=float).reshape(n, n)
        theta = np.asarray(self.theta, dtype=float).reshape(n)
        inp = np.zeros(n) if self.external_input is None else np.asarray(self.external_input, float).reshape(n)
        acts = tuple(a_ if isinstance(a_, Activation) else Activation(**a_) for a_ in self.activations)
        if len(acts) != n:
            raise ConfigurationError(f"{len(acts)} activations for {n} neurons", field="activations")
        if np.any(a <= 0):
            raise ConfigurationError("self-feedback weights a_r must be positive", field="a")
        if np.any(theta <= 0):
            raise ConfigurationError("switching thresholds must be positive", field="theta")
        if np.any(b_hi == b_lo):
            raise ConfigurationError("switched weights need b_hi != b_lo everywhere", field="b_hi")
        for name, value in (("a", a), ("b_hi", b_hi), ("b_lo", b_lo), ("theta", theta),
                            ("external_input", inp), ("activations", acts)):
            object.__setattr__(self, name, value)

    @property
    def n(self):
        return self.a.size

    @property
    def lipschitz(self):
        return np.array([f.lipschitz for f in self.activations])

    @property
    def bounds(self):
        return np.array([f.bound for f in self.activations])

    @property
    def b_hat(self):
        return np.maximum(self.b_hi, self.b_lo)

    @property
    def b_check(self):
        return np.minimum(self.b_hi, self.b_lo)

    @property
    def b_star_star(self):
        return 0.5 * (self.b_hat + self.b_check)

    @property
    def b_star(self):
        return 0.5 * (self.b_hat - self.b_check)

    def activate(self, x):
        return np.array([f(v) for f, v in zip(self.activations, x)])

    def check_assumption(self, n_samples=2000, seed=0):
        """Sample the Lipschitz and boundedness bounds of every activation."""
        rng = np.random.default_rng(seed)
        z1 = rng.uniform(-50, 50, n_samples)
        z2 = z1 + rng.normal(scale=rng.uniform(1e-3, 5), size=n_samples)
        for f in self.activations:
            if np.any(np.abs(f(z1) - f(z2)) > f.lipschitz * np.abs(z1 - z2) * (1 + 1e-12)):
                return False
            if np.any(np.abs(f(z1)) > f.bound * (1 + 1e-12)):
                return False
        return True


@dataclass(frozen=True)
class ControllerParams:
    lam: np.ndarray
    zeta: np.ndarray
    vartheta: np.ndarray
    rho: float

    def __post_init__(self):
        for name in ("lam", "zeta", "vartheta"):
            value = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if np.any(value <= 0):
                raise ConfigurationError(f"controller gains {name} must be positive", field=name)
            object.__setattr__(self, name, value)
        if not 0 < self.rho < 1:
            raise ConfigurationError(f"rho must lie in (0, 1), got {self.rho}", field="rho")

    @property
    def eta_hat(self):
        return (1.0 + self.rho) / 2.0

    @property
    def c_hat(self):
        return 2.0 ** ((1.0 + self.rho) / 2.0) * float(np.min(self.vartheta))


@dataclass(frozen=True)
class SyncCertificateInputs:
    mu_js: tuple[float, ...]
    tau_max: float
    impulse_times: tuple[float, ...]
    e0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu_js", tuple(float(m) for m in self.mu_js))
        object.__setattr__(self, "impulse_times", tuple(float(t) for t in self.impulse_times))
        object.__setattr__(self, "e0", np.asarray(self.e0, dtype=float).reshape(-1))
        if len(self.mu_js) != len(self.impulse_times):
            raise ConfigurationError("one impulse intensity per impulse instant is required", field="gains")
        if any(m == 0 for m in self.mu_js):
            raise ConfigurationError("impulse intensity must be nonzero", field="gains")

    def beta_js(self, rho):
        return tuple(abs(m) ** (1.0 - rho) for m in self.mu_js)

    def v0(self):
        return 0.5 * float(self.e0 @ self.e0)

    def flow_params(self, cp: ControllerParams, order) -> cert.FlowConditionParams:
        return cert.FlowConditionParams(cp.c_hat, cp.eta_hat, order, self.v0(), 0.0)


def switched_weight(b_hi_rs, b_lo_rs, theta_r, state_r):
    """Upper-branch weight when ``|state_r| <= theta_r`` (boundary included), else lower."""
    return np.where(np.abs(state_r) <= theta_r, b_hi_rs, b_lo_rs)


def weights(p: MnnParams, state):
    """Full switched weight matrix; row ``r`` switches on ``state[r]``."""
    upper = np.abs(np.asarray(state, dtype=float)) <= p.theta
    return np.where(upper[:, None], p.b_hi, p.b_lo)


def drive_rhs(x, p: MnnParams):
    x = np.asarray(x, dtype=float)
    fx = p.activate(x)
    if not np.all(np.isfinite(fx)):
        raise ConfigurationError("activation produced non-finite output", field="activations")
    return -p.a * x + weights(p, x) @ fx + p.external_input


def controller(e, cp: ControllerParams):
    e = np.asarray(e, dtype=float)
    s = sgn(e, SIGN_DEADBAND)
    return -cp.lam * e - cp.zeta * s - cp.vartheta * np.abs(e) ** cp.rho * s


def check_H1(p: MnnParams, cp: ControllerParams):
    """Per-neuron margins of the quadratic-decay condition (all must be >= 0)."""
    s_plus = np.abs(p.b_hi + p.b_lo) + np.abs(p.b_hi - p.b_lo)
    L = p.lipschitz
    outgoing = (s_plus * L[None, :]).sum(axis=1)
    incoming = (s_plus.T * L[:, None]).sum(axis=1)
    return 2.0 * (p.a + cp.lam) - 0.5 * (outgoing + incoming)


def check_H2(p: MnnParams, cp: ControllerParams):
    """Per-neuron margins ``zeta_r - sum_s |b_hi - b_lo|_rs M_s`` (all must be >= 0)."""
    return cp.zeta - (np.abs(p.b_hi - p.b_lo) * p.bounds[None, :]).sum(axis=1)


def certify_sync(p: MnnParams, cp: ControllerParams, s: SyncCertificateInputs, order,
                 regime: str, delay_free: bool = False, gamma_choice: float | None = None):
    """Settling-time certificate for the synchronization error."""
    order = order if isinstance(order, Order) else Order(order)
    flow = s.flow_params(cp, order)
    failed = []
    h1, h2 = check_H1(p, cp), check_H2(p, cp)
    conditions = []
    for name, margins in (("H1", h1), ("H2", h2)):
        for r, m in enumerate(margins, start=1):
            ok = bool(m >= 0)
            conditions.append(cert.ConditionCheck(f"{name}[{r}]", ok, float(m), 0.0, ">="))
            if not ok:
                failed.append(f"{name}[{r}]")
    if delay_free and s.tau_max != 0:
        raise ConfigurationError("delay-free certificate requested with nonzero delays", field="delays")
    if regime == "none" or not s.mu_js:
        result = cert.certify_no_impulse(flow)
    else:
        betas = s.beta_js(cp.rho)
        if gamma_choice is None:
            raise ConfigurationError("gamma must be given for impulsive regimes", field="gamma")
        jp = cert.JumpConditionParams.uniform(betas, gamma_choice, s.tau_max)
        result = cert.certify(flow, jp, s.impulse_times, regime, delay_free)
    result.conditions = conditions + result.conditions
    result.valid = result.valid and not failed
    result.params.update({"c_hat": cp.c_hat, "eta_hat": cp.eta_hat, "rho": cp.rho})
    return result


class SyncField(VectorField):
    """Coupled drive/response field on ``z = (x, y)`` with sliding-mode bookkeeping.

    The sign in the controller is frozen over each accepted step (mode
    locking) so the field is smooth inside a step and the guard on ``e_r``
    locates every crossing. At a crossing the response neuron is snapped onto
    the drive neuron; it stays locked there while ``|drift_r| <= zeta_r``.

    Mutable: modes are run state, so build one instance per simulation.
    """

    def __init__(self, p: MnnParams, cp: ControllerParams, sync_deadband: float = DEFAULT_DEADBAND):
        self.p, self.cp = p, cp
        self.n = p.n
        self.sync_deadband = sync_deadband
        self.sliding = np.zeros(self.n, dtype=bool)
        self.sign = np.zeros(self.n)
        self.mode_changes = 0
        super().__init__(2 * self.n, self._rhs, zero_fixed=False)

    def _split(self, z):
        z = np.asarray(z, dtype=float)
        return z[: self.n], z[self.n:]

    def _rhs(self, z):
        x, y = self._split(z)
        e = y - x
        dx = drive_rhs(x, self.p)
        ctrl = -self.cp.lam * e - (self.cp.zeta + self.cp.vartheta * np.abs(e) ** self.cp.rho) * self.sign
        dy = drive_rhs(y, self.p) + ctrl
        if self.sliding.any():
            dy = np.where(self.sliding, dx, dy)
        return np.concatenate([dx, dy])

    def drift(self, z):
        """Error drift of each component without the controller, evaluated as if ``e_r = 0``."""
        x, y = self._split(z)
        fx, fy = self.p.activate(x), self.p.activate(y)
        return weights(self.p, x) @ (fy - fx)

    def _lock(self, z, mask):
        z = np.array(z, dtype=float)
        z[self.n:][mask] = z[: self.n][mask]
        return z

    def _refresh(self, z):
        """Recompute locked signs; returns True when any mode changed."""
        x, y = self._split(z)
        e = y - x
        drift = self.drift(z)
        at_zero = (e == 0) & ~self.sliding
        enter = at_zero & (np.abs(drift) <= self.cp.zeta)
        if enter.any():
            self.sliding |= enter
            self.mode_changes += int(enter.sum())
        # a component leaving zero moves with its drift
        sign = np.where(e != 0, np.sign(e), np.sign(drift))
        sign = np.where(self.sliding, 0.0, sign)
        changed = bool(enter.any()) or not np.array_equal(sign, self.sign)
        self.sign = sign
        return changed

    def guards(self, z):
        x, y = self._split(z)
        g = y - x
        if self.sliding.any():
            margin = self.cp.zeta - np.abs(self.drift(z))
            g = np.where(self.sliding, margin, g)
        return g

    def on_event(self, z, index):
        if self.sliding[index]:
            self.sliding[index] = False
            self.mode_changes += 1
            z = np.array(z, dtype=float)
        else:
            mask = np.zeros(self.n, dtype=bool)
            mask[index] = True
            z = self._lock(z, mask)
        self._refresh(z)
        return z

    def after_step(self, z):
        x, y = self._split(z)
        out = z
        if not self.sliding.all() and np.linalg.norm(y - x) <= self.sync_deadband:
            self.mode_changes += int((~self.sliding).sum())
            self.sliding[:] = True
        if self.sliding.any() and not np.array_equal(x[self.sliding], y[self.sliding]):
            out = self._lock(z, self.sliding)
        if self._refresh(out) and out is z:
            out = np.array(z, dtype=float)
        return out

    def on_segment_start(self, z):
        self.sliding[:] = False
        self._refresh(z)
        return z


@dataclass
class SyncResult:
    drive: Trajectory
    response: Trajectory
    error: Trajectory
    combined: Trajectory
    mode_changes: int = 0


def sync_schedule(s: SyncCertificateInputs) -> ImpulseSchedule:
    delays = s.tau_max if np.ndim(s.tau_max) == 0 else s.tau_max
    return ImpulseSchedule.linear(s.impulse_times, delays, s.mu_js)


def simulate_sync(p: MnnParams, cp: ControllerParams, schedule: ImpulseSchedule, order, x0, y0,
                  horizon: float, tol: float = 1e-10, sync_deadband: float = DEFAULT_DEADBAND) -> SyncResult:
    """Co-simulate drive and response; one shared schedule hits both networks."""
    n = p.n
    if cp.lam.size != n or cp.zeta.size != n or cp.vartheta.size != n:
        raise ConfigurationError("controller gain vectors must match the network size", field="controller")
    field_ = SyncField(p, cp, sync_deadband)
    z0 = np.concatenate([np.asarray(x0, float).reshape(n), np.asarray(y0, float).reshape(n)])
    traj = simulate(field_, schedule, order, z0, horizon, tol=tol, zero_deadband=None)
    eye = np.eye(n)
    zero = np.zeros((n, n))
    drive = traj.project(np.hstack([eye, zero]))
    response = traj.project(np.hstack([zero, eye]))
    error = traj.project(np.hstack([-eye, eye]))
    return SyncResult(drive, response, error, traj, field_.mode_changes)


def error_lyapunov(cp: ControllerParams) -> LyapunovSpec:
    """``V(e) = |e|^2 / 2`` with the controller's decay constants."""
    return LyapunovSpec.quadratic(cp.eta_hat, cp.c_hat, scale=0.5)
