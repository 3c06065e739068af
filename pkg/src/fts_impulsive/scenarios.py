"""Config-driven scenario runs and the built-in reference suite.

A scenario is one JSON document::

    {
      "name": "demo",
      "system": {"kind": "scalar-example", "k": 0.3333333333333333},
      "order": 0.98,
      "horizon": 6.0,
      "initial_state": [0.5],
      "impulses": {"times": [0.2, 0.4], "delays": 0.05, "gains": 0.71},
      "certificate": {"regime": "stabilizing", "gamma": 0.9}
    }

Missing sections take the defaults of :class:`ScenarioConfig`. A run writes
``timeseries.csv``, ``summary.json`` and, unless disabled, ``figure.png`` into
its output directory.
"""
from __future__ import annotations

import copy
import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import certificates as cert
from . import mnn
from .calculus import Order
from .errors import ConfigurationError, DomainError, FTSError, IntegrationError
from .monitor import LyapunovSpec, monitor
from .simulator import DEFAULT_DEADBAND, ImpulseSchedule, VectorField, simulate, spow, sqrt_clamped

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
ORDER_SLACK = 0.02
GRID_POINTS = 2000

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_CONFIG = 2
EXIT_SIMULATION = 3

SYSTEM_KINDS = ("scalar-example", "custom-polynomial", "mnn")
REGIMES = ("none", "stabilizing", "destabilizing")


def _default_impulses():
    return {"times": [], "delays": 0.0, "gains": 1.0, "tau_max": None}


def _default_certificate():
    return {"regime": "none", "gamma": None, "delay_free": False, "optimize_gamma": False,
            "expected_count": None}


def _default_monitor():
    return {"eps": 1e-6, "grid_step": None, "order_slack": ORDER_SLACK}


def _default_output():
    return {"dir": None, "plots": True, "grid_points": GRID_POINTS}


@dataclass
class ScenarioConfig:
    name: str
    system: dict
    order: float
    horizon: float
    initial_state: list | None = None
    t0: float = 0.0
    tol: float = DEFAULT_TOL
    deadband: float = DEFAULT_DEADBAND
    lyapunov: dict | None = None
    impulses: dict = field(default_factory=_default_impulses)
    certificate: dict = field(default_factory=_default_certificate)
    monitor: dict = field(default_factory=_default_monitor)
    output: dict = field(default_factory=_default_output)

    _SECTION_DEFAULTS = {
        "impulses": _default_impulses,
        "certificate": _default_certificate,
        "monitor": _default_monitor,
        "output": _default_output,
    }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise ConfigurationError("scenario document must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigurationError(f"unknown key {unknown[0]!r}", field=unknown[0])
        for key in ("name", "system", "order", "horizon"):
            if key not in doc:
                raise ConfigurationError(f"missing required key {key!r}", field=key)
        kwargs = copy.deepcopy(doc)
        for section, default in cls._SECTION_DEFAULTS.items():
            given = kwargs.get(section) or {}
            if not isinstance(given, dict):
                raise ConfigurationError(f"{section} must be an object", field=section)
            base = default()
            extra = sorted(set(given) - set(base))
            if extra:
                raise ConfigurationError(f"unknown key {extra[0]!r} in {section}", field=f"{section}.{extra[0]}")
            base.update(given)
            kwargs[section] = base
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}", field="path") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}", field="path") from exc
        return cls.from_dict(doc)

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def validate(self):
        """Structural checks that need no simulation."""
        kind = self.system.get("kind") if isinstance(self.system, dict) else None
        if kind not in SYSTEM_KINDS:
            raise ConfigurationError(f"system.kind must be one of {SYSTEM_KINDS}, got {kind!r}", field="system.kind")
        try:
            Order(self.order)
        except DomainError as exc:
            raise ConfigurationError(str(exc), field="order") from exc
        if not self.horizon > self.t0:
            raise ConfigurationError("horizon must exceed t0", field="horizon")
        if not self.tol > 0:
            raise ConfigurationError("tol must be positive", field="tol")
        if self.deadband is not None and self.deadband < 0:
            raise ConfigurationError("deadband must be nonnegative", field="deadband")
        if kind != "mnn" and not self.initial_state:
            raise ConfigurationError("initial_state is required", field="initial_state")
        if kind == "mnn" and self.lyapunov is not None:
            raise ConfigurationError("lyapunov data is derived from the controller for mnn systems",
                                     field="lyapunov")
        regime = self.certificate.get("regime")
        if regime not in REGIMES:
            raise ConfigurationError(f"certificate.regime must be one of {REGIMES}", field="certificate.regime")
        times = list(self.impulses.get("times") or [])
        if regime == "none" and times:
            raise ConfigurationError("regime 'none' requires an empty impulse schedule",
                                     field="certificate.regime")
        if not self.monitor.get("eps", 0) > 0:
            raise ConfigurationError("monitor.eps must be positive", field="monitor.eps")
        if int(self.output.get("grid_points", 0)) < 2:
            raise ConfigurationError("output.grid_points must be at least 2", field="output.grid_points")


@dataclass
class BuiltSystem:
    field: VectorField
    s0: np.ndarray | None
    spec: LyapunovSpec
    v0: float
    homogeneity: float
    params: mnn.MnnParams | None = None
    controller: mnn.ControllerParams | None = None
    x0: np.ndarray | None = None
    y0: np.ndarray | None = None


def _norm_power(scale, k):
    def v(s):
        return scale * float(np.linalg.norm(s)) ** k
    return v


def _vector(value, name, n=None):
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{name} must be numeric", field=name) from exc
    if n is not None and arr.size != n:
        raise ConfigurationError(f"{name} must have length {n}", field=name)
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} must be finite", field=name)
    return arr


def _lyapunov_params(cfg, default_c=None, default_eta=None):
    lyap = dict(cfg.lyapunov or {})
    c = lyap.get("c", default_c)
    eta = lyap.get("eta", default_eta)
    if c is None or eta is None:
        raise ConfigurationError("lyapunov.c and lyapunov.eta are required", field="lyapunov")
    k = float(lyap.get("homogeneity", 2.0))
    scale = float(lyap.get("scale", 1.0))
    if not k > 0 or not scale > 0:
        raise ConfigurationError("lyapunov homogeneity and scale must be positive", field="lyapunov")
    try:
        spec = LyapunovSpec(_norm_power(scale, k), float(eta), float(c))
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), field=f"lyapunov.{exc.field}") from exc
    return spec, k


def build_system(cfg: ScenarioConfig) -> BuiltSystem:
    kind = cfg.system["kind"]
    if kind == "scalar-example":
        k = float(cfg.system.get("k", 1.0 / 3.0))
        if not k > 0:
            raise ConfigurationError("system.k must be positive", field="system.k")
        s0 = _vector(cfg.initial_state, "initial_state", 1)
        if s0[0] < 0:
            raise ConfigurationError("scalar example is posed on S >= 0", field="initial_state")
        if np.any(np.asarray(cfg.impulses.get("gains", 1.0), dtype=float) < 0):
            raise ConfigurationError("scalar example needs nonnegative gains", field="impulses.gains")
        # dV/du = -2k V^(3/4) for V = S^2
        spec, hom = _lyapunov_params(cfg, 2.0 * k, 0.75)
        fld = VectorField(1, lambda s, k=k: -k * sqrt_clamped(s), zero_crossings=True, snap_below=cfg.deadband)
        return BuiltSystem(fld, s0, spec, float(spec.v(s0)), hom)

    if kind == "custom-polynomial":
        terms = cfg.system.get("terms")
        if not terms:
            raise ConfigurationError("system.terms must list [coefficient, power] pairs", field="system.terms")
        try:
            coefs, powers = (np.array(col, dtype=float) for col in zip(*terms))
        except (TypeError, ValueError) as exc:
            raise ConfigurationError("system.terms must list [coefficient, power] pairs",
                                     field="system.terms") from exc
        if np.any(powers <= 0):
            raise ConfigurationError("term powers must be positive", field="system.terms")
        s0 = _vector(cfg.initial_state, "initial_state")

        def rhs(s, coefs=coefs, powers=powers):
            return sum(c * spow(s, p) for c, p in zip(coefs, powers))

        spec, hom = _lyapunov_params(cfg)
        fld = VectorField(s0.size, rhs, zero_crossings=True, snap_below=cfg.deadband)
        return BuiltSystem(fld, s0, spec, float(spec.v(s0)), hom)

    net = cfg.system.get("network") or {}
    ctl = cfg.system.get("controller") or {}
    try:
        p = mnn.MnnParams(
            a=net["a"], b_hi=net["b_hi"], b_lo=net["b_lo"], theta=net["theta"],
            activations=tuple(mnn.Activation(**a) for a in net["activations"]),
            external_input=net.get("external_input"),
        )
        cp = mnn.ControllerParams(ctl["lambda"], ctl["zeta"], ctl["vartheta"], float(ctl["rho"]))
    except KeyError as exc:
        raise ConfigurationError(f"missing mnn parameter {exc.args[0]!r}", field=f"system.{exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed mnn parameters: {exc}", field="system") from exc
    n = p.n
    if cp.lam.size != n or cp.zeta.size != n or cp.vartheta.size != n:
        raise ConfigurationError("controller gain vectors must match the network size", field="system.controller")
    x0 = _vector(cfg.system.get("x0"), "system.x0", n)
    y0 = _vector(cfg.system.get("y0"), "system.y0", n)
    spec = mnn.error_lyapunov(cp)
    e0 = y0 - x0
    fld = mnn.SyncField(p, cp, cfg.deadband if cfg.deadband is not None else DEFAULT_DEADBAND)
    return BuiltSystem(fld, None, spec, float(spec.v(e0)), 2.0, p, cp, x0, y0)


def build_schedule(cfg: ScenarioConfig) -> ImpulseSchedule:
    imp = cfg.impulses
    times = list(imp.get("times") or [])
    try:
        sched = ImpulseSchedule.linear(times, imp.get("delays", 0.0), imp.get("gains", 1.0), imp.get("tau_max"))
        sched.validate(cfg.t0)
    except (ConfigurationError, DomainError) as exc:
        fld = getattr(exc, "field", None) or "times"
        raise ConfigurationError(str(exc), field=f"impulses.{fld}") from exc
    return sched


def _beta_js(built: BuiltSystem, sched: ImpulseSchedule):
    gains = [abs(ev.linear_gain) for ev in sched.events]
    if built.controller is not None:
        return [g ** (1.0 - built.controller.rho) for g in gains]
    return [cert.beta_from_linear_gain(g, built.spec.eta, built.homogeneity) for g in gains]


def certify_config(cfg: ScenarioConfig, built: BuiltSystem | None = None,
                   sched: ImpulseSchedule | None = None) -> cert.Certificate:
    """Certificate for a scenario; raises ConfigurationError on regime mismatch."""
    built = built or build_system(cfg)
    sched = sched or build_schedule(cfg)
    c = cfg.certificate
    regime = c["regime"]
    delay_free = bool(c.get("delay_free"))
    times = list(sched.times)
    if delay_free and any(t != 0 for t in sched.delays):
        raise ConfigurationError("delay_free certificate needs all delays zero", field="certificate.delay_free")
    flow = cert.FlowConditionParams(built.spec.c, built.spec.eta, cfg.order, built.v0, cfg.t0)
    betas = _beta_js(built, sched)
    if regime == "none" or not times:
        result = cert.certify_no_impulse(flow)
    else:
        gamma = c.get("gamma")
        if c.get("optimize_gamma"):
            jp0 = cert.JumpConditionParams.uniform(betas, gamma if gamma is not None else 1.0, sched.tau_max)
            gamma, found = cert.optimal_gamma(flow, jp0, times, regime, delay_free)
            if found is None:
                raise ConfigurationError("no gamma on the search grid gives a valid certificate",
                                         field="certificate.gamma")
        if gamma is None:
            raise ConfigurationError("certificate.gamma is required for impulsive regimes",
                                     field="certificate.gamma")
        try:
            jp = cert.JumpConditionParams.uniform(betas, float(gamma), sched.tau_max)
            result = cert.certify(flow, jp, times, regime, delay_free, c.get("expected_count"))
        except ConfigurationError as exc:
            raise ConfigurationError(str(exc), field=f"certificate.{exc.field or 'regime'}") from exc
    if built.controller is not None:
        checks = []
        for label, margins in (("H1", mnn.check_H1(built.params, built.controller)),
                               ("H2", mnn.check_H2(built.params, built.controller))):
            for r, m in enumerate(margins, start=1):
                checks.append(cert.ConditionCheck(f"{label}[{r}]", bool(m >= 0), float(m), 0.0, ">="))
        result.conditions = checks + result.conditions
        result.valid = result.valid and all(ch.passed for ch in checks)
        result.params.update({"c_hat": built.controller.c_hat, "eta_hat": built.controller.eta_hat,
                              "rho": built.controller.rho})
    result.params["beta_js"] = betas
    return result


@dataclass
class ScenarioResult:
    status: int
    summary: dict
    paths: dict = field(default_factory=dict)


def _grid_with_jumps(traj, n_points):
    jump_times = [r.t for r in traj.jumps]
    grid = np.linspace(traj.t0, traj.horizon, n_points)
    grid = grid[~np.isin(grid, jump_times)]
    ts, states = [], []
    pts = sorted([(t, 1) for t in grid] + [(t, 0) for t in jump_times])
    for t, kind in pts:
        if kind == 0:
            ts.extend([t, t])
            states.extend([traj.sample_pre(t), traj.sample(t)])
        else:
            ts.append(t)
            states.append(traj.sample(t))
    return np.array(ts), np.array(states)


def write_timeseries(path, t, states, v, prefix="state"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{prefix}_{i + 1}" for i in range(states.shape[1])] + ["V"])
        for ti, si, vi in zip(t, states, v):
            w.writerow(["%.17g" % ti] + ["%.17g" % x for x in si] + ["%.17g" % vi])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _summary_skeleton(cfg, certificate):
    c = certificate
    return {
        "scenario": cfg.name,
        "system": cfg.system.get("kind"),
        "gamma_s0": c.gamma_s0 if c else None,
        "settling_bound": c.settling_bound if c else None,
        "impulse_count": c.impulse_count if c else None,
        "regime": c.regime if c else cfg.certificate.get("regime"),
        "certificate_valid": c.valid if c else None,
        "conditions": [{"name": k.name, "pass": k.passed, "lhs": k.lhs, "rhs": k.rhs, "relation": k.relation}
                       for k in c.conditions] if c else [],
        "notes": list(c.notes) if c else [],
        "params": dict(c.params) if c else {},
        "empirical_settling": None,
        "eps": cfg.monitor.get("eps"),
        "monitor": {"flow_violations": None, "jump_violations": None, "max_envelope_slack": None},
        "checks": {},
        "tol": cfg.tol,
        "deadband": cfg.deadband,
        "error": None,
    }


def _prepare_dir(out_dir):
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigurationError(f"cannot write to output directory {path}: {exc.strerror}",
                                 field="output.dir") from exc
    return path


def _write_summary(path, summary):
    with open(path, "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=False)
        fh.write("\n")


def run_scenario(cfg: ScenarioConfig, out_dir=None, plots: bool | None = None) -> ScenarioResult:
    """Certify, simulate, monitor and write artifacts for one scenario.

    Exit status: 0 all checks pass, 1 a check failed, 2 configuration error,
    3 simulation failure. Configuration problems are detected before any
    integration starts.
    """
    out_dir = out_dir or cfg.output.get("dir") or os.path.join("runs", cfg.name)
    plots = cfg.output.get("plots", True) if plots is None else plots
    try:
        out = _prepare_dir(out_dir)
        built = build_system(cfg)
        sched = build_schedule(cfg)
        certificate = certify_config(cfg, built, sched)
    except ConfigurationError as exc:
        summary = _summary_skeleton(cfg, None)
        summary["error"] = {"kind": "configuration", "field": exc.field, "message": str(exc)}
        if exc.field != "output.dir":
            _write_summary(Path(out_dir) / "summary.json", summary)
        return ScenarioResult(EXIT_CONFIG, summary)

    summary = _summary_skeleton(cfg, certificate)
    paths = {"summary": str(out / "summary.json")}
    try:
        if built.controller is not None:
            res = mnn.simulate_sync(built.params, built.controller, sched, cfg.order, built.x0, built.y0,
                                    cfg.horizon, tol=cfg.tol,
                                    sync_deadband=cfg.deadband if cfg.deadband is not None else DEFAULT_DEADBAND)
            traj = res.error
            summary["mode_changes"] = res.mode_changes
        else:
            res = None
            traj = simulate(built.field, sched, cfg.order, built.s0, cfg.horizon, tol=cfg.tol, t0=cfg.t0,
                            zero_deadband=cfg.deadband)
    except (IntegrationError, FTSError) as exc:
        summary["error"] = {"kind": "simulation", "message": str(exc), "t": getattr(exc, "t", None)}
        _write_summary(out / "summary.json", summary)
        return ScenarioResult(EXIT_SIMULATION, summary, paths)

    betas = certificate.params.get("beta_js") or []
    jp = cert.JumpConditionParams.uniform(betas, max(betas), sched.tau_max) if betas else None
    eps = float(cfg.monitor["eps"])
    report = monitor(traj, built.spec, jp, eps=eps, grid_step=cfg.monitor.get("grid_step"))
    summary["empirical_settling"] = report.empirical_settling
    summary["monitor"] = {
        "flow_violations": len(report.flow_violations),
        "jump_violations": len(report.jump_violations),
        "max_envelope_slack": report.max_envelope_slack,
    }
    slack = float(cfg.monitor.get("order_slack", ORDER_SLACK))
    ordering = (report.empirical_settling is not None
                and report.empirical_settling <= certificate.settling_bound + slack)
    summary["checks"] = {
        "certificate": bool(certificate.valid),
        "monitor": bool(report.consistent),
        "settling_order": bool(ordering),
    }

    t, states = _grid_with_jumps(traj, int(cfg.output.get("grid_points", GRID_POINTS)))
    v = built.spec.values(states)
    write_timeseries(out / "timeseries.csv", t, states, v)
    paths["timeseries"] = str(out / "timeseries.csv")
    if res is not None:
        _, xs = _grid_with_jumps(res.drive, int(cfg.output.get("grid_points", GRID_POINTS)))
        _, ys = _grid_with_jumps(res.response, int(cfg.output.get("grid_points", GRID_POINTS)))
        with open(out / "sync.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            n = xs.shape[1]
            w.writerow(["t"] + [f"x_{i + 1}" for i in range(n)] + [f"y_{i + 1}" for i in range(n)])
            for row in zip(t, xs, ys):
                w.writerow(["%.17g" % row[0]] + ["%.17g" % a for a in row[1]] + ["%.17g" % a for a in row[2]])
        paths["sync"] = str(out / "sync.csv")
    if plots:
        from . import plotting

        jt = [r.t for r in traj.jumps]
        label = "e" if res is not None else "S"
        paths["figure"] = str(plotting.plot_scenario(
            out / "figure.png", t, states, v, jt, certificate.settling_bound, report.empirical_settling,
            title=cfg.name, state_label=label))
        if res is not None:
            paths["sync_figure"] = str(plotting.plot_sync(out / "sync.png", t, xs, ys, title=cfg.name))
    _write_summary(out / "summary.json", summary)
    status = EXIT_OK if all(summary["checks"].values()) else EXIT_CHECK
    return ScenarioResult(status, summary, paths)


# ---------------------------------------------------------------------------
# built-in reference suite

_EX2_NETWORK = {
    "a": [1.7, 2.2],
    "b_hi": [[1.4, -1.3], [-2.1, 2.7]],
    "b_lo": [[1.5, -1.2], [-2.6, 2.3]],
    "theta": [1.0, 1.0],
    "activations": [{"kind": "tanh", "scale": 1.3}, {"kind": "sin", "scale": 1.5}],
    "external_input": [0.0, 0.0],
}
_EX2_CONTROLLER = {"lambda": [3.5, 4.9], "zeta": [0.4, 1.5], "vartheta": [1.1, 1.2], "rho": 0.3}

T1_RECOMPUTED_NOTE = ("reference 2.946 for the stabilizing network bound; direct evaluation of "
                      "(gamma^N)^(1/q) * Gamma with gamma = 0.577, N = 2, q = 0.93 gives 2.9514, "
                      "accepted within 0.01")


def _scalar(name, times, delay, gain, horizon, regime, gamma):
    return {
        "name": name,
        "system": {"kind": "scalar-example", "k": 1.0 / 3.0},
        "order": 0.98,
        "horizon": horizon,
        "initial_state": [0.5],
        "lyapunov": {"c": 2.0 / 3.0, "eta": 0.75, "homogeneity": 2.0},
        "impulses": {"times": times, "delays": delay, "gains": gain},
        "certificate": {"regime": regime, "gamma": gamma},
        "monitor": {"eps": 1e-6},
    }


def _network(name, times, delay, gain, horizon, regime, gamma):
    return {
        "name": name,
        "system": {"kind": "mnn", "network": _EX2_NETWORK, "controller": _EX2_CONTROLLER,
                   "x0": [2.5, -3.9], "y0": [-4.7, 9.8]},
        "order": 0.93,
        "horizon": horizon,
        "impulses": {"times": times, "delays": delay, "gains": gain},
        "certificate": {"regime": regime, "gamma": gamma},
        "monitor": {"eps": 1e-4},
    }


def _ref(quantity, value, tol, note=None):
    return {"quantity": quantity, "value": value, "tol": tol, "note": note}


def builtin_scenarios():
    """``(config document, reference values)`` for the reference suite."""
    sparse, dense = [0.2, 0.4, 4.4], [0.1, 0.26, 0.48, 0.7, 4.4]
    destab = [1.5, 2.0, 2.8, 15.5]
    net_stab, net_destab = [0.1, 0.3, 9.8], [0.12, 0.35, 19.0]
    return [
        (_scalar("example1-none", [], 0.0, 1.0, 6.0, "none", None),
         [_ref("gamma_s0", 4.280, 0.001), _ref("empirical_settling", 4.280, 0.01)]),
        (_scalar("example1-stabilizing-sparse", sparse, 0.05, 0.71, 6.0, "stabilizing", 0.9),
         [_ref("settling_bound", 3.452, 0.002), _ref("impulse_count", 2, 0), _ref("beta", 0.843, 0.001)]),
        (_scalar("example1-stabilizing-dense", dense, 0.05, 0.71, 6.0, "stabilizing", 0.9),
         [_ref("settling_bound", 2.784, 0.002), _ref("impulse_count", 4, 0)]),
        (_scalar("example1-destabilizing-tau0.45", destab, 0.45, 1.72, 17.0, "destabilizing", 1.5),
         [_ref("settling_bound", 14.810, 0.005), _ref("impulse_count", 4, 0), _ref("beta", 1.311, 0.001)]),
        (_scalar("example1-destabilizing-tau0.1", destab, 0.1, 1.72, 17.0, "destabilizing", 1.5),
         [_ref("settling_bound", 14.810, 0.005)]),
        (_network("example2-none", [], 0.0, 1.0, 12.0, "none", None),
         [_ref("gamma_s0", 9.630, 0.002)]),
        (_network("example2-stabilizing-tau0.01", net_stab, 0.01, 0.4, 12.0, "stabilizing", 0.577),
         [_ref("settling_bound", 2.946, 0.01, T1_RECOMPUTED_NOTE), _ref("impulse_count", 2, 0),
          _ref("beta", 0.527, 0.001)]),
        (_network("example2-stabilizing-tau0.08", net_stab, 0.08, 0.4, 12.0, "stabilizing", 0.577),
         [_ref("settling_bound", 2.946, 0.01, T1_RECOMPUTED_NOTE)]),
        (_network("example2-destabilizing-tau0.005", net_destab, 0.005, 1.38, 21.0, "destabilizing", 1.353),
         [_ref("settling_bound", 18.446, 0.01), _ref("impulse_count", 3, 0), _ref("beta", 1.253, 0.001)]),
        (_network("example2-destabilizing-tau0.1", net_destab, 0.1, 1.38, 21.0, "destabilizing", 1.353),
         [_ref("settling_bound", 18.446, 0.01)]),
    ]


def select_builtin(only=None):
    items = builtin_scenarios()
    if not only:
        return items
    keys = [only] if isinstance(only, str) else list(only)
    chosen = [it for it in items if any(it[0]["name"].startswith(k) for k in keys)]
    if not chosen:
        raise ConfigurationError(f"no built-in scenario matches {keys}", field="only")
    return chosen


def _quantity(summary, name):
    if name == "beta":
        return summary["params"].get("beta")
    return summary.get(name)


def _run_builtin(doc, refs, out_root, plots, overrides):
    doc = copy.deepcopy(doc)
    doc.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ScenarioConfig.from_dict(doc)
    result = run_scenario(cfg, os.path.join(out_root, cfg.name), plots)
    rows = []
    for ref in refs:
        got = _quantity(result.summary, ref["quantity"])
        ok = got is not None and abs(float(got) - ref["value"]) <= ref["tol"] + 1e-12
        rows.append({"scenario": cfg.name, "quantity": ref["quantity"], "reference": ref["value"],
                     "computed": got, "tol": ref["tol"], "pass": bool(ok), "note": ref.get("note")})
    for check, ok in result.summary.get("checks", {}).items():
        rows.append({"scenario": cfg.name, "quantity": f"check:{check}", "reference": None,
                     "computed": None, "tol": None, "pass": bool(ok), "note": None})
    if result.summary.get("error"):
        rows.append({"scenario": cfg.name, "quantity": "run", "reference": None, "computed": None,
                     "tol": None, "pass": False, "note": result.summary["error"]["message"]})
    return result.status, rows, result.summary


def reproduce(out_dir="runs/reference", only=None, jobs=1, plots=True, tol=None, deadband=None):
    """Run the built-in suite; returns ``(status, rows, summaries)``."""
    items = select_builtin(only)
    _prepare_dir(out_dir)
    overrides = {"tol": tol, "deadband": deadband}
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_builtin, doc, refs, out_dir, plots, overrides) for doc, refs in items]
            results = [f.result() for f in futures]
    else:
        results = [_run_builtin(doc, refs, out_dir, plots, overrides) for doc, refs in items]
    statuses = [r[0] for r in results]
    rows = [row for r in results for row in r[1]]
    summaries = {r[2]["scenario"]: r[2] for r in results}
    if any(s in (EXIT_CONFIG, EXIT_SIMULATION) for s in statuses):
        status = max(s for s in statuses if s in (EXIT_CONFIG, EXIT_SIMULATION))
    elif any(not row["pass"] for row in rows):
        status = EXIT_CHECK
    else:
        status = EXIT_OK
    with open(Path(out_dir) / "report.json", "w") as fh:
        json.dump(_jsonable({"status": status, "rows": rows}), fh, indent=2)
    with open(Path(out_dir) / "report.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(_jsonable(rows))
    return status, rows, summaries


def format_table(rows):
    def fmt(x):
        if x is None:
            return "-"
        if isinstance(x, float):
            return f"{x:.6g}"
        return str(x)

    header = ("scenario", "quantity", "reference", "computed", "tol", "result")
    body = [(r["scenario"], r["quantity"], fmt(r["reference"]), fmt(r["computed"]), fmt(r["tol"]),
             "PASS" if r["pass"] else "FAIL") for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)) for b in body]
    notes = sorted({r["note"] for r in rows if r.get("note")})
    lines += [f"note: {n}" for n in notes]
    return "\n".join(lines)
