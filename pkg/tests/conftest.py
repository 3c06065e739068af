import numpy as np
import pytest

from fts_impulsive import mnn
from fts_impulsive.monitor import LyapunovSpec
from fts_impulsive.simulator import ImpulseSchedule, VectorField, simulate, sqrt_clamped

Q1 = 0.98
S0 = 0.5
SPARSE = [0.2, 0.4, 4.4]
DENSE = [0.1, 0.26, 0.48, 0.7, 4.4]
DESTAB = [1.5, 2.0, 2.8, 15.5]


def sqrt_field():
    return VectorField(1, lambda s: -sqrt_clamped(s) / 3.0, zero_crossings=True)


def closed_form(t, q=Q1, s0=S0):
    """Exact solution of the no-impulse scalar system."""
    t = np.asarray(t, dtype=float)
    return np.maximum(np.sqrt(s0) - t**q / (6.0 * q), 0.0) ** 2


def scalar_run(times=(), tau=0.0, gain=1.0, horizon=6.0, tol=1e-12):
    sched = ImpulseSchedule.linear(list(times), tau, gain) if times else ImpulseSchedule(())
    return simulate(sqrt_field(), sched, Q1, [S0], horizon, tol=tol)


def square_spec():
    return LyapunovSpec(lambda s: float(s[0] ** 2), 0.75, 2.0 / 3.0)


def network_params():
    return mnn.MnnParams(
        a=[1.7, 2.2],
        b_hi=[[1.4, -1.3], [-2.1, 2.7]],
        b_lo=[[1.5, -1.2], [-2.6, 2.3]],
        theta=[1.0, 1.0],
        activations=(mnn.Activation("tanh", 1.3), mnn.Activation("sin", 1.5)),
    )


def controller_params():
    return mnn.ControllerParams([3.5, 4.9], [0.4, 1.5], [1.1, 1.2], 0.3)


X0 = np.array([2.5, -3.9])
Y0 = np.array([-4.7, 9.8])


@pytest.fixture(scope="session")
def scalar_runs():
    """Example scalar scenarios, simulated once per session."""
    return {
        "none": scalar_run(),
        "sparse": scalar_run(SPARSE, 0.05, 0.71),
        "dense": scalar_run(DENSE, 0.05, 0.71),
        "destab045": scalar_run(DESTAB, 0.45, 1.72, horizon=17.0),
        "destab01": scalar_run(DESTAB, 0.1, 1.72, horizon=17.0),
    }


@pytest.fixture(scope="session")
def network_runs():
    p, cp = network_params(), controller_params()

    def run(times, tau, mu, horizon):
        sched = ImpulseSchedule.linear(times, tau, mu) if times else ImpulseSchedule(())
        return mnn.simulate_sync(p, cp, sched, 0.93, X0, Y0, horizon, tol=1e-12)

    return {
        "none": run([], 0.0, 1.0, 12.0),
        "stab001": run([0.1, 0.3, 9.8], 0.01, 0.4, 12.0),
        "stab008": run([0.1, 0.3, 9.8], 0.08, 0.4, 12.0),
        "destab0005": run([0.12, 0.35, 19.0], 0.005, 1.38, 21.0),
        "destab01": run([0.12, 0.35, 19.0], 0.1, 1.38, 21.0),
    }


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line per criterion and keep it for the terminal summary."""

    def emit(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
