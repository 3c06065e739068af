import numpy as np
import pytest

from conftest import DENSE, DESTAB, Q1, S0, SPARSE, closed_form, scalar_run, sqrt_field
from fts_impulsive.calculus import make_frame
from fts_impulsive.errors import ConfigurationError, DomainError
from fts_impulsive.simulator import (
    ImpulseEvent, ImpulseSchedule, VectorField, integrate_segment, sgn, simulate, spow, sqrt_clamped,
)


def test_helpers():
    assert sgn(0.0) == 0.0 and sgn(-2.0) == -1.0
    assert sgn(1e-13, deadband=1e-12) == 0.0
    assert spow(-4.0, 0.5) == -2.0
    assert sqrt_clamped(-1e-17) == 0.0


def test_closed_form_no_impulse():
    traj = scalar_run(tol=1e-10)
    ts = np.linspace(0, 4.27, 3000)
    assert np.max(np.abs(traj.sample_grid(ts)[:, 0] - closed_form(ts))) < 1e-6


def test_zero_field_is_constant():
    fld = VectorField(2, lambda s: np.zeros(2))
    traj = simulate(fld, ImpulseSchedule(()), 0.7, [1.5, -2.0], 3.0)
    assert np.all(traj.sample_grid(np.linspace(0, 3, 20)) == np.array([1.5, -2.0]))


def test_integer_order_exponential_decay():
    fld = VectorField(1, lambda s: -s)
    traj = simulate(fld, ImpulseSchedule(()), 1.0, [1.0], 5.0)
    ts = np.linspace(0, 5, 500)
    assert np.max(np.abs(traj.sample_grid(ts)[:, 0] - np.exp(-ts))) < 1e-6


def test_integrate_segment_matches_simulate_without_impulses():
    fld = sqrt_field()
    dense = integrate_segment(fld, np.array([S0]), make_frame(0.0, Q1), 4.0, 1e-10)
    traj = simulate(fld, ImpulseSchedule(()), Q1, [S0], 4.0, tol=1e-10)
    u = np.linspace(0, dense.u_end, 50)
    assert np.array_equal(dense(u), traj.segments[0].dense(u))


def test_sampling_conventions():
    traj = scalar_run([0.2, 0.4], 0.05, 0.71, horizon=1.0)
    assert traj.sample(0.0)[0] == S0
    assert traj.sample(0.2)[0] == traj.jumps[0].post[0]
    assert traj.sample_pre(0.2)[0] == traj.jumps[0].pre[0]
    assert traj.sample(0.2)[0] == pytest.approx(0.71 * traj.sample_pre(0.15)[0], rel=1e-15)
    with pytest.raises(DomainError):
        traj.sample(1.01)
    with pytest.raises(DomainError):
        traj.sample(-0.01)


@pytest.mark.parametrize("times,tau,gain,horizon", [
    (SPARSE, 0.05, 0.71, 6.0), (DENSE, 0.05, 0.71, 6.0), (DESTAB, 0.45, 1.72, 17.0), (DESTAB, 0.1, 1.72, 17.0),
])
def test_jump_exactness(times, tau, gain, horizon):
    traj = scalar_run(times, tau, gain, horizon)
    for rec in traj.jumps:
        delayed = traj.sample_pre(rec.t - tau) if tau > 0 else traj.sample_pre(rec.t)
        assert traj.sample(rec.t)[0] == gain * delayed[0]


def test_segments_tile_the_horizon():
    traj = scalar_run(DENSE, 0.05, 0.71)
    lefts = [s.t_left for s in traj.segments]
    rights = [s.t_right for s in traj.segments]
    assert lefts[0] == 0.0 and rights[-1] == 6.0
    assert lefts[1:] == rights[:-1] == DENSE


def test_impulses_after_horizon_are_ignored():
    traj = scalar_run([0.2, 7.0], 0.05, 0.71, horizon=6.0)
    assert [r.t for r in traj.jumps] == [0.2]


@pytest.mark.parametrize("q,same", [(0.6, False), (1.0, True)])
def test_anchor_restart(q, same):
    fld = VectorField(1, lambda s: -s)
    plain = simulate(fld, ImpulseSchedule(()), q, [1.0], 2.0, tol=1e-12)
    # identity jump without delay only restarts the conformable anchor
    restarted = simulate(fld, ImpulseSchedule.linear([1.0], 0.0, 1.0), q, [1.0], 2.0, tol=1e-12)
    ts = np.linspace(1.05, 2.0, 40)
    diff = np.max(np.abs(plain.sample_grid(ts) - restarted.sample_grid(ts)))
    if same:
        assert diff < 1e-9
    else:
        assert diff > 1e-3


@pytest.mark.parametrize("times,delays", [
    ([0.2, 0.4], [0.05, 0.25]),  # t_2 - tau_2 < t_1
    ([0.2, 0.2], [0.0, 0.0]),  # not strictly increasing
    ([0.2, 0.1], [0.0, 0.0]),
    ([0.1], [0.2]),  # reaches before t0
])
def test_schedule_invariant_violations(times, delays):
    sched = ImpulseSchedule.linear(times, delays, 0.5)
    with pytest.raises(ConfigurationError):
        sched.validate(0.0)
    with pytest.raises(ConfigurationError):
        simulate(sqrt_field(), sched, Q1, [S0], 1.0)


def test_tau_max_and_negative_delay():
    with pytest.raises(ConfigurationError):
        ImpulseSchedule.linear([0.5], 0.2, 0.5, tau_max=0.1).validate()
    with pytest.raises(ConfigurationError):
        ImpulseEvent.linear(0.5, -0.1, 0.5)


def test_jump_map_must_fix_zero():
    sched = ImpulseSchedule((ImpulseEvent(0.5, 0.0, lambda s: s + 1.0),))
    with pytest.raises(ConfigurationError):
        simulate(sqrt_field(), sched, Q1, [S0], 1.0)


def test_zero_fixed_field_checked():
    with pytest.raises(ConfigurationError):
        VectorField(1, lambda s: s + 1.0)


def test_grid_refinement_convergence():
    coarse_tol = 1e-10
    ts = np.linspace(0, 6.0, 2001)
    for times in ([], SPARSE):
        a = scalar_run(times, 0.05, 0.71, tol=coarse_tol) if times else scalar_run(tol=coarse_tol)
        b = scalar_run(times, 0.05, 0.71, tol=coarse_tol / 2) if times else scalar_run(tol=coarse_tol / 2)
        assert np.max(np.abs(a.sample_grid(ts) - b.sample_grid(ts))) < coarse_tol


def test_stays_at_zero_through_later_impulses():
    # after settling, an impulse whose delayed state is zero keeps the state at zero
    traj = scalar_run([5.0], 0.1, 1.72, horizon=6.0)
    assert traj.jumps[0].delayed[0] == 0.0
    assert np.all(traj.sample_grid(np.linspace(4.4, 6.0, 100)) == 0.0)


def test_delayed_state_can_restart_dynamics():
    # delayed instant precedes settling, so the impulse revives the state
    traj = scalar_run([4.5], 0.3, 1.72, horizon=6.0)
    assert traj.jumps[0].pre[0] == 0.0
    assert traj.jumps[0].post[0] > 0.0


def test_projection_gives_linear_output():
    fld = VectorField(2, lambda s: np.array([-s[0], -2 * s[1]]))
    traj = simulate(fld, ImpulseSchedule.linear([0.5], 0.1, 0.5), 0.9, [1.0, 2.0], 1.0)
    diff = traj.project(np.array([[-1.0, 1.0]]))
    for t in (0.0, 0.3, 0.5, 0.9):
        assert diff.sample(t)[0] == pytest.approx(traj.sample(t)[1] - traj.sample(t)[0], abs=1e-15)
    assert diff.jump_records()[0].post[0] == pytest.approx(0.5 * (traj.jumps[0].delayed[1] - traj.jumps[0].delayed[0]))


def test_cube_root_components_settle_independently():
    # one component reaches zero long before the other; it must be snapped, not parked near zero
    fld = VectorField(2, lambda s: -spow(s, 1.0 / 3.0) - s, zero_crossings=True)
    traj = simulate(fld, ImpulseSchedule(()), 0.9, [1.2, -0.7], 3.0, tol=1e-12)
    late = traj.sample_grid(np.linspace(2.5, 3.0, 50))
    assert np.all(late == 0.0)
    # closed form for ds/du = -s^(1/3) - s:  s^(2/3) = (s0^(2/3) + 1) exp(-2u/3) - 1
    u_hit = 1.5 * np.log(1.0 + 0.7 ** (2.0 / 3.0))
    t_hit = (0.9 * u_hit) ** (1.0 / 0.9)
    zero_from = min(t for t in np.linspace(0, 3.0, 30001) if traj.sample(t)[1] == 0.0)
    assert zero_from == pytest.approx(t_hit, abs=1e-3)
