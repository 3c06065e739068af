import mpmath as mp
import numpy as np
import pytest

from conftest import DENSE, DESTAB, SPARSE
from fts_impulsive import certificates as cert
from fts_impulsive.errors import ConfigurationError, DomainError

mp.mp.dps = 40
Q1 = mp.mpf("0.98")
Q2 = mp.mpf("0.93")


def flow1(t0=0.0):
    return cert.FlowConditionParams(2.0 / 3.0, 0.75, 0.98, 0.25, t0)


def flow2():
    c_hat = 2.0**0.65 * 1.1
    return cert.FlowConditionParams(c_hat, 0.65, 0.93, 0.5 * (7.2**2 + 13.7**2))


def jump(beta, gamma, tau, n=5):
    return cert.JumpConditionParams.uniform([beta] * n, gamma, tau)


def mp_gamma(c, eta, q, v0):
    alpha = c * (1 - eta) / q
    return (v0 ** (1 - eta) / alpha) ** (1 / q)


G1 = mp_gamma(mp.mpf(2) / 3, mp.mpf("0.75"), Q1, mp.mpf("0.25"))
G2 = mp_gamma(2 ** mp.mpf("0.65") * mp.mpf("1.1"), mp.mpf("0.65"), Q2, (mp.mpf("7.2") ** 2 + mp.mpf("13.7") ** 2) / 2)
B1 = mp.mpf("0.71") ** (2 * (1 - mp.mpf("0.75")))
B2 = mp.mpf("1.72") ** (2 * (1 - mp.mpf("0.75")))


class TestExtendedPrecisionOracles:
    def test_gamma_s0(self):
        assert cert.gamma_s0(flow1()) == pytest.approx(float(G1), rel=1e-13)
        assert cert.gamma_s0(flow2()) == pytest.approx(float(G2), rel=1e-13)

    def test_betas(self):
        assert cert.beta_from_linear_gain(0.71, 0.75) == pytest.approx(float(B1), rel=1e-14)
        assert cert.beta_from_linear_gain(1.72, 0.75) == pytest.approx(float(B2), rel=1e-14)
        assert cert.beta_from_linear_gain(0.4, 0.65) == pytest.approx(float(mp.mpf("0.4") ** mp.mpf("0.7")), rel=1e-14)

    @pytest.mark.parametrize("times,n", [(SPARSE, 2), (DENSE, 4)])
    def test_stabilizing_bound(self, times, n):
        c = cert.certify_stabilizing_delayed(flow1(), jump(0.8426, 0.9, 0.05), times)
        expected = (mp.mpf("0.9") ** n) ** (1 / Q1) * G1
        assert c.impulse_count == n
        assert c.settling_bound == pytest.approx(float(expected), rel=1e-13)

    def test_destabilizing_bound(self):
        c = cert.certify_destabilizing_delayed(flow1(), jump(1.3115, 1.5, 0.45), DESTAB)
        assert c.impulse_count == 4
        assert c.settling_bound == pytest.approx(float((mp.mpf("1.5") ** 3) ** (1 / Q1) * G1), rel=1e-13)

    def test_network_bounds(self):
        b = float(mp.mpf("0.4") ** mp.mpf("0.7"))
        c = cert.certify_stabilizing_delayed(flow2(), jump(b, 0.577, 0.01), [0.1, 0.3, 9.8])
        expected = (mp.mpf("0.577") ** 2) ** (1 / Q2) * G2
        assert c.settling_bound == pytest.approx(float(expected), rel=1e-13)
        assert float(expected) == pytest.approx(2.951354, abs=1e-6)
        b = float(mp.mpf("1.38") ** mp.mpf("0.7"))
        c = cert.certify_destabilizing_delayed(flow2(), jump(b, 1.353, 0.005), [0.12, 0.35, 19.0])
        expected = (mp.mpf("1.353") ** 2) ** (1 / Q2) * G2
        assert c.impulse_count == 3
        assert c.settling_bound == pytest.approx(float(expected), rel=1e-13)


class TestReferenceValues:
    def test_example_values(self):
        assert cert.gamma_s0(flow1()) == pytest.approx(4.280, abs=0.001)
        assert cert.gamma_s0(flow2()) == pytest.approx(9.630, abs=0.002)
        b1 = cert.beta_from_linear_gain(0.71, 0.75)
        b2 = cert.beta_from_linear_gain(1.72, 0.75)
        assert b1 == pytest.approx(0.843, abs=0.001)
        assert b2 == pytest.approx(1.311, abs=0.001)
        assert cert.beta_from_linear_gain(0.4, 0.65) == pytest.approx(0.527, abs=0.001)
        assert cert.beta_from_linear_gain(1.38, 0.65) == pytest.approx(1.253, abs=0.001)
        s = cert.certify_stabilizing_delayed(flow1(), jump(b1, 0.9, 0.05), SPARSE)
        d = cert.certify_stabilizing_delayed(flow1(), jump(b1, 0.9, 0.05), DENSE)
        x = cert.certify_destabilizing_delayed(flow1(), jump(b2, 1.5, 0.45), DESTAB)
        assert s.valid and s.settling_bound == pytest.approx(3.452, abs=0.002)
        assert d.valid and d.settling_bound == pytest.approx(2.784, abs=0.002)
        assert x.valid and x.settling_bound == pytest.approx(14.810, abs=0.005)


def test_delay_free_stabilizing():
    b1 = cert.beta_from_linear_gain(0.71, 0.75)
    c = cert.certify_stabilizing_delay_free(flow1(), jump(b1, 0.9, 0.0), [0.2, 0.4])
    assert c.valid and c.regime == cert.STABILIZING_DELAY_FREE
    assert c.settling_bound == pytest.approx(3.452, abs=0.002)
    empty = cert.certify_stabilizing_delay_free(flow1(), jump(b1, 0.9, 0.0), [])
    assert empty.settling_bound == pytest.approx(cert.gamma_s0(flow1()), rel=1e-15)


def test_delay_free_stabilizing_fallback_when_schedule_condition_fails():
    b1 = cert.beta_from_linear_gain(0.71, 0.75)
    # last impulse too close to the no-impulse settling time
    c = cert.certify_stabilizing_delay_free(flow1(), jump(b1, 0.9, 0.0), [0.2, 4.2])
    assert c.valid
    assert c.settling_bound == pytest.approx(cert.gamma_s0(flow1()), rel=1e-15)
    assert "schedule-specific bound unavailable" in c.notes


def test_delay_free_destabilizing_threshold_scan():
    b2 = 1.311  # rounded value as tabulated
    c = cert.certify_destabilizing_delay_free(flow1(), jump(b2, b2, 0.0), DESTAB)
    thresholds = [(mp.mpf(b2) ** (j - 1)) ** (1 / Q1) * G1 for j in range(1, 5)]
    first = next(j for j, (t, th) in enumerate(zip(DESTAB, thresholds), start=1) if t >= th)
    assert c.impulse_count == first == 4
    assert c.settling_bound == pytest.approx(float(thresholds[3]), rel=1e-13)
    assert c.settling_bound == pytest.approx(9.806, abs=0.001)


def test_destabilizing_trivial_cases():
    b2 = cert.beta_from_linear_gain(1.72, 0.75)
    g = cert.gamma_s0(flow1())
    empty = cert.certify_destabilizing_delayed(flow1(), jump(b2, 1.5, 0.45), [])
    assert empty.impulse_count == 1 and empty.settling_bound == pytest.approx(g, rel=1e-15)
    late = cert.certify_destabilizing_delay_free(flow1(), jump(b2, b2, 0.0), [g + 0.1])
    assert late.impulse_count == 1 and late.settling_bound == pytest.approx(g, rel=1e-15)


def test_first_impulse_after_settling_gives_no_impulse_bound():
    b1 = cert.beta_from_linear_gain(0.71, 0.75)
    c = cert.certify_stabilizing_delayed(flow1(), jump(b1, 0.9, 0.05), [5.0, 5.5])
    assert c.valid and c.impulse_count == 0
    assert c.settling_bound == pytest.approx(cert.gamma_s0(flow1()), rel=1e-15)


def test_impulse_count_premise():
    b1 = cert.beta_from_linear_gain(0.71, 0.75)
    c = cert.certify_stabilizing_delayed(flow1(), jump(b1, 0.9, 0.05), DENSE, expected_count=2)
    assert not c.valid
    assert "impulse-count-premise" in c.failed_conditions


def test_stabilizing_condition_failures_are_named():
    b1 = cert.beta_from_linear_gain(0.71, 0.75)
    c = cert.certify_stabilizing_delayed(flow1(), jump(b1, 0.9, 0.05), [0.2, 4.2])
    assert not c.valid
    assert "last-impulse-instant" in c.failed_conditions


def test_gamma_vs_beta_tau_failure():
    b2 = cert.beta_from_linear_gain(1.72, 0.75)
    c = cert.certify_destabilizing_delayed(flow1(), jump(b2, b2 * 1.0001, 3.0), DESTAB)
    assert not c.valid
    assert c.failed_conditions == ["gamma-vs-beta-tau"]


def test_regime_mismatch_raises():
    with pytest.raises(ConfigurationError):
        cert.certify_stabilizing_delayed(flow1(), jump(1.2, 1.5, 0.0), SPARSE)
    with pytest.raises(ConfigurationError):
        cert.certify_stabilizing_delayed(flow1(), jump(0.8, 0.7, 0.0), SPARSE)
    with pytest.raises(ConfigurationError):
        cert.certify_destabilizing_delayed(flow1(), jump(0.8, 1.5, 0.0), DESTAB)
    with pytest.raises(ConfigurationError):
        cert.certify(flow1(), jump(0.8, 0.9, 0.0), SPARSE, "sideways")


def test_invalid_flow_params():
    for c, eta in [(0.0, 0.5), (1.0, 0.0), (1.0, 1.0), (-1.0, 0.5)]:
        with pytest.raises((ConfigurationError, DomainError)):
            cert.FlowConditionParams(c, eta, 0.9, 1.0)
    with pytest.raises(DomainError):
        cert.beta_from_linear_gain(0.0, 0.5)


def test_zero_initial_value_short_circuits():
    p = cert.FlowConditionParams(1.0, 0.5, 0.9, 0.0, 2.0)
    assert cert.gamma_s0(p) == 2.0
    for regime, jp in (("stabilizing", jump(0.8, 0.9, 0.1)), ("destabilizing", jump(1.2, 1.5, 0.1))):
        c = cert.certify(p, jp, [2.5, 3.0], regime)
        assert c.valid and c.settling_bound == 2.0


def test_time_origin_shift():
    b1 = cert.beta_from_linear_gain(0.71, 0.75)
    base = cert.certify_stabilizing_delayed(flow1(), jump(b1, 0.9, 0.05), SPARSE)
    shifted = cert.certify_stabilizing_delayed(flow1(1.5), jump(b1, 0.9, 0.05), [t + 1.5 for t in SPARSE])
    assert shifted.settling_bound == pytest.approx(base.settling_bound + 1.5, rel=1e-14)
    assert shifted.impulse_count == base.impulse_count


def test_monotonicity_in_impulse_count():
    p = flow1()
    b1 = cert.beta_from_linear_gain(0.71, 0.75)
    bounds = []
    for n in range(1, 6):
        times = list(np.linspace(0.05, 0.3, n))
        c = cert.certify_stabilizing_delayed(p, jump(b1, 0.9, 0.01, n), times)
        assert c.valid and c.impulse_count == n
        bounds.append(c.settling_bound)
    assert all(b > a for a, b in zip(bounds[1:], bounds[:-1]))
    g = cert.gamma_s0(p)
    b2 = cert.beta_from_linear_gain(1.72, 0.75)
    t2 = []
    for n0 in range(1, 5):
        times = [0.1 * k for k in range(1, n0)] + [100.0]
        c = cert.certify_destabilizing_delayed(p, jump(b2, 1.5, 0.01, len(times)), times)
        t2.append(c.settling_bound)
        assert c.impulse_count == n0
        assert c.settling_bound >= g
    assert all(b >= a for a, b in zip(t2, t2[1:]))


def test_bound_ordering_relative_to_gamma():
    g = cert.gamma_s0(flow1())
    b1 = cert.beta_from_linear_gain(0.71, 0.75)
    b2 = cert.beta_from_linear_gain(1.72, 0.75)
    assert cert.certify_stabilizing_delayed(flow1(), jump(b1, 0.9, 0.05), SPARSE).settling_bound < g
    assert cert.certify_destabilizing_delayed(flow1(), jump(b2, 1.5, 0.45), DESTAB).settling_bound > g


def test_optimal_gamma_improves_on_hand_choice():
    b1 = cert.beta_from_linear_gain(0.71, 0.75)
    gamma, best = cert.optimal_gamma(flow1(), jump(b1, 0.9, 0.05), SPARSE, "stabilizing")
    assert best.valid and b1 < gamma < 1
    hand = cert.certify_stabilizing_delayed(flow1(), jump(b1, 0.9, 0.05), SPARSE)
    assert best.settling_bound <= hand.settling_bound
    b2 = cert.beta_from_linear_gain(1.72, 0.75)
    gamma, best = cert.optimal_gamma(flow1(), jump(b2, 1.5, 0.45), DESTAB, "destabilizing")
    assert best.valid and gamma >= b2


def test_certificate_invariants():
    b1 = cert.beta_from_linear_gain(0.71, 0.75)
    c = cert.certify_stabilizing_delayed(flow1(), jump(b1, 0.9, 0.05), SPARSE)
    d = c.to_dict()
    assert d["failed_conditions"] == [] and d["valid"]
    assert d["params"]["N"] == 2 and d["params"]["gamma"] == 0.9


# integer-order forms coded independently: no (.)^(1/q) anywhere

def io_gamma(c, eta, v0):
    return v0 ** (1 - eta) / (c * (1 - eta))


def io_stabilizing(c, eta, v0, beta, gamma, tau, times):
    g = io_gamma(c, eta, v0)
    n = len([t for t in times if t < g])
    if n == 0:
        return g, True
    ok6 = times[n - 1] <= gamma**n * (1 - beta / gamma) / (1 - beta) * g - beta / (1 - beta) * tau
    ok7 = gamma**n * (1 - beta / gamma) * g - beta * tau > 0
    return gamma**n * g, ok6 and ok7


def io_destabilizing(c, eta, v0, beta, gamma, tau, times):
    g = io_gamma(c, eta, v0)
    ok = gamma >= beta + beta * tau / g
    n0 = len(times) + 1
    for j, t in enumerate(times, start=1):
        if t >= gamma ** (j - 1) * g:
            n0 = j
            break
    return gamma ** (n0 - 1) * g, ok


def test_order_one_reduction_randomized():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(300):
        c, eta, v0 = rng.uniform(0.2, 3), rng.uniform(0.05, 0.95), rng.uniform(0.01, 20)
        p = cert.FlowConditionParams(c, eta, 1.0, v0)
        g = io_gamma(c, eta, v0)
        assert cert.gamma_s0(p) == pytest.approx(g, rel=1e-12)
        times = list(np.sort(rng.uniform(0.01, 2.5 * g, rng.integers(1, 6))))
        times = [t for k, t in enumerate(times) if k == 0 or t > times[k - 1]]
        tau = float(rng.uniform(0, 0.5 * min(times)))
        beta = float(rng.uniform(0.05, 0.95))
        gamma = float(rng.uniform(beta, 1.0))
        sc = cert.certify_stabilizing_delayed(p, jump(beta, gamma, tau, len(times)), times)
        bound, ok = io_stabilizing(c, eta, v0, beta, gamma, tau, times)
        assert sc.settling_bound == pytest.approx(bound, rel=1e-12)
        assert sc.valid == ok
        beta = float(rng.uniform(1.0, 2.0))
        gamma = float(rng.uniform(beta, 2.5 * beta))
        dc = cert.certify_destabilizing_delayed(p, jump(beta, gamma, tau, len(times)), times)
        bound, ok = io_destabilizing(c, eta, v0, beta, gamma, tau, times)
        assert dc.settling_bound == pytest.approx(bound, rel=1e-12)
        assert dc.valid == ok
        df = cert.certify_destabilizing_delay_free(p, jump(beta, beta, 0.0, len(times)), times)
        bound, _ = io_destabilizing(c, eta, v0, beta, beta, 0.0, times)
        assert df.settling_bound == pytest.approx(bound, rel=1e-12)
        checked += 1
    assert checked == 300
