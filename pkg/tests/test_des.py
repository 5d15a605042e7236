import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdrs_lab.des import (
    ArrivalSpec,
    BatchLaw,
    ConstantPrices,
    DesError,
    Example1Prices,
    HeavyTrafficSystem,
    PolicyViolation,
    ServiceSpec,
    WaterFillPolicy,
    diffusion_scale,
    draw_unit,
    fluid_scale,
    fluid_sup,
    heavy_traffic_rates,
    sample_tsrrp,
    simulate_queueing,
    write_trace_csv,
)
from rdrs_lab.env import MarkovEnvSpec, sample_path
from rdrs_lab.game import EXAMPLE_KINDS, PriceMap


class FixedRate:
    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    def __call__(self, pq, state=1):
        return self.c


def system():
    return HeavyTrafficSystem(lam=[10 / 3, 5], m=[3, 1], mu=[0.1, 0.05], alpha2=[10, 20], zeta2=[1, 2],
                              beta2=[10, 20], theta=[-1, -1.2])


def test_draw_unit_moments():
    rng = np.random.default_rng(0)
    assert draw_unit(rng, 0.0) == 1.0
    for scv in (0.5, 1.0, 10.0):
        x = np.array([draw_unit(rng, scv) for _ in range(40_000)])
        assert abs(x.mean() - 1) <= 4 * math.sqrt(scv / x.size)
        assert x.var() == pytest.approx(scv, rel=0.1)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 12), st.floats(0, 5))
def test_batch_law_matches_moments(mean_int, scv):
    mean = float(mean_int)
    if mean == 0:
        scv = 0.0
    law = BatchLaw.match(mean, scv)
    assert law.mean == pytest.approx(mean, rel=1e-9, abs=1e-12)
    assert law.variance == pytest.approx(scv * mean * mean, rel=1e-7, abs=1e-9)


def test_batch_law_fractional_means():
    for mean, scv in ((2.5, 0.3), (1.5, 0.12), (10 / 3, 0.4)):
        law = BatchLaw.match(mean, scv)
        assert law.mean == pytest.approx(mean, rel=1e-12)
        assert law.variance == pytest.approx(scv * mean * mean, rel=1e-9)


def test_batch_law_sampling():
    rng = np.random.default_rng(1)
    for mean, scv in ((3.0, 1.0), (1.0, 2.0), (3.0, 0.5)):
        law = BatchLaw.match(mean, scv)
        x = np.array([law.draw(rng) for _ in range(50_000)])
        assert np.all(x >= 0) and x.dtype.kind == "i"
        assert abs(x.mean() - mean) <= 4 * math.sqrt(law.variance / x.size)
        assert x.var() == pytest.approx(law.variance, rel=0.06)


def test_batch_law_rejects_impossible():
    with pytest.raises(DesError):
        BatchLaw.match(2.5, 0.0)
    with pytest.raises(DesError):
        BatchLaw.match(0.5, 0.1)  # below the integer minimum variance 0.25


def test_deterministic_renewal():
    spec = ArrivalSpec([[2.0]], [[1.0]], [0.0], [0.0])
    ev = sample_tsrrp(spec, None, 10.0, np.random.default_rng(0))
    assert [t for t, _, _ in ev] == pytest.approx([0.5 * k for k in range(1, 21)], abs=1e-12)
    assert all(b == 1 for _, _, b in ev)


def test_zero_batch_variance():
    spec = ArrivalSpec([[1.0, 2.0]], [[3.0, 1.0]], [1.0, 1.0], [0.0, 0.0])
    ev = sample_tsrrp(spec, None, 50.0, np.random.default_rng(1))
    assert {b for _, j, b in ev if j == 0} == {3} and {b for _, j, b in ev if j == 1} == {1}
    times = [t for t, _, _ in ev]
    assert times == sorted(times)


def test_arrival_rate_clt():
    lam, m, a2, z2, horizon = 10 / 3, 3.0, 10.0, 1.0, 1e4
    spec = ArrivalSpec([[lam]], [[m]], [a2], [z2])
    ev = sample_tsrrp(spec, None, horizon, np.random.default_rng(2))
    total = sum(b for _, _, b in ev)
    se = math.sqrt(lam * (m * m * a2 + z2 * m * m) / horizon)
    assert abs(total / horizon - lam * m) <= 3 * se


def test_state_dependent_rates():
    env = MarkovEnvSpec((0.01, 0.01), ((0.0, 1.0), (1.0, 0.0)))
    path = sample_path(env, 2000.0, np.random.default_rng(3))
    spec = ArrivalSpec([[1.0], [5.0]], [[1.0], [1.0]], [0.0], [0.0])
    ev = sample_tsrrp(spec, path, 2000.0, np.random.default_rng(3))
    ends = list(path.jump_times[1:]) + [2000.0]
    for s, a, b in zip(path.states, path.jump_times, ends):
        count = sum(1 for t, _, _ in ev if a < t <= b)
        rate = 1.0 if s == 1 else 5.0
        assert abs(count - rate * (b - a)) <= 2


def test_empty_system_stays_empty():
    tr = simulate_queueing(ArrivalSpec([[1.0]], [[1.0]], [1.0], [1.0]), ServiceSpec([1.0], [1.0]),
                           FixedRate([3.0]), ConstantPrices([1.0]), None, 20.0, np.random.default_rng(0),
                           events=[])
    assert not tr.Q.any() and not tr.D.any() and not tr.W.any()
    assert tr.check_identities() == []


def test_hand_trace():
    # one packet per second, unit lengths, service at rate 2: each packet leaves half a second later
    tr = simulate_queueing(ArrivalSpec([[1.0]], [[1.0]], [0.0], [0.0]), ServiceSpec([1.0], [0.0]),
                           FixedRate([2.0]), ConstantPrices([1.0]), None, 10.6, np.random.default_rng(0))
    assert tr.Q.max() == 1
    dep = tr.times[[k == "departure" for k in tr.kinds]]
    arr = tr.times[[k == "arrival" for k in tr.kinds]]
    assert np.allclose(arr, np.arange(1, 11), atol=1e-12)
    assert np.allclose(dep, np.arange(1, 11) + 0.5, atol=1e-12)
    assert tr.check_identities() == []


def test_identities_under_policy_and_switching():
    sysm = system()
    rho = sysm.nominal_rates()
    sysm.env = MarkovEnvSpec((0.5, 0.5), ((0.0, 1.0), (1.0, 0.0)))
    sysm.lam = np.array([[10 / 3, 5.0], [2.0, 6.0]])
    pol = WaterFillPolicy(EXAMPLE_KINDS[:2], [150.0, 150.0], 200.0, rho)
    pm = Example1Prices(sysm.mu, rho, PriceMap((0.64, 0.8), (np.inf, np.inf), (9, 3)))
    rng = np.random.default_rng(4)
    for r in (3, 6):
        path = sysm.env_path(r, 400.0, rng)
        tr = simulate_queueing(sysm.arrivals(r), sysm.services(), pol, pm, path, 400.0, rng)
        assert tr.check_identities() == []
        assert np.all(tr.rates[tr.Q == 0] == 0)
        assert np.all(tr.P >= (0.64, 0.8))
        assert np.all(np.diff(tr.times) >= 0)


def test_policy_violation():
    pol = WaterFillPolicy(EXAMPLE_KINDS[:2], [150.0, 150.0], 200.0, [100.0, 100.0])
    bad = FixedRate([180.0, 50.0])
    bad.contains = pol.contains
    with pytest.raises(PolicyViolation) as err:
        simulate_queueing(ArrivalSpec([[1.0, 1.0]], [[1.0, 1.0]], [1.0, 1.0], [0.0, 0.0]),
                          ServiceSpec([1.0, 1.0], [1.0, 1.0]), bad, ConstantPrices([1, 1]), None, 10.0,
                          np.random.default_rng(0))
    assert err.value.rates.tolist() == [180.0, 50.0]


def test_waterfill_policy():
    pol = WaterFillPolicy(EXAMPLE_KINDS[:2], [150.0, 150.0], 200.0, [100.0, 100.0])
    assert pol([0.0, 0.0]).tolist() == [100.0, 100.0]
    c = pol([5.0, 0.0])
    assert c.tolist() == [150.0, 0.0]
    c = pol([30.0, 4.0])
    assert pol.contains(c) and c.sum() == pytest.approx(200.0, rel=1e-12)


def test_heavy_traffic_rates():
    assert heavy_traffic_rates(10 / 3, 3, 10, -1) == pytest.approx(10 / 3 - 1 / 30, rel=1e-15)
    assert heavy_traffic_rates(2.0, 1.0, 7.0, 0.0) == 2.0
    big = heavy_traffic_rates(10 / 3, 3, 1e6, -1)
    assert abs(big - 10 / 3) / (10 / 3) < 1e-5
    lam, m = np.array([10 / 3, 5.0]), np.array([3.0, 1.0])
    assert np.allclose(heavy_traffic_rates(lam, m, 10, [-1, -1.2]) * m, lam * m + np.array([-1, -1.2]) / 10)
    with pytest.raises(DesError):
        heavy_traffic_rates(0.01, 1.0, 1.0, -1.0)
    with pytest.raises(DesError):
        heavy_traffic_rates(1.0, 1.0, 0.0, 0.0)


def test_nominal_rates():
    assert system().nominal_rates() == pytest.approx([100.0, 100.0], rel=1e-14)


def sample_trace():
    sysm = system()
    pol = WaterFillPolicy(EXAMPLE_KINDS[:2], [150.0, 150.0], 200.0, sysm.nominal_rates())
    return simulate_queueing(sysm.arrivals(4), sysm.services(), pol, ConstantPrices([1, 1]), None, 64.0,
                             np.random.default_rng(5))


def test_scalings():
    tr = sample_trace()
    grid = np.linspace(0, 1, 41)
    q1, w1 = diffusion_scale(tr, 1.0, grid * 64)
    assert np.array_equal(q1, tr.Q[tr.at(grid * 64)]) and np.array_equal(w1, tr.W[tr.at(grid * 64)])
    idx = tr.at(grid * 16)
    qd, wd = diffusion_scale(tr, 4.0, grid)
    qf, wf = fluid_scale(tr, 4.0, grid)
    assert np.array_equal(qd * 4, tr.Q[idx]) and np.allclose(qf * 16, tr.Q[idx])
    with pytest.raises(IndexError):
        fluid_scale(tr, 10.0, grid)
    assert fluid_sup(tr, 4.0) == tr.Q[tr.times <= 16].sum(axis=1).max() / 16


def test_constant_trace_scaling():
    tr = simulate_queueing(ArrivalSpec([[1.0]], [[1.0]], [1.0], [1.0]), ServiceSpec([1.0], [1.0]),
                           FixedRate([0.0]), ConstantPrices([1.0]), None, 100.0, np.random.default_rng(0),
                           q0=[7], events=[])
    q, _ = diffusion_scale(tr, 5.0, [0.0, 1.0, 2.0, 4.0])
    assert q.ravel().tolist() == [7 / 5] * 4
    q, _ = fluid_scale(tr, 5.0, [0.0, 4.0])
    assert q.ravel().tolist() == [7 / 25] * 2


def test_trace_csv(tmp_path):
    tr = sample_trace()
    out = tmp_path / "trace.csv"
    write_trace_csv(tr, out)
    lines = out.read_bytes().split(b"\n")
    assert lines[0] == b"t,user,event_kind,queue_len,workload,env_state"
    assert len(lines) - 2 == 2 * tr.times.size
