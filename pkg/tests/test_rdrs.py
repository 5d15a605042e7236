import math

import numpy as np
import pytest

from rdrs_lab.env import MarkovEnvSpec, sample_path, states_on_grid
from rdrs_lab.game import Example1Params, PriceMap, solve_example1_queue
from rdrs_lab.rdrs import (
    DiffusionParams,
    Noise,
    RdrsError,
    build_workload_coeffs,
    gamma_matrices,
    map_workload_to_state,
    simulate_2d_comparison,
    simulate_rdrs_1d,
)


def quiet(theta, mu=(0.1, 0.05)):
    z = (0.0, 0.0)
    return DiffusionParams((1.0, 1.0), (1.0, 1.0), mu, z, z, z, theta, (1000.0, 1000.0))


def test_gamma_matrices(ex1_diffusion):
    ge, gs = gamma_matrices(ex1_diffusion, 1)
    lam, m, a2, z2, b2 = 10 / 3, 3.0, 10.0, 1.0, 10.0
    assert ge[0, 0] == pytest.approx(lam * m * m * z2 + lam * m * a2, rel=1e-14)
    assert ge[0, 0] == pytest.approx(130.0, rel=1e-14)
    assert gs[0, 0] == pytest.approx(100.0, rel=1e-14)
    assert ge[1, 1] == pytest.approx(5 * 1 * 2 + 5 * 1 * 20, rel=1e-14)
    assert gs[1, 1] == pytest.approx(5 * 1 * 20, rel=1e-14)
    assert ge[0, 1] == ge[1, 0] == gs[0, 1] == 0.0


def test_gamma_degenerate_inputs():
    p = DiffusionParams((0.0, 0.0), (3.0, 1.0), (0.1, 0.05), (10, 20), (1, 2), (10, 20), (0, 0), (1, 1))
    ge, gs = gamma_matrices(p, 1)
    assert not ge.any() and not gs.any()
    p = DiffusionParams((1.0, 2.0), (3.0, 1.0), (0.1, 0.05), (0, 0), (0, 0), (10, 20), (0, 0), (1, 1))
    assert not gamma_matrices(p, 1)[0].any()


def test_workload_coeffs(ex1_diffusion):
    co = build_workload_coeffs(ex1_diffusion, 1, {1, 2})
    assert co.b == pytest.approx(-34.0, rel=1e-14)
    assert co.R == 1.0
    assert co.sigma_e.tolist() == [10.0, 20.0]
    ge, gs = gamma_matrices(ex1_diffusion, 1)
    expected = math.sqrt((10 * math.sqrt(ge[0, 0]) + 20 * math.sqrt(ge[1, 1])) ** 2
                         + (10 * math.sqrt(gs[0, 0]) + 20 * math.sqrt(gs[1, 1])) ** 2)
    assert co.sigma_hat == pytest.approx(expected, rel=1e-14)
    none = build_workload_coeffs(ex1_diffusion, 1, set())
    assert none.b == 0.0 and not none.sigma_e.any() and not none.sigma_s.any()


def test_params_validation():
    with pytest.raises(RdrsError):
        DiffusionParams((1, 1), (1, 1), (0.0, 1.0), (1, 1), (1, 1), (1, 1), (0, 0), (1, 1))
    with pytest.raises(RdrsError):
        DiffusionParams((1, 1), (1, 1), (1.0, 1.0), (1,), (1, 1), (1, 1), (0, 0), (1, 1))


def test_zero_noise_positive_drift():
    path = simulate_rdrs_1d(quiet((0.05, 0.025)), None, 10.0, 1000, np.random.default_rng(0))
    assert np.allclose(path.W, path.grid, rtol=1e-12, atol=1e-12)
    assert not path.Y.any()


def test_zero_noise_negative_drift():
    path = simulate_rdrs_1d(quiet((-0.05, -0.025)), None, 10.0, 1000, np.random.default_rng(0))
    assert not path.W.any()
    assert np.allclose(path.Y, path.grid, rtol=1e-12, atol=1e-12)


def test_path_invariants_and_queue_constraint(ex1_diffusion, ex1_prices):
    rng = np.random.default_rng(1)
    for _ in range(20):
        path = simulate_rdrs_1d(ex1_diffusion, None, 20.0, 2000, rng, price_map=ex1_prices)
        assert path.check_invariants() == []
        w = path.Qhat[:, 0] / 0.1 + path.Qhat[:, 1] / 0.05
        assert np.all(np.abs(w - path.W) <= 1e-8 * np.maximum(1.0, path.W))
        assert np.all(path.Phat >= (0.64, 0.8))


def test_free_process_moments(ex1_diffusion):
    # terminal X over [0, 1] with n = 50: mean b, variance sigma_hat**2
    co = build_workload_coeffs(ex1_diffusion, 1, {1, 2})
    ge, gs = gamma_matrices(ex1_diffusion, 1)
    var = sum((ge[j, j] + gs[j, j]) / ex1_diffusion.mu[j] ** 2 for j in range(2))
    rng = np.random.default_rng(2)
    x = np.array([simulate_rdrs_1d(ex1_diffusion, None, 1.0, 50, rng, policy="constant").X[-1]
                  for _ in range(4000)])
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - co.b) <= 3 * se
    assert abs(x.var(ddof=1) / var - 1) <= 0.08


def test_halving_step_is_stable(ex1_diffusion, ex1_prices):
    def terminal(steps, seed):
        rng = np.random.default_rng(seed)
        return np.array([simulate_rdrs_1d(ex1_diffusion, None, 5.0, steps, rng, price_map=ex1_prices,
                                          policy="constant").W[-1] for _ in range(800)])

    a, b = terminal(250, 3), terminal(500, 4)
    se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    assert abs(a.mean() - b.mean()) <= 2 * se


def test_regime_switching_drift():
    z = (0.0, 0.0)
    p = DiffusionParams([[1, 1], [1, 1]], [[1, 1], [1, 1]], (0.1, 0.05), z, z, z,
                        [[0.1, 0.05], [-0.2, -0.1]], [[1000, 1000], [1000, 1000]])
    env = MarkovEnvSpec((0.5, 0.5), ((0.0, 1.0), (1.0, 0.0)))
    path_env = sample_path(env, 40.0, np.random.default_rng(5))
    path = simulate_rdrs_1d(p, path_env, 40.0, 4000, np.random.default_rng(6), policy="constant")
    s = states_on_grid(path_env, path.grid)[:-1]
    assert (s == 0).any() and (s == 1).any()
    dx = np.diff(path.X) / (40.0 / 4000)
    assert np.allclose(dx[s == 0], 2.0, rtol=1e-9) and np.allclose(dx[s == 1], -4.0, rtol=1e-9)


def test_determinism(ex1_diffusion, ex1_prices):
    a = simulate_rdrs_1d(ex1_diffusion, None, 5.0, 500, np.random.default_rng(7), price_map=ex1_prices)
    b = simulate_rdrs_1d(ex1_diffusion, None, 5.0, 500, np.random.default_rng(7), price_map=ex1_prices)
    for f in ("W", "Y", "X", "Qhat", "Phat", "cost"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_bad_arguments(ex1_diffusion, ex2_diffusion):
    rng = np.random.default_rng(0)
    with pytest.raises(RdrsError):
        simulate_rdrs_1d(ex1_diffusion, None, 1.0, 10, rng, policy="pooling")
    with pytest.raises(RdrsError):
        simulate_rdrs_1d(ex1_diffusion, None, 0.0, 10, rng)
    with pytest.raises(RdrsError):
        simulate_rdrs_1d(ex2_diffusion, None, 1.0, 10, rng, example=1)
    with pytest.raises(RdrsError):
        simulate_2d_comparison(ex2_diffusion, None, 1.0, 10, rng)


def test_pooling_uses_uniform_selector(ex2_diffusion, ex2_prices):
    rng = np.random.default_rng(0)
    noise = Noise.draw(rng, 100, 3, 0.01)
    noise.u[:] = np.linspace(0, 1, 101)
    path = simulate_rdrs_1d(ex2_diffusion, None, 1.0, 100, None, example=2, price_map=ex2_prices,
                            policy="pooling", noise=noise)
    expected = np.where(noise.u < 1 / 3, 0, np.where(noise.u < 2 / 3, 1, 2))
    assert path.selected.tolist() == expected.tolist()


def test_twod_zero_noise_negative_drift():
    path = simulate_2d_comparison(quiet((-1.0, -1.2)), None, 5.0, 500, np.random.default_rng(0))
    assert not path.W.any() and not path.Qhat.any()


def test_twod_nonnegative_and_costly(ex1_diffusion):
    rng = np.random.default_rng(3)
    for _ in range(10):
        path = simulate_2d_comparison(ex1_diffusion, None, 20.0, 2000, rng)
        assert np.all(path.Qhat >= 0) and np.all(path.W >= 0)
        assert np.all(np.isfinite(path.cost)) and path.cost[0] == 0.0
        assert np.all(path.Phat == 1.0)
    assert path.cost[1:].max() > 0


def test_map_workload(ex1_params, ex1_prices):
    q, p, sel = map_workload_to_state(0.0, (9.0, 3.0), 1, (0.1, 0.05), (1000.0, 1000.0), ex1_prices)
    assert q.tolist() == [0.0, 0.0] and sel == (1, 2)
    q, p, _ = map_workload_to_state(1e4, (2.0, 1.5), 1, (0.1, 0.05), (1000.0, 1000.0), ex1_prices)
    assert np.array_equal(q, solve_example1_queue(p, 1e4, ex1_params))
    assert abs(q[0] / 0.1 + q[1] / 0.05 - 1e4) <= 1e-8 * 1e4
    flat = PriceMap((1, 1, 1), (1, 1, 1), (1, 1, 1))
    for w in (0.0, 3.0, 5e3):
        _, p, _ = map_workload_to_state(w, (1, 1, 1), 2, (0.1, 0.05, 0.1), (1000.0,) * 3, flat)
        assert p.tolist() == [1.0, 1.0, 1.0]
    with pytest.raises(RdrsError):
        map_workload_to_state(-1.0, (1, 1), 1, (0.1, 0.05), (1000.0, 1000.0), ex1_prices)
