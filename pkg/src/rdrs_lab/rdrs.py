"""One-dimensional workload diffusion with regime switching and its
queue/price mapping.

The workload ``W`` is advanced by projected Euler steps: the free increment
``dX`` is accumulated, ``W`` is pushed back to zero when it would go negative,
and the push is recorded in the regulator ``Y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .env import EnvPath, states_on_grid
from .game import (
    Example1Params,
    Example2Params,
    PriceMap,
    Q_EPS,
    FP_TOL,
    FP_MAX_ITER,
    fixed_point_example1,
    fixed_point_example2,
    PAIRS,
)

POLICY_CODES = {"game": 0, "constant": 1, "pooling": 2, "twod": 3}


class RdrsError(ValueError):
    pass


def _as_state_table(x, k, j, name):
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = np.broadcast_to(a, (k, a.size))
    if a.shape != (k, j):
        raise RdrsError(f"{name} must have shape ({k}, {j}) or ({j},), got {a.shape}")
    return np.array(a, dtype=float, order="C")


@dataclass(frozen=True)
class DiffusionParams:
    """Per-user primitives; state-dependent entries have shape (K, J)."""

    lam: np.ndarray
    m: np.ndarray
    mu: np.ndarray
    alpha2: np.ndarray
    zeta2: np.ndarray
    beta2: np.ndarray
    theta: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        j = mu.size
        lam = np.asarray(self.lam, dtype=float)
        k = lam.shape[0] if lam.ndim == 2 else 1
        object.__setattr__(self, "mu", mu)
        for name in ("alpha2", "zeta2", "beta2"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if v.size != j:
                raise RdrsError(f"{name} needs one value per user")
            object.__setattr__(self, name, v)
        for name in ("lam", "m", "theta", "rho"):
            object.__setattr__(self, name, _as_state_table(getattr(self, name), k, j, name))
        if np.any(mu <= 0):
            raise RdrsError("service rates mu must be positive")
        for name in ("lam", "m", "alpha2", "zeta2", "beta2", "rho"):
            if np.any(getattr(self, name) < 0):
                raise RdrsError(f"{name} must be nonnegative")

    @property
    def num_users(self) -> int:
        return self.mu.size

    @property
    def num_states(self) -> int:
        return self.lam.shape[0]


@dataclass(frozen=True)
class RdrsCoeffs:
    b: float
    sigma_e: np.ndarray
    sigma_s: np.ndarray
    gamma_e: np.ndarray
    gamma_s: np.ndarray
    R: float = 1.0

    @property
    def sigma_hat(self) -> float:
        """Standard deviation rate of the driving noise combination."""
        se = float(np.sum(self.sigma_e * np.sqrt(np.diag(self.gamma_e))))
        ss = float(np.sum(self.sigma_s * np.sqrt(np.diag(self.gamma_s))))
        return math.sqrt(se * se + ss * ss)


@dataclass
class RdrsPath:
    grid: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    X: np.ndarray
    Qhat: np.ndarray
    Phat: np.ndarray
    selected: np.ndarray
    cost: np.ndarray
    nonconverged: int = 0

    def check_invariants(self, tol: float = 1e-12) -> list[str]:
        """Return a list of violated path properties (empty when all hold)."""
        problems = []
        if np.any(self.W < 0):
            problems.append("negative workload")
        if self.Y[0] != 0.0:
            problems.append("regulator does not start at 0")
        dY = np.diff(self.Y)
        if np.any(dY < 0):
            problems.append("regulator decreases")
        if np.any((dY > 0) & (self.W[1:] > tol)):
            problems.append("regulator pushes while workload is positive")
        scale = float(np.max(self.W)) * float(self.Y[-1])
        if float(np.sum(self.W[1:] * dY)) > tol * scale:
            problems.append("complementarity sum too large")
        return problems


def gamma_matrices(params: DiffusionParams, i: int):
    """Diagonal arrival and service covariance matrices in state ``i`` (1-based)."""
    s = i - 1
    lam, m = params.lam[s], params.m[s]
    ge = lam * m * m * params.zeta2 + lam * m * params.alpha2
    gs = lam * m * params.beta2
    return np.diag(ge), np.diag(gs)


def build_workload_coeffs(params: DiffusionParams, i: int, active) -> RdrsCoeffs:
    """Drift and noise loadings of the workload over the ``active`` users (1-based)."""
    ge, gs = gamma_matrices(params, i)
    sigma = np.zeros(params.num_users)
    b = 0.0
    for j in sorted(active):
        sigma[j - 1] = 1.0 / params.mu[j - 1]
        b += params.theta[i - 1, j - 1] / params.mu[j - 1]
    return RdrsCoeffs(b, sigma, sigma.copy(), ge, gs)


def kernel_tables(params: DiffusionParams):
    """(theta/mu, sqrt(Gamma_E), sqrt(Gamma_S)) per state, shape (K, J)."""
    k = params.num_states
    tom = params.theta / params.mu
    sge = np.empty((k, params.num_users))
    sgs = np.empty_like(sge)
    for s in range(k):
        ge, gs = gamma_matrices(params, s + 1)
        sge[s] = np.sqrt(np.diag(ge))
        sgs[s] = np.sqrt(np.diag(gs))
    return np.ascontiguousarray(tom), sge, sgs


@dataclass
class Noise:
    """Per-replication random inputs shared by all policy arms."""

    dBE: np.ndarray
    dBS: np.ndarray
    u: np.ndarray

    @classmethod
    def draw(cls, rng, steps: int, users: int, dt: float) -> "Noise":
        sd = math.sqrt(dt)
        dBE = rng.standard_normal((steps, users)) * sd
        dBS = rng.standard_normal((steps, users)) * sd
        u = rng.random(steps + 1)
        return cls(dBE, dBS, u)


def run_kernel(example: int, policy: str, params: DiffusionParams, state_idx, noise: Noise, dt: float,
               price_map: PriceMap | None = None, p_const=None, tol=FP_TOL, max_iter=FP_MAX_ITER,
               eps=Q_EPS, backend=None) -> RdrsPath:
    j = params.num_users
    expected = 2 if example == 1 else 3
    if j != expected:
        raise RdrsError(f"example {example} needs {expected} users, got {j}")
    if policy == "twod" and j != 2:
        raise RdrsError("the two-dimensional queue comparison needs exactly two users")
    code = POLICY_CODES[policy]
    if price_map is None:
        price_map = PriceMap([0.0] * j, [np.inf] * j, [1.0] * j)
    p_const = np.ones(j) if p_const is None else np.asarray(p_const, dtype=float)
    n = noise.dBE.shape[0]
    tom, sge, sgs = kernel_tables(params)
    W = np.empty(n + 1)
    Y = np.empty(n + 1)
    X = np.empty(n + 1)
    Q = np.empty((n + 1, j))
    P = np.empty((n + 1, j))
    sel = np.empty(n + 1, dtype=np.int64)
    cost = np.empty(n + 1)
    k = _backend.get_kernels(backend)
    bad = k.run_path(
        int(example), code, np.ascontiguousarray(params.mu), tom, sge, sgs, np.ascontiguousarray(params.rho),
        np.asarray(price_map.initial, dtype=float), np.asarray(price_map.lower, dtype=float),
        np.asarray(price_map.upper, dtype=float), np.ascontiguousarray(p_const),
        float(dt), float(tol), int(max_iter), float(eps),
        np.ascontiguousarray(noise.dBE), np.ascontiguousarray(noise.dBS), np.ascontiguousarray(noise.u),
        np.ascontiguousarray(state_idx, dtype=np.int64), W, Y, X, Q, P, sel, cost,
    )
    grid = np.arange(n + 1) * dt
    return RdrsPath(grid, W, Y, X, Q, P, sel, cost, int(bad))


def _grid_states(env_path: EnvPath | None, horizon: float, steps: int):
    grid = np.linspace(0.0, horizon, steps + 1)
    if env_path is None:
        return np.zeros(steps + 1, dtype=np.int64)
    return states_on_grid(env_path, grid)


def simulate_rdrs_1d(params: DiffusionParams, env_path: EnvPath | None, horizon: float, steps: int, rng,
                     example: int = 1, price_map: PriceMap | None = None, policy: str = "game",
                     p_const=None, noise: Noise | None = None, backend=None) -> RdrsPath:
    """Simulate the workload diffusion and the induced queues and prices.

    ``policy`` is ``"game"`` (price fixed point), ``"constant"`` (prices
    ``p_const``) or ``"pooling"`` (random served pair, example 2 only).
    """
    if steps < 1 or not horizon > 0:
        raise RdrsError("need steps >= 1 and horizon > 0")
    if policy not in ("game", "constant", "pooling"):
        raise RdrsError(f"unknown policy {policy!r}")
    if policy == "pooling" and example != 2:
        raise RdrsError("random pooling applies to the three-user example only")
    dt = horizon / steps
    if noise is None:
        noise = Noise.draw(rng, steps, params.num_users, dt)
    states = _grid_states(env_path, horizon, steps)
    return run_kernel(example, policy, params, states, noise, dt, price_map, p_const, backend=backend)


def simulate_2d_comparison(params: DiffusionParams, env_path: EnvPath | None, horizon: float, steps: int, rng,
                           p_const=None, noise: Noise | None = None, backend=None) -> RdrsPath:
    """Componentwise-reflected two-user workload diffusion with constant prices.

    Each coordinate carries its own user's drift and noise loading and is
    reflected at zero separately; ``Qhat`` is ``mu_j * W_j`` and ``W``, ``Y``
    and ``X`` report coordinate sums.  This is a stand-in construction, not
    the one-dimensional model.
    """
    if params.num_users != 2:
        raise RdrsError("the two-dimensional queue comparison needs exactly two users")
    dt = horizon / steps
    if noise is None:
        noise = Noise.draw(rng, steps, 2, dt)
    states = _grid_states(env_path, horizon, steps)
    return run_kernel(1, "twod", params, states, noise, dt, None, p_const, backend=backend)


def map_workload_to_state(W: float, prev_price, example: int, mu, c, price_map: PriceMap,
                          tol=FP_TOL, max_iter=FP_MAX_ITER, eps=Q_EPS):
    """Queue vector and clamped prices consistent with workload ``W``.

    Returns ``(Qhat, Phat, selected_users)``; on a failed fixed point the
    lagged ``prev_price`` is kept.
    """
    if W < 0:
        raise RdrsError("workload must be nonnegative")
    if example == 1:
        q, p, _ = fixed_point_example1(W, prev_price, Example1Params(mu[0], mu[1], c[0], c[1]), price_map,
                                       tol, max_iter, eps)
        return q, p, (1, 2)
    q, p, k, _ = fixed_point_example2(W, prev_price, Example2Params(tuple(mu), tuple(c)), price_map,
                                      tol, max_iter, eps)
    return q, p, tuple(x + 1 for x in PAIRS[k])
