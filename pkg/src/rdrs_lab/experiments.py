"""Policy comparisons by paired Monte Carlo and related helpers.

Every replication draws its randomness from
``SeedSequence(seed, spawn_key=(rep,))`` in a fixed order (environment path,
arrival-side and service-side Brownian increments, pooling selectors), and
both policy arms consume the same draws.  Replications are reduced in fixed
chunks, combined in chunk order, so the output does not depend on the
number of worker threads.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .capacity import CapacityRegion
from .env import MarkovEnvSpec, sample_path, states_on_grid
from .game import EXAMPLE_KINDS, PAIRS, PROP_FAIR, DualCostSpec, PriceMap, lyapunov_psi
from .rdrs import DiffusionParams, Noise, RdrsPath, run_kernel

BASELINES = ("self", "constant", "2dqueue", "arbitrary", "pooling")
CHUNK = 32


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    example: int
    paths: int
    horizon: float
    steps: int
    seed: int
    lam: np.ndarray
    m: np.ndarray
    mu: np.ndarray
    alpha2: np.ndarray
    zeta2: np.ndarray
    beta2: np.ndarray
    theta: np.ndarray
    rho: np.ndarray
    prices: PriceMap
    region: CapacityRegion
    constant_prices: tuple = ()
    baselines: tuple = ()
    env: MarkovEnvSpec | None = None
    name: str = ""

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ExperimentError("; ".join(problems))

    @property
    def num_users(self) -> int:
        return 2 if self.example == 1 else 3

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def problems(self) -> list[str]:
        out = []
        if self.example not in (1, 2):
            out.append(f"example must be 1 or 2, got {self.example}")
            return out
        j = self.num_users
        if self.paths < 1:
            out.append("paths must be >= 1")
        if self.steps < 1:
            out.append("steps must be >= 1")
        if not self.horizon > 0:
            out.append("horizon must be positive")
        for name in ("mu", "alpha2", "zeta2", "beta2"):
            if np.asarray(getattr(self, name)).size != j:
                out.append(f"{name} needs {j} values for example {self.example}")
        for name in ("lam", "m", "theta", "rho"):
            if np.asarray(getattr(self, name)).shape[-1] != j:
                out.append(f"{name} needs {j} values per state for example {self.example}")
        if len(self.prices.initial) != j:
            out.append(f"prices need {j} entries")
        if self.constant_prices and len(self.constant_prices) != j:
            out.append(f"constant prices need {j} entries")
        if self.region.dimension != j:
            out.append(f"capacity region has dimension {self.region.dimension}, expected {j}")
        for b in self.baselines:
            try:
                check_baseline(self.example, b)
            except ExperimentError as e:
                out.append(str(e))
        return out

    def diffusion_params(self) -> DiffusionParams:
        return DiffusionParams(self.lam, self.m, self.mu, self.alpha2, self.zeta2, self.beta2, self.theta, self.rho)

    def cost_spec(self) -> DualCostSpec:
        return DualCostSpec(EXAMPLE_KINDS[: self.num_users], tuple(np.asarray(self.mu, dtype=float)))

    def const_prices(self) -> np.ndarray:
        if self.constant_prices:
            return np.asarray(self.constant_prices, dtype=float)
        return np.ones(self.num_users)


def check_baseline(example: int, baseline: str) -> None:
    if baseline not in BASELINES:
        raise ExperimentError(f"unknown baseline {baseline!r}; expected one of {BASELINES}")
    if example == 1 and baseline == "pooling":
        raise ExperimentError("random pooling needs three users (example 2)")
    if example == 2 and baseline in ("2dqueue", "arbitrary"):
        raise ExperimentError(f"baseline {baseline!r} needs exactly two users (example 1)")


# -------------------------------------------------------------- baselines

def arbitrary_price(q, lower) -> np.ndarray:
    """Fixed decreasing price curves of the two queues, floored at ``lower``.

    Works elementwise on arrays whose last axis holds the two users.
    """
    q = np.asarray(q, dtype=float)
    out = np.empty_like(q)
    out[..., 0] = lower[0] + 20.0 / (0.05 + np.sqrt(q[..., 0]))
    out[..., 1] = lower[1] + 30.0 / (0.1 + np.sqrt(q[..., 1]))
    return out


def random_pooling_select(u: float) -> tuple[int, int]:
    """Served pair (1-based) for a uniform draw ``u``."""
    if not 0.0 <= u <= 1.0:
        raise ExperimentError("u must lie in [0, 1]")
    if u < 1.0 / 3.0:
        k = 0
    elif u < 2.0 / 3.0:
        k = 1
    else:
        k = 2
    return tuple(x + 1 for x in PAIRS[k])


def total_cost(cost_spec: DualCostSpec, P, Q, rho) -> np.ndarray:
    """Vectorized total dual cost over the leading axes of ``P`` and ``Q``."""
    out = np.zeros(np.shape(Q)[:-1])
    for j, (kind, mu) in enumerate(zip(cost_spec.kinds, cost_spec.mu)):
        pq = P[..., j] * Q[..., j]
        c = rho[..., j]
        if kind == PROP_FAIR:
            out = out + pq * pq / (2.0 * mu * c)
        else:
            out = out + 2.0 * pq * pq * pq / (3.0 * mu * c * c * c)
    return out


# ------------------------------------------------------------- replications

def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def _replication_inputs(cfg: ExperimentConfig, rep: int):
    rng = replication_rng(cfg.seed, rep)
    grid = np.linspace(0.0, cfg.horizon, cfg.steps + 1)
    if cfg.env is not None:
        states = states_on_grid(sample_path(cfg.env, cfg.horizon, rng), grid)
    else:
        states = np.zeros(cfg.steps + 1, dtype=np.int64)
    noise = Noise.draw(rng, cfg.steps, cfg.num_users, cfg.dt)
    return states, noise


def replication_paths(cfg: ExperimentConfig, baseline: str, rep: int, backend=None):
    """(dynamic path, baseline path) of one replication."""
    check_baseline(cfg.example, baseline)
    params = cfg.diffusion_params()
    states, noise = _replication_inputs(cfg, rep)
    dyn = run_kernel(cfg.example, "game", params, states, noise, cfg.dt, cfg.prices, backend=backend)
    if baseline == "self":
        return dyn, dyn
    if baseline == "constant":
        base = run_kernel(cfg.example, "constant", params, states, noise, cfg.dt, cfg.prices,
                          cfg.const_prices(), backend=backend)
    elif baseline == "pooling":
        base = run_kernel(2, "pooling", params, states, noise, cfg.dt, cfg.prices, backend=backend)
    elif baseline == "2dqueue":
        base = run_kernel(1, "twod", params, states, noise, cfg.dt, None, cfg.const_prices(), backend=backend)
    else:
        P = arbitrary_price(dyn.Qhat, cfg.prices.lower)
        rho = params.rho[states]
        cost = total_cost(cfg.cost_spec(), P, dyn.Qhat, rho)
        base = RdrsPath(dyn.grid, dyn.W, dyn.Y, dyn.X, dyn.Qhat, P, dyn.selected, cost, 0)
    return dyn, base


@dataclass
class _Chunk:
    count: int
    mean: np.ndarray
    m2: np.ndarray
    sum_dyn: np.ndarray
    sum_base: np.ndarray
    spread: np.ndarray
    nonconverged: int


def _run_chunk(cfg, baseline, reps, reverse, backend) -> _Chunk:
    diffs, dyn_costs, base_costs = [], [], []
    spread = np.zeros(cfg.steps + 1)
    bad = 0
    for rep in reps:
        dyn, base = replication_paths(cfg, baseline, rep, backend)
        d = base.cost - dyn.cost if reverse else dyn.cost - base.cost
        diffs.append(d)
        dyn_costs.append(dyn.cost)
        base_costs.append(base.cost)
        spread = np.maximum(spread, dyn.Phat.max(axis=1) - dyn.Phat.min(axis=1))
        bad += dyn.nonconverged + (base.nonconverged if base is not dyn else 0)
    stack = np.vstack(diffs)
    mean = stack.mean(axis=0)
    m2 = ((stack - mean) ** 2).sum(axis=0)
    return _Chunk(len(diffs), mean, m2, np.vstack(dyn_costs).sum(axis=0), np.vstack(base_costs).sum(axis=0),
                  spread, bad)


@dataclass
class MtcdSeries:
    t: np.ndarray
    mtcd: np.ndarray
    stderr: np.ndarray
    mean_cost_dynamic: np.ndarray
    mean_cost_baseline: np.ndarray
    price_spread: np.ndarray
    paths: int
    baseline: str
    example: int
    nonconverged: int = 0
    meta: dict = field(default_factory=dict)


def run_comparison(cfg: ExperimentConfig, baseline: str, threads: int = 1, reverse: bool = False,
                   backend=None, chunk: int = CHUNK) -> MtcdSeries:
    """Mean total cost difference (dynamic minus baseline) on the time grid.

    ``reverse=True`` reports baseline minus dynamic.  ``price_spread`` is, per
    grid time, the largest gap between any two users' dynamic prices over all
    paths.
    """
    check_baseline(cfg.example, baseline)
    chunks = [range(s, min(s + chunk, cfg.paths)) for s in range(0, cfg.paths, chunk)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda r: _run_chunk(cfg, baseline, r, reverse, backend), chunks))
    else:
        parts = [_run_chunk(cfg, baseline, r, reverse, backend) for r in chunks]

    # combine chunk statistics in chunk order
    n = 0
    mean = np.zeros(cfg.steps + 1)
    m2 = np.zeros(cfg.steps + 1)
    sum_dyn = np.zeros(cfg.steps + 1)
    sum_base = np.zeros(cfg.steps + 1)
    spread = np.zeros(cfg.steps + 1)
    bad = 0
    for part in parts:
        tot = n + part.count
        delta = part.mean - mean
        mean = mean + delta * (part.count / tot)
        m2 = m2 + part.m2 + delta * delta * (n * part.count / tot)
        n = tot
        sum_dyn = sum_dyn + part.sum_dyn
        sum_base = sum_base + part.sum_base
        spread = np.maximum(spread, part.spread)
        bad += part.nonconverged
    if n > 1:
        stderr = np.sqrt(m2 / (n - 1)) / math.sqrt(n)
    else:
        stderr = np.zeros_like(mean)
    t = np.linspace(0.0, cfg.horizon, cfg.steps + 1)
    return MtcdSeries(t, mean, stderr, sum_dyn / n, sum_base / n, spread, n, baseline, cfg.example, bad)


def write_mtcd_csv(series: MtcdSeries, path) -> None:
    """CSV with header ``t,mtcd,stderr,mean_cost_dynamic,mean_cost_baseline``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mtcd", "stderr", "mean_cost_dynamic", "mean_cost_baseline"])
        for row in zip(series.t, series.mtcd, series.stderr, series.mean_cost_dynamic, series.mean_cost_baseline):
            w.writerow([repr(float(x)) for x in row])


def write_path_csv(path_obj: RdrsPath, path) -> None:
    """Grid trace of one replication: t, W, Y, then Q_j and P_j per user, selection and cost."""
    j = path_obj.Qhat.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "W", "Y"] + [f"Q{k + 1}" for k in range(j)] + [f"P{k + 1}" for k in range(j)]
                   + ["selected", "cost"])
        for i in range(path_obj.grid.size):
            w.writerow([repr(float(path_obj.grid[i])), repr(float(path_obj.W[i])), repr(float(path_obj.Y[i]))]
                       + [repr(float(x)) for x in path_obj.Qhat[i]] + [repr(float(x)) for x in path_obj.Phat[i]]
                       + [int(path_obj.selected[i]), repr(float(path_obj.cost[i]))])


# ------------------------------------------------------------------- nonce

def _canon(x):
    if isinstance(x, (float, np.floating)):
        return float(x).hex()
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, np.ndarray):
        return [_canon(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_canon(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _canon(v) for k, v in x.items()}
    return x


def derive_nonce(decision: dict) -> bytes:
    """SHA-256 of a canonical JSON encoding of a policy decision.

    Floats are encoded by their exact hexadecimal form, keys are sorted.
    """
    required = ("prices", "queues", "rates", "node", "step")
    missing = [k for k in required if k not in decision]
    if missing:
        raise ExperimentError(f"decision lacks {missing}")
    blob = json.dumps(_canon({k: decision[k] for k in required}), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).digest()


# -------------------------------------------------------- DES-side checks

def psi_excess(trace, cost_spec: DualCostSpec, rho, r: float) -> tuple[float, float]:
    """Largest rise of the fluid-scaled Lyapunov function above its running
    minimum, and its initial value.

    Prices are taken from the trace; queues are fluid scaled by ``r**2``.
    Event records within one environment sojourn are compared; the running
    minimum restarts at each environment change.
    """
    rho = np.asarray(rho, dtype=float)
    psi = np.array([lyapunov_psi(cost_spec, p, q / (r * r), rho) for p, q in zip(trace.P, trace.Q)])
    worst = 0.0
    run_min = psi[0]
    for k in range(1, psi.size):
        if trace.states[k] != trace.states[k - 1]:
            run_min = psi[k]
            continue
        run_min = min(run_min, psi[k])
        worst = max(worst, psi[k] - run_min)
    return worst, float(psi[0])
