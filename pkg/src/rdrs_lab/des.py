"""Discrete-event simulation of the physical multi-user queueing system.

Arrivals come in batches whose interarrival clock runs at the
environment-dependent rate ``lam_j(state)``; packets are served head of line
at the policy's work rate.  Queue counts, departures and cumulative service
are tracked exactly so that ``Q = Q0 + A - D`` and ``D = S(T)`` hold at every
event.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .env import EnvPath, MarkovEnvSpec, sample_path, scale_holding_rates
from .game import Example1Params, PriceMap, ex1_resolve, waterfill_closed, FP_TOL, FP_MAX_ITER, Q_EPS


class DesError(ValueError):
    pass


class PolicyViolation(RuntimeError):
    def __init__(self, rates, state):
        super().__init__(f"policy rates {list(rates)} fall outside the capacity region of state {state}")
        self.rates = rates


# ------------------------------------------------------------ distributions

def draw_unit(rng, scv: float) -> float:
    """Mean-one draw with squared coefficient of variation ``scv``: gamma with
    shape ``1/scv``, or exactly 1 when ``scv == 0``."""
    if scv == 0:
        return 1.0
    return float(rng.gamma(1.0 / scv, scv))


@dataclass(frozen=True)
class BatchLaw:
    """Integer batch-size law matched to a mean and a squared coefficient of variation.

    ``kind`` is ``"deterministic"``, ``"geometric"`` (``shift`` plus a
    geometric count on 0, 1, ... with success probability ``prob``),
    ``"two_point"`` (``low`` or ``high``, the latter with probability ``prob``)
    or ``"three_point"`` (``low``, ``low + 1`` with probability ``mid`` or
    ``high`` with probability ``prob``).
    """

    kind: str
    low: int = 0
    high: int = 0
    prob: float = 0.0
    shift: int = 0
    mid: float = 0.0

    @classmethod
    def match(cls, mean: float, scv: float) -> "BatchLaw":
        if mean < 0 or scv < 0:
            raise DesError("batch mean and SCV must be nonnegative")
        var = scv * mean * mean
        if var == 0:
            if abs(mean - round(mean)) > 1e-9:
                raise DesError(f"a zero-variance integer batch needs an integer mean, got {mean}")
            return cls("deterministic", low=int(round(mean)))
        if mean == 0:
            raise DesError("a batch with mean 0 cannot have positive variance")
        g = 0.5 * (-1.0 + math.sqrt(1.0 + 4.0 * var))
        shift = mean - g
        tol = 1e-12 * max(1.0, mean)
        if shift > -tol and abs(shift - round(shift)) <= tol:
            return cls("geometric", prob=1.0 / (1.0 + g), shift=int(round(shift)))
        a = math.floor(mean)
        if a == mean:
            a -= 1
        while a >= 0:
            b = mean + var / (mean - a)
            if abs(b - round(b)) <= 1e-12 * max(1.0, b):
                b = int(round(b))
                return cls("two_point", low=a, high=b, prob=(mean - a) / (b - a))
            a -= 1
        return cls._three_point(mean, var)

    @classmethod
    def _three_point(cls, mean, var):
        # support {a, a+1, a+d}; frac is the mean's offset above a
        a = math.floor(mean)
        if a == mean:
            a -= 1
        frac = mean - a
        excess = var - frac * (1.0 - frac)
        if excess < -1e-12:
            raise DesError(f"variance {var} is below the integer minimum for mean {mean}")
        excess = max(excess, 0.0)
        d = max(2, math.ceil(1.0 + excess / frac))
        p_high = (var + frac * frac - frac) / (d * d - d)
        p_mid = frac - d * p_high
        return cls("three_point", low=a, high=a + d, prob=p_high, mid=max(p_mid, 0.0))

    def draw(self, rng) -> int:
        if self.kind == "deterministic":
            return self.low
        if self.kind == "geometric":
            # numpy's geometric counts trials (>= 1)
            return self.shift + int(rng.geometric(self.prob)) - 1
        if self.kind == "three_point":
            u = rng.random()
            if u < self.prob:
                return self.high
            return self.low + 1 if u < self.prob + self.mid else self.low
        return self.high if rng.random() < self.prob else self.low

    @property
    def mean(self) -> float:
        if self.kind == "deterministic":
            return float(self.low)
        if self.kind == "geometric":
            return self.shift + (1 - self.prob) / self.prob
        if self.kind == "three_point":
            return self.low + self.mid + self.prob * (self.high - self.low)
        return self.low + self.prob * (self.high - self.low)

    @property
    def variance(self) -> float:
        if self.kind == "deterministic":
            return 0.0
        if self.kind == "geometric":
            return (1 - self.prob) / self.prob ** 2
        if self.kind == "three_point":
            d = self.high - self.low
            m1 = self.mid + self.prob * d
            return self.mid + self.prob * d * d - m1 * m1
        return self.prob * (1 - self.prob) * (self.high - self.low) ** 2


# ---------------------------------------------------------------- specs

@dataclass(frozen=True)
class ArrivalSpec:
    lam: np.ndarray  # (K, J) batch rates
    m: np.ndarray  # (K, J) mean batch sizes
    alpha2: np.ndarray  # (J,)
    zeta2: np.ndarray  # (J,)

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.lam, dtype=float))
        m = np.atleast_2d(np.asarray(self.m, dtype=float))
        if m.shape != lam.shape:
            m = np.broadcast_to(m, lam.shape).copy()
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "alpha2", np.asarray(self.alpha2, dtype=float).reshape(-1))
        object.__setattr__(self, "zeta2", np.asarray(self.zeta2, dtype=float).reshape(-1))
        if np.any(lam <= 0):
            raise DesError("arrival rates must be positive")
        if np.any(self.alpha2 < 0) or np.any(self.zeta2 < 0) or np.any(m < 0):
            raise DesError("means and SCVs must be nonnegative")
        laws = [[BatchLaw.match(m[s, j], self.zeta2[j]) for j in range(lam.shape[1])] for s in range(lam.shape[0])]
        object.__setattr__(self, "_laws", laws)

    @property
    def num_users(self) -> int:
        return self.lam.shape[1]

    def batch_law(self, state: int, j: int) -> BatchLaw:
        """Law in 1-based ``state`` for 0-based user ``j``."""
        return self._laws[state - 1][j]


@dataclass(frozen=True)
class ServiceSpec:
    mu: np.ndarray
    beta2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float).reshape(-1))
        object.__setattr__(self, "beta2", np.asarray(self.beta2, dtype=float).reshape(-1))
        if np.any(self.mu <= 0) or np.any(self.beta2 < 0):
            raise DesError("need mu > 0 and beta2 >= 0")

    def draw_length(self, rng, j: int) -> float:
        return draw_unit(rng, self.beta2[j]) / self.mu[j]


@dataclass(frozen=True)
class ScalingParams:
    r: float
    theta: np.ndarray  # (K, J)

    def __post_init__(self):
        if not self.r > 0:
            raise DesError("r must be positive")
        object.__setattr__(self, "theta", np.atleast_2d(np.asarray(self.theta, dtype=float)))


def heavy_traffic_rates(lam, m, r: float, theta) -> np.ndarray:
    """Arrival rates ``lam + theta / (r m)`` approaching ``lam`` as ``r`` grows."""
    if not r > 0:
        raise DesError("r must be positive")
    lam = np.asarray(lam, dtype=float)
    out = lam + np.asarray(theta, dtype=float) / (r * np.asarray(m, dtype=float))
    if np.any(out <= 0):
        raise DesError(f"heavy-traffic rates must stay positive, got {out.tolist()}")
    return out


# ----------------------------------------------------------------- arrivals

def _state_schedule(env_path: EnvPath | None, horizon: float):
    if env_path is None:
        return [0.0], [1]
    return list(env_path.jump_times), list(env_path.states)


def sample_tsrrp(spec: ArrivalSpec, env_path: EnvPath | None, horizon: float, rng):
    """Batch arrival events ``(time, user, batch_size)`` on ``(0, horizon]``.

    Each user's renewal clock draws a mean-one residual and consumes it at
    rate ``lam_j(state)``, so a sojourn in a faster state shortens the wait.
    Users are sampled one after the other from ``rng`` and merged by time.
    """
    if not horizon > 0:
        raise DesError("horizon must be positive")
    jt, st = _state_schedule(env_path, horizon)
    events = []
    for j in range(spec.num_users):
        t = 0.0
        seg = 0
        resid = draw_unit(rng, spec.alpha2[j])
        while True:
            end = jt[seg + 1] if seg + 1 < len(jt) else math.inf
            rate = spec.lam[st[seg] - 1, j]
            need = resid / rate
            if t + need <= end:
                t += need
                if t > horizon:
                    break
                events.append((t, j, spec.batch_law(st[seg], j).draw(rng)))
                resid = draw_unit(rng, spec.alpha2[j])
            else:
                resid -= rate * (end - t)
                t = end
                seg += 1
                if t > horizon:
                    break
    events.sort(key=lambda e: (e[0], e[1]))
    return events


# ---------------------------------------------------------------- policies

class WaterFillPolicy:
    """Utility-maximizing rates over per-user caps and a sum cap.

    Only nonempty users (``pq > 0``) are served; when every queue is empty
    the nominal rates ``rho`` are reported but no work is done.
    """

    def __init__(self, kinds, caps, sum_cap, rho):
        self.kinds = tuple(kinds)
        self.caps = np.asarray(caps, dtype=float)
        self.sum_cap = float(sum_cap)
        self.rho = np.asarray(rho, dtype=float)

    def contains(self, c, state=1) -> bool:
        tol = 1e-9 * max(1.0, self.sum_cap)
        return bool(np.all(c >= -tol) and np.all(c <= self.caps + tol) and c.sum() <= self.sum_cap + tol)

    def __call__(self, pq, state=1):
        idx = [j for j in range(len(pq)) if pq[j] > 0]
        c = np.zeros(len(pq))
        if not idx:
            return self.rho.copy()
        caps = [self.caps[j] for j in idx]
        if sum(caps) <= self.sum_cap:
            for j in idx:
                c[j] = self.caps[j]
            return c
        sub = waterfill_closed([self.kinds[j] for j in idx], [float(pq[j]) for j in idx], caps, self.sum_cap)
        for j, x in zip(idx, sub):
            c[j] = x
        return c


class ConstantPrices:
    def __init__(self, p):
        self.p = np.asarray(p, dtype=float)

    def reset(self):
        pass

    def __call__(self, q, w, state=1):
        return self.p


class Example1Prices:
    """Two-user price fixed point at the current workload, lagged between events."""

    def __init__(self, mu, c, price_map: PriceMap, tol=FP_TOL, max_iter=FP_MAX_ITER, eps=Q_EPS):
        self.params = Example1Params(float(mu[0]), float(mu[1]), float(c[0]), float(c[1]))
        self.map = price_map
        self.tol, self.max_iter, self.eps = tol, max_iter, eps
        self.reset()

    def reset(self):
        self.p = [float(x) for x in self.map.initial]

    def __call__(self, q, w, state=1):
        pr, lo, hi = self.params, self.map.lower, self.map.upper
        _, _, p0, p1, _ = ex1_resolve(w, self.p[0], self.p[1], pr.mu1, pr.mu2, pr.c1, pr.c2,
                                      lo[0], lo[1], hi[0], hi[1], self.tol, self.max_iter, self.eps)
        self.p = [p0, p1]
        return np.array(self.p)


# ------------------------------------------------------------------- engine

@dataclass
class SystemTrace:
    times: np.ndarray
    kinds: list
    users: np.ndarray
    Q: np.ndarray
    A: np.ndarray
    D: np.ndarray
    T: np.ndarray
    VD: np.ndarray  # cumulative length of departed packets
    Vnext: np.ndarray  # VD plus the head packet's length (inf when empty)
    W: np.ndarray
    P: np.ndarray
    rates: np.ndarray
    states: np.ndarray
    Q0: np.ndarray
    mu: np.ndarray
    horizon: float

    def check_identities(self) -> list[str]:
        problems = []
        if np.any(self.Q != self.Q0 + self.A - self.D):
            problems.append("queue balance Q = Q0 + A - D violated")
        if np.any(self.Q < 0):
            problems.append("negative queue")
        if np.any(self.T < self.VD) or np.any(self.T >= self.Vnext):
            problems.append("D = S(T) violated")
        w = (self.Q / self.mu).sum(axis=1)
        if np.any(np.abs(w - self.W) > 1e-9 * np.maximum(1.0, w)):
            problems.append("workload identity violated")
        return problems

    def at(self, t):
        """Index of the event record in force at times ``t``."""
        return np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") - 1


def _head_length(services, rng, j, vd):
    # a length below the spacing of the running total would never register in T
    return max(services.draw_length(rng, j), float(np.spacing(vd)))


def simulate_queueing(arrivals: ArrivalSpec, services: ServiceSpec, policy, price_map, env_path: EnvPath | None,
                      horizon: float, rng, q0=None, events=None, check_policy: bool = True) -> SystemTrace:
    """Next-event simulation on ``[0, horizon]``.

    ``policy(pq, state)`` returns work rates, ``price_map(Q, W, state)``
    returns prices.  Packet lengths are drawn when a packet reaches the head
    of its queue.  ``events`` may carry pre-sampled arrivals.
    """
    nj = arrivals.num_users
    mu = services.mu
    if events is None:
        events = sample_tsrrp(arrivals, env_path, horizon, rng)
    jt, st = _state_schedule(env_path, horizon)
    seg = 0
    state = st[0]
    Q = np.zeros(nj, dtype=np.int64) if q0 is None else np.asarray(q0, dtype=np.int64).copy()
    Q0 = Q.copy()
    A = np.zeros(nj, dtype=np.int64)
    D = np.zeros(nj, dtype=np.int64)
    T = np.zeros(nj)
    VD = np.zeros(nj)
    head = np.full(nj, math.inf)
    rem = np.zeros(nj)
    for j in range(nj):
        if Q[j] > 0:
            head[j] = _head_length(services, rng, j, VD[j])
            rem[j] = head[j]
    if hasattr(price_map, "reset"):
        price_map.reset()

    rec = {k: [] for k in ("t", "kind", "user", "Q", "A", "D", "T", "VD", "Vn", "W", "P", "c", "s")}

    def decide():
        w = float(np.sum(Q / mu))
        p = np.asarray(price_map(Q, w, state), dtype=float)
        c = np.asarray(policy(p * Q, state), dtype=float)
        if check_policy and hasattr(policy, "contains") and not policy.contains(c, state):
            raise PolicyViolation(c, state)
        c = np.where(Q > 0, c, 0.0)
        return w, p, c

    def record(t, kind, user, w, p, c):
        rec["t"].append(t)
        rec["kind"].append(kind)
        rec["user"].append(user)
        rec["Q"].append(Q.copy())
        rec["A"].append(A.copy())
        rec["D"].append(D.copy())
        rec["T"].append(T.copy())
        rec["VD"].append(VD.copy())
        rec["Vn"].append(VD + head)
        rec["W"].append(w)
        rec["P"].append(p.copy())
        rec["c"].append(c.copy())
        rec["s"].append(state)

    t = 0.0
    w, p, c = decide()
    record(t, "init", -1, w, p, c)
    k_arr = 0
    while True:
        t_arr = events[k_arr][0] if k_arr < len(events) else math.inf
        t_env = jt[seg + 1] if seg + 1 < len(jt) else math.inf
        t_dep = math.inf
        j_dep = -1
        for j in range(nj):
            if Q[j] > 0 and c[j] > 0:
                td = t + max(rem[j], 0.0) / c[j]
                if td < t_dep:
                    t_dep, j_dep = td, j
        t_next = min(t_arr, t_env, t_dep)
        if t_next > horizon:
            break
        dt = t_next - t
        for j in range(nj):
            if Q[j] > 0 and c[j] > 0:
                rem[j] -= c[j] * dt
                # effective service on the head packet, kept below its completion
                T[j] = min(VD[j] + (head[j] - rem[j]), np.nextafter(VD[j] + head[j], -math.inf))
        t = t_next
        if t_dep == t_next:
            j = j_dep
            Q[j] -= 1
            D[j] += 1
            VD[j] = VD[j] + head[j]
            T[j] = VD[j]
            if Q[j] > 0:
                head[j] = _head_length(services, rng, j, VD[j])
                rem[j] = head[j]
            else:
                head[j] = math.inf
                rem[j] = 0.0
            kind, user = "departure", j
        elif t_arr == t_next:
            _, j, b = events[k_arr]
            k_arr += 1
            if Q[j] == 0 and b > 0:
                head[j] = _head_length(services, rng, j, VD[j])
                rem[j] = head[j]
            Q[j] += b
            A[j] += b
            kind, user = "arrival", j
        else:
            seg += 1
            state = st[seg]
            kind, user = "env", -1
        w, p, c = decide()
        record(t, kind, user, w, p, c)

    return SystemTrace(
        times=np.array(rec["t"]),
        kinds=rec["kind"],
        users=np.array(rec["user"], dtype=np.int64),
        Q=np.array(rec["Q"]),
        A=np.array(rec["A"]),
        D=np.array(rec["D"]),
        T=np.array(rec["T"]),
        VD=np.array(rec["VD"]),
        Vnext=np.array(rec["Vn"]),
        W=np.array(rec["W"]),
        P=np.array(rec["P"]),
        rates=np.array(rec["c"]),
        states=np.array(rec["s"], dtype=np.int64),
        Q0=Q0,
        mu=np.asarray(mu, dtype=float),
        horizon=float(horizon),
    )


# ----------------------------------------------------------------- scalings

def _scaled(trace: SystemTrace, r: float, grid, power: int):
    if not r > 0:
        raise DesError("r must be positive")
    grid = np.asarray(grid, dtype=float)
    real = r * r * grid
    if grid.size and real.max() > trace.horizon * (1 + 1e-12):
        raise IndexError(f"trace horizon {trace.horizon} is shorter than r^2 t_max = {real.max()}")
    idx = trace.at(real)
    div = r ** power
    return trace.Q[idx] / div, trace.W[idx] / div


def diffusion_scale(trace: SystemTrace, r: float, grid):
    """``(Q(r^2 t)/r, W(r^2 t)/r)`` evaluated on ``grid``."""
    return _scaled(trace, r, grid, 1)


def fluid_scale(trace: SystemTrace, r: float, grid):
    """``(Q(r^2 t)/r^2, W(r^2 t)/r^2)`` evaluated on ``grid``."""
    return _scaled(trace, r, grid, 2)


def fluid_sup(trace: SystemTrace, r: float, t_max: float = 1.0) -> float:
    """Supremum over fluid times in ``[0, t_max]`` of the scaled total queue."""
    cut = np.searchsorted(trace.times, r * r * t_max, side="right")
    return float(trace.Q[:cut].sum(axis=1).max()) / (r * r)


def write_trace_csv(trace: SystemTrace, path) -> None:
    """One row per event and user: t, user, event_kind, queue_len, workload, env_state."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "user", "event_kind", "queue_len", "workload", "env_state"])
        for e in range(trace.times.size):
            for j in range(trace.Q.shape[1]):
                w.writerow([repr(float(trace.times[e])), j + 1, trace.kinds[e], int(trace.Q[e, j]),
                            repr(float(trace.W[e])), int(trace.states[e])])


@dataclass
class HeavyTrafficSystem:
    """Bundle that builds the r-th system of a heavy-traffic sequence."""

    lam: np.ndarray
    m: np.ndarray
    mu: np.ndarray
    alpha2: np.ndarray
    zeta2: np.ndarray
    beta2: np.ndarray
    theta: np.ndarray
    env: MarkovEnvSpec | None = None
    extra: dict = field(default_factory=dict)

    def arrivals(self, r: float) -> ArrivalSpec:
        lam = np.atleast_2d(np.asarray(self.lam, dtype=float))
        m = np.broadcast_to(np.atleast_2d(np.asarray(self.m, dtype=float)), lam.shape)
        theta = np.broadcast_to(np.atleast_2d(np.asarray(self.theta, dtype=float)), lam.shape)
        return ArrivalSpec(heavy_traffic_rates(lam, m, r, theta), m, self.alpha2, self.zeta2)

    def services(self) -> ServiceSpec:
        return ServiceSpec(self.mu, self.beta2)

    def env_path(self, r: float, horizon: float, rng):
        if self.env is None:
            return None
        return sample_path(scale_holding_rates(self.env, r), horizon, rng)

    def nominal_rates(self) -> np.ndarray:
        """Work rates ``lam m / mu`` (state 1)."""
        lam = np.atleast_2d(np.asarray(self.lam, dtype=float))[0]
        m = np.broadcast_to(np.atleast_2d(np.asarray(self.m, dtype=float)), np.atleast_2d(self.lam).shape)[0]
        return lam * m / np.asarray(self.mu, dtype=float)


__all__ = [
    "ArrivalSpec", "ServiceSpec", "ScalingParams", "SystemTrace", "BatchLaw", "WaterFillPolicy",
    "ConstantPrices", "Example1Prices", "HeavyTrafficSystem", "PolicyViolation", "DesError",
    "sample_tsrrp", "simulate_queueing", "heavy_traffic_rates", "diffusion_scale", "fluid_scale",
    "fluid_sup", "write_trace_csv",
]
