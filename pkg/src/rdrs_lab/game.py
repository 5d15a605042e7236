"""Utilities, dual costs, equilibrium solvers and price maps.

Users' utilities depend on the product ``pq`` (price times queue) and the
service rate ``c``.  Two families are supported:

* ``prop_fair``: ``pq * ln(c)``
* ``min_potential_delay``: ``-(pq)**2 / c**2``

The dual cost of a user is ``(1/mu) * integral_0^{pq} dU/dc(x, c) dx``.

The scalar helpers prefixed with ``ex1_``/``ex2_`` are written with plain
float arithmetic in a fixed operation order; the compiled kernel mirrors them
so both backends agree bit for bit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .capacity import CapacityRegion, contains, face_restrict, insert_zeros

PROP_FAIR = "prop_fair"
MIN_DELAY = "min_potential_delay"
KINDS = (PROP_FAIR, MIN_DELAY)

# user roles in the worked examples: users 1 and 3 proportionally fair, user 2 delay-driven
EXAMPLE_KINDS = (PROP_FAIR, MIN_DELAY, PROP_FAIR)

Q_EPS = 1e-9
FP_TOL = 1e-8
FP_MAX_ITER = 100

# candidate pairs in tie-break order, 0-based
PAIRS = ((0, 1), (0, 2), (1, 2))


class GameDomainError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


def _check_kind(kind: str) -> None:
    if kind not in KINDS:
        raise GameDomainError(f"unknown utility kind {kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class UtilitySpec:
    kinds: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(self.kinds))
        for k in self.kinds:
            _check_kind(k)


@dataclass(frozen=True)
class DualCostSpec:
    kinds: tuple[str, ...]
    mu: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        if len(self.kinds) != len(self.mu):
            raise GameDomainError("one service rate per user")
        for k in self.kinds:
            _check_kind(k)
        if any(not m > 0 for m in self.mu):
            raise GameDomainError("service rates must be positive")


@dataclass(frozen=True)
class PriceMap:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    initial: tuple[float, ...]

    def __post_init__(self):
        for name in ("lower", "upper", "initial"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if not len(self.lower) == len(self.upper) == len(self.initial):
            raise GameDomainError("price bounds and initial prices must have equal length")
        for j, (lo, hi, p0) in enumerate(zip(self.lower, self.upper, self.initial), start=1):
            if lo < 0 or hi < lo:
                raise GameDomainError(f"user {j}: need 0 <= lower <= upper, got [{lo}, {hi}]")
            if not p0 > 0:
                raise GameDomainError(f"user {j}: initial price must be positive")


@dataclass(frozen=True)
class Example1Params:
    mu1: float
    mu2: float
    c1: float
    c2: float


@dataclass(frozen=True)
class Example2Params:
    mu: tuple[float, float, float]
    c: tuple[float, float, float]


@dataclass
class EquilibriumResult:
    selected_users: tuple[int, ...]
    q_star: np.ndarray
    p_star: np.ndarray
    c_star: np.ndarray
    total_cost: float
    per_pair_costs: dict = field(default_factory=dict)


# ---------------------------------------------------------------- scalar forms

def utility_eval(kind: str, pq: float, c: float) -> float:
    _check_kind(kind)
    if not c > 0:
        raise GameDomainError(f"rate must be positive, got {c}")
    if kind == PROP_FAIR:
        return pq * math.log(c)
    return -(pq * pq) / (c * c)


def utility_dc(kind: str, pq: float, c: float) -> float:
    """Partial derivative of the utility in ``c``."""
    if kind == PROP_FAIR:
        return pq / c
    return 2.0 * pq * pq / (c * c * c)


def dual_cost_eval(kind: str, p: float, q: float, c: float, mu: float) -> float:
    _check_kind(kind)
    if not c > 0:
        raise GameDomainError(f"rate must be positive, got {c}")
    if q < 0 or p < 0:
        raise GameDomainError("price and queue must be nonnegative")
    return _cost(kind == PROP_FAIR, p * q, c, mu)


def _cost(prop_fair: bool, pq: float, c: float, mu: float) -> float:
    if prop_fair:
        return pq * pq / (2.0 * mu * c)
    return 2.0 * pq * pq * pq / (3.0 * mu * c * c * c)


def clamp(x: float, lo: float, hi: float) -> float:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def clamp_price(raw, price_map: PriceMap) -> np.ndarray:
    return np.array([clamp(float(x), lo, hi) for x, lo, hi in zip(raw, price_map.lower, price_map.upper)])


def lyapunov_psi(costs: DualCostSpec, p, q, rho) -> float:
    total = 0.0
    for kind, mu, pj, qj, rj in zip(costs.kinds, costs.mu, p, q, rho):
        if qj > 0:
            total += _cost(kind == PROP_FAIR, pj * qj, rj, mu)
    return total


# ------------------------------------------------------------ example 1 forms

def ex1_queue(p1, p2, w, mu1, mu2, c1, c2):
    """Cost-minimizing split of workload ``w`` between a proportionally fair
    user (index 1) and a delay user (index 2)."""
    if w <= 0.0:
        return 0.0, 0.0
    m = mu1 * w
    if p2 <= 0.0:
        return 0.0, mu2 * w
    if p1 <= 0.0:
        return m, 0.0
    a = p1 * p1 * (c2 * c2 * c2) / (2.0 * (p2 * p2 * p2) * c1 * mu2 * mu2)
    x = 0.5 * (2.0 * w / mu1 + a) * mu1 * mu1
    disc = (x - m) * (x + m)
    if disc < 0.0:
        disc = 0.0
    # small root of q^2 - 2xq + m^2, written without cancellation
    q1 = m * m / (x + math.sqrt(disc))
    if q1 > m:
        q1 = m
    q2 = mu2 * (w - q1 / mu1)
    if q2 < 0.0:
        q2 = 0.0
    return q1, q2


def ex1_kappa(q1, w, mu1, mu2, c1, c2, eps=Q_EPS):
    if q1 < eps:
        q1 = eps
    d = mu1 * w - q1
    k = (2.0 * c1 * mu2 * mu2 / (c2 * c2 * c2)) * (d * d) / (mu1 * mu1 * q1)
    if k < 0.0:
        k = 0.0
    return k


def solve_example1_queue(p, w: float, params: Example1Params) -> np.ndarray:
    p1, p2 = float(p[0]), float(p[1])
    if w < 0:
        raise GameDomainError("workload must be nonnegative")
    return np.array(ex1_queue(p1, p2, float(w), params.mu1, params.mu2, params.c1, params.c2))


def kappa(q1: float, w: float, params: Example1Params, eps: float = Q_EPS) -> float:
    return ex1_kappa(float(q1), float(w), params.mu1, params.mu2, params.c1, params.c2, eps)


def price_example1(q1: float, w: float, params: Example1Params, eps: float = Q_EPS) -> np.ndarray:
    """Unclamped prices ``(kappa**2, kappa)``."""
    k = kappa(q1, w, params, eps)
    return np.array([k * k, k])


def example1_objective(q1, p, w, params: Example1Params):
    """Total dual cost along the workload constraint, as a function of q1."""
    q1 = np.asarray(q1, dtype=float)
    s = w - q1 / params.mu1
    c1 = (p[0] * q1) ** 2 / (2 * params.mu1 * params.c1)
    c2 = 2 * p[1] ** 3 * params.mu2 ** 2 / (3 * params.c2 ** 3) * s ** 3
    return c1 + c2


# ------------------------------------------------------------ example 2 forms

def ex2_pair13_queue(p1, p3, w, mu1, mu3, c1, c3):
    """Split between two proportionally fair users."""
    if w <= 0.0:
        return 0.0, 0.0
    m = mu1 * w
    num = p3 * p3 * mu3 * w / (mu1 * c3)
    den = p1 * p1 / (mu1 * c1) + p3 * p3 * mu3 / (mu1 * mu1 * c3)
    if den <= 0.0:
        q1 = 0.5 * m
    else:
        q1 = num / den
    if q1 > m:
        q1 = m
    if q1 < 0.0:
        q1 = 0.0
    q3 = mu3 * (w - q1 / mu1)
    if q3 < 0.0:
        q3 = 0.0
    return q1, q3


def ex2_kappa_hat(q1, w, mu1, mu3, c1, c3, eps=Q_EPS):
    if q1 < eps:
        q1 = eps
    k = mu3 * c1 / (q1 * c3) * (w - q1 / mu1)
    if k < 0.0:
        k = 0.0
    return k


def ex2_pair_costs(p1, p2, p3, w, mu1, mu2, mu3, c1, c2, c3):
    """Queue splits and total dual cost for the three candidate pairs.

    Returns a tuple ``((q_a, q_b, cost), ...)`` in pair order (1,2), (1,3), (2,3).
    """
    qa, qb = ex1_queue(p1, p2, w, mu1, mu2, c1, c2)
    cost12 = _cost(True, p1 * qa, c1, mu1) + _cost(False, p2 * qb, c2, mu2)
    qc, qd = ex2_pair13_queue(p1, p3, w, mu1, mu3, c1, c3)
    cost13 = _cost(True, p1 * qc, c1, mu1) + _cost(True, p3 * qd, c3, mu3)
    # user 3 plays the proportionally fair role against user 2
    qe, qf = ex1_queue(p3, p2, w, mu3, mu2, c3, c2)
    cost23 = _cost(False, p2 * qf, c2, mu2) + _cost(True, p3 * qe, c3, mu3)
    return (qa, qb, cost12), (qc, qd, cost13), (qf, qe, cost23)


def ex2_select(costs) -> int:
    best = 0
    for k in (1, 2):
        if costs[k][2] < costs[best][2]:
            best = k
    return best


def ex2_pair_prices(k, qa, w, mu, c, eps=Q_EPS):
    """Inverse prices for pair ``k`` given the first-listed proportionally fair
    user's queue ``qa`` (user 1 for pairs 0 and 1, user 3 for pair 2)."""
    if k == 0:
        kk = ex1_kappa(qa, w, mu[0], mu[1], c[0], c[1], eps)
        return kk * kk, kk
    if k == 1:
        kk = ex2_kappa_hat(qa, w, mu[0], mu[2], c[0], c[2], eps)
        return kk, math.sqrt(kk)
    kk = ex1_kappa(qa, w, mu[2], mu[1], c[2], c[1], eps)
    return kk, kk * kk


def solve_example2(p, w: float, params: Example2Params, eps: float = Q_EPS) -> EquilibriumResult:
    p1, p2, p3 = (float(x) for x in p)
    mu, c = params.mu, params.c
    costs = ex2_pair_costs(p1, p2, p3, float(w), *mu, *c)
    k = ex2_select(costs)
    a, b = PAIRS[k]
    q = np.zeros(3)
    q[a], q[b] = costs[k][0], costs[k][1]
    pa = q[2] if k == 2 else q[0]
    x, y = ex2_pair_prices(k, pa, float(w), mu, c, eps)
    p_star = np.array([p1, p2, p3])
    p_star[a], p_star[b] = x, y
    return EquilibriumResult(
        selected_users=(a + 1, b + 1),
        q_star=q,
        p_star=p_star,
        c_star=np.asarray(c, dtype=float),
        total_cost=costs[k][2],
        per_pair_costs={(i + 1, j + 1): costs[n][2] for n, (i, j) in enumerate(PAIRS)},
    )


# --------------------------------------------------------------- fixed points

def _close(a, b, tol):
    return abs(b - a) <= tol * (1.0 + abs(b))


def ex1_resolve(w, p_prev0, p_prev1, mu1, mu2, c1, c2, lo0, lo1, hi0, hi1, tol, max_iter, eps):
    """Scalar fixed point of the example-1 price map; see fixed_point_example1."""
    p0, p1 = p_prev0, p_prev1
    ok = False
    for _ in range(max_iter):
        q1, q2 = ex1_queue(p0, p1, w, mu1, mu2, c1, c2)
        kk = ex1_kappa(q1, w, mu1, mu2, c1, c2, eps)
        n0 = clamp(kk * kk, lo0, hi0)
        n1 = clamp(kk, lo1, hi1)
        done = _close(p0, n0, tol) and _close(p1, n1, tol)
        p0, p1 = n0, n1
        if done:
            ok = True
            break
    if not ok:
        p0, p1 = p_prev0, p_prev1
    q1, q2 = ex1_queue(p0, p1, w, mu1, mu2, c1, c2)
    return q1, q2, p0, p1, ok


def ex2_resolve(w, prev, mu, c, lo, hi, tol, max_iter, eps, forced):
    """Scalar fixed point for example 2.

    ``forced`` is a pair index, or -1 to pick the pair by cost.  Returns
    ``(q, p, pair, ok)`` as 3-lists.
    """
    p = [prev[0], prev[1], prev[2]]
    ok = False
    for _ in range(max_iter):
        costs = ex2_pair_costs(p[0], p[1], p[2], w, mu[0], mu[1], mu[2], c[0], c[1], c[2])
        k = ex2_select(costs) if forced < 0 else forced
        a, b = PAIRS[k]
        qa = costs[k][1] if k == 2 else costs[k][0]
        x, y = ex2_pair_prices(k, qa, w, mu, c, eps)
        new = [prev[0], prev[1], prev[2]]
        new[a] = x
        new[b] = y
        new = [clamp(new[0], lo[0], hi[0]), clamp(new[1], lo[1], hi[1]), clamp(new[2], lo[2], hi[2])]
        done = _close(p[0], new[0], tol) and _close(p[1], new[1], tol) and _close(p[2], new[2], tol)
        p = new
        if done:
            ok = True
            break
    if not ok:
        p = [prev[0], prev[1], prev[2]]
    costs = ex2_pair_costs(p[0], p[1], p[2], w, mu[0], mu[1], mu[2], c[0], c[1], c[2])
    k = ex2_select(costs) if forced < 0 else forced
    a, b = PAIRS[k]
    q = [0.0, 0.0, 0.0]
    q[a] = costs[k][0]
    q[b] = costs[k][1]
    return q, p, k, ok


def fixed_point_example1(w, p_prev, params: Example1Params, price_map: PriceMap,
                         tol=FP_TOL, max_iter=FP_MAX_ITER, eps=Q_EPS):
    """Solve ``p = clamp(price(q(p, w)))`` starting from ``p_prev``.

    Returns ``(q, p, converged)``.  Without convergence within ``max_iter``
    the lagged ``p_prev`` is returned; ``q`` always matches the returned ``p``.
    """
    lo, hi = price_map.lower, price_map.upper
    q1, q2, p0, p1, ok = ex1_resolve(float(w), float(p_prev[0]), float(p_prev[1]), params.mu1, params.mu2,
                                     params.c1, params.c2, lo[0], lo[1], hi[0], hi[1], tol, max_iter, eps)
    return np.array([q1, q2]), np.array([p0, p1]), ok


def fixed_point_example2(w, p_prev, params: Example2Params, price_map: PriceMap,
                         tol=FP_TOL, max_iter=FP_MAX_ITER, eps=Q_EPS, forced_pair=None):
    """Example-2 analogue; ``forced_pair`` (0..2) bypasses the cost selection.

    Returns ``(q, p, pair_index, converged)``.
    """
    q, p, k, ok = ex2_resolve(float(w), [float(x) for x in p_prev], params.mu, params.c,
                              price_map.lower, price_map.upper, tol, max_iter, eps,
                              -1 if forced_pair is None else int(forced_pair))
    return np.array(q), np.array(p), k, ok


# ------------------------------------------------------------ generic solvers

def _dc_inverse(kind, pq, nu):
    """Rate at which the marginal utility equals ``nu``."""
    if kind == PROP_FAIR:
        return pq / nu
    return (2.0 * pq * pq / nu) ** (1.0 / 3.0)


def _waterfill(kinds, pq, caps, total):
    """Maximize a separable increasing concave sum over caps and a sum cap."""
    caps = np.asarray(caps, dtype=float)
    if caps.sum() <= total:
        return caps.copy()

    def used(lognu):
        nu = math.exp(lognu)
        return sum(min(_dc_inverse(k, x, nu), cap) for k, x, cap in zip(kinds, pq, caps)) - total

    lo, hi = -50.0, 50.0
    while used(lo) < 0:
        lo -= 50.0
    while used(hi) > 0:
        hi += 50.0
    lognu = brentq(used, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    nu = math.exp(lognu)
    c = np.array([min(_dc_inverse(k, x, nu), cap) for k, x, cap in zip(kinds, pq, caps)])
    # push the round-off remainder onto an uncapped coordinate so the sum facet is exact
    free = np.flatnonzero(c < caps)
    if free.size:
        j = free[-1]
        c[j] = min(caps[j], max(0.0, total - (c.sum() - c[j])))
    return c


def waterfill_closed(kinds, pq, caps, total):
    """Closed-form variant of the cap/sum water-fill for positive ``pq``.

    With ``x = nu**(-1/3)`` the rates are ``a_j x**3`` (proportionally fair)
    and ``b_j x`` (delay), so the sum condition is a monotone cubic.  Users
    whose rate exceeds their cap are pinned and the rest re-solved.
    """
    n = len(kinds)
    c = [0.0] * n
    if sum(caps) <= total:
        return [float(x) for x in caps]
    free = list(range(n))
    budget = float(total)
    while free:
        a = sum(pq[j] for j in free if kinds[j] == PROP_FAIR)
        b = sum((2.0 * pq[j] * pq[j]) ** (1.0 / 3.0) for j in free if kinds[j] != PROP_FAIR)
        if a == 0.0:
            x = budget / b
        elif b == 0.0:
            x = (budget / a) ** (1.0 / 3.0)
        else:
            # real root of x^3 + (b/a) x - budget/a = 0
            pp, qq = b / a, budget / a
            x = 2.0 * math.sqrt(pp / 3.0) * math.sinh(math.asinh(1.5 * qq / pp * math.sqrt(3.0 / pp)) / 3.0)
        over = []
        for j in free:
            if kinds[j] == PROP_FAIR:
                c[j] = pq[j] * x * x * x
            else:
                c[j] = (2.0 * pq[j] * pq[j]) ** (1.0 / 3.0) * x
            if c[j] > caps[j]:
                over.append(j)
        if not over:
            break
        for j in over:
            c[j] = float(caps[j])
            budget -= caps[j]
            free.remove(j)
    return c


def _coordinate_ascent(kinds, pq, region: CapacityRegion, max_sweeps=2000, tol=1e-12):
    n = region.dimension
    start = np.ones(n)
    c = 0.5 * region.ray_max(start) * start

    def phi(x):
        return sum(utility_eval(k, a, b) for k, a, b in zip(kinds, pq, x))

    def feasible_step(c, d):
        # largest t >= 0 with c + t d feasible and c + t d >= 0
        slack = region.offsets - region.normals @ c
        rate = region.normals @ d
        t = np.inf
        pos = rate > 1e-300
        if np.any(pos):
            t = min(t, float(np.min(np.maximum(slack[pos], 0.0) / rate[pos])))
        neg = d < 0
        if np.any(neg):
            t = min(t, float(np.min(c[neg] / -d[neg])))
        return t

    best = phi(c)
    for _ in range(max_sweeps):
        before = best
        for j in range(n):
            d = np.zeros(n)
            d[j] = 1.0
            t = feasible_step(c, d)
            if np.isfinite(t) and t > 0:
                c = c + t * d
        for i, j in itertools.permutations(range(n), 2):
            d = np.zeros(n)
            d[i], d[j] = 1.0, -1.0
            t_max = feasible_step(c, d) * (1 - 1e-12)
            if not t_max > 0:
                continue
            g = lambda t: utility_dc(kinds[i], pq[i], c[i] + t) - utility_dc(kinds[j], pq[j], c[j] - t)
            if g(0.0) <= 0:
                continue
            if g(t_max) >= 0:
                t = t_max
            else:
                t = brentq(g, 0.0, t_max, xtol=1e-14)
            c = c + t * d
        best = phi(c)
        if abs(best - before) <= tol * (1 + abs(best)):
            return c
    raise SolverError("coordinate ascent did not converge", best=c)


def maximize_utility(kinds: Sequence[str], pq, region: CapacityRegion) -> np.ndarray:
    """Maximize the summed utility of all coordinates over ``region``."""
    pq = [float(x) for x in pq]
    if region.dimension == 0:
        return np.zeros(0)
    parts = region.box_sum_parts()
    if parts is not None and np.isfinite(parts[1]) and all(x > 0 for x in pq):
        return _waterfill(kinds, pq, *parts)
    return _coordinate_ascent(list(kinds), pq, region)


def generic_equilibrium(utilities: UtilitySpec, region: CapacityRegion, pq, selection_size: int,
                        rho=None):
    """Served-set selection plus utility-maximizing rates.

    Among nonempty users every subset of size ``selection_size`` is scored by
    its maximal summed utility on the face where the others get zero rate; the
    best subset wins, ties going to the lexicographically first.  Returns
    ``(c_star, selected)`` with 1-based user indices.
    """
    pq = np.asarray(pq, dtype=float)
    n = region.dimension
    if pq.size != n or len(utilities.kinds) != n:
        raise GameDomainError("pq, utilities and region must share a dimension")
    if np.any(pq < 0):
        raise GameDomainError("pq must be nonnegative")
    nonempty = [j for j in range(n) if pq[j] > 0]
    if not nonempty:
        if rho is None:
            raise GameDomainError("all queues empty: nominal rates rho are required")
        return np.asarray(rho, dtype=float).copy(), ()
    size = min(selection_size, len(nonempty))
    best = None
    for subset in itertools.combinations(nonempty, size):
        zero = [j + 1 for j in range(n) if j not in subset]
        face = face_restrict(region, zero)
        kinds = [utilities.kinds[j] for j in subset]
        c_sub = maximize_utility(kinds, pq[list(subset)], face)
        if np.any(c_sub <= 0):
            continue
        value = sum(utility_eval(k, pq[j], x) for k, j, x in zip(kinds, subset, c_sub))
        if best is None or value > best[0]:
            best = (value, subset, insert_zeros(c_sub, zero, n))
    if best is None:
        raise SolverError("no subset admits positive rates")
    c_star = best[2]
    assert contains(region, c_star, tol=1e-7)
    return c_star, tuple(j + 1 for j in best[1])


def generic_min_dual_cost(costs: DualCostSpec, c, p, w: float) -> np.ndarray:
    """Minimize total dual cost subject to ``sum q_j / mu_j = w``."""
    c = np.asarray(c, dtype=float)
    p = np.asarray(p, dtype=float)
    n = len(costs.kinds)
    q = np.zeros(n)
    if w < 0:
        raise GameDomainError("workload must be nonnegative")
    if w == 0:
        return q
    active = [j for j in range(n) if c[j] > 0]
    if not active:
        raise GameDomainError("infeasible: no user has a positive rate but w > 0")
    if any(p[j] <= 0 for j in active):
        raise GameDomainError("prices of served users must be positive")
    mu = costs.mu

    def q_of(j, nu):
        if costs.kinds[j] == PROP_FAIR:
            return nu * c[j] / (p[j] * p[j])
        return math.sqrt(nu * c[j] ** 3 / (2.0 * p[j] ** 3))

    def excess(lognu):
        nu = math.exp(lognu)
        return math.fsum(q_of(j, nu) / mu[j] for j in active) - w

    lo, hi = -50.0, 50.0
    while excess(lo) > 0:
        lo -= 50.0
    while excess(hi) < 0:
        hi += 50.0
    nu = math.exp(brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))
    for j in active:
        q[j] = q_of(j, nu)
    last = active[-1]
    rest = math.fsum(q[j] / mu[j] for j in active[:-1])
    q[last] = max(0.0, mu[last] * (w - rest))
    return q


# ----------------------------------------------------------------- validators

@dataclass
class UtilityReport:
    kinds: tuple[str, ...]
    increasing: bool
    concave: bool
    marginal_increasing_in_pq: bool
    zero_at_origin: bool
    radially_homogeneous: bool
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.increasing and self.concave and self.marginal_increasing_in_pq
                and self.zero_at_origin and self.radially_homogeneous)


def validate_utility_conditions(spec: UtilitySpec, pq_grid, c_grid, region: CapacityRegion | None = None,
                                scales=(0.5, 2.0, 10.0)) -> UtilityReport:
    """Finite-difference checks of the standing utility assumptions.

    The radial check solves the rate allocation over ``region`` (default: all
    users sharing a sum cap) for each grid point and compares against scaled
    ``pq``.  Nothing is raised; the report carries the verdicts.
    """
    pq_grid = np.asarray(pq_grid, dtype=float)
    c_grid = np.sort(np.asarray(c_grid, dtype=float))
    notes = []
    inc = conc = marg = zero = True
    for kind in spec.kinds:
        for c in c_grid:
            if utility_eval(kind, 0.0, c) != 0.0:
                zero = False
                notes.append(f"{kind}: U(0, {c}) != 0")
        for x in pq_grid:
            if x <= 0:
                continue
            u = np.array([utility_eval(kind, x, c) for c in c_grid])
            du = np.diff(u)
            if np.any(du <= 0):
                inc = False
                notes.append(f"{kind}: not increasing in c at pq={x}")
            slopes = du / np.diff(c_grid)
            if np.any(np.diff(slopes) > 1e-12 * np.max(np.abs(slopes))):
                conc = False
                notes.append(f"{kind}: not concave in c at pq={x}")
        for c in c_grid:
            g = np.array([utility_dc(kind, x, c) for x in np.sort(pq_grid[pq_grid > 0])])
            if np.any(np.diff(g) <= 0):
                marg = False
                notes.append(f"{kind}: dU/dc not increasing in pq at c={c}")
    n = len(spec.kinds)
    if region is None:
        region = CapacityRegion.box_sum([np.inf] * n, float(np.max(c_grid)))
    radial = True
    rng = np.random.default_rng(0)
    positive = pq_grid[pq_grid > 0]
    for _ in range(min(10, max(1, positive.size))):
        base = rng.choice(positive, size=n)
        c0 = maximize_utility(spec.kinds, base, region)
        for a in scales:
            ca = maximize_utility(spec.kinds, a * base, region)
            if not np.allclose(ca, c0, rtol=1e-6, atol=1e-9):
                radial = False
                notes.append(f"rates change under pq -> {a}*pq at pq={base.tolist()}")
                break
        if not radial:
            break
    return UtilityReport(tuple(spec.kinds), inc, conc, marg, zero, radial, notes)
