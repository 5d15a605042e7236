"""Finite-state continuous-time Markov environment.

States are 1-based in the public API and 0-based in arrays.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace

import numpy as np


class EnvValidationError(ValueError):
    pass


@dataclass(frozen=True)
class MarkovEnvSpec:
    holding_rates: tuple[float, ...]
    embedded_transitions: tuple[tuple[float, ...], ...]
    initial_state: int = 1

    def __post_init__(self):
        object.__setattr__(self, "holding_rates", tuple(float(g) for g in self.holding_rates))
        object.__setattr__(
            self,
            "embedded_transitions",
            tuple(tuple(float(x) for x in row) for row in self.embedded_transitions),
        )
        self.validate()

    @property
    def num_states(self) -> int:
        return len(self.holding_rates)

    def validate(self) -> None:
        k = self.num_states
        if k < 1:
            raise EnvValidationError("environment needs at least one state")
        if len(self.embedded_transitions) != k:
            raise EnvValidationError(f"embedded_transitions must be {k}x{k}")
        for i, g in enumerate(self.holding_rates, start=1):
            if not g > 0:
                raise EnvValidationError(f"holding rate of state {i} must be positive, got {g}")
        for i, row in enumerate(self.embedded_transitions, start=1):
            if len(row) != k:
                raise EnvValidationError(f"row {i} of embedded_transitions has length {len(row)}, expected {k}")
            if any(x < 0 for x in row):
                raise EnvValidationError(f"row {i} of embedded_transitions has a negative entry")
            if row[i - 1] != 0.0:
                raise EnvValidationError(f"row {i} of embedded_transitions has nonzero diagonal")
            # a single state has nothing to jump to
            if k > 1 and abs(math.fsum(row) - 1.0) > 1e-12:
                raise EnvValidationError(f"row {i} of embedded_transitions sums to {math.fsum(row)}, not 1")
        if not 1 <= self.initial_state <= k:
            raise EnvValidationError(f"initial_state {self.initial_state} outside 1..{k}")

    @classmethod
    def single_state(cls, holding_rate: float = 1.0) -> "MarkovEnvSpec":
        return cls((holding_rate,), ((0.0,),), 1)


@dataclass(frozen=True)
class EnvPath:
    jump_times: tuple[float, ...]
    states: tuple[int, ...]
    horizon: float
    _times: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_times", list(self.jump_times))

    @property
    def num_jumps(self) -> int:
        return len(self.jump_times) - 1


def build_generator(spec: MarkovEnvSpec) -> np.ndarray:
    """Generator matrix: -gamma(i) on the diagonal, gamma(i) q_il off it."""
    spec.validate()
    rates = np.asarray(spec.holding_rates)
    g = rates[:, None] * np.asarray(spec.embedded_transitions)
    np.fill_diagonal(g, -rates)
    if spec.num_states == 1:
        g[:] = 0.0
    return g


def sample_path(spec: MarkovEnvSpec, horizon: float, rng: np.random.Generator) -> EnvPath:
    """Sample a right-continuous trajectory on [0, horizon].

    Holding times come from inverse-CDF draws, ``-log(1 - U) / gamma``.
    """
    if not horizon > 0:
        raise EnvValidationError("horizon must be positive")
    state = spec.initial_state
    times = [0.0]
    states = [state]
    if spec.num_states == 1:
        return EnvPath(tuple(times), tuple(states), float(horizon))
    cum = np.cumsum(np.asarray(spec.embedded_transitions), axis=1)
    t = 0.0
    while True:
        u = rng.random()
        t += -math.log1p(-u) / spec.holding_rates[state - 1]
        if t > horizon:
            break
        v = rng.random()
        row = cum[state - 1]
        # side="right" skips zero-width slots, including the diagonal
        state = int(np.searchsorted(row, v * row[-1], side="right")) + 1
        times.append(t)
        states.append(state)
    return EnvPath(tuple(times), tuple(states), float(horizon))


def state_at(path: EnvPath, t: float) -> int:
    if not 0.0 <= t <= path.horizon:
        raise IndexError(f"t={t} outside [0, {path.horizon}]")
    return path.states[bisect.bisect_right(path._times, t) - 1]


def states_on_grid(path: EnvPath, grid: np.ndarray) -> np.ndarray:
    """0-based state index at each grid time."""
    grid = np.asarray(grid, dtype=float)
    if grid.size and (grid[0] < 0 or grid[-1] > path.horizon * (1 + 1e-12)):
        raise IndexError("grid leaves [0, horizon]")
    idx = np.searchsorted(np.asarray(path.jump_times), grid, side="right") - 1
    return np.asarray(path.states, dtype=np.int64)[idx] - 1


def scale_holding_rates(spec: MarkovEnvSpec, r: float) -> MarkovEnvSpec:
    """Heavy-traffic time scaling gamma -> gamma / r**2."""
    if not r > 0:
        raise EnvValidationError("r must be positive")
    return replace(spec, holding_rates=tuple(g / (r * r) for g in spec.holding_rates))


def sojourn_times(path: EnvPath) -> list[tuple[int, float]]:
    """Completed sojourns as (state, duration); the censored last one is dropped."""
    t = path.jump_times
    return [(path.states[k], t[k + 1] - t[k]) for k in range(len(t) - 1)]


def occupancy(path: EnvPath) -> np.ndarray:
    k = max(path.states)
    occ = np.zeros(k)
    ends = list(path.jump_times[1:]) + [path.horizon]
    for s, a, b in zip(path.states, path.jump_times, ends):
        occ[s - 1] += b - a
    return occ / path.horizon
