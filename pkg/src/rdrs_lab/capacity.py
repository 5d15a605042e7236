"""Convex capacity regions in halfspace form."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

MEMBERSHIP_TOL = 1e-9


class RegionError(ValueError):
    pass


@dataclass(frozen=True)
class CapacityRegion:
    """``{c >= 0 : normals @ c - offsets <= 0}``.

    ``sum_capacity_index`` points at the all-ones facet; it is ``None`` only
    for degenerate regions produced by restricting every coordinate away.
    """

    normals: np.ndarray
    offsets: np.ndarray
    sum_capacity_index: int | None = None

    def __post_init__(self):
        normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        if normals.shape[0] != offsets.shape[0]:
            raise RegionError("one offset per normal is required")
        normals.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)
        if np.any(offsets < 0):
            raise RegionError("region must contain the origin (all offsets >= 0)")
        k = self.sum_capacity_index
        if k is not None and not np.all(normals[k] == 1.0):
            raise RegionError(f"facet {k} is not the all-ones sum-capacity facet")

    @property
    def dimension(self) -> int:
        return self.normals.shape[1]

    @property
    def sum_capacity(self) -> float:
        if self.sum_capacity_index is None:
            return 0.0
        return float(self.offsets[self.sum_capacity_index])

    @classmethod
    def box_sum(cls, caps: Sequence[float], sum_cap: float) -> "CapacityRegion":
        """Per-user caps plus one sum-capacity facet (the examples' regions)."""
        caps = np.asarray(caps, dtype=float)
        n = caps.size
        normals = np.vstack([np.eye(n), np.ones((1, n))])
        return cls(normals, np.append(caps, sum_cap), sum_capacity_index=n)

    def box_sum_parts(self):
        """(caps, sum_cap) if the region is caps plus a sum facet, else None."""
        n = self.dimension
        caps = np.full(n, np.inf)
        sum_cap = np.inf
        for a, b in zip(self.normals, self.offsets):
            nz = np.flatnonzero(a)
            if np.all(a == 1.0):
                sum_cap = min(sum_cap, b)
            elif nz.size == 1 and a[nz[0]] > 0:
                caps[nz[0]] = min(caps[nz[0]], b / a[nz[0]])
            elif nz.size == 0:
                continue
            else:
                return None
        return caps, sum_cap

    def slack(self, c) -> np.ndarray:
        return self.offsets - self.normals @ np.asarray(c, dtype=float)

    def ray_max(self, direction) -> float:
        """Largest t with t * direction inside the region (direction >= 0)."""
        d = np.asarray(direction, dtype=float)
        rate = self.normals @ d
        pos = rate > 0
        if not np.any(pos):
            return np.inf
        return float(np.min(self.offsets[pos] / rate[pos]))


@dataclass(frozen=True)
class RegionFamily:
    """Regions per environment state plus the pool/user incidence."""

    regions: Mapping[int, Sequence[CapacityRegion]]
    pool_users: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for state, pools in self.regions.items():
            for v, reg in enumerate(pools, start=1):
                users = self.pool_users.get(v)
                if users is not None and len(users) != reg.dimension:
                    raise RegionError(f"pool {v} in state {state}: dimension {reg.dimension} != {len(users)} users")
        dims = {}
        for pools in self.regions.values():
            for v, reg in enumerate(pools, start=1):
                if dims.setdefault(v, reg.dimension) != reg.dimension:
                    raise RegionError(f"pool {v} changes dimension across states")

    def users_of_pool(self, v: int) -> tuple[int, ...]:
        return self.pool_users[v]

    def pools_of_user(self, j: int) -> tuple[int, ...]:
        return tuple(v for v, users in sorted(self.pool_users.items()) if j in users)

    def is_consistent(self) -> bool:
        users = {j for us in self.pool_users.values() for j in us}
        return all(
            (j in self.pool_users[v]) == (v in self.pools_of_user(j))
            for j in users
            for v in self.pool_users
        )


def contains(region: CapacityRegion, c, tol: float = MEMBERSHIP_TOL) -> bool:
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.size != region.dimension:
        raise RegionError(f"rate vector has dimension {c.size}, region has {region.dimension}")
    if np.any(c < -tol):
        return False
    return bool(np.all(region.normals @ c - region.offsets <= tol))


def face_restrict(region: CapacityRegion, zero_set) -> CapacityRegion:
    """Intersect with ``c_j = 0`` for 1-based ``j`` in zero_set; drop those coordinates."""
    zero = sorted(set(int(j) for j in zero_set))
    n = region.dimension
    if any(not 1 <= j <= n for j in zero):
        raise RegionError(f"zero_set {zero} not within 1..{n}")
    keep = [j for j in range(n) if j + 1 not in zero]
    if not keep:
        return CapacityRegion(np.zeros((1, 0)), np.zeros(1), None)
    normals = region.normals[:, keep]
    # facets that no longer involve any remaining coordinate are vacuous
    live = np.any(normals != 0, axis=1)
    sum_idx = None
    rows = np.flatnonzero(live)
    if region.sum_capacity_index is not None and live[region.sum_capacity_index]:
        sum_idx = int(np.searchsorted(rows, region.sum_capacity_index))
    return CapacityRegion(normals[live], region.offsets[live], sum_idx)


def insert_zeros(c_reduced, zero_set, dimension: int) -> np.ndarray:
    zero = set(int(j) for j in zero_set)
    out = np.zeros(dimension)
    keep = [j for j in range(dimension) if j + 1 not in zero]
    out[keep] = c_reduced
    return out


def _random_boundary_point(region: CapacityRegion, rng) -> np.ndarray:
    """Pareto-maximal point: a random ray hit, then each coordinate pushed
    to its limit in random order."""
    d = rng.random(region.dimension) + 1e-3
    c = region.ray_max(d) * d
    for j in rng.permutation(region.dimension):
        a = region.normals[:, j]
        room = region.offsets - region.normals @ c
        pos = a > 0
        if np.any(pos):
            c[j] += max(0.0, float(np.min(room[pos] / a[pos])))
    return c


def validate_boundary_property(region: CapacityRegion, zero_set, samples: int, rng):
    """Check the sum inequalities between full-region and face boundary points.

    Returns ``(ok, counterexample)`` where the counterexample is ``None`` or a
    dict holding the offending pair.
    """
    zero = sorted(set(int(j) for j in zero_set))
    n = region.dimension
    if not zero or len(zero) >= n:
        raise RegionError("zero_set must be a nonempty proper subset")
    face = face_restrict(region, zero)
    keep = [j for j in range(n) if j + 1 not in zero]
    for _ in range(samples):
        c_full = _random_boundary_point(region, rng)
        c_face = insert_zeros(_random_boundary_point(face, rng), zero, n)
        total_ok = c_full.sum() >= c_face.sum() - MEMBERSHIP_TOL
        kept_ok = c_full[keep].sum() <= c_face[keep].sum() + MEMBERSHIP_TOL
        if not (total_ok and kept_ok):
            return False, {"full": c_full, "face": c_face, "zero_set": zero}
    return True, None
