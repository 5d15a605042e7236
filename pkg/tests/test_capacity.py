import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdrs_lab.capacity import (
    CapacityRegion,
    RegionError,
    RegionFamily,
    contains,
    face_restrict,
    insert_zeros,
    validate_boundary_property,
)


def test_example_points(box2):
    assert contains(box2, [1000.0, 1000.0])
    assert abs(box2.slack([1000.0, 1000.0])[box2.sum_capacity_index]) == 0.0
    assert contains(box2, [0.0, 0.0])
    assert not contains(box2, [1600.0, 100.0])
    assert not contains(box2, [-1.0, 10.0])


def test_dimension_mismatch(box2):
    with pytest.raises(RegionError):
        contains(box2, [1.0, 2.0, 3.0])


def test_construction_checks():
    with pytest.raises(RegionError):
        CapacityRegion(np.eye(2), [1.0, -1.0])
    with pytest.raises(RegionError):
        CapacityRegion(np.eye(2), [1.0, 1.0], sum_capacity_index=0)
    with pytest.raises(RegionError):
        CapacityRegion(np.eye(2), [1.0])


def test_face_identity_and_interval(box2):
    same = face_restrict(box2, [])
    assert np.array_equal(same.normals, box2.normals) and np.array_equal(same.offsets, box2.offsets)
    line = face_restrict(box2, [2])
    assert line.dimension == 1
    assert contains(line, [1500.0]) and not contains(line, [1500.1]) and contains(line, [0.0])
    assert line.ray_max([1.0]) == 1500.0


def test_face_all_zero_is_a_point(box2):
    pt = face_restrict(box2, [1, 2])
    assert pt.dimension == 0
    assert contains(pt, [])


def test_face_bad_index(box2):
    with pytest.raises(RegionError):
        face_restrict(box2, [3])


def test_downward_closed_and_convex(box3):
    rng = np.random.default_rng(0)
    pts = rng.random((4000, 3)) * 1600
    inside = pts[[contains(box3, p) for p in pts]]
    for p in inside[:500]:
        assert contains(box3, p * rng.random(3))
    a, b = inside[rng.integers(0, len(inside), 1000)], inside[rng.integers(0, len(inside), 1000)]
    assert all(contains(box3, m) for m in (a + b) / 2)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1600), min_size=3, max_size=3), st.sets(st.integers(1, 3), max_size=2))
def test_face_consistency(c, zero):
    region = CapacityRegion.box_sum([1500.0, 1200.0, 900.0], 2000.0)
    keep = [j for j in range(3) if j + 1 not in zero]
    face = face_restrict(region, zero)
    reduced = np.asarray(c)[keep]
    assert contains(face, reduced) == contains(region, insert_zeros(reduced, zero, 3))


def test_boundary_property_examples(box2, box3):
    full, face = np.array([1000.0, 1000.0]), np.array([1500.0, 0.0])
    assert full.sum() >= face.sum() and full[0] <= face[0]
    rng = np.random.default_rng(1)
    for region in (box2, box3):
        for j in range(1, region.dimension + 1):
            ok, bad = validate_boundary_property(region, [j], 1000, rng)
            assert ok, bad


def test_boundary_property_detects_violation():
    # c2 may only grow together with c1, so the face c1 = 0 is short in c2
    region = CapacityRegion(np.array([[-1.0, 1.0], [1.0, 1.0]]), [100.0, 2000.0], 1)
    ok, bad = validate_boundary_property(region, [1], 500, np.random.default_rng(2))
    assert not ok and bad["zero_set"] == [1]


def test_boundary_property_precondition(box2):
    with pytest.raises(RegionError):
        validate_boundary_property(box2, [], 10, np.random.default_rng(0))
    with pytest.raises(RegionError):
        validate_boundary_property(box2, [1, 2], 10, np.random.default_rng(0))


def test_nominal_rates_on_sum_facet(box2):
    rho = np.array([1000.0, 1000.0])
    assert rho.sum() == box2.sum_capacity and contains(box2, rho)


def test_box_sum_parts(box3):
    caps, total = box3.box_sum_parts()
    assert caps.tolist() == [1500.0] * 3 and total == 2000.0
    skew = CapacityRegion(np.array([[1.0, 2.0], [1.0, 1.0]]), [5.0, 4.0], 1)
    assert skew.box_sum_parts() is None


def test_region_family(box2):
    fam = RegionFamily({1: [box2], 2: [box2]}, {1: (1, 2)})
    assert fam.pools_of_user(1) == (1,) and fam.users_of_pool(1) == (1, 2)
    assert fam.is_consistent()
    with pytest.raises(RegionError):
        RegionFamily({1: [box2]}, {1: (1, 2, 3)})
    with pytest.raises(RegionError):
        RegionFamily({1: [box2], 2: [CapacityRegion.box_sum([1.0], 1.0)]})
