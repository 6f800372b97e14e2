import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import stable_blocking_pairs
from palm_alloc import SeededRng
from palm_alloc.allocation import (
    AllocationField,
    CellGrid,
    PointPattern,
    allocation_extra_head,
    blocking_pairs,
    cell_displacements,
    distance_ranks,
    max_displacement,
    quotas_for,
    sample_poisson_pattern,
    shift_covariance_check,
    stable_allocate,
    stable_allocate_reference,
    torus_displacement,
)
from palm_alloc.allocation.stable import _Geometry


@st.composite
def instances(draw):
    """Small pattern + grid; a coarse tick lattice makes exact distance ties common."""
    d = draw(st.sampled_from([1, 2]))
    s = draw(st.integers(2, 4 if d == 2 else 8))
    c = draw(st.integers(1, 4 if d == 2 else 6))
    T = c * draw(st.sampled_from([2, 4, 2**10]))
    M = (s * c) ** d
    span = s * T
    n = draw(st.integers(1, min(M, 12)))
    cells = draw(st.lists(st.tuples(*[st.integers(0, span - 1)] * d), min_size=n, max_size=n, unique=True))
    return PointPattern(s, d, np.array(cells, dtype=np.int64), T), CellGrid(s, d, c)


# --- patterns and grids -------------------------------------------------------------


def test_poisson_moments():
    root = SeededRng(21)
    counts = np.array([sample_poisson_pattern(4, root.split(i), d=2).n for i in range(4000)])
    # mean and variance 16; the sample mean has standard error about 0.06
    assert abs(counts.mean() - 16) < 0.3
    assert abs(counts.var() - 16) < 1.6
    assert counts.min() >= 1


def test_poisson_small_window_never_empty():
    assert all(sample_poisson_pattern(2, SeededRng(3).split(i), d=1, intensity=0.05).n >= 1 for i in range(200))


def test_poisson_deterministic_and_valid():
    a = sample_poisson_pattern(5, SeededRng(8), d=3)
    assert a == sample_poisson_pattern(5, SeededRng(8), d=3)
    assert a != sample_poisson_pattern(5, SeededRng(9), d=3)
    assert (a.coordinates >= 0).all() and (a.coordinates < 5).all()
    assert len({tuple(r) for r in a.ticks.tolist()}) == a.n
    with pytest.raises(ValueError):
        sample_poisson_pattern(1, SeededRng(0))


def test_pattern_validation():
    with pytest.raises(ValueError):
        PointPattern(2, 1, np.array([[0], [0]]))
    with pytest.raises(ValueError):
        PointPattern(2, 1, np.array([[2 * 2**16]]))
    p = PointPattern.from_coordinates(4, [[0.5, 3.25]])
    assert p.coordinates.tolist() == [[0.5, 3.25]]
    with pytest.raises(ValueError):
        PointPattern(2, 1, np.array([[1]]), ticks_per_unit=3).shifted_by_cells([1], 2)


def test_grid_geometry():
    g = CellGrid(3, 2, 4)
    assert g.side == 12 and g.M == 144
    assert g.cell_area * g.M == 9
    assert g.cell_of([[0, 2**16 - 1], [2**16, 3 * 2**16 - 1]], 2**16).tolist() == [[0, 3], [4, 11]]
    with pytest.raises(ValueError):
        CellGrid(3, 2, 0)


def test_torus_displacement_integer_and_float():
    out = torus_displacement(np.array([0, 3, 5, 7, -1]), 8)
    assert out.dtype.kind == "i" and out.tolist() == [0, 3, -3, -1, -1]
    assert torus_displacement(np.array([0.75]), 1.0).tolist() == [-0.25]
    big = np.array([2**61 + 1], dtype=np.int64)
    assert torus_displacement(big, 2**62).tolist() == [-(2**61) + 1]


@pytest.mark.parametrize("M, n, expected", [(10, 3, [4, 3, 3]), (9, 3, [3, 3, 3]), (5, 5, [1] * 5)])
def test_quotas(M, n, expected):
    assert quotas_for(M, n).tolist() == expected


def test_quotas_reject_too_many_points():
    with pytest.raises(ValueError):
        quotas_for(3, 4)
    with pytest.raises(ValueError):
        quotas_for(3, 0)


# --- allocation examples -----------------------------------------------------------


def test_single_point_takes_everything():
    grid = CellGrid(3, 2, 2)
    pattern = PointPattern.from_coordinates(3, [[1.3, 2.2]])
    field = stable_allocate(pattern, grid)
    assert (field.assignment == 0).all() and field.quotas.tolist() == [36]


def test_two_antipodal_points_split_the_circle():
    grid = CellGrid(4, 1, 2)
    pattern = PointPattern.from_coordinates(4, [[0.0], [2.0]])
    field = stable_allocate(pattern, grid)
    assert field.assignment.tolist() == [0, 0, 1, 1, 1, 1, 0, 0]


def test_three_point_example_is_stable():
    grid = CellGrid(3, 2, 8)
    pattern = sample_poisson_pattern(3, SeededRng(5), d=2)
    pattern = PointPattern(3, 2, pattern.ticks[:3], pattern.ticks_per_unit)
    field = stable_allocate(pattern, grid)
    assert stable_blocking_pairs(pattern, grid, field.assignment) == []
    assert (field.territory_sizes() == field.quotas).all()


def test_origin_point_gives_zero_extra_head():
    grid = CellGrid(4, 2, 4)
    pattern = PointPattern.from_coordinates(4, [[0.1, 0.1]])
    field = stable_allocate(pattern, grid)
    y = allocation_extra_head(field, pattern)
    assert np.linalg.norm(y) <= grid.cell_diameter


def test_symmetric_two_points_extra_head():
    grid = CellGrid(4, 1, 4)
    pattern = PointPattern.from_coordinates(4, [[0.5], [2.5]])
    field = stable_allocate(pattern, grid)
    assert field.assignment[0] == 0
    assert allocation_extra_head(field, pattern).tolist() == [0.5]


def test_displacement_bounded_by_max_distance():
    pattern = sample_poisson_pattern(6, SeededRng(2), d=2)
    grid = CellGrid(6, 2, 4)
    field = stable_allocate(pattern, grid)
    half = 1 / (2 * grid.c)
    # displacements are measured from cell corners, max_displacement from centers
    assert np.linalg.norm(cell_displacements(field, pattern), axis=1).max() <= max_displacement(field, pattern) + grid.cell_diameter / 2 + 1e-12
    assert np.linalg.norm(allocation_extra_head(field, pattern) - half) <= max_displacement(field, pattern) + 1e-9


def test_unclaimed_and_quantization():
    pattern = sample_poisson_pattern(4, SeededRng(6), d=2)
    grid = CellGrid(4, 2, 3)
    field = stable_allocate(pattern, grid)
    assert field.unclaimed() == 0
    assert field.quantization_error() <= float(grid.cell_area)


# --- stability and cross-checks -----------------------------------------------------


@given(instances())
def test_variants_agree_and_are_stable(inst):
    pattern, grid = inst
    ref = stable_allocate_reference(pattern, grid).field
    fast = stable_allocate(pattern, grid)
    seq = stable_allocate(pattern, grid, sequential=True)
    scan = stable_allocate(pattern, grid, use_buckets=False)
    assert np.array_equal(fast.assignment, ref.assignment)
    assert np.array_equal(seq.assignment, ref.assignment)
    assert np.array_equal(scan.assignment, ref.assignment)
    assert (fast.territory_sizes() == fast.quotas).all()
    assert blocking_pairs(fast, pattern) == []
    assert stable_blocking_pairs(pattern, grid, fast.assignment) == []


@given(instances())
def test_blocking_pair_scan_matches_oracle_on_perturbed_fields(inst):
    pattern, grid = inst
    field = stable_allocate(pattern, grid)
    if field.n < 2:
        return
    # swap the owners of two cells: quotas survive, stability usually does not
    a = field.assignment.copy()
    i = 0
    j = int(np.flatnonzero(a != a[0])[0])
    a[i], a[j] = a[j], a[i]
    broken = AllocationField(grid, a, field.quotas)
    assert sorted(blocking_pairs(broken, pattern)) == sorted(stable_blocking_pairs(pattern, grid, a))


def test_corrupted_field_has_blocking_pairs():
    pattern = sample_poisson_pattern(4, SeededRng(12), d=2)
    grid = CellGrid(4, 2, 3)
    field = stable_allocate(pattern, grid)
    a = field.assignment.copy()
    near = int(np.argmin(np.linalg.norm(cell_displacements(field, pattern), axis=1)))
    far = int(np.argmax(np.linalg.norm(cell_displacements(field, pattern), axis=1)))
    a[near], a[far] = a[far], a[near]
    assert blocking_pairs(AllocationField(grid, a, field.quotas), pattern)


@given(instances())
def test_reference_stage_invariants(inst):
    pattern, grid = inst
    run = stable_allocate_reference(pattern, grid)
    quotas = run.field.quotas
    # once a point's shortlist is full its rejection key never grows
    for p in range(pattern.n):
        keys = [st.rejection_key[p] for st in run.stages]
        full = [k for k in keys if k is not None]
        first = next((i for i, k in enumerate(keys) if k is not None), len(keys))
        assert all(k is not None for k in keys[first:])
        assert all(b <= a for a, b in zip(full, full[1:]))
        for st in run.stages:
            assert len(st.shortlist[p]) <= quotas[p]
    # every cell sits with its nearest point among those that never rejected it
    geom = _Geometry(pattern, grid)
    D2 = geom.d2(np.arange(grid.M), range(pattern.n))
    for c in range(grid.M):
        allowed = [p for p in range(pattern.n) if p not in run.rejections[c]]
        best = min(allowed, key=lambda p: (int(D2[c, p]), p))
        assert run.field.assignment[c] == best


@given(instances(), st.data())
def test_shift_covariance(inst, data):
    pattern, grid = inst
    z = data.draw(st.lists(st.integers(-grid.side, grid.side), min_size=grid.d, max_size=grid.d))
    assert shift_covariance_check(pattern, grid, z)
    assert shift_covariance_check(pattern, grid, [0] * grid.d)


def test_distance_ranks_are_permutations_per_territory():
    pattern = sample_poisson_pattern(4, SeededRng(1), d=2)
    grid = CellGrid(4, 2, 4)
    field = stable_allocate(pattern, grid)
    ranks = distance_ranks(field, pattern)
    for p in range(field.n):
        mine = np.sort(ranks[field.assignment == p])
        assert mine.tolist() == list(range(field.quotas[p]))


def test_larger_instance_matches_exhaustive_scan():
    pattern = sample_poisson_pattern(10, SeededRng(4), d=3)
    grid = CellGrid(10, 3, 2)
    fast = stable_allocate(pattern, grid)
    assert np.array_equal(fast.assignment, stable_allocate(pattern, grid, use_buckets=False).assignment)
    assert blocking_pairs(fast, pattern) == []


def test_mismatched_pattern_rejected():
    with pytest.raises(ValueError):
        stable_allocate(sample_poisson_pattern(4, SeededRng(0), d=2), CellGrid(5, 2, 2))
