"""Stable allocation of torus cells to the points of a pattern.

Cells apply to points in order of increasing distance; a point holding more
applicants than its quota keeps the nearest ones and rejects the rest. Quotas
are floor(M/n) or ceil(M/n) cells, the larger ones going to the lowest point
indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from palm_alloc.allocation import _kernel
from palm_alloc.allocation.pattern import CellGrid, PointPattern, torus_displacement


def quotas_for(M: int, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one point")
    if M < n:
        raise ValueError(f"{M} cells cannot give every one of {n} points a nonzero quota")
    q = np.full(n, M // n, dtype=np.int64)
    q[: M % n] += 1
    return q


@dataclass
class AllocationField:
    grid: CellGrid
    assignment: np.ndarray
    quotas: np.ndarray
    rounds: int = 0
    proposals: int = 0

    @property
    def n(self) -> int:
        return len(self.quotas)

    def territory_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n)

    def unclaimed(self) -> int:
        return int((self.assignment < 0).sum())

    def quantization_error(self) -> float:
        """Largest deviation of a territory's area from one unit (in area units)."""
        area = float(self.grid.cell_area)
        return float(np.abs(self.territory_sizes() * area - 1.0).max())


class _Geometry:
    """Exact integer keys for (cell, point) pairs of one pattern on one grid."""

    def __init__(self, pattern: PointPattern, grid: CellGrid):
        grid.check_pattern(pattern)
        grid.check_overflow(pattern.ticks_per_unit)
        self.grid = grid
        self.T = pattern.ticks_per_unit
        self.P = grid.period(self.T)
        self.pts = np.ascontiguousarray(grid.scaled_points(pattern), dtype=np.int64)
        self.pcell = np.ascontiguousarray(grid.cell_of(pattern.ticks, self.T), dtype=np.int64)

    def d2(self, cells: np.ndarray, points) -> np.ndarray:
        """Squared torus distance, broadcasting cells (m,) against points."""
        centers = self.grid.scaled_centers(self.T)[cells]
        delta = np.abs(centers[:, None, :] - self.pts[np.asarray(points)][None, :, :])
        delta = np.minimum(delta, self.P - delta)
        return (delta * delta).sum(axis=-1)

    def tiebreak(self, cells: np.ndarray, points) -> np.ndarray:
        side = self.grid.side
        ci = self.grid.cell_index_coords[cells]
        off = (ci[:, None, :] - self.pcell[np.asarray(points)][None, :, :]) % side
        return (off * self.grid.strides).sum(axis=-1)

    def d2_one(self, cell: int, p: int) -> int:
        return int(self.d2(np.array([cell]), [p])[0, 0])

    def tb_one(self, cell: int, p: int) -> int:
        return int(self.tiebreak(np.array([cell]), [p])[0, 0])


def _buckets(geom: _Geometry, n: int, d: int, per_bucket: float = 1.0):
    # buckets sized to hold about `per_bucket` points each
    density = n / geom.grid.s**d
    w = (per_bucket / density) ** (1.0 / d)
    B = max(1, min(int(geom.grid.s / w), geom.grid.side))
    b = np.zeros(n, dtype=np.int64)
    for k in range(d):
        b = b * B + geom.pts[:, k] * B // geom.P
    order = np.argsort(b, kind="stable").astype(np.int64)
    counts = np.bincount(b, minlength=B**d)
    start = np.zeros(B**d + 1, dtype=np.int64)
    np.cumsum(counts, out=start[1:])
    return B, start, order


def stable_allocate(pattern: PointPattern, grid: CellGrid, *, sequential: bool = False,
                    use_buckets: bool = True) -> AllocationField:
    """Deferred acceptance until no cell is rejected.

    ``sequential`` switches from simultaneous rounds to one proposal at a
    time; ``use_buckets=False`` replaces the bucketed nearest-point search
    with an exhaustive scan. Neither option changes the result.
    """
    if pattern.n < 1:
        raise ValueError("pattern has no points")
    quotas = quotas_for(grid.M, pattern.n)
    geom = _Geometry(pattern, grid)
    B, start, order = _buckets(geom, pattern.n, grid.d)
    assign, rounds, proposals = _kernel.deferred_acceptance(
        geom.pts, geom.pcell, grid.side, geom.T, geom.P, quotas, B, start, order, use_buckets, sequential
    )
    return AllocationField(grid, assign, quotas, int(rounds), int(proposals))


# --- reference implementation, literal stage structure -----------------------


@dataclass
class StageState:
    """Snapshot after one stage: applicants A_n(x), rejection key r_n(x), shortlist S_n(x).

    A rejection key is the (d2, tb) key of the q-th nearest applicant, or
    None when fewer than q cells applied (infinite rejection radius).
    """

    applicants: dict[int, list[int]]
    rejection_key: dict[int, tuple[int, int] | None]
    shortlist: dict[int, list[int]]
    rejected: dict[int, list[int]]


@dataclass
class ReferenceRun:
    field: AllocationField
    stages: list[StageState] = field(default_factory=list)
    rejections: list[set[int]] = field(default_factory=list)


def stable_allocate_reference(pattern: PointPattern, grid: CellGrid, record: bool = True) -> ReferenceRun:
    """Pure-Python stage-by-stage allocation; for small instances and cross-checks."""
    quotas = quotas_for(grid.M, pattern.n)
    geom = _Geometry(pattern, grid)
    M, n = grid.M, pattern.n
    cells = np.arange(M)
    D2 = geom.d2(cells, range(n))
    TB = geom.tiebreak(cells, range(n))
    pref = [sorted(range(n), key=lambda p, c=c: (int(D2[c, p]), p)) for c in range(M)]
    rejected_by: list[set[int]] = [set() for _ in range(M)]
    run = ReferenceRun(field=None)  # type: ignore[arg-type]
    while True:
        applicants: dict[int, list[int]] = {p: [] for p in range(n)}
        for c in range(M):
            choice = next(p for p in pref[c] if p not in rejected_by[c])
            applicants[choice].append(c)
        any_rejection = False
        state = StageState({}, {}, {}, {})
        for p, apps in applicants.items():
            ranked = sorted(apps, key=lambda c, p=p: (int(D2[c, p]), int(TB[c, p])))
            keep, drop = ranked[: quotas[p]], ranked[quotas[p]:]
            for c in drop:
                rejected_by[c].add(p)
            any_rejection |= bool(drop)
            if record:
                state.applicants[p] = apps
                q = int(quotas[p])
                state.rejection_key[p] = (int(D2[ranked[q - 1], p]), int(TB[ranked[q - 1], p])) if len(ranked) >= q else None
                state.shortlist[p] = keep
                state.rejected[p] = drop
        if record:
            run.stages.append(state)
        if not any_rejection:
            break
    assign = np.full(M, -1, dtype=np.int64)
    for p, apps in applicants.items():
        assign[apps] = p
    run.field = AllocationField(grid, assign, quotas, len(run.stages) if record else 0, 0)
    run.rejections = rejected_by
    return run


# --- oracles and derived quantities -----------------------------------------


def blocking_pairs(field: AllocationField, pattern: PointPattern, chunk: int = 4096) -> list[tuple[int, int]]:
    """Every (cell, point) pair that would both rather be matched to each other.

    The cell prefers p to its own point by (distance, point index); p prefers
    the cell to its worst holding by (distance, offset tie-break). Brute force,
    O(M n).
    """
    grid = field.grid
    geom = _Geometry(pattern, grid)
    n = pattern.n
    cells = np.arange(grid.M)
    own = field.assignment
    if (own < 0).any():
        raise ValueError("allocation has unclaimed cells")
    own_d2, own_tb = _pair_keys(geom, cells, own)
    # worst holding per point, lexicographic in (d2, tb)
    worst_d2 = np.full(n, -1, dtype=np.int64)
    worst_tb = np.full(n, -1, dtype=np.int64)
    order = np.lexsort((own_tb, own_d2))
    worst_d2[own[order]] = own_d2[order]
    worst_tb[own[order]] = own_tb[order]
    found = []
    for lo in range(0, grid.M, chunk):
        sl = cells[lo:lo + chunk]
        D2 = geom.d2(sl, range(n))
        TB = geom.tiebreak(sl, range(n))
        pidx = np.arange(n)[None, :]
        cell_prefers = (D2 < own_d2[sl, None]) | ((D2 == own_d2[sl, None]) & (pidx < own[sl, None]))
        point_prefers = (D2 < worst_d2[None, :]) | ((D2 == worst_d2[None, :]) & (TB < worst_tb[None, :]))
        ci, pi = np.nonzero(cell_prefers & point_prefers)
        found.extend(zip((sl[ci]).tolist(), pi.tolist()))
    return found


def _pair_keys(geom: _Geometry, cells: np.ndarray, points: np.ndarray):
    centers = geom.grid.scaled_centers(geom.T)[cells]
    delta = np.abs(centers - geom.pts[points])
    delta = np.minimum(delta, geom.P - delta)
    d2 = (delta * delta).sum(axis=-1)
    off = (geom.grid.cell_index_coords[cells] - geom.pcell[points]) % geom.grid.side
    tb = (off * geom.grid.strides).sum(axis=-1)
    return d2, tb


def distance_ranks(field: AllocationField, pattern: PointPattern) -> np.ndarray:
    """Rank of each cell within its territory, nearest cell first."""
    geom = _Geometry(pattern, field.grid)
    cells = np.arange(field.grid.M)
    d2, tb = _pair_keys(geom, cells, field.assignment)
    order = np.lexsort((tb, d2, field.assignment))
    ranks = np.empty(field.grid.M, dtype=np.int64)
    owners = field.assignment[order]
    starts = np.r_[0, np.flatnonzero(np.diff(owners)) + 1]
    run_start = np.repeat(starts, np.diff(np.r_[starts, len(order)]))
    ranks[order] = np.arange(len(order)) - run_start
    return ranks


def cell_displacements(field: AllocationField, pattern: PointPattern) -> np.ndarray:
    """(M, d) torus displacement from each cell's lower corner to its assigned point, in units."""
    grid = field.grid
    T = pattern.ticks_per_unit
    span = grid.s * T
    corner_ticks = grid.cell_index_coords * T // grid.c if T % grid.c == 0 else None
    if corner_ticks is not None:
        return torus_displacement(pattern.ticks[field.assignment] - corner_ticks, span) / T
    corners = grid.cell_index_coords / grid.c
    return torus_displacement(pattern.coordinates[field.assignment] - corners, float(grid.s))


def allocation_extra_head(field: AllocationField, pattern: PointPattern) -> np.ndarray:
    """Displacement Y from the origin to the point allocated the origin's cell."""
    return cell_displacements(field, pattern)[0]


def max_displacement(field: AllocationField, pattern: PointPattern) -> float:
    """Largest distance from a cell center to its assigned point."""
    geom = _Geometry(pattern, field.grid)
    d2, _ = _pair_keys(geom, np.arange(field.grid.M), field.assignment)
    unit = 2 * field.grid.c * pattern.ticks_per_unit
    return math.sqrt(int(d2.max())) / unit


def shift_covariance_check(pattern: PointPattern, grid: CellGrid, z, field: AllocationField | None = None) -> bool:
    """Allocating the pattern shifted by whole cells z gives the shifted field, cell for cell."""
    z = np.asarray(z, dtype=np.int64).reshape(grid.d)
    if field is None:
        field = stable_allocate(pattern, grid)
    moved = stable_allocate(pattern.shifted_by_cells(z, grid.c), grid)
    target = ((grid.cell_index_coords + z) % grid.side) @ grid.strides
    expected = np.empty_like(field.assignment)
    expected[target] = field.assignment
    return bool(np.array_equal(moved.assignment, expected))
