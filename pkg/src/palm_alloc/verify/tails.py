"""Empirical tails of the extra head distance across a doubling ladder of window sizes.

Both schemes are shift-covariant, so the law of X at the origin equals the
law of the displacement at any site; each sample therefore averages over all
sites of its window. Distances are truncated at a quarter of the window side
to keep wrap-around out of the estimate. Floating point is used throughout;
this is a Monte Carlo path, not an exact one.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from palm_alloc.allocation import CellGrid, cell_displacements, sample_poisson_pattern, stable_allocate
from palm_alloc.lattice import GroupOrdering, SeededRng, TorusLattice, sample_exact_count
from palm_alloc.transport import greedy_transport

DEFAULT_LADDERS = {
    ("greedy", 1): (64, 128, 256, 512),
    ("greedy", 2): (8, 16, 32),
    ("greedy", 3): (4, 8, 16),
    ("stable", 1): (64, 128, 256, 512),
    ("stable", 2): (8, 16, 32, 64),
    ("stable", 3): (16, 32, 64),
}


@dataclass
class TailRow:
    size: int
    samples: int
    moment: float
    stderr: float
    ccdf: dict[float, float] = field(default_factory=dict)


def _greedy_distances(L: int, d: int, p: Fraction, rng: SeededRng) -> tuple[np.ndarray, np.ndarray]:
    """(distance, weight) over all plan entries; weights sum to 1 after dividing by N."""
    lattice = TorusLattice(d, L)
    k = p * lattice.N
    if k.denominator != 1:
        raise ValueError(f"p = {p} does not give a whole number of occupied sites on N = {lattice.N}")
    config = sample_exact_count(lattice, int(k), rng)
    plan = greedy_transport(config, GroupOrdering.ball(lattice))
    xs = np.array([x for x, _ in plan.entries], dtype=np.int64)
    ys = np.array([y for _, y in plan.entries], dtype=np.int64)
    w = np.array(list(plan.entries.values()), dtype=float) / (plan.scale * lattice.N)
    delta = np.abs(lattice.coords[ys] - lattice.coords[xs])
    delta = np.minimum(delta, L - delta)
    return np.sqrt((delta * delta).sum(axis=1)), w


def _stable_distances(s: int, d: int, cells_per_unit: int, rng: SeededRng) -> tuple[np.ndarray, np.ndarray]:
    grid = CellGrid(s, d, cells_per_unit)
    pattern = sample_poisson_pattern(s, rng, d=d)
    field_ = stable_allocate(pattern, grid)
    dist = np.linalg.norm(cell_displacements(field_, pattern), axis=1)
    return dist, np.full(len(dist), 1.0 / len(dist))


def tail_diagnostics(scheme: str, d: int, sizes=None, samples=100, seed: int = 0, p=Fraction(1, 2),
                     cells_per_unit: int = 2, radii=None) -> list[TailRow]:
    """Truncated moment E[min(|X|, size/4)^(d/2)] and CCDF P(|X| > r) per window size.

    ``scheme="greedy"`` runs the ball-ordered greedy transport on exact-count
    configurations with density p; ``scheme="stable"`` runs the stable
    allocation of a unit-intensity Poisson pattern on a grid with
    ``cells_per_unit`` cells per unit length (X measured from a cell corner).
    ``samples`` is either one count for every size or a sequence with one
    count per size; large windows average over many sites already.
    """
    if scheme not in ("greedy", "stable"):
        raise ValueError(f"scheme must be 'greedy' or 'stable', got {scheme!r}")
    sizes = tuple(sizes or DEFAULT_LADDERS[(scheme, d)])
    counts = [samples] * len(sizes) if np.isscalar(samples) else list(samples)
    if len(counts) != len(sizes) or min(counts) < 1:
        raise ValueError(f"need one positive sample count per size, got {samples!r} for sizes {sizes}")
    p = Fraction(p)
    root = SeededRng(seed).split(("tails", scheme, d))
    rows = []
    for size, samples in zip(sizes, counts):
        cut = size / 4
        grid_r = np.asarray(radii if radii is not None else [0.0] + [2.0**j for j in range(int(np.log2(cut)) + 1)])
        moments = np.empty(samples)
        ccdf = np.zeros(len(grid_r))
        for i in range(samples):
            rng = root.split((size, i))
            if scheme == "greedy":
                dist, w = _greedy_distances(size, d, p, rng)
            else:
                dist, w = _stable_distances(size, d, cells_per_unit, rng)
            moments[i] = float((np.minimum(dist, cut) ** (d / 2) * w).sum())
            ccdf += (w[None, :] * (dist[None, :] > grid_r[:, None])).sum(axis=1)
        rows.append(TailRow(
            size=size,
            samples=samples,
            moment=float(moments.mean()),
            stderr=float(moments.std(ddof=1) / np.sqrt(samples)) if samples > 1 else float("nan"),
            ccdf=dict(zip(grid_r.tolist(), (ccdf / samples).tolist())),
        ))
    return rows


def relative_change(rows: list[TailRow]) -> float:
    """|m_last / m_second_to_last - 1| over the last doubling."""
    a, b = rows[-2].moment, rows[-1].moment
    return abs(b / a - 1.0)


def strictly_increasing(rows: list[TailRow]) -> bool:
    m = [r.moment for r in rows]
    return all(b > a for a, b in zip(m, m[1:]))


def tails_to_csv(rows: list[TailRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["size", "samples", "truncated_moment", "stderr", "r", "ccdf"])
    for row in rows:
        for r, v in row.ccdf.items():
            writer.writerow([row.size, row.samples, repr(row.moment), repr(row.stderr), repr(r), repr(v)])
    return buf.getvalue()
