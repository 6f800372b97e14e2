"""Point patterns on the continuum torus [0, s)^d and the cell grid that discretizes it.

Point coordinates are stored as integer ticks (``ticks_per_unit`` per unit
length), so every distance the allocation compares is an exact integer.
Distances are measured in the common unit 1/(2 c T), in which a cell center
along one axis sits at (2 i + 1) T and a point at 2 c tick.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from palm_alloc.lattice import SeededRng

DEFAULT_TICKS = 2**16


@dataclass(frozen=True, eq=False)
class PointPattern:
    s: int
    d: int
    ticks: np.ndarray
    ticks_per_unit: int = DEFAULT_TICKS

    def __post_init__(self):
        t = np.asarray(self.ticks, dtype=np.int64).reshape(-1, self.d)
        if t.size and (t.min() < 0 or t.max() >= self.s * self.ticks_per_unit):
            raise ValueError("point coordinates must lie in [0, s)")
        if len({tuple(row) for row in t.tolist()}) != len(t):
            raise ValueError("points must be pairwise distinct")
        t = t.copy()
        t.flags.writeable = False
        object.__setattr__(self, "ticks", t)

    @classmethod
    def from_coordinates(cls, s: int, coords, ticks_per_unit: int = DEFAULT_TICKS) -> "PointPattern":
        """Snap real coordinates to the tick lattice (wrapping into [0, s))."""
        arr = np.atleast_2d(np.asarray(coords, dtype=float))
        t = np.floor(arr * ticks_per_unit + 0.5).astype(np.int64) % (s * ticks_per_unit)
        return cls(s, arr.shape[1], t, ticks_per_unit)

    @property
    def n(self) -> int:
        return len(self.ticks)

    @property
    def coordinates(self) -> np.ndarray:
        return self.ticks / self.ticks_per_unit

    def shifted_by_cells(self, z, cells_per_unit: int) -> "PointPattern":
        """Translate every point by the whole-cell vector z."""
        z = np.asarray(z, dtype=np.int64).reshape(self.d)
        num = z * self.ticks_per_unit
        if np.any(num % cells_per_unit):
            raise ValueError("a whole-cell shift must be a whole number of ticks; pick ticks_per_unit divisible by c")
        t = (self.ticks + num // cells_per_unit) % (self.s * self.ticks_per_unit)
        return PointPattern(self.s, self.d, t, self.ticks_per_unit)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointPattern):
            return NotImplemented
        return (self.s, self.d, self.ticks_per_unit) == (other.s, other.d, other.ticks_per_unit) and np.array_equal(
            self.ticks, other.ticks
        )


@dataclass(frozen=True)
class CellGrid:
    s: int
    d: int
    c: int

    def __post_init__(self):
        if self.c < 1 or self.s < 1:
            raise ValueError("side and cells per unit must be positive")

    @property
    def side(self) -> int:
        return self.s * self.c

    @property
    def M(self) -> int:
        return self.side**self.d

    @property
    def cell_area(self) -> Fraction:
        return Fraction(1, self.c**self.d)

    @property
    def cell_diameter(self) -> float:
        return float(np.sqrt(self.d)) / self.c

    @cached_property
    def cell_index_coords(self) -> np.ndarray:
        arr = np.indices((self.side,) * self.d).reshape(self.d, -1).T.astype(np.int64)
        arr.flags.writeable = False
        return arr

    @cached_property
    def strides(self) -> np.ndarray:
        return np.array([self.side ** (self.d - 1 - a) for a in range(self.d)], dtype=np.int64)

    def cell_of(self, coord_ticks, ticks_per_unit: int) -> np.ndarray:
        """Cell multi-index containing each point."""
        return np.asarray(coord_ticks, dtype=np.int64) * self.c // ticks_per_unit

    def check_pattern(self, pattern: PointPattern) -> None:
        if (pattern.s, pattern.d) != (self.s, self.d):
            raise ValueError(f"pattern lives on s={pattern.s}, d={pattern.d}; grid on s={self.s}, d={self.d}")

    # exact integer geometry ------------------------------------------------

    def period(self, ticks_per_unit: int) -> int:
        return 2 * self.c * ticks_per_unit * self.s

    def scaled_points(self, pattern: PointPattern) -> np.ndarray:
        return 2 * self.c * pattern.ticks

    def scaled_centers(self, ticks_per_unit: int) -> np.ndarray:
        return (2 * self.cell_index_coords + 1) * ticks_per_unit

    def check_overflow(self, ticks_per_unit: int) -> None:
        half = self.period(ticks_per_unit) // 2 + 1
        if self.d * half * half >= 2**62:
            raise OverflowError("squared distances would overflow int64; lower ticks_per_unit")


def sample_poisson_pattern(s: int, rng: SeededRng, d: int = 2, intensity: float = 1.0,
                           ticks_per_unit: int = DEFAULT_TICKS) -> PointPattern:
    """Poisson process on [0, s)^d conditioned on at least one point."""
    if s < 2:
        raise ValueError("side must be at least 2")
    mean = intensity * s**d
    gen = rng.generator
    n = 0
    while n < 1:
        n = int(gen.poisson(mean))
    span = s * ticks_per_unit
    ticks = gen.integers(0, span, size=(n, d))
    # resolve the (rare) coincidences produced by the tick quantization
    while True:
        _, first = np.unique(ticks, axis=0, return_index=True)
        if len(first) == n:
            break
        dup = np.setdiff1d(np.arange(n), first)
        ticks[dup] = gen.integers(0, span, size=(len(dup), d))
    return PointPattern(s, d, ticks, ticks_per_unit)


def torus_displacement(delta, period) -> np.ndarray:
    """Representative of delta in [-period/2, period/2) along every axis.

    Integer input with an integer period stays integer (and exact).
    """
    delta = np.asarray(delta)
    exact = np.issubdtype(delta.dtype, np.integer) and isinstance(period, (int, np.integer))
    half = period // 2 if exact else period / 2
    return (delta + half) % period - half
