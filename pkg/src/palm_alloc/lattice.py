"""Periodic lattice windows, group orderings, configurations and seeded randomness.

Everything downstream works on the d-dimensional discrete torus (Z/LZ)^d.
Sites are addressed either by coordinate tuples or by their row-major linear
index; all public functions accept and return linear indices unless stated.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ENUMERATION_CAP = 10**6


class DegenerateConfigurationError(ValueError):
    """Raised for configurations with no occupied or no unoccupied site."""


def as_rational(value) -> Fraction:
    """Parse ``"3/5"``, ints, or Fractions into an exact Fraction.

    Floats are refused: a binary float is almost never the rational the
    caller meant.
    """
    if isinstance(value, float):
        raise TypeError("pass rationals as Fraction, int or 'num/den' strings, not float")
    return Fraction(value)


@dataclass(frozen=True)
class TorusLattice:
    d: int
    L: int

    def __post_init__(self):
        if not 1 <= self.d <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.L < 1:
            raise ValueError(f"side length must be positive, got {self.L}")

    @property
    def N(self) -> int:
        return self.L**self.d

    @cached_property
    def strides(self) -> np.ndarray:
        return np.array([self.L ** (self.d - 1 - a) for a in range(self.d)], dtype=np.int64)

    @cached_property
    def coords(self) -> np.ndarray:
        """(N, d) array of coordinates, row i holding the coordinates of site i."""
        grids = np.indices((self.L,) * self.d).reshape(self.d, -1).T
        arr = np.ascontiguousarray(grids, dtype=np.int64)
        arr.flags.writeable = False
        return arr

    def coord(self, x: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self.coords[x])

    def index(self, coord: Sequence[int]) -> int:
        if len(coord) != self.d:
            raise ValueError(f"expected {self.d} coordinates, got {len(coord)}")
        return int(sum((int(c) % self.L) * int(s) for c, s in zip(coord, self.strides)))

    def as_vector(self, z) -> np.ndarray:
        """Coordinates of a group element given as a linear index or a vector."""
        if isinstance(z, (int, np.integer)):
            return self.coords[int(z)]
        vec = np.asarray(z, dtype=np.int64).reshape(-1)
        if vec.size != self.d:
            raise ValueError(f"expected a {self.d}-vector, got {z!r}")
        return vec % self.L

    def shift(self, z, x: int) -> int:
        """The site x + z (mod L in every coordinate)."""
        v = (self.coords[x] + self.as_vector(z)) % self.L
        return int(v @ self.strides)

    def translation(self, z) -> np.ndarray:
        """Permutation array t with t[x] = x + z for every site x."""
        v = (self.coords + self.as_vector(z)) % self.L
        return v @ self.strides

    def negate(self, z: int) -> int:
        return int(((-self.coords[z]) % self.L) @ self.strides)

    def add(self, z: int, w: int) -> int:
        return self.shift(z, w)

    def canonical(self, x) -> np.ndarray:
        """Signed representative of each coordinate in [-floor(L/2), ceil(L/2) - 1]."""
        v = self.as_vector(x)
        half = self.L // 2
        return (v + half) % self.L - half

    @cached_property
    def canonical_coords(self) -> np.ndarray:
        half = self.L // 2
        arr = (self.coords + half) % self.L - half
        arr.flags.writeable = False
        return arr

    @cached_property
    def norm2(self) -> np.ndarray:
        """Squared Euclidean torus norm of every site (distance to the origin)."""
        a = np.minimum(self.coords, self.L - self.coords)
        out = (a * a).sum(axis=1)
        out.flags.writeable = False
        return out

    def dist2(self, x: int, y: int) -> int:
        delta = np.abs(self.coords[x] - self.coords[y])
        delta = np.minimum(delta, self.L - delta)
        return int((delta * delta).sum())

    def dist(self, x: int, y: int) -> float:
        return math.sqrt(self.dist2(x, y))


@dataclass(frozen=True)
class GroupOrdering:
    """An enumeration n -> g_n of the translation group of a torus.

    ``sites[n]`` is the linear index of the shift vector g_n.
    """

    lattice: TorusLattice
    name: str
    sites: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.sites) != list(range(self.lattice.N)):
            raise ValueError(f"ordering {self.name!r} is not a bijection onto the {self.lattice.N} sites")

    def __len__(self) -> int:
        return len(self.sites)

    def __getitem__(self, n: int) -> int:
        return self.sites[n]

    def __iter__(self) -> Iterator[int]:
        return iter(self.sites)

    @classmethod
    def ball(cls, lattice: TorusLattice) -> "GroupOrdering":
        """Sites sorted by torus norm, ties broken lexicographically on signed coordinates."""
        canon = lattice.canonical_coords
        keys = [(int(lattice.norm2[x]), tuple(int(c) for c in canon[x]), x) for x in range(lattice.N)]
        keys.sort()
        return cls(lattice, "ball", tuple(k[2] for k in keys))

    @classmethod
    def linear(cls, lattice: TorusLattice) -> "GroupOrdering":
        if lattice.d != 1:
            raise ValueError("the linear ordering g_n = n is only defined for d = 1")
        return cls(lattice, "linear", tuple(range(lattice.N)))

    @classmethod
    def named(cls, lattice: TorusLattice, name: str) -> "GroupOrdering":
        name = name.lower()
        if name == "ball":
            return cls.ball(lattice)
        if name == "linear":
            return cls.linear(lattice)
        raise ValueError(f"unknown ordering {name!r}; expected 'ball' or 'linear'")


def _tag_words(tag) -> tuple[int, ...]:
    digest = hashlib.sha256(repr(tag).encode()).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


@dataclass
class SeededRng:
    """Deterministic random stream with named, independent substreams.

    ``split(tag)`` derives a child whose stream depends only on the seed and
    the chain of tags, never on how much of the parent has been consumed.
    """

    seed: int
    path: tuple = ()
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        spawn_key = tuple(w for tag in self.path for w in _tag_words(tag))
        self.generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(int(self.seed), spawn_key=spawn_key))
        )

    def split(self, tag) -> "SeededRng":
        return SeededRng(self.seed, self.path + (tag,))

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def random(self, size=None):
        return self.generator.random(size)


class Configuration:
    """A 0/1 occupancy field on a torus (immutable)."""

    __slots__ = ("lattice", "occupancy", "_key")

    def __init__(self, lattice: TorusLattice, occupancy):
        occ = np.asarray(occupancy, dtype=np.uint8).reshape(-1)
        if occ.size != lattice.N:
            raise ValueError(f"occupancy has {occ.size} entries, lattice has {lattice.N} sites")
        if occ.max(initial=0) > 1:
            raise ValueError("occupancy entries must be 0 or 1")
        occ = occ.copy()
        occ.flags.writeable = False
        self.lattice = lattice
        self.occupancy = occ
        self._key = occ.tobytes()

    @classmethod
    def from_sites(cls, lattice: TorusLattice, occupied: Sequence[int]) -> "Configuration":
        occ = np.zeros(lattice.N, dtype=np.uint8)
        occ[list(occupied)] = 1
        return cls(lattice, occ)

    @classmethod
    def from_string(cls, bits: str, d: int = 1) -> "Configuration":
        L = round(len(bits) ** (1 / d))
        return cls(TorusLattice(d, L), [int(ch) for ch in bits])

    @property
    def k(self) -> int:
        return int(self.occupancy.sum())

    @property
    def p_hat(self) -> Fraction:
        return Fraction(self.k, self.lattice.N)

    @property
    def occupied(self) -> np.ndarray:
        return np.flatnonzero(self.occupancy)

    def __getitem__(self, x: int) -> int:
        return int(self.occupancy[x])

    def __eq__(self, other) -> bool:
        return isinstance(other, Configuration) and self.lattice == other.lattice and self._key == other._key

    def __hash__(self) -> int:
        return hash((self.lattice, self._key))

    def __repr__(self) -> str:
        bits = "".join(str(b) for b in self.occupancy[:64])
        more = "..." if self.lattice.N > 64 else ""
        return f"Configuration(d={self.lattice.d}, L={self.lattice.L}, {bits}{more})"

    def bitstring(self) -> str:
        return "".join(str(int(b)) for b in self.occupancy)

    def shifted(self, z) -> "Configuration":
        """The translate T^z gamma, i.e. (T^z gamma)(y) = gamma(y - z)."""
        src = self.lattice.translation(-self.lattice.as_vector(z))
        return Configuration(self.lattice, self.occupancy[src])

    def require_nondegenerate(self) -> None:
        if not 1 <= self.k <= self.lattice.N - 1:
            raise DegenerateConfigurationError(
                f"configuration has k={self.k} occupied sites out of N={self.lattice.N}; need 1 <= k <= N-1"
            )


def sample_bernoulli(lattice: TorusLattice, p, rng: SeededRng, max_retries: int = 1000) -> Configuration:
    """I.i.d. occupancy with probability p, resampled while k is 0 or N."""
    p = as_rational(p)
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    for attempt in range(max_retries):
        occ = rng.integers(0, p.denominator, size=lattice.N) < p.numerator
        k = int(occ.sum())
        if 1 <= k <= lattice.N - 1:
            return Configuration(lattice, occ)
        logger.info("bernoulli sample rejected (k=%d, N=%d), attempt %d", k, lattice.N, attempt + 1)
    raise DegenerateConfigurationError(
        f"no nondegenerate Bernoulli({p}) sample on N={lattice.N} sites after {max_retries} attempts"
    )


def sample_exact_count(lattice: TorusLattice, k: int, rng: SeededRng) -> Configuration:
    """Uniformly random k-subset of occupied sites."""
    if not 1 <= k <= lattice.N - 1:
        raise ValueError(f"k must satisfy 1 <= k <= N-1 = {lattice.N - 1}, got {k}")
    occupied = rng.generator.choice(lattice.N, size=k, replace=False)
    return Configuration.from_sites(lattice, occupied)


def enumerate_configurations(lattice: TorusLattice, k: int, cap: int = ENUMERATION_CAP) -> Iterator[Configuration]:
    """Every configuration with exactly k occupied sites, in lexicographic order of occupied sets."""
    if not 0 <= k <= lattice.N:
        raise ValueError(f"k must lie in [0, {lattice.N}], got {k}")
    count = math.comb(lattice.N, k)
    if count > cap:
        raise ValueError(f"C({lattice.N}, {k}) = {count} exceeds the enumeration cap {cap}")
    for occupied in itertools.combinations(range(lattice.N), k):
        yield Configuration.from_sites(lattice, occupied)
