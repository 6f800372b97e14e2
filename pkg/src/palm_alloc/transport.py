"""Balanced transport rules built by the invariant greedy algorithm.

Masses are exact rationals. Internally a plan stores integer numerators over a
common denominator ``scale``; the greedy construction uses ``scale = k`` so
that every site sends ``k`` units and every occupied site can absorb ``N``
units, which keeps the whole stage loop in integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

import numpy as np

from palm_alloc.lattice import Configuration, GroupOrdering, SeededRng, TorusLattice


class TransportPlan:
    """Sparse nonnegative mass matrix between torus sites."""

    def __init__(self, lattice: TorusLattice, scale: int, entries: Mapping[tuple[int, int], int]):
        if scale <= 0:
            raise ValueError("scale must be a positive integer")
        self.lattice = lattice
        self.scale = int(scale)
        self.entries = {(int(x), int(y)): int(m) for (x, y), m in entries.items() if m != 0}
        if any(m < 0 for m in self.entries.values()):
            raise ValueError("transport masses must be nonnegative")
        N = lattice.N
        self._out = np.zeros(N, dtype=object)
        self._in = np.zeros(N, dtype=object)
        for (x, y), m in self.entries.items():
            self._out[x] += m
            self._in[y] += m

    @classmethod
    def from_fractions(cls, lattice: TorusLattice, masses: Mapping[tuple[int, int], Fraction]) -> "TransportPlan":
        scale = 1
        for m in masses.values():
            scale = math.lcm(scale, Fraction(m).denominator)
        entries = {xy: int(Fraction(m) * scale) for xy, m in masses.items()}
        return cls(lattice, scale, entries)

    def mass(self, x: int, y: int) -> Fraction:
        return Fraction(self.entries.get((x, y), 0), self.scale)

    def items(self) -> Iterator[tuple[tuple[int, int], Fraction]]:
        """Nonzero entries ordered by x then y."""
        for xy in sorted(self.entries):
            yield xy, Fraction(self.entries[xy], self.scale)

    def as_fractions(self) -> dict[tuple[int, int], Fraction]:
        return dict(self.items())

    def row(self, x: int) -> dict[int, Fraction]:
        return {y: Fraction(m, self.scale) for (a, y), m in sorted(self.entries.items()) if a == x}

    def mass_out(self, x: int) -> Fraction:
        return Fraction(int(self._out[x]), self.scale)

    def mass_in(self, y: int) -> Fraction:
        return Fraction(int(self._in[y]), self.scale)

    def balance_defects(self, config: Configuration) -> list[str]:
        """Every violated balance identity, as readable strings (empty when balanced).

        Checked exactly: each site sends one unit and each site y receives
        N/k * gamma(y).
        """
        N, k = self.lattice.N, config.k
        problems = []
        for x in range(N):
            # out = scale  and  in * k = N * scale * gamma(y), in integers
            if self._out[x] != self.scale:
                problems.append(f"mass_out({x}) = {self.mass_out(x)} != 1")
            if self._in[x] * k != N * self.scale * config[x]:
                problems.append(f"mass_in({x}) = {self.mass_in(x)} != {Fraction(N, k) * config[x]}")
        return problems

    def is_balanced(self, config: Configuration) -> bool:
        return not self.balance_defects(config)

    def shifted(self, z) -> "TransportPlan":
        """The plan moved by z: entry (x, y) becomes (x + z, y + z)."""
        t = self.lattice.translation(z)
        return TransportPlan(self.lattice, self.scale, {(int(t[x]), int(t[y])): m for (x, y), m in self.entries.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransportPlan) or other.lattice != self.lattice:
            return NotImplemented
        return self.as_fractions() == other.as_fractions()

    def __repr__(self) -> str:
        return f"TransportPlan(d={self.lattice.d}, L={self.lattice.L}, nnz={len(self.entries)}, scale={self.scale})"


@dataclass
class GreedyTrace:
    """Per-stage increments of the greedy construction.

    ``stages[n]`` holds ``(src, dst, amount)`` integer arrays for stage n,
    amounts in units of ``1/scale``.
    """

    lattice: TorusLattice
    scale: int
    order: GroupOrdering
    stages: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = field(default_factory=list)

    def increment(self, n: int) -> TransportPlan:
        src, dst, amt = self.stages[n]
        return TransportPlan(self.lattice, self.scale, {(int(a), int(b)): int(m) for a, b, m in zip(src, dst, amt)})

    def partial(self, n: int) -> TransportPlan:
        """theta^n: everything sent during stages 0 .. n-1."""
        entries: dict[tuple[int, int], int] = {}
        for src, dst, amt in self.stages[:n]:
            for a, b, m in zip(src.tolist(), dst.tolist(), amt.tolist()):
                entries[(a, b)] = entries.get((a, b), 0) + m
        return TransportPlan(self.lattice, self.scale, entries)

    def out_totals(self, n: int) -> np.ndarray:
        tot = np.zeros(self.lattice.N, dtype=np.int64)
        for src, _, amt in self.stages[:n]:
            np.add.at(tot, src, amt)
        return tot

    def in_totals(self, n: int) -> np.ndarray:
        tot = np.zeros(self.lattice.N, dtype=np.int64)
        for _, dst, amt in self.stages[:n]:
            np.add.at(tot, dst, amt)
        return tot


def _check_inputs(config: Configuration, order: GroupOrdering) -> None:
    config.require_nondegenerate()
    if order.lattice != config.lattice:
        raise ValueError("ordering and configuration live on different lattices")


def greedy_transport(config: Configuration, order: GroupOrdering, trace: bool = False):
    """Run the invariant greedy algorithm and return the balanced plan.

    At stage n every site x sends to x + g_n as much as it still has, capped
    by what x + g_n can still absorb. Because x -> x + g_n is a bijection,
    each receiver hears from exactly one sender per stage, so all sites can
    be updated at once.

    Returns the plan, or ``(plan, GreedyTrace)`` when ``trace`` is set.
    """
    _check_inputs(config, order)
    lattice = config.lattice
    N, k = lattice.N, config.k
    out_left = np.full(N, k, dtype=np.int64)
    cap_left = config.occupancy.astype(np.int64) * N
    coords, strides, L = lattice.coords, lattice.strides, lattice.L
    src_parts, dst_parts, amt_parts = [], [], []
    stages = [] if trace else None
    empty = np.zeros(0, dtype=np.int64)

    for g in order.sites:
        if not out_left.any():
            if trace:
                stages.append((empty, empty, empty))
            continue
        # src[y] = y - g_n, the unique sender to y at this stage
        src = ((coords - coords[g]) % L) @ strides
        send = np.minimum(out_left[src], cap_left)
        hit = np.flatnonzero(send)
        if hit.size:
            s, amt = src[hit], send[hit]
            out_left[s] -= amt
            cap_left[hit] -= amt
            src_parts.append(s)
            dst_parts.append(hit)
            amt_parts.append(amt)
        if trace:
            stages.append((src[hit], hit, send[hit]) if hit.size else (empty, empty, empty))

    entries: dict[tuple[int, int], int] = {}
    for s, t, a in zip(src_parts, dst_parts, amt_parts):
        for x, y, m in zip(s.tolist(), t.tolist(), a.tolist()):
            entries[(x, y)] = entries.get((x, y), 0) + m
    plan = TransportPlan(lattice, k, entries)
    if trace:
        return plan, GreedyTrace(lattice, k, order, stages)
    return plan


@dataclass(frozen=True)
class IntegralityReport:
    is_integer: bool
    u: int
    multiples_of_inverse_u: bool


def integrality_report(plan: TransportPlan, config: Configuration) -> IntegralityReport:
    """Whether the plan is integer-valued, and whether every mass lies in (1/u)Z.

    u is the numerator of the empirical density k/N in lowest terms.
    """
    u = config.p_hat.numerator
    masses = [Fraction(m, plan.scale) for m in plan.entries.values()]
    return IntegralityReport(
        is_integer=all(m.denominator == 1 for m in masses),
        u=u,
        multiples_of_inverse_u=all((m * u).denominator == 1 for m in masses),
    )


class ExtraHeadKernel:
    """Conditional law of the extra head X given the configuration."""

    def __init__(self, lattice: TorusLattice, weights: Mapping[int, Fraction]):
        self.lattice = lattice
        self.weights = {int(x): Fraction(w) for x, w in sorted(weights.items()) if w != 0}
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("kernel weights must be nonnegative")
        if sum(self.weights.values()) != 1:
            raise ValueError(f"kernel weights sum to {sum(self.weights.values())}, not 1")

    def prob(self, x: int) -> Fraction:
        return self.weights.get(x, Fraction(0))

    @property
    def support(self) -> list[int]:
        return list(self.weights)

    def is_point_mass(self) -> bool:
        return len(self.weights) == 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExtraHeadKernel):
            return NotImplemented
        return self.lattice == other.lattice and self.weights == other.weights

    def __repr__(self) -> str:
        body = ", ".join(f"{x}: {w}" for x, w in self.weights.items())
        return f"ExtraHeadKernel({{{body}}})"


def extra_head_kernel(plan: TransportPlan) -> ExtraHeadKernel:
    """Row 0 of the plan, read as the law of X given the configuration."""
    return ExtraHeadKernel(plan.lattice, plan.row(0))


def sample_extra_head(kernel: ExtraHeadKernel, rng: SeededRng) -> int:
    """Draw X from the kernel using one exact integer draw (no float rounding)."""
    den = 1
    for w in kernel.weights.values():
        den = math.lcm(den, w.denominator)
    draw = int(rng.integers(0, den))
    acc = 0
    for x, w in kernel.weights.items():
        acc += w.numerator * (den // w.denominator)
        if draw < acc:
            return x
    raise AssertionError("kernel weights do not sum to 1")
