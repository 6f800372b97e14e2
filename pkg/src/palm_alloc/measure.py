"""Measure recursion alpha_n, beta_n, chi_n on a finite configuration family.

mu is uniform on the k-subsets of the torus, mu* is mu conditioned on an
occupied origin. All measures are absolutely continuous w.r.t. mu, so the
recursion is carried out on the densities a_n, b_n, c_n:

    c_n = min(a_n, g_n b_n),  a_{n+1} = a_n - c_n,  b_{n+1} = b_n - g_n^{-1} c_n

where (g f)(gamma) = f(g^{-1} gamma) and (g^{-1} gamma)(x) = gamma(x + g).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from palm_alloc.lattice import ENUMERATION_CAP, GroupOrdering, TorusLattice
from palm_alloc.lattice import Configuration, enumerate_configurations


@dataclass(frozen=True)
class MeasureVector:
    """Exact weights on a fixed enumerated family of configurations."""

    family: tuple[Configuration, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.family) != len(self.weights):
            raise ValueError("family and weights differ in length")
        if any(w < 0 for w in self.weights):
            raise ValueError("measure weights must be nonnegative")

    def total(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    def __getitem__(self, config: Configuration) -> Fraction:
        return self.weights[self.family.index(config)]

    def as_dict(self) -> dict[Configuration, Fraction]:
        return dict(zip(self.family, self.weights))


def uniform_measure(family) -> MeasureVector:
    family = tuple(family)
    w = Fraction(1, len(family))
    return MeasureVector(family, (w,) * len(family))


def palm_measure(mu: MeasureVector) -> MeasureVector:
    """mu restricted to configurations with an occupied origin, renormalized."""
    mass = sum((w for g, w in zip(mu.family, mu.weights) if g[0] == 1), Fraction(0))
    if mass == 0:
        raise ValueError("mu gives no mass to an occupied origin")
    return MeasureVector(mu.family, tuple(w / mass if g[0] == 1 else Fraction(0) for g, w in zip(mu.family, mu.weights)))


@dataclass
class MeasureRecursion:
    family: tuple[Configuration, ...]
    order: GroupOrdering
    a: list[list[Fraction]]
    b: list[list[Fraction]]
    c: list[list[Fraction]]

    def chi(self, n: int) -> MeasureVector:
        """chi_n = c_n * mu."""
        mu = Fraction(1, len(self.family))
        return MeasureVector(self.family, tuple(w * mu for w in self.c[n]))

    def density(self, n: int, config: Configuration) -> Fraction:
        return self.c[n][self.family.index(config)]


def measure_recursion(lattice: TorusLattice, k: int, order: GroupOrdering, n_max: int | None = None,
                      cap: int = ENUMERATION_CAP) -> MeasureRecursion:
    """Densities a_n, b_n (n = 0 .. n_max + 1) and c_n (n = 0 .. n_max) for uniform mu on k-subsets."""
    if order.lattice != lattice:
        raise ValueError("ordering belongs to a different lattice")
    if not 1 <= k <= lattice.N - 1:
        raise ValueError(f"need 1 <= k <= N-1, got k={k}")
    if math.comb(lattice.N, k) > cap:
        raise ValueError(f"C({lattice.N}, {k}) exceeds the enumeration cap {cap}")
    if n_max is None:
        n_max = lattice.N - 1
    family = tuple(enumerate_configurations(lattice, k, cap=cap))
    position = {g: i for i, g in enumerate(family)}

    def translate_index(g: int) -> list[int]:
        # i -> index of g.gamma_i, where (g.gamma)(x) = gamma(x - g)
        return [position[cfg.shifted(g)] for cfg in family]

    inv_p = Fraction(lattice.N, k)
    a = [Fraction(1)] * len(family)
    b = [inv_p * cfg[0] for cfg in family]
    a_hist, b_hist, c_hist = [list(a)], [list(b)], []
    for n in range(n_max + 1):
        g = order[n]
        fwd = translate_index(g)                    # g_n gamma
        back = translate_index(lattice.negate(g))   # g_n^{-1} gamma
        c = [min(a[i], b[back[i]]) for i in range(len(family))]
        a = [a[i] - c[i] for i in range(len(family))]
        b = [b[i] - c[fwd[i]] for i in range(len(family))]
        c_hist.append(c)
        a_hist.append(list(a))
        b_hist.append(list(b))
    return MeasureRecursion(family, order, a_hist, b_hist, c_hist)
