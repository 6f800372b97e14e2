from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import walk_law_by_intervals
from palm_alloc import (
    Configuration,
    GroupOrdering,
    TorusLattice,
    enumerate_configurations,
    extra_head_kernel,
    greedy_transport,
    measure_recursion,
    meshalkin_matching,
    walk_kernel,
    walk_scheme,
)
from palm_alloc.measure import palm_measure, uniform_measure
from palm_alloc.walk import walk_prefix_sums

EXAMPLE = "0010010101"

bitstrings = st.lists(st.integers(0, 1), min_size=2, max_size=14).filter(lambda b: 0 < sum(b) < len(b))


def test_walk_two_site_example():
    c = Configuration.from_string("01")
    assert walk_prefix_sums(c) == [1, 0]
    assert {walk_scheme(c, Fraction(j, 7)) for j in range(1, 7)} == {1}


@pytest.mark.parametrize("u, expected", [("1/10", 9), ("49/100", 9), ("51/100", 2), ("99/100", 2)])
def test_walk_example_configuration(u, expected):
    assert walk_scheme(Configuration.from_string(EXAMPLE), u) == expected


def test_walk_example_kernel():
    kern = walk_kernel(Configuration.from_string(EXAMPLE))
    assert kern.weights == {2: Fraction(1, 2), 9: Fraction(1, 2)}


def test_walk_lazy_and_domain():
    c = Configuration.from_string("1001")
    assert walk_scheme(c, Fraction(1, 3)) == 0
    assert walk_kernel(c).weights == {0: 1}
    with pytest.raises(ValueError):
        walk_scheme(c, 1)
    with pytest.raises(ValueError):
        walk_kernel(Configuration(TorusLattice(2, 2), [0, 1, 0, 1]))


@given(bitstrings)
def test_walk_kernel_matches_interval_oracle(bits):
    config = Configuration(TorusLattice(1, len(bits)), bits)
    assert walk_kernel(config).weights == walk_law_by_intervals(bits)


@given(bitstrings)
def test_walk_kernel_equals_greedy_linear(bits):
    config = Configuration(TorusLattice(1, len(bits)), bits)
    plan = greedy_transport(config, GroupOrdering.linear(config.lattice))
    assert walk_kernel(config) == extra_head_kernel(plan)


# --- Meshalkin ------------------------------------------------------------------


@pytest.mark.parametrize("bits, i", [("001101", 0), ("10011001", 1), ("01001101", 2), ("1100", 2)])
def test_meshalkin_segment(bits, i):
    # a (0, 0, 1, 1) segment starting at i, read cyclically
    N = len(bits)
    assert [bits[(i + j) % N] for j in range(4)] == list("0011")
    phi = meshalkin_matching(Configuration.from_string(bits))
    assert phi[i] == (i + 3) % N
    assert phi[(i + 1) % N] == (i + 2) % N


def test_meshalkin_adjacent_pairs():
    assert meshalkin_matching(Configuration.from_string("0101")) == {0: 1, 2: 3}
    assert meshalkin_matching(Configuration.from_string("01")) == {0: 1}


def test_meshalkin_needs_half_density():
    with pytest.raises(ValueError):
        meshalkin_matching(Configuration.from_string("0111"))


@given(st.integers(1, 7).flatmap(lambda h: st.permutations([0] * h + [1] * h)))
def test_meshalkin_perfect_and_nested(bits):
    config = Configuration(TorusLattice(1, len(bits)), bits)
    phi = meshalkin_matching(config)
    N = len(bits)
    assert sorted(phi) == [x for x in range(N) if bits[x] == 0]
    assert sorted(phi.values()) == [x for x in range(N) if bits[x] == 1]
    # arcs go forward from the 0 to its 1; two arcs never cross
    arcs = [(a, (b - a) % N) for a, b in phi.items()]
    for a, la in arcs:
        for b, lb in arcs:
            if a == b:
                continue
            start = (b - a) % N
            if 0 < start < la:
                assert start + lb < la


# --- measure recursion ----------------------------------------------------------


def test_measure_initial_densities():
    lat = TorusLattice(1, 5)
    rec = measure_recursion(lat, 2, GroupOrdering.ball(lat))
    for i, g in enumerate(rec.family):
        assert rec.a[0][i] == 1
        assert rec.b[0][i] == Fraction(5, 2) * g[0]


def test_measure_full_stage_sums_to_one_and_stays_nonnegative():
    lat = TorusLattice(2, 3)
    rec = measure_recursion(lat, 4, GroupOrdering.ball(lat))
    for i in range(len(rec.family)):
        assert sum(c[i] for c in rec.c) == 1
    assert all(v >= 0 for row in rec.a + rec.b for v in row)


def test_measure_lazy_first_stage():
    lat = TorusLattice(1, 6)
    rec = measure_recursion(lat, 5, GroupOrdering.ball(lat))
    for i, g in enumerate(rec.family):
        if g[0]:
            assert rec.c[0][i] == 1


def test_measure_chi_and_palm():
    lat = TorusLattice(1, 4)
    rec = measure_recursion(lat, 2, GroupOrdering.linear(lat))
    assert sum(rec.chi(n).total() for n in range(4)) == 1
    mu = uniform_measure(rec.family)
    palm = palm_measure(mu)
    assert palm.total() == 1
    assert all(w == 0 for g, w in zip(palm.family, palm.weights) if g[0] == 0)


@pytest.mark.parametrize("L", range(2, 13))
@pytest.mark.parametrize("order", ["linear", "ball"])
def test_recursion_density_is_greedy_row(L, order):
    lat = TorusLattice(1, L)
    ordering = GroupOrdering.named(lat, order)
    for k in sorted({1, L // 2, L - 1} - {0, L}):
        rec = measure_recursion(lat, k, ordering)
        for i, config in enumerate(rec.family):
            plan = greedy_transport(config, ordering)
            assert [rec.c[n][i] for n in range(L)] == [plan.mass(0, ordering[n]) for n in range(L)]


def test_recursion_density_is_greedy_row_2d():
    lat = TorusLattice(2, 3)
    ordering = GroupOrdering.ball(lat)
    rec = measure_recursion(lat, 3, ordering)
    for i, config in enumerate(rec.family):
        plan = greedy_transport(config, ordering)
        assert [rec.c[n][i] for n in range(lat.N)] == [plan.mass(0, ordering[n]) for n in range(lat.N)]


def test_recursion_guards():
    lat = TorusLattice(1, 4)
    with pytest.raises(ValueError):
        measure_recursion(lat, 0, GroupOrdering.ball(lat))
    with pytest.raises(ValueError):
        measure_recursion(lat, 2, GroupOrdering.ball(TorusLattice(1, 5)))
    with pytest.raises(ValueError):
        measure_recursion(TorusLattice(1, 30), 15, GroupOrdering.linear(TorusLattice(1, 30)))


def test_exhaustive_walk_equals_greedy_small():
    for L in range(2, 9):
        for k in range(1, L):
            for config in enumerate_configurations(TorusLattice(1, L), k):
                plan = greedy_transport(config, GroupOrdering.linear(config.lattice))
                assert walk_kernel(config) == extra_head_kernel(plan)
