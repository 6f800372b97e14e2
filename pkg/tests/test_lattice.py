import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from palm_alloc.lattice import (
    Configuration,
    DegenerateConfigurationError,
    GroupOrdering,
    SeededRng,
    TorusLattice,
    as_rational,
    enumerate_configurations,
    sample_bernoulli,
    sample_exact_count,
)

lattices = st.builds(TorusLattice, d=st.integers(1, 3), L=st.integers(1, 6))
rationals = st.fractions(max_denominator=50)


@st.composite
def lattice_and_sites(draw, n=2):
    lat = draw(lattices)
    return lat, [draw(st.integers(0, lat.N - 1)) for _ in range(n)]


def test_lattice_counts_and_addressing():
    lat = TorusLattice(2, 5)
    assert lat.N == 25
    assert lat.coord(7) == (1, 2)
    assert lat.index((1, 2)) == 7
    assert lat.index((6, -3)) == 7


@pytest.mark.parametrize("d, L", [(0, 3), (4, 2), (1, 0)])
def test_lattice_rejects_bad_shape(d, L):
    with pytest.raises(ValueError):
        TorusLattice(d, L)


@given(lattice_and_sites(3))
def test_shift_is_a_group_action(case):
    lat, (z, w, x) = case
    assert lat.shift(0, x) == x
    assert lat.shift(z, lat.shift(w, x)) == lat.shift(lat.add(z, w), x)
    assert lat.shift(lat.negate(z), lat.shift(z, x)) == x


@given(lattice_and_sites(3))
def test_distance_symmetric_and_shift_invariant(case):
    lat, (z, x, y) = case
    assert lat.dist2(x, y) == lat.dist2(y, x)
    assert lat.dist2(lat.shift(z, x), lat.shift(z, y)) == lat.dist2(x, y)


@given(lattices)
def test_translation_is_permutation(lat):
    for z in range(0, lat.N, max(1, lat.N // 5)):
        assert sorted(lat.translation(z).tolist()) == list(range(lat.N))


def test_canonical_range():
    lat = TorusLattice(1, 6)
    assert sorted(lat.canonical_coords[:, 0].tolist()) == [-3, -2, -1, 0, 1, 2]
    lat = TorusLattice(1, 5)
    assert sorted(lat.canonical_coords[:, 0].tolist()) == [-2, -1, 0, 1, 2]


# --- orderings ---------------------------------------------------------------


@pytest.mark.parametrize("d, L", [(1, 1), (1, 2), (1, 7), (2, 4), (2, 5), (3, 3)])
def test_ball_is_bijection_starting_at_origin(d, L):
    lat = TorusLattice(d, L)
    order = GroupOrdering.ball(lat)
    assert sorted(order) == list(range(lat.N))
    assert order[0] == 0
    norms = [int(lat.norm2[g]) for g in order]
    assert norms == sorted(norms)


def test_ball_tie_break_is_lexicographic_on_signed_coordinates():
    lat = TorusLattice(2, 5)
    order = GroupOrdering.ball(lat)
    first = [tuple(int(c) for c in lat.canonical_coords[g]) for g in order.sites[:5]]
    assert first == [(0, 0), (-1, 0), (0, -1), (0, 1), (1, 0)]
    assert GroupOrdering.ball(lat) == order


def test_linear_ordering():
    lat = TorusLattice(1, 6)
    assert GroupOrdering.linear(lat).sites == tuple(range(6))
    with pytest.raises(ValueError):
        GroupOrdering.linear(TorusLattice(2, 3))
    with pytest.raises(ValueError):
        GroupOrdering.named(lat, "spiral")


def test_ordering_must_be_bijection():
    with pytest.raises(ValueError):
        GroupOrdering(TorusLattice(1, 3), "bad", (0, 1, 1))


@given(lattice_and_sites(1))
def test_shifted_ordering_reenumerates_group(case):
    lat, (z,) = case
    for order in (GroupOrdering.ball(lat),) + ((GroupOrdering.linear(lat),) if lat.d == 1 else ()):
        assert sorted(lat.shift(z, g) for g in order) == list(range(lat.N))


# --- rationals ------------------------------------------------------------------


@given(rationals, rationals)
def test_rational_closure_and_min_identity(a, b):
    for v in (a + b, a - b, min(a, b)):
        assert isinstance(v, Fraction)
    assert min(a, b) + abs(a - b) == max(a, b)
    assert 2 * min(a, b) + abs(a - b) == a + b


def test_as_rational_refuses_floats():
    assert as_rational("3/5") == Fraction(3, 5)
    with pytest.raises(TypeError):
        as_rational(0.5)


# --- configurations -------------------------------------------------------------


def test_configuration_basics():
    c = Configuration.from_string("0110")
    assert c.k == 2 and c.p_hat == Fraction(1, 2)
    assert c.occupied.tolist() == [1, 2]
    assert c.shifted(1).bitstring() == "0011"
    with pytest.raises(ValueError):
        Configuration(TorusLattice(1, 3), [0, 2, 1])
    with pytest.raises(DegenerateConfigurationError):
        Configuration.from_string("000").require_nondegenerate()


@given(lattice_and_sites(2))
def test_configuration_shift_matches_lattice_shift(case):
    lat, (z, x) = case
    occ = np.zeros(lat.N, dtype=np.uint8)
    occ[x] = 1
    moved = Configuration(lat, occ).shifted(z)
    assert moved.occupied.tolist() == [lat.shift(z, x)]


@pytest.mark.parametrize("N, k, count", [(4, 2, 6), (3, 3, 1), (12, 6, 924), (5, 0, 1)])
def test_enumeration_counts(N, k, count):
    configs = list(enumerate_configurations(TorusLattice(1, N), k))
    assert len(configs) == count == math.comb(N, k)
    assert len(set(configs)) == count


def test_enumeration_cap():
    with pytest.raises(ValueError, match="cap"):
        list(enumerate_configurations(TorusLattice(1, 30), 15))


def test_full_configuration_is_rejected_downstream():
    (full,) = enumerate_configurations(TorusLattice(1, 3), 3)
    with pytest.raises(DegenerateConfigurationError):
        full.require_nondegenerate()


# --- randomness -----------------------------------------------------------------


def test_seeded_rng_streams():
    a = SeededRng(5).split("x").random(4)
    b = SeededRng(5).split("x").random(4)
    c = SeededRng(5).split("y").random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    parent = SeededRng(5)
    parent.random(100)
    assert np.array_equal(parent.split("x").random(4), a)
    with pytest.raises(ValueError):
        SeededRng(2**64)


def test_bernoulli_reproducible_and_nondegenerate():
    lat = TorusLattice(1, 4)
    a = sample_bernoulli(lat, Fraction(1, 2), SeededRng(3))
    b = sample_bernoulli(lat, Fraction(1, 2), SeededRng(3))
    assert a == b and 1 <= a.k <= 3


def test_bernoulli_near_one_never_degenerate():
    lat = TorusLattice(1, 2)
    for seed in range(20):
        try:
            c = sample_bernoulli(lat, Fraction(99, 100), SeededRng(seed), max_retries=50)
        except DegenerateConfigurationError:
            continue
        assert c.k == 1


def test_bernoulli_law_of_large_numbers():
    c = sample_bernoulli(TorusLattice(1, 10**5), Fraction(1, 2), SeededRng(11))
    assert abs(float(c.p_hat) - 0.5) < 0.01


@pytest.mark.parametrize("p", ["1/2", "1/3", "2/5"])
def test_bernoulli_rejects_bad_p(p):
    with pytest.raises(ValueError):
        sample_bernoulli(TorusLattice(1, 4), Fraction(p) + 1, SeededRng(0))


def test_exact_count_single_site_is_uniform():
    lat = TorusLattice(1, 8)
    root = SeededRng(1)
    counts = Counter(int(sample_exact_count(lat, 1, root.split(i)).occupied[0]) for i in range(4000))
    obs = [counts[x] for x in range(8)]
    assert stats.chisquare(obs).pvalue > 1e-3


def test_exact_count_hole_is_uniform():
    lat = TorusLattice(1, 6)
    root = SeededRng(2)
    holes = Counter(int(np.flatnonzero(sample_exact_count(lat, 5, root.split(i)).occupancy == 0)[0])
                    for i in range(3000))
    assert stats.chisquare([holes[x] for x in range(6)]).pvalue > 1e-3


@pytest.mark.parametrize("z", [1, 3])
def test_exact_count_law_is_shift_invariant(z):
    lat = TorusLattice(1, 6)
    family = list(enumerate_configurations(lat, 3))
    root = SeededRng(4)
    draws = [sample_exact_count(lat, 3, root.split(i)) for i in range(6000)]
    plain = Counter(draws)
    shifted = Counter(c.shifted(z) for c in draws)
    table = np.array([[plain[g] for g in family], [shifted[g] for g in family]])
    # each row alone must be uniform over the 20 configurations, and the rows must agree
    assert stats.chisquare(table[0]).pvalue > 1e-3
    assert stats.chisquare(table[1]).pvalue > 1e-3
    assert stats.chi2_contingency(table).pvalue > 1e-3


@pytest.mark.parametrize("k", [0, 6])
def test_exact_count_rejects_degenerate(k):
    with pytest.raises(ValueError):
        sample_exact_count(TorusLattice(1, 6), k, SeededRng(0))
