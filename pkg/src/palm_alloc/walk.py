"""One-dimensional schemes: the walk extra head and the Meshalkin matching.

On the cycle Z/LZ the walk sum_{i<=n} (1 - gamma(i)/p_hat) returns to exactly
0 after one lap, so the walk scheme always stops within L steps.
"""

from __future__ import annotations

from fractions import Fraction

from palm_alloc.lattice import Configuration, as_rational
from palm_alloc.transport import ExtraHeadKernel


def _require_1d(config: Configuration) -> None:
    if config.lattice.d != 1:
        raise ValueError("walk and matching schemes are defined for d = 1 only")
    config.require_nondegenerate()


def walk_prefix_sums(config: Configuration) -> list[Fraction]:
    _require_1d(config)
    inv_p = 1 / config.p_hat
    total = Fraction(0)
    sums = []
    for bit in config.occupancy.tolist():
        total += 1 - inv_p * bit
        sums.append(total)
    return sums


def walk_scheme(config: Configuration, u) -> int:
    """First n >= 0 whose prefix sum drops strictly below u."""
    u = as_rational(u)
    if not 0 < u < 1:
        raise ValueError(f"u must lie in (0, 1), got {u}")
    for n, s in enumerate(walk_prefix_sums(config)):
        if s < u:
            return n
    raise AssertionError("full-lap prefix sum is 0, the walk must have stopped")


def walk_kernel(config: Configuration) -> ExtraHeadKernel:
    """Exact law of the walk scheme over u ~ Uniform(0, 1).

    X <= n exactly when u exceeds the running minimum of the prefix sums up
    to n, so each site gets the drop in the clamped running minimum.
    """
    weights: dict[int, Fraction] = {}
    prev = Fraction(1)
    running = None
    for n, s in enumerate(walk_prefix_sums(config)):
        running = s if running is None else min(running, s)
        clamped = min(max(running, Fraction(0)), Fraction(1))
        if clamped < prev:
            weights[n] = prev - clamped
        prev = clamped
    return ExtraHeadKernel(config.lattice, weights)


def meshalkin_matching(config: Configuration) -> dict[int, int]:
    """Match each unoccupied site to an occupied one by repeatedly pairing adjacent (0, 1).

    Works cyclically: after every pass the matched pairs are removed and the
    survivors are read again as a cyclic sequence.
    """
    _require_1d(config)
    N = config.lattice.N
    if 2 * config.k != N:
        raise ValueError(f"Meshalkin matching needs exactly half the sites occupied (k={config.k}, N={N})")
    remaining = list(range(N))
    matching: dict[int, int] = {}
    while remaining:
        m = len(remaining)
        taken = set()
        for pos in range(m):
            a, b = remaining[pos], remaining[(pos + 1) % m]
            if config[a] == 0 and config[b] == 1:
                matching[a] = b
                taken.update((a, b))
        if not taken:
            raise AssertionError("no adjacent (0, 1) pair in a balanced cyclic sequence")
        remaining = [x for x in remaining if x not in taken]
    return matching
