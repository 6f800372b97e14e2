"""Exhaustive rational checks on small tori under the exact-count law.

mu is uniform on the k-subsets of the torus and mu* is mu conditioned on an
occupied origin. For a kernel x -> P(X = x | Gamma) the joint law of
(Gamma, X) is tabulated exactly, which makes the Palm property of X, the
reverse bound and the mass transport identity plain equalities of fractions.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

from palm_alloc.lattice import Configuration, GroupOrdering, TorusLattice, enumerate_configurations, ENUMERATION_CAP
from palm_alloc.measure import measure_recursion
from palm_alloc.transport import ExtraHeadKernel, TransportPlan, extra_head_kernel, greedy_transport
from palm_alloc.walk import walk_kernel
from palm_alloc.verify.report import StatReport

KernelFn = Callable[[Configuration, GroupOrdering], ExtraHeadKernel]


def greedy_kernel(config: Configuration, order: GroupOrdering) -> ExtraHeadKernel:
    return extra_head_kernel(greedy_transport(config, order))


def _origin_shift(config: Configuration, x: int) -> Configuration:
    """shift(-x, gamma): the configuration seen from site x."""
    return config.shifted(-config.lattice.coords[x])


@dataclass(frozen=True)
class JointLawTable:
    """Exact law of (Gamma, X) with Gamma uniform on a family of configurations."""

    lattice: TorusLattice
    k: int
    order: GroupOrdering
    family: tuple[Configuration, ...]
    kernels: tuple[ExtraHeadKernel, ...]

    @property
    def config_weight(self) -> Fraction:
        return Fraction(1, len(self.family))

    def items(self) -> Iterator[tuple[Configuration, int, Fraction]]:
        w = self.config_weight
        for config, kern in zip(self.family, self.kernels):
            for x, p in kern.weights.items():
                yield config, x, w * p

    def total(self) -> Fraction:
        return sum((w for _, _, w in self.items()), Fraction(0))

    def config_marginal(self) -> dict[Configuration, Fraction]:
        out: dict[Configuration, Fraction] = defaultdict(Fraction)
        for config, _, w in self.items():
            out[config] += w
        return dict(out)

    def recentered_law(self) -> dict[Configuration, Fraction]:
        """Law of shift(-X, Gamma)."""
        out: dict[Configuration, Fraction] = defaultdict(Fraction)
        for config, x, w in self.items():
            out[_origin_shift(config, x)] += w
        return dict(out)

    def joint_recentered(self) -> dict[tuple[Configuration, int], Fraction]:
        """P(shift(-X, Gamma) = g*, X = x), keyed by (g*, x)."""
        out: dict[tuple[Configuration, int], Fraction] = defaultdict(Fraction)
        for config, x, w in self.items():
            out[(_origin_shift(config, x), x)] += w
        return dict(out)

    def conditional_given_recentered(self) -> dict[tuple[Configuration, int], Fraction]:
        """P(X = x | shift(-X, Gamma) = g*) for every g* of positive mass."""
        joint = self.joint_recentered()
        law = self.recentered_law()
        return {(g, x): w / law[g] for (g, x), w in joint.items()}

    def inflow_at_origin(self) -> dict[Configuration, Fraction]:
        """J(gamma) = sum_x Theta_gamma(x, 0), rebuilt from row-0 kernels by covariance.

        Theta_gamma(x, 0) = Theta_{shift(-x, gamma)}(0, -x), so only the
        tabulated kernels are needed.
        """
        kern = dict(zip(self.family, self.kernels))
        lat = self.lattice
        out = {}
        for config in self.family:
            out[config] = sum((kern[_origin_shift(config, x)].prob(lat.negate(x)) for x in range(lat.N)), Fraction(0))
        return out


def joint_law_table(d: int, L: int, k: int, order: str | GroupOrdering = "ball", kernel_fn: KernelFn | None = None,
                    cap: int = ENUMERATION_CAP) -> JointLawTable:
    lattice = TorusLattice(d, L)
    if not 1 <= k <= lattice.N - 1:
        raise ValueError(f"need 1 <= k <= N-1 = {lattice.N - 1}, got k={k}")
    if isinstance(order, str):
        order = GroupOrdering.named(lattice, order)
    kernel_fn = kernel_fn or greedy_kernel
    family = tuple(enumerate_configurations(lattice, k, cap=cap))
    kernels = tuple(kernel_fn(c, order) for c in family)
    return JointLawTable(lattice, k, order, family, kernels)


def palm_law(family, lattice: TorusLattice) -> dict[Configuration, Fraction]:
    """mu*: uniform over the members of the family with an occupied origin."""
    hits = [c for c in family if c[0] == 1]
    return {c: Fraction(1, len(hits)) for c in hits}


def _params(table: JointLawTable) -> dict:
    return {"d": table.lattice.d, "L": table.lattice.L, "k": table.k, "order": table.order.name}


def exact_palm_check(d: int, L: int, k: int, order: str = "ball", kernel_fn: KernelFn | None = None,
                     table: JointLawTable | None = None) -> StatReport:
    """Does shift(-X, Gamma) have exactly the law mu*?

    The statistic is the exact total variation distance between the two
    laws; it must be 0. The details also record the independent route
    through J: the recentered law must equal J * mu, and J must be
    (N/k) * gamma(0).
    """
    table = table or joint_law_table(d, L, k, order, kernel_fn)
    target = palm_law(table.family, table.lattice)
    law = table.recentered_law()
    keys = set(target) | set(law)
    tv = sum((abs(law.get(g, 0) - target.get(g, 0)) for g in keys), Fraction(0)) / 2
    J = table.inflow_at_origin()
    mu = table.config_weight
    j_law_match = all(law.get(g, 0) == J[g] * mu for g in table.family)
    j_expected = all(J[g] == Fraction(table.lattice.N, table.k) * g[0] for g in table.family)
    return StatReport(
        name="exact-palm",
        samples=len(table.family),
        statistic=tv,
        threshold=Fraction(0),
        passed=tv == 0,
        params=_params(table),
        details={"total_mass": table.total(), "recentered_equals_J_mu": j_law_match,
                 "J_equals_capacity": j_expected},
    )


def reverse_bound_check(d: int, L: int, k: int, order: str = "ball", kernel_fn: KernelFn | None = None,
                        table: JointLawTable | None = None) -> StatReport:
    """P(X = x | shift(-X, Gamma)) never exceeds k/N; the statistic is the largest value attained."""
    table = table or joint_law_table(d, L, k, order, kernel_fn)
    cond = table.conditional_given_recentered()
    bound = Fraction(table.k, table.lattice.N)
    worst = max(cond.values())
    return StatReport(
        name="reverse-bound",
        samples=len(cond),
        statistic=worst,
        threshold=bound,
        passed=worst <= bound,
        params=_params(table),
        details={"tight": worst == bound, "pairs_at_bound": sum(1 for v in cond.values() if v == bound)},
    )


def _average_plan(plans: list[TransportPlan], N: int) -> dict[tuple[int, int], Fraction]:
    m: dict[tuple[int, int], Fraction] = defaultdict(Fraction)
    w = Fraction(1, len(plans))
    for plan in plans:
        for xy, mass in plan.items():
            m[xy] += w * mass
    return dict(m)


def mass_transport_identity(d: int, L: int, k: int, order: str = "ball", averaging: str = "ensemble",
                            config: Configuration | None = None, cap: int = ENUMERATION_CAP) -> StatReport:
    """Total expected mass out of the origin equals total expected mass in, both exactly 1.

    ``averaging`` picks the expectation defining m(x, y): ``"ensemble"``
    averages over every k-subset, ``"orbit"`` over the N translates of one
    configuration, ``"none"`` uses a single plan as is (not shift-invariant,
    so the identity is expected to break).
    """
    lattice = TorusLattice(d, L)
    ordering = GroupOrdering.named(lattice, order)
    if averaging == "ensemble":
        configs = list(enumerate_configurations(lattice, k, cap=cap))
    else:
        if config is None:
            config = next(enumerate_configurations(lattice, k, cap=cap))
        if averaging == "orbit":
            configs = [config.shifted(lattice.coords[z]) for z in range(lattice.N)]
        elif averaging == "none":
            configs = [config]
        else:
            raise ValueError(f"averaging must be 'ensemble', 'orbit' or 'none', got {averaging!r}")
    m = _average_plan([greedy_transport(c, ordering) for c in configs], lattice.N)
    out0 = sum((v for (x, _), v in m.items() if x == 0), Fraction(0))
    in0 = sum((v for (_, y), v in m.items() if y == 0), Fraction(0))
    gap = abs(out0 - 1) + abs(in0 - 1)
    return StatReport(
        name="mass-transport",
        samples=len(configs),
        statistic=gap,
        threshold=Fraction(0),
        passed=gap == 0,
        params={"d": d, "L": L, "k": k, "order": order, "averaging": averaging},
        details={"mass_out_origin": out0, "mass_in_origin": in0},
    )


def equivalence_check(L: int, k: int | None = None, cap: int = ENUMERATION_CAP) -> StatReport:
    """d = 1: walk kernel, row 0 of the LINEAR greedy plan and the measure recursion agree on every configuration.

    The recursion density c_n(gamma) is compared with the kernel mass at
    site g_n = n. ``k=None`` runs every k in 1 .. L-1. The statistic is the
    number of configurations where any two of the three disagree.
    """
    lattice = TorusLattice(1, L)
    order = GroupOrdering.linear(lattice)
    ks = range(1, L) if k is None else [k]
    checked = 0
    mismatches = []
    for kk in ks:
        rec = measure_recursion(lattice, kk, order, cap=cap)
        for i, config in enumerate(rec.family):
            walk = walk_kernel(config)
            greedy = extra_head_kernel(greedy_transport(config, order))
            meas = {order[n]: rec.c[n][i] for n in range(lattice.N) if rec.c[n][i] != 0}
            checked += 1
            if not (walk == greedy and greedy.weights == meas):
                mismatches.append(config.bitstring())
    return StatReport(
        name="equivalence",
        samples=checked,
        statistic=len(mismatches),
        threshold=0,
        passed=not mismatches,
        params={"d": 1, "L": L, "k": "all" if k is None else k, "order": "linear"},
        details={"mismatches": mismatches[:20]},
    )


def perturbed_kernel_fn(target: Configuration, eps: Fraction = Fraction(1, 7), base: KernelFn = greedy_kernel) -> KernelFn:
    """Mutation for harness testing: on ``target`` move mass eps from one support site to another occupied site.

    The row still sums to 1 and stays on occupied sites, so only the Palm
    property can detect the change.
    """

    def kernel_fn(config: Configuration, order: GroupOrdering) -> ExtraHeadKernel:
        kern = base(config, order)
        if config != target:
            return kern
        weights = dict(kern.weights)
        src = max(weights, key=lambda x: (weights[x], -x))
        dst = next(int(x) for x in config.occupied if int(x) != src)
        amount = min(eps, weights[src])
        weights[src] -= amount
        weights[dst] = weights.get(dst, Fraction(0)) + amount
        return ExtraHeadKernel(config.lattice, weights)

    return kernel_fn


def exact_grid(max_d1_L: int = 8) -> list[tuple[int, int, int, str]]:
    """The standard exhaustive grid: d=1 on L in {4, 6, 8}, every k, both orderings; d=2, L=3, k = 2..7, ball."""
    grid = []
    for L in (4, 6, 8):
        if L > max_d1_L:
            continue
        for k in range(1, L):
            for order in ("ball", "linear"):
                grid.append((1, L, k, order))
    for k in range(2, 8):
        grid.append((2, 3, k, "ball"))
    return grid
