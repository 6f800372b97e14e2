"""Plain-text formats: configurations, plans, kernels, point patterns and allocation fields.

Readers raise :class:`InputFormatError` carrying the 1-based line number of
the first offending line.
"""

from __future__ import annotations

import csv
import io
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from palm_alloc.allocation import AllocationField, PointPattern
from palm_alloc.allocation.pattern import DEFAULT_TICKS
from palm_alloc.lattice import Configuration, TorusLattice
from palm_alloc.transport import ExtraHeadKernel, TransportPlan


class InputFormatError(ValueError):
    def __init__(self, source: str, line: int, message: str):
        super().__init__(f"{source}:{line}: {message}")
        self.source = source
        self.line = line


def _ints(text: str, source: str, line: int, count: int | None = None) -> list[int]:
    parts = text.replace(",", " ").split()
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise InputFormatError(source, line, f"expected integers, got {text.strip()!r}") from None
    if count is not None and len(values) != count:
        raise InputFormatError(source, line, f"expected {count} integers, got {len(values)}")
    return values


# --- configurations -------------------------------------------------------


def format_configuration(config: Configuration) -> str:
    return f"{config.lattice.d} {config.lattice.L}\n{config.bitstring()}\n"


def parse_configuration(text: str, source: str = "<config>") -> Configuration:
    """First line "d L", second line the N row-major 0/1 characters."""
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise InputFormatError(source, 1, 'expected a header "d L"')
    d, L = _ints(lines[0], source, 1, 2)
    if not 1 <= d <= 3 or L < 1:
        raise InputFormatError(source, 1, f"need 1 <= d <= 3 and L >= 1, got d={d}, L={L}")
    if len(lines) < 2:
        raise InputFormatError(source, 2, "missing occupancy line")
    bits = lines[1].strip()
    lattice = TorusLattice(d, L)
    bad = next((i for i, ch in enumerate(bits) if ch not in "01"), None)
    if bad is not None:
        raise InputFormatError(source, 2, f"column {bad + 1}: expected 0 or 1, got {bits[bad]!r}")
    if len(bits) != lattice.N:
        raise InputFormatError(source, 2, f"expected {lattice.N} sites for d={d}, L={L}, got {len(bits)}")
    for i, extra in enumerate(lines[2:], start=3):
        if extra.strip():
            raise InputFormatError(source, i, "unexpected content after the occupancy line")
    return Configuration(lattice, [int(ch) for ch in bits])


def read_configuration(path) -> Configuration:
    return parse_configuration(Path(path).read_text(encoding="utf-8"), str(path))


def write_configuration(config: Configuration, path) -> None:
    Path(path).write_text(format_configuration(config), encoding="utf-8")


# --- plans and kernels ----------------------------------------------------


def plan_to_csv(plan: TransportPlan) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "y", "num", "den"])
    for (x, y), mass in sorted(plan.items()):
        writer.writerow([x, y, mass.numerator, mass.denominator])
    return buf.getvalue()


def plan_from_csv(text: str, lattice: TorusLattice, source: str = "<plan>") -> TransportPlan:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "x,y,num,den":
        raise InputFormatError(source, 1, 'expected header "x,y,num,den"')
    masses = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        x, y, num, den = _ints(line, source, i, 4)
        if den <= 0 or not (0 <= x < lattice.N and 0 <= y < lattice.N):
            raise InputFormatError(source, i, "site out of range or nonpositive denominator")
        masses[(x, y)] = Fraction(num, den)
    return TransportPlan.from_fractions(lattice, masses)


def kernel_to_csv(kernel: ExtraHeadKernel) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "num", "den"])
    for x in sorted(kernel.weights):
        w = kernel.weights[x]
        writer.writerow([x, w.numerator, w.denominator])
    return buf.getvalue()


# --- point patterns and fields --------------------------------------------


def pattern_to_csv(pattern: PointPattern) -> str:
    """Header line "s d", then one point per line as exact decimal coordinates."""
    T = pattern.ticks_per_unit
    lines = [f"{pattern.s} {pattern.d}"]
    for row in pattern.ticks.tolist():
        lines.append(",".join(_decimal(Fraction(t, T)) for t in row))
    return "\n".join(lines) + "\n"


def _decimal(q: Fraction) -> str:
    """Exact decimal expansion; the tick count is a power of two, so it terminates."""
    whole, rem = divmod(q.numerator, q.denominator)
    if rem == 0:
        return str(whole)
    digits = []
    while rem:
        rem *= 10
        digit, rem = divmod(rem, q.denominator)
        digits.append(str(digit))
        if len(digits) > 40:
            raise ValueError(f"{q} has no short decimal expansion")
    return f"{whole}." + "".join(digits)


def parse_pattern(text: str, source: str = "<pattern>", ticks_per_unit: int = DEFAULT_TICKS) -> PointPattern:
    lines = text.splitlines()
    if not lines:
        raise InputFormatError(source, 1, 'expected a header "s d"')
    s, d = _ints(lines[0], source, 1, 2)
    if s < 1 or not 1 <= d <= 3:
        raise InputFormatError(source, 1, f"need s >= 1 and 1 <= d <= 3, got s={s}, d={d}")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != d:
            raise InputFormatError(source, i, f"expected {d} coordinates, got {len(parts)}")
        try:
            coords = [Fraction(p.strip()) for p in parts]
        except ValueError:
            raise InputFormatError(source, i, f"malformed coordinate in {line.strip()!r}") from None
        if any(not 0 <= x < s for x in coords):
            raise InputFormatError(source, i, f"coordinates must lie in [0, {s})")
        # nearest tick, halves rounded up; exact for coordinates written by pattern_to_csv
        rows.append([math.floor(x * ticks_per_unit + Fraction(1, 2)) % (s * ticks_per_unit) for x in coords])
    if not rows:
        raise InputFormatError(source, len(lines) + 1, "pattern has no points")
    try:
        return PointPattern(s, d, np.array(rows, dtype=np.int64), ticks_per_unit)
    except ValueError as exc:
        raise InputFormatError(source, len(lines), str(exc)) from None


def read_pattern(path, ticks_per_unit: int = DEFAULT_TICKS) -> PointPattern:
    return parse_pattern(Path(path).read_text(encoding="utf-8"), str(path), ticks_per_unit)


def field_to_csv(field: AllocationField, ranks: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["cell_index", "point_index", "dist_rank"])
    for c, (p, r) in enumerate(zip(field.assignment.tolist(), ranks.tolist())):
        writer.writerow([c, p, r])
    return buf.getvalue()


def field_from_csv(text: str, grid, source: str = "<field>") -> tuple[np.ndarray, np.ndarray]:
    """(assignment, ranks) per cell."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "cell_index,point_index,dist_rank":
        raise InputFormatError(source, 1, 'expected header "cell_index,point_index,dist_rank"')
    assign = np.full(grid.M, -1, dtype=np.int64)
    ranks = np.full(grid.M, -1, dtype=np.int64)
    seen = np.zeros(grid.M, dtype=bool)
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        c, p, r = _ints(line, source, i, 3)
        if not 0 <= c < grid.M or seen[c]:
            raise InputFormatError(source, i, f"cell index {c} out of range or repeated")
        seen[c] = True
        assign[c], ranks[c] = p, r
    if not seen.all():
        raise InputFormatError(source, len(lines), f"{int((~seen).sum())} cells missing")
    return assign, ranks
