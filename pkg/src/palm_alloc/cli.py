"""Command-line front end: ``palm-alloc <command> [options]``.

Exit status is 0 on success, 1 when a verification fails and 2 on a usage
or input error. Every run that writes files also writes a JSON manifest
listing each artifact with its sha256 checksum.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

from palm_alloc import io as pio
from palm_alloc.allocation import (
    CellGrid,
    blocking_pairs,
    distance_ranks,
    max_displacement,
    sample_poisson_pattern,
    stable_allocate,
)
from palm_alloc.allocation.render import render_allocation
from palm_alloc.lattice import GroupOrdering, SeededRng, TorusLattice, sample_bernoulli, sample_exact_count
from palm_alloc.transport import extra_head_kernel, greedy_transport, integrality_report
from palm_alloc.verify import (
    StatReport,
    equivalence_check,
    exact_grid,
    exact_palm_check,
    joint_law_table,
    mass_transport_identity,
    reports_to_csv,
    reports_to_json,
    reverse_bound_check,
    statistical_palm_check_allocation,
    tail_diagnostics,
    tails_to_csv,
)
from palm_alloc.walk import meshalkin_matching, walk_kernel, walk_scheme

FILE_SUFFIXES = {".csv", ".json", ".txt", ".png", ".svg"}

BUDGETS = {
    "smoke": {"max_d1_L": 6, "d2": False, "equivalence_L": 6, "palm": {"s": 8, "cells_per_unit": 4, "samples": 1000}},
    "desk": {"max_d1_L": 8, "d2": True, "equivalence_L": 10, "palm": {"s": 16, "cells_per_unit": 8, "samples": 10_000}},
}


class UsageError(Exception):
    pass


# --- output handling ------------------------------------------------------


class Output:
    """Where artifacts go.

    ``--out`` naming a file (known suffix) makes that file the primary
    artifact, with the manifest beside it as ``<stem>.manifest.json``; any
    other value is a directory holding every artifact plus ``manifest.json``.
    Without ``--out`` results go to stdout and no manifest is written.
    """

    def __init__(self, out: str | None):
        self.primary: Path | None = None
        self.directory: Path | None = None
        if out is not None:
            path = Path(out)
            if path.suffix.lower() in FILE_SUFFIXES:
                self.primary = path
                self.directory = path.parent
            else:
                self.directory = path
        self.artifacts: list[Path] = []

    @property
    def enabled(self) -> bool:
        return self.directory is not None

    def path_for(self, name: str, primary: bool = False) -> Path:
        if primary and self.primary is not None:
            return self.primary
        return self.directory / name

    def write_text(self, name: str, text: str, primary: bool = False) -> Path | None:
        if not self.enabled:
            sys.stdout.write(text)
            return None
        path = self.path_for(name, primary)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        self.artifacts.append(path)
        return path

    def register(self, path: Path) -> None:
        self.artifacts.append(Path(path))

    def manifest_path(self) -> Path:
        if not self.enabled:
            # only side artifacts such as --render images; the manifest sits next to the first
            first = self.artifacts[0]
            return first.with_name(first.stem + ".manifest.json")
        if self.primary is not None:
            return self.primary.with_name(self.primary.stem + ".manifest.json")
        return self.directory / "manifest.json"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Output, args, params: dict, started: float, status: int) -> None:
    if not out.enabled and not out.artifacts:
        return
    base = out.manifest_path().parent
    artifacts = {}
    for path in out.artifacts:
        try:
            key = str(path.resolve().relative_to(base.resolve()))
        except ValueError:
            key = str(path)
        artifacts[key] = _sha256(path)
    manifest = {
        "subcommand": args.command if args.command != "verify" else f"verify {args.check}",
        "parameters": params,
        "seed": args.seed,
        "threads": args.threads,
        "format": args.format,
        "artifacts": dict(sorted(artifacts.items())),
        "exit_code": status,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    path = out.manifest_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _render_reports(reports: list[StatReport], fmt: str) -> str:
    return reports_to_csv(reports) if fmt == "csv" else reports_to_json(reports)


def _emit_reports(out: Output, name: str, reports: list[StatReport], fmt: str) -> int:
    for r in reports:
        print(r.summary(), file=sys.stderr if not out.enabled else sys.stdout)
    if out.enabled:
        out.write_text(f"{name}.{fmt}", _render_reports(reports, fmt), primary=True)
    else:
        sys.stdout.write(_render_reports(reports, fmt))
    return 0 if all(r.passed for r in reports) else 1


# --- argument types -------------------------------------------------------


def _seed(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a decimal integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational like 1/3, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


# --- commands -------------------------------------------------------------


def cmd_sample(args, out: Output) -> tuple[int, dict]:
    lattice = TorusLattice(args.d, args.L)
    rng = SeededRng(args.seed).split("sample")
    if (args.k is None) == (args.p is None):
        raise UsageError("give exactly one of --k (exact count) or --p (Bernoulli density)")
    config = sample_exact_count(lattice, args.k, rng) if args.k is not None else sample_bernoulli(lattice, args.p, rng)
    out.write_text("config.txt", pio.format_configuration(config), primary=True)
    return 0, {"d": args.d, "L": args.L, "k": args.k, "p": None if args.p is None else str(args.p)}


def cmd_greedy(args, out: Output) -> tuple[int, dict]:
    config = pio.read_configuration(args.config)
    order = GroupOrdering.named(config.lattice, args.order)
    plan = greedy_transport(config, order)
    integ = integrality_report(plan, config)
    balanced = plan.is_balanced(config)
    print(f"k={config.k} N={config.lattice.N} balanced={balanced} integer={integ.is_integer} multiples_of_1/u={integ.multiples_of_inverse_u} u={integ.u}",
          file=sys.stderr)
    out.write_text("plan.csv", pio.plan_to_csv(plan), primary=True)
    if out.enabled and out.primary is None:
        out.write_text("kernel.csv", pio.kernel_to_csv(extra_head_kernel(plan)))
    return (0 if balanced else 1), {"config": config.bitstring(), "d": config.lattice.d, "L": config.lattice.L,
                                     "order": args.order}


def cmd_walk(args, out: Output) -> tuple[int, dict]:
    config = pio.read_configuration(args.config)
    params = {"config": config.bitstring(), "u": None if args.u is None else str(args.u)}
    if args.u is not None:
        out.write_text("walk.txt", f"{walk_scheme(config, args.u)}\n", primary=True)
    else:
        out.write_text("kernel.csv", pio.kernel_to_csv(walk_kernel(config)), primary=True)
    return 0, params


def cmd_meshalkin(args, out: Output) -> tuple[int, dict]:
    config = pio.read_configuration(args.config)
    matching = meshalkin_matching(config)
    lines = ["unoccupied,occupied"] + [f"{a},{b}" for a, b in sorted(matching.items())]
    out.write_text("matching.csv", "\n".join(lines) + "\n", primary=True)
    return 0, {"config": config.bitstring()}


def _allocate_and_write(pattern, grid, out: Output, render: str | None, check: bool) -> int:
    field = stable_allocate(pattern, grid)
    sizes = field.territory_sizes()
    status = 0
    summary = (f"n={pattern.n} M={grid.M} quotas={int(field.quotas.min())}..{int(field.quotas.max())} "
               f"filled={bool((sizes == field.quotas).all())} rounds={field.rounds} "
               f"max_distance={max_displacement(field, pattern):.6g} quantization_error={field.quantization_error():.6g}")
    if check:
        bad = blocking_pairs(field, pattern)
        summary += f" blocking_pairs={len(bad)}"
        status = 0 if not bad and (sizes == field.quotas).all() else 1
    print(summary, file=sys.stderr)
    if out.enabled:
        out.write_text("pattern.csv", pio.pattern_to_csv(pattern))
        out.write_text("field.csv", pio.field_to_csv(field, distance_ranks(field, pattern)), primary=True)
    if render is not None:
        result = render_allocation(field, pattern, render)
        out.register(result.path)
    return status


def cmd_stable(args, out: Output) -> tuple[int, dict]:
    if args.pattern is not None:
        pattern = pio.read_pattern(args.pattern)
    else:
        pattern = sample_poisson_pattern(args.s, SeededRng(args.seed).split("stable"), d=args.d)
    grid = CellGrid(pattern.s, pattern.d, args.cells_per_unit)
    if args.render is not None and pattern.d != 2:
        raise UsageError(f"--render needs d = 2, got d = {pattern.d}")
    status = _allocate_and_write(pattern, grid, out, args.render, args.check)
    return status, {"s": pattern.s, "d": pattern.d, "cells_per_unit": args.cells_per_unit,
                    "pattern": args.pattern, "render": args.render, "check": args.check}


def cmd_render(args, out: Output) -> tuple[int, dict]:
    pattern = pio.read_pattern(args.pattern)
    if pattern.d != 2:
        raise UsageError(f"rendering needs d = 2, got d = {pattern.d}")
    grid = CellGrid(pattern.s, pattern.d, args.cells_per_unit)
    field = stable_allocate(pattern, grid)
    result = render_allocation(field, pattern, args.image)
    out.register(result.path)
    print(f"wrote {result.path} ({result.width}x{result.height}, {result.territories} territories)", file=sys.stderr)
    return 0, {"pattern": args.pattern, "cells_per_unit": args.cells_per_unit, "image": args.image}


def _exact_reports(args) -> list[StatReport]:
    check = args.check
    if check == "equivalence":
        if args.d != 1:
            raise UsageError("the walk/greedy/recursion equivalence is defined for d = 1 only")
        return [equivalence_check(args.L, args.k)]
    if args.k is None:
        raise UsageError(f"verify {check} needs --k")
    if check == "mass-transport":
        return [mass_transport_identity(args.d, args.L, args.k, args.order, averaging=args.averaging)]
    table = joint_law_table(args.d, args.L, args.k, args.order)
    if check == "exact-palm":
        return [exact_palm_check(args.d, args.L, args.k, args.order, table=table)]
    return [reverse_bound_check(args.d, args.L, args.k, args.order, table=table)]


def exact_suite(budget: str) -> list[StatReport]:
    """Every exact check of the given budget, in a fixed order."""
    cfg = BUDGETS[budget]
    reports = []
    for d, L, k, order in exact_grid(cfg["max_d1_L"]):
        if d == 2 and not cfg["d2"]:
            continue
        table = joint_law_table(d, L, k, order)
        reports.append(exact_palm_check(d, L, k, order, table=table))
        reports.append(reverse_bound_check(d, L, k, order, table=table))
    for L in range(2, cfg["equivalence_L"] + 1):
        reports.append(equivalence_check(L))
    for averaging in ("ensemble", "orbit"):
        reports.append(mass_transport_identity(1, 6, 3, "ball", averaging=averaging))
        reports.append(mass_transport_identity(1, 6, 3, "linear", averaging=averaging))
    if cfg["d2"]:
        reports.append(mass_transport_identity(2, 3, 3, "ball"))
    return reports


def cmd_verify(args, out: Output) -> tuple[int, dict]:
    fmt = args.format
    if args.check == "all":
        exact = exact_suite(args.budget)
        palm = statistical_palm_check_allocation(seed=args.seed, threads=args.threads, **BUDGETS[args.budget]["palm"])
        for r in exact + [palm]:
            print(r.summary())
        tight = any(r.name == "reverse-bound" and r.details["tight"] for r in exact)
        print(f"{'PASS' if tight else 'FAIL'} reverse-bound tightness (bound attained on some instance)")
        if out.enabled:
            out.write_text(f"exact.{fmt}", _render_reports(exact, fmt))
            out.write_text(f"statistical_seed{args.seed}.{fmt}", _render_reports([palm], fmt))
        ok = all(r.passed for r in exact) and palm.passed and tight
        return (0 if ok else 1), {"budget": args.budget}
    if args.check == "palm-allocation":
        report = statistical_palm_check_allocation(s=args.s, cells_per_unit=args.cells_per_unit, samples=args.samples,
                                                   alpha=args.alpha, seed=args.seed, threads=args.threads)
        status = _emit_reports(out, f"palm-allocation_seed{args.seed}", [report], fmt)
        return status, {"s": args.s, "cells_per_unit": args.cells_per_unit, "samples": args.samples,
                        "alpha": args.alpha}
    reports = _exact_reports(args)
    status = _emit_reports(out, args.check, reports, fmt)
    return status, {"d": args.d, "L": args.L, "k": args.k, "order": args.order}


def cmd_tails(args, out: Output) -> tuple[int, dict]:
    samples = args.samples[0] if len(args.samples) == 1 else args.samples
    rows = tail_diagnostics(args.scheme, args.d, sizes=args.sizes, samples=samples, seed=args.seed, p=args.p,
                            cells_per_unit=args.cells_per_unit)
    for r in rows:
        print(f"size={r.size} samples={r.samples} truncated_moment={r.moment:.6g} stderr={r.stderr:.3g}", file=sys.stderr)
    name = f"tails_{args.scheme}_d{args.d}_seed{args.seed}"
    if args.format == "csv":
        text = tails_to_csv(rows)
    else:
        text = json.dumps([{"size": r.size, "samples": r.samples, "moment": r.moment, "stderr": r.stderr,
                            "ccdf": {repr(k): v for k, v in r.ccdf.items()}} for r in rows], sort_keys=True, indent=2) + "\n"
    out.write_text(f"{name}.{args.format}", text, primary=True)
    return 0, {"scheme": args.scheme, "d": args.d, "sizes": [r.size for r in rows], "samples": args.samples,
               "p": str(args.p), "cells_per_unit": args.cells_per_unit}


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="decimal 64-bit seed for every random choice")
    common.add_argument("--threads", type=_positive, default=1, help="cap on worker threads")
    common.add_argument("--out", help="output directory, or a file path for the primary artifact")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="report format")

    parser = argparse.ArgumentParser(prog="palm-alloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="sample a lattice configuration")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--L", type=_positive, required=True)
    p.add_argument("--k", type=int, help="exact number of occupied sites")
    p.add_argument("--p", type=_fraction, help="Bernoulli occupation probability")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("greedy", parents=[common], help="greedy balanced transport of a configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--order", choices=("ball", "linear"), default="ball")
    p.set_defaults(func=cmd_greedy)

    p = sub.add_parser("walk", parents=[common], help="walk extra head (d = 1)")
    p.add_argument("--config", required=True)
    p.add_argument("--u", type=_fraction, help="run the scheme at this u instead of printing its kernel")
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("meshalkin", parents=[common], help="Meshalkin matching (d = 1, half occupied)")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_meshalkin)

    p = sub.add_parser("stable", parents=[common], help="stable allocation of a Poisson pattern")
    p.add_argument("--s", type=_positive, default=16, help="torus side")
    p.add_argument("--d", type=int, choices=(1, 2, 3), default=2)
    p.add_argument("--cells-per-unit", type=_positive, default=8)
    p.add_argument("--pattern", help="read the pattern from this CSV instead of sampling")
    p.add_argument("--render", help="also write a PNG or SVG picture (d = 2)")
    p.add_argument("--check", action="store_true", help="run the brute-force blocking pair oracle")
    p.set_defaults(func=cmd_stable)

    p = sub.add_parser("render", parents=[common], help="allocate a pattern file and draw it")
    p.add_argument("--pattern", required=True)
    p.add_argument("--cells-per-unit", type=_positive, default=8)
    p.add_argument("image", help="output .png or .svg")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("verify", help="exact and statistical checks")
    checks = p.add_subparsers(dest="check", required=True)
    for name, text in (("equivalence", "walk = greedy LINEAR row 0 = measure recursion, every configuration"),
                       ("exact-palm", "exact law of the recentred configuration"),
                       ("reverse-bound", "P(X = x | recentred) <= k/N"),
                       ("mass-transport", "mass out of the origin = mass in = 1")):
        c = checks.add_parser(name, parents=[common], help=text)
        c.add_argument("--d", type=int, default=1)
        c.add_argument("--L", type=_positive, required=True)
        c.add_argument("--k", type=int)
        c.add_argument("--order", choices=("ball", "linear"), default="ball")
        if name == "mass-transport":
            c.add_argument("--averaging", choices=("ensemble", "orbit", "none"), default="ensemble")
        c.set_defaults(func=cmd_verify)
    c = checks.add_parser("palm-allocation", parents=[common], help="Monte Carlo Palm test of the allocation")
    c.add_argument("--s", type=_positive, default=16)
    c.add_argument("--cells-per-unit", type=_positive, default=8)
    c.add_argument("--samples", type=_positive, default=10_000)
    c.add_argument("--alpha", type=float, default=0.01)
    c.set_defaults(func=cmd_verify)
    c = checks.add_parser("all", parents=[common], help="the exact suite plus the statistical suite")
    c.add_argument("--budget", choices=tuple(BUDGETS), default="smoke")
    c.set_defaults(func=cmd_verify)

    p = sub.add_parser("tails", parents=[common], help="truncated moments and CCDF across a doubling ladder")
    p.add_argument("--scheme", choices=("greedy", "stable"), required=True)
    p.add_argument("--d", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--sizes", type=_int_list, help="comma-separated window sizes (default: the built-in ladder)")
    p.add_argument("--samples", type=_int_list, default=[20], help="one count, or one per size")
    p.add_argument("--p", type=_fraction, default=Fraction(1, 2), help="density for the greedy scheme")
    p.add_argument("--cells-per-unit", type=_positive, default=2)
    p.set_defaults(func=cmd_tails)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = Output(args.out)
    started = time.perf_counter()
    try:
        status, params = args.func(args, out)
    except pio.InputFormatError as exc:
        print(f"palm-alloc: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"palm-alloc: error: no such file: {exc.filename}", file=sys.stderr)
        return 2
    except (UsageError, ValueError) as exc:
        print(f"palm-alloc: error: {exc}", file=sys.stderr)
        return 2
    _write_manifest(out, args, params, started, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
