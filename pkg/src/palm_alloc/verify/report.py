"""Uniform result record for every verification run."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any


def _plain(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


@dataclass
class StatReport:
    """Outcome of one check: pass/fail is decided by statistic vs threshold alone."""

    name: str
    samples: int
    statistic: Any
    threshold: Any
    passed: bool
    seed: int | None = None
    params: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def summary(self) -> str:
        par = " ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.verdict} {self.name} [{par}] statistic={self.statistic} threshold={self.threshold} samples={self.samples}"

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "params": _plain(self.params),
            "samples": self.samples,
            "statistic": _plain(self.statistic),
            "threshold": _plain(self.threshold),
            "passed": self.passed,
            "seed": self.seed,
            "details": _plain(self.details),
        }


def reports_to_csv(reports: list[StatReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name", "params", "samples", "statistic", "threshold", "passed", "seed"])
    for r in reports:
        d = r.as_dict()
        writer.writerow([d["name"], json.dumps(d["params"], sort_keys=True), d["samples"], d["statistic"],
                         d["threshold"], "PASS" if r.passed else "FAIL", "" if r.seed is None else r.seed])
    return buf.getvalue()


def reports_to_json(reports: list[StatReport]) -> str:
    return json.dumps([r.as_dict() for r in reports], sort_keys=True, indent=2) + "\n"
