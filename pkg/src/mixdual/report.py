"""Structured residual/violation records produced by every checker."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field


def fmt(value) -> str:
    """Lossless text form used in every CSV file (17 significant digits)."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int,)):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    try:
        return format(float(value), ".17g")
    except (TypeError, ValueError):
        return str(value)


@dataclass
class Check:
    name: str
    value: float
    passed: bool
    threshold: float | None = None
    note: str = ""


@dataclass
class Report:
    """Ordered list of named checks plus free-form data.

    ``passed`` is true iff every check passed.  ``data`` carries anything a
    caller may want to inspect (witness pairs, per-node arrays, ...).
    """

    title: str
    checks: list[Check] = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def add(self, name, value, passed, threshold=None, note="") -> Check:
        c = Check(name, float(value), bool(passed), threshold, note)
        self.checks.append(c)
        return c

    def extend(self, other: "Report", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.value, c.passed, c.threshold, c.note))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __bool__(self) -> bool:
        return self.passed

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name) -> bool:
        return any(c.name == name for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def rows(self):
        for c in self.checks:
            yield [self.title, c.name, fmt(c.value),
                   "" if c.threshold is None else fmt(c.threshold),
                   "pass" if c.passed else "fail", c.note]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["report", "check", "value", "threshold", "status", "note"])
        w.writerows(self.rows())
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"{self.title}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            thr = "" if c.threshold is None else f" (threshold {c.threshold:.3g})"
            note = f"  [{c.note}]" if c.note else ""
            lines.append(f"  {'ok ' if c.passed else 'BAD'} {c.name} = {c.value:.6g}{thr}{note}")
        return "\n".join(lines)

    __str__ = summary
