"""Bundled example problems, stored as definition files next to this module."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .errors import SpecError
from .problem import ProblemSpec, load_problem

CATALOG_DIR = Path(__file__).with_name("problems")
SUFFIX = ".prob"


def _files(directory=None) -> list[Path]:
    d = CATALOG_DIR if directory is None else Path(directory)
    if not d.is_dir():
        return []
    return sorted(d.glob(f"*{SUFFIX}"))


def problem_names(directory=None) -> list[str]:
    return list(load_catalog(directory))


def load_catalog(directory=None) -> dict[str, ProblemSpec]:
    out = {}
    for path in _files(directory):
        spec = load_problem(path)
        if spec.name in out:
            raise SpecError(f"duplicate catalog name {spec.name} in {path}")
        out[spec.name] = spec
    return dict(sorted(out.items()))


def get_problem(name_or_path, directory=None) -> ProblemSpec:
    """Catalog lookup by name, falling back to reading a definition file."""
    catalog = load_catalog(directory)
    if name_or_path in catalog:
        return catalog[name_or_path]
    path = Path(name_or_path)
    if path.is_file():
        return load_problem(path)
    known = ", ".join(sorted(catalog)) or "none"
    raise SpecError(f"unknown problem {name_or_path!r} (catalog: {known}; not a file either)")


def listing(directory=None, as_csv: bool = False) -> str:
    specs = list(load_catalog(directory).values())
    if as_csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "n", "p", "m", "boundary", "static", "note"])
        for s in specs:
            w.writerow([s.name, s.n, s.p, s.m, s.boundary.value, int(s.is_static), s.note])
        return buf.getvalue()
    lines = [f"{s.name:<12} n={s.n} p={s.p} m={s.m} {s.boundary.value:<9} "
             f"{'static ' if s.is_static else ''}{s.note}" for s in specs]
    return "\n".join(lines) + ("\n" if lines else "")
