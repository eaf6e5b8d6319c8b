"""Multiobjective variational problems with square-root terms.

A problem has ``p`` objective functionals

    J_i(x) = int_a^b f^i(t, x, x', x'') + sqrt(x^T B^i x) dt

and ``m`` pointwise inequality constraints ``g^j(t, x, x', x'') <= 0``.
``FixedZero`` problems additionally require ``x = x' = 0`` at both endpoints;
``Natural`` problems leave the endpoints free.

Problem definition files are line oriented ``key = value`` text::

    name = P1
    n = 2
    p = 2
    m = 2
    boundary = FixedZero        # or Natural
    a = 0                       # optional interval, default [0, 1]
    b = 1
    f.1 = 0.5*(xd0^2 + xd1^2) - 4*x0
    B.1 = 1, 0; 0, 1            # rows separated by ';', omitted means zero
    g.1 = x0 - 1

Blank lines and ``#`` comments are ignored; indices of ``f``, ``g`` and ``B``
are 1-based.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import expr as _expr
from .errors import NonSquare, SpecError
from .grid import StaticPoint, TimeGrid, Trajectory, make_grid
from .report import Report

SYM_TOL = 1e-12
PSD_TOL = 1e-10


class Boundary(enum.Enum):
    FIXED_ZERO = "FixedZero"
    NATURAL = "Natural"

    @classmethod
    def parse(cls, text: str) -> "Boundary":
        key = text.strip().lower().replace("_", "").replace("-", "")
        for b in cls:
            if b.value.lower() == key:
                return b
        raise SpecError(f"unknown boundary kind {text!r} (FixedZero or Natural)")


def psd_check(B, tol: float = PSD_TOL) -> bool:
    """Symmetric within ``tol`` and smallest eigenvalue >= -tol.

    Eigenvalues come from LAPACK's symmetric solver (``numpy.linalg.eigvalsh``)
    applied to the symmetric part.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {B.shape}")
    if B.size == 0:
        return True
    if np.max(np.abs(B - B.T)) > tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (B + B.T))[0] >= -tol)


def sqrt_term(v, B) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(max(0.0, v @ np.asarray(B, dtype=float) @ v)))


def sqrt_terms(X: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise ``sqrt(max(0, x_k^T B x_k))``."""
    q = np.einsum("ki,ij,kj->k", X, B, X)
    return np.sqrt(np.maximum(q, 0.0))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    name: str
    n: int
    p: int
    m: int
    f: tuple
    B: tuple
    g: tuple
    boundary: Boundary = Boundary.FIXED_ZERO
    a: float = 0.0
    b: float = 1.0
    note: str = ""

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.m < 1:
            raise SpecError("need n >= 1, p >= 1 and m >= 1")
        if len(self.f) != self.p or len(self.B) != self.p or len(self.g) != self.m:
            raise SpecError("f, B and g lengths must match p, p and m")
        if not self.b > self.a:
            raise SpecError("interval must satisfy a < b")
        Bs = []
        for i, Bi in enumerate(self.B, 1):
            Bi = np.array(Bi, dtype=float).reshape(self.n, self.n)
            if np.max(np.abs(Bi - Bi.T)) > SYM_TOL:
                raise SpecError(f"B.{i} is not symmetric")
            if not psd_check(Bi, PSD_TOL):
                raise SpecError(f"B.{i} is not positive semidefinite")
            Bi.flags.writeable = False
            Bs.append(Bi)
        object.__setattr__(self, "B", tuple(Bs))
        for e in (*self.f, *self.g):
            if e.n != self.n:
                raise SpecError(f"expression {e} declared for n={e.n}, problem has n={self.n}")

    @classmethod
    def from_strings(cls, name, n, f, B, g, boundary="FixedZero", **kw) -> "ProblemSpec":
        if isinstance(boundary, str):
            boundary = Boundary.parse(boundary)
        fs = tuple(_expr.parse(s, n) for s in f)
        gs = tuple(_expr.parse(s, n) for s in g)
        Bs = tuple(np.zeros((n, n)) if Bi is None else np.asarray(Bi, float) for Bi in B)
        return cls(name, n, len(fs), len(gs), fs, Bs, gs, boundary, **kw)

    @property
    def is_static(self) -> bool:
        """No expression references ``t``, ``xd`` or ``xdd``."""
        return not any(e.uses(k) for e in (*self.f, *self.g) for k in ("t", "xd", "xdd"))

    def grid(self, N: int) -> TimeGrid:
        return make_grid(self.a, self.b, N)

    def static_domain(self) -> StaticPoint:
        return StaticPoint(self.a, self.b)

    def to_text(self) -> str:
        lines = [f"name = {self.name}"]
        if self.note:
            lines.append(f"note = {self.note}")
        lines += [f"n = {self.n}", f"p = {self.p}", f"m = {self.m}",
                  f"boundary = {self.boundary.value}", f"a = {self.a!r}", f"b = {self.b!r}"]
        for i, (fi, Bi) in enumerate(zip(self.f, self.B), 1):
            lines.append(f"f.{i} = {fi}")
            rows = "; ".join(", ".join(repr(float(v)) for v in row) for row in Bi)
            lines.append(f"B.{i} = {rows}")
        lines += [f"g.{j} = {gj}" for j, gj in enumerate(self.g, 1)]
        return "\n".join(lines) + "\n"


def _parse_matrix(text: str, n: int, key: str) -> np.ndarray:
    try:
        rows = [[float(v) for v in r.split(",")] for r in text.split(";")]
        M = np.array(rows, dtype=float)
    except ValueError as exc:
        raise SpecError(f"{key}: cannot parse matrix {text!r}") from exc
    if M.shape != (n, n):
        raise SpecError(f"{key}: expected a {n}x{n} matrix, got shape {M.shape}")
    return M


def parse_problem(text: str, default_name: str = "problem") -> ProblemSpec:
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in kv:
            raise SpecError(f"line {lineno}: duplicate key {key!r}")
        kv[key] = value
    try:
        n, p, m = int(kv.pop("n")), int(kv.pop("p")), int(kv.pop("m"))
    except KeyError as exc:
        raise SpecError(f"missing required key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise SpecError(f"n, p, m must be integers: {exc}") from None
    name = kv.pop("name", default_name)
    note = kv.pop("note", "")
    boundary = Boundary.parse(kv.pop("boundary", "FixedZero"))
    a, b = float(kv.pop("a", 0.0)), float(kv.pop("b", 1.0))
    try:
        f = [kv.pop(f"f.{i}") for i in range(1, p + 1)]
        g = [kv.pop(f"g.{j}") for j in range(1, m + 1)]
    except KeyError as exc:
        raise SpecError(f"missing expression {exc.args[0]!r}") from None
    B = [_parse_matrix(kv.pop(f"B.{i}"), n, f"B.{i}") if f"B.{i}" in kv else None
         for i in range(1, p + 1)]
    if kv:
        raise SpecError(f"unknown keys: {', '.join(sorted(kv))}")
    return ProblemSpec.from_strings(name, n, f, B, g, boundary, a=a, b=b, note=note)


def load_problem(path) -> ProblemSpec:
    path = Path(path)
    return parse_problem(path.read_text(), default_name=path.stem)


# -- primal points -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PrimalPoint:
    """A state trajectory together with its discrete derivatives."""

    x: Trajectory
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self):
        return self.x.grid

    @property
    def xd(self) -> np.ndarray:
        if "xd" not in self._cache:
            self._cache["xd"] = self.grid.D @ self.x.values
        return self._cache["xd"]

    @property
    def xdd(self) -> np.ndarray:
        if "xdd" not in self._cache:
            self._cache["xdd"] = self.grid.D2 @ self.x.values
        return self._cache["xdd"]

    def states(self):
        return self.grid.nodes, self.x.values, self.xd, self.xdd


def as_point(x) -> PrimalPoint:
    return x if isinstance(x, PrimalPoint) else PrimalPoint(x)


def _check_dims(spec: ProblemSpec, pt: PrimalPoint) -> None:
    if pt.x.n != spec.n:
        raise SpecError(f"trajectory has {pt.x.n} components, problem {spec.name} has n={spec.n}")


def objective_integrands(spec: ProblemSpec, pt: PrimalPoint) -> np.ndarray:
    """``(N, p)`` array of ``f^i + sqrt(x^T B^i x)`` at the nodes."""
    states = pt.states()
    cols = [fi.values(*states) + sqrt_terms(pt.x.values, Bi) for fi, Bi in zip(spec.f, spec.B)]
    return np.column_stack(cols)


def primal_objective(spec: ProblemSpec, pt) -> np.ndarray:
    pt = as_point(pt)
    _check_dims(spec, pt)
    return pt.grid.weights @ objective_integrands(spec, pt)


def constraint_values(spec: ProblemSpec, pt) -> np.ndarray:
    """``(N, m)`` array of ``g^j`` at the nodes."""
    pt = as_point(pt)
    states = pt.states()
    return np.column_stack([gj.values(*states) for gj in spec.g])


def primal_feasibility(spec: ProblemSpec, pt, tol: float = 1e-6) -> Report:
    pt = as_point(pt)
    _check_dims(spec, pt)
    rep = Report(f"primal_feasibility[{spec.name}]")
    G = constraint_values(spec, pt)
    k, j = np.unravel_index(np.argmax(G), G.shape)
    worst = float(G[k, j])
    rep.add("max_constraint", worst, worst <= tol, tol,
            f"g.{j + 1} at t={pt.grid.nodes[k]:.6g}")
    rep.data["constraint_values"] = G
    rep.data["worst_node"] = int(k)
    if spec.boundary is Boundary.FIXED_ZERO and not pt.grid.is_static:
        X, Xd = pt.x.values, pt.xd
        for label, v in (("x(a)", X[0]), ("x(b)", X[-1]), ("xd(a)", Xd[0]), ("xd(b)", Xd[-1])):
            r = float(np.max(np.abs(v)))
            rep.add(f"boundary {label}", r, r <= tol, tol)
    return rep
