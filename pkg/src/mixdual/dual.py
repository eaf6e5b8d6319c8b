"""The mixed-type dual: partitions, dual objective, feasibility residuals.

For a partition ``J_0, ..., J_r`` of the constraint indices the dual of a
problem maximizes, for every objective ``i``,

    int f^i(t, u, u', u'') + u^T B^i z^i + sum_{j in J_0} y^j g^j dt

over points ``(u, y, z^1..z^p, lambda)`` satisfying the stationarity equation

    sum_i lambda_i (f^i_x + B^i z^i) + y^T g_x - D(lambda^T f_xd + y^T g_xd)
        + D^2(lambda^T f_xdd + y^T g_xdd) = 0,

``sum_{j in J_a} int y^j g^j dt >= 0`` for ``a >= 1``, ``z^i^T B^i z^i <= 1``,
``y >= 0`` and ``lambda > 0`` with ``sum(lambda) = 1``.  ``J_0 = M`` gives the
Wolfe dual and ``J_0 = {}``, ``J_1 = M`` the Mond-Weir dual.

Discrete stationarity
---------------------
``D`` and ``D^2`` in the stationarity equation are applied through their
quadrature adjoints (``grid.Dt``/``grid.D2t``).  Away from the two boundary
rows these are the ordinary operators; next to the boundary they carry the
summation-by-parts boundary terms, which makes

    int eta^T E dt == int eta^T A_x + (D eta)^T A_xd + (D2 eta)^T A_xdd dt

hold exactly for every node vector ``eta``.  For ``FixedZero`` problems the
admissible variations satisfy ``eta = D eta = 0`` at both ends, so the part of
``E`` that such variations cannot see (a boundary layer balanced by the
endpoint conditions) is removed by a quadrature-weighted projection before the
residual is measured.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleInput, InvalidPartition, NotStatic, WrongBoundaryKind
from .grid import Trajectory
from .problem import (Boundary, PrimalPoint, ProblemSpec, constraint_values, primal_feasibility,
                      primal_objective)
from .report import Report


class DualKind(enum.Enum):
    WOLFE = "Wolfe"
    MOND_WEIR = "MondWeir"
    MIXED = "Mixed"


@dataclass(frozen=True)
class Partition:
    """Index sets ``J_0..J_r`` (1-based constraint indices)."""

    m: int
    sets: tuple

    def __post_init__(self):
        sets = tuple(frozenset(int(j) for j in s) for s in self.sets)
        if not sets:
            raise InvalidPartition("a partition needs at least J0")
        seen = set()
        for a, s in enumerate(sets):
            bad = [j for j in s if not 1 <= j <= self.m]
            if bad:
                raise InvalidPartition(f"J{a} contains indices outside 1..{self.m}: {sorted(bad)}")
            if seen & s:
                raise InvalidPartition(f"J{a} overlaps earlier sets at {sorted(seen & s)}")
            seen |= s
        missing = set(range(1, self.m + 1)) - seen
        if missing:
            raise InvalidPartition(f"indices {sorted(missing)} are not covered")
        object.__setattr__(self, "sets", sets)

    @property
    def r(self) -> int:
        return len(self.sets) - 1

    @property
    def J0(self) -> frozenset:
        return self.sets[0]

    def mask(self, alpha: int) -> np.ndarray:
        """Boolean mask over 0-based constraint columns for ``J_alpha``."""
        mk = np.zeros(self.m, dtype=bool)
        mk[[j - 1 for j in self.sets[alpha]]] = True
        return mk

    def __str__(self) -> str:
        return ";".join(f"J{a}={{{','.join(str(j) for j in sorted(s))}}}"
                        for a, s in enumerate(self.sets))

    @classmethod
    def wolfe(cls, m: int) -> "Partition":
        return cls(m, (range(1, m + 1),))

    @classmethod
    def mond_weir(cls, m: int) -> "Partition":
        return cls(m, ((), range(1, m + 1)))


_SET = re.compile(r"^J(\d+)\s*=\s*\{([^{}]*)\}$")


def parse_partition(text: str, m: int) -> Partition:
    """Parse ``J0={1,3};J1={2};J2={}``; labels must be ``J0..Jr`` without gaps."""
    if not text or not text.strip():
        raise InvalidPartition("empty partition string")
    found = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        mt = _SET.match(part)
        if mt is None:
            raise InvalidPartition(f"cannot parse {part!r}; expected e.g. J1={{2,3}}")
        alpha = int(mt.group(1))
        if alpha in found:
            raise InvalidPartition(f"J{alpha} given twice")
        body = mt.group(2).strip()
        try:
            found[alpha] = [int(v) for v in body.split(",")] if body else []
        except ValueError:
            raise InvalidPartition(f"J{alpha}: indices must be integers") from None
    if sorted(found) != list(range(len(found))):
        raise InvalidPartition(f"set labels must be J0..J{len(found) - 1}, got {sorted(found)}")
    for a, idx in found.items():
        if len(idx) != len(set(idx)):
            raise InvalidPartition(f"J{a} repeats an index")
    return Partition(m, tuple(found[a] for a in range(len(found))))


def classify(part: Partition) -> DualKind:
    full = frozenset(range(1, part.m + 1))
    if part.J0 == full:
        return DualKind.WOLFE
    nonempty = [s for s in part.sets[1:] if s]
    if not part.J0 and len(nonempty) == 1 and nonempty[0] == full:
        return DualKind.MOND_WEIR
    return DualKind.MIXED


@dataclass(frozen=True, eq=False)
class DualPoint:
    """Candidate dual point ``(u, y, z^1..z^p, lambda)`` on a common grid."""

    u: Trajectory
    y: Trajectory
    z: tuple
    lam: np.ndarray

    def __post_init__(self):
        z = tuple(self.z)
        for zi in z:
            if zi.grid != self.u.grid or zi.n != self.u.n:
                raise ValueError("every z^i must live on u's grid with u's dimension")
        if self.y.grid != self.u.grid:
            raise ValueError("y must live on u's grid")
        lam = np.array(self.lam, dtype=float).ravel()
        if lam.shape != (len(z),):
            raise ValueError("lambda needs one entry per z^i")
        lam.flags.writeable = False
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "lam", lam)

    @property
    def grid(self):
        return self.u.grid

    def states(self):
        U = self.u.values
        return self.grid.nodes, U, self.grid.D @ U, self.grid.D2 @ U

    @classmethod
    def zeros(cls, spec: ProblemSpec, grid, lam=None) -> "DualPoint":
        lam = np.full(spec.p, 1.0 / spec.p) if lam is None else lam
        return cls(Trajectory.zeros(grid, spec.n), Trajectory.zeros(grid, spec.m),
                   tuple(Trajectory.zeros(grid, spec.n) for _ in range(spec.p)), lam)


def _check(spec: ProblemSpec, dp: DualPoint, part: Partition | None = None) -> None:
    if dp.u.n != spec.n or dp.y.n != spec.m or len(dp.z) != spec.p:
        raise ValueError(f"dual point dimensions do not match problem {spec.name}")
    if part is not None and part.m != spec.m:
        raise InvalidPartition(f"partition is over {part.m} constraints, problem has m={spec.m}")


def _bilinear(U, B, Z) -> np.ndarray:
    return np.einsum("ki,ij,kj->k", U, B, Z)


def dual_integrands(spec: ProblemSpec, part: Partition, dp: DualPoint) -> np.ndarray:
    """``(N, p)`` node values of the dual objective integrands."""
    _check(spec, dp, part)
    states = dp.states()
    G = constraint_values(spec, PrimalPoint(dp.u))
    wolfe_part = (dp.y.values * G)[:, part.mask(0)].sum(axis=1)
    cols = [fi.values(*states) + _bilinear(dp.u.values, Bi, zi.values) + wolfe_part
            for fi, Bi, zi in zip(spec.f, spec.B, dp.z)]
    return np.column_stack(cols)


def dual_objective(spec: ProblemSpec, part: Partition, dp: DualPoint) -> np.ndarray:
    return dp.grid.weights @ dual_integrands(spec, part, dp)


def weighted_partials(spec: ProblemSpec, dp: DualPoint, lam=None, y=None, z=None,
                      constraints=None):
    """Multiplier-weighted partials ``(A_x, A_xd, A_xdd)``, each ``(N, n)``.

    ``A_x = sum_i lam_i (f^i_x + B^i z^i) + sum_j y^j g^j_x`` and likewise
    without the ``B z`` term for ``xd`` and ``xdd``.  ``constraints`` restricts
    the ``g`` sum to a boolean mask over constraint columns.
    """
    lam = dp.lam if lam is None else np.asarray(lam, float)
    Y = dp.y.values if y is None else np.asarray(y, float)
    zs = dp.z if z is None else z
    states = dp.states()
    N, n = dp.u.values.shape
    Ax, Axd, Axdd = np.zeros((N, n)), np.zeros((N, n)), np.zeros((N, n))
    for li, fi, Bi, zi in zip(lam, spec.f, spec.B, zs):
        if li == 0.0:
            continue
        _, gx, gxd, gxdd = fi.values_and_partials(*states)
        zv = zi.values if isinstance(zi, Trajectory) else np.asarray(zi, float)
        Ax += li * (gx + zv @ Bi)
        Axd += li * gxd
        Axdd += li * gxdd
    for j, gj in enumerate(spec.g):
        if constraints is not None and not constraints[j]:
            continue
        yj = Y[:, j]
        if not np.any(yj):
            continue
        _, gx, gxd, gxdd = gj.values_and_partials(*states)
        Ax += yj[:, None] * gx
        Axd += yj[:, None] * gxd
        Axdd += yj[:, None] * gxdd
    return Ax, Axd, Axdd


def euler_lagrange(grid, Ax, Axd, Axdd) -> np.ndarray:
    """Node values of ``A_x - D A_xd + D^2 A_xdd`` (adjoint form, see module doc)."""
    return Ax - grid.Dt @ Axd + grid.D2t @ Axdd


def euler_lagrange_strong(grid, Ax, Axd, Axdd) -> np.ndarray:
    """Same expression with the plain operators ``D`` and ``D @ D``."""
    return Ax - grid.D @ Axd + grid.D2 @ Axdd


def variation_projector(spec: ProblemSpec, grid) -> np.ndarray | None:
    """Quadrature-orthogonal projector onto admissible variations (FixedZero only)."""
    if grid.is_static or spec.boundary is not Boundary.FIXED_ZERO:
        return None
    from .solver import admissible_basis

    Z = admissible_basis(spec, grid)
    WZ = grid.weights[:, None] * Z
    return Z @ np.linalg.solve(Z.T @ WZ, WZ.T)


def stationarity_nodes(spec: ProblemSpec, grid) -> np.ndarray:
    """Node indices at which the stationarity residual is measured."""
    if grid.is_static:
        return np.array([0])
    if spec.boundary is Boundary.FIXED_ZERO:
        return np.arange(1, grid.N - 1)
    return np.arange(grid.N)


def stationarity_vector(spec: ProblemSpec, dp: DualPoint, strong: bool = False) -> np.ndarray:
    """Residual of the stationarity equation at every node, ``(N, n)``."""
    _check(spec, dp)
    parts = weighted_partials(spec, dp)
    if strong:
        return euler_lagrange_strong(dp.grid, *parts)
    E = euler_lagrange(dp.grid, *parts)
    P = variation_projector(spec, dp.grid)
    return E if P is None else P @ E


def stationarity_residual(spec: ProblemSpec, dp: DualPoint, strong: bool = False) -> float:
    """Max over measured nodes of the Euclidean norm of the stationarity residual.

    ``strong=True`` skips the boundary treatment described in the module
    docstring and evaluates the plain finite-difference form at interior nodes;
    it is a diagnostic and is not expected to be small next to the boundary.
    """
    R = stationarity_vector(spec, dp, strong=strong)
    nodes = stationarity_nodes(spec, dp.grid)
    if strong and not dp.grid.is_static:
        nodes = np.arange(1, dp.grid.N - 1)
    return float(np.max(np.linalg.norm(R[nodes], axis=1)))


def partition_sums(spec: ProblemSpec, part: Partition, dp: DualPoint) -> np.ndarray:
    """``sum_{j in J_a} int y^j g^j(u) dt`` for ``a = 0..r``."""
    G = constraint_values(spec, PrimalPoint(dp.u))
    per_j = dp.grid.weights @ (dp.y.values * G)
    return np.array([per_j[part.mask(a)].sum() for a in range(part.r + 1)])


def dual_feasibility(spec: ProblemSpec, part: Partition, dp: DualPoint,
                     tol: float = 1e-6) -> Report:
    _check(spec, dp, part)
    rep = Report(f"dual_feasibility[{spec.name}; {part}]")
    grid = dp.grid
    if spec.boundary is Boundary.FIXED_ZERO and not grid.is_static:
        U, Ud = dp.u.values, grid.D @ dp.u.values
        for label, v in (("u(a)", U[0]), ("u(b)", U[-1]), ("ud(a)", Ud[0]), ("ud(b)", Ud[-1])):
            r = float(np.max(np.abs(v)))
            rep.add(f"(1-2) {label}", r, r <= tol, tol)
    st = stationarity_residual(spec, dp)
    rep.add("(3) stationarity", st, st <= tol, tol)
    sums = partition_sums(spec, part, dp)
    rep.data["partition_sums"] = sums
    for a in range(1, part.r + 1):
        rep.add(f"(4) sum J{a} int y g", sums[a], sums[a] >= -tol, -tol)
    zmax = -np.inf
    for Bi, zi in zip(spec.B, dp.z):
        zmax = max(zmax, float(np.max(_bilinear(zi.values, Bi, zi.values))) - 1.0)
    rep.add("(5) max z^T B z - 1", zmax, zmax <= tol, tol)
    ymin = float(np.min(dp.y.values))
    rep.add("(6) min y", ymin, ymin >= -tol, -tol)
    lmin = float(np.min(dp.lam))
    rep.add("(7) min lambda", lmin, lmin > 0.0, 0.0)
    lsum = abs(float(np.sum(dp.lam)) - 1.0)
    rep.add("(7) |sum lambda - 1|", lsum, lsum <= tol, tol)
    return rep


def weak_duality_check(spec: ProblemSpec, part: Partition, x, dp: DualPoint, tol: float = 1e-6,
                       feas_tol: float = 1e-4) -> Report:
    """Flag a weak-duality violation: the dual value vector dominating the primal one.

    Violation iff ``delta_i <= tol`` for every ``i`` and ``delta_k < -tol`` for
    some ``k``, where ``delta = primal_objective(x) - dual_objective(dp)``.
    """
    x = x if isinstance(x, PrimalPoint) else PrimalPoint(x)
    prim = primal_feasibility(spec, x, feas_tol)
    if not prim.passed:
        raise InfeasibleInput(f"primal point infeasible: {prim.failures()[0].name}")
    dfeas = dual_feasibility(spec, part, dp, feas_tol)
    if not dfeas.passed:
        raise InfeasibleInput(f"dual point infeasible: {dfeas.failures()[0].name}")
    delta = primal_objective(spec, x) - dual_objective(spec, part, dp)
    violated = bool(np.all(delta <= tol) and np.any(delta < -tol))
    rep = Report(f"weak_duality[{spec.name}; {part}]")
    rep.add("dominance violation", float(np.min(delta)), not violated, -tol,
            "min_i (primal_i - dual_i)")
    rep.data["delta"] = delta
    rep.data["violation"] = violated
    return rep


def transversality_residual(spec: ProblemSpec, dp: DualPoint, part: Partition | None = None,
                            tol: float = 1e-3) -> Report:
    """Endpoint conditions of the natural-boundary dual, one check per objective.

    For each ``i``: ``f^i_xd + sum_{J_0} y^j g^j_xd`` and ``f^i_xdd + sum_{J_0} y^j
    g^j_xdd`` at ``t = a`` and ``t = b``.  ``part=None`` means ``J_0 = M``.
    """
    if spec.boundary is not Boundary.NATURAL:
        raise WrongBoundaryKind(f"{spec.name} has {spec.boundary.value} boundary conditions")
    _check(spec, dp, part)
    mask = np.ones(spec.m, dtype=bool) if part is None else part.mask(0)
    rep = Report(f"transversality[{spec.name}]")
    ends = [0, -1]
    states = [s[ends] if np.ndim(s) else s for s in dp.states()]
    Y = dp.y.values[ends]
    gsum_d, gsum_dd = np.zeros((2, spec.n)), np.zeros((2, spec.n))
    for j, gj in enumerate(spec.g):
        if mask[j]:
            _, _, gxd, gxdd = gj.values_and_partials(*states)
            gsum_d += Y[:, j:j + 1] * gxd
            gsum_dd += Y[:, j:j + 1] * gxdd
    for i, fi in enumerate(spec.f, 1):
        _, _, fxd, fxdd = fi.values_and_partials(*states)
        for row, label in ((0, "a"), (1, "b")):
            r1 = float(np.linalg.norm(fxd[row] + gsum_d[row]))
            r2 = float(np.linalg.norm(fxdd[row] + gsum_dd[row]))
            rep.add(f"i={i} f_xd + yg_xd at {label}", r1, r1 <= tol, tol)
            rep.add(f"i={i} f_xdd + yg_xdd at {label}", r2, r2 <= tol, tol)
    return rep


# -- static (t-independent) specialization -----------------------------------


def static_dual_point(spec: ProblemSpec, u, y, z, lam) -> DualPoint:
    dom = spec.static_domain()
    return DualPoint(Trajectory(dom, np.reshape(u, (1, spec.n))),
                     Trajectory(dom, np.reshape(y, (1, spec.m))),
                     tuple(Trajectory(dom, np.reshape(zi, (1, spec.n))) for zi in z), lam)


def static_duality_pair(spec: ProblemSpec):
    """Evaluators for the nonlinear-programming pair of a ``t``-free problem.

    Returns ``(primal, dual)`` where ``primal(x)`` gives the objective vector
    ``f^i(x) + sqrt(x^T B^i x)`` and ``dual(u, y, z, lam, part)`` gives
    ``f^i(u) + u^T B^i z^i + sum_{J_0} y^j g^j(u)``.  Stationarity for such
    points has no derivative terms; use :func:`static_dual_point` with
    :func:`dual_feasibility` to check it.
    """
    if not spec.is_static:
        raise NotStatic(f"{spec.name} references t, xd or xdd")
    dom = spec.static_domain()

    def primal(x):
        return primal_objective(spec, PrimalPoint(Trajectory(dom, np.reshape(x, (1, spec.n)))))

    def dual(u, y, z, lam, part):
        return dual_objective(spec, part, static_dual_point(spec, u, y, z, lam))

    return primal, dual
