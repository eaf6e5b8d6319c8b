"""End-to-end experiment pipelines shared by the command line and the test suite.

Each ``run_*`` function returns an :class:`Outcome`: the reports it produced
plus CSV tables keyed by file name.  Everything is deterministic given the
seed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dual import (DualPoint, Partition, dual_feasibility, static_dual_point,
                   transversality_residual, weak_duality_check)
from .errors import InfeasibleInput, NotStatic, RecoveryFailed, SolverError
from .grid import Trajectory
from .invexity import (FunctionalSpec, certificate_csv, certify_pseudoinvex, certify_quasiinvex,
                       sample_trajectory)
from .problem import (Boundary, PrimalPoint, ProblemSpec, constraint_values, primal_objective)
from .recovery import RecoveryResult, converse_duality_check, recover_multipliers, strong_duality_check
from .report import Report, fmt
from .solver import (SolveResult, SolverOptions, admissible_basis, default_weight_grid,
                     efficiency_check, pareto_sweep, solve_weighted)

DEFAULT_WEIGHTS = (0.5, 0.5)


@dataclass
class Outcome:
    reports: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    solver_failed: bool = False
    messages: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.solver_failed and all(r.passed for r in self.reports)

    def merge(self, other: "Outcome") -> None:
        self.reports += other.reports
        for name, text in other.tables.items():
            if name in self.tables:
                raise ValueError(f"table {name} produced twice")
            self.tables[name] = text
        self.solver_failed |= other.solver_failed
        self.messages += other.messages


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([[fmt(v) for v in row] for row in rows])
    return buf.getvalue()


def _weights(spec: ProblemSpec, weights):
    if weights is None:
        return np.full(spec.p, 1.0 / spec.p)
    w = np.asarray(weights, float)
    if w.shape != (spec.p,):
        raise ValueError(f"need {spec.p} weights")
    return w


class SolverFailure(SolverError):
    """A pipeline solve ended without convergence."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


def solve_point(spec: ProblemSpec, weights=None, opts: SolverOptions | None = None) -> SolveResult:
    opts = opts or SolverOptions()
    res = solve_weighted(spec, _weights(spec, weights), opts=opts)
    if not res.converged:
        raise SolverFailure(f"weighted solve of {spec.name} ended with status "
                            f"{res.status.value} (kkt {res.kkt_residual:.3g})", res)
    return res


def recovered_point(spec: ProblemSpec, part: Partition, weights=None,
                    opts: SolverOptions | None = None, tol: float = 1e-4):
    """Weighted solve followed by multiplier recovery: ``(SolveResult, RecoveryResult)``."""
    res = solve_point(spec, weights, opts)
    return res, recover_multipliers(spec, res.x, part, tol)


# -- strong duality ----------------------------------------------------------


def run_strong(spec: ProblemSpec, part: Partition, opts: SolverOptions | None = None,
               tol: float = 1e-4, weights=None, transversality_tol: float = 1e-3) -> Outcome:
    """solve -> efficiency_check -> recover_multipliers -> strong_duality_check."""
    out = Outcome()
    opts = opts or SolverOptions()
    res = solve_point(spec, weights, opts)
    eff = efficiency_check(spec, res.x, tol, opts)
    out.reports.append(eff)
    try:
        rec = recover_multipliers(spec, res.x, part, tol)
    except RecoveryFailed as exc:
        rec = exc.result
        out.messages.append(str(exc))
    strong = strong_duality_check(spec, part, res.x, tol, recovery=rec)
    out.reports.append(strong)
    if spec.boundary is Boundary.NATURAL and not spec.is_static:
        out.reports.append(transversality_residual(spec, rec.dual_point, part,
                                                   transversality_tol))
    prim, dual = strong.data["primal"], strong.data["dual"]
    rows = [(i, prim[i - 1], dual[i - 1], prim[i - 1] - dual[i - 1],
             abs(prim[i - 1] - dual[i - 1]) / (1 + abs(prim[i - 1])))
            for i in range(1, spec.p + 1)]
    out.tables["objective_gap.csv"] = _table(
        ["objective", "primal", "dual", "gap", "relative_gap"], rows)
    out.tables["recovery.csv"] = rec.to_csv()
    out.tables["solution.csv"] = _trajectory_table(res.x.x, rec.dual_point)
    return out


def _trajectory_table(x: Trajectory, dp: DualPoint | None = None) -> str:
    n = x.n
    header = ["t"] + [f"x{c}" for c in range(n)]
    cols = [x.grid.nodes[:, None], x.values]
    if dp is not None:
        header += [f"y{j + 1}" for j in range(dp.y.n)]
        cols.append(dp.y.values)
    return _table(header, np.hstack(cols))


# -- weak duality ------------------------------------------------------------


def admissible_projection(spec: ProblemSpec, grid):
    """Matrix mapping node values onto the discrete admissible set."""
    Z = admissible_basis(spec, grid)
    return Z @ np.linalg.pinv(Z)


def sample_feasible_points(spec: ProblemSpec, grid, count: int, seed: int,
                           anchor: Trajectory | None = None, amplitude: float = 2.0,
                           max_tries: int = 200):
    """Random primal-feasible trajectories (``g <= 0`` at every node).

    Candidates are ``theta * anchor + (1 - theta) * r`` with ``r`` a random
    smooth trajectory of random amplitude, projected onto the discrete
    boundary conditions; infeasible candidates are rejected.
    """
    rng = np.random.default_rng(seed)
    P = None if grid.is_static else admissible_projection(spec, grid)
    points, tries = [], 0
    while len(points) < count and tries < max_tries * count:
        tries += 1
        r = sample_trajectory(grid, spec.n, spec.boundary, rng).values
        X = rng.uniform(0.0, amplitude) * r
        if anchor is not None:
            theta = rng.uniform()
            X = theta * anchor.values + (1.0 - theta) * X
        if P is not None:
            X = P @ X
        x = Trajectory(grid, X)
        if np.max(constraint_values(spec, x)) <= 0.0:
            points.append(x)
    return points


def run_weak(spec: ProblemSpec, part: Partition, opts: SolverOptions | None = None,
             tol: float = 1e-6, samples: int = 100, seed: int = 0, weights=None,
             recovery_tol: float = 1e-4) -> Outcome:
    out = Outcome()
    res, rec = recovered_point(spec, part, weights, opts, recovery_tol)
    dp = rec.dual_point
    pts = sample_feasible_points(spec, dp.grid, samples, seed, anchor=res.x.x)
    rows, violations, errors = [], 0, 0
    for k, x in enumerate(pts):
        try:
            rep = weak_duality_check(spec, part, x, dp, tol, feas_tol=recovery_tol)
        except InfeasibleInput as exc:
            errors += 1
            out.messages.append(f"sample {k}: {exc}")
            continue
        delta = rep.data["delta"]
        violations += int(rep.data["violation"])
        rows.append((k, *delta, int(rep.data["violation"])))
    rep = Report(f"weak_duality_sweep[{spec.name}; {part}]")
    rep.add("samples drawn", len(pts), len(pts) == samples, samples)
    rep.add("dominance violations", violations, violations == 0, 0)
    rep.add("rejected inputs", errors, errors == 0, 0)
    rep.data["deltas"] = np.array([r[1:-1] for r in rows])
    out.reports.append(rep)
    out.tables["weak_samples.csv"] = _table(
        ["sample"] + [f"delta{i}" for i in range(1, spec.p + 1)] + ["violation"], rows)
    return out


# -- converse duality --------------------------------------------------------


def run_converse(spec: ProblemSpec, part: Partition, opts: SolverOptions | None = None,
                 tol: float = 1e-4, weights=None) -> Outcome:
    out = Outcome()
    _, rec = recovered_point(spec, part, weights, opts, tol)
    rep = converse_duality_check(spec, part, rec.dual_point, tol)
    out.reports.append(rep)
    sv = rep.data["singular_values"]
    out.tables["converse.csv"] = _table(["index", "singular_value"],
                                        [(k + 1, v) for k, v in enumerate(sv)])
    return out


# -- invexity ----------------------------------------------------------------


def run_invexity(spec: ProblemSpec, part: Partition, opts: SolverOptions | None = None,
                 pairs: int = 500, seed: int = 0, weights=None, tol: float = 1e-4) -> Outcome:
    """Pseudoinvexity of the combined functional, quasi-invexity of each ``J_alpha`` part."""
    out = Outcome()
    _, rec = recovered_point(spec, part, weights, opts, tol)
    dp = rec.dual_point
    reps = [certify_pseudoinvex(FunctionalSpec.combined(spec, part, dp), pairs=pairs, seed=seed)]
    for alpha in range(1, part.r + 1):
        if part.sets[alpha]:
            F = FunctionalSpec.partition_part(spec, part, dp, alpha)
            reps.append(certify_quasiinvex(F, pairs=pairs, seed=seed))
    out.reports += reps
    out.tables["invexity.csv"] = certificate_csv(reps)
    return out


# -- frontier ----------------------------------------------------------------


def nondominated_mask(values: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """``True`` for rows not dominated by any other row (minimization)."""
    V = np.asarray(values, float)
    keep = np.ones(len(V), dtype=bool)
    for k in range(len(V)):
        le = np.all(V <= V[k] + tol, axis=1)
        lt = np.any(V < V[k] - tol, axis=1)
        if np.any(le & lt):
            keep[k] = False
    return keep


def run_frontier(spec: ProblemSpec, opts: SolverOptions | None = None, tol: float = 1e-4,
                 count: int = 9, check_efficiency: bool = True) -> Outcome:
    """Weighted-sum sweep; efficiency failures are recorded in the table only."""
    out = Outcome()
    opts = opts or SolverOptions()
    grid = default_weight_grid(spec.p, count)
    results = pareto_sweep(spec, grid, opts=opts)
    rows = []
    for res in results:
        eff = None
        if check_efficiency and res.converged:
            eff = efficiency_check(spec, res.x, tol, opts)
        worst = (max((c.value for c in eff.checks), default=0.0) if eff is not None else np.nan)
        rows.append((*res.weights, *res.objective, res.status.value, res.kkt_residual,
                     "" if eff is None else int(eff.passed), worst))
    J = np.array([r.objective for r in results]) if results else np.zeros((0, spec.p))
    rep = Report(f"frontier[{spec.name}]")
    conv = sum(r.converged for r in results)
    rep.add("converged solves", conv, conv == len(results), len(results))
    nd = int(np.sum(nondominated_mask(J, tol))) if len(J) else 0
    rep.add("mutually non-dominating", nd, nd == len(J), len(J))
    rep.data.update(results=results, objectives=J)
    out.reports.append(rep)
    out.solver_failed |= conv == 0
    out.tables["frontier.csv"] = _table(
        [f"w{i}" for i in range(1, spec.p + 1)] + [f"J{i}" for i in range(1, spec.p + 1)]
        + ["status", "kkt", "efficient", "max_improvement"], rows)
    return out


# -- static problems ---------------------------------------------------------


def brute_force_front(spec: ProblemSpec, step: float = 0.01, box: float = 2.0):
    """Nondominated feasible points of a two-variable static problem on a grid.

    Returns ``(points, objectives)``.  Pareto filter: sort by the first
    objective (ties by the second) and keep rows that strictly improve the
    running minimum of the second.
    """
    if not spec.is_static:
        raise NotStatic(f"{spec.name} is not static")
    if spec.n != 2 or spec.p != 2:
        raise ValueError("grid search is implemented for n = 2, p = 2")
    k = int(round(box / step))
    axis = np.arange(-k, k + 1) * step
    X0, X1 = np.meshgrid(axis, axis, indexing="ij")
    P = np.column_stack([X0.ravel(), X1.ravel()])
    dom = spec.static_domain()
    zeros = np.zeros_like(P)
    t = np.full(len(P), dom.nodes[0])
    G = np.column_stack([gj.values(t, P, zeros, zeros) for gj in spec.g])
    P = P[np.all(G <= 0.0, axis=1)]
    zeros = zeros[:len(P)]
    t = t[:len(P)]
    F = np.column_stack([
        fi.values(t, P, zeros, zeros) + np.sqrt(np.maximum(np.einsum("ki,ij,kj->k", P, Bi, P), 0))
        for fi, Bi in zip(spec.f, spec.B)])
    order = np.lexsort((F[:, 1], F[:, 0]))
    keep, best = [], np.inf
    for idx in order:
        if F[idx, 1] < best:
            keep.append(idx)
            best = F[idx, 1]
    return P[keep], F[keep]


def sample_static_dual_points(spec: ProblemSpec, part: Partition, count: int, seed: int,
                              box: float = 2.0, tol: float = 1e-9, max_tries: int = 2000):
    """Random dual-feasible points of a static problem by rejection sampling.

    Draw ``u`` in the box and ``z^i`` with ``z^T B z <= 1``, pick a random set
    of constraints with free multipliers, fix surplus multipliers at random
    and solve the stationarity equations plus ``sum(lambda) = 1`` for the rest.
    Points failing ``lambda > 0``, ``y >= 0`` or the partition inequalities are
    rejected.
    """
    rng = np.random.default_rng(seed)
    dom = spec.static_domain()
    n, p, m = spec.n, spec.p, spec.m
    t = dom.nodes
    found, tries = [], 0
    while len(found) < count and tries < max_tries * count:
        tries += 1
        u = rng.uniform(-box, box, size=n)
        U = u[None, :]
        zs = []
        for Bi in spec.B:
            v = rng.normal(size=n)
            q = float(v @ Bi @ v)
            zs.append(v / np.sqrt(q) * rng.uniform() if q > 0 else v)
        zero = np.zeros_like(U)
        A = np.column_stack([fi.values_and_partials(t, U, zero, zero)[1][0] + Bi @ zi
                             for fi, Bi, zi in zip(spec.f, spec.B, zs)])
        C = np.column_stack([gj.values_and_partials(t, U, zero, zero)[1][0] for gj in spec.g])
        S = np.flatnonzero(rng.uniform(size=m) < 0.5)
        y = np.zeros(m)
        unknown = p + len(S)
        surplus = unknown - (n + 1)
        if surplus < 0:
            continue
        fixed = rng.choice(S, size=surplus, replace=False) if surplus else np.array([], int)
        y[fixed] = rng.uniform(0.0, 2.0, size=len(fixed))
        solve_for = np.setdiff1d(S, fixed)
        M = np.zeros((n + 1, p + len(solve_for)))
        M[:n, :p] = A
        M[:n, p:] = C[:, solve_for]
        M[n, :p] = 1.0
        rhs = np.concatenate([-C @ y, [1.0]])
        try:
            sol = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            continue
        lam = sol[:p]
        y[solve_for] = sol[p:]
        if np.any(lam <= 0) or np.any(y < 0):
            continue
        dp = static_dual_point(spec, u, y, zs, lam)
        if dual_feasibility(spec, part, dp, tol).passed:
            found.append(dp)
    return found


def run_static(spec: ProblemSpec, part: Partition, opts: SolverOptions | None = None,
               tol: float = 1e-6, samples: int = 200, seed: int = 0, step: float = 0.01,
               match_tol: float = 0.02) -> Outcome:
    if not spec.is_static:
        raise NotStatic(f"{spec.name} references t, xd or xdd; static mode needs neither")
    out = Outcome()
    opts = opts or SolverOptions()
    pts, _ = brute_force_front(spec, step)
    weights = [np.eye(spec.p)[0]] + default_weight_grid(spec.p, 9) + [np.eye(spec.p)[-1]]
    rows, worst = [], 0.0
    for w in weights:
        res = solve_weighted(spec, w, opts=opts)
        x = res.x.x.values[0]
        d = float(np.min(np.linalg.norm(pts - x, axis=1)))
        worst = max(worst, d)
        rows.append((*w, *x, res.status.value, d))
        out.solver_failed |= not res.converged
    rep = Report(f"static_front[{spec.name}]")
    rep.add("max distance to grid front", worst, worst <= match_tol, match_tol,
            f"grid step {step}, {len(pts)} nondominated grid points")
    out.reports.append(rep)
    out.tables["static_front.csv"] = _table(
        [f"w{i}" for i in range(1, spec.p + 1)] + [f"x{c}" for c in range(spec.n)]
        + ["status", "distance"], rows)

    rng = np.random.default_rng(seed)
    duals = sample_static_dual_points(spec, part, samples, int(rng.integers(2 ** 31)))
    prims = sample_feasible_points(spec, spec.static_domain(), samples,
                                   int(rng.integers(2 ** 31)))
    wrows, violations = [], 0
    for k, (x, dp) in enumerate(zip(prims, duals)):
        r = weak_duality_check(spec, part, x, dp, tol)
        violations += int(r.data["violation"])
        wrows.append((k, *r.data["delta"], int(r.data["violation"])))
    wrep = Report(f"static_weak_duality[{spec.name}; {part}]")
    pairs = min(len(prims), len(duals))
    wrep.add("pairs drawn", pairs, pairs == samples, samples)
    wrep.add("dominance violations", violations, violations == 0, 0)
    out.reports.append(wrep)
    out.tables["static_weak.csv"] = _table(
        ["pair"] + [f"delta{i}" for i in range(1, spec.p + 1)] + ["violation"], wrows)
    return out
