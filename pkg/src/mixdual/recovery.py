"""Recovering a dual point from an efficient primal trajectory.

Given an efficient ``xbar`` the dual point is ``u = xbar`` with

* ``z^i = xbar / sqrt(xbar^T B^i xbar)`` where that quadratic form is positive
  and ``z^i = 0`` elsewhere (the Schwarz inequality then holds with equality);
* ``(lambda, y)`` minimizing the quadrature-weighted squared stationarity
  residual subject to ``lambda >= floor``, ``sum(lambda) = 1``, ``y >= 0`` and
  ``y = 0`` wherever the constraint is inactive.

The multiplier problem is a small convex quadratic program.  It is solved by
accelerated projected gradient followed by an active-set polish that solves
the equality-constrained least-squares problem on the free variables exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dual import (DualPoint, Partition, dual_feasibility, dual_objective, partition_sums,
                   stationarity_nodes, stationarity_residual, variation_projector,
                   weighted_partials)
from .errors import NotEfficient, RecoveryFailed
from .grid import Trajectory
from .problem import (PrimalPoint, ProblemSpec, as_point, constraint_values, primal_feasibility,
                      primal_objective)
from .report import Report, fmt

Z_TOL = 1e-20
ACTIVE_TOL = 1e-6
LAMBDA_FLOOR = 1e-6


def recover_z(x, B, tol: float = Z_TOL) -> np.ndarray:
    """Rows ``x_k / sqrt(x_k^T B x_k)``, or zero where the form is ``<= tol``."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    q = np.einsum("ki,ij,kj->k", X, np.asarray(B, float), X)
    Z = np.zeros_like(X)
    pos = q > tol
    Z[pos] = X[pos] / np.sqrt(q[pos])[:, None]
    return Z.reshape(np.shape(x))


def schwartz_gap(x, z, B) -> float:
    """``sqrt(x^T B x) sqrt(z^T B z) - x^T B z``; nonnegative for PSD ``B``."""
    x, z, B = (np.asarray(v, dtype=float) for v in (x, z, B))
    return float(np.sqrt(max(0.0, x @ B @ x)) * np.sqrt(max(0.0, z @ B @ z)) - x @ B @ z)


@dataclass
class RecoveryResult:
    dual_point: DualPoint
    stationarity_residual: float
    slackness_residual: float
    objective_gap: np.ndarray
    partition_sums: np.ndarray
    least_squares_residual: float
    unconstrained_residual: float
    active_set: np.ndarray
    lambda_at_floor: bool = False
    flags: list = field(default_factory=list)

    @property
    def lam(self) -> np.ndarray:
        return self.dual_point.lam

    def report(self, tol: float = 1e-4) -> Report:
        rep = Report("recovery")
        rep.add("stationarity", self.stationarity_residual, self.stationarity_residual <= tol, tol)
        rep.add("complementary slackness", self.slackness_residual,
                self.slackness_residual <= tol, tol)
        for a, s in enumerate(self.partition_sums):
            rep.add(f"sum J{a} int y g", s, abs(s) <= tol, tol)
        gap = float(np.max(np.abs(self.objective_gap)))
        rep.add("max |primal - dual|", gap, gap <= tol, tol)
        return rep

    def to_csv(self) -> str:
        lines = ["quantity,index,value"]
        lines += [f"lambda,{i},{fmt(v)}" for i, v in enumerate(self.lam, 1)]
        lines += [f"objective_gap,{i},{fmt(v)}" for i, v in enumerate(self.objective_gap, 1)]
        lines += [f"partition_sum,{a},{fmt(v)}" for a, v in enumerate(self.partition_sums)]
        lines += [f"stationarity,,{fmt(self.stationarity_residual)}",
                  f"slackness,,{fmt(self.slackness_residual)}",
                  f"least_squares,,{fmt(self.least_squares_residual)}",
                  f"unconstrained_least_squares,,{fmt(self.unconstrained_residual)}",
                  f"lambda_at_floor,,{fmt(self.lambda_at_floor)}"]
        return "\n".join(lines) + "\n"


# -- the multiplier least-squares problem ------------------------------------


def _design_matrix(spec: ProblemSpec, u: Trajectory, zs, active):
    """Columns map ``(lambda, y_active)`` to the weighted stationarity residual.

    ``M`` has shape ``(len(nodes) * n, p + nA)``; rows are scaled by
    ``sqrt(w_k)`` so ``|M theta|^2`` is the quadrature norm.
    """
    grid = u.grid
    N, n = u.values.shape
    P = variation_projector(spec, grid)
    nodes = stationarity_nodes(spec, grid)
    scale = np.sqrt(grid.weights[nodes])[:, None]
    dp0 = DualPoint(u, Trajectory.zeros(grid, spec.m), tuple(zs), np.zeros(spec.p))

    def finish(E):
        if P is not None:
            E = P @ E
        return (scale * E[nodes]).ravel()

    cols = []
    for i in range(spec.p):
        lam = np.zeros(spec.p)
        lam[i] = 1.0
        Ax, Axd, Axdd = weighted_partials(spec, dp0, lam=lam, y=np.zeros((N, spec.m)))
        cols.append(finish(Ax - grid.Dt @ Axd + grid.D2t @ Axdd))
    states = (grid.nodes, u.values, grid.D @ u.values, grid.D2 @ u.values)
    partials = [gj.values_and_partials(*states)[1:] for gj in spec.g]
    for k, j in active:
        gx, gxd, gxdd = (a[k] for a in partials[j])
        E = np.zeros((N, n))
        E[k] += gx
        if np.any(gxd):
            E -= np.outer(grid.Dt[:, k], gxd)
        if np.any(gxdd):
            E += np.outer(grid.D2t[:, k], gxdd)
        cols.append(finish(E))
    return np.column_stack(cols)


def _project_simplex_floor(v, floor):
    """Euclidean projection onto ``{l >= floor, sum(l) = 1}``."""
    p = len(v)
    budget = 1.0 - p * floor
    w = v - floor
    s = np.sort(w)[::-1]
    css = np.cumsum(s) - budget
    ks = np.arange(1, p + 1)
    rho = np.nonzero(s - css / ks > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return floor + np.maximum(w - theta, 0.0)


def _project(theta, p, floor):
    out = theta.copy()
    out[:p] = _project_simplex_floor(theta[:p], floor)
    out[p:] = np.maximum(theta[p:], 0.0)
    return out


def _eq_lstsq(M, p, free, fixed_vals):
    """Minimize ``|M theta|`` with ``theta[~free] = fixed_vals[~free]`` and ``sum(lambda) = 1``."""
    rhs = -M[:, ~free] @ fixed_vals[~free]
    Mf = M[:, free]
    lam_free = free[:p]
    c = np.zeros(Mf.shape[1])
    c[:int(lam_free.sum())] = 1.0
    target = 1.0 - fixed_vals[:p][~lam_free].sum()
    nf = Mf.shape[1]
    K = np.zeros((nf + 1, nf + 1))
    K[:nf, :nf] = Mf.T @ Mf
    K[:nf, nf] = c
    K[nf, :nf] = c
    b = np.concatenate([Mf.T @ rhs, [target]])
    sol = np.linalg.lstsq(K, b, rcond=None)[0]
    theta = fixed_vals.copy()
    theta[free] = sol[:nf]
    return theta


def _residual(M, theta) -> float:
    return float(np.linalg.norm(M @ theta))


def solve_multipliers(M, p, floor=LAMBDA_FLOOR, max_iter=20000, tol=1e-14):
    """Constrained least squares for ``(lambda, y)``; returns ``(theta, residual)``."""
    nvar = M.shape[1]
    H = M.T @ M
    L = float(np.linalg.eigvalsh(H)[-1]) if nvar else 1.0
    L = max(L, 1e-300)
    theta = _project(np.concatenate([np.full(p, 1.0 / p), np.zeros(nvar - p)]), p, floor)
    yk, t = theta.copy(), 1.0
    for _ in range(max_iter):
        new = _project(yk - (H @ yk) / L, p, floor)
        if np.max(np.abs(new - theta)) <= tol * max(1.0, np.max(np.abs(new))):
            theta = new
            break
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        yk = new + ((t - 1.0) / t_next) * (new - theta)
        theta, t = new, t_next
    best, best_r = theta, _residual(M, theta)
    # active-set polish: fix variables at their bounds, solve the rest exactly
    eps = 1e-12 * max(1.0, float(np.max(np.abs(theta))))
    lower = np.concatenate([np.full(p, floor), np.zeros(nvar - p)])
    free = theta > lower + eps
    for _ in range(nvar + 1):
        if not free[:p].any():
            break
        cand = _eq_lstsq(M, p, free, lower)
        bad = cand < lower - 1e-15
        if bad.any():
            # step back to the feasible segment and drop the blocking variables
            d = cand - best
            with np.errstate(divide="ignore", invalid="ignore"):
                steps = np.where(bad & (d < 0), (lower - best) / d, np.inf)
            step = float(np.clip(np.min(steps), 0.0, 1.0))
            trial = _project(best + step * d, p, floor)
            free &= ~bad
            if _residual(M, trial) <= best_r:
                best, best_r = trial, _residual(M, trial)
            continue
        cand = _project(cand, p, floor)
        r = _residual(M, cand)
        if r <= best_r:
            best, best_r = cand, r
        break
    return best, best_r


def unconstrained_multipliers(M, p):
    """Least squares with only ``sum(lambda) = 1`` imposed."""
    free = np.ones(M.shape[1], dtype=bool)
    theta = _eq_lstsq(M, p, free, np.zeros(M.shape[1]))
    return theta, _residual(M, theta)


# -- public entry points -----------------------------------------------------


def recover_multipliers(spec: ProblemSpec, xbar, part: Partition, tol: float = 1e-4,
                        active_tol: float = ACTIVE_TOL, lam_floor: float = LAMBDA_FLOOR,
                        z_tol: float = Z_TOL, verify_efficiency: bool = False,
                        solver_options=None) -> RecoveryResult:
    """Build the dual point attached to an efficient ``xbar``.

    Raises :class:`NotEfficient` when ``xbar`` is infeasible (or, with
    ``verify_efficiency``, when a scalarized re-solve improves on it) and
    :class:`RecoveryFailed` when the best multipliers leave a stationarity
    residual above ``tol``; the exception's ``result`` attribute holds them.
    """
    pt = as_point(xbar)
    feas = primal_feasibility(spec, pt, tol)
    if not feas.passed:
        raise NotEfficient(f"xbar is infeasible: {feas.failures()[0].name} = "
                           f"{feas.failures()[0].value:.3g}")
    if verify_efficiency:
        from .solver import efficiency_check

        eff = efficiency_check(spec, pt, tol, solver_options)
        if not eff.passed:
            raise NotEfficient("a scalarized re-solve improves on xbar")
    u = pt.x
    grid = u.grid
    zs = tuple(Trajectory(grid, recover_z(u.values, Bi, z_tol)) for Bi in spec.B)
    G = constraint_values(spec, pt)
    active = np.argwhere(G > -active_tol)
    M = _design_matrix(spec, u, zs, active)
    theta, ls_res = solve_multipliers(M, spec.p, lam_floor)
    _, unc_res = unconstrained_multipliers(M, spec.p)
    lam = theta[:spec.p]
    Y = np.zeros((grid.N, spec.m))
    for (k, j), v in zip(active, theta[spec.p:]):
        Y[k, j] = v
    dp = DualPoint(u, Trajectory(grid, Y), zs, lam)
    flags = []
    if ls_res > 1.1 * unc_res + 1e-12:
        flags.append("constrained least-squares residual more than 10% above the "
                     "unconstrained one")
    at_floor = bool(np.any(lam <= lam_floor * (1 + 1e-9)))
    if at_floor:
        flags.append("some lambda_i sits at the positivity floor")
    per_j = grid.weights @ (Y * G)
    result = RecoveryResult(
        dual_point=dp,
        stationarity_residual=stationarity_residual(spec, dp),
        slackness_residual=float(abs(per_j.sum())),
        objective_gap=primal_objective(spec, pt) - dual_objective(spec, part, dp),
        partition_sums=partition_sums(spec, part, dp),
        least_squares_residual=ls_res,
        unconstrained_residual=unc_res,
        active_set=active,
        lambda_at_floor=at_floor,
        flags=flags,
    )
    if result.stationarity_residual > tol:
        exc = RecoveryFailed(f"stationarity residual {result.stationarity_residual:.3g} "
                             f"exceeds {tol:.3g}")
        exc.result = result
        raise exc
    return result


def strong_duality_check(spec: ProblemSpec, part: Partition, xbar, tol: float = 1e-4,
                         recovery: RecoveryResult | None = None) -> Report:
    """Recover the dual point for ``xbar`` and compare the two objective vectors."""
    rec = recovery if recovery is not None else recover_multipliers(spec, xbar, part, tol)
    rep = Report(f"strong_duality[{spec.name}; {part}]")
    rep.extend(dual_feasibility(spec, part, rec.dual_point, tol), "dual ")
    prim = primal_objective(spec, xbar)
    dual = dual_objective(spec, part, rec.dual_point)
    for i, (a, b) in enumerate(zip(prim, dual), 1):
        gap = abs(a - b) / (1.0 + abs(a))
        rep.add(f"relative gap i={i}", gap, gap <= tol, tol)
    for a, s in enumerate(rec.partition_sums):
        rep.add(f"sum J{a} int y g", s, abs(s) <= tol, tol)
    rep.data.update(primal=prim, dual=dual, recovery=rec)
    return rep


def gram_singular_values(spec: ProblemSpec, part: Partition, dp: DualPoint) -> np.ndarray:
    """Singular values of the per-objective stationarity vectors.

    Vector ``i`` is the stationarity expression of ``f^i + u^T B^i z^i +
    sum_{J_0} y^j g^j`` alone; the vectors are compared in the quadrature inner
    product after removing boundary-condition directions.
    """
    grid = dp.grid
    P = variation_projector(spec, grid)
    nodes = stationarity_nodes(spec, grid)
    scale = np.sqrt(grid.weights[nodes])[:, None]
    mask = part.mask(0)
    Y0 = np.where(mask[None, :], dp.y.values, 0.0)
    cols = []
    for i in range(spec.p):
        lam = np.zeros(spec.p)
        lam[i] = 1.0
        Ax, Axd, Axdd = weighted_partials(spec, dp, lam=lam, y=Y0)
        E = Ax - grid.Dt @ Axd + grid.D2t @ Axdd
        if P is not None:
            E = P @ E
        cols.append((scale * E[nodes]).ravel())
    V = np.column_stack(cols)
    return np.linalg.svd(V, compute_uv=False)


def converse_duality_check(spec: ProblemSpec, part: Partition, dp: DualPoint,
                           tol: float = 1e-4, independence_tol: float = 1e-8) -> Report:
    """Checks backing the converse statement at a dual-feasible point.

    * independence of the per-objective stationarity vectors (smallest over
      largest singular value above ``independence_tol``).  This is a
      hypothesis of the converse statement, not a conclusion, so it is
      reported but never fails the report: whenever the only active
      constraints sit in ``J_0`` the weighted sum of those vectors is zero and
      they are dependent by construction;
    * primal feasibility of ``u`` (the offending node is named on failure);
    * equality of primal and dual objective vectors at ``u``.
    """
    rep = Report(f"converse_duality[{spec.name}; {part}]")
    sv = gram_singular_values(spec, part, dp)
    ratio = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    independent = ratio > independence_tol
    rep.add("(a) singular value ratio", ratio, True, independence_tol,
            "independent" if independent else "dependent: hypothesis not met, reported only")
    pt = PrimalPoint(dp.u)
    feas = primal_feasibility(spec, pt, tol)
    worst = feas["max_constraint"]
    rep.add("(b) primal feasibility of u", worst.value, worst.value <= tol, tol, worst.note)
    prim = primal_objective(spec, pt)
    dual = dual_objective(spec, part, dp)
    gap = float(np.max(np.abs(prim - dual) / (1.0 + np.abs(prim))))
    rep.add("(c) objective equality", gap, gap <= tol, tol)
    dfeas = dual_feasibility(spec, part, dp, tol)
    rep.data.update(singular_values=sv, independent=independent, primal=prim, dual=dual, dual_feasibility=dfeas,
                    worst_node=feas.data["worst_node"])
    return rep
