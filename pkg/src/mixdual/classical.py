"""Wolfe and Mond-Weir duals written out directly.

These evaluate the two classical duals from their own formulas, without the
partition machinery of :mod:`mixdual.dual`, so the mixed dual's special
cases can be compared against an independent implementation.

Wolfe:      maximize  int f^i + u^T B^i z^i + y^T g dt
Mond-Weir:  maximize  int f^i + u^T B^i z^i dt   subject to  int y^T g dt >= 0

Both share the stationarity equation and the conditions on ``z``, ``y`` and
``lambda``.
"""

from __future__ import annotations

import numpy as np

from .dual import DualPoint, stationarity_residual
from .problem import Boundary, ProblemSpec
from .report import Report


def _node_values(spec: ProblemSpec, dp: DualPoint):
    g = dp.grid
    U = dp.u.values
    Ud, Udd = g.D @ U, g.D2 @ U
    F = np.column_stack([fi.values(g.nodes, U, Ud, Udd) for fi in spec.f])
    G = np.column_stack([gj.values(g.nodes, U, Ud, Udd) for gj in spec.g])
    UBZ = np.column_stack([np.sum((U @ Bi) * zi.values, axis=1)
                           for Bi, zi in zip(spec.B, dp.z)])
    return F, G, UBZ


def _common_constraints(spec: ProblemSpec, dp: DualPoint, tol: float, rep: Report) -> None:
    g = dp.grid
    if spec.boundary is Boundary.FIXED_ZERO and not g.is_static:
        U = dp.u.values
        Ud = g.D @ U
        rep.add("u(a)", np.abs(U[0]).max(), np.abs(U[0]).max() <= tol, tol)
        rep.add("u(b)", np.abs(U[-1]).max(), np.abs(U[-1]).max() <= tol, tol)
        rep.add("ud(a)", np.abs(Ud[0]).max(), np.abs(Ud[0]).max() <= tol, tol)
        rep.add("ud(b)", np.abs(Ud[-1]).max(), np.abs(Ud[-1]).max() <= tol, tol)
    st = stationarity_residual(spec, dp)
    rep.add("stationarity", st, st <= tol, tol)
    zb = max(float(np.max(np.sum((zi.values @ Bi) * zi.values, axis=1))) - 1.0
             for Bi, zi in zip(spec.B, dp.z))
    rep.add("z^T B z - 1", zb, zb <= tol, tol)
    ymin = float(dp.y.values.min())
    rep.add("min y", ymin, ymin >= -tol, -tol)
    lmin = float(dp.lam.min())
    rep.add("min lambda", lmin, lmin > 0.0, 0.0)
    ls = abs(float(dp.lam.sum()) - 1.0)
    rep.add("|sum lambda - 1|", ls, ls <= tol, tol)


def wolfe_dual(spec: ProblemSpec, dp: DualPoint, tol: float = 1e-6):
    """Objective vector and constraint report of the Wolfe dual at ``dp``."""
    F, G, UBZ = _node_values(spec, dp)
    w = dp.grid.weights
    penalty = np.sum(dp.y.values * G, axis=1)
    obj = np.array([w @ (F[:, i] + UBZ[:, i] + penalty) for i in range(spec.p)])
    rep = Report(f"wolfe_dual[{spec.name}]")
    _common_constraints(spec, dp, tol, rep)
    return obj, rep


def mond_weir_dual(spec: ProblemSpec, dp: DualPoint, tol: float = 1e-6):
    """Objective vector and constraint report of the Mond-Weir dual at ``dp``."""
    F, G, UBZ = _node_values(spec, dp)
    w = dp.grid.weights
    obj = np.array([w @ (F[:, i] + UBZ[:, i]) for i in range(spec.p)])
    rep = Report(f"mond_weir_dual[{spec.name}]")
    _common_constraints(spec, dp, tol, rep)
    total = float(w @ np.sum(dp.y.values * G, axis=1))
    rep.add("int y^T g", total, total >= -tol, -tol)
    return obj, rep
