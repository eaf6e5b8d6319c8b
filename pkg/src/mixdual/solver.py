"""Discretized primal solves: weighted-sum and epsilon-constraint scalarizations.

The decision vector is the set of admissible node values.  For ``FixedZero``
problems the endpoint conditions ``x = Dx = 0`` are linear in the node values
and are eliminated with an explicit basis ``Z`` (``x = Z q``); ``Natural`` and
static problems use every node.

Inequalities ``g^j(t_k, ...) <= 0`` (one per node) and epsilon rows
``J_i <= bound_i`` are handled by an augmented Lagrangian in squared-hinge
form.  Node constraints are weighted by the quadrature weights, so their
multipliers approximate the multiplier *functions* ``y^j(t_k)``.

Square-root terms are replaced by ``sqrt(x^T B x + mu^2) - mu`` while solving;
``mu`` starts at ``mu0`` and is halved at every outer iteration until it
reaches ``mu_min``.  Reported objective values always use the exact terms.

The inner minimizer is L-BFGS whose initial inverse Hessian is a Cholesky
factorization of the assembled Hessian of the augmented Lagrangian (exact
for the quadratic parts, finite differences of exact partials for the rest).
Without it the fourth-order stiffness of ``xdd`` terms (condition numbers of
order ``h**-4``) makes plain L-BFGS stall far from the KKT tolerance.
An inner run also stops when the gradient norm has not improved by 10%
over ``STALL_ITERS`` iterations: that is the roundoff floor, not progress.

The reported stationarity is the gradient of the Lagrangian divided by ``h``
and by the size of the gradient with every term taken in absolute value, so
cancellation between large terms does not masquerade as non-convergence.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import EvalError, InfeasibleStart, MaxIterExceeded, SolverError
from .grid import Trajectory
from .problem import Boundary, PrimalPoint, ProblemSpec, primal_objective
from .report import Report

log = logging.getLogger(__name__)

STALL_ITERS = 30


class Status(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-6
    feas_tol: float = 1e-6
    max_outer: int = 50
    max_inner: int = 500
    mu0: float = 1e-2
    mu_min: float = 1e-8
    rho0: float = 10.0
    rho_max: float = 1e10
    memory: int = 10
    N: int = 201
    raise_on_failure: bool = False

    @classmethod
    def from_config(cls, cfg: dict) -> "SolverOptions":
        """Build from ``solver.*`` config keys (``solver.tol``, ``solver.max_outer``...)."""
        kw = {}
        for name, typ in (("tol", float), ("feas_tol", float), ("max_outer", int),
                          ("max_inner", int), ("mu0", float), ("mu_min", float),
                          ("rho0", float), ("rho_max", float), ("memory", int)):
            key = f"solver.{name}"
            if key in cfg:
                kw[name] = typ(cfg[key])
        return cls(**kw)


@dataclass
class SolveResult:
    x: PrimalPoint
    objective: np.ndarray
    kkt_residual: float
    iterations: int
    status: Status
    node_multipliers: np.ndarray = None  # (N, m) estimates of y(t_k)
    bound_multipliers: np.ndarray = None  # one per epsilon row
    weights: np.ndarray = None
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def admissible_basis(spec: ProblemSpec, domain) -> np.ndarray:
    """Columns span the node vectors allowed by the boundary conditions.

    With ``FixedZero`` the free nodes are ``2..N-3``; ``x_1 = x_2 / 4`` and
    ``x_{N-2} = x_{N-3} / 4`` make the one-sided endpoint derivatives vanish.
    """
    N = domain.N
    if domain.is_static or spec.boundary is Boundary.NATURAL:
        return np.eye(N)
    nf = N - 4
    Z = np.zeros((N, nf))
    Z[2:N - 2, :] = np.eye(nf)
    Z[1, 0] = 0.25
    Z[N - 2, nf - 1] = 0.25
    return Z


class DiscreteModel:
    """Objectives, constraints and derivatives as functions of ``q``."""

    def __init__(self, spec: ProblemSpec, domain):
        self.spec = spec
        self.domain = domain
        self.t = domain.nodes
        self.w = domain.weights
        self.N, self.n = domain.N, spec.n
        self.Z = admissible_basis(spec, domain)
        self.nf = self.Z.shape[1]
        self.DZ = domain.D @ self.Z
        self.D2Z = domain.D2 @ self.Z
        self.h = domain.h if not domain.is_static else 1.0
        In = sp.identity(self.n, format="csr")
        self._S = sp.vstack([sp.kron(sp.csr_matrix(M), In) for M in (self.Z, self.DZ, self.D2Z)],
                            format="csr")

    # -- state maps ----------------------------------------------------------

    def states(self, q):
        Q = q.reshape(self.nf, self.n)
        return self.Z @ Q, self.DZ @ Q, self.D2Z @ Q

    def pullback(self, GX, GXd, GXdd) -> np.ndarray:
        return (self.Z.T @ GX + self.DZ.T @ GXd + self.D2Z.T @ GXdd).ravel()

    def gradient_scale(self, q, obj_weights, node_coef) -> float:
        """Largest entry of the gradient computed with every term in absolute value.

        This is the size of the quantities that cancel at a stationary point;
        roundoff in the gradient is proportional to it.
        """
        X, Xd, Xdd = self.states(q)
        w = self.w[:, None]
        acc = [np.zeros_like(X) for _ in range(3)]
        terms = [(c, fi) for c, fi in zip(obj_weights, self.spec.f) if c != 0.0]
        for c, fi in terms:
            parts = fi.values_and_partials(self.t, X, Xd, Xdd)[1:]
            for a, pa in zip(acc, parts):
                a += abs(c) * np.abs(w * pa)
        for i, (c, Bi) in enumerate(zip(obj_weights, self.spec.B)):
            acc[0] += abs(c) * np.abs(w * (X @ Bi)) / np.maximum(
                np.sqrt(np.maximum(np.sum((X @ Bi) * X, axis=1), 0.0)), 1e-300)[:, None]
        for j, gj in enumerate(self.spec.g):
            cj = node_coef[:, j]
            if np.any(cj):
                parts = gj.values_and_partials(self.t, X, Xd, Xdd)[1:]
                for a, pa in zip(acc, parts):
                    a += np.abs(cj[:, None] * w * pa)
        tot = (np.abs(self.Z).T @ acc[0] + np.abs(self.DZ).T @ acc[1]
               + np.abs(self.D2Z).T @ acc[2])
        return float(np.max(tot))

    def lift(self, x_values) -> np.ndarray:
        Q, *_ = np.linalg.lstsq(self.Z, np.asarray(x_values, float), rcond=None)
        return Q.ravel()

    def trajectory(self, q) -> Trajectory:
        return Trajectory(self.domain, self.states(q)[0])

    # -- evaluations ---------------------------------------------------------

    def objectives(self, q, mu=0.0, grad=False):
        """Objective vector ``(p,)`` and optionally gradients ``(p, nf*n)``."""
        X, Xd, Xdd = self.states(q)
        w = self.w[:, None]
        J = np.empty(self.spec.p)
        dJ = np.empty((self.spec.p, self.nf * self.n)) if grad else None
        for i, (fi, Bi) in enumerate(zip(self.spec.f, self.spec.B)):
            BX = X @ Bi
            quad = np.maximum(np.sum(BX * X, axis=1), 0.0)
            s = np.sqrt(quad + mu * mu)
            if grad:
                v, gx, gxd, gxdd = fi.values_and_partials(self.t, X, Xd, Xdd)
                safe = np.where(s > 0, s, 1.0)
                gx = gx + np.where(s[:, None] > 0, BX / safe[:, None], 0.0)
                dJ[i] = self.pullback(w * gx, w * gxd, w * gxdd)
            else:
                v = fi.values(self.t, X, Xd, Xdd)
            J[i] = self.w @ (v + s - mu)
        return J, dJ

    def constraints(self, q) -> np.ndarray:
        X, Xd, Xdd = self.states(q)
        return np.column_stack([gj.values(self.t, X, Xd, Xdd) for gj in self.spec.g])

    def constraint_pullback(self, q, node_weights) -> np.ndarray:
        """Gradient of ``sum_{k,j} node_weights[k, j] * g^j(t_k, ...)``."""
        X, Xd, Xdd = self.states(q)
        GX, GXd, GXdd = np.zeros_like(X), np.zeros_like(X), np.zeros_like(X)
        for j, gj in enumerate(self.spec.g):
            c = node_weights[:, j]
            if not np.any(c):
                continue
            _, gx, gxd, gxdd = gj.values_and_partials(self.t, X, Xd, Xdd)
            GX += c[:, None] * gx
            GXd += c[:, None] * gxd
            GXdd += c[:, None] * gxdd
        return self.pullback(GX, GXd, GXdd)

    # -- second-order information for the preconditioner ---------------------

    def _local_hessian(self, e, X, Xd, Xdd) -> np.ndarray:
        """``(N, 3n, 3n)`` Hessians of an integrand in its local arguments.

        Each integrand depends on node ``k`` only through ``(x_k, xd_k, xdd_k)``,
        so one central difference of the exact partials per local coordinate
        recovers every node's Hessian at once.
        """
        n = self.n
        base = np.concatenate([X, Xd, Xdd], axis=1)
        H = np.zeros((self.N, 3 * n, 3 * n))
        for l in range(3 * n):
            step = 1e-5 * (1.0 + np.abs(base[:, l]))
            cols = []
            for sgn in (1.0, -1.0):
                z = base.copy()
                z[:, l] += sgn * step
                _, gx, gxd, gxdd = e.values_and_partials(self.t, z[:, :n], z[:, n:2 * n],
                                                         z[:, 2 * n:])
                cols.append(np.concatenate([gx, gxd, gxdd], axis=1))
            H[:, :, l] = (cols[0] - cols[1]) / (2 * step[:, None])
        return 0.5 * (H + H.transpose(0, 2, 1))

    def hessian(self, q, obj_weights, mu, node_coef, node_active_rho, bound_terms=()):
        """Dense Hessian (in ``q``) of the augmented Lagrangian.

        ``node_coef`` holds ``max(0, nu + rho g)`` per node/constraint and
        ``node_active_rho`` is ``rho`` where that quantity is positive.
        ``bound_terms`` lists ``(coef, active_rho, i)`` for epsilon rows.
        """
        X, Xd, Xdd = self.states(q)
        n = self.n
        Hloc = np.zeros((self.N, 3 * n, 3 * n))
        eff = np.array(obj_weights, dtype=float)
        dense_rank1 = []
        for coef, arho, i in bound_terms:
            eff[i] += coef
            if arho > 0:
                dense_rank1.append(arho)
            else:
                dense_rank1.append(0.0)
        for i, (fi, Bi) in enumerate(zip(self.spec.f, self.spec.B)):
            if eff[i] != 0.0:
                Hloc += eff[i] * self._local_hessian(fi, X, Xd, Xdd)
                BX = X @ Bi
                s = np.sqrt(np.maximum(np.sum(BX * X, axis=1), 0.0) + mu * mu)
                s = np.where(s > 0, s, np.inf)
                Hs = Bi[None] / s[:, None, None] - np.einsum("ki,kj->kij", BX, BX) / s[:, None,
                                                                                    None] ** 3
                Hloc[:, :n, :n] += eff[i] * Hs
        for j, gj in enumerate(self.spec.g):
            c, r = node_coef[:, j], node_active_rho[:, j]
            if not (np.any(c) or np.any(r)):
                continue
            _, gx, gxd, gxdd = gj.values_and_partials(self.t, X, Xd, Xdd)
            G = np.concatenate([gx, gxd, gxdd], axis=1)
            Hloc += r[:, None, None] * np.einsum("ki,kj->kij", G, G)
            if np.any(c):
                Hloc += c[:, None, None] * self._local_hessian(gj, X, Xd, Xdd)
        H = self._assemble(Hloc * self.w[:, None, None])
        if bound_terms and any(dense_rank1):
            _, dJ = self.objectives(q, mu, grad=True)
            for (coef, arho, i) in bound_terms:
                if arho > 0:
                    H += arho * np.outer(dJ[i], dJ[i])
        return H

    def _assemble(self, Hloc) -> np.ndarray:
        N, n = self.N, self.n
        # rows/cols of S are ordered (block a, node k, component c)
        k, r, c = np.meshgrid(np.arange(N), np.arange(3 * n), np.arange(3 * n), indexing="ij")
        row = (r // n) * N * n + k * n + r % n
        col = (c // n) * N * n + k * n + c % n
        L = sp.csr_matrix((Hloc.ravel(), (row.ravel(), col.ravel())),
                          shape=(3 * N * n, 3 * N * n))
        return (self._S.T @ L @ self._S).toarray()


# -- augmented Lagrangian ----------------------------------------------------


@dataclass
class _Problem:
    model: DiscreteModel
    obj_weights: np.ndarray
    bound_idx: list  # objective indices bounded by epsilon rows
    bounds: np.ndarray


def _bound_weights(prob, coefE) -> np.ndarray:
    extra = np.zeros_like(prob.obj_weights)
    for c, i in zip(coefE, prob.bound_idx):
        extra[i] += c
    return extra


def _al_value(prob, q, mu, nu, nuE, rho):
    m = prob.model
    J, _ = m.objectives(q, mu)
    G = m.constraints(q)
    val = prob.obj_weights @ J
    h = np.maximum(0.0, nu + rho * G)
    val += m.w @ ((h * h - nu * nu) / (2 * rho)).sum(axis=1)
    if prob.bound_idx:
        c = J[prob.bound_idx] - prob.bounds
        hE = np.maximum(0.0, nuE + rho * c)
        val += np.sum((hE * hE - nuE * nuE) / (2 * rho))
    return val


def _al_grad(prob, q, mu, nu, nuE, rho):
    m = prob.model
    J, dJ = m.objectives(q, mu, grad=True)
    G = m.constraints(q)
    coef = np.maximum(0.0, nu + rho * G)
    g = prob.obj_weights @ dJ + m.constraint_pullback(q, coef * m.w[:, None])
    coefE = np.zeros(0)
    if prob.bound_idx:
        coefE = np.maximum(0.0, nuE + rho * (J[prob.bound_idx] - prob.bounds))
        g = g + coefE @ dJ[prob.bound_idx]
    return g, J, G, coef, coefE


def _preconditioner(prob, q, mu, nu, nuE, rho):
    m = prob.model
    G = m.constraints(q)
    coef = np.maximum(0.0, nu + rho * G)
    arho = np.where(coef > 0, rho, 0.0)
    bterms = []
    if prob.bound_idx:
        J, _ = m.objectives(q, mu)
        cE = np.maximum(0.0, nuE + rho * (J[prob.bound_idx] - prob.bounds))
        bterms = [(cE[r], rho if cE[r] > 0 else 0.0, i) for r, i in enumerate(prob.bound_idx)]
    H = m.hessian(q, prob.obj_weights, mu, coef, arho, bterms)
    scale = max(np.max(np.abs(np.diag(H))), 1e-300)
    shift = 0.0
    while True:
        try:
            return sla.cho_factor(H + shift * np.eye(len(H)), lower=True)
        except np.linalg.LinAlgError:
            shift = 1e-10 * scale if shift == 0.0 else 10.0 * shift


def _lbfgs(prob, q, mu, nu, nuE, rho, opts, gtol):
    """Preconditioned L-BFGS with Armijo backtracking.  Returns (q, iters)."""
    m = prob.model
    f = _al_value(prob, q, mu, nu, nuE, rho)
    g = _al_grad(prob, q, mu, nu, nuE, rho)[0]
    P = _preconditioner(prob, q, mu, nu, nuE, rho)
    S, Y = [], []
    it = 0
    since_refresh = 0
    best, best_it = np.inf, 0
    while it < opts.max_inner:
        gmax = np.max(np.abs(g))
        if gmax / m.h <= gtol:
            break
        if gmax < 0.9 * best:
            best, best_it = gmax, it
        elif it - best_it >= STALL_ITERS:
            # gradient has reached its roundoff floor
            break
        # two-loop recursion with H0 = P^{-1}
        d = -g.copy()
        alphas = []
        for s, y in reversed(list(zip(S, Y))):
            a = (s @ d) / (y @ s)
            alphas.append(a)
            d -= a * y
        d = sla.cho_solve(P, d)
        for (s, y), a in zip(zip(S, Y), reversed(alphas)):
            b = (y @ d) / (y @ s)
            d += (a - b) * s
        slope = g @ d
        if slope >= 0:
            S, Y = [], []
            d = -sla.cho_solve(P, g)
            slope = g @ d
        step = 1.0
        accepted = False
        gn = None
        for _ in range(50):
            qn = q + step * d
            try:
                fn = _al_value(prob, qn, mu, nu, nuE, rho)
            except EvalError:
                fn = np.inf
            if fn <= f + 1e-4 * step * slope:
                accepted = True
                break
            if abs(fn - f) <= 1e-12 * max(1.0, abs(f)):
                # f differences are roundoff: fall back on the gradient norm
                gn = _al_grad(prob, qn, mu, nu, nuE, rho)[0]
                if np.max(np.abs(gn)) < np.max(np.abs(g)):
                    accepted = True
                    break
                gn = None
            step *= 0.5
        it += 1
        if not accepted:
            if S or since_refresh:
                S, Y = [], []
                P = _preconditioner(prob, q, mu, nu, nuE, rho)
                since_refresh = 0
                continue
            break
        if gn is None:
            gn = _al_grad(prob, qn, mu, nu, nuE, rho)[0]
        s, y = qn - q, gn - g
        if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            if len(S) > opts.memory:
                S.pop(0)
                Y.pop(0)
        q, f, g = qn, fn, gn
        since_refresh += 1
        if since_refresh >= 20:
            P = _preconditioner(prob, q, mu, nu, nuE, rho)
            S, Y = [], []
            since_refresh = 0
    return q, it


def _solve(spec, domain, obj_weights, bound_idx, bounds, x0, opts: SolverOptions) -> SolveResult:
    model = DiscreteModel(spec, domain)
    prob = _Problem(model, np.asarray(obj_weights, float), list(bound_idx),
                    np.asarray(bounds, float))
    if x0 is None:
        q = np.zeros(model.nf * model.n)
    else:
        xv = x0.x.values if isinstance(x0, PrimalPoint) else (
            x0.values if isinstance(x0, Trajectory) else np.asarray(x0, float))
        xv = np.asarray(xv, float).reshape(domain.N, spec.n)
        q = model.lift(xv)
    try:
        model.objectives(q, opts.mu0, grad=True)
        model.constraints(q)
    except EvalError as exc:
        raise InfeasibleStart(f"cannot evaluate the problem at the starting point: {exc}") from exc

    nu = np.zeros((domain.N, spec.m))
    nuE = np.zeros(len(prob.bound_idx))
    rho, mu = opts.rho0, opts.mu0
    total_inner = 0
    history = []
    last_accepted_viol = np.inf
    stuck = 0
    status = Status.MAX_ITER
    kkt = np.inf
    for outer in range(1, opts.max_outer + 1):
        gtol = 0.1 * opts.tol
        q, its = _lbfgs(prob, q, mu, nu, nuE, rho, opts, gtol)
        total_inner += its
        grad, J, G, coef, coefE = _al_grad(prob, q, mu, nu, nuE, rho)
        cE = J[prob.bound_idx] - prob.bounds if prob.bound_idx else np.zeros(0)
        viol = max(float(np.max(G)), float(np.max(cE, initial=-np.inf)), 0.0)
        scale = max(1.0, model.gradient_scale(q, prob.obj_weights + _bound_weights(prob, coefE),
                                              coef) / model.h)
        stat = float(np.max(np.abs(grad))) / (model.h * scale)
        compl = max(float(np.max(np.abs(coef * G))), float(np.max(np.abs(coefE * cE), initial=0.0)))
        kkt = max(stat, viol, compl)
        accepted = viol <= max(opts.feas_tol, 0.25 * last_accepted_viol)
        history.append(dict(outer=outer, rho=rho, mu=mu, violation=viol, stationarity=stat,
                            complementarity=compl, kkt=kkt, accepted=accepted, inner=its))
        log.debug("outer %d: rho=%.1e mu=%.1e viol=%.2e stat=%.2e compl=%.2e", outer, rho, mu,
                  viol, stat, compl)
        nu, nuE = coef, coefE
        if mu <= opts.mu_min and kkt <= opts.tol and viol <= opts.feas_tol:
            status = Status.CONVERGED
            break
        if accepted:
            last_accepted_viol = viol
            stuck = 0
        else:
            if rho >= opts.rho_max:
                stuck += 1
                if stuck >= 3:
                    break
            rho = min(10.0 * rho, opts.rho_max)
        mu = max(0.5 * mu, opts.mu_min)
    if status is not Status.CONVERGED:
        status = Status.INFEASIBLE if viol > opts.feas_tol else Status.MAX_ITER
    x = PrimalPoint(model.trajectory(q))
    result = SolveResult(
        x=x, objective=primal_objective(spec, x), kkt_residual=kkt, iterations=total_inner,
        status=status, node_multipliers=nu, bound_multipliers=nuE,
        weights=np.asarray(obj_weights, float), history=history)
    if opts.raise_on_failure and status is Status.MAX_ITER:
        raise MaxIterExceeded(f"no convergence after {opts.max_outer} outer iterations")
    if opts.raise_on_failure and status is Status.INFEASIBLE:
        raise SolverError(f"problem appears infeasible (violation {viol:.3g})")
    return result


def _domain(spec, x0, opts):
    if x0 is not None:
        return (x0.grid if isinstance(x0, (PrimalPoint, Trajectory)) else None) or spec.grid(opts.N)
    return spec.static_domain() if spec.is_static else spec.grid(opts.N)


def solve_weighted(spec: ProblemSpec, weights, x0=None, opts: SolverOptions | None = None,
                   domain=None) -> SolveResult:
    """Minimize ``sum_i weights[i] * J_i`` over the discretized feasible set."""
    opts = opts or SolverOptions()
    w = np.asarray(weights, float)
    if w.shape != (spec.p,) or np.any(w < 0) or not np.isclose(w.sum(), 1.0, atol=1e-12):
        raise ValueError(f"weights must be {spec.p} non-negative numbers summing to 1")
    domain = domain or _domain(spec, x0, opts)
    return _solve(spec, domain, w, [], [], x0, opts)


def solve_epsilon_constraint(spec: ProblemSpec, k: int, bounds, x0=None,
                             opts: SolverOptions | None = None, domain=None) -> SolveResult:
    """Minimize ``J_k`` subject to ``J_i <= bounds`` for ``i != k`` (``k`` is 1-based)."""
    opts = opts or SolverOptions()
    if not 1 <= k <= spec.p:
        raise ValueError(f"objective index must be in 1..{spec.p}")
    others = [i for i in range(spec.p) if i != k - 1]
    bounds = np.asarray(bounds, float).ravel()
    if bounds.shape != (len(others),):
        raise ValueError(f"expected {len(others)} bounds")
    w = np.zeros(spec.p)
    w[k - 1] = 1.0
    domain = domain or _domain(spec, x0, opts)
    return _solve(spec, domain, w, others, bounds, x0, opts)


def efficiency_check(spec: ProblemSpec, xbar, tol: float = 1e-6,
                     opts: SolverOptions | None = None) -> Report:
    """Epsilon-constraint certificate: ``xbar`` must solve every ``P_k(xbar)``.

    An improvement equal to ``tol`` still certifies efficiency.
    """
    opts = opts or SolverOptions()
    xbar = xbar if isinstance(xbar, PrimalPoint) else PrimalPoint(xbar)
    Jbar = primal_objective(spec, xbar)
    rep = Report(f"efficiency_check[{spec.name}]")
    rep.data["objective"] = Jbar
    rep.data["solutions"] = {}
    for k in range(1, spec.p + 1):
        bounds = np.delete(Jbar, k - 1)
        res = solve_epsilon_constraint(spec, k, bounds, x0=xbar, opts=opts)
        rep.data["solutions"][k] = res
        if res.status is Status.INFEASIBLE:
            rep.add(f"improvement k={k}", np.nan, False, tol, "epsilon problem infeasible")
            continue
        gain = float(Jbar[k - 1] - res.objective[k - 1])
        note = "" if res.converged else f"solver status {res.status.value}"
        rep.add(f"improvement k={k}", gain, gain <= tol, tol, note)
    return rep


def pareto_sweep(spec: ProblemSpec, weight_grid, x0=None, opts: SolverOptions | None = None,
                 dedup_tol: float = 1e-4) -> list[SolveResult]:
    """One weighted solve per weight vector, duplicates (max-norm distance) removed."""
    opts = opts or SolverOptions()
    out: list[SolveResult] = []
    for w in weight_grid:
        try:
            res = solve_weighted(spec, w, x0=x0, opts=replace(opts, raise_on_failure=False))
        except (SolverError, EvalError, ValueError) as exc:
            log.warning("sweep: weights %s failed: %s", list(w), exc)
            continue
        if any(np.max(np.abs(res.x.x.values - r.x.x.values)) <= dedup_tol for r in out):
            continue
        out.append(res)
    return out


def default_weight_grid(p: int, count: int = 9) -> list[np.ndarray]:
    """Evenly spread strictly positive weights (only ``p == 2`` is a line)."""
    if p == 1:
        return [np.ones(1)]
    ws = []
    for s in np.linspace(0.1, 0.9, count):
        if p == 2:
            ws.append(np.array([s, 1.0 - s]))
        else:
            rest = (1.0 - s) / (p - 1)
            ws.append(np.array([s] + [rest] * (p - 1)))
    return ws
