"""Sampling checks of invexity, pseudoinvexity and quasi-invexity.

An integral functional ``F(x) = int phi(t, x, x', x'') dt`` is invex with
respect to a kernel ``eta`` when for every pair of trajectories

    F(x) - F(u) >= int eta^T phi_x + (D eta)^T phi_xd + (D^2 eta)^T phi_xdd dt,

with the partials taken at ``u``.  Pseudoinvexity only asks that a
nonnegative right-hand side forces ``F(x) >= F(u)``; quasi-invexity that
``F(x) <= F(u)`` forces a nonpositive right-hand side.

The checks below draw random smooth pairs from a polynomial family that meets
the boundary conditions exactly and report the worst violation seen.  A
failure comes with a witness pair whose violation is re-derived with a
finite-difference directional derivative; a pass is evidence, not proof.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import legendre

from .dual import DualPoint, Partition
from .errors import GridMismatch
from .expr import parse
from .grid import Trajectory
from .problem import Boundary, ProblemSpec
from .report import Report, fmt

INVEX_TOL = 1e-7
DIR_TOL = 1e-9
MAX_DEGREE = 6


@dataclass(frozen=True, eq=False)
class FunctionalSpec:
    """``phi = sum_k c_k(t) e_k(t, x, xd, xdd) + b(t)^T x`` on a fixed grid.

    ``terms`` pairs node coefficient arrays with expressions; ``linear`` holds
    the ``(N, n)`` coefficients of the part that is linear in ``x`` (the
    ``x^T B z`` terms of the dual).
    """

    name: str
    grid: object
    n: int
    terms: tuple
    linear: np.ndarray
    boundary: Boundary = Boundary.FIXED_ZERO

    def _check(self, x: Trajectory) -> None:
        if x.grid != self.grid:
            raise GridMismatch(f"functional {self.name} lives on a different grid")
        if x.n != self.n:
            raise ValueError(f"functional {self.name} expects n={self.n}, got {x.n}")

    def _states(self, x: Trajectory):
        g = self.grid
        return g.nodes, x.values, g.D @ x.values, g.D2 @ x.values

    def integrand(self, x: Trajectory) -> np.ndarray:
        self._check(x)
        states = self._states(x)
        val = np.einsum("ki,ki->k", self.linear, x.values)
        for c, e in self.terms:
            val = val + c * e.values(*states)
        return val

    def value(self, x: Trajectory) -> float:
        return float(self.grid.weights @ self.integrand(x))

    def partials(self, u: Trajectory):
        """``(phi_x, phi_xd, phi_xdd)`` at ``u``, each ``(N, n)``."""
        self._check(u)
        states = self._states(u)
        gx = self.linear.copy()
        gxd = np.zeros_like(gx)
        gxdd = np.zeros_like(gx)
        for c, e in self.terms:
            _, ex, exd, exdd = e.values_and_partials(*states)
            gx += c[:, None] * ex
            gxd += c[:, None] * exd
            gxdd += c[:, None] * exdd
        return gx, gxd, gxdd

    # -- constructors --------------------------------------------------------

    @classmethod
    def from_expr(cls, expr, grid, n: int | None = None, name: str | None = None,
                  boundary: Boundary = Boundary.FIXED_ZERO):
        """A single integrand given as an expression (or text with ``n``)."""
        if isinstance(expr, str):
            if n is None:
                raise ValueError("n is required when the integrand is given as text")
            expr = parse(expr, n)
        ones = np.ones(grid.N)
        return cls(name or str(expr), grid, expr.n, ((ones, expr),), np.zeros((grid.N, expr.n)),
                   boundary)

    @classmethod
    def zero(cls, grid, n: int, name: str = "zero", boundary: Boundary = Boundary.FIXED_ZERO):
        return cls(name, grid, n, (), np.zeros((grid.N, n)), boundary)

    @classmethod
    def combined(cls, spec: ProblemSpec, part: Partition, dp: DualPoint, name: str | None = None):
        """``sum_i lam_i (f^i + x^T B^i z^i) + sum_{J_0} y^j g^j`` with ``dp``'s multipliers."""
        _check_multipliers(dp)
        grid = dp.grid
        terms = [(np.full(grid.N, li), fi) for li, fi in zip(dp.lam, spec.f)]
        mask = part.mask(0)
        terms += [(dp.y.values[:, j].copy(), gj) for j, gj in enumerate(spec.g) if mask[j]]
        linear = sum(li * (zi.values @ Bi) for li, zi, Bi in zip(dp.lam, dp.z, spec.B))
        return cls(name or f"{spec.name}:combined", grid, spec.n, tuple(terms),
                   np.asarray(linear, float), spec.boundary)

    @classmethod
    def partition_part(cls, spec: ProblemSpec, part: Partition, dp: DualPoint, alpha: int,
                       name: str | None = None):
        """``sum_{j in J_alpha} y^j g^j`` with ``dp``'s ``y``."""
        if not 0 <= alpha <= part.r:
            raise ValueError(f"alpha must be in 0..{part.r}")
        _check_multipliers(dp)
        grid = dp.grid
        mask = part.mask(alpha)
        terms = tuple((dp.y.values[:, j].copy(), gj) for j, gj in enumerate(spec.g) if mask[j])
        return cls(name or f"{spec.name}:J{alpha}", grid, spec.n, terms,
                   np.zeros((grid.N, spec.n)), spec.boundary)


def _check_multipliers(dp: DualPoint) -> None:
    if np.any(dp.lam <= 0) or abs(float(np.sum(dp.lam)) - 1.0) > 1e-9:
        raise ValueError("lambda must be positive and sum to one")
    if np.any(dp.y.values < 0):
        raise ValueError("y must be nonnegative")


@dataclass(frozen=True)
class EtaKernel:
    """Rule mapping node values ``(x, u)`` to node values of ``eta``."""

    rule: Callable
    name: str = "custom"

    def __call__(self, x: Trajectory, u: Trajectory) -> Trajectory:
        if x.grid != u.grid:
            raise GridMismatch("x and u live on different grids")
        return Trajectory(x.grid, self.rule(x.values, u.values))


DIFFERENCE = EtaKernel(lambda X, U: X - U, "x - u")


def directional_value(F: FunctionalSpec, x: Trajectory, u: Trajectory,
                      eta: Trajectory | EtaKernel = DIFFERENCE) -> float:
    """``int eta^T phi_x + (D eta)^T phi_xd + (D^2 eta)^T phi_xdd`` at ``u``."""
    if x.grid != u.grid or x.grid != F.grid:
        raise GridMismatch("x, u and the functional must share a grid")
    if isinstance(eta, EtaKernel):
        eta = eta(x, u)
    elif eta.grid != x.grid:
        raise GridMismatch("eta lives on a different grid")
    g = F.grid
    E = eta.values
    px, pxd, pxdd = F.partials(u)
    dens = np.einsum("ki,ki->k", E, px)
    if np.any(pxd):
        dens = dens + np.einsum("ki,ki->k", g.D @ E, pxd)
    if np.any(pxdd):
        dens = dens + np.einsum("ki,ki->k", g.D2 @ E, pxdd)
    return float(g.weights @ dens)


def finite_difference_directional(F: FunctionalSpec, u: Trajectory, eta: Trajectory,
                                  step: float | None = None) -> float:
    """Central difference of ``F`` along ``eta``; independent of the partials."""
    scale = max(1.0, float(np.max(np.abs(u.values))))
    size = max(float(np.max(np.abs(eta.values))), 1e-300)
    h = step if step is not None else 1e-5 * scale / size
    return (F.value(u + h * eta) - F.value(u - h * eta)) / (2 * h)


# -- random smooth trajectories ----------------------------------------------


def sample_basis(grid, boundary: Boundary, degree: int = MAX_DEGREE) -> np.ndarray:
    """``(N, k)`` polynomial basis of degree ``<= degree`` meeting the boundary conditions.

    ``FixedZero``: ``16 s^2 (1-s)^2 P_j(2s-1)`` for ``j <= degree - 4`` (value and
    slope vanish at both ends).  ``Natural``: Legendre polynomials ``P_0..P_degree``.
    """
    if grid.is_static:
        return np.ones((1, 1))
    s = (grid.nodes - grid.nodes[0]) / (grid.nodes[-1] - grid.nodes[0])
    if boundary is Boundary.FIXED_ZERO:
        bump = 16.0 * s ** 2 * (1 - s) ** 2
        return np.column_stack([bump * legendre.legval(2 * s - 1, np.eye(degree - 3)[j])
                                for j in range(degree - 3)])
    return np.column_stack([legendre.legval(2 * s - 1, np.eye(degree + 1)[j])
                            for j in range(degree + 1)])


def sample_trajectory(grid, n: int, boundary: Boundary, rng: np.random.Generator) -> Trajectory:
    basis = sample_basis(grid, boundary)
    if grid.is_static:
        return Trajectory(grid, rng.uniform(-1.0, 1.0, size=(1, n)))
    coef = rng.uniform(-1.0, 1.0, size=(basis.shape[1], n))
    return Trajectory(grid, basis @ coef)


def sample_pair(grid, n: int, boundary: Boundary, seed: int, k: int):
    """The ``k``-th pair of a run seeded with ``seed``; reproducible in isolation."""
    rng = np.random.default_rng([seed, k])
    return sample_trajectory(grid, n, boundary, rng), sample_trajectory(grid, n, boundary, rng)


# -- certification -----------------------------------------------------------


def _kernel_check(eta: EtaKernel, grid, n: int, boundary: Boundary, seed: int) -> None:
    u, _ = sample_pair(grid, n, boundary, seed, 2 ** 31 - 1)
    e = eta(u, u).values
    if np.max(np.abs(e)) > 1e-12:
        raise ValueError(f"kernel {eta.name} does not vanish at x = u")


def _violation(kind: str, dF: float, dv: float) -> float:
    """Amount by which one sample breaks the inequality (<= 0 means no break)."""
    if kind == "invex":
        return dv - dF
    if kind == "pseudoinvex":
        return -dF if dv >= -DIR_TOL else -np.inf
    if kind == "quasiinvex":
        return dv if dF <= DIR_TOL else -np.inf
    raise ValueError(kind)


def _certify(kind: str, F: FunctionalSpec, eta, pairs: int, seed: int) -> Report:
    if pairs < 1:
        raise ValueError("pairs must be at least 1")
    boundary = F.boundary
    eta = DIFFERENCE if eta is None else eta
    grid = F.grid
    _kernel_check(eta, grid, F.n, boundary, seed)
    worst, worst_k, qualifying = -np.inf, -1, 0
    rows = []
    for k in range(pairs):
        x, u = sample_pair(grid, F.n, boundary, seed, k)
        dF = F.value(x) - F.value(u)
        dv = directional_value(F, x, u, eta)
        v = _violation(kind, dF, dv)
        if v > -np.inf:
            qualifying += 1
        rows.append((dF, dv))
        if v > worst:
            worst, worst_k = v, k
    shown = worst if qualifying else 0.0
    rep = Report(f"{kind}[{F.name}]")
    rep.add("worst violation", shown, worst <= INVEX_TOL, INVEX_TOL,
            f"{pairs} sampled pairs, {qualifying} tested; sampling evidence, not proof")
    rep.data.update(kind=kind, functional=F.name, pairs=pairs, seed=seed, worst=worst,
                    worst_pair=worst_k, qualifying=qualifying, samples=np.array(rows))
    if worst > INVEX_TOL:
        x, u = sample_pair(grid, F.n, boundary, seed, worst_k)
        e = eta(x, u)
        dF = F.value(x) - F.value(u)
        dv_fd = finite_difference_directional(F, u, e)
        recheck = _violation(kind, dF, dv_fd)
        rep.add("witness re-verified", recheck, recheck > INVEX_TOL, INVEX_TOL,
                f"pair {seed}:{worst_k}, finite-difference directional value {dv_fd:.6g}")
        rep.data.update(witness=(x, u), witness_seed=f"{seed}:{worst_k}",
                        witness_values=dict(dF=dF, directional=rows[worst_k][1],
                                            directional_fd=dv_fd))
    return rep


def certify_invex(F: FunctionalSpec, eta: EtaKernel | None = None, pairs: int = 500,
                  seed: int = 0) -> Report:
    """Worst of ``directional - (F(x) - F(u))`` over sampled pairs; PASS iff ``<= 1e-7``."""
    return _certify("invex", F, eta, pairs, seed)


def certify_pseudoinvex(F: FunctionalSpec, eta: EtaKernel | None = None, pairs: int = 500,
                        seed: int = 0) -> Report:
    """Violation: directional value ``>= -1e-9`` while ``F(x) < F(u) - 1e-7``."""
    return _certify("pseudoinvex", F, eta, pairs, seed)


def certify_quasiinvex(F: FunctionalSpec, eta: EtaKernel | None = None, pairs: int = 500,
                       seed: int = 0) -> Report:
    """Violation: ``F(x) <= F(u) + 1e-9`` while the directional value is ``> 1e-7``."""
    return _certify("quasiinvex", F, eta, pairs, seed)


def certificate_csv(reports, header: bool = True) -> str:
    """Rows ``functional,kind,pairs,worst_violation,witness_seed,status``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(["functional", "kind", "pairs", "worst_violation", "witness_seed", "status"])
    for rep in reports:
        d = rep.data
        w.writerow([d["functional"], d["kind"], d["pairs"], fmt(rep["worst violation"].value),
                    d.get("witness_seed", ""), "PASS" if rep.passed else "FAIL"])
    return buf.getvalue()
