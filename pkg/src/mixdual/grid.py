"""Uniform time grids, finite-difference operators and trapezoidal quadrature.

All operators are fixed linear maps on node values, stored as dense matrices.
``D`` uses second-order central differences in the interior and second-order
one-sided closures at the two endpoints. The second derivative defaults to
``D @ D`` (a wide 5-point stencil) in the interior, which keeps it close to
the square of the first-derivative operator used in every ``xd`` term.  The
rows ``0, 1, N-2, N-1`` of ``D @ D`` are only first-order accurate, so those
four rows use the second-order 3-point and one-sided 4-point stencils.  The
3-point stencil everywhere is available with ``direct=True``.

Besides ``D`` the module exposes the weighted adjoints

    Dt  = -W^{-1} D^T W        D2t = W^{-1} (D2)^T W

with ``W`` the trapezoid weights. They satisfy the summation-by-parts identities
``sum(w * (D phi) * psi) == -sum(w * phi * (Dt psi))`` exactly for every pair of
node vectors, and coincide with ``D`` and ``D2`` away from the boundary rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, GridMismatch, LengthMismatch

MIN_NODES = 5


def _first_derivative_matrix(N: int, h: float) -> np.ndarray:
    D = np.zeros((N, N))
    k = np.arange(1, N - 1)
    D[k, k - 1] = -0.5
    D[k, k + 1] = 0.5
    D[0, :3] = [-1.5, 2.0, -0.5]
    D[-1, -3:] = [0.5, -2.0, 1.5]
    return D / h


def _second_derivative_matrix(N: int, h: float) -> np.ndarray:
    D2 = np.zeros((N, N))
    k = np.arange(1, N - 1)
    D2[k, k - 1] = 1.0
    D2[k, k] = -2.0
    D2[k, k + 1] = 1.0
    D2[0, :4] = [2.0, -5.0, 4.0, -1.0]
    D2[-1, -4:] = [-1.0, 4.0, -5.0, 2.0]
    return D2 / h**2


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``N`` nodes on ``[a, b]``."""

    a: float
    b: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.b <= self.a:
            raise DomainError(f"need finite a < b, got a={self.a}, b={self.b}")
        if int(self.N) != self.N or self.N < MIN_NODES:
            raise DomainError(f"need an integer N >= {MIN_NODES}, got {self.N}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.N - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        t = np.linspace(self.a, self.b, self.N)
        t.flags.writeable = False
        return t

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.N, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.flags.writeable = False
        return w

    @cached_property
    def D(self) -> np.ndarray:
        return _first_derivative_matrix(self.N, self.h)

    @cached_property
    def D2(self) -> np.ndarray:
        # D @ D is only first order in its two outermost rows at each end;
        # those rows take the second-order stencils of D2_direct instead.
        M = self.D @ self.D
        S = self.D2_direct
        M[[0, 1, -2, -1]] = S[[0, 1, -2, -1]]
        return M

    @cached_property
    def D2_direct(self) -> np.ndarray:
        return _second_derivative_matrix(self.N, self.h)

    @cached_property
    def Dt(self) -> np.ndarray:
        w = self.weights
        return -(self.D.T * w) / w[:, None]

    @cached_property
    def D2t(self) -> np.ndarray:
        w = self.weights
        return (self.D2.T * w) / w[:, None]

    @property
    def is_static(self) -> bool:
        return False


@dataclass(frozen=True)
class StaticPoint:
    """Degenerate one-node domain used for problems independent of ``t``.

    Integrals over ``[0, 1]`` of constant integrands collapse to a single
    evaluation, and every derivative operator is zero.
    """

    a: float = 0.0
    b: float = 1.0
    N: int = field(default=1, init=False)

    @property
    def h(self) -> float:
        return self.b - self.a

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.array([self.a])

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([self.b - self.a])

    @property
    def D(self) -> np.ndarray:
        return np.zeros((1, 1))

    D2 = D2_direct = Dt = D2t = D

    @property
    def is_static(self) -> bool:
        return True


def make_grid(a: float, b: float, N: int) -> TimeGrid:
    return TimeGrid(float(a), float(b), N)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Node values of a vector function; row ``k`` is ``x(t_k)``."""

    grid: TimeGrid | StaticPoint
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.grid.N or v.shape[1] < 1:
            raise LengthMismatch(
                f"values of shape {np.shape(self.values)} do not fit a grid of {self.grid.N} nodes"
            )
        if not np.all(np.isfinite(v)):
            raise DomainError("trajectory values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_function(cls, grid, func, n: int | None = None) -> "Trajectory":
        """Sample ``func(t)`` (vectorised over the node array) on ``grid``."""
        vals = np.asarray(func(grid.nodes), dtype=float)
        if vals.ndim == 0:
            vals = np.full(grid.N, float(vals))
        if vals.ndim == 2 and vals.shape[0] != grid.N and vals.shape[1] == grid.N:
            vals = vals.T
        if n is not None and vals.ndim == 1 and n > 1:
            vals = np.tile(vals[:, None], (1, n))
        return cls(grid, vals)

    @classmethod
    def zeros(cls, grid, n: int) -> "Trajectory":
        return cls(grid, np.zeros((grid.N, n)))

    def __add__(self, other):
        _check_same_grid(self, other)
        return Trajectory(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return Trajectory(self.grid, self.values - other.values)

    def __mul__(self, alpha):
        return Trajectory(self.grid, float(alpha) * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return Trajectory(self.grid, -self.values)


def _check_same_grid(x: Trajectory, y: Trajectory) -> None:
    if x.grid != y.grid:
        raise GridMismatch("trajectories live on different grids")
    if x.n != y.n:
        raise GridMismatch(f"component counts differ ({x.n} vs {y.n})")


def derivative(x: Trajectory) -> Trajectory:
    return Trajectory(x.grid, x.grid.D @ x.values)


def second_derivative(x: Trajectory, direct: bool = False) -> Trajectory:
    """Second derivative; ``D @ D`` by default, 3-point stencil if ``direct``."""
    op = x.grid.D2_direct if direct else x.grid.D2
    return Trajectory(x.grid, op @ x.values)


def adjoint_derivative(x: Trajectory) -> Trajectory:
    """``-W^{-1} D^T W x``: the derivative as seen through summation by parts."""
    return Trajectory(x.grid, x.grid.Dt @ x.values)


def adjoint_second_derivative(x: Trajectory) -> Trajectory:
    return Trajectory(x.grid, x.grid.D2t @ x.values)


def integrate(f, grid) -> float | np.ndarray:
    """Trapezoidal rule; a 2-D ``f`` is integrated column by column."""
    f = np.asarray(f, dtype=float)
    if f.shape[:1] != (grid.N,):
        raise LengthMismatch(f"expected {grid.N} node values, got shape {f.shape}")
    out = np.tensordot(grid.weights, f, axes=(0, 0))
    return float(out) if out.ndim == 0 else out


def adjoint_identity_residual(phi: Trajectory, psi: Trajectory) -> float:
    """``|int (D phi).psi dt + int phi.(D psi) dt|`` for endpoint-vanishing ``phi``.

    The boundary term of integration by parts is zero by the precondition, so
    the value measures the consistency of ``D`` with the quadrature; it decays
    like ``h**2`` for smooth inputs.
    """
    _check_same_grid(phi, psi)
    scale = max(1.0, float(np.max(np.abs(phi.values))))
    if np.max(np.abs(phi.values[[0, -1]])) > 1e-12 * scale:
        raise DomainError("phi must vanish at both endpoints")
    w = phi.grid.weights
    dphi = derivative(phi).values
    dpsi = derivative(psi).values
    lhs = np.sum(w[:, None] * dphi * psi.values)
    rhs = np.sum(w[:, None] * phi.values * dpsi)
    return abs(lhs + rhs)
