import numpy as np
import pytest

from mixdual.catalog import load_catalog
from mixdual.experiments import nondominated_mask
from mixdual.problem import ProblemSpec, primal_feasibility, primal_objective
from mixdual.solver import (DiscreteModel, SolverOptions, Status, default_weight_grid,
                            efficiency_check, pareto_sweep, solve_epsilon_constraint,
                            solve_weighted)

OPTS = SolverOptions(N=101)


@pytest.fixture(scope="module")
def p1_half(P1):
    return solve_weighted(P1, (0.5, 0.5), opts=SolverOptions(N=201))


def test_p1_converges(P1, p1_half):
    assert p1_half.status is Status.CONVERGED
    assert p1_half.kkt_residual <= 1e-6
    assert primal_feasibility(P1, p1_half.x, 1e-6).passed


def test_p1_descent_oracle(P1, p1_half):
    """No feasible perturbation along smooth admissible directions lowers the weighted sum."""
    x = p1_half.x.x
    g = x.grid
    base = 0.5 * primal_objective(P1, x).sum()
    bump = np.sin(np.pi * g.nodes) ** 4
    for d in ([1, 0], [0, 1], [1, 1], [1, -1], [-1, 0]):
        for eps in (1e-3, 1e-2):
            y = x + type(x)(g, eps * np.outer(bump, d))
            if np.max(np.column_stack([gj.values(g.nodes, y.values, g.D @ y.values,
                                                 g.D2 @ y.values) for gj in P1.g])) > 0:
                continue
            assert 0.5 * primal_objective(P1, y).sum() >= base - 1e-7


def test_unconstrained_quadratic():
    spec = ProblemSpec.from_strings("q", 2, ["0.5*(x0^2 + x1^2)"], [None], ["x0 - 5"])
    res = solve_weighted(spec, [1.0], opts=OPTS)
    assert res.converged
    assert np.max(np.abs(res.x.x.values)) <= 1e-8


def test_weight_validation(P1):
    for w in ([0.5], [0.7, 0.7], [-0.5, 1.5]):
        with pytest.raises(ValueError):
            solve_weighted(P1, w, opts=OPTS)


def _brute_force_min(spec, weights, step=0.01):
    s = np.arange(-2, 2 + step / 2, step)
    X0, X1 = np.meshgrid(s, s, indexing="ij")
    pts = np.column_stack([X0.ravel(), X1.ravel()])
    z = np.zeros_like(pts)
    vals = 0.0
    for w, f, B in zip(weights, spec.f, spec.B):
        vals = vals + w * (f.values(0.0, pts, z, z) + np.sqrt(np.einsum("ki,ij,kj->k", pts, B, pts)))
    feas = np.all(np.column_stack([gj.values(0.0, pts, z, z) for gj in spec.g]) <= 0, axis=1)
    vals = np.where(feas, vals, np.inf)
    return pts[np.argmin(vals)]


@pytest.mark.parametrize("w", [(1.0, 0.0), (0.0, 1.0), (0.5, 0.5)])
def test_s1_matches_brute_force(S1, w):
    res = solve_weighted(S1, w)
    assert res.converged
    assert np.max(np.abs(res.x.x.values[0] - _brute_force_min(S1, w))) <= 0.02


def test_epsilon_single_objective_is_weighted():
    spec = ProblemSpec.from_strings("q", 1, ["0.5*xd0^2 + x0^2 - 3*x0"], [None], ["x0 - 0.5"])
    a = solve_weighted(spec, [1.0], opts=OPTS)
    b = solve_epsilon_constraint(spec, 1, [], opts=OPTS)
    assert np.array_equal(a.x.x.values, b.x.x.values)


def test_epsilon_consistency(P1, p1_half):
    J = p1_half.objective
    for k in (1, 2):
        res = solve_epsilon_constraint(P1, k, np.delete(J, k - 1), x0=p1_half.x,
                                       opts=SolverOptions(N=201))
        assert res.converged
        assert res.objective[k - 1] <= J[k - 1] + 1e-6
        assert np.all(np.delete(res.objective, k - 1) <= np.delete(J, k - 1) + 1e-6)


def test_epsilon_infeasible_bounds(P1):
    res = solve_epsilon_constraint(P1, 1, [-1e6], opts=SolverOptions(N=51))
    assert res.status is Status.INFEASIBLE


def test_efficiency_certified(P1, p1_half):
    rep = efficiency_check(P1, p1_half.x, 1e-6, SolverOptions(N=201))
    assert rep.passed, rep.summary()


def test_dominated_point_fails(P1, p1_half):
    x = p1_half.x.x
    worse = type(x)(x.grid, 0.5 * x.values)
    assert primal_feasibility(P1, worse, 1e-6).passed
    rep = efficiency_check(P1, worse, 1e-6, SolverOptions(N=201))
    assert not rep.passed
    assert max(c.value for c in rep.checks) > 1e-6


def test_single_objective_efficiency():
    spec = ProblemSpec.from_strings("q", 1, ["0.5*xd0^2 + x0^2 - 3*x0"], [None], ["x0 - 0.5"])
    res = solve_weighted(spec, [1.0], opts=OPTS)
    rep = efficiency_check(spec, res.x, 1e-6, OPTS)
    assert rep.passed and len(rep.checks) == 1


def test_pareto_sweep_p1(P1):
    results = pareto_sweep(P1, default_weight_grid(2, 9), opts=SolverOptions(N=101))
    assert len(results) >= 5
    J = np.array([r.objective for r in results])
    assert np.all(nondominated_mask(J, 1e-6))


def test_pareto_single_weight(P1):
    assert len(pareto_sweep(P1, [np.array([0.5, 0.5])], opts=OPTS)) == 1


def test_pareto_nonconvex_completes():
    P3 = load_catalog()["P3"]
    results = pareto_sweep(P3, default_weight_grid(2, 3), opts=OPTS)
    assert 1 <= len(results) <= 3


def test_default_weight_grid():
    assert [w.tolist() for w in default_weight_grid(1)] == [[1.0]]
    ws = default_weight_grid(3, 5)
    assert all(np.isclose(w.sum(), 1) and np.all(w > 0) for w in ws)


def test_history_monotone(P1, p1_half):
    rhos = [h["rho"] for h in p1_half.history]
    assert all(a <= b for a, b in zip(rhos, rhos[1:]))
    last = np.inf
    for h in p1_half.history:
        if h["accepted"]:
            assert h["violation"] <= max(1e-6, last)
            last = h["violation"]


@pytest.mark.parametrize("name", ["P1", "P2", "P2-natural", "P3", "S1"])
def test_objective_gradients_vs_finite_difference(name):
    spec = load_catalog()[name]
    dom = spec.static_domain() if spec.is_static else spec.grid(21)
    model = DiscreteModel(spec, dom)
    r = np.random.default_rng(5)
    size = model.nf * model.n
    for _ in range(50):
        q = r.normal(scale=0.5, size=size)
        J, dJ = model.objectives(q, mu=1e-2, grad=True)
        for _k in range(3):
            d = r.normal(size=size)
            h = 1e-6
            fd = (model.objectives(q + h * d, mu=1e-2)[0] - model.objectives(q - h * d, mu=1e-2)[0]) / (2 * h)
            exact = dJ @ d
            assert np.all(np.abs(fd - exact) <= 1e-5 * np.maximum(1.0, np.abs(exact)))
