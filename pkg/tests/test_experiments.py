import numpy as np
import pytest

from mixdual.dual import Partition, dual_feasibility
from mixdual.errors import NotStatic
from mixdual.experiments import (Outcome, brute_force_front, nondominated_mask, run_frontier,
                                 sample_feasible_points, sample_static_dual_points)
from mixdual.problem import constraint_values, primal_feasibility
from mixdual.report import Report
from mixdual.solver import SolverOptions


def test_nondominated_mask():
    V = np.array([[1, 3], [2, 2], [3, 1], [2, 3], [1, 3]])
    assert nondominated_mask(V).tolist() == [True, True, True, False, True]
    assert nondominated_mask(np.array([[1.0, 1.0], [1.0 + 1e-9, 1.0]]), tol=1e-6).all()


def test_outcome_merge():
    a, b = Outcome(), Outcome()
    rep = Report("r")
    rep.add("c", 1.0, False)
    a.tables["t.csv"] = "x\n"
    b.reports.append(rep)
    a.merge(b)
    assert not a.passed and len(a.reports) == 1
    with pytest.raises(ValueError):
        a.merge(Outcome(tables={"t.csv": "y\n"}))
    assert not Outcome(solver_failed=True).passed


def test_sample_feasible_points(P1):
    g = P1.grid(41)
    pts = sample_feasible_points(P1, g, 10, seed=2)
    assert len(pts) == 10
    for x in pts:
        assert np.max(constraint_values(P1, x)) <= 0
        assert primal_feasibility(P1, x, 1e-9).passed
    again = sample_feasible_points(P1, g, 10, seed=2)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(pts, again))


def test_brute_force_front(S1, P1):
    pts, F = brute_force_front(S1, step=0.05)
    assert len(pts) > 5
    assert np.all(nondominated_mask(F))
    assert np.all(np.diff(F[:, 0]) >= 0) and np.all(np.diff(F[:, 1]) < 0)
    with pytest.raises(NotStatic):
        brute_force_front(P1)


def test_static_dual_samples(S1):
    part = Partition(2, ((1,), (2,)))
    dps = sample_static_dual_points(S1, part, 20, seed=1)
    assert len(dps) == 20
    assert all(dual_feasibility(S1, part, dp, 1e-9).passed for dp in dps)


def test_frontier_s1(S1):
    out = run_frontier(S1, SolverOptions())
    assert out.passed, [r.summary() for r in out.reports]
    lines = out.tables["frontier.csv"].splitlines()
    assert len(lines) >= 6
