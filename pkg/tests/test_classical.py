"""The mixed dual's special cases against the directly written classical duals."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixdual.catalog import load_catalog
from mixdual.classical import mond_weir_dual, wolfe_dual
from mixdual.dual import DualPoint, Partition, dual_feasibility, dual_objective
from mixdual.grid import Trajectory

PAIRS_WOLFE = {"(1-2) u(a)": "u(a)", "(1-2) u(b)": "u(b)", "(1-2) ud(a)": "ud(a)",
               "(1-2) ud(b)": "ud(b)", "(3) stationarity": "stationarity",
               "(5) max z^T B z - 1": "z^T B z - 1", "(6) min y": "min y",
               "(7) min lambda": "min lambda", "(7) |sum lambda - 1|": "|sum lambda - 1|"}
PAIRS_MW = dict(PAIRS_WOLFE, **{"(4) sum J1 int y g": "int y^T g"})


def random_dual_point(spec, grid, r):
    N = grid.N
    s = grid.nodes if not grid.is_static else np.zeros(1)
    bump = (s * (1 - s))[:, None] ** 2 if spec.boundary.value == "FixedZero" else 1.0
    u = Trajectory(grid, bump * r.normal(size=(N, spec.n)))
    y = Trajectory(grid, r.uniform(0, 2, size=(N, spec.m)))
    z = tuple(Trajectory(grid, r.normal(scale=0.5, size=(N, spec.n))) for _ in range(spec.p))
    lam = r.dirichlet(np.ones(spec.p))
    return DualPoint(u, y, z, lam)


def _agree(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def compare(spec, dp):
    m = spec.m
    wolfe, mw = Partition.wolfe(m), Partition.mond_weir(m)
    obj_w, rep_w = wolfe_dual(spec, dp)
    obj_mw, rep_mw = mond_weir_dual(spec, dp)
    worst = 0.0
    for part, obj, rep, pairs in ((wolfe, obj_w, rep_w, PAIRS_WOLFE),
                                  (mw, obj_mw, rep_mw, PAIRS_MW)):
        mixed_obj = dual_objective(spec, part, dp)
        worst = max(worst, float(np.max(np.abs(mixed_obj - obj) / np.maximum(1, np.abs(obj)))))
        mixed = dual_feasibility(spec, part, dp)
        for mine, theirs in pairs.items():
            if theirs not in rep:
                assert mine not in mixed
                continue
            a, b = mixed[mine].value, rep[theirs].value
            worst = max(worst, abs(a - b) / max(1.0, abs(a), abs(b)))
            assert mixed[mine].passed == rep[theirs].passed
        assert mixed.passed == rep.passed
    return worst


@pytest.mark.parametrize("name", ["P1", "P2", "P2-natural", "P3", "S1"])
def test_collapse_on_catalog(name):
    spec = load_catalog()[name]
    grid = spec.static_domain() if spec.is_static else spec.grid(41)
    r = np.random.default_rng(11)
    for _ in range(50):
        assert compare(spec, random_dual_point(spec, grid, r)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(5, 40))
def test_collapse_random_grids(seed, N):
    spec = load_catalog()["P1"]
    r = np.random.default_rng(seed)
    assert compare(spec, random_dual_point(spec, spec.grid(N), r)) <= 1e-12
