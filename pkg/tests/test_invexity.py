import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixdual.dual import DualPoint
from mixdual.grid import Trajectory, make_grid
from mixdual.invexity import (DIFFERENCE, EtaKernel, FunctionalSpec, certificate_csv,
                              certify_invex, certify_pseudoinvex, certify_quasiinvex,
                              directional_value, finite_difference_directional, sample_basis,
                              sample_pair)
from mixdual.problem import Boundary

G = make_grid(0, 1, 101)


def test_directional_value_at_equal_points():
    F = FunctionalSpec.from_expr("sin(x0)*xd0 + xdd0^2", G, 1)
    x, _ = sample_pair(G, 1, Boundary.FIXED_ZERO, 0, 0)
    assert directional_value(F, x, x) == 0.0


def test_directional_value_quadratic_closed_form():
    g = make_grid(0, 1, 201)
    F = FunctionalSpec.from_expr("0.5*x0^2", g, 1)
    x = Trajectory.from_function(g, lambda t: t)
    u = Trajectory.from_function(g, lambda t: t**2)
    # int u (x - u) dt = int t^3 - t^4 dt = 1/20
    assert directional_value(F, x, u) == pytest.approx(0.05, abs=1e-5)
    t = g.nodes
    assert directional_value(F, x, u) == pytest.approx(g.weights @ (t**2 * (t - t**2)),
                                                        rel=1e-14)


def test_directional_value_state_free():
    F = FunctionalSpec.from_expr("t^2 + 3", G, 2)
    x, u = sample_pair(G, 2, Boundary.FIXED_ZERO, 3, 1)
    assert directional_value(F, x, u) == 0.0


def test_directional_value_matches_finite_difference():
    F = FunctionalSpec.from_expr("sin(x0)*xd0^2 + 0.1*xdd0^2 + x0^4", G, 1)
    for k in range(10):
        x, u = sample_pair(G, 1, Boundary.FIXED_ZERO, 9, k)
        eta = x - u
        fd = finite_difference_directional(F, u, eta)
        assert directional_value(F, x, u) == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_convex_quadratic_is_invex():
    F = FunctionalSpec.from_expr("x0^2 + xd0^2 + 0.5*xdd0^2 - 3*x0", G, 1)
    rep = certify_invex(F, pairs=200)
    assert rep.passed and rep["worst violation"].value <= 1e-7
    assert certify_pseudoinvex(F, pairs=200).passed


def test_large_sine_fails_with_witness():
    F = FunctionalSpec.from_expr("5*sin(4*x0)", G, 1)
    rep = certify_invex(F, pairs=100)
    assert not rep.passed
    assert rep["witness re-verified"].passed
    x, u = rep.data["witness"]
    again = directional_value(F, x, u) - (F.value(x) - F.value(u))
    assert again == pytest.approx(rep["worst violation"].value, rel=1e-12)
    seed, k = map(int, rep.data["witness_seed"].split(":"))
    x2, u2 = sample_pair(G, 1, Boundary.FIXED_ZERO, seed, k)
    assert np.array_equal(x2.values, x.values) and np.array_equal(u2.values, u.values)


def test_zero_functional():
    F = FunctionalSpec.zero(G, 2)
    for cert in (certify_invex, certify_pseudoinvex, certify_quasiinvex):
        rep = cert(F, pairs=50)
        assert rep.passed and rep["worst violation"].value <= 0.0
    assert np.all(rep.data["samples"] == 0)


def test_linear_and_constant_quasiinvex():
    assert certify_quasiinvex(FunctionalSpec.from_expr("2*x0 - x1 + t", G, 2), pairs=200).passed
    assert certify_quasiinvex(FunctionalSpec.from_expr("7", G, 1), pairs=50).passed


def test_invex_implies_pseudoinvex_same_samples():
    for text in ("x0^2 + xd0^2", "exp(x0) + xd0^2", "x0^4 + 0.1*xdd0^2"):
        F = FunctionalSpec.from_expr(text, G, 1)
        if certify_invex(F, pairs=100, seed=4).passed:
            assert certify_pseudoinvex(F, pairs=100, seed=4).passed


def test_natural_boundary_samples():
    basis = sample_basis(G, Boundary.NATURAL)
    assert basis.shape == (101, 7)
    fixed = sample_basis(G, Boundary.FIXED_ZERO)
    assert fixed.shape == (101, 3)
    assert np.all(np.abs(fixed[[0, -1]]) <= 1e-15)
    x, u = sample_pair(G, 2, Boundary.NATURAL, 1, 2)
    assert np.max(np.abs(x.values[[0, -1]])) > 0


def test_kernel_must_vanish():
    F = FunctionalSpec.from_expr("x0^2", G, 1)
    bad = EtaKernel(lambda X, U: X - U + 1.0, "shifted")
    with pytest.raises(ValueError):
        certify_invex(F, eta=bad, pairs=5)

def test_custom_kernel():
    # for a linear functional the directional value along 2(x - u) is 2 (F(x) - F(u))
    F = FunctionalSpec.from_expr("x0", G, 1)
    scaled = EtaKernel(lambda X, U: 2.0 * (X - U), "2(x-u)")
    assert certify_invex(F, pairs=50).passed
    assert not certify_invex(F, eta=scaled, pairs=50).passed
    assert DIFFERENCE.name == "x - u"


def test_certificate_csv():
    F = FunctionalSpec.from_expr("5*sin(4*x0)", G, 1, name="a, b")
    reps = [certify_invex(F, pairs=30), certify_quasiinvex(FunctionalSpec.zero(G, 1), pairs=5)]
    rows = list(csv.reader(io.StringIO(certificate_csv(reps))))
    assert rows[0] == ["functional", "kind", "pairs", "worst_violation", "witness_seed", "status"]
    assert rows[1][0] == "a, b" and rows[1][-1] == "FAIL" and rows[1][4] == "0:" + \
        str(reps[0].data["worst_pair"])
    assert rows[2][-1] == "PASS" and rows[2][4] == ""


def test_multiplier_validation(P1, mixed2):
    with pytest.raises(ValueError):
        FunctionalSpec.combined(P1, mixed2, DualPoint.zeros(P1, G, [1.0, 0.0]))
    dp = DualPoint.zeros(P1, G)
    neg = DualPoint(dp.u, Trajectory(G, -np.ones((101, 2))), dp.z, dp.lam)
    with pytest.raises(ValueError):
        FunctionalSpec.partition_part(P1, mixed2, neg, 1)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 10**6))
def test_superposition_in_eta(a, b, seed):
    F = FunctionalSpec.from_expr("sin(x0)*xd1 + x1^2*xdd0 + exp(x0)", G, 2)
    x, u = sample_pair(G, 2, Boundary.FIXED_ZERO, seed, 0)
    e1, e2 = sample_pair(G, 2, Boundary.FIXED_ZERO, seed, 1)
    lhs = directional_value(F, x, u, a * e1 + b * e2)
    rhs = a * directional_value(F, x, u, e1) + b * directional_value(F, x, u, e2)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(0, 10**6))
def test_superposition_in_multipliers(theta, seed):
    from mixdual.catalog import get_problem
    from mixdual.dual import Partition

    P1 = get_problem("P1")
    part = Partition(2, ((1,), (2,)))
    r = np.random.default_rng(seed)
    z = tuple(Trajectory(G, r.normal(size=(101, 2))) for _ in range(2))
    u0 = Trajectory.zeros(G, 2)
    y1 = Trajectory(G, r.uniform(size=(101, 2)))
    y2 = Trajectory(G, r.uniform(size=(101, 2)))
    l1, l2 = r.dirichlet([1, 1]), r.dirichlet([1, 1])
    mix = DualPoint(u0, theta * y1 + (1 - theta) * y2, z, theta * l1 + (1 - theta) * l2)
    x, u = sample_pair(G, 2, Boundary.FIXED_ZERO, seed, 0)
    dv = [directional_value(FunctionalSpec.combined(P1, part, dp), x, u)
          for dp in (DualPoint(u0, y1, z, l1), DualPoint(u0, y2, z, l2), mix)]
    assert dv[2] == pytest.approx(theta * dv[0] + (1 - theta) * dv[1], rel=1e-9, abs=1e-9)
