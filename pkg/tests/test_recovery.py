import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import fsolve

from mixdual.dual import DualPoint, Partition
from mixdual.errors import NotEfficient, RecoveryFailed
from mixdual.experiments import admissible_projection, recovered_point
from mixdual.grid import Trajectory, make_grid
from mixdual.problem import ProblemSpec, primal_objective
from mixdual.recovery import (converse_duality_check, gram_singular_values, recover_multipliers,
                              recover_z, schwartz_gap, solve_multipliers, strong_duality_check,
                              unconstrained_multipliers)
from mixdual.solver import SolverOptions, solve_weighted


def test_recover_z_examples():
    z = recover_z([3.0, 4.0], np.eye(2))
    assert np.allclose(z, [0.6, 0.8])
    assert np.dot([3, 4], z) == pytest.approx(5.0) and z @ z == pytest.approx(1.0)
    B = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert np.all(recover_z([0.0, 2.0], B) == 0)
    B = np.array([[2.0, 1.0], [1.0, 2.0]])
    x = np.array([1.0, 2.0])
    z = recover_z(x, B)
    assert np.allclose(z, x / np.sqrt(14))
    assert x @ B @ z == pytest.approx(np.sqrt(14), abs=1e-12)
    assert z @ B @ z == pytest.approx(1.0, abs=1e-12)


def test_recover_z_rows():
    X = np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]])
    Z = recover_z(X, np.eye(2))
    assert np.allclose(Z, [[0.6, 0.8], [0, 0], [1, 0]])


def test_schwartz_gap_examples():
    x = np.array([1.0, 2.0])
    B = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert abs(schwartz_gap(x, recover_z(x, B), B)) <= 1e-10
    assert schwartz_gap([1.0, 0.0], [-1.0, 0.0], np.eye(2)) == pytest.approx(2.0)


@st.composite
def psd_instances(draw):
    n = draw(st.integers(1, 6))
    rank = draw(st.integers(0, n))
    seed = draw(st.integers(0, 2**31 - 1))
    r = np.random.default_rng(seed)
    A = r.normal(size=(n, rank)) * draw(st.sampled_from([1e-3, 1.0, 1e3]))
    return A @ A.T, r.normal(size=n), r.normal(size=n)


@settings(max_examples=300, deadline=None)
@given(psd_instances())
def test_recover_z_equality_case(inst):
    B, x, _ = inst
    z = recover_z(x, B)
    q = x @ B @ x
    s = np.sqrt(max(q, 0.0))
    zz = z @ B @ z
    assert abs(x @ B @ z - s) <= 1e-10 * max(1.0, s)
    assert abs(zz) <= 1e-10 or abs(zz - 1) <= 1e-10
    assert abs(schwartz_gap(x, z, B)) <= 1e-10 * max(1.0, s)


@settings(max_examples=300, deadline=None)
@given(psd_instances())
def test_schwartz_gap_nonnegative(inst):
    B, x, z = inst
    scale = max(1.0, np.sqrt(abs(x @ B @ x) * abs(z @ B @ z)))
    assert schwartz_gap(x, z, B) >= -1e-10 * scale


def test_multiplier_solver_simplex_floor():
    r = np.random.default_rng(3)
    M = r.normal(size=(40, 5))
    theta, res = solve_multipliers(M, 2, floor=1e-6)
    lam, y = theta[:2], theta[2:]
    assert abs(lam.sum() - 1) <= 1e-12 and lam.min() >= 1e-6 - 1e-15 and y.min() >= 0
    _, unc = unconstrained_multipliers(M, 2)
    assert unc <= res + 1e-12


def test_single_objective_interior_case():
    spec = ProblemSpec.from_strings("EL", 1, ["0.5*xd0^2 + 0.5*x0^2 - x0"], [None], ["x0 - 10"])
    res = solve_weighted(spec, [1.0], opts=SolverOptions(N=101))
    rec = recover_multipliers(spec, res.x, Partition.wolfe(1))
    assert rec.lam.tolist() == [1.0]
    assert np.all(rec.dual_point.y.values == 0)
    assert rec.stationarity_residual <= 1e-4
    assert len(rec.active_set) == 0


def test_zero_efficient_point_exact():
    spec = ProblemSpec.from_strings("Z", 1, ["x0^2 + xd0^2"], [np.eye(1)], ["x0 - 1"])
    g = make_grid(0, 1, 51)
    rec = recover_multipliers(spec, Trajectory.zeros(g, 1), Partition.wolfe(1))
    assert np.all(rec.objective_gap == 0.0)
    rep = strong_duality_check(spec, Partition.wolfe(1), Trajectory.zeros(g, 1), recovery=rec)
    assert rep.passed and rep["relative gap i=1"].value == 0.0


def test_p1_recovered_lambda(P1, p1_recovered):
    res, rec = p1_recovered
    assert np.all(np.abs(rec.lam - 0.5) <= 0.05)
    assert rec.slackness_residual <= 1e-6
    assert not rec.flags
    rep = strong_duality_check(P1, Partition(2, ((1,), (2,))), res.x, recovery=rec)
    assert rep.passed, rep.summary()


def test_s1_against_dense_kkt(S1):
    B1, B2 = S1.B

    def kkt(v, w):
        x, y = v[:2], v[2]
        grad1 = 2 * (x - [1.5, 0.5]) + B1 @ x / np.sqrt(x @ B1 @ x)
        grad2 = 2 * (x - [0.5, 1.5]) + B2 @ x / np.sqrt(x @ B2 @ x)
        return np.r_[w[0] * grad1 + w[1] * grad2 + y, x.sum() - 1.2]

    for w in [(0.5, 0.5), (0.8, 0.2), (0.3, 0.7)]:
        sol = fsolve(kkt, [0.5, 0.7, 0.3], args=(w,), xtol=1e-12)
        assert np.max(np.abs(kkt(sol, w))) <= 1e-10
        res, rec = recovered_point(S1, Partition.wolfe(2), w, SolverOptions())
        assert np.allclose(res.x.x.values[0], sol[:2], atol=1e-4)
        assert np.allclose(rec.lam, w, atol=1e-4)
        assert rec.dual_point.y.values[0, 0] == pytest.approx(sol[2], abs=1e-4)
        assert rec.dual_point.y.values[0, 1] == 0.0      # x^T x <= 4 inactive


def test_infeasible_xbar_not_efficient(P1, mixed2):
    g = make_grid(0, 1, 41)
    x = Trajectory.from_function(g, lambda t: np.column_stack([4 * np.sin(np.pi * t)**2, 0 * t]))
    with pytest.raises(NotEfficient):
        recover_multipliers(P1, x, mixed2)


def test_non_stationary_point_fails(P1, mixed2):
    g = make_grid(0, 1, 41)
    bump = 0.1 * np.sin(np.pi * g.nodes)**2
    x = Trajectory(g, admissible_projection(P1, g) @ np.column_stack([bump, bump]))
    with pytest.raises(RecoveryFailed) as info:
        recover_multipliers(P1, x, mixed2)
    assert info.value.result.stationarity_residual > 1e-4


def test_converse_on_recovered_point(P1, mixed2, p1_recovered):
    rep = converse_duality_check(P1, mixed2, p1_recovered[1].dual_point)
    assert rep["(b) primal feasibility of u"].passed
    assert rep["(c) objective equality"].passed
    assert "(a) singular value ratio" in rep
    sv = rep.data["singular_values"]
    assert len(sv) == 2 and sv[0] >= sv[1] >= 0


def test_converse_locates_infeasibility(P1, mixed2, p1_recovered):
    dp = p1_recovered[1].dual_point
    g = dp.grid
    bump = np.column_stack([3 * np.sin(np.pi * g.nodes)**4, 0 * g.nodes])
    bad = DualPoint(Trajectory(g, bump), dp.y, dp.z, dp.lam)
    rep = converse_duality_check(P1, mixed2, bad)
    check = rep["(b) primal feasibility of u"]
    assert not check.passed and "g.1" in check.note and "t=0.5" in check.note
    assert rep.data["worst_node"] == 100


def test_converse_single_objective():
    spec = ProblemSpec.from_strings("EL", 1, ["0.5*xd0^2 + 0.5*x0^2 - x0"], [None], ["x0 - 10"])
    res = solve_weighted(spec, [1.0], opts=SolverOptions(N=101))
    rec = recover_multipliers(spec, res.x, Partition.wolfe(1))
    sv = gram_singular_values(spec, Partition.wolfe(1), rec.dual_point)
    assert sv.shape == (1,) and sv[0] > 0
    rep = converse_duality_check(spec, Partition.wolfe(1), rec.dual_point)
    assert rep["(a) singular value ratio"].value == 1.0
    assert rep.passed


def test_recovery_csv(p1_recovered):
    text = p1_recovered[1].to_csv()
    assert text.splitlines()[0].count(",") >= 1


def test_converse_dependent_vectors_reported_only(S1):
    part = Partition(2, ((1,), (2,)))
    _, rec = recovered_point(S1, part, (0.5, 0.5), SolverOptions())
    rep = converse_duality_check(S1, part, rec.dual_point)
    # only g.1 (in J0) is active, so lam_1 v_1 + lam_2 v_2 = 0
    assert not rep.data["independent"]
    assert rep["(a) singular value ratio"].value < 1e-8
    assert rep.passed
