import numpy as np
import pytest

from twolocus.dynamics import GameteState, SimParams, gamete_to_allele, stationary_residual
from twolocus.environment import StepProfile, make_environment, pair_weight
from twolocus.equilibria import (TOL_EQ, classify_profile, default_seeds, edge_equilibrium,
                                 edge_threshold, effective_tol, internal_equilibrium,
                                 monomorphic, newton_gamete, product_seed, rho_sensitivity,
                                 single_locus_cline)
from twolocus.errors import DegenerateEquilibriumError, PreconditionError
from twolocus.grid import build_grid, gradient
from twolocus.spectral import lambda_h

from conftest import step_env


@pytest.fixture(scope="module")
def weak_env():
    return step_env(129, [-1, 1], 0.45, [-1, 1], 0.42)


def test_monomorphic_states(small_env):
    g = small_env.grid
    for i in (1, 2, 3, 4):
        eq = monomorphic(i, g)
        assert np.all(eq.state.p[i - 1] == 1.0)
        assert stationary_residual(eq.state, small_env, SimParams(3.0, 1.0)) == 0.0
        assert np.all(eq.state.linkage == 0.0)
    assert np.all(gamete_to_allele(monomorphic(4, g).state).stacked == 0.0)


def test_effective_tol_floor():
    assert effective_tol(build_grid(1.0, 65)) == TOL_EQ
    assert effective_tol(build_grid(1.0, 1025)) > TOL_EQ


def test_cline_trichotomy():
    g = build_grid(1.0, 129)
    h = StepProfile([-1.0, 1.0], [0.6]).sample(g)  # mean -0.2
    lh = lambda_h(h, g)
    assert single_locus_cline(h, 0.5 * lh, g).kind == "zero"
    c = single_locus_cline(h, 1.5 * lh, g)
    assert c.kind == "internal" and c.converged and c.residual <= TOL_EQ
    assert 0 < c.theta.min() and c.theta.max() < 1
    assert single_locus_cline(-h, 0.5 * lh, g).kind == "one"
    with pytest.raises(PreconditionError):
        single_locus_cline(np.ones(129), 1.0, g)


def test_zero_mean_cline_internal_and_symmetric():
    g = build_grid(1.0, 129)
    h = np.cos(np.pi * g.x)  # odd about the midpoint, zero mean
    for lam in (0.5, 5.0):
        c = single_locus_cline(h, lam, g)
        assert c.kind == "internal" and 0 < c.theta.min() and c.theta.max() < 1
        assert np.abs(c.theta + c.theta[::-1] - 1).max() < 1e-9


def test_cline_grid_convergence_c0_c1():
    # measured convergence of discrete C0 and C1 norms on nested grids
    h_spec = {"type": "cosine", "amplitude": 1.0, "mean": -0.2}
    ref_grid = build_grid(1.0, 1025)
    env = make_environment(h_spec, h_spec, ref_grid)
    ref = single_locus_cline(env.alpha, 10.0, ref_grid).theta
    errs = []
    for n in (65, 129, 257):
        g = build_grid(1.0, n)
        th = single_locus_cline(make_environment(h_spec, h_spec, g).alpha, 10.0, g).theta
        sub = ref[:: (1024 // (n - 1))]
        e0 = np.abs(th - sub).max()
        e1 = np.abs(gradient(g, th) - gradient(g, sub)).max()
        errs.append((e0, e1))
    for (a0, a1), (b0, b1) in zip(errs, errs[1:]):
        assert 3.0 < a0 / b0 < 5.0
        assert b1 < a1


def test_edge_equilibria(small_env):
    g = small_env.grid
    l12 = edge_threshold(1, 2, small_env)
    assert edge_equilibrium(1, 2, small_env, 0.99 * l12) is None
    for lam in (1.01 * l12, 2 * l12, 5 * l12):
        e12 = edge_equilibrium(1, 2, small_env, lam)
        e34 = edge_equilibrium(3, 4, small_env, lam)
        assert (e12 is None) == (e34 is None)
        assert np.abs(e12.state.linkage).max() == 0.0
        assert e12.residual <= effective_tol(g)
        assert e12.meta["residual_at_rho"] == e12.meta["residual_rho0"]
    a = edge_equilibrium(1, 2, small_env, 2 * l12, rho=0.0)
    b = edge_equilibrium(1, 2, small_env, 2 * l12, rho=3.0)
    assert np.array_equal(a.theta, b.theta)
    with pytest.raises(PreconditionError):
        edge_equilibrium(2, 1, small_env, 1.0)


def test_edge14_not_admissible_for_recombination(weak_env):
    lam = 1.5 * edge_threshold(1, 4, weak_env)
    e = edge_equilibrium(1, 4, weak_env, lam, rho=0.1)
    assert not e.meta["rho_admissible"] and e.meta["residual_at_rho"] > 1e-3


def test_seed_policy():
    assert default_seeds(100) == ["product-cline"]
    assert default_seeds(0.01) == ["edge14", "edge23"]
    assert default_seeds(1) == ["product-cline", "edge14", "edge23"]


def test_internal_strong_recombination(strong_env):
    g = strong_env.grid
    lam = 2 * max(lambda_h(strong_env.alpha, g), lambda_h(strong_env.beta, g))
    eq = internal_equilibrium(strong_env, SimParams(lam, 100.0))
    assert eq.kind == "internal" and eq.converged
    assert eq.residual <= effective_tol(g)
    a = eq.allele
    assert min(a.pA.min(), 1 - a.pA.max(), a.pB.min(), 1 - a.pB.max()) > 0


def test_boundary_limit_below_threshold(strong_env):
    g = strong_env.grid
    la, lb = lambda_h(strong_env.alpha, g), lambda_h(strong_env.beta, g)
    lam = np.sqrt(la * lb)  # above lambda_A only
    eq = internal_equilibrium(strong_env, SimParams(lam, 100.0))
    assert eq.kind == "boundary-limit"
    a = eq.allele
    assert a.pB.max() < 1e-6 and np.abs(a.D).max() < 1e-6
    theta_a = single_locus_cline(strong_env.alpha, lam, g).theta
    assert np.abs(a.pA - theta_a).max() < 1e-5


def test_classify_threshold():
    g = GameteState.constant([1e-9, 0.5, 0.5 - 1e-9, 0.0 + 0.0], 3)
    assert classify_profile(g, 0.0, True) == "boundary-limit"
    g = GameteState.constant([1e-9, 0.5, 0.25, 0.25 - 1e-9], 3)
    assert classify_profile(g, 0.0, True) == "internal"


def test_internal_needs_recombination(strong_env):
    with pytest.raises(PreconditionError):
        internal_equilibrium(strong_env, SimParams(10.0, 0.0))


def test_singular_newton_reports_condition():
    # lambda = 0, rho = 0: pure diffusion, every constant state is stationary
    g = build_grid(1.0, 17)
    env = make_environment(np.zeros(17), np.zeros(17), g)
    start = GameteState(np.stack([0.25 + 0.01 * np.cos(np.pi * g.x)] * 2
                                 + [0.25 - 0.01 * np.cos(np.pi * g.x)] * 2))
    state, res, its, ok, info = newton_gamete(start, env, SimParams(0.0, 0.0))
    assert info.get("singular_jacobian") and info["condition_estimate"] > 1e12


def test_rho_sensitivity_and_first_order(weak_env):
    lam = 1.2 * edge_threshold(1, 4, weak_env)
    sens = rho_sensitivity(weak_env, lam)
    assert sens.u2.min() > 0 and sens.u3.min() > 0
    assert np.allclose(sens.stacked.sum(axis=0), 0.0, atol=1e-14)
    edge = edge_equilibrium(1, 4, weak_env, lam)
    errs = []
    for rho in (1e-2, 5e-3, 2.5e-3):
        eq = internal_equilibrium(weak_env, SimParams(lam, rho), seed="edge14")
        assert eq.kind == "internal"
        errs.append(np.abs((eq.state.p - edge.state.p) / rho - sens.stacked).max())
    assert errs[0] > errs[1] > errs[2]
    assert 1.6 < errs[0] / errs[1] < 2.4  # error in the quotient is O(rho)


def test_rho_sensitivity_degenerate():
    # beta = 0: the u2 weight is alpha (1 - theta), and theta itself is a positive
    # eigenfunction with eigenvalue 0, so the sensitivity problem is singular
    g = build_grid(1.0, 65)
    env = make_environment(StepProfile([-1.0, 1.0], [0.6]), np.zeros(65), g)
    with pytest.raises(DegenerateEquilibriumError):
        rho_sensitivity(env, 3.0 * lambda_h(env.alpha, g))


def test_product_seed_inside(strong_env):
    seed = product_seed(strong_env, 10.0)
    assert seed.p.min() > 0 and seed.simplex_violation() < 1e-14
    assert np.abs(seed.linkage).max() < 1e-15
    assert pair_weight(strong_env, 1, 4).shape == (129,)
