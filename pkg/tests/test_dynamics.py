import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twolocus import _kernels as K
from twolocus.dynamics import (AlleleState, GameteState, SimParams, allele_to_gamete,
                               compute_kappa, default_dt, gamete_rates, gamete_to_allele,
                               gradient_ratio, linkage_ratios, reaction_jacobian,
                               run_to_equilibrium, stationary_residual, step_allele,
                               step_gamete)
from twolocus.environment import make_environment
from twolocus.equilibria import single_locus_cline
from twolocus.errors import (PreconditionError, StateInvariantError,
                             UnsupportedRepresentationError)
from twolocus.grid import build_grid


def _const_env(n=17, a=0.0, b=0.0):
    g = build_grid(1.0, n)
    return make_environment(np.full(n, a), np.full(n, b), g)


def _dirichlet_states(rng, n):
    return GameteState(rng.dirichlet(np.ones(4), size=n).T)


# --- coordinate changes -----------------------------------------------------

@pytest.mark.parametrize("p,a", [((1, 0, 0, 0), (1, 1, 0)), ((0.25,) * 4, (0.5, 0.5, 0.0))])
def test_transform_examples(p, a):
    g = GameteState.constant(p, 3)
    al = gamete_to_allele(g)
    assert np.allclose(al.stacked[:, 0], a)
    assert np.allclose(allele_to_gamete(al).p, g.p)


def test_round_trip_and_identity(rng):
    g = _dirichlet_states(rng, 10_000)
    a = gamete_to_allele(g)
    assert np.abs(a.D - (g.p[0] - a.pA * a.pB)).max() < 1e-14
    assert np.abs(allele_to_gamete(a).p - g.p).max() < 1e-13
    assert a.bound_violation() == 0.0


def test_transform_rejects_invalid():
    with pytest.raises(StateInvariantError):
        gamete_to_allele(GameteState.constant([0.5, 0.5, 0.5, -0.5], 3))
    with pytest.raises(StateInvariantError):
        allele_to_gamete(AlleleState([0.5], [0.5], [0.3]))


def test_params():
    p = SimParams.from_raw(d=2.0, s=4.0, r=1.0)
    assert (p.lam, p.rho, p.epsilon) == (2.0, 0.5, 2.0)
    with pytest.raises(PreconditionError):
        SimParams(1.0, 0.0).epsilon
    with pytest.raises(PreconditionError):
        SimParams(-1.0)


# --- reaction terms -----------------------------------------------------------

def test_rates_sum_to_zero_and_jacobian_matches_finite_differences(strong_env, rng):
    params = SimParams(3.0, 2.0)
    p = _dirichlet_states(rng, strong_env.grid.n_nodes).p
    rates = gamete_rates(p, strong_env, params)
    assert np.abs(rates.sum(axis=0)).max() < 1e-14
    jac = reaction_jacobian(p, strong_env, params)
    h = 1e-6
    for k in range(4):
        e = np.zeros_like(p)
        e[k] = h
        fd = (gamete_rates(p + e, strong_env, params) - gamete_rates(p - e, strong_env, params)) / (2 * h)
        assert np.abs(fd - jac[:, k]).max() < 1e-8


def test_recombination_signs():
    env = _const_env()
    p = GameteState.constant([0.4, 0.1, 0.1, 0.4], 17).p  # D = 0.15
    rates = gamete_rates(p, env, SimParams(0.0, 1.0))
    assert np.allclose(rates[:, 0], [-0.15, 0.15, 0.15, -0.15])


# --- stepping -----------------------------------------------------------------

def test_constant_state_fixed_without_reaction():
    env = _const_env()
    g = GameteState.constant([0.1, 0.2, 0.3, 0.4], 17)
    out = step_gamete(g, env, SimParams(0.0, 0.0), 0.1)
    assert np.abs(out.p - g.p).max() < 1e-15


@pytest.mark.parametrize("rho,dt", [(5.0, 0.5), (100.0, 0.1)])
def test_implicit_sink_decay(rho, dt):
    env = _const_env()
    g = GameteState.constant([0.4, 0.1, 0.1, 0.4], 17)
    out = step_gamete(g, env, SimParams(0.0, rho), dt)
    assert np.allclose(out.linkage, 0.15 / (1 + rho * dt), rtol=1e-13)
    a = step_allele(gamete_to_allele(g), env, SimParams(0.0, rho), dt)
    assert np.allclose(a.D, 0.15 / (1 + rho * dt), rtol=1e-13)


def test_allele_needs_recombination():
    env = _const_env()
    with pytest.raises(UnsupportedRepresentationError):
        step_allele(AlleleState(np.full(17, 0.5), np.full(17, 0.5), np.zeros(17)), env,
                    SimParams(1.0, 0.0), 0.1)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.5, 20.0]))
@settings(max_examples=25, deadline=None)
def test_simplex_drift_per_step(seed, rho):
    rng = np.random.default_rng(seed)
    g = build_grid(1.0, 33)
    env = make_environment(rng.normal(size=33), rng.normal(size=33), g)
    params = SimParams(float(rng.uniform(0.5, 20)), rho)
    state = _dirichlet_states(rng, 33)
    out = step_gamete(state, env, params, default_dt(env, params))
    assert out.simplex_violation() <= 1e-12


@pytest.mark.parametrize("name", ["numpy", "numba"])
def test_edge_invariance(strong_env, name):
    n = strong_env.grid.n_nodes
    theta = 0.5 + 0.3 * np.cos(np.pi * strong_env.grid.x)
    g = GameteState.from_components(theta, np.zeros(n), 1 - theta, np.zeros(n))  # p2 = p4 = 0
    with K.backend(name):
        res = run_to_equilibrium(g, strong_env, SimParams(8.0, 3.0), tol=0.0, t_max=2.0)
    assert max(np.abs(res.state.p[1]).max(), np.abs(res.state.p[3]).max()) < 1e-12


def test_interior_after_one_step(strong_env):
    n = strong_env.grid.n_nodes
    g = GameteState.constant([0.0, 0.5, 0.5, 0.0], n)  # off X0, p1 = p4 = 0
    params = SimParams(5.0, 1.0)
    out = step_gamete(g, strong_env, params, default_dt(strong_env, params))
    assert out.p.min() > 0.0


def test_vertex_is_fixed(strong_env):
    n = strong_env.grid.n_nodes
    g = GameteState.constant([1.0, 0.0, 0.0, 0.0], n)
    res = run_to_equilibrium(g, strong_env, SimParams(5.0, 1.0), tol=1e-12, t_max=1.0)
    assert res.converged and res.steps == 1 and res.residual == 0.0
    assert stationary_residual(g, strong_env, SimParams(5.0, 1.0)) == 0.0


def test_decoupling_at_linkage_equilibrium(strong_env):
    # beta = 0, pB = 1/2, D = 0: pA follows the single-locus equation for alpha
    g = strong_env.grid
    env = make_environment(strong_env.alpha, np.zeros(g.n_nodes), g)
    params = SimParams(10.0, 1.0)
    dt = 1e-3
    pa0 = 0.5 + 0.2 * np.cos(np.pi * g.x)
    a = AlleleState(pa0, np.full(g.n_nodes, 0.5), np.zeros(g.n_nodes))
    res = run_to_equilibrium(a, env, params, representation="allele", tol=0.0, t_max=0.2, dt=dt)
    theta = pa0.copy()
    K.march_scalar(theta, env.alpha, params.lam, dt,
                   K.implicit_factor(g.laplacian_bands, dt), res.steps)
    assert np.abs(res.allele.pA - theta).max() < 1e-12
    assert np.abs(res.allele.D).max() < 1e-14


def test_representations_agree(strong_env):
    params = SimParams(8.0, 2.0)
    g = strong_env.grid
    pa = 0.5 + 0.3 * np.cos(np.pi * g.x)
    pb = 0.5 - 0.2 * np.cos(np.pi * g.x)
    a = AlleleState(pa, pb, 0.05 * pa * (1 - pa) * pb * (1 - pb))
    dt = 1e-4
    r1 = run_to_equilibrium(a, strong_env, params, representation="allele", tol=0.0,
                            t_max=100 * dt, dt=dt)
    r2 = run_to_equilibrium(allele_to_gamete(a), strong_env, params, tol=0.0, t_max=100 * dt,
                            dt=dt)
    assert np.abs(r1.state.p - r2.state.p).max() < 1e-4


def test_run_records_samples(strong_env):
    g = GameteState.constant([0.25] * 4, strong_env.grid.n_nodes)
    res = run_to_equilibrium(g, strong_env, SimParams(5.0, 1.0), tol=1e-14, t_max=1.0, dt=0.01,
                             sample_times=[0.0, 0.5, 1.0])
    assert [round(r["t"], 12) for r in res.diagnostics] == [0.0, 0.5, 1.0]
    assert set(res.diagnostics[0]) == {"t", "residual", "kappa", "max_abs_D", "gradient_ratio"}
    assert not res.converged and res.steps == 100


# --- diagnostics ------------------------------------------------------------

def test_kappa_and_ratios():
    assert compute_kappa(AlleleState([1.0], [1.0], [0.0])) == 0.0
    assert compute_kappa(AlleleState([0.5], [0.5], [0.0])) == 0.5
    da, db = linkage_ratios(AlleleState([0.5], [0.5], [0.1]))
    assert da[0] == pytest.approx(0.4) and db[0] == pytest.approx(0.4)
    da, db = linkage_ratios(AlleleState([1.0, 0.5], [0.5, 0.5], [0.0, 0.0]))
    assert da[0] == 0.0 and np.all(db == 0.0)


def test_linkage_ratio_bound(rng):
    a = gamete_to_allele(_dirichlet_states(rng, 10_000))
    da, db = linkage_ratios(a)
    assert np.abs(da).max() <= 2 + 1e-12 and np.abs(db).max() <= 2 + 1e-12


def test_gradient_ratio_reduction(strong_env):
    g = strong_env.grid
    assert gradient_ratio(AlleleState(np.full(g.n_nodes, 0.5), np.full(g.n_nodes, 0.5),
                                      np.zeros(g.n_nodes)), g) == 0.0
    theta = single_locus_cline(strong_env.alpha, 10.0, g).theta
    a = AlleleState(theta, np.full(g.n_nodes, 0.5), np.zeros(g.n_nodes))
    grad = np.zeros(g.n_nodes)
    grad[1:-1] = (theta[2:] - theta[:-2]) / (2 * g.dx)
    assert gradient_ratio(a, g) == pytest.approx(np.max(np.abs(grad) / (theta * (1 - theta))))
    assert math.isfinite(gradient_ratio(a, g))
