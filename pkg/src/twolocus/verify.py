"""Executable checks of the qualitative theory, each returning a TheoremReport.

Every suite is a finite numerical experiment: global attraction is checked by
sampling seeded random interior starts, big-O claims by unit log-log slopes
with 20% latitude, thresholds by sign changes along a lambda sweep. None of
this is proof; the reports state what was measured and with which tolerance.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import linregress

from . import _kernels as kernels
from .dynamics import ETA, GameteState, GameteStepper, SimParams, linkage_ratios, search_dt
from .environment import GAMETES, StepProfile, classify_fittest, make_environment, pair_weight
from .equilibria import (TOL_EQ, TOL_SPEC, default_seeds, edge_equilibrium, edge_threshold,
                         effective_tol, internal_equilibrium, monomorphic, newton_gamete,
                         rho_sensitivity, single_locus_cline)
from .errors import DegenerateEquilibriumError, PreconditionError
from .grid import c1_norm, gradient
from .spectral import lambda_h, lambda_j_star
from .stability import assess, edge14_spectrum_decomposed

SLOPE_WINDOW = (0.8, 1.2)
R2_MIN = 0.95


@dataclass(eq=False)
class TheoremReport:
    theorem: str
    scenario: str
    verdict: str  # "pass", "fail" or "inconclusive"
    checks: dict = field(default_factory=dict)
    measured: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def passed(self):
        return self.verdict == "pass"

    def as_dict(self):
        return {
            "theorem": self.theorem,
            "scenario": self.scenario,
            "verdict": self.verdict,
            "checks": {k: bool(v) for k, v in self.checks.items()},
            "measured": _jsonable(self.measured),
            "tolerances": _jsonable(self.tolerances),
            "seed": self.seed,
        }

    def headline(self):
        """(slope, r2, threshold) for the summary table; None where not measured."""
        m = self.measured
        slope = m.get("slope_vs_rho", m.get("slope"))
        threshold = None
        for key in ("d0_estimate", "lambda_star", "lambda_14", "lambda_sigma"):
            if m.get(key) is not None:
                threshold = m[key]
                break
        return slope, m.get("r2"), threshold


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _report(theorem, scenario, checks, measured, tolerances, seed=None, inconclusive=False):
    if inconclusive:
        verdict = "inconclusive"
    else:
        verdict = "pass" if all(checks.values()) else "fail"
    return TheoremReport(theorem, scenario, verdict, checks, measured, tolerances, seed)


def slope_fit(x, y):
    """Least-squares slope and R^2 of log(y) against log(x)."""
    fit = linregress(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)))
    return float(fit.slope), float(fit.rvalue**2)


# ---------------------------------------------------------------------------
# Shared helpers


def random_interior_states(grid, rng, n, floor=0.02):
    """Smooth interior gamete states: linear blends of two random simplex points."""
    states = []
    s = grid.x / grid.length
    for _ in range(n):
        q0, q1 = rng.dirichlet(np.full(4, 2.0), size=2)
        q0 = (1 - 4 * floor) * q0 + floor
        q1 = (1 - 4 * floor) * q1 + floor
        states.append(GameteState(np.outer(q0, 1 - s) + np.outer(q1, s)))
    return states


def sup_distance(a, b):
    a = a.p if isinstance(a, GameteState) else np.asarray(a)
    b = b.p if isinstance(b, GameteState) else np.asarray(b)
    return float(np.abs(a - b).max())


def march(state, env, params, tol=1e-10, t_max=5e3, dt=None, target=None, dist_tol=None,
          chunk=500):
    """March in chunks; stop at step residual < tol or within ``dist_tol`` of ``target``.

    Returns (GameteState, t, residual).
    """
    if dt is None:
        dt = search_dt(env, params)
    p = state.p.copy()
    stepper = GameteStepper(env, params, dt, "auto")
    total = int(math.ceil(t_max / dt))
    done = 0
    residual = math.inf
    while done < total:
        n = min(chunk, total - done)
        taken, residual, drift, status = stepper.advance(p, n, tol)
        done += taken
        if status == kernels.REJECTED:
            raise RuntimeError(f"invariant drift {drift:.3e} during verification run")
        if status == kernels.CONVERGED:
            break
        if target is not None and sup_distance(p, target) < dist_tol:
            break
    return GameteState(p), done * dt, residual


# ---------------------------------------------------------------------------
# Spatially averaged ODE


@dataclass(eq=False)
class AveragedState:
    q: np.ndarray  # shape (4,) or (4, M) for M independent states

    @property
    def linkage(self):
        return self.q[0] * self.q[3] - self.q[1] * self.q[2]


def averaged_rates(q, alpha_bar, beta_bar, s, r):
    q1, q2, q3, q4 = q
    a, b = alpha_bar, beta_bar
    d = q1 * q4 - q2 * q3
    sel = np.array([
        q1 * (a * (q3 + q4) + b * (q2 + q4)),
        q2 * (a * (q3 + q4) - b * (q1 + q3)),
        q3 * (-a * (q1 + q2) + b * (q2 + q4)),
        q4 * (-a * (q1 + q2) - b * (q1 + q3)),
    ])
    eta = ETA.reshape((4,) + (1,) * (np.ndim(q) - 1))
    return s * sel - eta * r * d


def averaged_ode_step(state, means, s, r, dt):
    """Forward Euler step of the averaged system; returns (AveragedState, drift).

    The step preserves the sum exactly in exact arithmetic; the round-off
    drift is measured, then removed by renormalising.
    """
    q = np.asarray(state.q, dtype=float)
    new = q + dt * averaged_rates(q, means[0], means[1], s, r)
    total = new.sum(axis=0)
    drift = float(np.abs(total - 1.0).max())
    return AveragedState(new / total), drift


def integrate_averaged(state, means, s, r, dt, t_max):
    max_drift = 0.0
    steps = int(math.ceil(t_max / dt))
    for _ in range(steps):
        state, drift = averaged_ode_step(state, means, s, r, dt)
        max_drift = max(max_drift, drift)
    return state, max_drift


# ---------------------------------------------------------------------------
# Monomorphic thresholds


def verify_monomorphic_thresholds(env, rhos=(0.0, 1.0, 2.0), cells=200, span=0.1, n_check=None):
    """Direct stability of every vertex along a lambda sweep around lambda_i*(rho).

    The sweep has spacing lambda_i*/``cells`` over [1-span, 1+span]*lambda_i*,
    offset by half a cell so no sample sits on the threshold.
    """
    fittest = classify_fittest(env)
    grid = env.grid
    measured = {"fittest": fittest, "rho": list(rhos), "lambda_star": [], "flip_cell": [],
                "max_bound_other_vertices": []}
    checks = {}
    if fittest == "nongeneric":
        lams = np.linspace(0.2, 20.0, n_check or 12)
        worst = -math.inf
        for rho, lam in itertools.product(rhos, lams):
            params = SimParams(float(lam), float(rho))
            for j in GAMETES:
                rep = assess(monomorphic(j, grid), env, params, k=1, eliminate=j)
                worst = max(worst, rep.leading_bound)
        measured["max_bound_all_vertices"] = worst
        checks["all_vertices_unstable"] = worst < -TOL_SPEC
        return _report("monomorphic-thresholds", "nongeneric environment", checks, measured,
                       {"tol_spec": TOL_SPEC})
    stars = []
    for rho in rhos:
        star = lambda_j_star(fittest, env, rho)
        stars.append(star)
        measured["lambda_star"].append(star)
        if not (0 < star < math.inf):
            checks[f"finite_threshold_rho={rho}"] = False
            continue
        step = star / cells
        k_lo = int(round((1 - span) * cells))
        k_hi = int(round((1 + span) * cells))
        lams = (np.arange(k_lo, k_hi) + 0.5) * step
        signs = []
        worst_other = -math.inf
        for lam in lams:
            params = SimParams(float(lam), float(rho))
            bound = assess(monomorphic(fittest, grid), env, params, k=1,
                           eliminate=fittest).leading_bound
            signs.append(bound > 0)
            for j in GAMETES:
                if j != fittest:
                    b = assess(monomorphic(j, grid), env, params, k=1, eliminate=j).leading_bound
                    worst_other = max(worst_other, b)
        signs = np.array(signs)
        flips = np.nonzero(signs[:-1] != signs[1:])[0]
        ok = len(flips) == 1 and signs[0] and not signs[-1]
        cell = (float(lams[flips[0]]), float(lams[flips[0] + 1])) if len(flips) else None
        measured["flip_cell"].append(cell)
        measured["max_bound_other_vertices"].append(worst_other)
        checks[f"flip_brackets_threshold_rho={rho}"] = bool(
            ok and cell[0] < star < cell[1] and cell[1] - cell[0] <= step * (1 + 1e-12))
        checks[f"other_vertices_unstable_rho={rho}"] = worst_other < -TOL_SPEC
    finite = [s for s in stars if math.isfinite(s)]
    checks["threshold_nondecreasing_in_rho"] = all(
        b >= a * (1 - 1e-10) for a, b in zip(finite, finite[1:]))
    return _report("monomorphic-thresholds", f"fittest gamete {fittest}", checks, measured,
                   {"cell": "lambda_star/%d" % cells, "tol_spec": TOL_SPEC})


# ---------------------------------------------------------------------------
# Weak recombination


def verify_weak_recombination(env, lam, rhos=(1e-2, 5e-3, 2.5e-3), n_starts=8, seed=0):
    """Perturbation of the 14-edge equilibrium by small recombination."""
    grid = env.grid
    edge = edge_equilibrium(1, 4, env, lam)
    if edge is None:
        raise PreconditionError("the 14-edge equilibrium does not exist at this lambda")
    rhos = sorted(rhos, reverse=True)
    direct = assess(edge, env, SimParams(lam, 0.0))
    dec = edge14_spectrum_decomposed(env, lam, 8, edge)
    measured = {"lambda": lam, "rho": rhos, "edge_leading_bound": direct.leading_bound,
                "mu1_families": dec.principal}
    tolerances = {"slope_window": SLOPE_WINDOW, "tol_eq": TOL_EQ, "tol_spec": TOL_SPEC}
    if direct.verdict == "marginal":
        return _report("weak-recombination", "degenerate edge equilibrium", {}, measured,
                       tolerances, seed, inconclusive=True)
    try:
        sens = rho_sensitivity(env, lam, edge)
    except DegenerateEquilibriumError as exc:
        measured["degenerate"] = str(exc)
        return _report("weak-recombination", "degenerate edge equilibrium", {}, measured,
                       tolerances, seed, inconclusive=True)
    measured["u_min"] = [float(sens.u1.min()), float(sens.u2.min()), float(sens.u3.min())]
    measured["u_sup"] = float(np.abs(sens.stacked).max())
    checks = {}
    if direct.stable:
        dists, errs, bounds = [], [], []
        internal, stable = [], []
        for rho in rhos:
            params = SimParams(lam, rho)
            eq = internal_equilibrium(env, params, seed="edge14")
            internal.append(eq.kind == "internal" and eq.converged)
            rep = assess(eq, env, params)
            stable.append(rep.stable)
            bounds.append(rep.leading_bound)
            dists.append(sup_distance(eq.state, edge.state))
            errs.append(sup_distance(eq.state.p, edge.state.p + rho * sens.stacked))
        slope, r2 = slope_fit(rhos, dists)
        ratio = [e / r for e, r in zip(errs, rhos)]
        measured.update({"distance": dists, "first_order_error": errs, "error_over_rho": ratio,
                         "slope": slope, "r2": r2, "leading_bound": bounds})
        checks["internal_for_every_rho"] = all(internal)
        checks["stable_for_every_rho"] = all(stable)
        checks["slope_in_window"] = SLOPE_WINDOW[0] <= slope <= SLOPE_WINDOW[1]
        checks["first_order_ratio_decreasing"] = all(b < a for a, b in zip(ratio, ratio[1:]))
        checks["u2_u3_positive"] = bool(sens.u2.min() > 0 and sens.u3.min() > 0)
        measured["bound_relative_change"] = abs(bounds[-1] - direct.leading_bound) / abs(
            direct.leading_bound)
        checks["leading_bound_continuous"] = measured["bound_relative_change"] < 0.1
        scenario = "stable edge equilibrium"
    else:
        # the equilibrium-free neighbourhood is claimed for sufficiently small rho
        rho = rhos[-1]
        radius = 5.0 * rho * measured["u_sup"]
        rng = np.random.default_rng(seed)
        params = SimParams(lam, rho)
        found_in_x = []
        converged = 0
        s = grid.x / grid.length
        for m in range(n_starts):
            # random smooth perturbation inside the ball around the edge equilibrium
            c = rng.uniform(-1, 1, size=(4, 2))
            c -= c.mean(axis=0)
            pert = np.outer(c[:, 0], 1 - s) + np.outer(c[:, 1], s)
            pert *= 0.5 * radius * rng.uniform() / max(np.abs(pert).max(), 1e-300)
            start = GameteState(edge.state.p + rho * sens.stacked * rng.uniform(0, 2) + pert)
            state, res, _, ok, _ = newton_gamete(start, env, params)
            if ok:
                converged += 1
                inside = (sup_distance(state, edge.state) <= radius
                          and state.p.min() >= -10 * effective_tol(grid))
                found_in_x.append(bool(inside))
        measured.update({"rho": rho, "radius": radius, "newton_converged": converged,
                         "starts": n_starts})
        checks["u2_or_u3_negative"] = bool(min(sens.u2.min(), sens.u3.min()) < 0)
        checks["no_equilibrium_in_state_space_nearby"] = not any(found_in_x)
        scenario = "unstable edge equilibrium"
    return _report("weak-recombination", scenario, checks, measured, tolerances, seed)


# ---------------------------------------------------------------------------
# Strong recombination


def _trivial_or_cline(h, lam, grid):
    lh = lambda_h(h, grid)
    cline = single_locus_cline(h, lam, grid)
    return cline.theta, lh, cline.kind


def verify_strong_recombination(env, lam, rhos=(50.0, 100.0, 200.0), n_starts=3, seed=0,
                                t_max=2e3):
    """Linkage-equilibrium limit for large recombination.

    Above both single-locus thresholds: common internal equilibrium from
    several starts, deviation from the product of clines of order 1/rho.
    Below the larger threshold: convergence to the product of the (possibly
    trivial) single-locus limits with D = 0.
    """
    grid = env.grid
    if min(rhos) < 10:
        raise PreconditionError("strong-recombination suite expects rho >= 10")
    if not env.assumption_a:
        raise PreconditionError("both alpha and beta must change sign")
    theta_a, la, kind_a = _trivial_or_cline(env.alpha, lam, grid)
    theta_b, lb, kind_b = _trivial_or_cline(env.beta, lam, grid)
    rhos = sorted(rhos)
    measured = {"lambda": lam, "lambda_A": la, "lambda_B": lb, "rho": rhos}
    tolerances = {"slope_window": (-SLOPE_WINDOW[1], -SLOPE_WINDOW[0]), "r2_min": R2_MIN,
                  "pairwise": 1e-8, "limit_distance": 1e-6}
    rng = np.random.default_rng(seed)
    top = max(la, lb)
    if abs(lam - top) <= 1e-8 * top:
        return _report("strong-recombination", "degenerate lambda = max threshold", {},
                       measured, tolerances, seed, inconclusive=True)
    checks = {}
    if lam > top:
        devs, d_sup, da_sup, spreads, kappas = [], [], [], [], []
        all_internal = True
        for rho in rhos:
            params = SimParams(lam, rho)
            starts = ["product-cline"] + random_interior_states(grid, rng, n_starts - 1)
            finals = []
            for st in starts:
                eq = internal_equilibrium(env, params, seed=st, t_max=t_max)
                all_internal &= eq.kind == "internal" and eq.converged
                finals.append(eq)
            spreads.append(max(sup_distance(a.state, b.state)
                               for a, b in itertools.combinations(finals, 2)))
            al = finals[0].allele
            kappas.append(float(np.min([al.pA, 1 - al.pA, al.pB, 1 - al.pB])))
            devs.append(c1_norm(grid, al.pA - theta_a) + c1_norm(grid, al.pB - theta_b)
                        + float(np.abs(al.D).max()))
            d_sup.append(float(np.abs(al.D).max()))
            da, _ = linkage_ratios(al)
            da_sup.append(float(np.abs(da).max()))
        slope, r2 = slope_fit(rhos, devs)
        scaled_d = [d * r for d, r in zip(d_sup, rhos)]
        measured.update({"deviation": devs, "slope_vs_rho": slope, "r2": r2,
                         "pairwise_spread": spreads, "kappa": kappas, "max_abs_D": d_sup,
                         "max_abs_D_times_rho": scaled_d, "max_abs_DA": da_sup,
                         "max_abs_DA_times_rho": [d * r for d, r in zip(da_sup, rhos)]})
        checks["internal_from_every_start"] = bool(all_internal)
        checks["common_limit"] = max(spreads) < 1e-8
        checks["kappa_positive"] = min(kappas) > 0
        checks["slope_in_window"] = -SLOPE_WINDOW[1] <= slope <= -SLOPE_WINDOW[0]
        checks["fit_quality"] = r2 >= R2_MIN
        checks["D_over_eps_bounded"] = max(scaled_d) <= 1.5 * min(scaled_d)
        scenario = "lambda above both single-locus thresholds"
    else:
        pa, pb = theta_a, theta_b
        target = GameteState.from_components(pa * pb, pa * (1 - pb), (1 - pa) * pb,
                                             (1 - pa) * (1 - pb))
        dists = []
        for rho in rhos:
            params = SimParams(lam, rho)
            for st in random_interior_states(grid, rng, n_starts):
                final, _, _ = march(st, env, params, tol=1e-11, t_max=t_max, target=target,
                                    dist_tol=1e-7)
                dists.append(sup_distance(final, target))
        trivial = [kind_a in ("zero", "one"), kind_b in ("zero", "one")]
        measured.update({"limit_kinds": [kind_a, kind_b], "distance_to_limit": dists})
        checks["converges_to_product_limit"] = max(dists) < 1e-6
        if lam < min(la, lb):
            checks["limit_is_vertex"] = all(trivial)
            scenario = "lambda below both single-locus thresholds"
        else:
            checks["exactly_one_trivial_factor"] = sum(trivial) == 1
            scenario = "lambda between the single-locus thresholds"
    return _report("strong-recombination", scenario, checks, measured, tolerances, seed)


# ---------------------------------------------------------------------------
# Large diffusion


def _escapes_or_converges(env, params, vertex, starts, dist_tol, horizon):
    # horizon is in raw selection time s*t, i.e. lam*t in scaled time
    t_max = horizon / params.lam
    target = monomorphic(vertex, env.grid).state
    dt = min(search_dt(env, params), 5.0)
    out = []
    for st in starts:
        final, _, _ = march(st, env, params, tol=0.0, t_max=t_max, dt=dt, target=target,
                            dist_tol=0.1 * dist_tol, chunk=2000)
        out.append(sup_distance(final, target))
    return out


def verify_large_d_global_stability(env, s, r, d_list=None, n_starts=20, n_ode_starts=100,
                                    seed=0, dist_tol=1e-5, horizon=500.0, bisect_steps=5,
                                    bisect_starts=4):
    """Global attraction of the fittest vertex for large diffusion.

    Raw parameters (d, s, r) map to lam = s/d and rho = r/d. The averaged ODE
    is integrated from random interior starts; PDE runs at each d in
    ``d_list`` use random smooth interior starts for ``horizon`` units of raw
    selection time s*t; d0 is bracketed by bisection.
    """
    fittest = classify_fittest(env)
    if fittest == "nongeneric":
        raise PreconditionError("large-d suite needs a generic environment")
    grid = env.grid
    rng = np.random.default_rng(seed)
    means = (env.alpha_mean, env.beta_mean)
    measured = {"fittest": fittest, "s": s, "r": r}
    checks = {}

    q0 = rng.dirichlet(np.ones(4), size=n_ode_starts).T
    rate = s * min(abs(means[0]), abs(means[1]))
    dt_ode = 0.05 / max(s * max(abs(means[0]), abs(means[1])), r, 1e-12)
    final, drift = integrate_averaged(AveragedState(q0), means, s, r, dt_ode,
                                      t_max=40.0 / max(rate, 1e-12))
    vertex = np.zeros(4)
    vertex[fittest - 1] = 1.0
    ode_dist = float(np.abs(final.q - vertex[:, None]).max())
    ode_d = float(np.abs(final.linkage).max())
    measured.update({"ode_max_distance": ode_dist, "ode_max_abs_D": ode_d,
                     "ode_max_drift": drift})
    checks["ode_converges_to_vertex"] = ode_dist < 1e-6
    checks["ode_linkage_vanishes"] = ode_d < 1e-8

    if d_list is None:
        d_list = [100.0 * s]
    pde = {}
    for d in d_list:
        params = SimParams.from_raw(d, s, r)
        dists = _escapes_or_converges(env, params, fittest,
                                      random_interior_states(grid, rng, n_starts),
                                      dist_tol, horizon)
        pde[d] = max(dists)
        checks[f"pde_converges_d={d:g}"] = max(dists) < dist_tol
    measured["pde_max_distance"] = pde

    # bisection for the smallest d with every sampled start attracted
    hi = max(d_list)
    if bisect_steps > 0:
        starts = random_interior_states(grid, rng, bisect_starts)

        def attracted(d):
            params = SimParams.from_raw(d, s, r)
            return max(_escapes_or_converges(env, params, fittest, starts, dist_tol,
                                             horizon)) < dist_tol

        lo = hi
        while attracted(lo) and lo > 1e-3 * hi:
            lo /= 4.0
        if attracted(lo):
            measured["d0_estimate"] = None
        else:
            a, b = lo, min(4 * lo, hi)
            for _ in range(bisect_steps):
                mid = math.sqrt(a * b)
                if attracted(mid):
                    b = mid
                else:
                    a = mid
            measured["d0_estimate"] = b
            measured["d0_bracket"] = (a, b)
            # below d0 the fittest vertex should be unstable
            params = SimParams.from_raw(a, s, r)
            lam_i = lambda_j_star(fittest, env, params.rho)
            measured["lambda_at_bracket_low"] = params.lam
            measured["lambda_star_at_bracket_low"] = lam_i
        # once lam exceeds lambda_i*(rho) the vertex is linearly unstable: starts must escape
        d_u = lo
        for _ in range(30):
            params = SimParams.from_raw(d_u, s, r)
            if params.lam > 1.05 * lambda_j_star(fittest, env, params.rho):
                break
            d_u /= 2.0
        measured["d_unstable_vertex"] = d_u
        checks["escape_when_vertex_unstable"] = not attracted(d_u)
    return _report("large-d-global-stability", f"fittest gamete {fittest}", checks, measured,
                   {"distance": dist_tol, "ode_D": 1e-8}, seed)


# ---------------------------------------------------------------------------
# No recombination


def _env(grid, alpha, beta):
    return make_environment(alpha, beta, grid)


def _step(levels, breakpoints):
    return StepProfile(tuple(levels), tuple(breakpoints))


def default_no_recombination_families(grid):
    x = grid.x / grid.length
    g_neg = _step([-1.0, 1.0], [0.6 * grid.length])
    g_pos = _step([-1.0, 1.0], [0.4 * grid.length])
    g_zero = _step([-1.0, 1.0], [0.5 * grid.length])
    alpha_ss = _step([-1.0, 1.0], [0.55 * grid.length]).sample(grid)
    gamma = 1.0 + 0.5 * x
    return {
        "proportional": {name: (g, 1.0, 0.5) for name, g in
                         (("gbar<0", g_neg), ("gbar>0", g_pos), ("gbar=0", g_zero))},
        "same-sign": (alpha_ss, alpha_ss * gamma),
        "fixation": (_step([-1.0, 2.0], [0.5 * grid.length]),
                     _step([-1.0, 1.5], [0.4 * grid.length])),
        "edge-stability": (_step([-1.0, 1.0], [0.45 * grid.length]),
                           _step([1.0, -0.6], [0.7 * grid.length])),
        "four-quadrant": (_step([1.0, 1.0, -1.0, -1.0], [0.25, 0.5, 0.75]),
                          _step([1.0, -1.0, 1.0, -1.0], [0.25, 0.5, 0.75])),
    }


def _attractor_check(env, lam, target, starts, tol):
    params = SimParams(lam, 0.0)
    dists = []
    finals = []
    for st in starts:
        final, _, _ = march(st, env, params, tol=1e-12, t_max=2e4, target=target.p,
                            dist_tol=0.1 * tol)
        finals.append(final)
        dists.append(sup_distance(final, target))
    return dists, finals


def verify_no_recombination_suite(grid, families=None, seed=0, n_starts=5):
    """Scenarios for rho = 0; failures are recorded and the suite continues."""
    fam = families or default_no_recombination_families(grid)
    rng = np.random.default_rng(seed)
    reports = []

    def run(name, fn):
        try:
            reports.append(fn())
        except Exception as exc:  # recorded, suite continues
            reports.append(_report(name, "error", {"completed": False},
                                   {"error": f"{type(exc).__name__}: {exc}"}, {}, seed))

    # (i) proportional environments alpha = a g, beta = b g
    for label, (g, a, b) in fam["proportional"].items():
        def proportional(label=label, g=g, a=a, b=b):
            gs = g.sample(grid) if hasattr(g, "sample") else np.asarray(g)
            env = _env(grid, a * gs, b * gs)
            sigma = pair_weight(env, 1, 4)
            lstar = lambda_h(sigma, grid)
            checks, measured = {}, {"lambda_sigma": lstar}
            cases = [(2.0 * max(lstar, 0.5), "edge14")]
            if lstar > 0:
                vertex = 4 if label == "gbar<0" else 1
                cases.insert(0, (0.5 * lstar, vertex))
            for lam, want in cases:
                if want == "edge14":
                    target = edge_equilibrium(1, 4, env, lam).state
                else:
                    target = monomorphic(want, grid).state
                dists, finals = _attractor_check(env, lam, target,
                                                 random_interior_states(grid, rng, n_starts), 1e-6)
                measured[f"lambda={lam:.6g}->{want}"] = max(dists)
                checks[f"attracted_to_{want}"] = max(dists) < 1e-6
                if label == "gbar=0":
                    spread = max(sup_distance(x, y) for x, y in itertools.combinations(finals, 2))
                    measured["pairwise_final_distance"] = spread
                    checks["common_limit"] = spread < 1e-6
            return _report("no-recombination-proportional", label, checks, measured,
                           {"distance": 1e-6}, seed)
        run("no-recombination-proportional", proportional)

    # (ii) same-sign environments at large lambda
    def same_sign():
        env = _env(grid, *fam["same-sign"])
        l14 = edge_threshold(1, 4, env)
        lam = 10.0 * max(l14, 1.0)
        target = edge_equilibrium(1, 4, env, lam).state
        dists, _ = _attractor_check(env, lam, target, random_interior_states(grid, rng, n_starts),
                                    1e-6)
        return _report("no-recombination-same-sign", f"lambda={lam:.6g}",
                       {"attracted_to_edge14": max(dists) < 1e-6},
                       {"lambda_14": l14, "max_distance": max(dists)}, {"distance": 1e-6}, seed)
    run("no-recombination-same-sign", same_sign)

    # (iii) small lambda: fixation of the fittest gamete
    def fixation():
        env = _env(grid, *fam["fixation"])
        i = classify_fittest(env)
        l14 = edge_threshold(1, 4, env)
        lam = 0.05 * l14
        target = monomorphic(i, grid).state
        dists, _ = _attractor_check(env, lam, target, random_interior_states(grid, rng, n_starts),
                                    1e-4)
        return _report("no-recombination-fixation", f"fittest {i}, lambda={lam:.6g}",
                       {"fixation": max(dists) < 1e-4},
                       {"lambda_14": l14, "max_distance": max(dists)}, {"distance": 1e-4}, seed)
    run("no-recombination-fixation", fixation)

    # (iv) stability of edge equilibria just above their thresholds
    def edge_signs():
        env = _env(grid, *fam["edge-stability"])
        i = classify_fittest(env)
        shared = [k for k in GAMETES if k not in (i, 5 - i)]
        thresholds = {}
        for j, k in itertools.combinations(GAMETES, 2):
            thresholds[(j, k)] = edge_threshold(j, k, env)
        checks, measured = {}, {"fittest": i, "thresholds": {f"{j}{k}": v for (j, k), v
                                                             in thresholds.items()}}
        pair = tuple(sorted(shared))
        if thresholds[pair] is not None:
            lam = 1.02 * thresholds[pair]
            bound = assess(edge_equilibrium(*pair, env, lam), env, SimParams(lam, 0.0)).leading_bound
            measured[f"bound_{pair[0]}{pair[1]}"] = bound
            checks[f"edge_{pair[0]}{pair[1]}_unstable"] = bound < -TOL_SPEC
        # edges through the fittest gamete: first to appear is stable, the other unstable
        through = {k: thresholds[tuple(sorted((i, k)))] for k in GAMETES if k != i}
        through = {k: v for k, v in through.items() if v is not None and k in shared + [5 - i]}
        if through:
            first = min(through, key=through.get)
            for k, lik in through.items():
                lam = 1.02 * lik
                eq = edge_equilibrium(*sorted((i, k)), env, lam)
                bound = assess(eq, env, SimParams(lam, 0.0)).leading_bound
                measured[f"bound_{min(i, k)}{max(i, k)}"] = bound
                if k == first:
                    checks[f"edge_{min(i, k)}{max(i, k)}_stable"] = bound > TOL_SPEC
                else:
                    checks[f"edge_{min(i, k)}{max(i, k)}_unstable"] = bound < -TOL_SPEC
        return _report("no-recombination-edge-stability", "lambda = 1.02 * threshold", checks,
                       measured, {"tol_spec": TOL_SPEC}, seed)
    run("no-recombination-edge-stability", edge_signs)

    # (v) internal equilibrium at large lambda under the four-quadrant condition
    def four_quadrant():
        env = _env(grid, *fam["four-quadrant"])
        lam = 50.0
        params = SimParams(lam, 0.0)
        found = []
        for st in random_interior_states(grid, rng, 3):
            final, _, _ = march(st, env, params, tol=1e-7, t_max=2e3)
            state, res, _, ok, _ = newton_gamete(final, env, params)
            found.append((ok, float(state.p.min()), res))
        internal = [ok and m > 10 * TOL_EQ for ok, m, _ in found]
        return _report("no-recombination-internal", f"lambda={lam:g}",
                       {"internal_equilibrium_found": any(internal)},
                       {"newton": found}, {"internal_floor": 10 * TOL_EQ}, seed)
    run("no-recombination-internal", four_quadrant)
    return reports


# ---------------------------------------------------------------------------
# Exploratory sweeps: measurements only, no verdict


def d0_curve(env, s, r_values, **kw):
    """Empirical d0 for each r in ``r_values``; no uniformity claim is made."""
    rows = []
    for r in r_values:
        rep = verify_large_d_global_stability(env, s, r, **kw)
        rows.append({"r": float(r), "d0_estimate": rep.measured.get("d0_estimate"),
                     "d0_bracket": rep.measured.get("d0_bracket")})
    return rows


def steepness_trend(env, lam, rhos, seed="auto"):
    """Quadrature L2 norm of the p_A gradient at the internal equilibrium for each rho.

    Rows whose search does not end at a converged internal equilibrium are
    kept with ``grad_pA`` set to None.
    """
    grid = env.grid
    rows = []
    for rho in sorted(rhos):
        params = SimParams(lam, rho)
        seeds = default_seeds(rho) if seed == "auto" else (seed,)
        eq = None
        for sd in seeds:
            try:
                eq = internal_equilibrium(env, params, seed=sd)
            except PreconditionError:  # seed edge absent at this lambda
                continue
            if eq.kind == "internal" and eq.converged:
                break
        ok = eq is not None and eq.kind == "internal" and eq.converged
        norm = None
        if ok:
            g = gradient(grid, eq.allele.pA)
            norm = float(math.sqrt(g**2 @ grid.weights))
        rows.append({"rho": float(rho), "grad_pA": norm,
                     "kind": eq.kind if eq is not None else "none"})
    return rows
