"""Stationary states: monomorphic vertices, single-locus clines, edge and internal equilibria.

All solvers target the same discrete stationary system that the time steppers
march towards, so a residual reported here is directly comparable with the
step residual of :func:`twolocus.dynamics.run_to_equilibrium`.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from . import _kernels as kernels
from .dynamics import (ETA, GameteState, GameteStepper, SimParams, gamete_rates,
                       gamete_to_allele, reaction_jacobian, search_dt, stationary_residual)
from .environment import GAMETES, changes_sign, pair_weight
from .errors import DegenerateEquilibriumError, PreconditionError, StepRejectedError
from .grid import apply_laplacian, spatial_average
from .spectral import lambda_h, mu1

TOL_EQ = 1e-11
MARCH_TOL = 1e-6
TOL_SPEC = 1e-7
_EPS = np.finfo(float).eps


def effective_tol(grid, tol=TOL_EQ):
    """``tol`` raised to the round-off floor of the discrete Laplacian.

    Residuals of A @ u cannot be resolved below roughly eps * ||A||_inf =
    4 eps / dx^2, so very fine grids cannot reach 1e-11.
    """
    return max(tol, 8.0 * _EPS / grid.dx**2)


@dataclass(eq=False)
class EquilibriumProfile:
    """A stationary gamete profile.

    ``kind`` is one of "monomorphic", "edge", "internal", "boundary-limit" or
    "trivial-theta"; ``gametes`` lists the supporting gamete indices.
    """

    state: GameteState
    kind: str
    gametes: tuple
    residual: float
    converged: bool = True
    theta: Optional[np.ndarray] = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def allele(self):
        return gamete_to_allele(self.state, tol=math.inf)

    @property
    def min_component(self):
        return float(self.state.p.min())


@dataclass(eq=False)
class Cline:
    """Single-locus stationary profile theta_h with its trichotomy class."""

    theta: np.ndarray
    kind: str  # "zero", "one" or "internal"
    residual: float
    lambda_h: float
    converged: bool = True
    meta: dict = field(default_factory=dict)


@dataclass(eq=False)
class SensitivityField:
    """d p_i / d rho at rho = 0 along the internal branch leaving the 14-edge."""

    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    theta: np.ndarray
    residual: float

    @property
    def u4(self):
        return -(self.u1 + self.u2 + self.u3)

    @property
    def stacked(self):
        return np.stack([self.u1, self.u2, self.u3, self.u4])


# ---------------------------------------------------------------------------
# Damped Newton


def damped_newton(residual_fn, solve_fn, u0, tol, max_iter=60, max_halvings=30):
    """Newton with step halving until the sup-norm residual decreases.

    ``solve_fn(u, r)`` returns the Newton update ``J(u)^{-1} r``. Returns
    (u, residual, iterations, converged, info) where ``info`` notes a singular
    Jacobian or a stagnated line search.
    """
    u = np.array(u0, dtype=float)
    r = residual_fn(u)
    res = float(np.abs(r).max())
    info = {}
    for it in range(max_iter):
        if res <= tol:
            return u, res, it, True, info
        delta = solve_fn(u, r)
        if not np.all(np.isfinite(delta)):
            info["singular_jacobian"] = True
            return u, res, it, False, info
        step = 1.0
        for _ in range(max_halvings + 1):
            trial = u - step * delta
            r_trial = residual_fn(trial)
            res_trial = float(np.abs(r_trial).max())
            if res_trial < res:
                break
            step *= 0.5
        else:
            info["stagnated"] = True
            return u, res, it, res <= tol, info
        u, r, res = trial, r_trial, res_trial
    return u, res, max_iter, res <= tol, info


# ---------------------------------------------------------------------------
# Monomorphic states


def monomorphic(i, grid):
    if i not in GAMETES:
        raise PreconditionError(f"gamete index {i} not in 1..4")
    p = np.zeros((4, grid.n_nodes))
    p[i - 1] = 1.0
    return EquilibriumProfile(GameteState(p), "monomorphic", (i,), 0.0)


# ---------------------------------------------------------------------------
# Single-locus clines


def scalar_residual(grid, h, lam, theta):
    return apply_laplacian(grid, theta) + lam * h * theta * (1.0 - theta)


def march_single_locus(h, lam, grid, theta0=0.5, tol=MARCH_TOL, t_max=1e4, dt=None):
    """Time-march theta_t = theta'' + lam*h*theta(1-theta); returns (theta, t, residual, converged)."""
    h = np.ascontiguousarray(grid.check(h, "weight"))
    theta = np.array(np.broadcast_to(theta0, (grid.n_nodes,)), dtype=float)
    if dt is None:
        dt = min(0.1 / max(lam * float(np.abs(h).max()), 1e-12), 1.0)
    factor = kernels.implicit_factor(grid.laplacian_bands, dt)
    max_steps = int(math.ceil(t_max / dt))
    steps, residual, status = kernels.march_scalar(theta, h, lam, dt, factor, max_steps, tol)
    return theta, steps * dt, residual, status == kernels.CONVERGED


def newton_single_locus(h, lam, grid, theta, tol=TOL_EQ, max_iter=60):
    lower, diag, upper = grid.laplacian_bands
    tol = effective_tol(grid, tol)

    def residual_fn(t):
        return scalar_residual(grid, h, lam, t)

    def solve_fn(t, r):
        return kernels.tridiag_solve(lower, diag + lam * h * (1.0 - 2.0 * t), upper, r)

    return damped_newton(residual_fn, solve_fn, theta, tol, max_iter)


def single_locus_cline(h, lam, grid, tol=TOL_EQ, t_max=1e4):
    """theta_h for a sign-changing weight, classified by the lambda_h trichotomy."""
    h = grid.check(h, "weight")
    if not changes_sign(h):
        raise PreconditionError("single_locus_cline needs a sign-changing weight")
    lh = lambda_h(h, grid)
    mean = spatial_average(grid, h)
    scale = 1e-10 * float(np.abs(h).max())
    if lam <= lh and mean < -scale:
        return Cline(np.zeros(grid.n_nodes), "zero", 0.0, lh)
    if lam <= lh and mean > scale:
        return Cline(np.ones(grid.n_nodes), "one", 0.0, lh)
    theta, t, _, _ = march_single_locus(h, lam, grid, 0.5, MARCH_TOL, t_max)
    theta, res, its, ok, info = newton_single_locus(h, lam, grid, theta, tol)
    if not ok:
        # Newton failed to reach tol: march longer from the current iterate and retry
        theta, t2, _, _ = march_single_locus(h, lam, grid, theta, 0.1 * MARCH_TOL, 10 * t_max)
        theta, res, its2, ok, info = newton_single_locus(h, lam, grid, theta, tol)
        t += t2
        its += its2
    meta = {"march_time": t, "newton_iterations": its, **info}
    return Cline(theta, "internal", res, lh, ok, meta)


# ---------------------------------------------------------------------------
# Edge equilibria


def edge_threshold(i, j, env):
    """lambda_ij, the existence threshold of the edge equilibrium (None without sign change)."""
    h = pair_weight(env, i, j)
    if not changes_sign(h):
        return None
    return lambda_h(h, env.grid)


def edge_equilibrium(i, j, env, lam, rho=0.0, tol=TOL_EQ):
    """Edge equilibrium on gametes i < j, or None when it does not exist."""
    if not (i in GAMETES and j in GAMETES and i < j):
        raise PreconditionError(f"need gametes 1 <= i < j <= 4, got ({i}, {j})")
    lij = edge_threshold(i, j, env)
    if lij is None or lam <= lij:
        return None
    cline = single_locus_cline(pair_weight(env, i, j), lam, env.grid, tol)
    p = np.zeros((4, env.grid.n_nodes))
    p[i - 1] = cline.theta
    p[j - 1] = 1.0 - cline.theta
    state = GameteState(p)
    res0 = stationary_residual(state, env, SimParams(lam, 0.0))
    meta = {
        "lambda_ij": lij,
        "rho_admissible": {i, j} not in ({1, 4}, {2, 3}),
        "residual_rho0": res0,
        "residual_at_rho": stationary_residual(state, env, SimParams(lam, rho)),
        "newton": cline.meta,
    }
    return EquilibriumProfile(state, "edge", (i, j), res0, cline.converged, cline.theta, meta)


# ---------------------------------------------------------------------------
# Two-locus Newton


def stationary_jacobian(p, env, params, eliminate=4):
    """Sparse Jacobian of the stationary system reduced by the simplex identity.

    The unknowns are the three gametes other than ``eliminate``; the
    eliminated component is recovered as one minus the others. Rows are the
    equations of the same three gametes.
    """
    grid = env.grid
    jac = reaction_jacobian(p, env, params)
    keep = [k for k in range(4) if k != eliminate - 1]
    e = eliminate - 1
    lap = grid.laplacian_matrix
    blocks = []
    for i in keep:
        row = []
        for k in keep:
            d = sp.diags(jac[i, k] - jac[i, e])
            row.append(lap + d if i == k else d)
        blocks.append(row)
    return sp.bmat(blocks, format="csc"), keep


def _full_from_reduced(u, n, keep):
    p = np.empty((4, n))
    e = ({0, 1, 2, 3} - set(keep)).pop()
    p[keep] = u.reshape(3, n)
    p[e] = 1.0 - p[keep].sum(axis=0)
    return p


def newton_gamete(state, env, params, tol=TOL_EQ, max_iter=60, eliminate=4):
    """Damped Newton on the full stationary system; returns (GameteState, residual, its, ok, info)."""
    grid = env.grid
    n = grid.n_nodes
    keep = [k for k in range(4) if k != eliminate - 1]
    tol = effective_tol(grid, tol)

    def residual_fn(u):
        p = _full_from_reduced(u, n, keep)
        return (apply_laplacian(grid, p) + gamete_rates(p, env, params))[keep].ravel()

    def solve_fn(u, r):
        mat, _ = stationary_jacobian(_full_from_reduced(u, n, keep), env, params, eliminate)
        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            try:
                return spsolve(mat, r)
            except (MatrixRankWarning, RuntimeError):
                return np.full(r.size, np.nan)

    u0 = np.asarray(state.p, dtype=float)[keep].ravel()
    u, res, its, ok, info = damped_newton(residual_fn, solve_fn, u0, tol, max_iter)
    if info.get("singular_jacobian"):
        mat, _ = stationary_jacobian(_full_from_reduced(u, n, keep), env, params, eliminate)
        info["condition_estimate"] = (float(np.linalg.cond(mat.toarray()))
                                      if mat.shape[0] <= 1536 else math.inf)
    return GameteState(_full_from_reduced(u, n, keep)), res, its, ok, info


def march_gamete(state, env, params, tol=MARCH_TOL, t_max=2e3, dt=None):
    """March towards a stationary state; returns (GameteState, t, residual, converged).

    Uses the gamete stepper with a reaction-limited step; the recombination
    sink switches to implicit treatment when it would be stiff.
    """
    if dt is None:
        dt = search_dt(env, params)
    p = state.p.copy()
    stepper = GameteStepper(env, params, dt, "auto")
    steps, residual, drift, status = stepper.advance(p, int(math.ceil(t_max / dt)), tol)
    if status == kernels.REJECTED:
        raise StepRejectedError(f"invariant drift {drift:.3e} during equilibrium search")
    return GameteState(p), steps * dt, residual, status == kernels.CONVERGED


def _cline_or_trivial(h, lam, grid):
    if changes_sign(h):
        return single_locus_cline(h, lam, grid).theta
    return np.ones(grid.n_nodes) if spatial_average(grid, h) > 0 else np.zeros(grid.n_nodes)


def product_seed(env, lam, margin=0.02):
    """Linkage-equilibrium state built from the two single-locus clines, pushed inside."""
    grid = env.grid
    pa = np.clip(_cline_or_trivial(env.alpha, lam, grid), margin, 1 - margin)
    pb = np.clip(_cline_or_trivial(env.beta, lam, grid), margin, 1 - margin)
    return GameteState.from_components(pa * pb, pa * (1 - pb), (1 - pa) * pb,
                                       (1 - pa) * (1 - pb))


def seed_state(seed, env, params):
    if isinstance(seed, GameteState):
        return seed
    if seed == "product-cline":
        return product_seed(env, params.lam)
    if seed in ("edge14", "edge23"):
        i, j = (1, 4) if seed == "edge14" else (2, 3)
        edge = edge_equilibrium(i, j, env, params.lam)
        if edge is None:
            raise PreconditionError(f"{seed} seed requested but the edge equilibrium does not exist")
        return edge.state
    raise PreconditionError(f"unknown seed {seed!r}")


def default_seeds(rho):
    """Seeding policy: product clines at strong, edges at weak, both in between."""
    if rho >= 10:
        return ["product-cline"]
    if rho <= 0.1:
        return ["edge14", "edge23"]
    return ["product-cline", "edge14", "edge23"]


def classify_profile(state, residual, converged, tol=TOL_EQ):
    if state.p.min() > 10.0 * tol:
        return "internal"
    return "boundary-limit"


def internal_equilibrium(env, params, seed="product-cline", tol=TOL_EQ, t_max=2e3,
                         march_tol=MARCH_TOL):
    """Internal equilibrium reached from ``seed`` by marching and Newton polishing.

    Returns an EquilibriumProfile whose ``kind`` is "internal" or, when the
    limit has a component at or below 10*tol, "boundary-limit". Failure to
    converge is reported through ``converged`` and ``meta``.
    """
    if params.rho <= 0:
        raise PreconditionError("internal_equilibrium needs rho > 0")
    start = seed_state(seed, env, params)
    marched, t, march_res, _ = march_gamete(start, env, params, march_tol, t_max)
    state, res, its, ok, info = newton_gamete(marched, env, params, tol)
    kind = classify_profile(state, res, ok, tol)
    meta = {"seed": seed if isinstance(seed, str) else "custom", "march_time": t,
            "march_residual": march_res, "newton_iterations": its, **info}
    return EquilibriumProfile(state, kind, (1, 2, 3, 4) if kind == "internal" else (),
                              res, ok, None, meta)


# ---------------------------------------------------------------------------
# Sensitivity of the 14-edge equilibrium to recombination


def _check_nondegenerate(grid, weight, lam, label):
    m = mu1(grid, weight, lam)
    if abs(m) < TOL_SPEC:
        raise DegenerateEquilibriumError(
            f"{label} operator has eigenvalue {m:.3e} ~ 0; sensitivity undefined")
    return m


def rho_sensitivity(env, lam, edge=None):
    """Solve for u = d p_hat / d rho at rho = 0, starting from the 14-edge equilibrium.

    u2 and u3 decouple:  u'' + lam*(h_k4 - h_14*theta) u + theta(1-theta) = 0,
    and u1 follows from  u1'' + lam*h_14(1-2theta) u1 - lam*theta(h_24 u2 + h_34 u3)
    = theta(1-theta).
    """
    grid = env.grid
    if edge is None:
        edge = edge_equilibrium(1, 4, env, lam)
    if edge is None:
        raise PreconditionError("the 14-edge equilibrium does not exist at this lambda")
    theta = edge.theta
    h14, h24, h34 = (pair_weight(env, i, 4) for i in (1, 2, 3))
    lower, diag, upper = grid.laplacian_bands
    src = theta * (1.0 - theta)
    u = {}
    for k, hk in ((2, h24), (3, h34)):
        w = hk - h14 * theta
        _check_nondegenerate(grid, w, lam, f"u{k}")
        u[k] = kernels.tridiag_solve(lower, diag + lam * w, upper, -src)
    w1 = h14 * (1.0 - 2.0 * theta)
    _check_nondegenerate(grid, w1, lam, "u1")
    rhs = src + lam * theta * (h24 * u[2] + h34 * u[3])
    u1 = kernels.tridiag_solve(lower, diag + lam * w1, upper, rhs)
    # residual of the assembled linear system (A + J) u = eta * D
    p = edge.state.p
    mat, keep = stationary_jacobian(p, env, SimParams(lam, 0.0))
    vec = np.concatenate([u1, u[2], u[3]])
    d = p[0] * p[3] - p[1] * p[2]
    target = np.concatenate([ETA[k] * d for k in keep])
    residual = float(np.abs(mat @ vec - target).max())
    return SensitivityField(u1, u[2], u[3], theta, residual)
