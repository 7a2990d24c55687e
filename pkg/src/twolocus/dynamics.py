"""Time evolution of the two-locus system in gamete and allele coordinates.

Gamete coordinates (p1..p4 for AB, Ab, aB, ab) evolve by

    dp_i/dt = p_i'' + lam * S_i(x, p) - eta_i * rho * D,   eta = (1, -1, -1, 1),

and the equivalent allele coordinates (pA, pB, D) by

    dpA/dt = pA'' + lam*alpha*pA(1-pA) + lam*beta*D
    dpB/dt = pB'' + lam*beta*pB(1-pB) + lam*alpha*D
    dD/dt  = D'' + 2 pA' pB' + lam*(alpha(1-2pA) + beta(1-2pB)) D - rho*D.

Both steppers are IMEX: diffusion is backward Euler (one tridiagonal solve per
component), reaction is forward Euler, and the linear recombination sink is
treated implicitly where it is stiff.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as kernels
from .errors import (PreconditionError, StateInvariantError, StepRejectedError,
                     UnsupportedRepresentationError)
from .grid import apply_laplacian, gradient

ETA = kernels.ETA
DRIFT_TOL = 1e-9
SIMPLEX_TOL = 1e-12


@dataclass(eq=False)
class GameteState:
    """Gamete frequencies stacked as ``p`` with shape (4, N)."""

    p: np.ndarray

    def __post_init__(self):
        self.p = np.array(self.p, dtype=float)
        if self.p.ndim != 2 or self.p.shape[0] != 4:
            raise StateInvariantError(f"gamete state needs shape (4, N), got {self.p.shape}")

    @classmethod
    def from_components(cls, p1, p2, p3, p4):
        return cls(np.stack([np.asarray(v, dtype=float) for v in (p1, p2, p3, p4)]))

    @classmethod
    def constant(cls, freqs, n_nodes):
        return cls(np.repeat(np.asarray(freqs, dtype=float)[:, None], n_nodes, axis=1))

    @property
    def n_nodes(self):
        return self.p.shape[1]

    @property
    def linkage(self):
        p1, p2, p3, p4 = self.p
        return p1 * p4 - p2 * p3

    def simplex_violation(self):
        return max(float(-self.p.min()), float(np.abs(self.p.sum(axis=0) - 1.0).max()), 0.0)

    def copy(self):
        return GameteState(self.p.copy())


@dataclass(eq=False)
class AlleleState:
    pA: np.ndarray
    pB: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        self.pA = np.array(self.pA, dtype=float)
        self.pB = np.array(self.pB, dtype=float)
        self.D = np.array(self.D, dtype=float)
        if not (self.pA.shape == self.pB.shape == self.D.shape):
            raise StateInvariantError("pA, pB and D must have the same shape")

    @property
    def stacked(self):
        return np.stack([self.pA, self.pB, self.D])

    def bound_violation(self):
        pa, pb, d = self.pA, self.pB, self.D
        lo = -np.minimum(pa * pb, (1 - pa) * (1 - pb))
        hi = np.minimum(pa * (1 - pb), (1 - pa) * pb)
        return max(float(-pa.min()), float((pa - 1).max()), float(-pb.min()),
                   float((pb - 1).max()), float((lo - d).max()), float((d - hi).max()), 0.0)


@dataclass(frozen=True)
class SimParams:
    """Scaled parameters lam = s/d and rho = r/d; raw (d, s, r) kept when given."""

    lam: float
    rho: float = 0.0
    d: Optional[float] = None
    s: Optional[float] = None
    r: Optional[float] = None

    def __post_init__(self):
        if not self.lam >= 0:
            raise PreconditionError(f"lambda must be nonnegative, got {self.lam}")
        if not self.rho >= 0:
            raise PreconditionError(f"rho must be nonnegative, got {self.rho}")

    @classmethod
    def from_raw(cls, d, s, r):
        if d <= 0 or s <= 0 or r < 0:
            raise PreconditionError("need d > 0, s > 0, r >= 0")
        return cls(s / d, r / d, d=d, s=s, r=r)

    @property
    def epsilon(self):
        if self.rho <= 0:
            raise PreconditionError("epsilon = 1/rho needs rho > 0")
        return 1.0 / self.rho

    def with_(self, **changes):
        values = {"lam": self.lam, "rho": self.rho}
        values.update(changes)
        return SimParams(values["lam"], values["rho"])


# ---------------------------------------------------------------------------
# Coordinate changes


def gamete_to_allele(g, tol=DRIFT_TOL):
    if g.simplex_violation() > tol:
        raise StateInvariantError(f"simplex violated by {g.simplex_violation():.3e}")
    p1, p2, p3, p4 = g.p
    return AlleleState(p1 + p2, p1 + p3, p1 * p4 - p2 * p3)


def allele_to_gamete(a, tol=DRIFT_TOL):
    if a.bound_violation() > tol:
        raise StateInvariantError(f"allele constraints violated by {a.bound_violation():.3e}")
    pa, pb, d = a.pA, a.pB, a.D
    return GameteState.from_components(
        pa * pb + d, pa * (1 - pb) - d, (1 - pa) * pb - d, (1 - pa) * (1 - pb) + d)


# ---------------------------------------------------------------------------
# Right-hand sides


def gamete_rates(p, env, params):
    """Reaction part lam*S_i - eta_i*rho*D, shape (4, N)."""
    return kernels.gamete_rates_np(np.asarray(p, dtype=float), env.alpha, env.beta,
                                   params.lam, params.rho)


def reaction_jacobian(p, env, params):
    """Nodewise derivative of lam*S_i - eta_i*rho*D w.r.t. p_k, shape (4, 4, N)."""
    p1, p2, p3, p4 = np.asarray(p, dtype=float)
    a, b, lam, rho = env.alpha, env.beta, params.lam, params.rho
    ds = np.array([
        [a * (p3 + p4) + b * (p2 + p4), p1 * b, p1 * a, p1 * (a + b)],
        [-p2 * b, a * (p3 + p4) - b * (p1 + p3), p2 * (a - b), p2 * a],
        [-p3 * a, p3 * (b - a), -a * (p1 + p2) + b * (p2 + p4), p3 * b],
        [-p4 * (a + b), -p4 * a, -p4 * b, -a * (p1 + p2) - b * (p1 + p3)],
    ])
    dd = np.array([p4, -p3, -p2, p1])
    return lam * ds - rho * ETA[:, None, None] * dd[None, :, :]


def stationary_residual(state, env, params):
    """Sup norm of the discrete stationary gamete system at ``state``."""
    p = state.p if isinstance(state, GameteState) else np.asarray(state)
    return float(np.abs(apply_laplacian(env.grid, p) + gamete_rates(p, env, params)).max())


def default_dt(env, params):
    """Time step used when none is given: min(2.5*dx^2, 0.1 / (lam*max|alpha, beta|))."""
    dt = 0.25 * env.grid.dx**2 * 10.0
    scale = params.lam * env.sup_norm
    if scale > 0:
        dt = min(dt, 0.1 / scale)
    return dt


def search_dt(env, params):
    """Larger step for equilibrium searches; the explicit parts stay stable."""
    dt = 0.1 / max(params.lam * env.sup_norm, 1e-12)
    if params.rho > 0:
        dt = min(dt, 0.5 / params.rho)
    return min(dt, 1.0)


def _implicit_diffusion(grid, dt, sink=0.0):
    return kernels.implicit_factor(grid.laplacian_bands, dt, sink)


class GameteStepper:
    """Reusable IMEX stepper in gamete coordinates.

    ``sink`` selects the treatment of the recombination term: "explicit",
    "implicit" (D replaced by D/(1 + rho*dt)), or "auto" (implicit iff
    rho*dt > 1).
    """

    def __init__(self, env, params, dt, sink="auto"):
        if not dt > 0:
            raise PreconditionError("dt must be positive")
        if sink not in ("auto", "implicit", "explicit"):
            raise ValueError(f"unknown sink treatment {sink!r}")
        self.env, self.params, self.dt = env, params, float(dt)
        implicit = sink == "implicit" or (sink == "auto" and params.rho * dt > 1.0)
        self.implicit_sink = implicit
        self.rho_eff = params.rho / (1.0 + params.rho * dt) if implicit else params.rho
        self.factor = _implicit_diffusion(env.grid, dt)

    def advance(self, p, n_steps, tol=0.0, drift_tol=DRIFT_TOL):
        """March ``p`` in place; returns (steps, residual, max_drift, status)."""
        return kernels.march_gamete(p, self.env.alpha, self.env.beta, self.params.lam,
                                    self.rho_eff, self.dt, self.factor, n_steps, tol,
                                    drift_tol)


class AlleleStepper:
    """IMEX stepper in (pA, pB, D) coordinates; the -D/eps sink is implicit."""

    def __init__(self, env, params, dt):
        if params.rho <= 0:
            raise UnsupportedRepresentationError(
                "allele stepping needs rho > 0; use the gamete stepper for rho = 0")
        if not dt > 0:
            raise PreconditionError("dt must be positive")
        self.env, self.params, self.dt = env, params, float(dt)
        self.factor = _implicit_diffusion(env.grid, dt)
        self.factor_d = _implicit_diffusion(env.grid, dt, sink=params.rho)

    def advance(self, q, n_steps, tol=0.0, drift_tol=DRIFT_TOL):
        return kernels.march_allele(q, self.env.alpha, self.env.beta, self.params.lam,
                                    self.dt, self.env.grid.dx, self.factor, self.factor_d,
                                    n_steps, tol, drift_tol)


def _raise_rejected(drift):
    raise StepRejectedError(f"invariant drift {drift:.3e} exceeds {DRIFT_TOL:g}")


def step_gamete(state, env, params, dt, sink="auto"):
    p = state.p.copy()
    _, _, drift, status = GameteStepper(env, params, dt, sink).advance(p, 1)
    if status == kernels.REJECTED:
        _raise_rejected(drift)
    return GameteState(p)


def step_allele(state, env, params, dt):
    q = state.stacked
    _, _, drift, status = AlleleStepper(env, params, dt).advance(q, 1)
    if status == kernels.REJECTED:
        _raise_rejected(drift)
    return AlleleState(*q)


# ---------------------------------------------------------------------------
# Diagnostics


def compute_kappa(a):
    """Persistence functional: min over nodes of min(pA, 1-pA, pB, 1-pB)."""
    return float(np.min([a.pA, 1 - a.pA, a.pB, 1 - a.pB]))


def _ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    degenerate = den == 0
    out[degenerate] = np.where(num[degenerate] < 0, -np.inf, np.inf)
    out[degenerate & (num == 0)] = 0.0
    return out


def linkage_ratios(a):
    """D_A = D/(pA(1-pA)) and D_B = D/(pB(1-pB)); degenerate nodes hold +-inf."""
    return _ratio(a.D, a.pA * (1 - a.pA)), _ratio(a.D, a.pB * (1 - a.pB))


def gradient_ratio(a, grid):
    """sup over nodes of |pA'|/(pA(1-pA)) + |pB'|/(pB(1-pB))."""
    ga = np.abs(gradient(grid, a.pA))
    gb = np.abs(gradient(grid, a.pB))
    total = _ratio(ga, a.pA * (1 - a.pA)) + _ratio(gb, a.pB * (1 - a.pB))
    return float(total.max())


def diagnostics_row(t, state, env, params):
    g = state if isinstance(state, GameteState) else allele_to_gamete(state, tol=math.inf)
    a = gamete_to_allele(g, tol=math.inf)
    return {
        "t": float(t),
        "residual": stationary_residual(g, env, params),
        "kappa": compute_kappa(a),
        "max_abs_D": float(np.abs(a.D).max()),
        "gradient_ratio": gradient_ratio(a, env.grid),
    }


@dataclass(eq=False)
class RunResult:
    converged: bool
    t: float
    steps: int
    residual: float
    state: GameteState
    max_drift: float
    dt: float
    diagnostics: list = field(default_factory=list)
    profiles: dict = field(default_factory=dict)

    @property
    def allele(self):
        return gamete_to_allele(self.state, tol=math.inf)


def run_to_equilibrium(state, env, params, representation="gamete", tol=1e-8,
                       t_max=100.0, dt=None, sample_times=(), sink="auto"):
    """March until ||state_{n+1} - state_n||_inf / dt < tol or t >= t_max.

    ``state`` may be a GameteState or an AlleleState; the result always holds a
    GameteState. Diagnostics rows (and full profiles) are recorded at the
    requested sample times that are reached before stopping; non-convergence is
    reported through ``converged``, not raised.
    """
    if not tol >= 0:
        raise PreconditionError("tol must be nonnegative")
    if dt is None:
        dt = default_dt(env, params)
    if representation == "gamete":
        g = state if isinstance(state, GameteState) else allele_to_gamete(state)
        work = g.p.copy()
        stepper = GameteStepper(env, params, dt, sink)

        def snapshot():
            return GameteState(work.copy())
    elif representation == "allele":
        a = state if isinstance(state, AlleleState) else gamete_to_allele(state)
        work = a.stacked
        stepper = AlleleStepper(env, params, dt)

        def snapshot():
            return allele_to_gamete(AlleleState(*work.copy()), tol=math.inf)
    else:
        raise ValueError(f"unknown representation {representation!r}")

    samples = sorted({float(s) for s in sample_times if 0.0 <= s <= t_max})
    total_steps = int(math.ceil(t_max / dt - 1e-9))
    stops = sorted({min(int(round(s / dt)), total_steps) for s in samples} | {total_steps})
    result = RunResult(False, 0.0, 0, math.inf, None, 0.0, dt)

    def record(step):
        snap = snapshot()
        t = step * dt
        result.diagnostics.append(diagnostics_row(t, snap, env, params))
        result.profiles[t] = snap

    done = 0
    if 0 in stops and samples:
        record(0)
    for stop in stops:
        n = stop - done
        if n <= 0:
            continue
        taken, residual, drift, status = stepper.advance(work, n, tol)
        done += taken
        result.max_drift = max(result.max_drift, drift)
        if status == kernels.REJECTED:
            _raise_rejected(drift)
        result.residual = residual
        if status == kernels.CONVERGED:
            result.converged = True
            break
        if samples and stop in {min(int(round(s / dt)), total_steps) for s in samples}:
            record(done)
    result.steps = done
    result.t = done * dt
    result.state = snapshot()
    return result
