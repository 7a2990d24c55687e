"""Neumann eigenvalue problems with an indefinite weight.

For a weight h and multiplier lt > 0 we need the smallest eigenvalue mu1(lt) of

    -u'' - lt * h * u = mu * u,   u'(0) = u'(L) = 0.

The discrete operator ``-A - lt*diag(h)`` becomes symmetric after scaling by the
square roots of the trapezoid weights, so its spectrum is computed with a
symmetric tridiagonal eigensolver. Thresholds (the positive principal
eigenvalue and the derived trichotomies) are roots of mu1 in lt, found by a
bracketed root search that relies on mu1 being concave with mu1(0) = 0.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .environment import GAMETES, pair_weight
from .errors import EigenSolverError, PreconditionError, ThresholdOutOfRangeError
from .grid import Grid, apply_laplacian, spatial_average

TOL_EIG = 1e-11
ROOT_XTOL = 1e-10
LAMBDA_MIN = 1e-6
LAMBDA_MAX = 1e4
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class WeightedEigenProblem:
    grid: Grid
    weight: np.ndarray = field(repr=False)
    lam: float


@dataclass(frozen=True, eq=False)
class SpectralResult:
    mu: float
    psi: np.ndarray = field(repr=False)
    residual: float
    method: str = "eigh_tridiagonal"


@dataclass(frozen=True)
class ThresholdSet:
    lambda_star: Optional[float]
    lambda_0: float
    lambda_h: Optional[float]
    notes: tuple = ()


def _symmetric_bands(grid, weight, lam, shift=0.0):
    lower, diag, upper = grid.laplacian_bands
    w = grid.weights
    d = -diag - lam * np.asarray(weight, dtype=float) + shift
    off = -upper[:-1] * np.sqrt(w[:-1] / w[1:])
    return d, off


def _tol_floor(grid):
    # round-off floor of A @ psi, about eps * ||A||_inf
    return 16.0 * _EPS * 4.0 / grid.dx**2


def scalar_spectrum(grid, weight, lam, k=1, shift=0.0):
    """The ``k`` smallest eigenvalues of ``-A - lam*diag(weight) + shift``."""
    d, off = _symmetric_bands(grid, grid.check(weight, "weight"), lam, shift)
    k = min(int(k), grid.n_nodes)
    return eigh_tridiagonal(d, off, eigvals_only=True, select="i", select_range=(0, k - 1))


def smallest_eigenvalue(problem):
    """mu1 and its positive eigenfunction (normalised to max 1)."""
    grid = problem.grid
    weight = grid.check(problem.weight, "weight")
    d, off = _symmetric_bands(grid, weight, problem.lam)
    vals, vecs = eigh_tridiagonal(d, off, select="i", select_range=(0, 0))
    mu = float(vals[0])
    psi = vecs[:, 0] / np.sqrt(grid.weights)
    psi = psi / psi[np.argmax(np.abs(psi))]
    residual = float(np.abs(apply_laplacian(grid, psi) + problem.lam * weight * psi + mu * psi).max())
    if residual > TOL_EIG * (1.0 + abs(mu)) + _tol_floor(grid):
        raise EigenSolverError(f"eigenpair residual {residual:.3e} too large", residual)
    return SpectralResult(mu, psi, residual)


def mu1(grid, weight, lam):
    return float(scalar_spectrum(grid, weight, lam, 1)[0])


def _is_zero(h):
    return not np.any(h)


def _mean_tol(h):
    return 1e-10 * float(np.abs(h).max())


def lambda_star(h, grid, lambda_max=LAMBDA_MAX):
    """Positive root of mu1, or None when h does not change sign or has mean >= 0."""
    h = grid.check(h, "weight")
    if not (h.min() < 0.0 < h.max()):
        return None
    if spatial_average(grid, h) >= -_mean_tol(h):
        return None

    def f(lam):
        return mu1(grid, h, lam)

    # locate a bracket around lt = 1 by halving/doubling
    lo = hi = 1.0
    if f(1.0) > 0.0:
        limit = lambda_max
        expansions = 0
        hi = 2.0
        while f(hi) >= 0.0:
            if hi >= limit:
                if expansions == 2:
                    raise ThresholdOutOfRangeError(
                        f"no sign change of mu1 up to {limit:g}", lambda_max=limit)
                limit *= 10.0
                expansions += 1
            lo = hi
            hi = min(2.0 * hi, limit)
    else:
        lo = 0.5
        while f(lo) <= 0.0:
            if lo <= LAMBDA_MIN:
                raise ThresholdOutOfRangeError(
                    f"mu1 not positive down to {LAMBDA_MIN:g}", lambda_max=lambda_max)
            hi = lo
            lo = max(0.5 * lo, LAMBDA_MIN)
    return float(brentq(f, lo, hi, xtol=ROOT_XTOL * max(1.0, lo), rtol=4 * _EPS, maxiter=200))


def lambda_0(h, grid):
    """Threshold trichotomy: lambda_star(h), 0 (mean >= 0) or inf (h <= 0)."""
    h = grid.check(h, "weight")
    if _is_zero(h):
        raise PreconditionError("lambda_0 is undefined for h == 0")
    if h.max() <= 0.0:
        return math.inf
    if spatial_average(grid, h) >= -_mean_tol(h):
        return 0.0
    return lambda_star(h, grid)


def lambda_h(h, grid):
    """Single-locus cline threshold for a sign-changing weight."""
    h = grid.check(h, "weight")
    if not (h.min() < 0.0 < h.max()):
        raise PreconditionError("lambda_h needs a sign-changing weight")
    mean = spatial_average(grid, h)
    tol = _mean_tol(h)
    if mean < -tol:
        return lambda_star(h, grid)
    if mean > tol:
        return lambda_star(-h, grid)
    return 0.0


def lambda_0_rho(h, rho, grid, lambda_max=LAMBDA_MAX):
    """Unique lam > lambda_0(h) with mu1(lam) + rho = 0 (inf for h <= 0 or h == 0)."""
    h = grid.check(h, "weight")
    if rho < 0:
        raise PreconditionError("rho must be nonnegative")
    if _is_zero(h):
        return math.inf
    base = lambda_0(h, grid)
    if rho == 0 or math.isinf(base):
        return base

    def g(lam):
        return mu1(grid, h, lam) + rho

    lo = base
    hi = max(2.0 * base, 1.0)
    limit = lambda_max
    expansions = 0
    while g(hi) >= 0.0:
        if hi >= limit:
            if expansions == 2:
                raise ThresholdOutOfRangeError(
                    f"mu1 + rho stays positive up to {limit:g}", lambda_max=limit)
            limit *= 10.0
            expansions += 1
        lo = hi
        hi = min(2.0 * hi, limit)
    return float(brentq(g, lo, hi, xtol=ROOT_XTOL * max(1.0, lo), rtol=4 * _EPS, maxiter=200))


def partner(j):
    """The gamete sharing no allele with j."""
    return 5 - j


def lambda_j_star(j, env, rho):
    """Stability threshold of the monomorphic state M_j."""
    if j not in GAMETES:
        raise PreconditionError(f"gamete index {j} not in 1..4")
    grid = env.grid
    jt = partner(j)
    values = []
    for i in GAMETES:
        if i in (j, jt):
            continue
        h = pair_weight(env, i, j)
        values.append(math.inf if _is_zero(h) else lambda_0(h, grid))
    values.append(lambda_0_rho(pair_weight(env, jt, j), rho, grid))
    return min(values)


def thresholds(h, grid):
    """lambda_star, lambda_0 and (for sign-changing h) lambda_h of one weight."""
    h = grid.check(h, "weight")
    notes = []
    lh = None
    if h.min() < 0.0 < h.max():
        lh = lambda_h(h, grid)
    else:
        notes.append("weight does not change sign; lambda_h undefined")
    return ThresholdSet(lambda_star(h, grid), lambda_0(h, grid), lh, tuple(notes))


def richardson(coarse, fine, order=2):
    """Extrapolate values on spacings dx and dx/2."""
    return fine + (fine - coarse) / (2**order - 1)


def extrapolated_lambda_star(profile, length, n_nodes):
    """lambda_star on N and 2N-1 nodes, Richardson-extrapolated (second order)."""
    from .grid import build_grid

    values = []
    for n in (n_nodes, 2 * n_nodes - 1):
        g = build_grid(length, n)
        values.append(lambda_star(profile.sample(g), g))
    if values[0] is None or values[1] is None:
        return None, values
    return richardson(values[0], values[1]), values
