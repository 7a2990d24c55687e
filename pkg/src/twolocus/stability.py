"""Linear stability of stationary states.

Convention: perturbations phi solve phi'' + J phi + mu phi = 0, so the
discrete operator is L = -(A + J) and a state is linearly stable iff every
eigenvalue mu has positive real part. The four gamete perturbations sum to
zero; one of them is eliminated, leaving a 3N x 3N (generally nonsymmetric)
operator whose spectrum does not depend on which component is dropped.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigs

from .dynamics import GameteState, SimParams, stationary_residual
from .environment import GAMETES, pair_weight
from .equilibria import (TOL_SPEC, EquilibriumProfile, edge_equilibrium, effective_tol,
                         stationary_jacobian)
from .errors import EigenSolverError, PreconditionError
from .spectral import mu1, partner, scalar_spectrum

DENSE_LIMIT = 1536
CONVENTION = "phi'' + J phi + mu phi = 0; stable iff all Re(mu) > 0"


@dataclass(eq=False)
class LinearizedOperator:
    matrix: sp.spmatrix = field(repr=False)
    state: GameteState = field(repr=False)
    params: SimParams
    eliminate: int
    kind: str = "coupled"

    @property
    def size(self):
        return self.matrix.shape[0]


@dataclass(eq=False)
class SpectrumReport:
    leading_bound: float
    eigenvalues: np.ndarray
    verdict: str  # "stable", "unstable" or "marginal"
    method: str
    convention: str = CONVENTION

    @property
    def stable(self):
        return self.leading_bound > TOL_SPEC

    def as_dict(self):
        return {
            "leading_bound": self.leading_bound,
            "verdict": self.verdict,
            "eigenvalues_real": [float(v) for v in self.eigenvalues.real],
            "eigenvalues_imag": [float(v) for v in self.eigenvalues.imag],
            "method": self.method,
            "convention": self.convention,
        }


def verdict_of(bound, tol=TOL_SPEC):
    if abs(bound) < tol:
        return "marginal"
    return "stable" if bound > 0 else "unstable"


def assemble_linearization(eq, env, params, eliminate=4, check=True):
    """L = -(A + J_reduced) at ``eq`` (EquilibriumProfile or GameteState)."""
    state = eq.state if isinstance(eq, EquilibriumProfile) else eq
    if eliminate not in GAMETES:
        raise PreconditionError(f"cannot eliminate gamete {eliminate}")
    if check:
        res = stationary_residual(state, env, params)
        if res > 10.0 * effective_tol(env.grid):
            raise PreconditionError(
                f"linearization requested at a non-stationary state (residual {res:.3e})")
    mat, _ = stationary_jacobian(state.p, env, params, eliminate)
    return LinearizedOperator((-mat).tocsr(), state, params, eliminate)


def _sorted(vals):
    vals = np.asarray(vals, dtype=complex)
    return vals[np.lexsort((vals.imag, vals.real))]


def _gershgorin_lower(mat):
    mat = sp.csr_matrix(mat)
    diag = mat.diagonal()
    radius = np.asarray(abs(mat).sum(axis=1)).ravel() - np.abs(diag)
    return float((diag - radius).min())


def spectral_bound(op, k=8, method="auto"):
    """The ``k`` eigenvalues of smallest real part and the stability verdict.

    Dense LAPACK eigensolve when 3N <= 1536 (or ``method="dense"``); otherwise
    ARPACK shift-invert around a Gershgorin lower bound of the spectrum, which
    returns the eigenvalues nearest the left end of the spectrum.
    """
    if k < 1:
        raise PreconditionError("k must be >= 1")
    mat = op.matrix
    n = mat.shape[0]
    use_dense = method == "dense" or (method == "auto" and n <= DENSE_LIMIT)
    if use_dense:
        vals = _sorted(la.eigvals(mat.toarray()))[:k]
        used = "dense"
    else:
        sigma = _gershgorin_lower(mat) - 1.0
        nev = min(max(2 * k, k + 4), n - 2)
        try:
            vals = eigs(mat.tocsc(), k=nev, sigma=sigma, which="LM",
                        return_eigenvectors=False, tol=1e-12, maxiter=5000)
        except ArpackNoConvergence as exc:
            if n <= DENSE_LIMIT:
                vals = la.eigvals(mat.toarray())
            else:
                raise EigenSolverError("shift-invert eigensolver stagnated", math.nan) from exc
        vals = _sorted(vals)[:k]
        used = "shift-invert"
    bound = float(vals.real.min())
    return SpectrumReport(bound, vals, verdict_of(bound), used)


def assess(eq, env, params, k=8, eliminate=4):
    return spectral_bound(assemble_linearization(eq, env, params, eliminate), k)


# ---------------------------------------------------------------------------
# Decompositions into scalar problems


@dataclass(eq=False)
class DecomposedSpectrum:
    eigenvalues: np.ndarray
    families: dict
    principal: dict


def _merge(families, k):
    merged = np.sort(np.concatenate(list(families.values())))
    return merged[:k]


def monomorphic_spectrum_decomposed(j, env, params, k=8):
    """Spectrum at M_j as the union of three scalar weighted problems.

    For each gamete i sharing one allele with j the family is the spectrum of
    -u'' - lam*h_ij u; the partner family (no shared allele) is shifted by rho.
    """
    if j not in GAMETES:
        raise PreconditionError(f"gamete index {j} not in 1..4")
    grid, lam, rho = env.grid, params.lam, params.rho
    jt = partner(j)
    families = {}
    for i in GAMETES:
        if i == j:
            continue
        spec = scalar_spectrum(grid, pair_weight(env, i, j), lam, k)
        families[i] = spec + rho if i == jt else spec
    principal = {i: float(v[0]) for i, v in families.items()}
    return DecomposedSpectrum(_merge(families, k), families, principal)


def edge14_weights(env, theta):
    h14, h24, h34 = (pair_weight(env, i, 4) for i in (1, 2, 3))
    return {1: h14 * (1.0 - 2.0 * theta), 2: h24 - h14 * theta, 3: h34 - h14 * theta}


def edge14_spectrum_decomposed(env, lam, k=8, edge=None):
    """Spectrum at the 14-edge equilibrium (rho = 0) from three scalar problems.

    ``principal`` holds mu_1 of each family: family 1 is the within-edge
    stability of the cline, families 2 and 3 decide invasion by gametes 2, 3.
    """
    if edge is None:
        edge = edge_equilibrium(1, 4, env, lam)
    if edge is None:
        raise PreconditionError("the 14-edge equilibrium does not exist at this lambda")
    families = {m: scalar_spectrum(env.grid, w, lam, k)
                for m, w in edge14_weights(env, edge.theta).items()}
    principal = {m: float(v[0]) for m, v in families.items()}
    return DecomposedSpectrum(_merge(families, k), families, principal)


@dataclass(eq=False)
class ScalarOperator:
    """L_phi = -u'' - lam * h * (1 - 2 phi) u on the grid."""

    weight: np.ndarray = field(repr=False)
    lam: float
    smallest: float


def single_locus_operator(phi, h, lam, grid):
    phi = grid.check(phi, "phi")
    h = grid.check(h, "weight")
    w = h * (1.0 - 2.0 * phi)
    return ScalarOperator(w, float(lam), mu1(grid, w, lam))
