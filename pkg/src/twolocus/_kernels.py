"""Hot numerical loops: tridiagonal solves and fused IMEX time marching.

Every kernel exists twice: a numba ``@njit`` version and a numpy/LAPACK
version. The active backend is chosen at import time from the environment
variable ``TWOLOCUS_USE_NUMBA`` ("0", "false", "no" disable the JIT) and can be
switched at runtime with :func:`set_backend` or the :func:`backend` context
manager. Both paths implement the same arithmetic and agree to round-off.

Tridiagonal systems are stored as three length-N arrays ``lower``, ``diag``,
``upper`` with ``lower[k]`` multiplying ``x[k-1]`` and ``upper[k]`` multiplying
``x[k+1]`` in row ``k`` (``lower[0]`` and ``upper[-1]`` are ignored).
"""

import contextlib
import os

import numpy as np
from scipy.linalg import lapack

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f


# status codes returned by the march kernels
CONVERGED = 0
MAX_STEPS = 1
REJECTED = 2


def _env_backend():
    flag = os.environ.get("TWOLOCUS_USE_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "no", "off") or not NUMBA_AVAILABLE:
        return "numpy"
    return "numba"


_BACKEND = _env_backend()


def get_backend():
    return _BACKEND


def set_backend(name):
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not importable")
    _BACKEND = name


@contextlib.contextmanager
def backend(name):
    previous = _BACKEND
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


# ---------------------------------------------------------------------------
# Tridiagonal factorization


class TridiagonalFactor:
    """Factorization of a fixed tridiagonal matrix, reused across many solves."""

    def __init__(self, lower, diag, upper):
        self.lower = np.ascontiguousarray(lower, dtype=np.float64)
        self.diag = np.ascontiguousarray(diag, dtype=np.float64)
        self.upper = np.ascontiguousarray(upper, dtype=np.float64)
        self.n = self.diag.size
        self.cp, self.inv_den = _thomas_factor(self.lower, self.diag, self.upper)
        dl, d, du, du2, ipiv, info = lapack.dgttrf(
            self.lower[1:].copy(), self.diag.copy(), self.upper[:-1].copy())
        if info != 0:
            raise np.linalg.LinAlgError(f"dgttrf failed with info={info}")
        self._lu = (dl, d, du, du2, ipiv)

    def solve(self, rhs):
        """Solve for one right-hand side (1-D) or several stacked rows (2-D)."""
        rhs = np.asarray(rhs, dtype=np.float64)
        if _BACKEND == "numba":
            out = np.empty_like(rhs)
            if rhs.ndim == 1:
                _thomas_apply(self.lower, self.cp, self.inv_den, rhs, out)
            else:
                for row in range(rhs.shape[0]):
                    _thomas_apply(self.lower, self.cp, self.inv_den, rhs[row], out[row])
            return out
        return self._solve_lapack(rhs)

    def _solve_lapack(self, rhs):
        dl, d, du, du2, ipiv = self._lu
        b = rhs.T if rhs.ndim == 2 else rhs
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, np.array(b, order="F"))
        if info != 0:
            raise np.linalg.LinAlgError(f"dgttrs failed with info={info}")
        return np.ascontiguousarray(x.T if rhs.ndim == 2 else x)


def implicit_factor(lap_bands, dt, sink=0.0):
    """Factor ``(1 + dt*sink) I - dt*A`` for the Laplacian bands ``lap_bands``.

    The bands and ``dt``, ``sink`` are kept on the factor: the march kernels
    work in increment form, (I - dt A) delta = dt (A u + f), which keeps
    constant stationary states exactly fixed.
    """
    lower, diag, upper = (np.ascontiguousarray(b, dtype=np.float64) for b in lap_bands)
    factor = TridiagonalFactor(-dt * lower, 1.0 + dt * sink - dt * diag, -dt * upper)
    factor.lap = (lower, diag, upper)
    factor.dt = float(dt)
    factor.sink = float(sink)
    return factor


def apply_bands_np(lap, u):
    lower, diag, upper = lap
    out = diag * u
    out[..., 1:] += lower[1:] * u[..., :-1]
    out[..., :-1] += upper[:-1] * u[..., 1:]
    return out


@njit(cache=True)
def _bands_into(lower, diag, upper, u, out):
    n = u.size
    out[0] = diag[0] * u[0] + upper[0] * u[1]
    for k in range(1, n - 1):
        out[k] = diag[k] * u[k] + lower[k] * u[k - 1] + upper[k] * u[k + 1]
    out[n - 1] = diag[n - 1] * u[n - 1] + lower[n - 1] * u[n - 2]


def tridiag_solve(lower, diag, upper, rhs):
    """One-off tridiagonal solve (no pivoting on the numba path)."""
    return TridiagonalFactor(lower, diag, upper).solve(rhs)


@njit(cache=True)
def _thomas_factor(lower, diag, upper):
    n = diag.size
    cp = np.empty(n)
    inv_den = np.empty(n)
    inv_den[0] = 1.0 / diag[0]
    cp[0] = upper[0] * inv_den[0]
    for k in range(1, n):
        den = diag[k] - lower[k] * cp[k - 1]
        inv_den[k] = 1.0 / den
        cp[k] = upper[k] * inv_den[k] if k < n - 1 else 0.0
    return cp, inv_den


@njit(cache=True)
def _thomas_apply(lower, cp, inv_den, rhs, out):
    n = rhs.size
    out[0] = rhs[0] * inv_den[0]
    for k in range(1, n):
        out[k] = (rhs[k] - lower[k] * out[k - 1]) * inv_den[k]
    for k in range(n - 2, -1, -1):
        out[k] -= cp[k] * out[k + 1]


# ---------------------------------------------------------------------------
# Gamete representation


ETA = np.array([1.0, -1.0, -1.0, 1.0])


def gamete_rates_np(p, alpha, beta, lam, rho):
    """lam * S_i(x, p) - eta_i * rho * D for the four gametes, shape (4, N)."""
    p1, p2, p3, p4 = p
    d = p1 * p4 - p2 * p3
    out = np.empty_like(p)
    out[0] = lam * p1 * (alpha * (p3 + p4) + beta * (p2 + p4)) - rho * d
    out[1] = lam * p2 * (alpha * (p3 + p4) - beta * (p1 + p3)) + rho * d
    out[2] = lam * p3 * (-alpha * (p1 + p2) + beta * (p2 + p4)) + rho * d
    out[3] = lam * p4 * (-alpha * (p1 + p2) - beta * (p1 + p3)) - rho * d
    return out


@njit(cache=True)
def _march_gamete_nb(p, alpha, beta, lam, rho_eff, dt, lap_l, lap_d, lap_u, lower, cp, inv_den,
                     max_steps, tol, drift_tol):
    n = p.shape[1]
    rhs = np.empty((4, n))
    delta = np.empty((4, n))
    lap = np.empty((4, n))
    residual = np.inf
    max_drift = 0.0
    for step in range(max_steps):
        for i in range(4):
            _bands_into(lap_l, lap_d, lap_u, p[i], lap[i])
        for k in range(n):
            p1 = p[0, k]
            p2 = p[1, k]
            p3 = p[2, k]
            p4 = p[3, k]
            a = alpha[k]
            b = beta[k]
            d = p1 * p4 - p2 * p3
            rd = rho_eff * d
            rhs[0, k] = dt * (lap[0, k]
                              + lam * p1 * (a * (p3 + p4) + b * (p2 + p4)) - rd)
            rhs[1, k] = dt * (lap[1, k]
                              + lam * p2 * (a * (p3 + p4) - b * (p1 + p3)) + rd)
            rhs[2, k] = dt * (lap[2, k]
                              + lam * p3 * (-a * (p1 + p2) + b * (p2 + p4)) + rd)
            rhs[3, k] = dt * (lap[3, k]
                              + lam * p4 * (-a * (p1 + p2) - b * (p1 + p3)) - rd)
        for i in range(4):
            _thomas_apply(lower, cp, inv_den, rhs[i], delta[i])
        drift = 0.0
        change = 0.0
        for k in range(n):
            s = 0.0
            for i in range(4):
                v = p[i, k] + delta[i, k]
                s += v
                if -v > drift:
                    drift = -v
                c = abs(delta[i, k])
                if c > change:
                    change = c
            e = abs(s - 1.0)
            if e > drift:
                drift = e
        if drift > drift_tol:
            return step, residual, max(max_drift, drift), 2
        if drift > max_drift:
            max_drift = drift
        for i in range(4):
            for k in range(n):
                p[i, k] += delta[i, k]
        residual = change / dt
        if residual < tol:
            return step + 1, residual, max_drift, 0
    return max_steps, residual, max_drift, 1


def _march_gamete_np(p, alpha, beta, lam, rho_eff, dt, factor, max_steps, tol, drift_tol):
    residual = np.inf
    max_drift = 0.0
    for step in range(max_steps):
        rhs = dt * (apply_bands_np(factor.lap, p) + gamete_rates_np(p, alpha, beta, lam, rho_eff))
        delta = factor._solve_lapack(rhs)
        new = p + delta
        drift = max(float(-new.min()), float(np.abs(new.sum(axis=0) - 1.0).max()), 0.0)
        if drift > drift_tol:
            return step, residual, max(max_drift, drift), REJECTED
        max_drift = max(max_drift, drift)
        residual = float(np.abs(delta).max()) / dt
        p[...] = new
        if residual < tol:
            return step + 1, residual, max_drift, CONVERGED
    return max_steps, residual, max_drift, MAX_STEPS


def march_gamete(p, alpha, beta, lam, rho_eff, dt, factor, max_steps, tol=0.0,
                 drift_tol=1e-9):
    """Advance gamete frequencies ``p`` (4, N) in place by up to ``max_steps``.

    ``factor`` comes from :func:`implicit_factor` with the same ``dt``.
    Returns (steps, residual, max_drift, status); on REJECTED ``p`` holds the
    last accepted state.
    """
    if _BACKEND == "numba":
        return _march_gamete_nb(p, alpha, beta, float(lam), float(rho_eff), float(dt),
                                *factor.lap, factor.lower, factor.cp, factor.inv_den,
                                int(max_steps), float(tol), float(drift_tol))
    return _march_gamete_np(p, alpha, beta, lam, rho_eff, dt, factor, max_steps, tol,
                            drift_tol)


# ---------------------------------------------------------------------------
# Allele representation (pA, pB, D)


def centered_gradient_np(u, dx):
    g = np.zeros_like(u)
    g[..., 1:-1] = (u[..., 2:] - u[..., :-2]) / (2.0 * dx)
    return g


def allele_rates_np(q, alpha, beta, lam, dx):
    """Explicit part of the allele system; the -D/eps sink is excluded."""
    pa, pb, d = q
    out = np.empty_like(q)
    out[0] = lam * alpha * pa * (1.0 - pa) + lam * beta * d
    out[1] = lam * beta * pb * (1.0 - pb) + lam * alpha * d
    out[2] = (2.0 * centered_gradient_np(pa, dx) * centered_gradient_np(pb, dx)
              + lam * (alpha * (1.0 - 2.0 * pa) + beta * (1.0 - 2.0 * pb)) * d)
    return out


def _allele_drift_np(q):
    pa, pb, d = q
    lo = -np.minimum(pa * pb, (1.0 - pa) * (1.0 - pb))
    hi = np.minimum(pa * (1.0 - pb), (1.0 - pa) * pb)
    viol = max(float(-pa.min()), float((pa - 1.0).max()), float(-pb.min()),
               float((pb - 1.0).max()), float((lo - d).max()), float((d - hi).max()), 0.0)
    return viol


@njit(cache=True)
def _march_allele_nb(q, alpha, beta, lam, dt, dx, sink, lap_l, lap_d, lap_u, lower, cp, inv_den,
                     lower_d, cp_d, inv_den_d, max_steps, tol, drift_tol):
    n = q.shape[1]
    rhs = np.empty((3, n))
    delta = np.empty((3, n))
    residual = np.inf
    max_drift = 0.0
    lap = np.empty((3, n))
    inv2dx = 1.0 / (2.0 * dx)
    for step in range(max_steps):
        for i in range(3):
            _bands_into(lap_l, lap_d, lap_u, q[i], lap[i])
        for k in range(n):
            pa = q[0, k]
            pb = q[1, k]
            d = q[2, k]
            a = alpha[k]
            b = beta[k]
            if k == 0 or k == n - 1:
                grad = 0.0
            else:
                grad = (q[0, k + 1] - q[0, k - 1]) * (q[1, k + 1] - q[1, k - 1]) * inv2dx * inv2dx
            rhs[0, k] = dt * (lap[0, k]
                              + lam * a * pa * (1.0 - pa) + lam * b * d)
            rhs[1, k] = dt * (lap[1, k]
                              + lam * b * pb * (1.0 - pb) + lam * a * d)
            rhs[2, k] = dt * (lap[2, k] - sink * d + 2.0 * grad
                              + lam * (a * (1.0 - 2.0 * pa) + b * (1.0 - 2.0 * pb)) * d)
        _thomas_apply(lower, cp, inv_den, rhs[0], delta[0])
        _thomas_apply(lower, cp, inv_den, rhs[1], delta[1])
        _thomas_apply(lower_d, cp_d, inv_den_d, rhs[2], delta[2])
        drift = 0.0
        change = 0.0
        for k in range(n):
            pa = q[0, k] + delta[0, k]
            pb = q[1, k] + delta[1, k]
            d = q[2, k] + delta[2, k]
            lo = -min(pa * pb, (1.0 - pa) * (1.0 - pb))
            hi = min(pa * (1.0 - pb), (1.0 - pa) * pb)
            v = max(-pa, pa - 1.0, -pb, pb - 1.0, lo - d, d - hi)
            if v > drift:
                drift = v
            for i in range(3):
                c = abs(delta[i, k])
                if c > change:
                    change = c
        if drift > drift_tol:
            return step, residual, max(max_drift, drift), 2
        if drift > max_drift:
            max_drift = drift
        for i in range(3):
            for k in range(n):
                q[i, k] += delta[i, k]
        residual = change / dt
        if residual < tol:
            return step + 1, residual, max_drift, 0
    return max_steps, residual, max_drift, 1


def _march_allele_np(q, alpha, beta, lam, dt, dx, factor, factor_d, max_steps, tol,
                     drift_tol):
    residual = np.inf
    max_drift = 0.0
    for step in range(max_steps):
        rhs = dt * (apply_bands_np(factor.lap, q) + allele_rates_np(q, alpha, beta, lam, dx))
        rhs[2] -= dt * factor_d.sink * q[2]
        delta = np.empty_like(q)
        delta[:2] = factor._solve_lapack(rhs[:2])
        delta[2] = factor_d._solve_lapack(rhs[2])
        new = q + delta
        drift = _allele_drift_np(new)
        if drift > drift_tol:
            return step, residual, max(max_drift, drift), REJECTED
        max_drift = max(max_drift, drift)
        residual = float(np.abs(delta).max()) / dt
        q[...] = new
        if residual < tol:
            return step + 1, residual, max_drift, CONVERGED
    return max_steps, residual, max_drift, MAX_STEPS


def march_allele(q, alpha, beta, lam, dt, dx, factor, factor_d, max_steps, tol=0.0,
                 drift_tol=1e-9):
    """Advance (pA, pB, D) stacked as ``q`` (3, N) in place.

    ``factor`` and ``factor_d`` come from :func:`implicit_factor`, the second
    with ``sink = 1/eps``.
    """
    if _BACKEND == "numba":
        return _march_allele_nb(q, alpha, beta, float(lam), float(dt), float(dx),
                                factor_d.sink, *factor.lap, factor.lower, factor.cp, factor.inv_den,
                                factor_d.lower, factor_d.cp, factor_d.inv_den,
                                int(max_steps), float(tol), float(drift_tol))
    return _march_allele_np(q, alpha, beta, lam, dt, dx, factor, factor_d, max_steps, tol,
                            drift_tol)


# ---------------------------------------------------------------------------
# Scalar single-locus equation


@njit(cache=True)
def _march_scalar_nb(theta, h, lam, dt, lap_l, lap_d, lap_u, lower, cp, inv_den, max_steps, tol):
    n = theta.size
    rhs = np.empty(n)
    delta = np.empty(n)
    lap = np.empty(n)
    residual = np.inf
    for step in range(max_steps):
        _bands_into(lap_l, lap_d, lap_u, theta, lap)
        for k in range(n):
            t = theta[k]
            rhs[k] = dt * (lap[k] + lam * h[k] * t * (1.0 - t))
        _thomas_apply(lower, cp, inv_den, rhs, delta)
        change = 0.0
        for k in range(n):
            c = abs(delta[k])
            if c > change:
                change = c
            theta[k] += delta[k]
        residual = change / dt
        if residual < tol:
            return step + 1, residual, 0
    return max_steps, residual, 1


def _march_scalar_np(theta, h, lam, dt, factor, max_steps, tol):
    residual = np.inf
    for step in range(max_steps):
        rhs = dt * (apply_bands_np(factor.lap, theta) + lam * h * theta * (1.0 - theta))
        delta = factor._solve_lapack(rhs)
        residual = float(np.abs(delta).max()) / dt
        theta += delta
        if residual < tol:
            return step + 1, residual, CONVERGED
    return max_steps, residual, MAX_STEPS


def march_scalar(theta, h, lam, dt, factor, max_steps, tol=0.0):
    """Advance the scalar logistic equation in place; returns (steps, residual, status)."""
    if _BACKEND == "numba":
        return _march_scalar_nb(theta, h, float(lam), float(dt), *factor.lap, factor.lower, factor.cp,
                                factor.inv_den, int(max_steps), float(tol))
    return _march_scalar_np(theta, h, lam, dt, factor, max_steps, tol)
