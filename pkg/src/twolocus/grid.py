"""Uniform node-centred mesh on [0, L] with a zero-flux Laplacian.

Fields are plain 1-D float arrays with one value per node. The Neumann
condition is imposed with mirror ghost values (u[-1] = u[1], u[N] = u[N-2]),
which keeps second order accuracy and exact zero row sums.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, InvalidGridError


@dataclass(frozen=True)
class Grid:
    length: float
    n_nodes: int
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.n_nodes >= 3 and self.length > 0 and np.isfinite(self.length)):
            raise InvalidGridError(
                f"need L > 0 and N >= 3, got L={self.length}, N={self.n_nodes}")
        x = np.linspace(0.0, float(self.length), int(self.n_nodes))
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def dx(self):
        return self.length / (self.n_nodes - 1)

    @cached_property
    def laplacian_bands(self):
        """(lower, diag, upper) of the discrete Laplacian, length-N each."""
        n = self.n_nodes
        inv = 1.0 / self.dx**2
        lower = np.full(n, inv)
        upper = np.full(n, inv)
        diag = np.full(n, -2.0 * inv)
        lower[0] = 0.0
        upper[-1] = 0.0
        upper[0] = 2.0 * inv
        lower[-1] = 2.0 * inv
        for band in (lower, diag, upper):
            band.setflags(write=False)
        return lower, diag, upper

    @cached_property
    def laplacian_matrix(self):
        lower, diag, upper = self.laplacian_bands
        return sp.diags([lower[1:], diag, upper[:-1]], [-1, 0, 1], format="csr")

    @cached_property
    def weights(self):
        """Trapezoid quadrature weights (sum to L)."""
        w = np.full(self.n_nodes, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        w.setflags(write=False)
        return w

    def check(self, u, name="field"):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.n_nodes:
            raise DimensionError(
                f"{name} has {u.shape[-1]} nodes, grid has {self.n_nodes}")
        return u


def build_grid(length, n_nodes):
    return Grid(float(length), int(n_nodes))


def apply_laplacian(grid, u):
    """Discrete zero-flux Laplacian; works on the last axis of ``u``."""
    u = grid.check(u)
    out = np.empty_like(u)
    inv = 1.0 / grid.dx**2
    out[..., 1:-1] = (u[..., :-2] - 2.0 * u[..., 1:-1] + u[..., 2:]) * inv
    out[..., 0] = 2.0 * (u[..., 1] - u[..., 0]) * inv
    out[..., -1] = 2.0 * (u[..., -2] - u[..., -1]) * inv
    return out


def spatial_average(grid, u):
    u = grid.check(u)
    return (u @ grid.weights) / grid.length


def gradient(grid, u):
    """Centred first derivative; zero at the endpoints (mirror ghosts)."""
    u = grid.check(u)
    g = np.zeros_like(u)
    g[..., 1:-1] = (u[..., 2:] - u[..., :-2]) / (2.0 * grid.dx)
    return g


def c1_norm(grid, u):
    """Discrete C^1 norm: max|u| + max|u'|."""
    return float(np.abs(u).max() + np.abs(gradient(grid, u)).max())
