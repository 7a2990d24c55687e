"""Selection environment: coefficient fields alpha(x), beta(x) and derived fitnesses."""

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import InvalidPairError, InvalidProfileError
from .grid import Grid, spatial_average

GAMETES = (1, 2, 3, 4)
GAMETE_NAMES = {1: "AB", 2: "Ab", 3: "aB", 4: "ab"}


@dataclass(frozen=True)
class StepProfile:
    """Piecewise constant profile; ``levels[m]`` holds between consecutive breakpoints.

    Nodes take the average of the profile over their dual cell, so a node lying
    exactly on a breakpoint gets the midpoint of the two adjacent levels.
    """

    levels: Sequence[float]
    breakpoints: Sequence[float]

    def sample(self, grid):
        levels = np.asarray(self.levels, dtype=float)
        bps = np.asarray(self.breakpoints, dtype=float)
        if levels.size != bps.size + 1:
            raise InvalidProfileError("step profile needs len(levels) == len(breakpoints) + 1")
        if np.any(bps < 0.0) or np.any(bps > grid.length):
            raise InvalidProfileError(f"breakpoints {bps.tolist()} outside [0, {grid.length}]")
        if np.any(np.diff(bps) <= 0.0):
            raise InvalidProfileError("breakpoints must be strictly increasing")
        edges = np.concatenate(([0.0], bps, [grid.length]))
        x = grid.x
        lo = np.maximum(x - 0.5 * grid.dx, 0.0)[:, None]
        hi = np.minimum(x + 0.5 * grid.dx, grid.length)[:, None]
        # overlap of each dual cell with each piece
        overlap = np.clip(np.minimum(hi, edges[None, 1:]) - np.maximum(lo, edges[None, :-1]),
                          0.0, None)
        out = (overlap @ levels) / (hi[:, 0] - lo[:, 0])
        for m, b in enumerate(bps):
            on = np.abs(x - b) <= 1e-12 * grid.length
            out[on] = 0.5 * (levels[m] + levels[m + 1])
        return out


@dataclass(frozen=True)
class LinearProfile:
    slope: float
    intercept: float

    def sample(self, grid):
        return self.slope * grid.x + self.intercept


@dataclass(frozen=True)
class CosineProfile:
    """``mean + amplitude * cos(mode * pi * x / L)``."""

    amplitude: float
    mean: float
    mode: int = 1

    def sample(self, grid):
        return self.mean + self.amplitude * np.cos(self.mode * np.pi * grid.x / grid.length)


@dataclass(frozen=True)
class TabulatedProfile:
    values: Sequence[float]

    def sample(self, grid):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (grid.n_nodes,):
            raise InvalidProfileError(
                f"tabulated profile has {values.size} values, grid has {grid.n_nodes}")
        return values.copy()


Profile = Union[StepProfile, LinearProfile, CosineProfile, TabulatedProfile]

_PROFILE_TYPES = {
    "step": StepProfile,
    "linear": LinearProfile,
    "cosine": CosineProfile,
    "tabulated": TabulatedProfile,
}


def profile_from_mapping(spec: Mapping) -> Profile:
    """Build a profile from a config mapping such as ``{"type": "step", ...}``."""
    spec = dict(spec)
    kind = spec.pop("type", None)
    if kind not in _PROFILE_TYPES:
        raise InvalidProfileError(f"unknown profile type {kind!r}")
    try:
        return _PROFILE_TYPES[kind](**spec)
    except TypeError as exc:
        raise InvalidProfileError(f"bad {kind} profile: {exc}") from None


def _as_profile(spec):
    if isinstance(spec, Mapping):
        return profile_from_mapping(spec)
    if isinstance(spec, (StepProfile, LinearProfile, CosineProfile, TabulatedProfile)):
        return spec
    return TabulatedProfile(np.asarray(spec, dtype=float))


def changes_sign(h):
    h = np.asarray(h)
    return bool(h.min() < 0.0 < h.max())


@dataclass(frozen=True, eq=False)
class Environment:
    grid: Grid
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("alpha", "beta"):
            arr = np.array(self.grid.check(getattr(self, name), name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "alpha_mean", float(spatial_average(self.grid, self.alpha)))
        object.__setattr__(self, "beta_mean", float(spatial_average(self.grid, self.beta)))
        object.__setattr__(self, "sign_change", {
            "alpha": changes_sign(self.alpha),
            "beta": changes_sign(self.beta),
            "alpha+beta": changes_sign(self.alpha + self.beta),
            "alpha-beta": changes_sign(self.alpha - self.beta),
        })

    @property
    def assumption_a(self):
        """Both coefficients change sign."""
        return self.sign_change["alpha"] and self.sign_change["beta"]

    @property
    def tau_mean(self):
        return 1e-10 * max(np.abs(self.alpha).max(), np.abs(self.beta).max())

    @property
    def sup_norm(self):
        return float(max(np.abs(self.alpha).max(), np.abs(self.beta).max()))


def make_environment(alpha, beta, grid):
    """Sample ``alpha`` and ``beta`` descriptors (profile, mapping or array) on ``grid``."""
    return Environment(grid, _as_profile(alpha).sample(grid), _as_profile(beta).sample(grid))


@dataclass(frozen=True, eq=False)
class GameteFitness:
    """Gamete fitness coefficients; ``s[i-1]`` is s_i for gamete i."""

    s: np.ndarray

    def __getitem__(self, i):
        return self.s[i - 1]


def gamete_fitness(env):
    a, b = env.alpha, env.beta
    return GameteFitness(np.stack([0.5 * (a + b), 0.5 * (a - b), 0.5 * (b - a), -0.5 * (a + b)]))


def fitness_difference(gf, i, j):
    """h_ij = s_i - s_j."""
    if i not in GAMETES or j not in GAMETES or i == j:
        raise InvalidPairError(f"need distinct gametes in 1..4, got ({i}, {j})")
    return gf[i] - gf[j]


def pair_weight(env, i, j):
    return fitness_difference(gamete_fitness(env), i, j)


def classify_fittest(env):
    """Gamete with the highest mean fitness, or ``"nongeneric"`` if a mean vanishes."""
    am, bm, tau = env.alpha_mean, env.beta_mean, env.tau_mean
    if abs(am) <= tau or abs(bm) <= tau:
        return "nongeneric"
    if am > 0:
        return 1 if bm > 0 else 2
    return 3 if bm > 0 else 4
