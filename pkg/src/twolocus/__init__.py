"""Two-locus migration-selection-recombination clines on a bounded interval."""

from .grid import Grid, build_grid, apply_laplacian, spatial_average
from .environment import Environment, make_environment, gamete_fitness, fitness_difference
from .dynamics import (AlleleState, GameteState, SimParams, allele_to_gamete,
                       gamete_to_allele, run_to_equilibrium)

__version__ = "0.1.0"

__all__ = [
    "Grid", "build_grid", "apply_laplacian", "spatial_average",
    "Environment", "make_environment", "gamete_fitness", "fitness_difference",
    "AlleleState", "GameteState", "SimParams", "allele_to_gamete", "gamete_to_allele",
    "run_to_equilibrium",
]
