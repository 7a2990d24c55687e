"""Documented step scenarios used by ``twolocus verify`` when no config is given.

Each entry is a config mapping in the same shape as a TOML scenario file, so
the defaults can be copied into a file and edited.
"""

import copy


def _step(levels, breakpoint):
    return {"type": "step", "levels": list(levels), "breakpoints": [breakpoint]}


SCENARIOS = {
    # lambda = 2 max(lambda_A, lambda_B); both loci above threshold
    "strong-recombination": [{
        "grid": {"L": 1.0, "N": 129},
        "environment": {"alpha": _step([-1.0, 1.0], 0.6), "beta": _step([-1.0, 1.0], 0.7)},
        "verify": {"strong-recombination": {"lambda_factor": 2.0, "rho": [50.0, 100.0, 200.0]}},
    }],
    "weak-recombination": [
        # 14-edge equilibrium stable at rho = 0
        {
            "grid": {"L": 1.0, "N": 129},
            "environment": {"alpha": _step([-1.0, 1.0], 0.45), "beta": _step([-1.0, 1.0], 0.42)},
            "verify": {"weak-recombination": {"lambda_factor": 1.2}},
        },
        # 14-edge equilibrium unstable at rho = 0
        {
            "grid": {"L": 1.0, "N": 129},
            "environment": {"alpha": _step([-1.0, 1.0], 0.6), "beta": _step([-1.0, 1.2], 0.55)},
            "verify": {"weak-recombination": {"lambda_factor": 1.5}},
        },
    ],
    "monomorphic-thresholds": [{
        "grid": {"L": 1.0, "N": 65},
        "environment": {"alpha": _step([-1.0, 1.5], 0.5), "beta": _step([-1.0, 1.0], 0.45)},
        "verify": {"monomorphic-thresholds": {"rho": [0.0, 1.0, 2.0]}},
    }],
    "large-d": [{
        "grid": {"L": 1.0, "N": 65},
        "environment": {"alpha": _step([-1.0, 1.5], 0.5), "beta": _step([-1.0, 1.0], 0.45)},
        "verify": {"large-d": {"s": 1.0, "r": 1.0}},
    }],
    "no-recombination": [{
        "grid": {"L": 1.0, "N": 65},
        "environment": {"alpha": _step([-1.0, 1.0], 0.5), "beta": _step([-1.0, 1.0], 0.5)},
        "verify": {"no-recombination": {}},
    }],
}


def scenario(suite):
    """Deep copies of the built-in config mappings for ``suite``."""
    return copy.deepcopy(SCENARIOS[suite])
