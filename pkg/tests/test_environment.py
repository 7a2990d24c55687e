import numpy as np
import pytest

from twolocus.environment import (CosineProfile, LinearProfile, StepProfile, classify_fittest,
                                  fitness_difference, gamete_fitness, make_environment,
                                  pair_weight, profile_from_mapping)
from twolocus.errors import InvalidPairError, InvalidProfileError
from twolocus.grid import build_grid
from twolocus.spectral import partner


def test_step_sampling_cell_average_and_midpoint():
    g = build_grid(1.0, 11)
    h = StepProfile([-1.0, 1.0], [0.5]).sample(g)
    assert h[5] == 0.0  # node exactly on the breakpoint
    assert np.all(h[:5] == -1.0) and np.all(h[6:] == 1.0)
    # breakpoint inside a dual cell: overlap-weighted average
    h = StepProfile([-1.0, 1.0], [0.52]).sample(g)
    assert h[5] == pytest.approx(-1.0 * 0.07 / 0.1 + 1.0 * 0.03 / 0.1)


def test_step_mean_exact_for_any_breakpoint():
    g = build_grid(1.0, 64)
    for b in (0.3, 0.41, 0.5, 0.777):
        h = StepProfile([-1.0, 2.0], [b]).sample(g)
        env = make_environment(h, h, g)
        assert env.alpha_mean == pytest.approx(-b + 2 * (1 - b), abs=1e-12)


@pytest.mark.parametrize("spec", [
    {"type": "step", "levels": [1.0], "breakpoints": [0.5]},
    {"type": "step", "levels": [1.0, 2.0], "breakpoints": [1.5]},
    {"type": "step", "levels": [1.0, 2.0, 3.0], "breakpoints": [0.6, 0.4]},
    {"type": "wave"},
    {"type": "cosine", "amplitude": 1.0},
])
def test_bad_profiles(spec):
    g = build_grid(1.0, 11)
    with pytest.raises(InvalidProfileError):
        profile_from_mapping(spec).sample(g)


def test_tabulated_wrong_length():
    g = build_grid(1.0, 11)
    with pytest.raises(InvalidProfileError):
        make_environment(np.zeros(10), np.zeros(11), g)


def test_linear_and_cosine():
    g = build_grid(2.0, 5)
    assert np.allclose(LinearProfile(2.0, -1.0).sample(g), 2 * g.x - 1)
    assert np.allclose(CosineProfile(1.0, 0.5).sample(g), 0.5 + np.cos(np.pi * g.x / 2))


def test_fitness_difference_table():
    g = build_grid(1.0, 7)
    a = np.linspace(-1, 1, 7)
    b = np.linspace(0.5, -0.3, 7)
    env = make_environment(a, b, g)
    gf = gamete_fitness(env)
    expected = {(1, 2): b, (3, 4): b, (1, 3): a, (2, 4): a, (1, 4): a + b, (2, 3): a - b}
    for (i, j), h in expected.items():
        assert np.allclose(fitness_difference(gf, i, j), h)
        assert np.allclose(fitness_difference(gf, j, i), -h)
    assert np.allclose(gf.s.sum(axis=0), 0.0)


@pytest.mark.parametrize("pair", [(1, 1), (0, 2), (2, 5)])
def test_invalid_pair(pair):
    env = make_environment(np.zeros(5), np.zeros(5), build_grid(1.0, 5))
    with pytest.raises(InvalidPairError):
        pair_weight(env, *pair)


def test_partner():
    assert [partner(j) for j in (1, 2, 3, 4)] == [4, 3, 2, 1]


@pytest.mark.parametrize("am,bm,want", [(1, 1, 1), (1, -1, 2), (-1, 1, 3), (-1, -1, 4),
                                        (0, 1, "nongeneric")])
def test_classify_fittest(am, bm, want):
    g = build_grid(1.0, 9)
    env = make_environment(am + np.cos(np.pi * g.x), bm + 0.5 * np.cos(np.pi * g.x), g)
    assert classify_fittest(env) == want


def test_sign_change_flags():
    g = build_grid(1.0, 65)
    env = make_environment(StepProfile([-1, 1], [0.6]), StepProfile([0.1, 1], [0.5]), g)
    assert env.sign_change["alpha"] and not env.sign_change["beta"]
    assert not env.assumption_a
