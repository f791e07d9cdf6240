"""Shared test helpers: random game generators and independent oracles.

The oracles here deliberately avoid the library's solution paths: the
minimax oracle is a brute-force grid search over row strategies (with a
concavity-justified local refinement for larger action counts), and
expected values asserted in the test modules were computed by hand or by
these oracles, never by the code under test.
"""

from __future__ import annotations

import itertools

import numpy as np

from sgl.games import (
    Average,
    Discounted,
    JointPolicy,
    Policy,
    StochasticGame,
)
from sgl.restrictions import ConvexHullGlobal, ConvexHullStatewise, simplex_grid


def random_game(
    rng: np.random.Generator,
    n_states: int = 3,
    action_counts: tuple[int, ...] = (2, 2),
    gamma: float = 0.9,
    average: bool = False,
    zero_sum: bool = False,
    team: bool = False,
    no_control: bool = False,
    controller: int | None = None,
) -> StochasticGame:
    """A dense random game (full-support transitions, so always ergodic)."""
    n = len(action_counts)
    n_joint = int(np.prod(action_counts))
    if no_control:
        per_state = rng.dirichlet(np.ones(n_states), size=n_states)
        transition = np.repeat(per_state[:, None, :], n_joint, axis=1)
    elif controller is not None:
        k = action_counts[controller]
        rows = rng.dirichlet(np.ones(n_states), size=(n_states, k))
        transition = np.zeros((n_states, n_joint, n_states))
        for j, actions in enumerate(
            itertools.product(*(range(c) for c in action_counts))
        ):
            transition[:, j, :] = rows[np.arange(n_states), actions[controller]]
    else:
        transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_joint))
    rewards = rng.uniform(-1.0, 1.0, size=(n, n_states, n_joint))
    if zero_sum:
        assert n == 2
        rewards[1] = -rewards[0]
    if team:
        rewards = np.repeat(rewards[:1], n, axis=0)
    return StochasticGame(
        states=tuple(f"s{i}" for i in range(n_states)),
        action_sets=tuple(
            tuple(f"p{i}a{k}" for k in range(c)) for i, c in enumerate(action_counts)
        ),
        transition=transition,
        rewards=rewards,
        initial_state="s0",
        formulation=Average() if average else Discounted(gamma),
    )


def random_policy(rng: np.random.Generator, n_states: int, n_actions: int) -> Policy:
    return Policy(rng.dirichlet(np.ones(n_actions), size=n_states))


def random_joint_policy(rng: np.random.Generator, game: StochasticGame) -> JointPolicy:
    return JointPolicy(
        tuple(
            random_policy(rng, game.n_states, k) for k in game.action_counts
        )
    )


def random_global_hull(
    rng: np.random.Generator, n_states: int, n_actions: int, k: int = 2
) -> ConvexHullGlobal:
    return ConvexHullGlobal(
        tuple(random_policy(rng, n_states, n_actions) for _ in range(k))
    )


def random_statewise_hull(
    rng: np.random.Generator, n_states: int, n_actions: int, k: int = 2
) -> ConvexHullStatewise:
    return ConvexHullStatewise(
        tuple(
            tuple(rng.dirichlet(np.ones(n_actions)) for _ in range(k))
            for _ in range(n_states)
        )
    )


# ---------------------------------------------------------------------------
# Brute-force minimax oracle
# ---------------------------------------------------------------------------


def _security(m: np.ndarray, points: np.ndarray) -> np.ndarray:
    return (points @ m).min(axis=1)


def _local_composition_grid(
    center: np.ndarray, n_units: int, radius_units: int
) -> np.ndarray:
    """Simplex lattice points at granularity 1/n_units near ``center``."""
    k = center.size
    target = np.rint(center * n_units).astype(int)
    ranges = [
        range(max(0, target[i] - radius_units), min(n_units, target[i] + radius_units) + 1)
        for i in range(k - 1)
    ]
    points = []
    for combo in itertools.product(*ranges):
        rest = n_units - sum(combo)
        if rest < 0 or abs(rest - target[k - 1]) > radius_units:
            continue
        points.append(tuple(combo) + (rest,))
    if not points:
        points.append(tuple(target[:-1]) + (n_units - int(target[:-1].sum()),))
    return np.asarray(points, dtype=float) / n_units


def grid_minimax_value(m: np.ndarray, resolution: float = 1e-3) -> float:
    """max over row strategies of min over pure columns, by grid search.

    The row security level min_j (x^T M)_j is concave in x, so a coarse
    global grid localizes the maximizer and local lattice refinement down
    to the requested resolution is exact up to one lattice step.
    """
    m = np.asarray(m, dtype=float)
    k = m.shape[0]
    if k == 1:
        return float(m[0].min())
    coarse_units = 20
    points = np.asarray(simplex_grid(k, 1.0 / coarse_units), dtype=float)
    values = _security(m, points)
    best = points[int(np.argmax(values))]
    best_value = float(values.max())
    units = coarse_units
    while 1.0 / units > resolution:
        next_units = min(units * 5, int(round(1.0 / resolution)))
        radius = max(2, int(np.ceil(2 * next_units / units)))
        points = _local_composition_grid(best, next_units, radius)
        values = _security(m, points)
        if values.max() > best_value:
            best_value = float(values.max())
            best = points[int(np.argmax(values))]
        units = next_units
    return best_value
