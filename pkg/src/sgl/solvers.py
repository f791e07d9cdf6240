"""Equilibrium computation and certification.

Matrix-game minimax is solved by linear programming, refined to the
lexicographically-least optimal vertex (sequential LPs) and then polished
by solving the active-constraint system directly, so returned strategies
and values are accurate to machine precision rather than LP tolerance.

Restricted best responses dispatch on the structure of the space:

(a) single-state games against any polytopal space reduce to maximizing a
    linear function of the strategy, exact at a vertex;
(b) multi-state games with the full space or a statewise hull reduce to an
    MDP over per-state generator choices, solved by exact policy iteration
    (discounted) or a gain/bias LP (average reward), which maximizes every
    state's value simultaneously;
(c) multi-state games with a global hull or the state-uniform space tie the
    weights across states, making the value generally non-concave in the
    weights; these are searched by a dense grid over the weight simplex with
    golden-section polish, and the result carries an honest tolerance
    estimate instead of an exactness claim.

Equilibrium certificates report per-player regret gaps at the initial
state: the restricted-best-response value minus the value of the candidate
joint policy.  A grid sweep reports the smallest maximal gap over a product
parameter lattice together with a refinement bound estimated from adjacent
lattice differences; a strictly positive minimum exceeding that bound is
numerical evidence (never an unconditional proof) that no epsilon-
equilibrium exists in the sweep domain.

Tie-breaking everywhere is by lowest index, so results are reproducible
across runs and evaluation orders.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .games import (
    Average,
    Discounted,
    JointPolicy,
    MalformedInputError,
    Policy,
    StochasticGame,
    UnsupportedOperationError,
    classify,
)
from .restrictions import (
    ConvexHullGlobal,
    ConvexHullStatewise,
    DeterministicOnly,
    FixedCoordinates,
    FullSpace,
    ImplicitGame,
    MEMBERSHIP_TOL,
    RestrictedPolicySpace,
    Singleton,
    StateUniform,
    TauMapping,
    build_implicit,
    map_policy,
    simplex_grid,
)
from .values import (
    InducedMDP,
    induce_mdp,
    mdp_policy_value,
    policy_value,
    stationary_distribution,
)

LP_REGRET_TOL = 1e-9
_LEX_SLACK = 1e-10
_TIGHT_TOL = 1e-6


@dataclass(frozen=True)
class EquilibriumCertificate:
    """Per-player regret gaps for a candidate joint policy.

    verdict is true exactly when the largest gap is within epsilon.
    """

    joint: JointPolicy
    gaps: tuple[float, ...]
    epsilon: float
    verdict: bool

    @property
    def max_gap(self) -> float:
        return max(self.gaps)


@dataclass(frozen=True)
class BestResponseResult:
    """A representative optimal policy within a restricted space.

    ``tolerance`` is 0 for the exact routes (a)/(b) and a conservative
    accuracy estimate for the grid-searched route (c); ``description``
    sketches the optimal set when it is known (e.g. the optimal face of a
    matrix-game polytope).
    """

    policy: Policy
    value: float
    description: str | None = None
    tolerance: float = 0.0


@dataclass(frozen=True)
class SupportEnumerationResult:
    equilibria: list[JointPolicy]
    degenerate: bool


@dataclass(frozen=True)
class RestrictedMatrixEquilibrium:
    """Output of the implicit-game route for restricted zero-sum matrix games."""

    value: float
    weights: tuple[np.ndarray, np.ndarray]
    explicit_joint: JointPolicy
    certificate: EquilibriumCertificate
    implicit: ImplicitGame


@dataclass(frozen=True)
class SweepResult:
    min_max_gap: float
    argmin_params: tuple[tuple[float, ...], ...]
    argmin_joint: JointPolicy
    refinement_bound: float
    epsilon: float
    rows: list[tuple]
    header: tuple[str, ...]

    @property
    def margin(self) -> float:
        """How far the sweep minimum clears the lattice refinement bound."""
        return self.min_max_gap - self.refinement_bound

    @property
    def epsilon_equilibrium_found(self) -> bool:
        return self.min_max_gap <= self.epsilon


# ---------------------------------------------------------------------------
# Zero-sum matrix games: minimax LP
# ---------------------------------------------------------------------------


def _zero_sum_matrix(game: StochasticGame) -> np.ndarray:
    if game.n_players != 2 or not game.is_matrix_game:
        raise UnsupportedOperationError("minimax needs a 2-player matrix game")
    if not classify(game).is_zero_sum:
        raise UnsupportedOperationError("minimax needs a zero-sum game")
    return game.payoff_matrix(0)


def _security_lp(m: np.ndarray, *, maximize_rows: bool):
    """LP for one side of the minimax problem.

    Row side: max v subject to x^T M >= v columnwise, x on the simplex.
    Column side is the same program on -M^T.  Returns feasibility data for
    follow-up lexicographic passes: (strategy, value, A_ub, b_ub).
    """
    mat = m if maximize_rows else -m.T
    k, other = mat.shape
    c = np.zeros(k + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-mat.T, np.ones((other, 1))])
    b_ub = np.zeros(other)
    a_eq = np.zeros((1, k + 1))
    a_eq[0, :k] = 1.0
    bounds = [(0.0, None)] * k + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds,
                  method="highs")
    if not res.success:
        raise ArithmeticError(f"minimax LP failed: {res.message}")
    return np.asarray(res.x[:k]), float(res.x[-1]), a_ub, b_ub, a_eq


def _lexmin_strategy(
    mat_rows: int, v_star: float, a_ub: np.ndarray, b_ub: np.ndarray, a_eq: np.ndarray
) -> np.ndarray:
    """Lexicographically-least optimal vertex via sequential coordinate LPs."""
    k = mat_rows
    rows = [a_ub]
    rhs = [b_ub]
    # Pin optimality: v >= v_star - slack.
    pin_v = np.zeros((1, k + 1))
    pin_v[0, -1] = -1.0
    rows.append(pin_v)
    rhs.append(np.array([-(v_star - _LEX_SLACK)]))
    bounds = [(0.0, None)] * k + [(None, None)]
    x = None
    for coord in range(k):
        c = np.zeros(k + 1)
        c[coord] = 1.0
        res = linprog(
            c,
            A_ub=np.vstack(rows),
            b_ub=np.concatenate(rhs),
            A_eq=a_eq,
            b_eq=[1.0],
            bounds=bounds,
            method="highs",
        )
        if not res.success:
            break
        x = np.asarray(res.x)
        pin = np.zeros((1, k + 1))
        pin[0, coord] = 1.0
        rows.append(pin)
        rhs.append(np.array([x[coord] + _LEX_SLACK]))
    if x is None:
        raise ArithmeticError("lexicographic refinement failed")
    return x[:k]


def _polish_vertex(m: np.ndarray, x: np.ndarray, *, maximize_rows: bool) -> np.ndarray:
    """Re-solve the active constraints of an LP vertex for machine precision."""
    mat = m if maximize_rows else -m.T
    k = mat.shape[0]
    payoff = x @ mat
    v = payoff.min()
    tight = np.where(payoff - v <= _TIGHT_TOL)[0]
    support = np.where(x > _TIGHT_TOL)[0]
    if support.size == 0:
        return x
    rows = []
    rhs = []
    for j in tight:
        row = np.zeros(support.size + 1)
        row[:-1] = mat[support, j]
        row[-1] = -1.0
        rows.append(row)
        rhs.append(0.0)
    rows.append(np.concatenate([np.ones(support.size), [0.0]]))
    rhs.append(1.0)
    sol, *_ = np.linalg.lstsq(np.asarray(rows), np.asarray(rhs), rcond=None)
    candidate = np.zeros(k)
    candidate[support] = sol[:-1]
    candidate = np.clip(candidate, 0.0, None)
    total = candidate.sum()
    if total <= 0.5:
        return x
    candidate /= total
    # Keep the polish only if it did not lose feasible optimality.
    if (candidate @ mat).min() >= payoff.min() - 1e-11:
        return candidate
    return x


def minimax_zero_sum_matrix(
    game: StochasticGame,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and an optimal strategy pair for a zero-sum matrix game.

    Returns (value to the row player, row strategy, column strategy); both
    strategies have pure-deviation regret within LP_REGRET_TOL, and ties
    among optimal vertices resolve to the lexicographically least one.
    The value follows the game's reward criterion: the one-shot payoff
    under averaging, scaled by 1/(1-gamma) under discounting.
    """
    m = _zero_sum_matrix(game)
    _, v_row, a_ub_r, b_ub_r, a_eq_r = _security_lp(m, maximize_rows=True)
    _, v_col, a_ub_c, b_ub_c, a_eq_c = _security_lp(m, maximize_rows=False)
    if abs(v_row + v_col) > 1e-7:
        raise ArithmeticError(
            f"row and column LP values disagree: {v_row} vs {-v_col}"
        )
    row = _lexmin_strategy(m.shape[0], v_row, a_ub_r, b_ub_r, a_eq_r)
    col = _lexmin_strategy(m.shape[1], v_col, a_ub_c, b_ub_c, a_eq_c)
    row = _polish_vertex(m, row, maximize_rows=True)
    col = _polish_vertex(m, col, maximize_rows=False)
    value = float((row @ m).min())
    col_value = float((m @ col).max())
    if abs(value - col_value) > LP_REGRET_TOL:
        raise ArithmeticError(
            f"polished securities disagree: row {value} vs column {col_value}"
        )
    return value * _value_scale(game), row, col


# ---------------------------------------------------------------------------
# Support enumeration for bimatrix games
# ---------------------------------------------------------------------------


def support_enumeration_bimatrix(
    game: StochasticGame, max_actions: int = 5
) -> SupportEnumerationResult:
    """All Nash equilibria of a small bimatrix game via support enumeration.

    Considers equal-cardinality support pairs, solves the indifference
    systems, and keeps solutions that survive the best-response check.
    Games showing support ties (an unused action exactly indifferent, or a
    support coordinate at zero) are flagged degenerate; for such games a
    continuum of equilibria may exist beyond the listed ones.
    """
    if game.n_players != 2 or not game.is_matrix_game:
        raise UnsupportedOperationError("support enumeration needs a 2-player matrix game")
    a = game.payoff_matrix(0)
    b = game.payoff_matrix(1)
    m, n = a.shape
    if m > max_actions or n > max_actions:
        raise UnsupportedOperationError(
            f"action counts {(m, n)} exceed the bound {max_actions}"
        )
    tol = 1e-9
    found: list[tuple[np.ndarray, np.ndarray]] = []
    degenerate = False

    def solve_support(payoff: np.ndarray, rows, cols):
        """Opponent mixture over ``cols`` equalizing ``rows`` of ``payoff``."""
        k = len(rows)
        system = np.zeros((k + 1, k + 1))
        system[:k, :k] = payoff[np.ix_(rows, cols)]
        system[:k, k] = -1.0
        system[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        try:
            sol = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError:
            return None
        return sol[:k], sol[k]

    for k in range(1, min(m, n) + 1):
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                col_sol = solve_support(a, list(rows), list(cols))
                if col_sol is None:
                    continue
                y_s, u = col_sol
                row_sol = solve_support(b.T, list(cols), list(rows))
                if row_sol is None:
                    continue
                x_s, w = row_sol
                if np.any(y_s < -tol) or np.any(x_s < -tol):
                    continue
                if k > 1 and (np.any(y_s <= tol) or np.any(x_s <= tol)):
                    degenerate = True
                    continue
                x = np.zeros(m)
                x[list(rows)] = np.clip(x_s, 0.0, None)
                y = np.zeros(n)
                y[list(cols)] = np.clip(y_s, 0.0, None)
                x /= x.sum()
                y /= y.sum()
                row_payoffs = a @ y
                col_payoffs = x @ b
                if row_payoffs.max() > u + tol or col_payoffs.max() > w + tol:
                    continue
                off_rows = [i for i in range(m) if i not in rows]
                off_cols = [j for j in range(n) if j not in cols]
                if any(row_payoffs[i] > u - tol for i in off_rows) or any(
                    col_payoffs[j] > w - tol for j in off_cols
                ):
                    degenerate = True
                duplicate = any(
                    np.max(np.abs(x - px)) <= 1e-8 and np.max(np.abs(y - py)) <= 1e-8
                    for px, py in found
                )
                if duplicate:
                    degenerate = True
                    continue
                found.append((x, y))
    equilibria = [
        JointPolicy((Policy(x[np.newaxis, :]), Policy(y[np.newaxis, :])))
        for x, y in found
    ]
    return SupportEnumerationResult(equilibria=equilibria, degenerate=degenerate)


# ---------------------------------------------------------------------------
# Restricted best responses
# ---------------------------------------------------------------------------


def _value_scale(game: StochasticGame) -> float:
    if isinstance(game.formulation, Discounted):
        return 1.0 / (1.0 - game.formulation.gamma)
    return 1.0


def _matrix_best_response(
    game: StochasticGame, mdp: InducedMDP, space: RestrictedPolicySpace
) -> BestResponseResult:
    """Route (a): the value is linear in the strategy, so a vertex is exact."""
    per_action = mdp.reward[0]
    scale = _value_scale(game)
    vertices = space.vertices()
    values = [scale * float(v.probs[0] @ per_action) for v in vertices]
    best = max(values)
    best_idx = min(i for i, val in enumerate(values) if val >= best - 1e-12)
    face = [i for i, val in enumerate(values) if val >= best - 1e-12]
    description = f"optimal vertex face: indices {face} of {len(vertices)} vertices"
    return BestResponseResult(
        policy=vertices[best_idx], value=values[best_idx], description=description
    )


def _statewise_generators(
    mdp: InducedMDP, space: FullSpace | ConvexHullStatewise
) -> list[np.ndarray]:
    if isinstance(space, FullSpace):
        return [np.eye(mdp.n_actions) for _ in range(mdp.n_states)]
    return [space.generators_at(s) for s in range(mdp.n_states)]


def _policy_iteration_discounted(
    mdp: InducedMDP, generators: list[np.ndarray]
) -> tuple[list[int], np.ndarray]:
    """Exact policy iteration over per-state generator choices.

    Switches only on strict improvement and breaks ties toward the lowest
    index, so the iteration terminates at a simultaneous per-state optimum.
    """
    gamma = mdp.formulation.gamma
    s_count = mdp.n_states
    meta_r = [g @ mdp.reward[s] for s, g in enumerate(generators)]
    meta_p = [g @ mdp.transition[s] for s, g in enumerate(generators)]
    choice = [0] * s_count
    for _ in range(200 * sum(len(r) for r in meta_r) + 50):
        p = np.vstack([meta_p[s][choice[s]] for s in range(s_count)])
        r = np.array([meta_r[s][choice[s]] for s in range(s_count)])
        v = np.linalg.solve(np.eye(s_count) - gamma * p, r)
        improved = False
        for s in range(s_count):
            q = meta_r[s] + gamma * meta_p[s] @ v
            best = int(np.argmax(q))
            if q[best] > q[choice[s]] + 1e-12:
                choice[s] = best
                improved = True
        if not improved:
            return choice, v
    raise ArithmeticError("policy iteration failed to terminate")


def _gain_bias_lp(
    mdp: InducedMDP, generators: list[np.ndarray]
) -> tuple[list[int], float]:
    """Average-reward optimum over per-state generator choices (unichain LP).

    Minimizes the gain g subject to g + h(s) >= r(s, k) + P(s, k) h for all
    meta-actions k, with one bias coordinate pinned to zero.
    """
    s_count = mdp.n_states
    meta_r = [g @ mdp.reward[s] for s, g in enumerate(generators)]
    meta_p = [g @ mdp.transition[s] for s, g in enumerate(generators)]
    # Variables: g, h_0 .. h_{S-2} (h_{S-1} = 0).
    n_vars = s_count  # 1 gain + (S - 1) bias coordinates
    rows = []
    rhs = []
    for s in range(s_count):
        for k in range(meta_r[s].shape[0]):
            row = np.zeros(n_vars)
            row[0] = -1.0
            if s < s_count - 1:
                row[1 + s] -= 1.0
            row[1:] += meta_p[s][k][: s_count - 1]
            rows.append(row)
            rhs.append(-meta_r[s][k])
    res = linprog(
        c=np.eye(n_vars)[0],
        A_ub=np.asarray(rows),
        b_ub=np.asarray(rhs),
        bounds=[(None, None)] * n_vars,
        method="highs",
    )
    if not res.success:
        raise ArithmeticError(f"average-reward LP failed: {res.message}")
    gain = float(res.x[0])
    h = np.zeros(s_count)
    h[: s_count - 1] = res.x[1:]
    choice = []
    for s in range(s_count):
        q = meta_r[s] + meta_p[s] @ h
        best = float(q.max())
        choice.append(min(k for k in range(q.shape[0]) if q[k] >= best - 1e-8))
    return choice, gain


def _statewise_best_response(
    game: StochasticGame,
    mdp: InducedMDP,
    space: FullSpace | ConvexHullStatewise,
) -> BestResponseResult:
    """Route (b): optimal per-state generator choice in the induced MDP."""
    generators = _statewise_generators(mdp, space)
    if isinstance(mdp.formulation, Discounted):
        choice, v = _policy_iteration_discounted(mdp, generators)
        value = float(v[mdp.initial_index])
    else:
        choice, value = _gain_bias_lp(mdp, generators)
        probs = np.vstack([generators[s][choice[s]] for s in range(mdp.n_states)])
        value = float(mdp_policy_value(mdp, probs)[mdp.initial_index])
    probs = np.vstack([generators[s][choice[s]] for s in range(mdp.n_states)])
    return BestResponseResult(
        policy=Policy(probs),
        value=value,
        description=f"per-state generator choice {choice}",
    )


_GRID_STEP = 0.01
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section_max(f, lo: float, hi: float, iters: int = 60) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    mid = 0.5 * (a + b)
    return mid, f(mid)


def _weight_best_response(
    game: StochasticGame,
    mdp: InducedMDP,
    hull: ConvexHullGlobal,
    grid_step: float = _GRID_STEP,
) -> BestResponseResult:
    """Route (c): search the shared-weight simplex; value need not be concave.

    Dense grid plus coordinate-pair golden-section polish; the returned
    tolerance is a Lipschitz-style bound estimated from the largest value
    change between adjacent grid points.
    """
    k = hull.k
    stacked = np.stack([g.probs for g in hull.generators])

    def value_of(w: np.ndarray) -> float:
        probs = np.tensordot(w, stacked, axes=1)
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum(axis=1, keepdims=True)
        return float(mdp_policy_value(mdp, probs)[mdp.initial_index])

    if k == 1:
        w = np.ones(1)
        return BestResponseResult(hull.policy_of_weights(w), value_of(w))
    grid = simplex_grid(k, grid_step)
    values = np.array([value_of(np.asarray(w)) for w in grid])
    best_at = int(np.argmax(values))
    best_w = np.asarray(grid[best_at])
    # Largest change per step between grid neighbours bounds what refinement
    # could still uncover.
    lipschitz = 0.0
    arr = np.asarray(grid)
    for idx in range(len(grid) - 1):
        step_gap = np.max(np.abs(arr[idx + 1] - arr[idx]))
        if 0 < step_gap <= 2.0 * grid_step + 1e-12:
            lipschitz = max(lipschitz, abs(values[idx + 1] - values[idx]) / step_gap)
    tolerance = lipschitz * grid_step
    w = best_w.copy()
    best_value = values[best_at]
    for _ in range(3):
        improved = False
        for i, j in itertools.combinations(range(k), 2):
            mass = w[i] + w[j]
            if mass <= 1e-14:
                continue

            def f(t: float) -> float:
                candidate = w.copy()
                candidate[i] = t
                candidate[j] = mass - t
                return value_of(candidate)

            t_star, val = _golden_section_max(f, 0.0, mass)
            for t_candidate in (0.0, mass, t_star):
                val_c = f(t_candidate)
                if val_c > best_value + 1e-13:
                    w[i] = t_candidate
                    w[j] = mass - t_candidate
                    best_value = val_c
                    improved = True
        if not improved:
            break
    return BestResponseResult(
        policy=hull.policy_of_weights(w),
        value=float(best_value),
        description=f"shared weights {np.round(w, 6).tolist()} over {k} generators",
        tolerance=float(tolerance),
    )


def _deterministic_best_response(
    game: StochasticGame, mdp: InducedMDP, space: DeterministicOnly
) -> BestResponseResult:
    best_policy, best_value = None, -np.inf
    for pol in space.vertices():
        value = float(mdp_policy_value(mdp, pol.probs)[mdp.initial_index])
        if value > best_value + 1e-12:
            best_policy, best_value = pol, value
    assert best_policy is not None
    return BestResponseResult(best_policy, best_value, description="pure policy")


def restricted_best_response(
    game: StochasticGame,
    i: int,
    others: Sequence[Policy],
    space: RestrictedPolicySpace,
) -> BestResponseResult:
    """Optimal policy for player i within ``space``, against fixed opponents."""
    mdp = induce_mdp(game, i, others)
    if space.n_states != game.n_states or space.n_actions != game.action_counts[i]:
        raise MalformedInputError("space shape does not match the player")
    if isinstance(space, Singleton):
        value = float(mdp_policy_value(mdp, space.policy.probs)[mdp.initial_index])
        return BestResponseResult(space.policy, value, description="singleton")
    if game.is_matrix_game:
        return _matrix_best_response(game, mdp, space)
    if isinstance(space, (FullSpace, ConvexHullStatewise)):
        return _statewise_best_response(game, mdp, space)
    if isinstance(space, StateUniform):
        return _weight_best_response(game, mdp, space.as_hull())
    if isinstance(space, ConvexHullGlobal):
        return _weight_best_response(game, mdp, space)
    if isinstance(space, DeterministicOnly):
        return _deterministic_best_response(game, mdp, space)
    if isinstance(space, FixedCoordinates):
        # Pins are independent across states, so the space is the statewise
        # hull of its per-state vertices.
        statewise = _pinned_as_statewise(space)
        return _statewise_best_response(game, mdp, statewise)
    raise UnsupportedOperationError(f"unsupported space {type(space).__name__}")


def _pinned_as_statewise(space: FixedCoordinates) -> ConvexHullStatewise:
    per_state = space.vertex_rows_per_state()
    return ConvexHullStatewise(tuple(tuple(rows) for rows in per_state))


# ---------------------------------------------------------------------------
# Equilibrium checks
# ---------------------------------------------------------------------------


def _others(joint: JointPolicy, i: int) -> list[Policy]:
    return [p for j, p in enumerate(joint.policies) if j != i]


def check_equilibrium(
    game: StochasticGame,
    joint: JointPolicy,
    spaces: Sequence[RestrictedPolicySpace],
    epsilon: float,
    membership_tol: float = MEMBERSHIP_TOL,
) -> EquilibriumCertificate:
    """Certify whether ``joint`` is an epsilon-equilibrium within the spaces.

    Each player's gap is its restricted-best-response value minus its value
    under ``joint``, evaluated at the initial state.  The candidate itself
    is a feasible deviation, so gaps are clamped at zero.
    """
    if len(spaces) != game.n_players:
        raise MalformedInputError("need one restricted space per player")
    for i, space in enumerate(spaces):
        if not space.contains(joint[i], tol=membership_tol):
            raise MalformedInputError(
                f"player {i} policy lies outside its restricted space"
            )
    current = policy_value(game, joint)
    gaps = []
    for i, space in enumerate(spaces):
        br = restricted_best_response(game, i, _others(joint, i), space)
        gaps.append(float(max(br.value - float(current[i]), 0.0)))
    verdict = bool(max(gaps) <= epsilon)
    return EquilibriumCertificate(joint=joint, gaps=tuple(gaps), epsilon=epsilon,
                                  verdict=verdict)


def enumerate_deterministic(
    game: StochasticGame, epsilon: float, max_profiles: int = 10**5
) -> list[EquilibriumCertificate]:
    """One certificate per pure joint policy, against unrestricted deviations.

    In matrix games unrestricted best responses are attained at pure
    actions, so a pure profile failing here also fails against the
    deterministic-only deviation set.
    """
    per_player = [k**game.n_states for k in game.action_counts]
    total = int(np.prod(per_player))
    if total > max_profiles:
        raise UnsupportedOperationError(
            f"{total} pure joint policies exceeds the bound {max_profiles}"
        )
    full = [FullSpace(game.n_states, k) for k in game.action_counts]
    certificates = []
    choice_lists = [
        list(itertools.product(range(k), repeat=game.n_states))
        for k in game.action_counts
    ]
    for combo in itertools.product(*choice_lists):
        joint = JointPolicy(
            tuple(
                Policy.pure(game.n_states, game.action_counts[i], combo[i])
                for i in range(game.n_players)
            )
        )
        certificates.append(check_equilibrium(game, joint, full, epsilon))
    return certificates


def restricted_equilibrium_via_implicit(
    game: StochasticGame,
    spaces: Sequence[RestrictedPolicySpace],
    epsilon: float = 1e-8,
) -> RestrictedMatrixEquilibrium:
    """Solve a restricted zero-sum matrix game through its implicit game.

    Hull generators become the implicit actions (the full space contributes
    its pure actions), the implicit matrix game is solved by minimax LP,
    and the optimal implicit mixtures map back to explicit strategies.
    """
    if game.n_players != 2 or not game.is_matrix_game:
        raise UnsupportedOperationError("implicit route needs a 2-player matrix game")
    if not classify(game).is_zero_sum:
        raise UnsupportedOperationError("implicit route needs a zero-sum game")
    generator_lists = []
    for i, space in enumerate(spaces):
        if isinstance(space, ConvexHullGlobal):
            generator_lists.append(list(space.generators))
        elif isinstance(space, (FullSpace, StateUniform, DeterministicOnly)):
            generator_lists.append(space.vertices())
        else:
            raise UnsupportedOperationError(
                f"space {type(space).__name__} has no finite generator set"
            )
    taus = []
    names = []
    for i, gens in enumerate(generator_lists):
        tau = np.stack([g.probs[0] for g in gens])[np.newaxis, :, :]
        taus.append(tau)
        names.append(tuple(f"g{k}" for k in range(len(gens))))
    ig = build_implicit(game, TauMapping(tuple(taus), tuple(names)))
    value, row_w, col_w = minimax_zero_sum_matrix(ig.game)
    implicit_joint = JointPolicy(
        (Policy(row_w[np.newaxis, :]), Policy(col_w[np.newaxis, :]))
    )
    explicit_joint = map_policy(ig, implicit_joint)
    certificate = check_equilibrium(game, explicit_joint, spaces, epsilon)
    return RestrictedMatrixEquilibrium(
        value=value,
        weights=(row_w, col_w),
        explicit_joint=explicit_joint,
        certificate=certificate,
        implicit=ig,
    )


# ---------------------------------------------------------------------------
# Existence sweeps
# ---------------------------------------------------------------------------


def sweep_existence(
    game: StochasticGame,
    spaces: Sequence[RestrictedPolicySpace],
    resolution: float,
    epsilon: float,
) -> SweepResult:
    """Exhaustive lattice sweep of the joint parameter space.

    At every lattice point the per-player gaps are computed against the
    *full* restricted spaces (best responses search off-lattice), and the
    smallest maximal gap is reported together with a refinement bound: the
    largest gap change between adjacent lattice points.  A minimum that
    stays above the bound is evidence that refinement would not uncover an
    epsilon-equilibrium.
    """
    if len(spaces) != game.n_players:
        raise MalformedInputError("need one restricted space per player")
    dims = [space.param_dim() for space in spaces]
    if sum(dims) > 4:
        raise UnsupportedOperationError(
            f"joint parameterization dimension {sum(dims)} exceeds 4"
        )
    grids = [space.param_points(resolution) for space in spaces]
    sizes = tuple(len(g) for g in grids)
    br_cache: list[dict[tuple[int, ...], float]] = [dict() for _ in spaces]
    param_widths = [max(1, len(grids[i][0][0])) for i in range(len(spaces))]
    header = tuple(
        [f"p{i}_param{d}" for i in range(len(spaces)) for d in range(param_widths[i])]
        + [f"gap_{i}" for i in range(game.n_players)]
        + ["max_gap"]
    )
    rows: list[tuple] = []
    gap_lattice = np.zeros(sizes)
    best_gap = np.inf
    best_idx: tuple[int, ...] | None = None
    for idx in itertools.product(*(range(s) for s in sizes)):
        params = [grids[i][idx[i]][0] for i in range(len(spaces))]
        joint = JointPolicy(tuple(grids[i][idx[i]][1] for i in range(len(spaces))))
        current = policy_value(game, joint)
        gaps = []
        for i in range(game.n_players):
            key = tuple(idx[j] for j in range(len(spaces)) if j != i)
            if key not in br_cache[i]:
                br = restricted_best_response(game, i, _others(joint, i), spaces[i])
                br_cache[i][key] = br.value
            gaps.append(max(br_cache[i][key] - float(current[i]), 0.0))
        max_gap = max(gaps)
        gap_lattice[idx] = max_gap
        flat_params = tuple(x for p in params for x in (p if p else (0.0,)))
        rows.append(flat_params + tuple(gaps) + (max_gap,))
        if max_gap < best_gap - 1e-15:
            best_gap = max_gap
            best_idx = idx
    assert best_idx is not None
    refinement = 0.0
    for axis in range(len(sizes)):
        if sizes[axis] > 1:
            diffs = np.abs(np.diff(gap_lattice, axis=axis))
            refinement = max(refinement, float(diffs.max()))
    argmin_joint = JointPolicy(
        tuple(grids[i][best_idx[i]][1] for i in range(len(spaces)))
    )
    argmin_params = tuple(grids[i][best_idx[i]][0] for i in range(len(spaces)))
    return SweepResult(
        min_max_gap=float(best_gap),
        argmin_params=argmin_params,
        argmin_joint=argmin_joint,
        refinement_bound=refinement,
        epsilon=epsilon,
        rows=rows,
        header=header,
    )


# ---------------------------------------------------------------------------
# Best-response convexity probe
# ---------------------------------------------------------------------------


def best_response_convexity_test(
    game: StochasticGame,
    i: int,
    others: Sequence[Policy],
    space: RestrictedPolicySpace,
    trials: int = 20,
    seed: int = 0,
) -> bool:
    """Probe whether the optimal set within ``space`` is closed under blending.

    Finds distinct optimal policies (searching the space's extreme points
    and the computed best response), blends random pairs, and reports False
    as soon as a blend loses value beyond 1e-8.  Returns True vacuously
    when only one optimum is found.
    """
    if not space.is_convex:
        raise UnsupportedOperationError("convexity test expects a convex space")
    mdp = induce_mdp(game, i, others)
    br = restricted_best_response(game, i, others, space)
    value_tol = max(1e-9, br.tolerance)

    def value_of(policy: Policy) -> float:
        return float(mdp_policy_value(mdp, policy.probs)[mdp.initial_index])

    candidates = [br.policy]
    try:
        extremes = space.vertices()
    except UnsupportedOperationError:
        extremes = []
    v_star = br.value
    for vert in extremes:
        val = value_of(vert)
        if val > v_star:
            v_star = val
    for vert in extremes:
        if value_of(vert) >= v_star - value_tol:
            candidates.append(vert)
    distinct: list[Policy] = []
    for cand in candidates:
        if value_of(cand) < v_star - value_tol:
            continue
        if not any(np.max(np.abs(cand.probs - d.probs)) <= 1e-9 for d in distinct):
            distinct.append(cand)
    if len(distinct) < 2:
        return True
    rng = np.random.default_rng(seed)
    pairs = list(itertools.combinations(range(len(distinct)), 2))
    for trial in range(trials):
        a_idx, b_idx = pairs[trial % len(pairs)]
        alpha = 0.5 if trial < len(pairs) else float(rng.uniform(0.05, 0.95))
        blend = Policy(
            alpha * distinct[a_idx].probs + (1.0 - alpha) * distinct[b_idx].probs
        )
        if value_of(blend) < v_star - max(1e-8, br.tolerance):
            return False
    return True


def alternating_best_response(
    game: StochasticGame,
    spaces: Sequence[RestrictedPolicySpace],
    epsilon: float,
    seed: int = 0,
    max_rounds: int = 100,
) -> EquilibriumCertificate:
    """Iterate exact best responses from a random start until gaps close.

    Players update sequentially and keep their current policy when it is
    already within 1e-10 of optimal, so equilibria are absorbing.  Returns
    the final certificate whether or not it passes.
    """
    rng = np.random.default_rng(seed)
    joint = JointPolicy(tuple(space.random_member(rng) for space in spaces))
    best_cert = None
    for _ in range(max_rounds):
        for i in range(game.n_players):
            current = float(policy_value(game, joint)[i])
            br = restricted_best_response(game, i, _others(joint, i), spaces[i])
            if br.value > current + 1e-10:
                joint = joint.replace(i, br.policy)
        cert = check_equilibrium(game, joint, spaces, epsilon)
        if best_cert is None or cert.max_gap < best_cert.max_gap:
            best_cert = cert
        if cert.verdict:
            return cert
    assert best_cert is not None
    return best_cert


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def certificate_to_dict(cert: EquilibriumCertificate, game: StochasticGame) -> dict:
    from .games import joint_policy_to_list

    return {
        "gaps": [float(g) for g in cert.gaps],
        "epsilon": float(cert.epsilon),
        "verdict": bool(cert.verdict),
        "policy": joint_policy_to_list(cert.joint, game.states),
    }


def save_certificate(cert: EquilibriumCertificate, game: StochasticGame, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(certificate_to_dict(cert, game), fh, indent=2)


def sweep_to_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(result.header)
        for row in result.rows:
            writer.writerow([repr(float(x)) for x in row])
