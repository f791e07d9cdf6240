"""Exact value computation for stochastic games under fixed joint policies.

Discounted values solve the linear Bellman system (I - gamma * P_pi) V = r_pi
directly; average values solve the stationary-distribution system
d (P_pi - I) = 0, sum(d) = 1 directly.  Both are direct dense solves rather
than fixed-point iteration, so results are reproducible to solver precision
and every returned table is residual-checked against VALUE_TOL.

The ergodicity check used to gate average-reward evaluation is the
support-union test: the state graph with an edge s -> s' whenever *some*
joint action moves s to s' with positive probability must form a single
communicating class.  This is a decidable approximation of requiring
irreducibility under every joint policy (which quantifies over a continuum);
a specific policy can still zero out the support of an action, so the
per-policy chain is re-checked at evaluation time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .games import (
    Average,
    Discounted,
    ErgodicityError,
    JointPolicy,
    MalformedInputError,
    Policy,
    StochasticGame,
    UnsupportedOperationError,
    VALUE_TOL,
)


def joint_action_weights(game: StochasticGame, joint: JointPolicy) -> np.ndarray:
    """Probability of each flat joint action per state, shape (|S|, prod|A_i|)."""
    if len(joint) != game.n_players:
        raise MalformedInputError("joint policy has wrong player count")
    for i, pol in enumerate(joint.policies):
        if pol.probs.shape != (game.n_states, game.action_counts[i]):
            raise MalformedInputError(f"policy {i} shape mismatch with game")
    weights = np.ones((game.n_states, 1))
    for pol in joint.policies:
        # Row-major flat index grows fastest in the last player, matching kron order.
        weights = np.einsum("sj,sk->sjk", weights, pol.probs).reshape(
            game.n_states, -1
        )
    return weights


def chain_and_rewards(
    game: StochasticGame, joint: JointPolicy
) -> tuple[np.ndarray, np.ndarray]:
    """Markov matrix P_pi (|S| x |S|) and expected rewards r_pi (n x |S|)."""
    w = joint_action_weights(game, joint)
    p = np.einsum("sj,sjt->st", w, game.transition)
    r = np.einsum("sj,isj->is", w, game.rewards)
    return p, r


def policy_value_discounted(game: StochasticGame, joint: JointPolicy) -> np.ndarray:
    """V_i(s) for every player and state; shape (n, |S|).

    The table is the unique Bellman fixed point; a residual above VALUE_TOL
    (which would indicate a defective solve) raises ArithmeticError.
    """
    gamma = game.require_discounted()
    p, r = chain_and_rewards(game, joint)
    a = np.eye(game.n_states) - gamma * p
    values = np.linalg.solve(a, r.T).T
    residual = np.max(np.abs(values - (r + gamma * values @ p.T)))
    if residual > VALUE_TOL:
        raise ArithmeticError(f"Bellman residual {residual} above tolerance")
    return values


def stationary_distribution(p: np.ndarray) -> np.ndarray:
    """Stationary d with d P = d, sum(d) = 1, for an irreducible chain."""
    n = p.shape[0]
    support = (p > 0.0).astype(np.int8)
    n_comp, _ = connected_components(support, directed=True, connection="strong")
    if n_comp != 1:
        raise ErgodicityError(
            "chain induced by the policy is not a single communicating class"
        )
    a = (p.T - np.eye(n)).copy()
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    d = np.linalg.solve(a, b)
    residual = np.abs(d - d @ p).sum()
    if residual > VALUE_TOL or np.any(d < -VALUE_TOL):
        raise ErgodicityError(f"stationary solve failed (residual {residual})")
    return np.clip(d, 0.0, None) / np.clip(d, 0.0, None).sum()


def policy_value_average(game: StochasticGame, joint: JointPolicy) -> np.ndarray:
    """Long-run average reward per player (state-independent), shape (n,)."""
    game.require_average()
    if not check_ergodic(game):
        raise ErgodicityError("game fails the support-union ergodicity check")
    p, r = chain_and_rewards(game, joint)
    d = stationary_distribution(p)
    return r @ d


def policy_value(game: StochasticGame, joint: JointPolicy) -> np.ndarray:
    """Per-player value of the joint policy at the initial state, shape (n,)."""
    if isinstance(game.formulation, Discounted):
        return policy_value_discounted(game, joint)[:, game.initial_index]
    return policy_value_average(game, joint)


def check_ergodic(game: StochasticGame) -> bool:
    """Support-union test: one communicating class over all joint actions."""
    support = (game.transition.sum(axis=1) > 0.0).astype(np.int8)
    n_comp, _ = connected_components(support, directed=True, connection="strong")
    return n_comp == 1


# ---------------------------------------------------------------------------
# The single-agent view of one player against fixed opponents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InducedMDP:
    """The MDP a player faces once every other player's policy is fixed.

    Transitions and rewards are exact expectations over the opponents'
    action distributions, so a policy's value here equals its value in the
    underlying game against those opponents.
    """

    states: tuple[str, ...]
    actions: tuple[str, ...]
    transition: np.ndarray  # (|S|, |A_i|, |S|)
    reward: np.ndarray  # (|S|, |A_i|)
    formulation: Discounted | Average
    initial_index: int

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def as_game(self) -> StochasticGame:
        """The same MDP wrapped as a one-player stochastic game."""
        return StochasticGame(
            states=self.states,
            action_sets=(self.actions,),
            transition=self.transition,
            rewards=self.reward[np.newaxis, :, :],
            initial_state=self.states[self.initial_index],
            formulation=self.formulation,
        )


def induce_mdp(
    game: StochasticGame, i: int, others: Sequence[Policy]
) -> InducedMDP:
    """Marginalize all players but ``i`` out of the game.

    ``others`` lists the fixed policies of players 0..n-1 skipping i, in
    player order.
    """
    if not (0 <= i < game.n_players):
        raise MalformedInputError(f"player index {i} out of range")
    if len(others) != game.n_players - 1:
        raise MalformedInputError("need one fixed policy per opponent")
    opponents = list(others)
    shaped_t = game.transition.reshape(
        (game.n_states, *game.action_counts, game.n_states)
    )
    shaped_r = game.rewards[i].reshape((game.n_states, *game.action_counts))
    # Contract opponent axes one at a time; axis 1 + j is player j's actions.
    t = shaped_t
    r = shaped_r
    removed = 0
    for j in range(game.n_players):
        if j == i:
            continue
        pol = opponents.pop(0)
        if pol.probs.shape != (game.n_states, game.action_counts[j]):
            raise MalformedInputError(f"fixed policy for player {j} has wrong shape")
        axis = 1 + j - removed
        t = np.einsum(t, list(range(t.ndim)), pol.probs, [0, axis],
                      [k for k in range(t.ndim) if k != axis])
        r = np.einsum(r, list(range(r.ndim)), pol.probs, [0, axis],
                      [k for k in range(r.ndim) if k != axis])
        removed += 1
    return InducedMDP(
        states=game.states,
        actions=game.action_sets[i],
        transition=np.ascontiguousarray(t),
        reward=np.ascontiguousarray(r),
        formulation=game.formulation,
        initial_index=game.initial_index,
    )


def mdp_policy_value(mdp: InducedMDP, probs: np.ndarray) -> np.ndarray:
    """State values of a (|S|, |A|) policy array in the induced MDP.

    Average-reward MDPs return a constant vector (the gain broadcast over
    states) so callers can index by state uniformly.
    """
    p = np.einsum("sa,sat->st", probs, mdp.transition)
    r = np.einsum("sa,sa->s", probs, mdp.reward)
    if isinstance(mdp.formulation, Discounted):
        gamma = mdp.formulation.gamma
        return np.linalg.solve(np.eye(mdp.n_states) - gamma * p, r)
    d = stationary_distribution(p)
    return np.full(mdp.n_states, float(d @ r))


# ---------------------------------------------------------------------------
# Matrix-game values
# ---------------------------------------------------------------------------


def matrix_value(game: StochasticGame, joint: JointPolicy) -> np.ndarray:
    """Per-player value of a single-state game, multilinear in the strategies.

    The one-shot expected payoff sum_a R_i(a) prod_j pi_j(a_j), scaled by
    1 / (1 - gamma) under discounting and left unscaled under averaging.
    """
    if not game.is_matrix_game:
        raise UnsupportedOperationError(
            f"matrix value requires a single state, game has {game.n_states}"
        )
    w = joint_action_weights(game, joint)[0]
    base = game.rewards[:, 0, :] @ w
    if isinstance(game.formulation, Discounted):
        return base / (1.0 - game.formulation.gamma)
    return base


def simulate_average_reward(
    game: StochasticGame,
    joint: JointPolicy,
    steps: int,
    seed: int,
    start_state: int | None = None,
) -> np.ndarray:
    """Monte-Carlo long-run average reward per player along one trajectory.

    An independent oracle for `policy_value_average`: it walks the chain
    P_pi step by step and averages the per-state expected rewards, rather
    than solving for the stationary distribution.
    """
    p, r = chain_and_rewards(game, joint)
    rng = np.random.default_rng(seed)
    cumulative = [row.tolist() for row in np.cumsum(p, axis=1)]
    reward_rows = [r[:, s].tolist() for s in range(game.n_states)]
    totals = [0.0] * game.n_players
    n = game.n_players
    s = game.initial_index if start_state is None else start_state
    visits = [0] * game.n_states
    chunk = 10**6
    remaining = steps
    while remaining > 0:
        block = min(chunk, remaining)
        draws = rng.random(block).tolist()
        for u in draws:
            visits[s] += 1
            row = cumulative[s]
            nxt = len(row) - 1
            for idx, threshold in enumerate(row):
                if u < threshold:
                    nxt = idx
                    break
            s = nxt
        remaining -= block
    for state, count in enumerate(visits):
        if count:
            rr = reward_rows[state]
            for i in range(n):
                totals[i] += rr[i] * count
    return np.asarray(totals) / steps
