"""Restricted policy spaces, projections, and implicit games."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgl.games import (
    Average,
    Discounted,
    JointPolicy,
    MalformedInputError,
    Policy,
    UnsupportedOperationError,
    rps,
)
from sgl.restrictions import (
    ConvexHullGlobal,
    ConvexHullStatewise,
    DeterministicOnly,
    FixedCoordinates,
    FullSpace,
    Singleton,
    StateUniform,
    TauMapping,
    broken_actuator,
    build_implicit,
    convexity_probe,
    epsilon_exploration,
    identity_tau,
    map_policy,
    membership,
    project,
    project_to_simplex,
    space_equal,
    space_from_dict,
    space_to_dict,
)
from sgl.values import matrix_value, policy_value, policy_value_discounted
from util import random_game, random_joint_policy, random_policy

ALL_SPACES = {}


def _build_spaces():
    """One representative instance of every variant, over 2 states x 3 actions."""
    hull = ConvexHullGlobal(
        (
            Policy([[0.5, 0.5, 0.0], [0.2, 0.3, 0.5]]),
            Policy([[0.0, 0.5, 0.5], [0.6, 0.2, 0.2]]),
        )
    )
    statewise = ConvexHullStatewise(
        (
            (np.array([0.5, 0.5, 0.0]), np.array([0.0, 0.5, 0.5])),
            (np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])),
        )
    )
    return {
        "full": FullSpace(2, 3),
        "singleton": Singleton(Policy([[0.2, 0.3, 0.5], [0.1, 0.1, 0.8]])),
        "hull_global": hull,
        "hull_statewise": statewise,
        "state_uniform": StateUniform(2, 3),
        "fixed": FixedCoordinates(2, 3, ((0, 1, 0.5), (1, 0, 0.25))),
        "deterministic": DeterministicOnly(2, 3),
    }


ALL_SPACES = _build_spaces()


class TestMembership:
    def test_pinned_half_accepts_and_rejects(self):
        space = FixedCoordinates(1, 3, ((0, 1, 0.5),))
        assert membership(space, Policy([[0.25, 0.5, 0.25]]))
        assert not membership(space, Policy([[1 / 3, 1 / 3, 1 / 3]]))

    def test_hull_weight_recovery(self):
        hull = ConvexHullGlobal(
            (Policy([[0.5, 0.5, 0.0]]), Policy([[0.0, 0.5, 0.5]]))
        )
        # (1/3, 1/2, 1/6) = 2/3 * s1 + 1/3 * s2.
        assert membership(hull, Policy([[1 / 3, 0.5, 1 / 6]]))
        assert not membership(hull, Policy([[1 / 3, 1 / 3, 1 / 3]]))
        gap, weights = hull.recover_weights(Policy([[1 / 3, 0.5, 1 / 6]]))
        assert gap <= 1e-9
        assert np.allclose(weights, [2 / 3, 1 / 3], atol=1e-9)

    def test_state_uniform(self):
        space = StateUniform(2, 2)
        assert membership(space, Policy([[0.3, 0.7], [0.3, 0.7]]))
        assert not membership(space, Policy([[0.3, 0.7], [0.7, 0.3]]))

    def test_deterministic(self):
        space = DeterministicOnly(2, 2)
        assert membership(space, Policy.pure(2, 2, [1, 0]))
        assert not membership(space, Policy([[0.5, 0.5], [1.0, 0.0]]))

    def test_every_witness_is_a_member(self):
        for name, space in ALL_SPACES.items():
            assert membership(space, space.witness()), name

    def test_random_members_are_members(self):
        rng = np.random.default_rng(0)
        for name, space in ALL_SPACES.items():
            for _ in range(20):
                assert membership(space, space.random_member(rng)), name


class TestProjection:
    def test_simplex_projection_basics(self):
        assert np.allclose(project_to_simplex(np.array([1.0, 0.0]), 0.5), [0.5, 0.0])
        assert np.allclose(
            project_to_simplex(np.array([0.4, 0.4, 0.2])), [0.4, 0.4, 0.2]
        )

    def test_member_projects_to_itself(self):
        rng = np.random.default_rng(1)
        for name, space in ALL_SPACES.items():
            if not space.is_convex:
                continue
            member = space.random_member(rng)
            projected = project(space, member)
            assert np.max(np.abs(projected.probs - member.probs)) <= 1e-10, name

    def test_pin_projection_hand_solved(self):
        space = FixedCoordinates(1, 3, ((0, 1, 0.5),))
        projected = project(space, Policy([[1.0, 0.0, 0.0]]))
        assert np.allclose(projected.probs, [[0.5, 0.5, 0.0]], atol=1e-12)

    def test_state_uniform_projects_to_mean(self):
        space = StateUniform(2, 2)
        projected = project(space, Policy([[1.0, 0.0], [0.0, 1.0]]))
        assert np.allclose(projected.probs, 0.5, atol=1e-12)

    def test_idempotence_and_membership(self):
        rng = np.random.default_rng(2)
        for name, space in ALL_SPACES.items():
            if not space.is_convex:
                continue
            for _ in range(15):
                raw = random_policy(rng, space.n_states, space.n_actions)
                once = project(space, raw)
                twice = project(space, once)
                assert membership(space, once, tol=1e-9), name
                assert np.max(np.abs(twice.probs - once.probs)) <= 1e-10, name

    def test_deterministic_rejects_projection(self):
        with pytest.raises(UnsupportedOperationError):
            project(DeterministicOnly(1, 3), Policy([[0.5, 0.25, 0.25]]))

    def test_hull_projection_beats_vertices(self):
        rng = np.random.default_rng(3)
        hull = ALL_SPACES["hull_global"]
        for _ in range(10):
            raw = random_policy(rng, 2, 3)
            projected = project(hull, raw)
            d_proj = np.sum((projected.probs - raw.probs) ** 2)
            for g in hull.generators:
                assert d_proj <= np.sum((g.probs - raw.probs) ** 2) + 1e-12


class TestConvexity:
    def test_probe_matches_declared_flags(self):
        for name, space in ALL_SPACES.items():
            assert convexity_probe(space, trials=200, seed=7) == space.is_convex, name

    def test_singleton_and_state_uniform_convex(self):
        assert convexity_probe(ALL_SPACES["singleton"], trials=50, seed=0)
        assert convexity_probe(ALL_SPACES["state_uniform"], trials=50, seed=0)

    def test_deterministic_over_rps_not_convex(self):
        assert not convexity_probe(DeterministicOnly(1, 3), trials=100, seed=0)

    def test_single_point_deterministic_is_convex(self):
        space = DeterministicOnly(2, 1)
        assert space.is_convex
        assert convexity_probe(space, trials=20, seed=0)

    def test_statewise_blends_stay_inside_statewise_hull(self):
        rng = np.random.default_rng(5)
        space = ALL_SPACES["hull_statewise"]
        for _ in range(25):
            a = space.random_member(rng)
            b = space.random_member(rng)
            for alphas in ([0.0, 1.0], [1.0, 0.0], rng.uniform(size=2)):
                blend = Policy(
                    np.vstack(
                        [
                            alphas[s] * a.probs[s] + (1 - alphas[s]) * b.probs[s]
                            for s in range(2)
                        ]
                    )
                )
                assert membership(space, blend)

    def test_global_hull_fails_statewise_blend(self):
        """Per-state blending escapes spaces whose weights are tied across states."""
        hull = ConvexHullGlobal(
            (Policy([[1.0, 0.0], [1.0, 0.0]]), Policy([[0.0, 1.0], [0.0, 1.0]]))
        )
        a, b = hull.generators
        mixed_states = Policy(np.vstack([a.probs[0], b.probs[1]]))
        assert not membership(hull, mixed_states)
        uniform_space = StateUniform(2, 2)
        assert membership(uniform_space, a) and membership(uniform_space, b)
        assert not membership(uniform_space, mixed_states)


class TestSerialization:
    def test_round_trip_every_variant(self):
        states = ("s0", "s1")
        for name, space in ALL_SPACES.items():
            data = space_to_dict(space, states)
            back = space_from_dict(data, states, space.n_actions)
            assert space_equal(space, back), name

    def test_pins_serialize_by_state_name(self):
        data = space_to_dict(ALL_SPACES["fixed"], ("s0", "s1"))
        assert data["pins"] == [["s0", 1, 0.5], ["s1", 0, 0.25]]

    def test_unknown_variant_rejected(self):
        with pytest.raises(MalformedInputError):
            space_from_dict({"variant": "mystery"}, ("s0",), 2)

    def test_bad_statewise_generator_rejected(self):
        with pytest.raises(MalformedInputError):
            space_from_dict(
                {"variant": "convex_hull_statewise", "generators": {"s0": [[0.5, 0.6]]}},
                ("s0",),
                2,
            )


class TestPins:
    def test_pins_must_fit_the_simplex(self):
        with pytest.raises(MalformedInputError):
            FixedCoordinates(1, 2, ((0, 0, 0.7), (0, 1, 0.7)))
        with pytest.raises(MalformedInputError):
            FixedCoordinates(1, 2, ((0, 0, 0.3), (0, 1, 0.3)))  # fully pinned != 1
        FixedCoordinates(1, 2, ((0, 0, 0.3), (0, 1, 0.7)))

    def test_duplicate_pin_rejected(self):
        with pytest.raises(MalformedInputError):
            FixedCoordinates(1, 3, ((0, 1, 0.5), (0, 1, 0.5)))


class TestImplicitGames:
    def test_identity_tau_reproduces_game(self, rps_game):
        ig = build_implicit(rps_game, identity_tau(rps_game))
        assert np.array_equal(ig.game.transition, rps_game.transition)
        assert np.array_equal(ig.game.rewards, rps_game.rewards)
        assert ig.mapping_residual() <= 1e-15

    def test_rps_column_hull_matrix(self, rps_game, rps_column_hull):
        gens = np.stack([g.probs[0] for g in rps_column_hull.generators])
        tau = TauMapping(
            (identity_tau(rps_game).taus[0], gens[np.newaxis, :, :]),
            (rps_game.action_sets[0], ("s1", "s2")),
        )
        ig = build_implicit(rps_game, tau)
        expected = np.array([[-0.5, 0.0], [0.5, -0.5], [0.0, 0.5]])
        assert np.allclose(ig.game.payoff_matrix(0), expected, atol=1e-15)

    def test_blotto_row_hull_matrix(self, blotto_game, blotto_row_hull):
        gens = np.stack([g.probs[0] for g in blotto_row_hull.generators])
        tau = TauMapping(
            (gens[np.newaxis, :, :], identity_tau(blotto_game).taus[1]),
            (("g1", "g2", "g3"), blotto_game.action_sets[1]),
        )
        ig = build_implicit(blotto_game, tau)
        expected = np.array(
            [
                [1.0, 2.5, 0.75, -1.0],
                [-1.0, 1.75, 1.75, -1.0],
                [-1.0, 0.75, 2.5, 1.0],
            ]
        )
        assert np.allclose(ig.game.payoff_matrix(0), expected, atol=1e-15)

    def test_reward_override_replaces_table(self, rps_game):
        override = np.ones((2, 1, 9))
        ig = build_implicit(rps_game, identity_tau(rps_game), reward_override=override)
        assert np.array_equal(ig.game.rewards, override)
        assert np.array_equal(ig.game.transition, rps_game.transition)

    def test_tau_rows_must_sum_to_one(self, rps_game):
        taus = [np.array(t) for t in identity_tau(rps_game).taus]
        taus[0][0, 0, 0] = 0.5
        with pytest.raises(MalformedInputError):
            TauMapping(tuple(taus), rps_game.action_sets)

    def test_broken_actuator_rows_match_null(self):
        rng = np.random.default_rng(8)
        game = random_game(rng, n_states=3, action_counts=(3, 2))
        ig = broken_actuator(game, i=0, broken_action=2, null_action=0)
        for s in range(3):
            for b in range(2):
                j_broken = game.joint_index((2, b))
                j_null = game.joint_index((0, b))
                assert np.allclose(
                    ig.game.transition[s, j_broken], ig.game.transition[s, j_null]
                )
                assert np.allclose(
                    ig.game.rewards[:, s, j_broken], ig.game.rewards[:, s, j_null]
                )
        from sgl.games import validate

        assert validate(ig.game) == []

    def test_broken_actuator_range_check(self, rps_game):
        with pytest.raises(MalformedInputError):
            broken_actuator(rps_game, 0, broken_action=5, null_action=0)

    def test_epsilon_zero_is_identity(self, rps_game):
        ig = epsilon_exploration(rps_game, [0.0, 0.0])
        assert np.allclose(ig.game.rewards, rps_game.rewards, atol=1e-15)

    def test_epsilon_out_of_range(self, rps_game):
        with pytest.raises(MalformedInputError):
            epsilon_exploration(rps_game, [1.0, 0.0])

    def test_epsilon_mixes_toward_uniform_rows(self, rps_game):
        ig = epsilon_exploration(rps_game, [0.9999, 0.9999])
        # Near-total noise: every implicit payoff approaches the grand mean 0.
        assert np.max(np.abs(ig.game.rewards)) < 1e-3

    def test_epsilon_value_equals_mixed_explicit_value(self, rps_game):
        eps = [0.3, 0.3]
        ig = epsilon_exploration(rps_game, eps)
        for r in range(3):
            for c in range(3):
                implicit_joint = JointPolicy(
                    (Policy.pure(1, 3, [r]), Policy.pure(1, 3, [c]))
                )
                vi = matrix_value(ig.game, implicit_joint)
                mixed = map_policy(ig, implicit_joint)
                ve = matrix_value(rps_game, mixed)
                assert np.max(np.abs(vi - ve)) <= 1e-12

    def test_map_policy_examples(self, rps_game, rps_column_hull):
        gens = np.stack([g.probs[0] for g in rps_column_hull.generators])
        tau = TauMapping(
            (identity_tau(rps_game).taus[0], gens[np.newaxis, :, :]),
            (rps_game.action_sets[0], ("s1", "s2")),
        )
        ig = build_implicit(rps_game, tau)
        pure = JointPolicy((Policy.uniform(1, 3), Policy([[1.0, 0.0]])))
        assert np.allclose(
            map_policy(ig, pure)[1].probs, [[0.5, 0.5, 0.0]], atol=1e-15
        )
        mixed = JointPolicy((Policy.uniform(1, 3), Policy([[2 / 3, 1 / 3]])))
        assert np.allclose(
            map_policy(ig, mixed)[1].probs, [[1 / 3, 0.5, 1 / 6]], atol=1e-15
        )

    def test_value_preservation_property(self):
        """Implicit value equals explicit value of the mapped policy."""
        rng = np.random.default_rng(23)
        for k in range(100):
            average = k % 3 == 2
            game = random_game(
                rng,
                n_states=int(rng.integers(1, 4)),
                action_counts=(2, int(rng.integers(2, 4))),
                average=average,
            )
            taus = []
            names = []
            for i, count in enumerate(game.action_counts):
                n_implicit = int(rng.integers(1, 4))
                tau = rng.dirichlet(np.ones(count), size=(game.n_states, n_implicit))
                taus.append(tau)
                names.append(tuple(f"b{j}" for j in range(n_implicit)))
            ig = build_implicit(game, TauMapping(tuple(taus), tuple(names)))
            assert ig.mapping_residual() <= 1e-12
            implicit_joint = random_joint_policy(rng, ig.game)
            explicit_joint = map_policy(ig, implicit_joint)
            vi = policy_value(ig.game, implicit_joint)
            ve = policy_value(game, explicit_joint)
            assert np.max(np.abs(vi - ve)) <= 1e-10


@given(st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_projection_idempotence_random_spaces(seed):
    rng = np.random.default_rng(seed)
    n_states = int(rng.integers(1, 4))
    n_actions = int(rng.integers(2, 5))
    k = int(rng.integers(1, 4))
    space = ConvexHullGlobal(
        tuple(random_policy(rng, n_states, n_actions) for _ in range(k))
    )
    raw = random_policy(rng, n_states, n_actions)
    once = project(space, raw)
    twice = project(space, once)
    assert membership(space, once, tol=1e-9)
    assert np.max(np.abs(twice.probs - once.probs)) <= 1e-10
