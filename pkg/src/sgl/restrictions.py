"""Restricted policy spaces and implicit games.

A restricted policy space is a non-empty, membership-testable subset of one
player's policy polytope.  The variants here are the closed polytopal ones
(full space, a singleton, convex hulls of generator policies mixed with one
global weight vector or with independent per-state weights, the
state-uniform space that forces one shared strategy across all states, and
simplices with pinned coordinates) plus the finite non-convex set of
deterministic policies.

Two hull flavours are deliberately distinct.  A statewise hull lets the
blend weights vary per state, so it is closed under per-state blending of
members; a global hull (and the state-uniform space, which is the global
hull of the all-states-one-action policies) shares one weight vector across
states and is convex but *not* closed under per-state blending.  Several
solver routines hinge on that separation.

An implicit game rewrites a game from the point of view of limited agents:
each player's implicit actions are distributions over its explicit actions
(the tau mappings), transitions are the induced expectations, and rewards
default to the induced expectations as well (an explicit override models
reward shaping, where tau stays the identity).  With default rewards, the
value of any implicit joint policy equals the explicit value of its mapped
policy; `map_policy` performs that mapping.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import linprog

from .games import (
    JointPolicy,
    MalformedInputError,
    Policy,
    StochasticGame,
    STRUCTURAL_TOL,
    UnsupportedOperationError,
    validate,
)

MEMBERSHIP_TOL = 1e-9
PROJECTION_TOL = 1e-10
MAX_ENUMERATION = 10**6  # pure-policy enumeration guard
MAX_HULL_GENERATORS = 12  # exact active-set projection enumerates supports


def project_to_simplex(v: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Euclidean projection of v onto {x >= 0, sum x = total} (exact sort method)."""
    v = np.asarray(v, dtype=float)
    if total < 0:
        raise ValueError("simplex mass must be nonnegative")
    if total == 0.0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    ind = np.arange(1, v.size + 1)
    rho = int(np.count_nonzero(u - css / ind > 0))
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def simplex_grid(k: int, resolution: float) -> list[tuple[float, ...]]:
    """All length-k probability vectors with entries on a grid of the given step.

    The step is snapped to 1/N for N = round(1/resolution) so the grid
    always contains every vertex of the simplex.
    """
    if k < 1:
        raise ValueError("need at least one coordinate")
    if k == 1:
        return [(1.0,)]
    n = max(1, round(1.0 / resolution))
    points: list[tuple[float, ...]] = []

    def rec(prefix: list[int], remaining: int, slots: int) -> None:
        if slots == 1:
            points.append(tuple((p / n) for p in prefix + [remaining]))
            return
        for c in range(remaining + 1):
            rec(prefix + [c], remaining - c, slots - 1)

    rec([], n, k)
    return points


def _recover_weights_lp(
    targets: np.ndarray, generators: np.ndarray
) -> tuple[float, np.ndarray]:
    """Best sup-norm fit of simplex weights: min_t |G^T w - p|_inf <= t.

    ``generators`` is (k, D), ``targets`` is (D,).  Returns (t*, w*).
    """
    k, d = generators.shape
    # Variables: w_0..w_{k-1}, t.  Constraints: +-(G^T w - p) <= t.
    a_ub = np.zeros((2 * d, k + 1))
    b_ub = np.zeros(2 * d)
    a_ub[:d, :k] = generators.T
    a_ub[:d, k] = -1.0
    b_ub[:d] = targets
    a_ub[d:, :k] = -generators.T
    a_ub[d:, k] = -1.0
    b_ub[d:] = -targets
    a_eq = np.zeros((1, k + 1))
    a_eq[0, :k] = 1.0
    res = linprog(
        c=np.eye(k + 1)[k],
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=[1.0],
        bounds=[(0.0, None)] * k + [(0.0, None)],
        method="highs",
    )
    if not res.success:
        raise ArithmeticError(f"weight recovery LP failed: {res.message}")
    return float(res.fun), np.asarray(res.x[:k])


def _project_onto_hull(targets: np.ndarray, generators: np.ndarray) -> np.ndarray:
    """argmin_w |G^T w - p|_2 over the weight simplex, by exact support enumeration.

    Every KKT point of the quadratic sits on some support, so trying all
    supports and keeping the feasible minimizer is exact for the small
    generator counts used here.
    """
    k, _ = generators.shape
    if k > MAX_HULL_GENERATORS:
        raise UnsupportedOperationError(
            f"exact hull projection supports at most {MAX_HULL_GENERATORS} generators"
        )
    gram = generators @ generators.T
    lin = generators @ targets
    best_obj, best_w = np.inf, None
    for size in range(1, k + 1):
        for support in itertools.combinations(range(k), size):
            idx = list(support)
            kkt = np.zeros((size + 1, size + 1))
            kkt[:size, :size] = 2.0 * gram[np.ix_(idx, idx)]
            kkt[:size, size] = 1.0
            kkt[size, :size] = 1.0
            rhs = np.zeros(size + 1)
            rhs[:size] = 2.0 * lin[idx]
            rhs[size] = 1.0
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            w_support = sol[:size]
            if np.any(w_support < -1e-11):
                continue
            w = np.zeros(k)
            w[idx] = np.clip(w_support, 0.0, None)
            total = w.sum()
            if total <= 0:
                continue
            w /= total
            obj = float(np.sum((generators.T @ w - targets) ** 2))
            if obj < best_obj - 1e-15:
                best_obj, best_w = obj, w
    if best_w is None:
        raise ArithmeticError("hull projection found no feasible support")
    return best_w


# ---------------------------------------------------------------------------
# Space variants
# ---------------------------------------------------------------------------


class RestrictedPolicySpace:
    """Interface shared by every restriction variant.

    Concrete spaces know their policy shape, answer membership queries,
    project (when convex), expose extreme points, and expose a low-
    dimensional parameterization used by grid sweeps.
    """

    n_states: int
    n_actions: int
    is_convex: bool

    def contains(self, policy: Policy, tol: float = MEMBERSHIP_TOL) -> bool:
        raise NotImplementedError

    def project(self, policy: Policy) -> Policy:
        raise NotImplementedError

    def witness(self) -> Policy:
        """Any member, as evidence of non-emptiness."""
        raise NotImplementedError

    def random_member(self, rng: np.random.Generator) -> Policy:
        raise NotImplementedError

    def vertices(self) -> list[Policy]:
        """Extreme points; exact optimizers of linear objectives live here."""
        raise NotImplementedError

    def param_dim(self) -> int:
        raise NotImplementedError

    def param_points(self, resolution: float) -> list[tuple[tuple[float, ...], Policy]]:
        """Grid of (parameter tuple, policy) pairs covering the space."""
        raise NotImplementedError

    def _check_shape(self, policy: Policy) -> None:
        if policy.probs.shape != (self.n_states, self.n_actions):
            raise MalformedInputError(
                f"policy shape {policy.probs.shape} does not match space "
                f"({self.n_states}, {self.n_actions})"
            )


@dataclass(frozen=True)
class FullSpace(RestrictedPolicySpace):
    """The whole policy polytope: no restriction at all."""

    n_states: int
    n_actions: int
    is_convex: bool = True

    def contains(self, policy: Policy, tol: float = MEMBERSHIP_TOL) -> bool:
        self._check_shape(policy)
        return True

    def project(self, policy: Policy) -> Policy:
        self._check_shape(policy)
        return Policy(
            np.vstack([project_to_simplex(row) for row in policy.probs])
        )

    def witness(self) -> Policy:
        return Policy.uniform(self.n_states, self.n_actions)

    def random_member(self, rng: np.random.Generator) -> Policy:
        return Policy(rng.dirichlet(np.ones(self.n_actions), size=self.n_states))

    def vertices(self) -> list[Policy]:
        total = self.n_actions**self.n_states
        if total > MAX_ENUMERATION:
            raise UnsupportedOperationError(
                f"{total} pure policies exceeds the enumeration bound"
            )
        return [
            Policy.pure(self.n_states, self.n_actions, choice)
            for choice in itertools.product(
                range(self.n_actions), repeat=self.n_states
            )
        ]

    def param_dim(self) -> int:
        return self.n_states * (self.n_actions - 1)

    def param_points(self, resolution: float):
        per_state = simplex_grid(self.n_actions, resolution)
        points = []
        for combo in itertools.product(per_state, repeat=self.n_states):
            theta = tuple(x for row in combo for x in row[:-1])
            points.append((theta, Policy(np.array(combo))))
        return points


@dataclass(frozen=True)
class Singleton(RestrictedPolicySpace):
    """Exactly one admissible policy."""

    policy: Policy
    is_convex: bool = True

    @property
    def n_states(self) -> int:  # type: ignore[override]
        return self.policy.n_states

    @property
    def n_actions(self) -> int:  # type: ignore[override]
        return self.policy.n_actions

    def contains(self, policy: Policy, tol: float = MEMBERSHIP_TOL) -> bool:
        self._check_shape(policy)
        return bool(np.max(np.abs(policy.probs - self.policy.probs)) <= tol)

    def project(self, policy: Policy) -> Policy:
        self._check_shape(policy)
        return self.policy

    def witness(self) -> Policy:
        return self.policy

    def random_member(self, rng: np.random.Generator) -> Policy:
        return self.policy

    def vertices(self) -> list[Policy]:
        return [self.policy]

    def param_dim(self) -> int:
        return 0

    def param_points(self, resolution: float):
        return [((), self.policy)]


@dataclass(frozen=True)
class ConvexHullGlobal(RestrictedPolicySpace):
    """Mixtures of generator policies sharing one weight vector across states."""

    generators: tuple[Policy, ...]
    is_convex: bool = True

    def __post_init__(self) -> None:
        if not self.generators:
            raise MalformedInputError("hull needs at least one generator")
        shape = self.generators[0].probs.shape
        if any(g.probs.shape != shape for g in self.generators):
            raise MalformedInputError("hull generators must share one shape")
        object.__setattr__(self, "generators", tuple(self.generators))

    @property
    def n_states(self) -> int:  # type: ignore[override]
        return self.generators[0].n_states

    @property
    def n_actions(self) -> int:  # type: ignore[override]
        return self.generators[0].n_actions

    @property
    def k(self) -> int:
        return len(self.generators)

    def _stacked(self) -> np.ndarray:
        """Generators flattened to (k, n_states * n_actions)."""
        return np.stack([g.probs.ravel() for g in self.generators])

    def policy_of_weights(self, weights: Sequence[float]) -> Policy:
        w = np.asarray(weights, dtype=float)
        probs = np.tensordot(w, np.stack([g.probs for g in self.generators]), axes=1)
        # Blends of valid rows can drift at machine scale; renormalize exactly.
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum(axis=1, keepdims=True)
        return Policy(probs)

    def recover_weights(self, policy: Policy) -> tuple[float, np.ndarray]:
        self._check_shape(policy)
        return _recover_weights_lp(policy.probs.ravel(), self._stacked())

    def contains(self, policy: Policy, tol: float = MEMBERSHIP_TOL) -> bool:
        gap, _ = self.recover_weights(policy)
        return gap <= tol

    def project(self, policy: Policy) -> Policy:
        self._check_shape(policy)
        w = _project_onto_hull(policy.probs.ravel(), self._stacked())
        return self.policy_of_weights(w)

    def witness(self) -> Policy:
        return self.generators[0]

    def random_member(self, rng: np.random.Generator) -> Policy:
        return self.policy_of_weights(rng.dirichlet(np.ones(self.k)))

    def vertices(self) -> list[Policy]:
        return list(self.generators)

    def param_dim(self) -> int:
        return self.k - 1

    def param_points(self, resolution: float):
        return [
            (tuple(w[:-1]), self.policy_of_weights(np.asarray(w)))
            for w in simplex_grid(self.k, resolution)
        ]


def state_uniform_space(n_states: int, n_actions: int) -> "StateUniform":
    return StateUniform(n_states=n_states, n_actions=n_actions)


@dataclass(frozen=True)
class StateUniform(RestrictedPolicySpace):
    """Policies forced to play one shared mixed strategy in every state."""

    n_states: int
    n_actions: int
    is_convex: bool = True

    def contains(self, policy: Policy, tol: float = MEMBERSHIP_TOL) -> bool:
        self._check_shape(policy)
        return bool(np.max(np.abs(policy.probs - policy.probs[0])) <= tol)

    def project(self, policy: Policy) -> Policy:
        self._check_shape(policy)
        shared = project_to_simplex(policy.probs.mean(axis=0))
        return Policy.state_uniform(self.n_states, shared)

    def witness(self) -> Policy:
        return Policy.uniform(self.n_states, self.n_actions)

    def random_member(self, rng: np.random.Generator) -> Policy:
        return Policy.state_uniform(self.n_states, rng.dirichlet(np.ones(self.n_actions)))

    def vertices(self) -> list[Policy]:
        return [
            Policy.pure(self.n_states, self.n_actions, [a] * self.n_states)
            for a in range(self.n_actions)
        ]

    def param_dim(self) -> int:
        return self.n_actions - 1

    def param_points(self, resolution: float):
        return [
            (tuple(w[:-1]), Policy.state_uniform(self.n_states, np.asarray(w)))
            for w in simplex_grid(self.n_actions, resolution)
        ]

    def as_hull(self) -> ConvexHullGlobal:
        """The equivalent global hull over the all-states-one-action policies."""
        return ConvexHullGlobal(tuple(self.vertices()))


@dataclass(frozen=True)
class ConvexHullStatewise(RestrictedPolicySpace):
    """Per-state convex strategy sets, blended independently at each state.

    ``generators[s]`` lists the extreme strategies available at state s.
    """

    generators: tuple[tuple[np.ndarray, ...], ...]
    is_convex: bool = True

    def __post_init__(self) -> None:
        gens = tuple(
            tuple(np.asarray(g, dtype=float) for g in per_state)
            for per_state in self.generators
        )
        if not gens or any(len(per_state) == 0 for per_state in gens):
            raise MalformedInputError("every state needs at least one generator")
        width = gens[0][0].size
        for per_state in gens:
            for g in per_state:
                if g.shape != (width,):
                    raise MalformedInputError("generator strategies must share one length")
        object.__setattr__(self, "generators", gens)

    @property
    def n_states(self) -> int:  # type: ignore[override]
        return len(self.generators)

    @property
    def n_actions(self) -> int:  # type: ignore[override]
        return self.generators[0][0].size

    def contains(self, policy: Policy, tol: float = MEMBERSHIP_TOL) -> bool:
        self._check_shape(policy)
        for s in range(self.n_states):
            stacked = np.stack(self.generators[s])
            gap, _ = _recover_weights_lp(policy.probs[s], stacked)
            if gap > tol:
                return False
        return True

    def project(self, policy: Policy) -> Policy:
        self._check_shape(policy)
        rows = []
        for s in range(self.n_states):
            stacked = np.stack(self.generators[s])
            w = _project_onto_hull(policy.probs[s], stacked)
            rows.append(stacked.T @ w)
        probs = np.vstack(rows)
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum(axis=1, keepdims=True)
        return Policy(probs)

    def witness(self) -> Policy:
        return Policy(np.vstack([per_state[0] for per_state in self.generators]))

    def random_member(self, rng: np.random.Generator) -> Policy:
        rows = []
        for per_state in self.generators:
            w = rng.dirichlet(np.ones(len(per_state)))
            rows.append(np.stack(per_state).T @ w)
        return Policy(np.vstack(rows))

    def vertices(self) -> list[Policy]:
        counts = [len(per_state) for per_state in self.generators]
        total = int(np.prod(counts))
        if total > MAX_ENUMERATION:
            raise UnsupportedOperationError("too many statewise vertex combinations")
        out = []
        for combo in itertools.product(*(range(c) for c in counts)):
            out.append(
                Policy(
                    np.vstack(
                        [self.generators[s][combo[s]] for s in range(self.n_states)]
                    )
                )
            )
        return out

    def generators_at(self, s: int) -> np.ndarray:
        return np.stack(self.generators[s])

    def param_dim(self) -> int:
        return sum(len(per_state) - 1 for per_state in self.generators)

    def param_points(self, resolution: float):
        per_state_grids = [
            simplex_grid(len(per_state), resolution) for per_state in self.generators
        ]
        points = []
        for combo in itertools.product(*per_state_grids):
            rows = [
                np.stack(self.generators[s]).T @ np.asarray(w)
                for s, w in enumerate(combo)
            ]
            theta = tuple(x for w in combo for x in w[:-1])
            points.append((theta, Policy(np.vstack(rows))))
        return points


@dataclass(frozen=True)
class FixedCoordinates(RestrictedPolicySpace):
    """Simplex with pinned entries: listed (state, action) pairs hold fixed mass."""

    n_states: int
    n_actions: int
    pins: tuple[tuple[int, int, float], ...]
    is_convex: bool = True

    def __post_init__(self) -> None:
        pins = tuple((int(s), int(a), float(p)) for s, a, p in self.pins)
        seen = set()
        per_state_sum: dict[int, float] = {}
        for s, a, p in pins:
            if not (0 <= s < self.n_states and 0 <= a < self.n_actions):
                raise MalformedInputError(f"pin ({s}, {a}) out of range")
            if (s, a) in seen:
                raise MalformedInputError(f"duplicate pin for ({s}, {a})")
            if p < -STRUCTURAL_TOL or p > 1.0 + STRUCTURAL_TOL:
                raise MalformedInputError(f"pin probability {p} outside [0, 1]")
            seen.add((s, a))
            per_state_sum[s] = per_state_sum.get(s, 0.0) + p
        for s, total in per_state_sum.items():
            if total > 1.0 + STRUCTURAL_TOL:
                raise MalformedInputError(f"pins at state {s} sum to {total} > 1")
            n_pinned = sum(1 for ps, _, _ in pins if ps == s)
            if n_pinned == self.n_actions and abs(total - 1.0) > STRUCTURAL_TOL:
                raise MalformedInputError(f"state {s} fully pinned but mass != 1")
        object.__setattr__(self, "pins", pins)

    def _pin_rows(self) -> list[dict[int, float]]:
        rows: list[dict[int, float]] = [dict() for _ in range(self.n_states)]
        for s, a, p in self.pins:
            rows[s][a] = p
        return rows

    def contains(self, policy: Policy, tol: float = MEMBERSHIP_TOL) -> bool:
        self._check_shape(policy)
        for s, a, p in self.pins:
            if abs(policy.probs[s, a] - p) > tol:
                return False
        return True

    def project(self, policy: Policy) -> Policy:
        self._check_shape(policy)
        probs = np.array(policy.probs)
        for s, row_pins in enumerate(self._pin_rows()):
            if not row_pins:
                probs[s] = project_to_simplex(probs[s])
                continue
            free = [a for a in range(self.n_actions) if a not in row_pins]
            mass = 1.0 - sum(row_pins.values())
            new_row = np.zeros(self.n_actions)
            for a, p in row_pins.items():
                new_row[a] = p
            if free:
                new_row[free] = project_to_simplex(probs[s, free], total=max(mass, 0.0))
            probs[s] = new_row
        return Policy(probs)

    def witness(self) -> Policy:
        probs = np.zeros((self.n_states, self.n_actions))
        for s, row_pins in enumerate(self._pin_rows()):
            free = [a for a in range(self.n_actions) if a not in row_pins]
            mass = 1.0 - sum(row_pins.values())
            for a, p in row_pins.items():
                probs[s, a] = p
            if free:
                probs[s, free] = mass / len(free)
        return Policy(probs)

    def random_member(self, rng: np.random.Generator) -> Policy:
        probs = np.zeros((self.n_states, self.n_actions))
        for s, row_pins in enumerate(self._pin_rows()):
            free = [a for a in range(self.n_actions) if a not in row_pins]
            mass = 1.0 - sum(row_pins.values())
            for a, p in row_pins.items():
                probs[s, a] = p
            if free:
                probs[s, free] = mass * rng.dirichlet(np.ones(len(free)))
        return Policy(probs)

    def vertex_rows_per_state(self) -> list[list[np.ndarray]]:
        """Per state, the extreme strategies: pins fixed, free mass on one action."""
        per_state_rows: list[list[np.ndarray]] = []
        for s, row_pins in enumerate(self._pin_rows()):
            free = [a for a in range(self.n_actions) if a not in row_pins]
            mass = 1.0 - sum(row_pins.values())
            base = np.zeros(self.n_actions)
            for a, p in row_pins.items():
                base[a] = p
            rows = []
            if not free or mass <= STRUCTURAL_TOL:
                rows.append(base)
            else:
                for a in free:
                    row = base.copy()
                    row[a] = mass
                    rows.append(row)
            per_state_rows.append(rows)
        return per_state_rows

    def vertices(self) -> list[Policy]:
        """Pinned coordinates fixed, all free mass on one free action per state."""
        per_state_rows = self.vertex_rows_per_state()
        total = int(np.prod([len(r) for r in per_state_rows]))
        if total > MAX_ENUMERATION:
            raise UnsupportedOperationError("too many pinned-simplex vertices")
        return [
            Policy(np.vstack(rows))
            for rows in itertools.product(*per_state_rows)
        ]

    def param_dim(self) -> int:
        dims = 0
        for row_pins in self._pin_rows():
            free = self.n_actions - len(row_pins)
            dims += max(free - 1, 0)
        return dims

    def param_points(self, resolution: float):
        per_state: list[list[np.ndarray]] = []
        for s, row_pins in enumerate(self._pin_rows()):
            free = [a for a in range(self.n_actions) if a not in row_pins]
            mass = 1.0 - sum(row_pins.values())
            base = np.zeros(self.n_actions)
            for a, p in row_pins.items():
                base[a] = p
            rows = []
            if not free or mass <= STRUCTURAL_TOL:
                rows.append(base)
            else:
                for w in simplex_grid(len(free), resolution):
                    row = base.copy()
                    row[free] = mass * np.asarray(w)
                    rows.append(row)
            per_state.append(rows)
        points = []
        for combo in itertools.product(*per_state):
            policy = Policy(np.vstack(combo))
            theta = tuple(policy.probs.ravel())
            points.append((theta, policy))
        return points


@dataclass(frozen=True)
class DeterministicOnly(RestrictedPolicySpace):
    """The finite set of pure policies; non-convex once it has two members."""

    n_states: int
    n_actions: int

    @property
    def is_convex(self) -> bool:  # type: ignore[override]
        return self.n_actions**self.n_states <= 1

    def contains(self, policy: Policy, tol: float = MEMBERSHIP_TOL) -> bool:
        self._check_shape(policy)
        near_one = np.abs(policy.probs.max(axis=1) - 1.0) <= tol
        return bool(np.all(near_one))

    def project(self, policy: Policy) -> Policy:
        raise UnsupportedOperationError("cannot project onto a non-convex space")

    def witness(self) -> Policy:
        return Policy.pure(self.n_states, self.n_actions, [0] * self.n_states)

    def random_member(self, rng: np.random.Generator) -> Policy:
        choices = rng.integers(0, self.n_actions, size=self.n_states)
        return Policy.pure(self.n_states, self.n_actions, choices)

    def vertices(self) -> list[Policy]:
        total = self.n_actions**self.n_states
        if total > MAX_ENUMERATION:
            raise UnsupportedOperationError(
                f"{total} pure policies exceeds the enumeration bound"
            )
        return [
            Policy.pure(self.n_states, self.n_actions, choice)
            for choice in itertools.product(range(self.n_actions), repeat=self.n_states)
        ]

    def param_dim(self) -> int:
        return 1

    def param_points(self, resolution: float):
        return [((float(k),), pol) for k, pol in enumerate(self.vertices())]


# ---------------------------------------------------------------------------
# Operations over spaces
# ---------------------------------------------------------------------------


def membership(
    space: RestrictedPolicySpace, policy: Policy, tol: float = MEMBERSHIP_TOL
) -> bool:
    return space.contains(policy, tol)


def project(space: RestrictedPolicySpace, policy: Policy) -> Policy:
    if not space.is_convex:
        raise UnsupportedOperationError("cannot project onto a non-convex space")
    return space.project(policy)


def convexity_probe(
    space: RestrictedPolicySpace, trials: int = 200, seed: int = 0
) -> bool:
    """Sample member pairs and check the midpoint; False on any counterexample."""
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        a = space.random_member(rng)
        b = space.random_member(rng)
        mid = Policy(0.5 * a.probs + 0.5 * b.probs)
        if not space.contains(mid, tol=MEMBERSHIP_TOL):
            return False
    return True


def full_space_for(game: StochasticGame, i: int) -> FullSpace:
    return FullSpace(game.n_states, game.action_counts[i])


# ---------------------------------------------------------------------------
# Implicit games
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TauMapping:
    """Per-player stochastic maps from implicit actions to explicit actions.

    ``taus[i][s, b, a]`` is the probability that implicit action b of
    player i realizes explicit action a in state s; each (s, b) row is a
    distribution.
    """

    taus: tuple[np.ndarray, ...]
    implicit_action_sets: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        taus = tuple(np.asarray(t, dtype=float) for t in self.taus)
        names = tuple(tuple(a) for a in self.implicit_action_sets)
        if len(taus) != len(names):
            raise MalformedInputError("need implicit action names for every player")
        for i, t in enumerate(taus):
            if t.ndim != 3:
                raise MalformedInputError(f"tau for player {i} must be 3-D")
            if t.shape[1] != len(names[i]):
                raise MalformedInputError(f"tau/{i} rows disagree with action names")
            if np.any(t < -STRUCTURAL_TOL):
                raise MalformedInputError(f"tau/{i} has negative entries")
            sums = t.sum(axis=2)
            if np.max(np.abs(sums - 1.0)) > STRUCTURAL_TOL:
                raise MalformedInputError(
                    f"tau rows for player {i} must each sum to 1"
                )
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "implicit_action_sets", names)

    @property
    def n_players(self) -> int:
        return len(self.taus)

    def identity_like(self) -> bool:
        return all(
            t.shape[1] == t.shape[2]
            and np.max(np.abs(t - np.eye(t.shape[1]))) <= STRUCTURAL_TOL
            for t in self.taus
        )


def identity_tau(game: StochasticGame) -> TauMapping:
    return TauMapping(
        taus=tuple(
            np.tile(np.eye(k), (game.n_states, 1, 1)) for k in game.action_counts
        ),
        implicit_action_sets=game.action_sets,
    )


@dataclass(frozen=True)
class ImplicitGame:
    """A derived game together with the tau mappings tying it to its source."""

    game: StochasticGame
    tau: TauMapping
    explicit: StochasticGame

    def mapping_residual(self) -> float:
        """Max deviation of the implicit transitions from the tau expectation."""
        weights = _joint_tau_weights(self.explicit, self.tau)
        worst = 0.0
        for s in range(self.explicit.n_states):
            expected = weights[s] @ self.explicit.transition[s]
            worst = max(worst, float(np.max(np.abs(expected - self.game.transition[s]))))
        return worst


def _joint_tau_weights(explicit: StochasticGame, tau: TauMapping) -> list[np.ndarray]:
    """Per state, the (implicit-joint x explicit-joint) realization weights.

    Row-major joint indexing lets the per-player tau slices combine by
    Kronecker product in player order.
    """
    out = []
    for s in range(explicit.n_states):
        w = np.ones((1, 1))
        for t in tau.taus:
            w = np.kron(w, t[s])
        out.append(w)
    return out


def build_implicit(
    explicit: StochasticGame,
    tau: TauMapping,
    reward_override: np.ndarray | None = None,
) -> ImplicitGame:
    """Derive the implicit game induced by tau.

    Transitions are the tau expectations of the explicit transitions.
    Rewards default to the tau expectations of the explicit rewards; a
    ``reward_override`` of shape (n, |S|, implicit joint count) replaces
    them wholesale (reward shaping keeps tau the identity and overrides
    only this table).
    """
    if tau.n_players != explicit.n_players:
        raise MalformedInputError("tau must cover every player")
    for i, t in enumerate(tau.taus):
        if t.shape[0] != explicit.n_states or t.shape[2] != explicit.action_counts[i]:
            raise MalformedInputError(f"tau for player {i} has wrong shape")
    weights = _joint_tau_weights(explicit, tau)
    n_implicit_joint = weights[0].shape[0]
    transition = np.zeros((explicit.n_states, n_implicit_joint, explicit.n_states))
    rewards = np.zeros((explicit.n_players, explicit.n_states, n_implicit_joint))
    for s in range(explicit.n_states):
        transition[s] = weights[s] @ explicit.transition[s]
        for i in range(explicit.n_players):
            rewards[i, s] = weights[s] @ explicit.rewards[i, s]
    if reward_override is not None:
        reward_override = np.asarray(reward_override, dtype=float)
        if reward_override.shape != rewards.shape:
            raise MalformedInputError(
                f"reward override shape {reward_override.shape} != {rewards.shape}"
            )
        rewards = reward_override
    implicit = StochasticGame(
        states=explicit.states,
        action_sets=tau.implicit_action_sets,
        transition=transition,
        rewards=rewards,
        initial_state=explicit.initial_state,
        formulation=explicit.formulation,
    )
    problems = validate(implicit)
    if problems:
        raise MalformedInputError("implicit game invalid: " + "; ".join(problems))
    return ImplicitGame(game=implicit, tau=tau, explicit=explicit)


def broken_actuator(
    explicit: StochasticGame, i: int, broken_action: int, null_action: int
) -> ImplicitGame:
    """Implicit game where one of player i's actions behaves like a null action.

    Transition and reward rows with the broken component equal the rows
    with the null component; tau maps broken deterministically to null.
    """
    k = explicit.action_counts[i]
    if not (0 <= broken_action < k and 0 <= null_action < k):
        raise MalformedInputError("broken/null action out of range")
    base = identity_tau(explicit)
    taus = [np.array(t) for t in base.taus]
    taus[i][:, broken_action, :] = 0.0
    taus[i][:, broken_action, null_action] = 1.0
    return build_implicit(
        explicit, TauMapping(tuple(taus), explicit.action_sets)
    )


def epsilon_exploration(
    explicit: StochasticGame, eps: Sequence[float]
) -> ImplicitGame:
    """Implicit game for per-player epsilon-greedy execution noise.

    Each player's chosen action is kept with probability 1 - eps_i and
    replaced by a uniform action with probability eps_i.
    """
    if len(eps) != explicit.n_players:
        raise MalformedInputError("need one epsilon per player")
    taus = []
    for i, e in enumerate(eps):
        e = float(e)
        if not (0.0 <= e < 1.0):
            raise MalformedInputError(f"epsilon {e} outside [0, 1)")
        k = explicit.action_counts[i]
        mat = (1.0 - e) * np.eye(k) + e / k
        taus.append(np.tile(mat, (explicit.n_states, 1, 1)))
    return build_implicit(
        explicit, TauMapping(tuple(taus), explicit.action_sets)
    )


def map_policy(ig: ImplicitGame, implicit_joint: JointPolicy) -> JointPolicy:
    """Translate an implicit joint policy into the explicit game.

    pi_i(s, a) = sum_b pihat_i(s, b) tau_i(s, b, a).
    """
    if len(implicit_joint) != ig.game.n_players:
        raise MalformedInputError("implicit joint policy has wrong player count")
    mapped = []
    for i, pol in enumerate(implicit_joint.policies):
        if pol.probs.shape != (ig.game.n_states, ig.game.action_counts[i]):
            raise MalformedInputError(f"implicit policy {i} has wrong shape")
        probs = np.einsum("sb,sba->sa", pol.probs, ig.tau.taus[i])
        mapped.append(Policy(probs))
    return JointPolicy(tuple(mapped))


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------


def space_to_dict(space: RestrictedPolicySpace, states: Sequence[str]) -> dict:
    from .games import policy_to_dict

    if isinstance(space, FullSpace):
        return {"variant": "full", "states": len(states), "actions": space.n_actions}
    if isinstance(space, Singleton):
        return {"variant": "singleton", "policy": policy_to_dict(space.policy, states)}
    if isinstance(space, ConvexHullGlobal):
        return {
            "variant": "convex_hull_global",
            "generators": [policy_to_dict(g, states) for g in space.generators],
        }
    if isinstance(space, ConvexHullStatewise):
        return {
            "variant": "convex_hull_statewise",
            "generators": {
                states[s]: [[float(x) for x in g] for g in per_state]
                for s, per_state in enumerate(space.generators)
            },
        }
    if isinstance(space, StateUniform):
        return {
            "variant": "state_uniform",
            "states": len(states),
            "actions": space.n_actions,
        }
    if isinstance(space, FixedCoordinates):
        return {
            "variant": "fixed_coordinates",
            "states": len(states),
            "actions": space.n_actions,
            "pins": [[states[s], a, p] for s, a, p in space.pins],
        }
    if isinstance(space, DeterministicOnly):
        return {
            "variant": "deterministic_only",
            "states": len(states),
            "actions": space.n_actions,
        }
    raise MalformedInputError(f"unknown space type {type(space).__name__}")


def space_from_dict(
    data: dict, states: Sequence[str], n_actions: int
) -> RestrictedPolicySpace:
    from .games import policy_from_dict

    if not isinstance(data, dict) or "variant" not in data:
        raise MalformedInputError("space object must carry a 'variant' field")
    variant = data["variant"]
    n_states = len(states)
    if variant == "full":
        return FullSpace(n_states, n_actions)
    if variant == "singleton":
        return Singleton(policy_from_dict(data["policy"], states, n_actions))
    if variant == "convex_hull_global":
        gens = tuple(
            policy_from_dict(g, states, n_actions) for g in data["generators"]
        )
        return ConvexHullGlobal(gens)
    if variant == "convex_hull_statewise":
        raw = data["generators"]
        missing = set(states) - set(raw)
        if missing:
            raise MalformedInputError(f"statewise hull missing states {sorted(missing)}")
        gens = tuple(
            tuple(np.asarray(g, dtype=float) for g in raw[state]) for state in states
        )
        for per_state in gens:
            for g in per_state:
                if g.shape != (n_actions,) or np.any(g < -MEMBERSHIP_TOL) or abs(g.sum() - 1.0) > MEMBERSHIP_TOL:
                    raise MalformedInputError("statewise generator is not a distribution")
        return ConvexHullStatewise(gens)
    if variant == "state_uniform":
        return StateUniform(n_states, n_actions)
    if variant == "fixed_coordinates":
        pins = []
        for entry in data["pins"]:
            state_name, action, prob = entry
            if state_name not in states:
                raise MalformedInputError(f"pin for unknown state {state_name!r}")
            pins.append((list(states).index(state_name), int(action), float(prob)))
        return FixedCoordinates(n_states, n_actions, tuple(pins))
    if variant == "deterministic_only":
        return DeterministicOnly(n_states, n_actions)
    raise MalformedInputError(f"unknown space variant {variant!r}")


def save_spaces(
    spaces: Sequence[RestrictedPolicySpace], game: StochasticGame, path
) -> None:
    payload = [space_to_dict(sp, game.states) for sp in spaces]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def load_spaces(path, game: StochasticGame) -> list[RestrictedPolicySpace]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedInputError(f"cannot read spaces file {path}: {exc}") from exc
    if not isinstance(data, list) or len(data) != game.n_players:
        raise MalformedInputError("spaces file must list one space per player")
    return [
        space_from_dict(d, game.states, game.action_counts[i])
        for i, d in enumerate(data)
    ]


def space_equal(
    a: RestrictedPolicySpace, b: RestrictedPolicySpace, tol: float = 1e-12
) -> bool:
    """Structural equality within tol (used by round-trip checks)."""
    if type(a) is not type(b):
        return False
    if (a.n_states, a.n_actions) != (b.n_states, b.n_actions):
        return False
    if isinstance(a, Singleton):
        return bool(np.max(np.abs(a.policy.probs - b.policy.probs)) <= tol)
    if isinstance(a, ConvexHullGlobal):
        return len(a.generators) == len(b.generators) and all(
            np.max(np.abs(x.probs - y.probs)) <= tol
            for x, y in zip(a.generators, b.generators)
        )
    if isinstance(a, ConvexHullStatewise):
        return all(
            len(pa) == len(pb)
            and all(np.max(np.abs(x - y)) <= tol for x, y in zip(pa, pb))
            for pa, pb in zip(a.generators, b.generators)
        )
    if isinstance(a, FixedCoordinates):
        if len(a.pins) != len(b.pins):
            return False
        return all(
            sa == sb and aa == ab and abs(pa - pb) <= tol
            for (sa, aa, pa), (sb, ab, pb) in zip(sorted(a.pins), sorted(b.pins))
        )
    return True
