"""Data model for discounted MDPs on truncated integer lattices.

States live on a box ``lower <= x <= upper`` in Z^d and are addressed by a
row-major flat index.  Transition rows are sparse (target index, probability)
pairs; kernels that place mass outside the box are repaired by
:func:`truncate_renormalize`, which rescales each row by the mass it keeps
inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyActionSet, InfeasibleAction, ZeroInteriorMass

State = tuple[int, ...]

PROB_TOL = 1e-12


@dataclass(frozen=True)
class StateLattice:
    """Truncated integer box with a row-major state <-> index bijection."""

    lower: tuple[int, ...]
    upper: tuple[int, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have the same dimension")
        if any(u < l for l, u in zip(self.lower, self.upper)):
            raise ValueError("need lower <= upper componentwise")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(u - l + 1 for l, u in zip(self.lower, self.upper))

    @property
    def n_states(self) -> int:
        return int(np.prod(self.shape))

    def index(self, state: Sequence[int]) -> int:
        offset = tuple(int(s) - l for s, l in zip(state, self.lower))
        return int(np.ravel_multi_index(offset, self.shape))

    def state(self, index: int) -> State:
        offset = np.unravel_index(int(index), self.shape)
        return tuple(int(o) + l for o, l in zip(offset, self.lower))

    def contains(self, state: Sequence[int]) -> bool:
        return all(l <= int(s) <= u for s, l, u in zip(state, self.lower, self.upper))

    def states(self) -> np.ndarray:
        """All states as an (n_states, dim) int array in index order."""
        axes = [np.arange(l, u + 1) for l, u in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def indices_of(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized index() for an (k, dim) coordinate array."""
        coords = np.atleast_2d(coords)
        offset = coords - np.asarray(self.lower)
        return np.ravel_multi_index(tuple(offset.T), self.shape)


@dataclass(frozen=True)
class TransitionRow:
    """Sparse transition row over flat state indices."""

    targets: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "targets", np.asarray(self.targets, dtype=np.int64))
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))
        if self.targets.shape != self.probs.shape:
            raise ValueError("targets and probs must align")
        if self.probs.size and self.probs.min() < -PROB_TOL:
            raise ValueError(f"negative probability {self.probs.min()}")
        total = math.fsum(self.probs.tolist())
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"row sums to {total}, not 1")

    def expectation(self, values: np.ndarray) -> float:
        return float(self.probs @ values[self.targets])


RawKernel = Callable[[State, object], tuple[np.ndarray, np.ndarray]]
Kernel = Callable[[State, object], TransitionRow]


def truncate_renormalize(raw_kernel: RawKernel, lattice: StateLattice) -> Kernel:
    """Wrap a kernel that may leak mass outside the lattice.

    The raw kernel returns (coords, probs) where coords is (k, dim) integer
    target coordinates.  Mass outside the box is dropped and the remaining
    row rescaled to sum to one:  P~(x,y) = P(x,y) / sum_{z in box} P(x,z).
    Raises ZeroInteriorMass when a row keeps no mass at all.
    """

    lower = np.asarray(lattice.lower)
    upper = np.asarray(lattice.upper)

    def kernel(state: State, action) -> TransitionRow:
        coords, probs = raw_kernel(state, action)
        coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
        probs = np.asarray(probs, dtype=np.float64)
        inside = np.all((coords >= lower) & (coords <= upper), axis=1)
        kept = probs[inside]
        mass = math.fsum(kept.tolist())
        if mass <= 0.0:
            raise ZeroInteriorMass(state, action)
        targets = lattice.indices_of(coords[inside])
        return TransitionRow(targets, kept / mass)

    return kernel


class ExplicitActionSet:
    """Per-state action lists given directly (or by a callable)."""

    def __init__(self, actions):
        self._actions = actions

    def at(self, state: State):
        acts = self._actions(state) if callable(self._actions) else self._actions
        acts = tuple(sorted(set(acts)))
        if not acts:
            raise EmptyActionSet(state)
        return acts


class PolyhedralActionSet:
    """Actions = {u integer in box(state) : A u <= b(state)}, enumerated lexicographically.

    `box` maps a state to per-coordinate inclusive integer (lo, hi) bounds;
    the constraint check A u <= b(x) is exact integer arithmetic whenever the
    inputs are integral.
    """

    def __init__(self, A: np.ndarray, b: Callable[[State], np.ndarray], box: Callable[[State], Sequence[tuple[int, int]]]):
        self.A = np.asarray(A)
        self.b = b
        self.box = box

    def at(self, state: State):
        bounds = self.box(state)
        bvec = np.asarray(self.b(state))
        axes = [np.arange(lo, hi + 1) for lo, hi in bounds]
        mesh = np.meshgrid(*axes, indexing="ij")
        cand = np.stack([m.ravel() for m in mesh], axis=1)
        keep = np.all(cand @ self.A.T <= bvec, axis=1)
        acts = tuple(tuple(int(v) for v in row) for row in cand[keep])
        if not acts:
            raise EmptyActionSet(state)
        return acts


class LatticeMdp:
    """Discounted MDP on a StateLattice.

    kernel and reward are pure callables of (state tuple, action); the action
    set yields, per state, a duplicate-free lexicographically ordered tuple.
    Policies are dense integer arrays indexing into that per-state ordering,
    values are dense float arrays over flat state indices.
    """

    def __init__(self, lattice: StateLattice, actions, kernel: Kernel, reward, discount: float,
                 name: str = "mdp", cost_oriented: bool = False, factored=None):
        if not (0.0 < discount < 1.0):
            raise ValueError("discount must lie in (0, 1)")
        self.lattice = lattice
        self.actions = actions
        self.kernel = kernel
        self.reward = reward
        self.discount = float(discount)
        self.name = name
        # cost_oriented: rewards are negated costs; reports flip the sign back
        self.cost_oriented = cost_oriented
        # optional product-form kernel hook used by the solvers (see exact.py)
        self.factored = factored
        self._action_cache: dict[int, tuple] = {}

    @property
    def n_states(self) -> int:
        return self.lattice.n_states

    def actions_at(self, state_index: int):
        acts = self._action_cache.get(state_index)
        if acts is None:
            acts = self.actions.at(self.lattice.state(state_index))
            self._action_cache[state_index] = acts
        return acts

    def action(self, state_index: int, action_index: int):
        return self.actions_at(state_index)[action_index]

    def row(self, state_index: int, action_index: int) -> TransitionRow:
        state = self.lattice.state(state_index)
        return self.kernel(state, self.actions_at(state_index)[action_index])

    def reward_value(self, state_index: int, action_index: int) -> float:
        state = self.lattice.state(state_index)
        r = float(self.reward(state, self.actions_at(state_index)[action_index]))
        if not math.isfinite(r):
            raise ValueError(f"non-finite reward at state {state}")
        return r

    def validate_policy(self, policy: np.ndarray) -> None:
        policy = np.asarray(policy)
        if policy.shape != (self.n_states,):
            raise ValueError("policy must assign one action index per state")
        for i in range(self.n_states):
            if not 0 <= policy[i] < len(self.actions_at(i)):
                raise InfeasibleAction(self.lattice.state(i), int(policy[i]))


def enumerate_actions(mdp: LatticeMdp, state) -> tuple:
    """Complete, duplicate-free, lexicographically ordered feasible actions."""
    return mdp.actions.at(tuple(state))


def max_jump(mdp: LatticeMdp, policy: np.ndarray) -> int:
    """Largest jump radius under the policy: max_x ceil(|y - x|_2) over P(x,y) > 0."""

    states = mdp.lattice.states()
    worst = 0.0
    for i in range(mdp.n_states):
        row = mdp.row(i, int(policy[i]))
        live = row.targets[row.probs > 0.0]
        if live.size == 0:
            continue
        diff = states[live] - states[i]
        worst = max(worst, float(np.sqrt((diff.astype(float) ** 2).sum(axis=1)).max()))
    return int(math.ceil(worst - 1e-12))


def uniform_max_jump(mdp: LatticeMdp) -> int:
    """max_jump maximized over all feasible actions (the uniform jump bound)."""

    states = mdp.lattice.states()
    worst = 0.0
    for i in range(mdp.n_states):
        for a in range(len(mdp.actions_at(i))):
            row = mdp.row(i, a)
            live = row.targets[row.probs > 0.0]
            if live.size == 0:
                continue
            diff = states[live] - states[i]
            worst = max(worst, float(np.sqrt((diff.astype(float) ** 2).sum(axis=1)).max()))
    return int(math.ceil(worst - 1e-12))
