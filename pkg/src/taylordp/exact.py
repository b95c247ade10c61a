"""Exact reference solvers: policy evaluation/improvement/iteration, value
iteration, and discounted functionals V_U[f].

All solvers work against an "assembly" of the MDP: either a tabular view
(concatenated sparse rows over (state, action) pairs, per-state discounts)
or a factored view for kernels of product form, where the one-step
expectation operator is applied to the whole value vector at once and rows
are never materialized.  Maximization is the internal convention throughout;
cost models negate rewards at the model boundary.

Argmax ties are broken to the first action in lexicographic order, with a
1e-12 absolute tolerance on value comparisons, so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import MaxIterationsExceeded, SingularSystem
from .lattice import LatticeMdp

ARGMAX_TOL = 1e-12
RESIDUAL_REL = 1e-9

DIRECT_STATE_LIMIT = 200_000


@dataclass(frozen=True)
class SolveOptions:
    linear_solver: str = "auto"          # auto | direct | iterative
    iterative_tol: float = 1e-10
    vi_tol: float = 1e-9
    max_iterations: int = 100            # policy-iteration cap
    vi_max_iterations: int = 200_000

    def __post_init__(self):
        if self.iterative_tol <= 0 or self.vi_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1 or self.vi_max_iterations < 1:
            raise ValueError("iteration caps must be >= 1")


DEFAULT_OPTIONS = SolveOptions()


class TabularAssembly:
    """Concatenated sparse rows for all (state, action) pairs.

    offsets[s]:offsets[s+1] index the flat (state, action) axis; row_ptr
    delimits each pair's (col_idx, probs) slice.  discounts is per state.
    """

    def __init__(self, offsets, rewards, row_ptr, col_idx, probs, discounts):
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.rewards = np.asarray(rewards, dtype=np.float64)
        self.row_ptr = np.asarray(row_ptr, dtype=np.int64)
        self.col_idx = np.asarray(col_idx, dtype=np.int64)
        self.probs = np.asarray(probs, dtype=np.float64)
        self.discounts = np.asarray(discounts, dtype=np.float64)
        self.n_states = len(self.offsets) - 1
        self.n_pairs = len(self.rewards)
        counts = np.diff(self.offsets)
        self._disc_per_pair = np.repeat(self.discounts, counts)

    def expectations(self, values: np.ndarray) -> np.ndarray:
        prod = self.probs * values[self.col_idx]
        return np.add.reduceat(prod, self.row_ptr[:-1])

    def q_values(self, values: np.ndarray, rewards=None) -> np.ndarray:
        r = self.rewards if rewards is None else rewards
        return r + self._disc_per_pair * self.expectations(values)

    def policy_pairs(self, policy: np.ndarray) -> np.ndarray:
        return self.offsets[:-1] + np.asarray(policy, dtype=np.int64)

    def policy_matrix(self, policy: np.ndarray) -> sp.csr_matrix:
        pairs = self.policy_pairs(policy)
        starts = self.row_ptr[pairs]
        stops = self.row_ptr[pairs + 1]
        lens = stops - starts
        take = _ranges(starts, lens)
        indptr = np.concatenate([[0], np.cumsum(lens)])
        return sp.csr_matrix((self.probs[take], self.col_idx[take], indptr),
                             shape=(self.n_states, self.n_states))

    def policy_rewards(self, policy: np.ndarray, rewards=None) -> np.ndarray:
        r = self.rewards if rewards is None else rewards
        return r[self.policy_pairs(policy)]


class FactoredAssembly:
    """Product-form kernels: one-step expectations for all states at once.

    apply_expectation(V) returns E[V(X_1) | post-action state z] for every z;
    post_idx maps each (state, action) pair to its post-action state index.
    """

    def __init__(self, offsets, rewards, post_idx, apply_expectation, discount):
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.rewards = np.asarray(rewards, dtype=np.float64)
        self.post_idx = np.asarray(post_idx, dtype=np.int64)
        self.apply_expectation = apply_expectation
        self.discount = float(discount)
        self.n_states = len(self.offsets) - 1
        self.n_pairs = len(self.rewards)
        self.discounts = np.full(self.n_states, self.discount)

    def q_values(self, values: np.ndarray, rewards=None) -> np.ndarray:
        r = self.rewards if rewards is None else rewards
        tv = self.apply_expectation(values)
        return r + self.discount * tv[self.post_idx]

    def policy_pairs(self, policy: np.ndarray) -> np.ndarray:
        return self.offsets[:-1] + np.asarray(policy, dtype=np.int64)

    def policy_rewards(self, policy: np.ndarray, rewards=None) -> np.ndarray:
        r = self.rewards if rewards is None else rewards
        return r[self.policy_pairs(policy)]


def _ranges(starts, lens):
    """Concatenate arange(s, s+l) for each (s, l); vectorized."""
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    out = np.ones(total, dtype=np.int64)
    ends = np.cumsum(lens)
    out[0] = starts[0]
    out[ends[:-1]] = starts[1:] - (starts[:-1] + lens[:-1] - 1)
    return np.cumsum(out)


def get_assembly(mdp):
    """Return (and cache) the solver view of an MDP or chain."""
    asm = getattr(mdp, "_assembly", None)
    if asm is not None:
        return asm
    if hasattr(mdp, "assembly"):
        asm = mdp.assembly()
    elif getattr(mdp, "factored", None) is not None:
        asm = mdp.factored() if callable(mdp.factored) else mdp.factored
    else:
        asm = _tabulate(mdp)
    mdp._assembly = asm
    return asm


def _tabulate(mdp: LatticeMdp) -> TabularAssembly:
    offsets = [0]
    rewards = []
    row_ptr = [0]
    cols = []
    probs = []
    for i in range(mdp.n_states):
        acts = mdp.actions_at(i)
        for a in range(len(acts)):
            row = mdp.row(i, a)
            rewards.append(mdp.reward_value(i, a))
            cols.append(row.targets)
            probs.append(row.probs)
            row_ptr.append(row_ptr[-1] + len(row.targets))
        offsets.append(offsets[-1] + len(acts))
    discounts = np.full(mdp.n_states, mdp.discount)
    return TabularAssembly(offsets, rewards, row_ptr,
                           np.concatenate(cols), np.concatenate(probs), discounts)


def segmented_argmax(values: np.ndarray, offsets: np.ndarray, tol: float = ARGMAX_TOL):
    """Per-segment (max, first index within tol of max)."""
    starts = offsets[:-1]
    seg_max = np.maximum.reduceat(values, starts)
    counts = np.diff(offsets)
    thresh = np.repeat(seg_max - tol, counts)
    idx = np.arange(len(values), dtype=np.int64)
    masked = np.where(values >= thresh, idx, np.iinfo(np.int64).max)
    first = np.minimum.reduceat(masked, starts) - starts
    return seg_max, first.astype(np.int64)


def _policy_reward_and_expect(asm, policy, rewards=None):
    """r_U and a closure computing E^U[V] for the assembly."""
    r_u = asm.policy_rewards(policy, rewards)
    if isinstance(asm, FactoredAssembly):
        post = asm.post_idx[asm.policy_pairs(policy)]

        def expect(values):
            return asm.apply_expectation(values)[post]
    else:
        mat = asm.policy_matrix(policy)

        def expect(values):
            return mat @ values
    return r_u, expect


def policy_evaluation(mdp, policy, options: SolveOptions = DEFAULT_OPTIONS,
                      reward_override=None, warm_start=None) -> np.ndarray:
    """Solve V = r_U + diag(alpha) P^U V for the given stationary policy.

    reward_override replaces the per-(state, action) rewards with a per-state
    vector (used for discounted functionals V_U[f]).
    """
    asm = get_assembly(mdp)
    policy = np.asarray(policy, dtype=np.int64)
    rewards = None
    if reward_override is not None:
        f = np.asarray(reward_override, dtype=np.float64)
        if f.shape != (asm.n_states,):
            raise ValueError("reward override must be a per-state vector")
        rewards = np.repeat(f, np.diff(asm.offsets))
    r_u, expect = _policy_reward_and_expect(asm, policy, rewards)
    disc = asm.discounts

    method = options.linear_solver
    if method == "auto":
        if isinstance(asm, FactoredAssembly):
            method = "iterative"
        else:
            method = "direct" if asm.n_states <= DIRECT_STATE_LIMIT else "iterative"

    if method == "direct":
        mat = asm.policy_matrix(policy)
        system = (sp.eye(asm.n_states, format="csr") - sp.diags(disc) @ mat).tocsc()
        try:
            lu = spla.splu(system)
            values = lu.solve(r_u)
            # one step of iterative refinement keeps the residual contract
            # even for discounts very close to one
            resid = r_u - system @ values
            if np.abs(resid).max() > RESIDUAL_REL * (1.0 + np.abs(values).max()):
                values = values + lu.solve(resid)
        except RuntimeError as exc:  # singular factorization
            raise SingularSystem(str(exc)) from None
    else:
        values = _richardson(r_u, expect, disc, options,
                             warm_start=warm_start)

    residual = np.abs(values - (r_u + disc * expect(values))).max()
    if residual > RESIDUAL_REL * (1.0 + np.abs(values).max()):
        raise SingularSystem(f"policy evaluation residual {residual} exceeds "
                             f"the {RESIDUAL_REL} contract")
    return values


def _richardson(r_u, expect, disc, options, warm_start=None):
    """Fixed-point iteration V <- r_U + diag(alpha) E^U[V]; contraction max(alpha)."""
    alpha_bar = float(np.max(disc))
    if alpha_bar >= 1.0:
        raise SingularSystem("iterative evaluation requires discounts < 1; use the direct solver")
    v = np.zeros_like(r_u) if warm_start is None else np.array(warm_start, dtype=np.float64)
    check_every = 25
    for it in range(options.vi_max_iterations):
        v = r_u + disc * expect(v)
        if (it + 1) % check_every == 0:
            residual = np.abs(v - (r_u + disc * expect(v))).max()
            if residual <= options.iterative_tol * (1.0 + np.abs(v).max()):
                return v
    raise MaxIterationsExceeded(options.vi_max_iterations, "policy evaluation (iterative)")


def policy_improvement(mdp, values, return_q: bool = False):
    """Greedy policy: argmax_u r(x,u) + alpha(x) E_x^u[V], first maximizer wins."""
    asm = get_assembly(mdp)
    q = asm.q_values(np.asarray(values, dtype=np.float64))
    q_max, policy = segmented_argmax(q, asm.offsets)
    if return_q:
        return policy, q_max
    return policy


@dataclass
class PiResult:
    policy: np.ndarray
    values: np.ndarray
    iterations: int
    value_history: list = field(default_factory=list)


def policy_iteration(mdp, initial_policy=None, options: SolveOptions = DEFAULT_OPTIONS,
                     record_history: bool = False) -> PiResult:
    """Standard policy iteration; terminates on policy stability."""
    asm = get_assembly(mdp)
    if initial_policy is None:
        policy = np.zeros(asm.n_states, dtype=np.int64)
    else:
        policy = np.asarray(initial_policy, dtype=np.int64).copy()
    history = []
    values = None
    for it in range(1, options.max_iterations + 1):
        values = policy_evaluation(mdp, policy, options, warm_start=values)
        if record_history:
            history.append(values.copy())
        new_policy = policy_improvement(mdp, values)
        if np.array_equal(new_policy, policy):
            return PiResult(policy, values, it, history)
        policy = new_policy
    raise MaxIterationsExceeded(options.max_iterations, "policy iteration")


def value_iteration(mdp, options: SolveOptions = DEFAULT_OPTIONS):
    """Contraction iteration on the Bellman operator.

    Stops when the sup-norm update is below vi_tol * (1 - alpha) / (2 alpha),
    which bounds the distance to the fixed point by vi_tol.
    """
    asm = get_assembly(mdp)
    alpha_bar = float(np.max(asm.discounts))
    if alpha_bar >= 1.0:
        raise ValueError("value iteration requires all discounts < 1")
    stop = options.vi_tol * (1.0 - alpha_bar) / (2.0 * alpha_bar)
    v = np.zeros(asm.n_states)
    for it in range(options.vi_max_iterations):
        q = asm.q_values(v)
        v_new, policy = segmented_argmax(q, asm.offsets)
        if np.abs(v_new - v).max() <= stop:
            return policy, v_new
        v = v_new
    raise MaxIterationsExceeded(options.vi_max_iterations, "value iteration")


def discounted_functional(mdp, policy, f, options: SolveOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """V_U[f](x) = E_x^U [ sum_t alpha^t f(X_t) ] via the evaluation solve.

    f is a per-state vector or a callable on state tuples.
    """
    if callable(f):
        lattice = mdp.lattice
        f = np.array([f(lattice.state(i)) for i in range(mdp.n_states)], dtype=np.float64)
    return policy_evaluation(mdp, policy, options, reward_override=f)
