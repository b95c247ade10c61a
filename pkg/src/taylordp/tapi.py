"""Taylored Approximate Policy Iteration.

TAPI is policy iteration run on the TCP-equivalent coarse chain: approximate
policy evaluation solves the chain's linear system (the discretized Taylored
equation, with state-dependent discount), and approximate policy improvement
is the greedy step on the same chain.  Because the chain is a finite MDP,
the loop terminates in finitely many iterations.

The coarse solution is then carried back to the fine lattice:

  * values are extended piecewise-constant through the nearest-grid-point
    map, or multilinearly; multilinear interpolation uses the interior grid
    planes only (reflecting-boundary values are duplicates by construction)
    and extrapolates linearly into the boundary cells,
  * policies are extended either by re-running the approximate (Taylored)
    improvement at every fine state -- the same stencil greedy the chain
    uses, fed with each state's own drift/diffusion and interpolated coarse
    values ("tcp_greedy", the default) -- or piecewise-constant from the
    nearest interior grid point with infeasible actions projected to the
    nearest feasible one (L1 distance, lexicographic tie).  In the pc mode,
    actions at boundary grid states are not identified by the chain's
    reflecting rows and are completed by a one-step greedy on the fine
    model against the extended value.

An exact-improvement variant replaces the greedy-on-the-chain step with a
fine-lattice greedy against the disaggregated value (the true kernel, not
the Taylored operator); it has no convergence guarantee, so cycles are
detected and capped.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .exact import (SolveOptions, policy_evaluation, policy_improvement,
                    policy_iteration)
from .kdchain import CoarseGrid, KdChain, build_multidim_chain
from .lattice import LatticeMdp
from .taylor import TaylorProblem


@dataclass(frozen=True)
class TapiOptions:
    h: int = 2
    max_iterations: int = 100
    improvement: str = "approx"          # approx | exact
    disaggregation: str = "multilinear"  # value extension: multilinear | pc
    policy_extension: str = "tcp_greedy"  # tcp_greedy | pc
    one_step: bool = False               # final exact improvement on the fine lattice
    scheme: str = "inflate"              # small-drift fallback: inflate | upwind
    cross: str = "clip"                  # cross-derivative mass: clip | strict
    evaluate_fine: bool = True
    score_exact: bool = False            # exact-improvement variant: score iterates exactly
    solve: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if self.h < 1 or int(self.h) != self.h:
            raise ValueError("h must be a positive integer")
        if self.improvement not in ("approx", "exact"):
            raise ValueError("improvement must be 'approx' or 'exact'")
        if self.disaggregation not in ("multilinear", "pc"):
            raise ValueError("disaggregation must be 'multilinear' or 'pc'")
        if self.policy_extension not in ("tcp_greedy", "pc"):
            raise ValueError("policy_extension must be 'tcp_greedy' or 'pc'")


@dataclass
class TapiResult:
    chain: KdChain
    coarse_values: np.ndarray
    coarse_policy: np.ndarray
    fine_policy: np.ndarray              # policy actually returned (after one-step if enabled)
    disaggregated_policy: np.ndarray     # fine-lattice extension of the coarse policy
    fine_values: Optional[np.ndarray]    # exact evaluation of fine_policy, if requested
    iterations: int
    wall_time: float
    oscillated: bool = False


# ---------------------------------------------------------------------------
# disaggregation
# ---------------------------------------------------------------------------

def disaggregate_value(coarse_values: np.ndarray, grid: CoarseGrid, lattice,
                       mode: str = "multilinear", boundary: str = "include") -> np.ndarray:
    """Extend a coarse value vector to every fine-lattice state.

    boundary="drop" interpolates over interior grid planes only and
    extrapolates linearly into the boundary cells; it is what TAPI uses
    internally, because reflecting-boundary values are duplicates of their
    inward neighbors by construction.
    """
    fine = lattice.states().astype(np.float64)
    v = np.asarray(coarse_values, dtype=np.float64)
    if mode == "pc":
        return v[grid.nearest_index(fine)]
    if mode != "multilinear":
        raise ValueError(f"unknown disaggregation mode {mode!r}")
    return _extension_interpolator(v, grid, boundary)(fine)


def _action_vec(u):
    return np.atleast_1d(np.asarray(u, dtype=np.float64))


def project_action(action, feasible):
    """Nearest feasible action in L1 distance; lexicographic tie-break."""
    if action in feasible:
        return feasible.index(action)
    target = _action_vec(action)
    best, best_idx = None, 0
    for k, cand in enumerate(feasible):
        dist = float(np.abs(_action_vec(cand) - target).sum())
        if best is None or dist < best - 1e-12:
            best, best_idx = dist, k
    return best_idx


def disaggregate_policy(chain: KdChain, coarse_policy: np.ndarray, mdp: LatticeMdp,
                        fine_value: Optional[np.ndarray] = None) -> np.ndarray:
    """Piecewise-constant policy extension with boundary completion.

    Non-grid states copy the action of the nearest interior grid point (the
    reflecting rows carry no action information); grid states keep their own.
    Boundary grid states are completed by a fine one-step greedy against
    fine_value when supplied, otherwise they inherit inward.  Inherited
    actions infeasible at the destination are projected to the nearest
    feasible action.
    """
    grid = chain.grid
    lattice = mdp.lattice
    pts = grid.points()
    interior = np.flatnonzero(chain.interior_mask)
    if interior.size == 0:
        raise ValueError("chain has no interior states")

    # coarse actions as objects
    coarse_actions = [chain.actions_at(i)[int(coarse_policy[i])] for i in range(chain.n_states)]

    # completion at boundary grid states
    grid_idx_of_state: dict[int, int] = {}
    for gi in range(chain.n_states):
        grid_idx_of_state[lattice.index(grid.point(gi))] = gi
    boundary = np.flatnonzero(~chain.interior_mask)
    if fine_value is not None:
        for gi in boundary:
            point = grid.point(gi)
            si = lattice.index(point)
            acts = mdp.actions_at(si)
            q = np.empty(len(acts))
            for a in range(len(acts)):
                row = mdp.row(si, a)
                q[a] = mdp.reward_value(si, a) + mdp.discount * row.expectation(fine_value)
            coarse_actions[gi] = acts[int(np.flatnonzero(q >= q.max() - 1e-12)[0])]
    else:
        # inherit from the nearest interior grid point
        int_pts = pts[interior]
        for gi in boundary:
            d = np.abs(int_pts - pts[gi]).sum(axis=1)
            coarse_actions[gi] = coarse_actions[interior[int(np.flatnonzero(d == d.min())[0])]]

    # nearest source grid point for every fine state
    fine_states = lattice.states()
    nearest_all = grid.nearest_index(fine_states)
    # restricted nearest over interior grid points (per-axis clamp into interior)
    clamped_axes = []
    for ax in grid.axes:
        clamped_axes.append(ax[1:-1] if len(ax) >= 3 else ax)
    interior_grid = CoarseGrid(tuple(clamped_axes))
    near_int = interior_grid.nearest_index(fine_states)
    # map interior-grid flat index -> chain grid flat index
    int_shape = interior_grid.shape
    pos = np.unravel_index(near_int, int_shape)
    full_pos = tuple(p + (1 if len(ax) >= 3 else 0) for p, ax in zip(pos, grid.axes))
    near_int_full = np.ravel_multi_index(full_pos, grid.shape)

    policy = np.empty(lattice.n_states, dtype=np.int64)
    for si in range(lattice.n_states):
        gi = grid_idx_of_state.get(si)
        if gi is None:
            gi = int(near_int_full[si])
        elif not chain.interior_mask[gi] and fine_value is None:
            gi = int(near_int_full[si]) if not _same_point(pts[gi], fine_states[si]) else gi
        action = coarse_actions[gi]
        policy[si] = project_action(action, mdp.actions_at(si))
    return policy


def _same_point(a, b):
    return bool(np.all(a == b))


def one_step_exact_improvement(mdp: LatticeMdp, fine_value: np.ndarray) -> np.ndarray:
    """Greedy policy on the fine lattice relative to an extended value."""
    return policy_improvement(mdp, fine_value)


def taylored_greedy_policy(problem: TaylorProblem, chain: KdChain,
                           coarse_values: np.ndarray, scheme: str = "inflate",
                           cross: str = "clip") -> np.ndarray:
    """Approximate (Taylored) policy improvement at every fine-lattice state.

    Each state gets the same stencil greedy the chain's improvement uses,
    built from the state's own drift/diffusion at spacing h and fed with the
    extended coarse values at the stencil targets; near the boundary the
    extension extrapolates.  This is the discretized form of maximizing
    r(x,u) + alpha L_u V(x) - (1-alpha) V(x) over the feasible actions.
    """
    from .kdchain import _stencil_rates

    mdp = problem.mdp
    lattice = mdp.lattice
    alpha = mdp.discount
    grid = chain.grid
    d = lattice.dim
    h = float(max(int(ax[1] - ax[0]) for ax in grid.axes))
    hvec = np.full(d, h)

    states = lattice.states().astype(np.float64)
    # one batched interpolation for all stencil targets of all states
    probe = _extension_interpolator(coarse_values, grid)
    offs = _stencil_offsets(d, h)
    neighbor_vals = probe((states[:, None, :] + offs[None, :, :]).reshape(-1, d))
    neighbor_vals = neighbor_vals.reshape(len(states), len(offs))
    center_vals = probe(states)

    policy = np.empty(lattice.n_states, dtype=np.int64)
    cols = None
    for si in range(lattice.n_states):
        point = lattice.state(si)
        acts = mdp.actions_at(si)
        mu_b, s2_b = problem.moments_batch(point, acts)
        off, rates, _, _, _ = _stencil_rates(np.atleast_2d(mu_b), s2_b, hvec, hvec,
                                             scheme, cross)
        if cols is None:
            cols = _offset_columns(off, offs)   # offset order is state-independent
        tot = rates.sum(axis=1)
        q_max = float(max(tot.max(), 1e-300))
        a_h = 1.0 / (1.0 + (1.0 / alpha - 1.0) / q_max)
        rew = np.array([mdp.reward(point, u) for u in acts], dtype=np.float64)
        expect = (rates / q_max) @ neighbor_vals[si, cols] + (1.0 - tot / q_max) * center_vals[si]
        q = a_h * rew / (alpha * q_max) + a_h * expect
        policy[si] = int(np.flatnonzero(q >= q.max() - 1e-12)[0])
    return policy


def _stencil_offsets(d: int, h: float) -> np.ndarray:
    """The fixed displacement template used by uniform-spacing stencils."""
    offs = []
    for i in range(d):
        for j in range(i + 1, d):
            for si, sj in ((h, h), (-h, -h), (h, -h), (-h, h)):
                v = np.zeros(d); v[i] = si; v[j] = sj
                offs.append(v)
    for i in range(d):
        for s in (h, -h):
            v = np.zeros(d); v[i] = s
            offs.append(v)
    return np.stack(offs)


def _offset_columns(off: np.ndarray, template: np.ndarray) -> np.ndarray:
    cols = np.empty(len(off), dtype=np.int64)
    for k, row in enumerate(off):
        cols[k] = int(np.flatnonzero((template == row).all(axis=1))[0])
    return cols


def _extension_interpolator(coarse_values: np.ndarray, grid: CoarseGrid,
                            boundary: str = "drop"):
    axes, slices = [], []
    for ax in grid.axes:
        if boundary == "drop" and len(ax) >= 4:
            axes.append(ax[1:-1].astype(np.float64))
            slices.append(slice(1, -1))
        else:
            axes.append(ax.astype(np.float64))
            slices.append(slice(None))
    tensor = np.asarray(coarse_values, dtype=np.float64).reshape(grid.shape)[tuple(slices)]
    return RegularGridInterpolator(axes, tensor, method="linear",
                                   bounds_error=False, fill_value=None)


# ---------------------------------------------------------------------------
# the TAPI loop
# ---------------------------------------------------------------------------

def tapi_solve(problem: TaylorProblem, options: TapiOptions = TapiOptions()) -> TapiResult:
    """Policy iteration on the K-D chain, then disaggregation to the lattice."""
    t0 = time.perf_counter()
    mdp = problem.mdp
    chain = build_multidim_chain(problem, options.h, scheme=options.scheme, cross=options.cross)

    if options.improvement == "exact":
        return _tapi_exact_loop(problem, chain, options, t0)

    pi = policy_iteration(chain, options=SolveOptions(
        max_iterations=options.max_iterations,
        linear_solver="direct",
        iterative_tol=options.solve.iterative_tol))
    fine_v = disaggregate_value(pi.values, chain.grid, mdp.lattice, options.disaggregation,
                                boundary="drop")
    if options.policy_extension == "tcp_greedy":
        disagg = taylored_greedy_policy(problem, chain, pi.values, options.scheme, options.cross)
    else:
        disagg = disaggregate_policy(chain, pi.policy, mdp, fine_value=fine_v)
    fine_policy = disagg
    if options.one_step:
        fine_policy = one_step_exact_improvement(mdp, fine_v)
    fine_values = None
    if options.evaluate_fine:
        fine_values = policy_evaluation(mdp, fine_policy, options.solve)
    return TapiResult(chain, pi.values, pi.policy, fine_policy, disagg, fine_values,
                      pi.iterations, time.perf_counter() - t0)


def tapi_exact_improvement_variant(problem: TaylorProblem,
                                   options: TapiOptions = TapiOptions()) -> TapiResult:
    """TAPI with the improvement step done exactly on the fine lattice."""
    t0 = time.perf_counter()
    chain = build_multidim_chain(problem, options.h, scheme=options.scheme, cross=options.cross)
    return _tapi_exact_loop(problem, chain, options, t0)


def _tapi_exact_loop(problem, chain, options, t0):
    mdp = problem.mdp
    grid = chain.grid
    lattice = mdp.lattice
    grid_state_idx = np.array([lattice.index(grid.point(g)) for g in range(chain.n_states)])

    coarse_policy = np.zeros(chain.n_states, dtype=np.int64)
    seen: dict[bytes, int] = {}
    best_policy = None
    best_score = -np.inf
    fine_policy = None
    coarse_values = None
    oscillated = False
    iterations = 0

    for it in range(1, options.max_iterations + 1):
        iterations = it
        coarse_values = policy_evaluation(chain, coarse_policy,
                                          SolveOptions(linear_solver="direct"))
        fine_v = disaggregate_value(coarse_values, grid, lattice, options.disaggregation,
                                    boundary="drop")
        new_fine = policy_improvement(mdp, fine_v)
        if fine_policy is not None and np.array_equal(new_fine, fine_policy):
            fine_policy = new_fine
            break
        fine_policy = new_fine
        key = fine_policy.tobytes()
        if key in seen:
            oscillated = True
            break
        seen[key] = it
        if options.score_exact:
            score = float(policy_evaluation(mdp, fine_policy, options.solve).mean())
            if score > best_score:
                best_score, best_policy = score, fine_policy.copy()
        # restrict the fine policy to the grid for the next evaluation
        for g in range(chain.n_states):
            acts = chain.actions_at(g)
            if len(acts) == 1:
                coarse_policy[g] = 0
                continue
            fine_action = mdp.actions_at(int(grid_state_idx[g]))[int(fine_policy[grid_state_idx[g]])]
            coarse_policy[g] = project_action(fine_action, list(acts))
    else:
        oscillated = True

    if options.score_exact and best_policy is not None:
        fine_policy = best_policy
    disagg = disaggregate_policy(chain, coarse_policy, mdp,
                                 fine_value=disaggregate_value(coarse_values, grid, lattice,
                                                               options.disaggregation,
                                                               boundary="drop"))
    if options.one_step:
        fine_v = disaggregate_value(coarse_values, grid, lattice, options.disaggregation,
                                    boundary="drop")
        fine_policy = one_step_exact_improvement(mdp, fine_v)
    fine_values = None
    if options.evaluate_fine:
        fine_values = policy_evaluation(mdp, fine_policy, options.solve)
    return TapiResult(chain, coarse_values, coarse_policy, fine_policy, disagg, fine_values,
                      iterations, time.perf_counter() - t0, oscillated)
