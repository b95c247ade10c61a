"""Single-item inventory control with Poisson demand and backlogging.

State is the inventory position on [-M, M]; the order u in {0, ..., u_max}
arrives immediately, then demand D ~ Poisson(lam) is realized:

    X -> X + u - D,   cost  c u + H E[(x + u - D)^+] + b E[(D - x - u)^+].

The per-period cost is computed by exact summation over the truncated
demand support (tail mass below `tail` dropped, pmf renormalized).  The
lattice truncation keeps rows inside [-M, M] by renormalization; at the
edges the dynamics collapse: at -M the demand is suppressed (deterministic
move to -M + u, so the boundary drift is u with second moment u^2) and at
+M the order is suppressed (move M - D, drift -lam, second moment
lam + lam^2).  Both edges reflect, giving V'(-M) = V'(M) = 0.

Away from the edges the moments are state-independent:

    mu_u = u - lam,    sigma2_u = (u - lam)^2 + lam  >= lam  > 0,

so strict ellipticity holds with constant lam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..lattice import ExplicitActionSet, LatticeMdp, StateLattice, truncate_renormalize
from ..taylor import BoundarySpec, DriftDiffusion, TaylorProblem


@dataclass(frozen=True)
class InventoryParams:
    lam: float = 2.0
    c: float = 1.0
    H: float = 2.0
    b: float = 10.0
    M: int = 40
    u_max: int = 10
    alpha: float = 0.99
    tail: float = 1e-12

    def __post_init__(self):
        if self.u_max > 2 * self.M:
            raise ValueError("orders larger than the state range are not representable")
        if self.lam <= 0:
            raise ValueError("demand mean must be positive")


def truncated_poisson_pmf(lam: float, tail: float):
    """(pmf, d_max): Poisson pmf on 0..d_max with sf(d_max) < tail, renormalized."""
    d_max = int(stats.poisson.isf(tail, lam)) + 1
    while stats.poisson.sf(d_max, lam) >= tail:
        d_max += 1
    pmf = stats.poisson.pmf(np.arange(d_max + 1), lam)
    return pmf / math.fsum(pmf.tolist()), d_max


class InventoryModel:
    def __init__(self, params: InventoryParams):
        self.params = params
        lam, M = params.lam, params.M
        self.demand_pmf, self.d_max = truncated_poisson_pmf(lam, params.tail)
        lattice = StateLattice((-M,), (M,))
        demands = np.arange(self.d_max + 1)

        def raw_kernel(state, u):
            (x,) = state
            if x == -M:
                return np.array([[-M + u]]), np.array([1.0])
            if x == M:
                return (M - demands)[:, None], self.demand_pmf
            return (x + u - demands)[:, None], self.demand_pmf

        kernel = truncate_renormalize(raw_kernel, lattice)

        # exact expected one-period cost over the truncated demand
        def cost(state, u) -> float:
            (x,) = state
            y = x + u - demands
            holding = params.H * float(self.demand_pmf @ np.maximum(y, 0))
            backlog = params.b * float(self.demand_pmf @ np.maximum(-y, 0))
            return params.c * u + holding + backlog

        self.cost = cost
        actions = tuple(range(params.u_max + 1))
        self.mdp = LatticeMdp(lattice, ExplicitActionSet(actions), kernel,
                              lambda s, u: -cost(s, u), params.alpha,
                              name="inventory", cost_oriented=True)

        def moments(state, u) -> DriftDiffusion:
            return DriftDiffusion([u - lam], [[(u - lam) ** 2 + lam]])

        def moments_batch(state, actions_):
            us = np.asarray(actions_, dtype=np.float64)
            mu = us - lam
            return mu[:, None], (mu ** 2 + lam)[:, None, None]

        self.boundary_spec = BoundarySpec(
            kind="oblique",
            eta=lambda state: np.array([1.0 if state[0] == -M else -1.0]),
            fot_drift=lambda state: np.array([lam if state[0] == -M else -lam]),
        )
        self.problem = TaylorProblem(self.mdp, moments, self.boundary_spec,
                                     moments_batch=moments_batch)

    def truncated_boundary_moments(self, state, u) -> DriftDiffusion:
        """Moments of the edge rows: (u, u^2) at -M and (-lam, lam + lam^2) at M."""
        lam = self.params.lam
        (x,) = state
        if x == -self.params.M:
            return DriftDiffusion([float(u)], [[float(u) ** 2]])
        if x == self.params.M:
            return DriftDiffusion([-lam], [[lam + lam ** 2]])
        raise ValueError("interior state has no boundary moments")

    def mass_conserving_states(self) -> np.ndarray:
        """States whose raw row X + u - D keeps mass >= 1 - tail for every order."""
        xs = np.arange(-self.params.M, self.params.M + 1)
        return (xs - self.d_max >= -self.params.M) & (xs + self.params.u_max <= self.params.M)

    def one_period_optimal_order(self, x: int) -> int:
        """Brute-force minimizer of the single-period cost at state x."""
        costs = [self.cost((x,), u) for u in range(self.params.u_max + 1)]
        return int(np.argmin(costs))


def build_inventory(params: InventoryParams) -> InventoryModel:
    return InventoryModel(params)
