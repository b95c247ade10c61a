"""Overflow routing between J server pools with dedicated buffers.

x_j counts type-j customers in the system, x_j in [0, N_j + M] (buffer cap
M).  Each period: waiting customers may be overflowed (u_ij of them from
buffer i into idle servers of pool j, cost B_ij each), a holding cost H_i
is charged per customer still waiting, then departures from pool i are
Binomial(x_i^P ^ N_i, p_i) on the post-action state
x_i^P = x_i + sum_j (u_ji - u_ij), and Poisson(lam_i) arrivals come in.

The transition kernel therefore factors across pools given the post-action
state; the per-pool one-step matrices drive all bulk solves without ever
materializing joint rows.  Arrivals that would exceed a pool's buffer cap
are blocked and lost (the excess probability mass is censored onto the cap
state), which keeps the cap a genuine finite-buffer boundary.

Feasible actions are the integer points of

    sum_j u_ji <= (N_i - x_i)^+       (idle servers available in pool i)
    sum_j u_ij <= (x_i - N_i)^+       (customers actually waiting in buffer i)

Moments at (x, u), writing n_i = (x_i + net_i) ^ N_i:

    mu_i       = net_i + lam_i - p_i n_i
    sigma2_ii  = lam_i + n_i p_i (1 - p_i) + mu_i^2
    sigma2_ij  = mu_i mu_j   (i != j, independence across pools)

The oblique boundary direction is eta_i(x) = p_i at faces x_i = 0 (the
drift jumps by p_i off the empty state) and points inward (-1) at the
buffer-cap faces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..exact import FactoredAssembly
from ..lattice import LatticeMdp, PolyhedralActionSet, StateLattice, TransitionRow
from ..taylor import BoundarySpec, DriftDiffusion, TaylorProblem


@dataclass(frozen=True)
class RoutingParams:
    J: int
    N: tuple
    M: int
    p: tuple
    lam: tuple
    B: tuple              # row-major off-diagonal costs, pair order (i, j), i != j
    H: tuple
    alpha: float
    tail: float = 1e-12

    def __post_init__(self):
        J = self.J
        if not (len(self.N) == len(self.p) == len(self.lam) == len(self.H) == J):
            raise ValueError("N, p, lam, H must have length J")
        if len(self.B) != J * (J - 1):
            raise ValueError("B must list costs for every ordered pool pair")


def pool_pairs(J: int):
    """Ordered pairs (i, j), i != j, row-major; the action coordinate order."""
    return [(i, j) for i in range(J) for j in range(J) if i != j]


def pool_step_matrix(upper: int, n_servers: int, p: float, lam: float, tail: float) -> np.ndarray:
    """One-step matrix K[z, w] = P((z - D(z) + A) ^ upper = w).

    Arrivals that would push the pool past its buffer cap are blocked
    (lost), i.e. the excess mass is censored onto the cap state; the demand
    tail beyond `tail` is dropped and the row renormalized.
    """
    a_max = int(stats.poisson.isf(tail, lam)) + 1
    while stats.poisson.sf(a_max, lam) >= tail:
        a_max += 1
    arr = stats.poisson.pmf(np.arange(a_max + 1), lam)
    K = np.zeros((upper + 1, upper + 1))
    for z in range(upper + 1):
        n = min(z, n_servers)
        dep = stats.binom.pmf(np.arange(n + 1), n, p)
        # pmf of (z - D) + A on offsets z - n .. z + a_max
        conv = np.convolve(dep[::-1], arr)
        idx = np.minimum(z - n + np.arange(len(conv)), upper)
        np.add.at(K[z], idx, conv)
        K[z] /= math.fsum(K[z].tolist())
    return K


class RoutingModel:
    def __init__(self, params: RoutingParams):
        self.params = params
        J, M = params.J, params.M
        upper = tuple(n + M for n in params.N)
        lattice = StateLattice((0,) * J, upper)
        self.pairs = pool_pairs(J)
        m = len(self.pairs)

        # net_i = sum_j u_ji - sum_j u_ij as a (J, m) matrix
        net = np.zeros((J, m))
        for k, (i, j) in enumerate(self.pairs):
            net[i, k] -= 1.0
            net[j, k] += 1.0
        self.net = net

        # constraints A u <= b(x): into-pool rows then out-of-buffer rows
        A = np.zeros((2 * J, m))
        for k, (i, j) in enumerate(self.pairs):
            A[j, k] = 1.0        # into pool j
            A[J + i, k] = 1.0    # out of buffer i

        N = np.asarray(params.N)

        def b(state):
            x = np.asarray(state)
            return np.concatenate([np.maximum(N - x, 0), np.maximum(x - N, 0)])

        def box(state):
            x = np.asarray(state)
            idle = np.maximum(N - x, 0)
            wait = np.maximum(x - N, 0)
            return [(0, int(min(wait[i], idle[j]))) for (i, j) in self.pairs]

        actions = PolyhedralActionSet(A, b, box)

        self.K = [pool_step_matrix(upper[i], params.N[i], params.p[i], params.lam[i], params.tail)
                  for i in range(J)]

        Bcost = np.asarray(params.B, dtype=np.float64)
        Hcost = np.asarray(params.H, dtype=np.float64)
        out_of = np.zeros((J, m))
        for k, (i, j) in enumerate(self.pairs):
            out_of[i, k] = 1.0

        def cost(state, u) -> float:
            x = np.asarray(state, dtype=np.float64)
            uv = np.asarray(u, dtype=np.float64)
            waiting = np.maximum(x - out_of @ uv - N, 0.0)
            return float(Bcost @ uv + Hcost @ waiting)

        self.cost = cost

        def post_state(state, u):
            return tuple(int(v) for v in np.asarray(state) + (net @ np.asarray(u)).astype(np.int64))

        self.post_state = post_state

        def kernel(state, u) -> TransitionRow:
            z = post_state(state, u)
            rows = [self.K[i][z[i]] for i in range(J)]
            joint = rows[0]
            for r in rows[1:]:
                joint = np.multiply.outer(joint, r)
            flat = joint.ravel()
            live = flat > 0.0
            return TransitionRow(np.flatnonzero(live), flat[live])

        self.mdp = LatticeMdp(lattice, actions, kernel, lambda s, u: -cost(s, u),
                              params.alpha, name=f"routing_{J}pool", cost_oriented=True,
                              factored=self._build_factored)

        lam = np.asarray(params.lam, dtype=np.float64)
        p = np.asarray(params.p, dtype=np.float64)

        def moments(state, u) -> DriftDiffusion:
            mu_b, s2_b = moments_batch(state, [u])
            return DriftDiffusion(mu_b[0], s2_b[0])

        def moments_batch(state, action_list):
            x = np.asarray(state, dtype=np.float64)
            U = np.asarray(action_list, dtype=np.float64).reshape(len(action_list), m)
            nets = U @ net.T                                  # (k, J)
            n_busy = np.minimum(x + nets, N)                  # ceil(x) = x on the lattice
            mu = nets + lam - p * n_busy
            s2 = mu[:, :, None] * mu[:, None, :]
            diag = lam + n_busy * p * (1.0 - p) + mu ** 2
            k = len(action_list)
            s2[np.arange(k)[:, None], np.arange(self.params.J), np.arange(self.params.J)] = diag
            return mu, s2

        self._moments_batch = moments_batch

        def eta(state):
            x = np.asarray(state)
            e = np.zeros(J)
            e[x == 0] = p[x == 0]
            e[x == np.asarray(upper)] = -1.0
            return e

        self.boundary_spec = BoundarySpec(kind="oblique", eta=eta)
        self.problem = TaylorProblem(self.mdp, moments, self.boundary_spec,
                                     moments_batch=moments_batch)

    def _build_factored(self) -> FactoredAssembly:
        mdp = self.mdp
        lattice = mdp.lattice
        shape = lattice.shape
        offsets = [0]
        rewards = []
        post_idx = []
        for i in range(mdp.n_states):
            state = lattice.state(i)
            acts = mdp.actions_at(i)
            for u in acts:
                rewards.append(-self.cost(state, u))
                post_idx.append(lattice.index(self.post_state(state, u)))
            offsets.append(offsets[-1] + len(acts))

        Ks = self.K

        def apply_expectation(values: np.ndarray) -> np.ndarray:
            t = values.reshape(shape)
            for axis, K in enumerate(Ks):
                t = np.moveaxis(np.tensordot(K, t, axes=(1, axis)), 0, axis)
            return t.ravel()

        return FactoredAssembly(offsets, rewards, post_idx, apply_expectation, mdp.discount)

    def mass_conserving_states(self) -> np.ndarray:
        """States where no action can push arrival mass past the buffer cap."""
        params = self.params
        a_max = []
        for lam in params.lam:
            k = int(stats.poisson.isf(params.tail, lam)) + 1
            while stats.poisson.sf(k, lam) >= params.tail:
                k += 1
            a_max.append(k)
        states = self.mdp.lattice.states()
        ok = np.ones(len(states), dtype=bool)
        for i in range(params.J):
            upper = params.N[i] + params.M
            ok &= np.maximum(states[:, i], params.N[i]) + a_max[i] <= upper
        return ok


def build_routing(params: RoutingParams) -> RoutingModel:
    return RoutingModel(params)


def table_params(J: int, alpha: float, lam_factor: float, M: int = None) -> RoutingParams:
    """The benchmark parameter sets: the 2-pool instance and 3-pool instance #1."""
    if J == 2:
        N = (10, 10)
        p = (0.56, 0.56)
        return RoutingParams(J=2, N=N, M=10 if M is None else M, p=p,
                             lam=tuple(lam_factor * n * q for n, q in zip(N, p)),
                             B=(5.0, 1.0), H=(1.0, 4.0), alpha=alpha)
    if J == 3:
        N = (10, 10, 10)
        p = (0.8, 0.8, 0.8)
        return RoutingParams(J=3, N=N, M=14 if M is None else M, p=p,
                             lam=tuple(lam_factor * n * q for n, q in zip(N, p)),
                             B=(1.0, 1.0, 4.0, 1.0, 2.0, 1.0), H=(1.0, 2.0, 3.0), alpha=alpha)
    raise ValueError("benchmark parameters are defined for J = 2 and J = 3")
