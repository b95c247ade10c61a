"""Computable optimality-gap diagnostics.

The central object is the Taylor remainder of a smooth candidate function
Phi under a fixed policy U:

    A_U[Phi](x) = alpha ((P^U - I) Phi)(x) - alpha L_U Phi(x),

the gap between the true one-step expectation and its second-order expansion.
A_U vanishes identically on quadratics.  Discounted accumulations of |A_U|
along the chain (computed exactly by a linear solve) bound |Phi - V_U|
pointwise whenever Phi solves the Taylored equation at every lattice state.

Also here: the central-difference third-derivative proxy, an empirical
Holder seminorm estimator for second derivatives on grids, corner-state
sets (within a radius of two or more boundary faces), and relative-error
gap reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InsufficientNeighborhood, OutOfStencilRange
from .exact import SolveOptions, DEFAULT_OPTIONS, discounted_functional
from .lattice import LatticeMdp
from .taylor import TaylorProblem


class SmoothFunction:
    """Callable with analytic gradient and Hessian, evaluated on coordinates."""

    def __init__(self, value: Callable, grad: Callable, hess: Callable):
        self._value = value
        self._grad = grad
        self._hess = hess

    def value(self, coords):
        return np.asarray(self._value(np.asarray(coords, dtype=np.float64)))

    def grad(self, x):
        return np.atleast_1d(np.asarray(self._grad(np.asarray(x, dtype=np.float64)), dtype=np.float64))

    def hess(self, x):
        return np.atleast_2d(np.asarray(self._hess(np.asarray(x, dtype=np.float64)), dtype=np.float64))


class GridFunction1d(SmoothFunction):
    """Values on a one-dimensional lattice with finite-difference derivatives.

    Centered differences inside, one-sided at the two edge states; the
    one_sided mask flags where the fallback was used.
    """

    def __init__(self, values: np.ndarray, lower: int = 0, h: float = 1.0):
        v = np.asarray(values, dtype=np.float64)
        self.values_arr = v
        self.lower = lower
        self.h = float(h)
        self.one_sided = np.zeros(len(v), dtype=bool)
        self.one_sided[[0, -1]] = True

        def value(coords):
            idx = np.rint(np.atleast_1d(coords).reshape(-1) - lower).astype(int)
            return v[idx]

        def grad(x):
            i = int(round(float(np.atleast_1d(x)[0]) - lower))
            if 0 < i < len(v) - 1:
                return (v[i + 1] - v[i - 1]) / (2 * self.h)
            if i == 0:
                return (v[1] - v[0]) / self.h
            return (v[-1] - v[-2]) / self.h

        def hess(x):
            i = int(round(float(np.atleast_1d(x)[0]) - lower))
            i = min(max(i, 1), len(v) - 2)
            return (v[i + 1] - 2 * v[i] + v[i - 1]) / self.h ** 2

        super().__init__(value, grad, hess)


def taylor_remainder(problem: TaylorProblem, policy, phi: SmoothFunction) -> np.ndarray:
    """A_U[Phi](x) for every lattice state, from the kernel row and (mu, sigma2)."""
    mdp = problem.mdp
    lattice = mdp.lattice
    alpha = mdp.discount
    states = lattice.states().astype(np.float64)
    phi_states = phi.value(states)
    out = np.empty(mdp.n_states)
    for i in range(mdp.n_states):
        x = lattice.state(i)
        a = int(policy[i])
        row = mdp.row(i, a)
        p_phi = float(row.probs @ phi_states[row.targets])
        dd = problem.moments(x, mdp.actions_at(i)[a])
        lu = float(dd.mu @ phi.grad(x)) + 0.5 * float(np.trace(dd.sigma2 @ phi.hess(x)))
        out[i] = alpha * (p_phi - phi_states[i]) - alpha * lu
    return out


def discounted_accumulation(mdp: LatticeMdp, policy, g,
                            options: SolveOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """E_x[sum_t alpha^t g(X_t)] for a nonnegative per-state g (exact solve)."""
    if callable(g):
        g = np.array([g(mdp.lattice.state(i)) for i in range(mdp.n_states)], dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if g.min() < 0.0:
        raise ValueError("discounted_accumulation expects nonnegative g; "
                         "use discounted_functional for signed integrands")
    return discounted_functional(mdp, policy, g, options)


def third_derivative_proxy(values: np.ndarray, h: int = 1) -> np.ndarray:
    """Central-difference proxy for the third derivative on an h-spaced grid.

    proxy[i] = (V[i+2] - 2 V[i+1] + 2 V[i-1] - V[i-2]) / (2 h^3); the two
    points nearest each edge are marked absent (NaN).  With h = 1 this is
    (1/2)(V(x+2) - 2V(x+1) + 2V(x-1) - V(x-2)).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or len(v) < 5:
        raise OutOfStencilRange("need a one-dimensional grid with at least 5 points")
    out = np.full(len(v), np.nan)
    out[2:-2] = (v[4:] - 2 * v[3:-1] + 2 * v[1:-3] - v[:-4]) / (2.0 * float(h) ** 3)
    return out


def proxy_at(values: np.ndarray, i: int, h: int = 1) -> float:
    v = np.asarray(values, dtype=np.float64)
    if not 2 <= i <= len(v) - 3:
        raise OutOfStencilRange(f"state {i} is within 2h of a grid edge")
    return float((v[i + 2] - 2 * v[i + 1] + 2 * v[i - 1] - v[i - 2]) / (2.0 * float(h) ** 3))


def fd_hessian_1d(values: np.ndarray, h: float = 1.0):
    """Second differences with one-sided copies at the edges; returns (H, one_sided)."""
    v = np.asarray(values, dtype=np.float64)
    hess = np.empty(len(v))
    hess[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h ** 2
    hess[0] = hess[1]
    hess[-1] = hess[-2]
    mask = np.zeros(len(v), dtype=bool)
    mask[[0, -1]] = True
    return hess, mask


def holder_seminorm_estimate(hessians: np.ndarray, coords: np.ndarray,
                             radius: float, beta: float = 1.0) -> np.ndarray:
    """Empirical sup over pairs within radius of |H(y) - H(z)| / |y - z|^beta.

    hessians: (n,) for one dimension or (n, d, d); coords: (n,) or (n, d);
    the matrix max-norm is used.  beta defaults to 1 (Lipschitz).
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    H = np.asarray(hessians, dtype=np.float64)
    if H.ndim == 1:
        H = H[:, None, None]
    X = np.asarray(coords, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = len(H)
    dist = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    off_diag = dist.copy()
    np.fill_diagonal(off_diag, np.inf)
    min_gap = float(off_diag.min())
    if radius < min_gap:
        raise InsufficientNeighborhood(f"radius {radius} below grid spacing {min_gap}")
    out = np.empty(n)
    for k in range(n):
        near = np.flatnonzero(dist[k] <= radius + 1e-12)
        if len(near) < 2:
            raise InsufficientNeighborhood(f"state {k} has fewer than 2 neighbors in radius")
        sub = H[near]
        dd = dist[np.ix_(near, near)]
        num = np.abs(sub[:, None] - sub[None, :]).max(axis=(2, 3))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = num / dd ** beta
        ratio[dd == 0.0] = 0.0
        out[k] = float(ratio.max())
    return out


def corner_states(lattice, rho: float, faces: str = "lower") -> np.ndarray:
    """States within rho of at least two boundary faces (the 'corners').

    faces 'lower' counts the axes B_i = {x_i = lower_i} only (empty result
    in one dimension); 'all' also counts the truncation faces x_i = upper_i.
    """
    states = lattice.states()
    lower = np.asarray(lattice.lower)
    upper = np.asarray(lattice.upper)
    close = (states - lower) <= rho
    if faces == "all":
        close = np.concatenate([close, (upper - states) <= rho], axis=1)
    elif faces != "lower":
        raise ValueError("faces must be 'lower' or 'all'")
    return close.sum(axis=1) >= 2


@dataclass
class GapReport:
    abs_gap: np.ndarray
    rel_gap: np.ndarray            # NaN where |V_star| < eps
    max_rel: float
    mean_rel: float
    excluded: int
    corner_mask: Optional[np.ndarray] = None
    occupancy: Optional[np.ndarray] = None
    proxy: Optional[np.ndarray] = None

    def summary(self) -> str:
        return f"max_rel={self.max_rel:.6g} mean_rel={self.mean_rel:.6g} excluded={self.excluded}"


def gap_report(v_candidate: np.ndarray, v_star: np.ndarray, corner_mask=None,
               occupancy=None, proxy=None, eps: float = 1e-9) -> GapReport:
    """Per-state |V_U - V_*| and relative errors |V_U - V_*| / |V_*|.

    States with |V_*| < eps are excluded from the ratios and counted.
    """
    v_candidate = np.asarray(v_candidate, dtype=np.float64)
    v_star = np.asarray(v_star, dtype=np.float64)
    if v_candidate.shape != v_star.shape:
        raise ValueError("value vectors must share a lattice")
    abs_gap = np.abs(v_candidate - v_star)
    ok = np.abs(v_star) >= eps
    rel = np.full(v_star.shape, np.nan)
    rel[ok] = abs_gap[ok] / np.abs(v_star[ok])
    max_rel = float(np.nanmax(rel)) if ok.any() else float("nan")
    mean_rel = float(np.nanmean(rel)) if ok.any() else float("nan")
    return GapReport(abs_gap, rel, max_rel, mean_rel, int((~ok).sum()),
                     corner_mask, occupancy, proxy)
