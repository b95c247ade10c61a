"""Ingredients of the second-order Taylor (TCP) approximation.

The one-step jump moments

    mu_u(x)_i      = E_x^u[(X_1 - x)_i]
    sigma2_u(x)_ij = E_x^u[(X_1 - x)_i (X_1 - x)_j]

collapse the transition matrix into the drift vector and the (raw, uncentered)
second-moment matrix that drive the differential operator

    L_u V = mu_u . DV + 1/2 trace(sigma2_u D^2 V).

Boundary behaviour is described by a BoundarySpec: either an oblique
reflecting direction eta (eta . DV = 0 on the boundary) or a first-order
Taylor (FOT) condition driven by the control-independent boundary drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import MissingBoundaryData, NonInwardEta, NotAvailable
from .lattice import LatticeMdp, StateLattice

SYM_TOL = 1e-12
COV_EIG_TOL = -1e-9
NU0 = 1e-6


@dataclass(frozen=True)
class DriftDiffusion:
    """Drift vector and raw second-moment matrix of the one-step jump."""

    mu: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        s2 = np.atleast_2d(np.asarray(self.sigma2, dtype=np.float64))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma2", s2)
        if s2.shape != (mu.size, mu.size):
            raise ValueError("sigma2 must be d x d for a d-vector mu")
        if np.abs(s2 - s2.T).max() > SYM_TOL:
            raise ValueError("sigma2 must be symmetric")

    def jump_covariance(self) -> np.ndarray:
        return self.sigma2 - np.outer(self.mu, self.mu)

    def validate_covariance(self) -> None:
        """sigma2 - mu mu' is the jump covariance and must be PSD."""
        eig = np.linalg.eigvalsh(self.jump_covariance())
        if eig.min() < COV_EIG_TOL:
            raise ValueError(f"sigma2 - mu mu' has eigenvalue {eig.min()} < 0")


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary condition for the TCP on the truncated box.

    kind "oblique": eta(state) is the reflecting direction; it must vanish in
    non-binding coordinates and point into the domain in binding ones
    (positive at a lower face, negative at an upper face).

    kind "fot": first-order Tayloring with the control-independent boundary
    drift returned by fot_drift(state).
    """

    kind: str
    eta: Optional[Callable] = None
    fot_drift: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("oblique", "fot"):
            raise ValueError("kind must be 'oblique' or 'fot'")
        if self.kind == "oblique" and self.eta is None:
            raise MissingBoundaryData("oblique boundary requires eta")
        if self.kind == "fot" and self.fot_drift is None:
            raise MissingBoundaryData("FOT boundary requires the boundary drift")

    def direction(self, state) -> np.ndarray:
        fn = self.eta if self.kind == "oblique" else self.fot_drift
        return np.atleast_1d(np.asarray(fn(tuple(state)), dtype=np.float64))

    def validate_inward(self, lattice: StateLattice, nu0: float = NU0) -> None:
        """Check eta points inward on every boundary state of the lattice.

        For the axis-aligned box the obliqueness requirement reduces to
        eta_i >= nu0 |eta| at lower faces and eta_i <= -nu0 |eta| at upper
        faces, with eta_i = 0 in non-binding coordinates.
        """
        states = lattice.states()
        lower = np.asarray(lattice.lower)
        upper = np.asarray(lattice.upper)
        on_lower = states == lower
        on_upper = states == upper
        boundary = (on_lower | on_upper).any(axis=1)
        for idx in np.flatnonzero(boundary):
            x = states[idx]
            eta = self.direction(x)
            norm = float(np.linalg.norm(eta))
            if norm == 0.0:
                raise NonInwardEta(tuple(x), eta)
            for i in range(lattice.dim):
                if on_lower[idx, i] and not (eta[i] >= nu0 * norm):
                    raise NonInwardEta(tuple(x), eta)
                if on_upper[idx, i] and not (eta[i] <= -nu0 * norm):
                    raise NonInwardEta(tuple(x), eta)
                if not on_lower[idx, i] and not on_upper[idx, i] and eta[i] != 0.0:
                    raise NonInwardEta(tuple(x), eta)


class TaylorProblem:
    """An MDP together with its drift/diffusion provider and boundary spec.

    moments(state, action) must be defined for every lattice state and every
    feasible action there.  Models with closed forms install an analytic
    provider (plus a vectorized variant for chain construction); the fallback
    computes moments from the truncated kernel rows.
    """

    def __init__(self, mdp: LatticeMdp, moments, boundary: BoundarySpec,
                 moments_batch=None, name: str = ""):
        self.mdp = mdp
        self.moments = moments
        self.boundary = boundary
        self._moments_batch = moments_batch
        self.name = name or mdp.name

    def moments_batch(self, state, actions):
        """(mu, sigma2) stacked over an action list: (k, d) and (k, d, d)."""
        if self._moments_batch is not None:
            return self._moments_batch(state, actions)
        mus, s2s = [], []
        for u in actions:
            dd = self.moments(state, u)
            mus.append(dd.mu)
            s2s.append(dd.sigma2)
        return np.stack(mus), np.stack(s2s)


def moments_from_kernel(mdp: LatticeMdp, state, action) -> DriftDiffusion:
    """Drift and second moment summed from the (truncated) kernel row.

    Components are accumulated with exact compensated summation, so Poisson
    and binomial tails do not lose mass to rounding.
    """
    lattice = mdp.lattice
    row = mdp.kernel(tuple(state), action)
    coords = np.stack([lattice.state(t) for t in row.targets]).astype(np.float64)
    diff = coords - np.asarray(state, dtype=np.float64)
    d = lattice.dim
    mu = np.array([math.fsum((row.probs * diff[:, i]).tolist()) for i in range(d)])
    sigma2 = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            sigma2[i, j] = sigma2[j, i] = math.fsum((row.probs * diff[:, i] * diff[:, j]).tolist())
    return DriftDiffusion(mu, sigma2)


def kernel_moment_provider(mdp: LatticeMdp):
    """A TaylorProblem moments callable backed by moments_from_kernel."""

    def moments(state, action):
        return moments_from_kernel(mdp, state, action)

    return moments


def analytic_moments(model, state, action) -> DriftDiffusion:
    """Closed-form drift/diffusion of a model, when it declares one.

    Raises NotAvailable for kernel-only models (use moments_from_kernel
    there instead).
    """
    problem = getattr(model, "problem", None)
    if problem is None or problem.moments is None:
        raise NotAvailable(f"model {model!r} provides no closed-form moments")
    return problem.moments(tuple(state), action)


def oblique_eta(model) -> BoundarySpec:
    """The model's oblique-derivative boundary spec.

    Models construct eta from the one-sided drift limits at each face (the
    jump of the drift as the boundary is approached); this helper just
    surfaces it and fails loudly for models without boundary data.
    """
    spec = getattr(model, "boundary_spec", None)
    if spec is None:
        raise MissingBoundaryData(f"model {model!r} declares no boundary data")
    spec = spec() if callable(spec) else spec
    if spec.kind != "oblique":
        raise MissingBoundaryData("model declares no oblique boundary direction")
    return spec


@dataclass(frozen=True)
class EllipticityReport:
    lambda_min: float
    lambda_max: float
    passed: bool
    argmin_state: tuple
    argmin_action: object


def ellipticity_check(problem: TaylorProblem, chunk: int = 4096) -> EllipticityReport:
    """Extreme eigenvalues of sigma2_u(x) over all states and feasible actions.

    Diagnostic only: reports (lambda_min, lambda_max) and pass = lambda_min > 0.
    """
    mdp = problem.mdp
    lam_min = np.inf
    lam_max = -np.inf
    arg_state, arg_action = None, None
    buf, meta = [], []

    def flush():
        nonlocal lam_min, lam_max, arg_state, arg_action
        if not buf:
            return
        eig = np.linalg.eigvalsh(np.stack(buf))
        lo = eig[:, 0]
        hi = eig[:, -1]
        k = int(np.argmin(lo))
        if lo[k] < lam_min:
            lam_min = float(lo[k])
            arg_state, arg_action = meta[k]
        lam_max = max(lam_max, float(hi.max()))
        buf.clear()
        meta.clear()

    for i in range(mdp.n_states):
        state = mdp.lattice.state(i)
        acts = mdp.actions_at(i)
        mu_b, s2_b = problem.moments_batch(state, acts)
        for a, u in enumerate(acts):
            buf.append(s2_b[a])
            meta.append((state, u))
        if len(buf) >= chunk:
            flush()
    flush()
    return EllipticityReport(lam_min, lam_max, lam_min > 0.0, arg_state, arg_action)
