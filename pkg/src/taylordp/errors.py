"""Exception types raised across the package."""


class TaylorDpError(Exception):
    """Base class for all package errors."""


class ZeroInteriorMass(TaylorDpError):
    """A transition row places all of its mass outside the lattice."""

    def __init__(self, state, action=None):
        self.state = state
        self.action = action
        super().__init__(f"row at state {state} (action {action!r}) has no mass inside the lattice")


class EmptyActionSet(TaylorDpError):
    """A state has no feasible action."""

    def __init__(self, state):
        self.state = state
        super().__init__(f"no feasible action at state {state}")


class SingularSystem(TaylorDpError):
    """The policy-evaluation linear system could not be solved.

    Cannot occur for a stochastic kernel with discount < 1; signals a
    malformed kernel (rows not summing to one, or discount-1 cycles).
    """


class MaxIterationsExceeded(TaylorDpError):
    def __init__(self, iterations, what="iteration"):
        self.iterations = iterations
        super().__init__(f"{what} did not converge within {iterations} iterations")


class SmallDriftViolated(TaylorDpError):
    """Central differencing would produce a negative probability.

    The condition sigma2 >= |mu| * h failed; carries the offending
    coefficients and, when known, the (state, action) pair.
    """

    def __init__(self, mu, sigma2, h, state=None, action=None):
        self.mu = mu
        self.sigma2 = sigma2
        self.h = h
        self.state = state
        self.action = action
        loc = "" if state is None else f" at state {state}, action {action!r}"
        super().__init__(f"small-drift condition sigma2 >= |mu|h fails: sigma2={sigma2}, |mu|h={abs(mu) * h}{loc}")


class NotDiagonallyDominant(TaylorDpError):
    """Cross-derivative mass exceeds what the diagonal stencil can absorb."""

    def __init__(self, offenders):
        self.offenders = offenders  # list of (state, action, dim, deficit)
        head = offenders[: 3]
        super().__init__(f"diffusion matrix not diagonally dominant; first offenders: {head}")


class NonInwardEta(TaylorDpError):
    """The reflecting direction does not point into the domain at a boundary state."""

    def __init__(self, state, eta):
        self.state = state
        self.eta = eta
        super().__init__(f"eta {eta} does not point inward at boundary state {state}")


class MissingBoundaryData(TaylorDpError):
    """The model does not declare boundary drift limits needed for eta."""


class NotAvailable(TaylorDpError):
    """Closed-form moments requested from a kernel-only model."""


class InsufficientNeighborhood(TaylorDpError):
    """Seminorm estimation radius is smaller than the grid spacing."""


class OutOfStencilRange(TaylorDpError):
    """A finite-difference stencil was requested too close to the grid edge."""


class LatticeMismatch(TaylorDpError):
    """Two artifacts being compared live on different lattices."""


class InfeasibleAction(TaylorDpError):
    """An action outside the feasible set was passed to a kernel."""

    def __init__(self, state, action):
        self.state = state
        self.action = action
        super().__init__(f"action {action!r} infeasible at state {state}")
