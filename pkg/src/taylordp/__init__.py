"""taylordp: second-order Taylor (TCP) approximations of lattice MDPs.

Exact solvers for discounted MDPs on truncated integer lattices, drift and
diffusion extraction, TCP-equivalent Kushner-Dupuis coarse chains, Taylored
Approximate Policy Iteration, and computable optimality-gap diagnostics.
"""

from .bounds import (GapReport, GridFunction1d, SmoothFunction, corner_states,
                     discounted_accumulation, fd_hessian_1d, gap_report,
                     holder_seminorm_estimate, proxy_at, taylor_remainder,
                     third_derivative_proxy)
from .exact import (PiResult, SolveOptions, discounted_functional, policy_evaluation,
                    policy_improvement, policy_iteration, value_iteration)
from .kdchain import (CoarseGrid, KdChain, TcpEquivalenceReport, build_chain,
                      build_interior_row_1d, build_interior_row_upwind_1d,
                      build_multidim_chain, rescale_reward, state_discount,
                      verify_tcp_equivalence)
from .lattice import (ExplicitActionSet, LatticeMdp, PolyhedralActionSet, StateLattice,
                      TransitionRow, enumerate_actions, max_jump, truncate_renormalize,
                      uniform_max_jump)
from .tapi import (TapiOptions, TapiResult, disaggregate_policy, disaggregate_value,
                   one_step_exact_improvement, tapi_exact_improvement_variant, tapi_solve)
from .taylor import (BoundarySpec, DriftDiffusion, EllipticityReport, TaylorProblem,
                     analytic_moments, ellipticity_check, kernel_moment_provider,
                     moments_from_kernel, oblique_eta)

__version__ = "0.1.0"
