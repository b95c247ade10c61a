import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import taylordp as tdp
from taylordp.kdchain import CoarseGrid
from taylordp.lattice import StateLattice
from taylordp.models import build
from taylordp.tapi import (TapiOptions, disaggregate_value, project_action,
                           taylored_greedy_policy)


def test_disaggregate_value_on_grid_points():
    lat = StateLattice((0,), (8,))
    grid = CoarseGrid.from_lattice(lat, 2)
    v = np.array([0.0, 4.0, 6.0, 7.0, 7.5])
    for mode in ("pc", "multilinear"):
        fine = disaggregate_value(v, grid, lat, mode)
        assert fine[::2] == pytest.approx(v)


def test_disaggregate_value_hand_example():
    # h = 2 with V(0) = 0, V(2) = 4: at x = 1 the pc extension ties to the
    # smaller grid point (0) and the multilinear one gives 2
    lat = StateLattice((0,), (8,))
    grid = CoarseGrid.from_lattice(lat, 2)
    v = np.array([0.0, 4.0, 8.0, 12.0, 16.0])   # linear so interior planes agree
    assert disaggregate_value(v, grid, lat, "pc")[1] == 0.0
    assert disaggregate_value(v, grid, lat, "multilinear")[1] == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_multilinear_exact_on_linear_functions(a, b):
    lat = StateLattice((0, 0), (8, 6))
    grid = CoarseGrid.from_lattice(lat, 2)
    pts = grid.points().astype(float)
    coarse = a * pts[:, 0] + b * pts[:, 1]
    fine = disaggregate_value(coarse, grid, lat, "multilinear")
    states = lat.states().astype(float)
    assert np.allclose(fine, a * states[:, 0] + b * states[:, 1], atol=1e-9)


def test_project_action_feasibility():
    feas = [(0, 0), (0, 1), (2, 0)]
    assert project_action((0, 1), feas) == 1          # already feasible
    assert project_action((3, 0), feas) == 2          # L1-nearest
    assert project_action((1, 1), feas) == 1          # tie (0,1) vs (2,0): first wins


def _single_action_model():
    return build("service_rate", M=30, alpha=0.9, cost="quartic", fixed_u=0.5)


def test_tapi_single_action_one_iteration():
    model = _single_action_model()
    res = tdp.tapi_solve(model.problem, TapiOptions(h=2, evaluate_fine=False))
    assert res.iterations == 1
    # the coarse value solves the chain's linear system
    chain = res.chain
    direct = tdp.policy_evaluation(chain, np.zeros(chain.n_states, dtype=np.int64))
    assert np.allclose(res.coarse_values, direct, atol=0, rtol=0)


def test_tapi_equals_pi_on_chain(service_quadratic):
    # structural equivalence: the TAPI fixed point is policy iteration on the
    # chain, state for state and action for action
    opts = TapiOptions(h=2, evaluate_fine=False)
    res = tdp.tapi_solve(service_quadratic.problem, opts)
    chain = tdp.build_chain(service_quadratic.problem, 2)
    pi = tdp.policy_iteration(chain)
    assert np.array_equal(res.coarse_policy, pi.policy)
    assert np.allclose(res.coarse_values, pi.values, rtol=0, atol=0)


def test_tapi_chain_iterates_monotone(service_quadratic, routing2, inventory_model):
    for model in (service_quadratic, routing2, inventory_model):
        chain = tdp.build_chain(model.problem, 2)
        res = tdp.policy_iteration(chain, record_history=True)
        assert res.iterations <= 100
        for k in range(1, len(res.value_history)):
            prev, cur = res.value_history[k - 1], res.value_history[k]
            assert (cur >= prev - 1e-7 * (1.0 + np.abs(prev))).all()


def test_disaggregated_policy_feasible_everywhere(routing2):
    res = tdp.tapi_solve(routing2.problem, TapiOptions(h=2, evaluate_fine=False))
    routing2.mdp.validate_policy(res.fine_policy)
    res_pc = tdp.tapi_solve(routing2.problem,
                            TapiOptions(h=2, policy_extension="pc", evaluate_fine=False))
    routing2.mdp.validate_policy(res_pc.fine_policy)
    routing2.mdp.validate_policy(res_pc.disaggregated_policy)


def test_one_step_from_exact_value_recovers_optimum(service_quadratic, service_quadratic_star):
    pol = tdp.one_step_exact_improvement(service_quadratic.mdp, service_quadratic_star.values)
    v = tdp.policy_evaluation(service_quadratic.mdp, pol)
    assert np.abs(v - service_quadratic_star.values).max() <= 1e-6 * (
        1 + np.abs(service_quadratic_star.values).max())


def test_exact_improvement_variant_single_action_matches_tapi():
    model = _single_action_model()
    a = tdp.tapi_solve(model.problem, TapiOptions(h=2))
    b = tdp.tapi_exact_improvement_variant(model.problem, TapiOptions(h=2))
    assert np.array_equal(a.fine_policy, b.fine_policy)
    assert np.allclose(a.fine_values, b.fine_values, rtol=1e-12)


def test_exact_improvement_cap_sets_flag(routing2):
    res = tdp.tapi_exact_improvement_variant(
        routing2.problem, TapiOptions(h=4, max_iterations=1, evaluate_fine=False))
    assert res.oscillated
    assert res.fine_policy is not None
    routing2.mdp.validate_policy(res.fine_policy)


def test_taylored_greedy_same_as_chain_improvement_on_grid(service_quadratic):
    # at grid states whose stencil stays clear of the reflecting planes, the
    # fine Taylored greedy reproduces the chain's own greedy (same stencil,
    # same values); next to a boundary the fine greedy sees the extrapolated
    # value instead of the reflected duplicate, by design
    chain = tdp.build_chain(service_quadratic.problem, 2)
    pi = tdp.policy_iteration(chain)
    fine = taylored_greedy_policy(service_quadratic.problem, chain, pi.values)
    final = tdp.policy_improvement(chain, pi.values)
    lat = service_quadratic.mdp.lattice
    n_axis = len(chain.grid.axes[0])
    checked = 0
    for g in range(chain.n_states):
        pos = chain.grid.position(g)[0]
        if not 2 <= pos <= n_axis - 3:
            continue
        si = lat.index(chain.grid.point(g))
        chain_action = chain.actions_at(g)[int(final[g])]
        fine_action = service_quadratic.mdp.actions_at(si)[int(fine[si])]
        assert chain_action == fine_action
        checked += 1
    assert checked > 40
