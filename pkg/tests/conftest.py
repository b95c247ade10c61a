import pytest
from hypothesis import settings

import taylordp as tdp

settings.register_profile("deterministic", derandomize=True, deadline=None)
settings.load_profile("deterministic")
from taylordp.models import build
from taylordp.models.routing import build_routing, table_params


@pytest.fixture(scope="session")
def service_quadratic():
    return build("service_rate", M=100, alpha=0.99, cost="quadratic")


@pytest.fixture(scope="session")
def service_quadratic_star(service_quadratic):
    return tdp.policy_iteration(service_quadratic.mdp)


@pytest.fixture(scope="session")
def quartic_fixed():
    return build("service_rate", M=100, alpha=0.9, cost="quartic", fixed_u=0.5)


@pytest.fixture(scope="session")
def inventory_model():
    return build("inventory", lam=2.0, c=1.0, H=2.0, b=10.0, M=40, u_max=10, alpha=0.99)


@pytest.fixture(scope="session")
def routing2():
    return build_routing(table_params(J=2, alpha=0.99, lam_factor=0.8))


@pytest.fixture(scope="session")
def routing2_star(routing2):
    return tdp.policy_iteration(routing2.mdp, options=tdp.SolveOptions(max_iterations=100))


@pytest.fixture(scope="session")
def heavy_queue():
    return build("heavy_traffic", lam=0.4, alpha=0.99, M=200)


# small routing instance whose arrival tails never reach the buffer cap,
# so kernel and analytic moments must agree on interior states
@pytest.fixture(scope="session")
def routing_small():
    from taylordp.models.routing import RoutingParams
    return build_routing(RoutingParams(J=2, N=(3, 3), M=27, p=(0.5, 0.6),
                                       lam=(1.0, 0.8), B=(2.0, 1.0), H=(1.0, 2.0),
                                       alpha=0.95))
