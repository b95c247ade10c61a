"""Benchmark model builders, registered by name for the CLI and configs."""

from .heavy_traffic import HeavyTrafficParams, HeavyTrafficQueue, build_heavy_traffic, heavy_traffic_oracle
from .inventory import InventoryModel, InventoryParams, build_inventory
from .routing import RoutingModel, RoutingParams, build_routing, table_params
from .service_rate import (ServiceRateModel, ServiceRateParams, build_service_rate,
                           continuous_one_step_control, quartic_oracle)

REGISTRY = {
    "service_rate": (ServiceRateParams, build_service_rate),
    "inventory": (InventoryParams, build_inventory),
    "routing": (RoutingParams, build_routing),
    "heavy_traffic": (HeavyTrafficParams, build_heavy_traffic),
}


def build(name: str, **kwargs):
    if name not in REGISTRY:
        raise KeyError(f"unknown model {name!r}; available: {sorted(REGISTRY)}")
    params_cls, builder = REGISTRY[name]
    return builder(params_cls(**kwargs))
