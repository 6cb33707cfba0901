"""Pipeline topology and random/fixed routing."""

from .plan import (
  PathRecord,
  RoutePlan,
  RoutingMode,
  route_backward,
  route_forward,
  sample_route_plan,
  trace_path,
)
from .topology import PipelineTopology
