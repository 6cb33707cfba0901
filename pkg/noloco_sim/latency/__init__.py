"""Communication-time models for tree all-reduce and pairwise gossip."""

from .models import FleetSpec, LatencyModel, ReduceRatio, WallclockComparison, WallclockResult
from .reduce import expected_pair_max, mc_reduce_ratio, tree_allreduce_time
from .wallclock import BarrierMethod, compare_wallclock, random_pairing, ratio_by_world_size, wallclock_sim
