"""Inter-satellite link topology design for LEO shells."""
from __future__ import annotations

__version__ = "0.1.0"

from .shell import (  # noqa: E402
    AngularOffset, SatelliteState, ShellConfig, Snapshot, d_los, d_stab, generate_synthetic_shell,
    instantaneous_distance, max_separation, plane_span, position_at,
)
from .stable import CandidateEdge, CandidateLinks, StableRegion, build_stable_link_set, compute_stable_region  # noqa: E402
from .topology import (  # noqa: E402
    DegreeViolation, InfeasibleDeployment, Provenance, Topology, build_plus_grid,
    build_theoretical_floor, build_three_isl_grid, connected_components,
)
from .lsl import LslParams, build_lsl  # noqa: E402
from .annealing import (  # noqa: E402
    AnnealSchedule, SurrogateScore, SurrogateWeights, accept, anneal, pareto_front, pareto_sweep, score_delta,
)
from .evaluation import (  # noqa: E402
    EvalReport, FlowAllocation, TrafficMatrix, flows_per_link, maxmin_throughput, shortest_path_metrics,
    throughput_sweep,
)
from .incremental import BreakageReport, DayTransition, measure_breakage, update_lsl, update_sa  # noqa: E402
from .io import TurnoverScenario, generate_turnover_series, load_snapshot, parse_tle_elements, save_snapshot  # noqa: E402
