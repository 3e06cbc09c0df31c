"""Reversible agreement systems, their s-energy, flocking and pinned swarms."""

from .core import (
    AgreementRun,
    Block,
    EmbeddedState,
    EnergyLedger,
    ReversibleSystem,
    build_system,
    check_cover_length,
    check_telescope,
    compute_blocks,
    dirichlet_form,
    run_agreement,
    s_energy,
    step,
    theorem2_bound,
    u_recurrence,
)
from .flocking import (
    FlockConfig,
    FlockRun,
    FlockState,
    backward_trace,
    count_switch_stats,
    detect_stabilization,
    fit_flight_line,
    line_of_sight_gap,
    simulate,
    update_network,
    vcs_step,
)
from .graphs import UnionFind, WeightedGraph
from .lower_bound import (
    PathSpectralModel,
    RecursiveSchedule,
    build_recursive_schedule,
    path_diameter,
    path_s_energy,
    replay_schedule,
    schedule_energy,
    theorem3_bound,
)
from .swarm import (
    ConvergenceStats,
    SwarmConfig,
    build_failure_matrix,
    run_swarm,
    sample_failures,
    symmetrize,
    theorem4_bound,
)

__version__ = "0.1.0"
