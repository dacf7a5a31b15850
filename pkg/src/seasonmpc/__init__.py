"""Rolling-horizon scheduling of a building electricity-heat system.

The package models a nine-component building energy network (solar PV and
thermal, grid, battery, seasonal heat storage, heat pump, AC byproduct and
the two demands), formulates each scheduling window as a sparse
mixed-binary LP, solves it with an in-package bounded-variable simplex or
scipy's HiGHS backend, and orchestrates year-long experiments: the
full-horizon benchmark, rolling-horizon strategies with configurable
end-of-window conditions, and the minimum-prediction-horizon search.
"""

from .network import (
    CANONICAL_ARCS,
    DurationUndefinedError,
    EnergyNetwork,
    HeatPumpParams,
    Node,
    SeriesBundle,
    StorageParams,
    TimeGrid,
    UnreachableCapacityError,
    leaky_fill_horizon,
    retention_from_self_discharge,
    storage_durations,
    validate_network,
)
from .formulation import (
    FORCE_MAX,
    FORCE_MIN,
    FREE,
    BoundaryConditions,
    FixedAt,
    FormulationError,
    MilpInstance,
    WindowSpec,
    build_milp,
    constraint_audit,
    flag_binary_steps,
    grid_exchange_cost,
)
from .solver import (
    SolveResult,
    SolveStatus,
    SolverConfig,
    dual_objective,
    solve_canonical,
    solve_lp,
    solve_milp,
    verify_solution,
)
from .lp_io import (
    cross_check_lp_roundtrip,
    lp_string,
    parse_lp,
    read_lp,
    read_solution,
    write_lp,
    write_solution,
)
from .horizon import (
    GapUndefinedError,
    HistoricalTarget,
    MinHorizonResult,
    RollingPolicy,
    SimulationTrace,
    TargetSeries,
    WindowInfeasibleError,
    YearBoundary,
    derive_targets,
    min_prediction_horizon,
    run_rolling,
    simultaneous_charge_discharge,
    solve_full_horizon,
    state_continuity_residuals,
    suboptimality_gap,
    trace_grid_cost,
)
from .data import (
    CaseConfig,
    IngestError,
    SeriesFileSpec,
    SyntheticSpec,
    generate_synthetic,
    ingest,
    load_targets_csv,
    reference_config,
    write_synthetic_case,
    write_targets_csv,
)
from .report import SummaryRow, emit_report, trace_from_csv, trace_to_csv

__version__ = "0.1.0"
