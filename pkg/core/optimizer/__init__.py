from core.optimizer.phase import (
    DEFAULT_LAMBDA_STEPS,
    TARGET_A,
    TARGET_B,
    TARGET_SUM,
    BoundaryEntry,
    Constraint,
    PhaseSchedule,
    RateConstraintSet,
    RatePair,
    RegionBoundary,
    WeightedOptimum,
    convex_frontier,
    default_lambdas,
    grid_oracle,
    max_sum_rate,
    max_weighted,
    pareto_frontier,
    simplex_lattice,
    trace_boundary,
)
