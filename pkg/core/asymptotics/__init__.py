from core.asymptotics.gaps import (
    DeltaFamily,
    GapReport,
    asymptotic_delta,
    gap_report,
    high_snr_gap,
    high_snr_prelog,
    low_snr_gap_bounds,
    low_snr_sumrate,
    numeric_gap,
    numeric_prelog,
    prelog_table,
    sum_rate_evaluator,
)
