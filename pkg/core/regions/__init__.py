from core.regions import protocols  # noqa: F401  registers every protocol
from core.regions.af import (
    AfEffectiveGains,
    af_mabc_rates,
    af_mhmr_effective_gains,
    af_mhmr_rates,
    af_sum_rate_gradient_probe,
    af_tdbc_rates,
)
from core.regions.df import (
    DecodeSets,
    HopPartition,
    PowerSplit,
    RelayOrder,
    build_mabc_df,
    build_mhmr_df_full,
    build_mhmr_df_general,
    build_naive_multihop_df,
    build_tdbc_df,
    enumerate_decode_sets,
    enumerate_partitions,
    enumerate_relay_orders,
    power_split_grid,
    regular_partition,
    labelled_decode_sets,
)
from core.regions.outer import CutSubset, cut_subsets, outer_mabc, outer_mhmr, outer_mhmr_general, outer_tdbc
from core.regions.protocols import Protocol, RegionOptions
from core.regions.registry import ProtocolRegistry
