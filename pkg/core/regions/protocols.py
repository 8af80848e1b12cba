# core/regions/protocols.py
import logging
from dataclasses import dataclass, replace
from typing import Any, List, Optional

from core.channel.model import GainMatrix
from core.errors import ProtocolUndefinedError, RelayNetError
from core.optimizer.phase import (
    BoundaryEntry,
    PhaseSchedule,
    RateConstraintSet,
    RatePair,
    RegionBoundary,
    default_lambdas,
    trace_boundary,
)
from core.regions import af, df, outer
from core.regions.registry import ProtocolRegistry

logger = logging.getLogger("Protocols")


@dataclass
class RegionOptions:
    """Knobs shared by every protocol evaluation."""

    lambdas: Optional[List[float]] = None
    hull: bool = False
    power_grid: bool = False
    power_points: int = df.POWER_SPLIT_POINTS
    exhaustive_order: bool = False
    decode_sets: Optional[List[df.DecodeSets]] = None
    partitions: Optional[List[df.HopPartition]] = None
    t: Optional[int] = None
    screen_step: Optional[float] = None
    workers: int = 1

    def weights(self) -> List[float]:
        return list(self.lambdas) if self.lambdas is not None else default_lambdas()


class Protocol:
    """
    Base class for protocol evaluators.

    Subclasses that are described by linear constraints implement
    ``configs`` and ``build``; the base class then traces the boundary
    over the union of configurations.
    """

    name = ""
    kind = "DF"
    outer: Optional[str] = None

    def phase_count(self, m: int, options: RegionOptions) -> int:
        raise NotImplementedError

    def check(self, g: GainMatrix, options: RegionOptions) -> None:
        if g.m < 1:
            raise ProtocolUndefinedError(f"{self.name} needs at least one relay, got m={g.m}")

    def configs(self, g: GainMatrix, options: RegionOptions) -> List[Any]:
        return [None]

    def build(self, g: GainMatrix, P: float, config: Any) -> RateConstraintSet:
        raise NotImplementedError

    def boundary(self, g: GainMatrix, P: float, options: RegionOptions) -> RegionBoundary:
        """
        Trace the protocol's rate-region boundary.

        Args:
            g (GainMatrix): Channel gains
            P (float): Linear per-phase power
            options (RegionOptions): Sweep options

        Returns:
            RegionBoundary: best configuration per weight
        """
        self.check(g, options)
        configs = self.configs(g, options)
        logger.debug(f"{self.name}: {len(configs)} configuration(s) at m={g.m}")
        return trace_boundary(
            lambda cfg: self.build(g, P, cfg),
            configs,
            options.weights(),
            hull=options.hull,
            screen_step=options.screen_step,
            workers=options.workers,
            protocol=self.name,
        )

    def sum_rate(self, g: GainMatrix, P: float, options: RegionOptions) -> float:
        """Maximum sum rate (the boundary at weight 1/2)."""
        single = replace(options, lambdas=[0.5], hull=False)
        return self.boundary(g, P, single).sum_rate_max()


class DecodeSetProtocol(Protocol):
    """Shared configuration logic of the MABC and TDBC DF protocols."""

    def configs(self, g, options):
        sets = options.decode_sets if options.decode_sets is not None else df.enumerate_decode_sets(g.m)
        if not options.power_grid:
            return list(sets)
        return [variant for ds in sets for variant in df.power_split_grid(ds, options.power_points)]


@ProtocolRegistry.register("DF-MABC")
class DfMabc(DecodeSetProtocol):
    outer = "MABC-OUT"

    def phase_count(self, m, options):
        return 2

    def build(self, g, P, config):
        return df.build_mabc_df(g, P, config)


@ProtocolRegistry.register("DF-TDBC")
class DfTdbc(DecodeSetProtocol):
    outer = "TDBC-OUT"

    def phase_count(self, m, options):
        return 3

    def build(self, g, P, config):
        return df.build_tdbc_df(g, P, config)


@ProtocolRegistry.register("DF-MHMR")
class DfMhmr(Protocol):
    outer = "MHMR-OUT"

    def phase_count(self, m, options):
        return m + 2

    def configs(self, g, options):
        return df.enumerate_relay_orders(g.m, options.exhaustive_order)

    def build(self, g, P, config):
        return df.build_mhmr_df_full(g, P, config)


class PartitionProtocol(Protocol):
    """(m,t) protocols configured by hop partitions."""

    def phase_count(self, m, options):
        if options.t is None:
            raise RelayNetError(f"{self.name} needs a phase count t")
        return options.t

    def check(self, g, options):
        t = self.phase_count(g.m, options)
        if not 3 < t < g.m + 2:
            raise ProtocolUndefinedError(f"{self.name} needs 3 < t < m+2, got m={g.m}, t={t}")

    def configs(self, g, options):
        parts = options.partitions if options.partitions is not None else df.enumerate_partitions(g.m, options.t)
        return [(part, options.t) for part in parts]


@ProtocolRegistry.register("DF-MHMR-T")
class DfMhmrGeneral(PartitionProtocol):
    outer = "MHMR-OUT-T"

    def build(self, g, P, config):
        part, t = config
        return df.build_mhmr_df_general(g, P, part, t)


@ProtocolRegistry.register("DF-NAIVE")
class DfNaive(Protocol):
    def phase_count(self, m, options):
        return 2 * m + 2

    def build(self, g, P, config):
        return df.build_naive_multihop_df(g, P)


@ProtocolRegistry.register("MABC-OUT")
class MabcOuter(Protocol):
    kind = "OUT"

    def phase_count(self, m, options):
        return 2

    def build(self, g, P, config):
        return outer.outer_mabc(g, P)


@ProtocolRegistry.register("TDBC-OUT")
class TdbcOuter(Protocol):
    kind = "OUT"

    def phase_count(self, m, options):
        return 3

    def build(self, g, P, config):
        return outer.outer_tdbc(g, P)


@ProtocolRegistry.register("MHMR-OUT")
class MhmrOuter(Protocol):
    kind = "OUT"

    def phase_count(self, m, options):
        return m + 2

    def configs(self, g, options):
        return df.enumerate_relay_orders(g.m, options.exhaustive_order)

    def build(self, g, P, config):
        return outer.outer_mhmr(g, P, config)


@ProtocolRegistry.register("MHMR-OUT-T")
class MhmrOuterGeneral(PartitionProtocol):
    kind = "OUT"

    def build(self, g, P, config):
        part, t = config
        return outer.outer_mhmr_general(g, P, part, t)


class AfProtocol(Protocol):
    """
    Amplify-and-forward protocols: fixed equal phases, so the region is
    the rectangle below one rate pair.
    """

    kind = "AF"

    def rates(self, g: GainMatrix, P: float) -> RatePair:
        return af.AF_EVALUATORS[self.name](g, P)

    def boundary(self, g, P, options):
        self.check(g, options)
        rates = self.rates(g, P)
        schedule = PhaseSchedule.uniform(self.phase_count(g.m, options))
        entries = [BoundaryEntry(lam, rates, schedule, "fixed") for lam in options.weights()]
        return RegionBoundary(self.name, entries, [], options.hull)

    def sum_rate(self, g, P, options):
        self.check(g, options)
        return self.rates(g, P).sum_rate


@ProtocolRegistry.register("AF-MABC")
class AfMabc(AfProtocol):
    outer = "MABC-OUT"

    def phase_count(self, m, options):
        return 2


@ProtocolRegistry.register("AF-TDBC")
class AfTdbc(AfProtocol):
    outer = "TDBC-OUT"

    def phase_count(self, m, options):
        return 3


@ProtocolRegistry.register("AF-MHMR")
class AfMhmr(AfProtocol):
    outer = "MHMR-OUT"

    def phase_count(self, m, options):
        return m + 2
