# core/regions/df.py
import itertools
import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

from core.channel.model import GainMatrix, capacity
from core.errors import EnumerationLimitError, ProtocolUndefinedError, RelayNetError
from core.optimizer.phase import (
    TARGET_A,
    TARGET_B,
    TARGET_SUM,
    Constraint,
    RateConstraintSet,
    simplex_lattice,
)

logger = logging.getLogger("DFRegions")

DECODE_SET_CAP = 8
RELAY_ORDER_CAP = 6
POWER_SPLIT_POINTS = 21


def _fmt(nodes: Iterable[int]) -> str:
    return "{" + ",".join(str(r) for r in sorted(nodes)) + "}"


@dataclass(frozen=True)
class PowerSplit:
    """Fractions of P given to the relays in A∩B, A\\B and B\\A during the broadcast."""

    f_both: float
    f_a: float
    f_b: float

    def __post_init__(self):
        fractions = (self.f_both, self.f_a, self.f_b)
        if any(f < 0 for f in fractions) or sum(fractions) > 1.0 + 1e-9:
            raise RelayNetError(f"Power split fractions must be nonnegative and sum to at most 1, got {fractions}")

    @property
    def label(self) -> str:
        return f"split=({self.f_both:.3f},{self.f_a:.3f},{self.f_b:.3f})"


@dataclass(frozen=True)
class DecodeSets:
    """
    Relays able to decode w_a (``A``) and w_b (``B``).

    ``split`` optionally overrides the default broadcast power allocation
    in which each subset receives a share of P proportional to its size.
    """

    A: FrozenSet[int]
    B: FrozenSet[int]
    split: Optional[PowerSplit] = None

    def __post_init__(self):
        object.__setattr__(self, "A", frozenset(int(r) for r in self.A))
        object.__setattr__(self, "B", frozenset(int(r) for r in self.B))

    @property
    def both(self) -> FrozenSet[int]:
        return self.A & self.B

    @property
    def a_only(self) -> FrozenSet[int]:
        return self.A - self.B

    @property
    def b_only(self) -> FrozenSet[int]:
        return self.B - self.A

    @property
    def union(self) -> FrozenSet[int]:
        return self.A | self.B

    @property
    def config_id(self) -> str:
        base = f"A={_fmt(self.A)};B={_fmt(self.B)}"
        return f"{base};{self.split.label}" if self.split else base

    def validate(self, m: int) -> None:
        bad = [r for r in self.union if not 1 <= r <= m]
        if bad:
            raise RelayNetError(f"Decode sets reference relays {sorted(bad)} outside 1..{m}")

    def subset_powers(self, P: float) -> Tuple[float, float, float]:
        """Total broadcast power of A∩B, A\\B and B\\A."""
        if self.split is not None:
            return (self.split.f_both * P, self.split.f_a * P, self.split.f_b * P)
        n = len(self.union)
        if n == 0:
            return (0.0, 0.0, 0.0)
        return (len(self.both) / n * P, len(self.a_only) / n * P, len(self.b_only) / n * P)


@dataclass(frozen=True)
class RelayOrder:
    order: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(r) for r in self.order))

    @classmethod
    def identity(cls, m: int) -> "RelayOrder":
        return cls(tuple(range(1, m + 1)))

    @property
    def config_id(self) -> str:
        return "order=(" + ",".join(str(r) for r in self.order) + ")"

    def validate(self, m: int) -> None:
        if sorted(self.order) != list(range(1, m + 1)):
            raise RelayNetError(f"Relay order {self.order} is not a permutation of 1..{m}")


@dataclass(frozen=True)
class HopPartition:
    """Ordered relay subsets R_1..R_{t-2}; a and b form the outer hops."""

    hops: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        hops = tuple(tuple(sorted(int(r) for r in hop)) for hop in self.hops)
        object.__setattr__(self, "hops", hops)
        if not hops or any(len(h) == 0 for h in hops):
            raise RelayNetError(f"Hop partition needs non-empty subsets, got {hops}")
        flat = [r for h in hops for r in h]
        if len(flat) != len(set(flat)):
            raise RelayNetError(f"Hop subsets must be disjoint, got {hops}")

    @property
    def relays(self) -> Tuple[int, ...]:
        return tuple(r for h in self.hops for r in h)

    @property
    def config_id(self) -> str:
        return "hops=" + "|".join(_fmt(h) for h in self.hops)

    def validate(self, m: int, t: int) -> None:
        if not 3 < t < m + 2:
            raise ProtocolUndefinedError(f"(m,t) MHMR needs 3 < t < m+2, got m={m}, t={t}")
        if len(self.hops) != t - 2:
            raise RelayNetError(f"Partition has {len(self.hops)} hops, expected t-2={t - 2}")
        bad = [r for r in self.relays if not 1 <= r <= m]
        if bad:
            raise RelayNetError(f"Partition references relays {bad} outside 1..{m}")

    def layers(self, m: int) -> List[Tuple[int, ...]]:
        """R_0..R_{t-1} with R_0 = {a} and R_{t-1} = {b}."""
        return [(0,)] + list(self.hops) + [(m + 1,)]


def build_mabc_df(g: GainMatrix, P: float, ds: DecodeSets) -> RateConstraintSet:
    """
    Decode-and-forward (m,2) MABC constraints for one (A, B) choice.

    Phase 1 is the multiple-access uplink, phase 2 the broadcast. Minima
    over empty sets are omitted; an empty A (resp. B) pins R_a (resp. R_b)
    to zero since there is no direct link.

    Args:
        g (GainMatrix): Channel gains
        P (float): Per-phase power
        ds (DecodeSets): Relay decode sets

    Returns:
        RateConstraintSet: t=2 constraints
    """
    ds.validate(g.m)
    a, b = g.a, g.b
    p_both, p_a, p_b = ds.subset_powers(P)
    cons: List[Constraint] = []

    for src, dst, target, own, p_own in ((a, b, TARGET_A, ds.a_only, p_a), (b, a, TARGET_B, ds.b_only, p_b)):
        decoders = ds.both | own
        if not decoders:
            cons.append(Constraint(target, (0.0, 0.0), f"{target} no decoder"))
            continue
        uplink = [capacity(P / 2 * g(src, r)) for r in ds.both]
        uplink += [capacity(P * g(src, r) / (P * g(dst, r) + 2)) for r in own]
        cons.append(Constraint(target, (min(uplink), 0.0), f"{target} uplink"))
        snr = sum(g(r, dst) * p_both for r in ds.both) + sum(g(r, dst) * p_own for r in own)
        cons.append(Constraint(target, (0.0, capacity(snr)), f"{target} broadcast"))

    if ds.both:
        joint = min(capacity(P / 2 * (g(a, r) + g(b, r))) for r in ds.both)
        cons.append(Constraint(TARGET_SUM, (joint, 0.0), "sum uplink"))
    return RateConstraintSet(2, tuple(cons), "DF-MABC", ds.config_id)


def build_tdbc_df(g: GainMatrix, P: float, ds: DecodeSets) -> RateConstraintSet:
    """
    Decode-and-forward (m,3) TDBC constraints for one (A, B) choice.

    a transmits in phase 1, b in phase 2 and the relays broadcast in
    phase 3. The direct link always carries rate, so empty decode sets
    only drop the relay-decoding constraint.
    """
    ds.validate(g.m)
    a, b = g.a, g.b
    p_both, p_a, p_b = ds.subset_powers(P)
    direct = capacity(P * g(a, b))
    cons: List[Constraint] = []

    for slot, src, dst, target, decoders, own, p_own in (
        (0, a, b, TARGET_A, ds.A, ds.a_only, p_a),
        (1, b, a, TARGET_B, ds.B, ds.b_only, p_b),
    ):
        coeff = [0.0, 0.0, 0.0]
        if decoders:
            coeff[slot] = min(capacity(P * g(src, r)) for r in decoders)
            cons.append(Constraint(target, tuple(coeff), f"{target} relay decode"))
        snr = sum(g(r, dst) * p_both for r in ds.both) + sum(g(r, dst) * p_own for r in own)
        coeff = [0.0, 0.0, capacity(snr)]
        coeff[slot] = direct
        cons.append(Constraint(target, tuple(coeff), f"{target} destination"))
    return RateConstraintSet(3, tuple(cons), "DF-TDBC", ds.config_id)


def build_mhmr_df_full(g: GainMatrix, P: float, order: Optional[RelayOrder] = None) -> RateConstraintSet:
    """
    Decode-and-forward (m,m+2) MHMR constraints for a relay chain.

    Relay r_i transmits in phase m+2-i; terminal a in phase m+2 and
    terminal b in phase 1. The k-th R_a constraint collects everything
    the k-th node of the chain has overheard from its predecessors.
    """
    m = g.m
    order = order or RelayOrder.identity(m)
    order.validate(m)
    chain = g.reorder(order.order)
    t = m + 2
    cons: List[Constraint] = []
    for k in range(1, m + 2):
        coeff = [0.0] * t
        for i in range(1, k + 1):
            coeff[m + 3 - i - 1] = capacity(P * chain(i - 1, k))
        cons.append(Constraint(TARGET_A, tuple(coeff), f"R_a hop {k}"))
    for k in range(1, m + 2):
        coeff = [0.0] * t
        for i in range(1, k + 1):
            coeff[i - 1] = capacity(P * chain(m + 2 - i, m + 1 - k))
        cons.append(Constraint(TARGET_B, tuple(coeff), f"R_b hop {k}"))
    return RateConstraintSet(t, tuple(cons), "DF-MHMR", order.config_id)


def build_mhmr_df_general(g: GainMatrix, P: float, part: HopPartition, t: int) -> RateConstraintSet:
    """
    Decode-and-forward (m,t) MHMR constraints for a hop partition.

    Every relay of a hop transmits with full power P and the receiver
    adds the transmissions coherently inside one C(.).

    Raises:
        ProtocolUndefinedError: Unless 3 < t < m+2
    """
    m = g.m
    part.validate(m, t)
    layers = part.layers(m)

    def hop_rate(tx_layer: Sequence[int], receiver: int) -> float:
        return capacity(P * sum(g(x, receiver) for x in tx_layer))

    cons: List[Constraint] = []
    for k in range(1, t):
        for receiver in layers[k]:
            coeff = [0.0] * t
            for i in range(1, k + 1):
                coeff[t - i] = hop_rate(layers[i - 1], receiver)
            cons.append(Constraint(TARGET_A, tuple(coeff), f"R_a hop {k} rx {receiver}"))
    for k in range(1, t):
        for receiver in layers[t - 1 - k]:
            coeff = [0.0] * t
            for i in range(1, k + 1):
                coeff[i - 1] = hop_rate(layers[t - i], receiver)
            cons.append(Constraint(TARGET_B, tuple(coeff), f"R_b hop {k} rx {receiver}"))
    return RateConstraintSet(t, tuple(cons), f"DF-MHMR-t{t}", part.config_id)


def build_naive_multihop_df(g: GainMatrix, P: float, order: Optional[RelayOrder] = None) -> RateConstraintSet:
    """
    Uncoded (m,2m+2) multi-hop baseline.

    w_a travels a -> r_1 -> ... -> b in phases 1..m+1, then w_b travels
    back in phases m+2..2m+2. Each hop only decodes its predecessor.
    """
    m = g.m
    order = order or RelayOrder.identity(m)
    order.validate(m)
    chain = g.reorder(order.order)
    t = 2 * m + 2
    cons: List[Constraint] = []
    for k in range(1, m + 2):
        coeff = [0.0] * t
        coeff[k - 1] = capacity(P * chain(k - 1, k))
        cons.append(Constraint(TARGET_A, tuple(coeff), f"R_a hop {k}"))
        coeff = [0.0] * t
        coeff[m + k] = capacity(P * chain(m + 2 - k, m + 1 - k))
        cons.append(Constraint(TARGET_B, tuple(coeff), f"R_b hop {k}"))
    return RateConstraintSet(t, tuple(cons), "DF-NAIVE", order.config_id)


def enumerate_decode_sets(m: int, cap: int = DECODE_SET_CAP) -> List[DecodeSets]:
    """
    Every assignment of relays to {neither, A only, B only, both}.

    Raises:
        EnumerationLimitError: If m exceeds ``cap`` (4^m configurations)
    """
    if m < 1:
        raise RelayNetError(f"Decode-set enumeration needs m >= 1, got {m}")
    if m > cap:
        raise EnumerationLimitError(
            f"Enumerating 4^{m} decode sets exceeds the cap m <= {cap}; list decode_sets explicitly in the config"
        )
    out = []
    for roles in itertools.product(range(4), repeat=m):
        A = {r for r, role in zip(range(1, m + 1), roles) if role in (1, 3)}
        B = {r for r, role in zip(range(1, m + 1), roles) if role in (2, 3)}
        out.append(DecodeSets(frozenset(A), frozenset(B)))
    logger.debug(f"Enumerated {len(out)} decode sets for m={m}")
    return out


def labelled_decode_sets() -> List[Tuple[str, DecodeSets]]:
    """The four labelled (A, B) regions of the two-relay MABC example."""
    return [
        ("1", DecodeSets(frozenset({1, 2}), frozenset({1, 2}))),
        ("2", DecodeSets(frozenset({1, 2}), frozenset({1}))),
        ("3", DecodeSets(frozenset({2}), frozenset({1, 2}))),
        ("4", DecodeSets(frozenset({2}), frozenset({1}))),
    ]


def power_split_grid(ds: DecodeSets, points: int = POWER_SPLIT_POINTS) -> List[DecodeSets]:
    """
    Copies of ``ds`` over a grid of broadcast power splits.

    The grid covers the simplex of fractions over the non-empty subsets
    with ``points`` values per free ratio. The proportional split is
    always included.
    """
    if points < 2:
        raise RelayNetError(f"Power split grid needs at least 2 points, got {points}")
    subsets = [len(ds.both) > 0, len(ds.a_only) > 0, len(ds.b_only) > 0]
    active = [i for i, present in enumerate(subsets) if present]
    proportional = DecodeSets(ds.A, ds.B)
    if len(active) <= 1:
        return [proportional]
    lattice = simplex_lattice(len(active), 1.0 / (points - 1))
    out = [proportional]
    for row in lattice:
        fractions = [0.0, 0.0, 0.0]
        for idx, value in zip(active, row):
            fractions[idx] = float(value)
        out.append(DecodeSets(ds.A, ds.B, PowerSplit(*fractions)))
    return out


def enumerate_relay_orders(m: int, exhaustive: bool = False) -> List[RelayOrder]:
    """Identity order, or every permutation when ``exhaustive`` (m <= 6)."""
    if not exhaustive:
        return [RelayOrder.identity(m)]
    if m > RELAY_ORDER_CAP:
        raise EnumerationLimitError(f"Exhaustive relay orders limited to m <= {RELAY_ORDER_CAP}, got m={m}")
    return [RelayOrder(p) for p in itertools.permutations(range(1, m + 1))]


def regular_partition(m: int, hops: int) -> HopPartition:
    """
    Split relays 1..m into ``hops`` consecutive groups of (nearly) equal size.

    ``regular_partition(8, 4)`` is the (8,6) regular protocol with two
    relays per intermediate hop.
    """
    if not 1 <= hops <= m:
        raise RelayNetError(f"Cannot split {m} relays into {hops} non-empty hops")
    size, extra = divmod(m, hops)
    groups, start = [], 1
    for h in range(hops):
        n = size + (1 if h < extra else 0)
        groups.append(tuple(range(start, start + n)))
        start += n
    return HopPartition(tuple(groups))


def enumerate_partitions(m: int, t: int) -> List[HopPartition]:
    """All splits of the chain 1..m into t-2 consecutive non-empty hops."""
    hops = t - 2
    if not 3 < t < m + 2:
        raise ProtocolUndefinedError(f"(m,t) MHMR needs 3 < t < m+2, got m={m}, t={t}")
    out = []
    for cuts in itertools.combinations(range(1, m), hops - 1):
        bounds = (0,) + cuts + (m,)
        out.append(HopPartition(tuple(tuple(range(lo + 1, hi + 1)) for lo, hi in zip(bounds, bounds[1:]))))
    return out
