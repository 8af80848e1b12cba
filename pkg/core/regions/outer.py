# core/regions/outer.py
import itertools
import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterator, List, Optional

from core.channel.model import GainMatrix, capacity
from core.errors import EnumerationLimitError
from core.optimizer.phase import TARGET_A, TARGET_B, Constraint, RateConstraintSet
from core.regions.df import HopPartition, RelayOrder

logger = logging.getLogger("OuterBounds")

CUT_CAP = 12


@dataclass(frozen=True)
class CutSubset:
    """Relays grouped with the transmitting terminal on the source side of a cut."""

    members: FrozenSet[int]

    def complement(self, m: int) -> FrozenSet[int]:
        return frozenset(range(1, m + 1)) - self.members

    @property
    def label(self) -> str:
        return "S={" + ",".join(str(r) for r in sorted(self.members)) + "}"


def cut_subsets(m: int, cap: int = CUT_CAP) -> Iterator[CutSubset]:
    """
    All 2^m relay subsets, smallest first.

    Raises:
        EnumerationLimitError: If m exceeds ``cap``
    """
    if m > cap:
        raise EnumerationLimitError(f"Cut-set enumeration over 2^{m} subsets exceeds the cap m <= {cap}")
    relays = range(1, m + 1)
    for size in range(m + 1):
        for members in itertools.combinations(relays, size):
            yield CutSubset(frozenset(members))


def outer_mabc(g: GainMatrix, P: float) -> RateConstraintSet:
    """
    Cut-set outer bound of the (m,2) MABC protocol.

    One R_a and one R_b constraint per cut; both terminals use P/2 in
    the uplink and every relay uses P in the broadcast.
    """
    a, b, m = g.a, g.b, g.m
    cons: List[Constraint] = []
    for cut in cut_subsets(m):
        rest = cut.complement(m)
        for target, src, dst in ((TARGET_A, a, b), (TARGET_B, b, a)):
            listen = capacity(sum(P / 2 * g(src, r) for r in rest))
            relay = capacity(sum(P * g(r, dst) for r in cut.members))
            cons.append(Constraint(target, (listen, relay), f"{target} {cut.label}"))
    return RateConstraintSet(2, tuple(cons), "MABC-OUT", "cut-set")


def outer_tdbc(g: GainMatrix, P: float) -> RateConstraintSet:
    """Cut-set outer bound of the (m,3) TDBC protocol, direct link included."""
    a, b, m = g.a, g.b, g.m
    cons: List[Constraint] = []
    for cut in cut_subsets(m):
        rest = cut.complement(m)
        for slot, target, src, dst in ((0, TARGET_A, a, b), (1, TARGET_B, b, a)):
            coeff = [0.0, 0.0, 0.0]
            coeff[slot] = capacity(sum(P * g(src, r) for r in rest) + P * g(src, dst))
            coeff[2] = capacity(sum(P * g(r, dst) for r in cut.members))
            cons.append(Constraint(target, tuple(coeff), f"{target} {cut.label}"))
    return RateConstraintSet(3, tuple(cons), "TDBC-OUT", "cut-set")


def outer_mhmr(g: GainMatrix, P: float, order: Optional[RelayOrder] = None) -> RateConstraintSet:
    """
    Cut-set outer bound of the (m,m+2) MHMR protocol.

    Node r_i transmits in phase m+2-i (a in phase m+2, b in phase 1).
    For every cut, each transmitter on the source side contributes its
    phase's capacity towards all receivers across the cut.
    """
    m = g.m
    order = order or RelayOrder.identity(m)
    order.validate(m)
    chain = g.reorder(order.order)
    t = m + 2
    cons: List[Constraint] = []
    for cut in cut_subsets(m):
        rest = cut.complement(m)
        for target, src, dst in ((TARGET_A, chain.a, chain.b), (TARGET_B, chain.b, chain.a)):
            coeff = [0.0] * t
            receivers = list(rest) + [dst]
            for i in sorted(cut.members | {src}):
                coeff[t - i - 1] = capacity(sum(P * chain(i, j) for j in receivers))
            cons.append(Constraint(target, tuple(coeff), f"{target} {cut.label}"))
    return RateConstraintSet(t, tuple(cons), "MHMR-OUT", order.config_id)


def outer_mhmr_general(g: GainMatrix, P: float, part: HopPartition, t: int) -> RateConstraintSet:
    """
    Cut-set outer bound of the (m,t) MHMR protocol.

    Hop R_i transmits in phase t-i. Inputs are taken independent, so the
    source-side members of a hop add their received power across the cut
    while destination-side members of the same hop are left out as
    receivers. Relays outside the partition stay silent but remain
    receivers on their side of the cut.
    """
    m = g.m
    part.validate(m, t)
    layers = part.layers(m)
    cons: List[Constraint] = []
    for cut in cut_subsets(m):
        rest = cut.complement(m)
        for target, src, dst in ((TARGET_A, g.a, g.b), (TARGET_B, g.b, g.a)):
            source_side = cut.members | {src}
            coeff = [0.0] * t
            for i, layer in enumerate(layers):
                tx = [x for x in layer if x in source_side]
                if not tx:
                    continue
                rx = [y for y in rest if y not in layer] + [dst]
                coeff[t - i - 1] = capacity(sum(P * g(x, y) for x in tx for y in rx))
            cons.append(Constraint(target, tuple(coeff), f"{target} {cut.label}"))
    return RateConstraintSet(t, tuple(cons), f"MHMR-OUT-t{t}", part.config_id)
