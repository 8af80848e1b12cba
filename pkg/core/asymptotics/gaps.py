# core/asymptotics/gaps.py
import json
import logging
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Tuple

import numpy as np

from core.channel.model import GainMatrix, equal_gain_matrix
from core.errors import RelayNetError, UnknownProtocolError
from core.optimizer.phase import PhaseSchedule
from core.regions.protocols import RegionOptions
from core.regions.registry import ProtocolRegistry

logger = logging.getLogger("Asymptotics")

LOW_SNR_PROTOCOLS = ("DF-MABC", "MABC-OUT", "DF-TDBC", "TDBC-OUT", "DF-MHMR", "MHMR-OUT")
HIGH_SNR_PROTOCOLS = ("AF-MABC", "DF-MABC", "MABC-OUT", "AF-TDBC", "DF-TDBC", "TDBC-OUT",
                      "AF-MHMR", "DF-MHMR", "MHMR-OUT")
GAP_PROTOCOLS = ("AF-MABC", "DF-MABC", "AF-TDBC", "DF-TDBC", "AF-MHMR", "DF-MHMR")
BOUNDS = ("lower", "upper")
ALPHA_SAMPLES = (0.0, 0.5, 1.0)
MIN_PRELOG_SPAN = 1e4


def _check_bound(bound: str) -> None:
    if bound not in BOUNDS:
        raise RelayNetError(f"Bound must be one of {BOUNDS}, got '{bound}'")


def low_snr_sumrate(protocol: str, m: int, h_sq: float, P: float, bound: str = "lower") -> float:
    """
    Low-SNR sum rate with every gain set to ``h_sq``.

    ``bound`` picks the h_min ("lower") or h_max ("upper") form; they only
    differ for the MHMR outer bound, whose lower form uses equal phases.

    Raises:
        UnknownProtocolError: If the protocol has no low-SNR closed form
    """
    _check_bound(bound)
    base = P * h_sq / math.log(2)
    if protocol == "DF-MABC":
        return base * 2 * m / (2 * m + 1)
    if protocol in ("MABC-OUT", "TDBC-OUT"):
        return 2 * m * base
    if protocol in ("DF-TDBC", "DF-MHMR"):
        return base
    if protocol == "MHMR-OUT":
        return 2 * base * ((m + 1) / (m + 2) if bound == "lower" else 1.0)
    raise UnknownProtocolError(f"No low-SNR sum rate for '{protocol}' (known: {', '.join(LOW_SNR_PROTOCOLS)})")


def low_snr_gap_bounds(protocol: str, m: int, h_min_sq: float, h_max_sq: float) -> Tuple[float, float]:
    """
    Bounds (lower, upper) on the low-SNR multiplicative gap of a DF protocol.

    Raises:
        RelayNetError: Unless 0 < h_min_sq <= h_max_sq
        UnknownProtocolError: For protocols other than DF-MABC/TDBC/MHMR
    """
    if not 0 < h_min_sq <= h_max_sq:
        raise RelayNetError(f"Need 0 < h_min_sq <= h_max_sq, got {h_min_sq}, {h_max_sq}")
    ratio = h_min_sq / h_max_sq
    if protocol == "DF-MABC":
        factor = 1.0 / (2 * m + 1)
        return factor * ratio, factor / ratio
    if protocol == "DF-TDBC":
        factor = 1.0 / (2 * m)
        return factor * ratio, factor / ratio
    if protocol == "DF-MHMR":
        return 0.5 * ratio, 0.5 / ratio * (m + 2) / (m + 1)
    raise UnknownProtocolError(f"No low-SNR gap bounds for '{protocol}'")


def high_snr_gap(protocol: str, m: int) -> float:
    """High-SNR multiplicative gap of an achievable scheme."""
    table = {
        "AF-MABC": 0.5,
        "DF-MABC": 1.0 / 3.0,
        "AF-TDBC": 1.0 / 3.0,
        "DF-TDBC": 0.5,
        "AF-MHMR": 2.0 / (m + 2),
        "DF-MHMR": 1.0,
    }
    if protocol not in table:
        raise UnknownProtocolError(f"No high-SNR gap for '{protocol}' (known: {', '.join(GAP_PROTOCOLS)})")
    return table[protocol]


def high_snr_prelog(protocol: str, m: int) -> float:
    """Tabulated coefficient of log P in the high-SNR sum rate."""
    table = {
        "AF-MABC": 1.0,
        "DF-MABC": 2.0 / 3.0,
        "MABC-OUT": 2.0,
        "AF-TDBC": 2.0 / 3.0,
        "DF-TDBC": 1.0,
        "TDBC-OUT": 2.0,
        "AF-MHMR": 2.0 / (m + 2),
        "DF-MHMR": 1.0,
        "MHMR-OUT": 1.0,
    }
    if protocol not in table:
        raise UnknownProtocolError(f"No high-SNR pre-log for '{protocol}'")
    return table[protocol]


def numeric_prelog(evaluator: Callable[[float], float], P_lo: float, P_hi: float) -> float:
    """
    Slope of the sum rate against log2 P between two powers.

    Raises:
        RelayNetError: If P_hi/P_lo < 1e4 or the evaluator returns a non-finite value
    """
    if P_lo <= 0 or P_hi / P_lo < MIN_PRELOG_SPAN:
        raise RelayNetError(f"Pre-log estimate needs P_hi/P_lo >= {MIN_PRELOG_SPAN:g}, got {P_lo}, {P_hi}")
    r_lo, r_hi = evaluator(P_lo), evaluator(P_hi)
    if not (math.isfinite(r_lo) and math.isfinite(r_hi)):
        raise RelayNetError(f"Evaluator returned non-finite rates {r_lo}, {r_hi}")
    return (r_hi - r_lo) / (math.log2(P_hi) - math.log2(P_lo))


def numeric_gap(inner: Callable[[float], float], outer: Callable[[float], float], P: float) -> float:
    """Measured ratio of achievable to outer-bound sum rate at power P."""
    r_out = outer(P)
    if r_out <= 0:
        raise RelayNetError(f"Outer-bound sum rate must be positive, got {r_out}")
    return inner(P) / r_out


@dataclass(frozen=True)
class DeltaFamily:
    """
    Phase allocation, possibly a one-parameter family in alpha.

    ``fixed`` holds the allocation when no free parameter exists;
    otherwise ``alpha_phases`` names the two phases sharing time as
    (alpha, 1-alpha).
    """

    t: int
    fixed: Optional[Tuple[float, ...]] = None
    alpha_phases: Optional[Tuple[int, int]] = None

    @property
    def parametric(self) -> bool:
        return self.fixed is None

    def at(self, alpha: float = 0.5) -> PhaseSchedule:
        if self.fixed is not None:
            return PhaseSchedule(self.fixed)
        if not 0.0 <= alpha <= 1.0:
            raise RelayNetError(f"alpha must lie in [0, 1], got {alpha}")
        delta = [0.0] * self.t
        first, second = self.alpha_phases
        delta[first - 1] = alpha
        delta[second - 1] = 1.0 - alpha
        return PhaseSchedule(tuple(delta))

    def samples(self) -> List[PhaseSchedule]:
        if not self.parametric:
            return [self.at()]
        return [self.at(alpha) for alpha in ALPHA_SAMPLES]


def _mhmr_outer_low_upper(m: int) -> Tuple[float, ...]:
    delta = [Fraction(0)] * (m + 2)
    for i in range(2, m + 2):
        delta[i - 1] = (Fraction(m + 2 - i, i - 1) - Fraction(m + 1 - i, i)) / (m + 1)
    delta[m + 1] = Fraction(1, m + 1)
    return tuple(float(d) for d in delta)


def asymptotic_delta(protocol: str, m: int, regime: str, bound: str = "lower") -> DeltaFamily:
    """
    Sum-rate optimal phase allocation in the low or high SNR limit.

    Args:
        protocol (str): DF-MABC, MABC-OUT, DF-TDBC, TDBC-OUT, DF-MHMR or MHMR-OUT
        m (int): Relay count
        regime (str): "low" or "high"
        bound (str): Low-SNR column, "lower" (h_min) or "upper" (h_max)

    Returns:
        DeltaFamily: fixed allocation or alpha-parameterized family
    """
    _check_bound(bound)
    t = {"DF-MABC": 2, "MABC-OUT": 2, "DF-TDBC": 3, "TDBC-OUT": 3}.get(protocol, m + 2)
    if regime not in ("low", "high"):
        raise RelayNetError(f"Regime must be 'low' or 'high', got '{regime}'")
    if protocol not in LOW_SNR_PROTOCOLS:
        raise UnknownProtocolError(f"No asymptotic allocation for '{protocol}'")

    if protocol == "DF-MABC":
        fixed = (2 * m / (2 * m + 1), 1 / (2 * m + 1)) if regime == "low" else (2 / 3, 1 / 3)
        return DeltaFamily(t, fixed=fixed)
    if protocol == "MABC-OUT":
        return DeltaFamily(t, fixed=(0.0, 1.0)) if regime == "low" else DeltaFamily(t, alpha_phases=(1, 2))
    if protocol == "DF-TDBC":
        return DeltaFamily(t, alpha_phases=(1, 2))
    if protocol == "TDBC-OUT":
        return DeltaFamily(t, fixed=(0.0, 0.0, 1.0))
    if protocol == "DF-MHMR":
        return DeltaFamily(t, alpha_phases=(1, t))
    if regime == "high":
        return DeltaFamily(t, alpha_phases=(1, t))
    if bound == "lower":
        return DeltaFamily(t, fixed=tuple([1.0 / t] * t))
    return DeltaFamily(t, fixed=_mhmr_outer_low_upper(m))


@dataclass(frozen=True)
class GapReport:
    protocol: str
    m: int
    G_L_lower: Optional[float]
    G_L_upper: Optional[float]
    G_H: float
    h_min_sq: float
    h_max_sq: float
    numeric_G: Optional[float] = None
    flagged: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def gap_report(protocol: str, g: GainMatrix, numeric_G: Optional[float] = None) -> GapReport:
    """
    Tabulated gaps of a protocol for the extremal gains of ``g``.

    Low-SNR bounds exist for DF protocols only. The report is flagged
    when a bound exceeds 1 or when a measured gap strays from G_H.
    """
    m = g.m
    h_min, h_max = g.h_min_sq(), g.h_max_sq()
    g_high = high_snr_gap(protocol, m)
    lower = upper = None
    if protocol.startswith("DF-"):
        lower, upper = low_snr_gap_bounds(protocol, m, h_min, h_max)
    flagged = any(v is not None and v > 1.0 for v in (lower, upper, g_high))
    if numeric_G is not None and abs(numeric_G - g_high) > 0.05:
        flagged = True
    if flagged:
        logger.warning(f"{protocol} m={m}: gap values flagged (G_L=({lower}, {upper}), G_H={g_high}, numeric={numeric_G})")
    return GapReport(protocol, m, lower, upper, g_high, h_min, h_max, numeric_G, flagged)


def sum_rate_evaluator(protocol: str, g: GainMatrix, options=None) -> Callable[[float], float]:
    """P -> optimized sum rate of a registered protocol on a fixed network."""
    evaluator = ProtocolRegistry.get_protocol(protocol)
    opts = options or RegionOptions(screen_step=0.05)
    return lambda P: evaluator.sum_rate(g, P, opts)


def prelog_table(m: int, h_sq: float = 1.0, P_lo: float = 1e6, P_hi: float = 1e8) -> List[dict]:
    """Tabulated and measured pre-logs of every high-SNR row on an equal-gain network."""
    g = equal_gain_matrix(m, h_sq)
    rows = []
    for protocol in HIGH_SNR_PROTOCOLS:
        measured = numeric_prelog(sum_rate_evaluator(protocol, g), P_lo, P_hi)
        tabulated = high_snr_prelog(protocol, m)
        agrees = bool(np.isclose(measured, tabulated, atol=0.05))
        if not agrees:
            logger.warning(f"{protocol} m={m}: measured pre-log {measured:.3f} vs tabulated {tabulated:.3f}")
        rows.append({"protocol": protocol, "m": m, "tabulated": tabulated, "measured": measured, "agrees": agrees})
    return rows
