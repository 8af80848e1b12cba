# core/regions/af.py
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from core.channel.model import GainMatrix, capacity
from core.errors import RelayNetError, UnknownProtocolError
from core.optimizer.phase import RatePair
from core.regions.df import RelayOrder

logger = logging.getLogger("AFRegions")

SWEEP_TOL = 1e-12
MAX_SWEEPS = 500


@dataclass(frozen=True)
class AfEffectiveGains:
    """
    Effective squared gains seen by each relay of an AF chain.

    Index i-1 holds relay r_i. ``converged`` reports whether the coupled
    sweeps reached the tolerance.
    """

    h_a_tilde_sq: Tuple[float, ...]
    h_b_tilde_sq: Tuple[float, ...]
    p_tilde: Tuple[float, ...]
    sweeps: int = 0
    converged: bool = True


def _check(g: GainMatrix, P: float) -> None:
    if g.m < 1:
        raise RelayNetError(f"AF protocols need at least one relay, got m={g.m}")
    if P <= 0:
        raise RelayNetError(f"Power must be positive, got {P}")


def _coherent_sum(g: GainMatrix, p_tilde: np.ndarray) -> float:
    ga = np.array([g(g.a, r) for r in g.relays])
    gb = np.array([g(g.b, r) for r in g.relays])
    return float(np.sum(np.sqrt(ga * gb * p_tilde)) ** 2)


def af_mabc_rates(g: GainMatrix, P: float) -> RatePair:
    """
    (m,2) AF MABC rates with both phases of length 1/2.

    Every relay scales its received superposition to power P/m and the
    terminals cancel their own signal from the broadcast.
    """
    _check(g, P)
    m = g.m
    ga = np.array([g(g.a, r) for r in g.relays])
    gb = np.array([g(g.b, r) for r in g.relays])
    p_tilde = (P / m) / (P / 2 * (ga + gb) + 1)
    numerator = P / 2 * _coherent_sum(g, p_tilde)
    r_a = 0.5 * capacity(numerator / (np.sum(gb * p_tilde) + 1))
    r_b = 0.5 * capacity(numerator / (np.sum(ga * p_tilde) + 1))
    return RatePair(r_a, r_b)


def af_tdbc_rates(g: GainMatrix, P: float) -> RatePair:
    """(m,3) AF TDBC rates with phases of length 1/3 and the direct link."""
    _check(g, P)
    m = g.m
    ga = np.array([g(g.a, r) for r in g.relays])
    gb = np.array([g(g.b, r) for r in g.relays])
    p_tilde = (P / m) / (P * (ga + gb) + 2)
    numerator = P * _coherent_sum(g, p_tilde)
    direct = g(g.a, g.b) * P
    r_a = capacity(direct + numerator / (2 * np.sum(gb * p_tilde) + 1)) / 3
    r_b = capacity(direct + numerator / (2 * np.sum(ga * p_tilde) + 1)) / 3
    return RatePair(r_a, r_b)


def _forwarded(link: float, h_tilde: float, p_tilde: float, P: float) -> float:
    return link * h_tilde * p_tilde * P / (2 * link * p_tilde + 1)


def af_mhmr_effective_gains(g: GainMatrix, P: float, order: Optional[RelayOrder] = None) -> AfEffectiveGains:
    """
    Effective gains of the (m,m+2) AF chain.

    The a-side gains propagate upwards from r_1 and the b-side gains
    downwards from r_m. A relay's scaling power depends on both, so the
    two sweeps are alternated until they settle.

    Args:
        g (GainMatrix): Channel gains
        P (float): Per-phase power
        order (RelayOrder, optional): Chain order (identity by default)

    Returns:
        AfEffectiveGains: per-relay effective gains and scaling powers
    """
    _check(g, P)
    m = g.m
    order = order or RelayOrder.identity(m)
    order.validate(m)
    chain = g.reorder(order.order)

    # Arrays indexed by relay number, slots 0 and m+1 unused.
    h_a = np.zeros(m + 2)
    h_b = np.zeros(m + 2)
    for i in range(1, m + 1):
        h_a[i] = chain(i - 1, i)
        h_b[i] = chain(i + 1, i)

    def scaling(i: int) -> float:
        return P / (P * (h_a[i] + h_b[i]) + 2)

    converged = m <= 1
    sweeps = 0
    while not converged and sweeps < MAX_SWEEPS:
        sweeps += 1
        previous = np.concatenate([h_a, h_b])
        for i in range(2, m + 1):
            h_a[i] = _forwarded(chain(i - 1, i), h_a[i - 1], scaling(i - 1), P)
        for i in range(m - 1, 0, -1):
            h_b[i] = _forwarded(chain(i + 1, i), h_b[i + 1], scaling(i + 1), P)
        current = np.concatenate([h_a, h_b])
        change = np.max(np.abs(current - previous)) / max(np.max(np.abs(current)), 1e-300)
        converged = change < SWEEP_TOL

    if not converged:
        logger.warning(f"AF effective gains did not converge after {sweeps} sweeps (m={m}, P={P})")
    p_tilde = tuple(scaling(i) for i in range(1, m + 1))
    return AfEffectiveGains(tuple(h_a[1:m + 1]), tuple(h_b[1:m + 1]), p_tilde, sweeps, converged)


def af_mhmr_rates(g: GainMatrix, P: float, order: Optional[RelayOrder] = None) -> RatePair:
    """(m,m+2) AF MHMR rates with every phase of length 1/(m+2)."""
    eff = af_mhmr_effective_gains(g, P, order)
    m = g.m
    chain = g.reorder((order or RelayOrder.identity(m)).order)
    direct = chain(chain.a, chain.b) * P
    snr_a, snr_b = direct, direct
    for idx, r in enumerate(chain.relays):
        snr_a += _forwarded(chain(r, chain.b), eff.h_a_tilde_sq[idx], eff.p_tilde[idx], P)
        snr_b += _forwarded(chain(r, chain.a), eff.h_b_tilde_sq[idx], eff.p_tilde[idx], P)
    return RatePair(capacity(snr_a) / (m + 2), capacity(snr_b) / (m + 2))


AF_EVALUATORS: Dict[str, Callable[[GainMatrix, float], RatePair]] = {
    "AF-MABC": af_mabc_rates,
    "AF-TDBC": af_tdbc_rates,
    "AF-MHMR": af_mhmr_rates,
}


def af_sum_rate_gradient_probe(g: GainMatrix, P: float, protocol: str, rel_step: float = 1e-6) -> pd.DataFrame:
    """
    Central-difference partial derivatives of an AF sum rate per link gain.

    Diagnostic only: AF sum rates need not increase with every gain.
    Returns one row per node pair with columns i, j, derivative, negative.
    """
    if protocol not in AF_EVALUATORS:
        raise UnknownProtocolError(f"No AF evaluator for '{protocol}'")
    evaluate = AF_EVALUATORS[protocol]
    rows = []
    base = np.array(g.g)
    for i in range(g.size):
        for j in range(i + 1, g.size):
            h = rel_step * max(base[i, j], 1.0)
            values = []
            for sign in (1.0, -1.0):
                shifted = base.copy()
                shifted[i, j] = shifted[j, i] = max(base[i, j] + sign * h, 0.0)
                values.append(evaluate(GainMatrix(g.m, shifted), P).sum_rate)
            span = (base[i, j] + h) - max(base[i, j] - h, 0.0)
            derivative = (values[0] - values[1]) / span
            rows.append({"i": i, "j": j, "derivative": derivative, "negative": derivative < 0})
    frame = pd.DataFrame.from_records(rows)
    n_neg = int(frame["negative"].sum())
    if n_neg:
        logger.info(f"{protocol}: {n_neg} link gain(s) with negative sum-rate derivative")
    return frame
