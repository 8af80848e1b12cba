# core/experiment/scenarios.py
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.asymptotics.gaps import (
    BOUNDS,
    GAP_PROTOCOLS,
    LOW_SNR_PROTOCOLS,
    asymptotic_delta,
    gap_report,
    low_snr_sumrate,
    numeric_gap,
    prelog_table,
    sum_rate_evaluator,
)
from core.channel.model import GainMatrix, equal_gain_matrix, positions_gains
from core.errors import EnumerationLimitError, ProtocolUndefinedError
from core.experiment.config import ScenarioConfig
from core.experiment.session import ExperimentSession
from core.optimizer.phase import RegionBoundary, trace_boundary
from core.regions.df import build_mabc_df, labelled_decode_sets
from core.regions.protocols import RegionOptions
from core.regions.registry import ProtocolRegistry
from core.schedule.mhmr import (
    expected_relay_payload,
    naive_phase_count,
    phase_count,
    random_sub_messages,
    run_schedule,
    verify_delivery,
)

logger = logging.getLogger("Scenarios")

CONTAINMENT_TOL = 1e-8
BASELINE_PROTOCOLS = ("DF-MABC", "DF-TDBC", "AF-MABC", "AF-TDBC")
SKIPPABLE = (ProtocolUndefinedError, EnumerationLimitError)


def _db_label(p_db: float) -> str:
    return f"{p_db:g}dB"


def _table_name(scenario: str, protocol: str, p_db: float) -> str:
    return f"{scenario}_{protocol}_{_db_label(p_db)}"


def _ordered_map(fn: Callable, items: Sequence, workers: int) -> List:
    """Parallel map that preserves input order."""
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def contained(inner: RegionBoundary, outer: RegionBoundary, tol: float = CONTAINMENT_TOL) -> bool:
    """True when the inner boundary lies below the outer one at every shared weight."""
    outer_values = {round(e.lam, 12): e.rates.weighted(e.lam) for e in outer.entries}
    for e in inner.entries:
        key = round(e.lam, 12)
        if key in outer_values and e.rates.weighted(e.lam) > outer_values[key] + tol:
            logger.warning(
                f"{inner.protocol} exceeds {outer.protocol} at lambda={e.lam}: "
                f"{e.rates.weighted(e.lam):.6f} > {outer_values[key]:.6f}"
            )
            return False
    return True


def _boundary_frame(boundary: RegionBoundary, p_db: float, extra: Optional[Dict] = None) -> pd.DataFrame:
    frame = boundary.to_frame()
    frame.insert(0, "protocol", boundary.protocol)
    frame.insert(1, "P_dB", p_db)
    for key, value in (extra or {}).items():
        frame[key] = value
    return frame


def _region_sweep(cfg: ScenarioConfig, session: ExperimentSession, g: GainMatrix,
                  options: RegionOptions) -> List[dict]:
    """Trace every configured protocol at every power; emit tables and summary rows."""
    scenario = cfg.scenario
    rows = []
    for p_db, P in cfg.powers():
        boundaries: Dict[str, RegionBoundary] = {}
        for name in cfg.protocols:
            protocol = ProtocolRegistry.get_protocol(name)
            try:
                boundary = protocol.boundary(g, P, options)
            except SKIPPABLE as e:
                logger.warning(f"Skipping {name} at m={g.m}: {e}")
                continue
            boundaries[name] = boundary
            session.save_table(_table_name(scenario, name, p_db), _boundary_frame(boundary, p_db))

        for name, boundary in boundaries.items():
            outer_name = ProtocolRegistry.get_protocol(name).outer
            outer = boundaries.get(outer_name)
            rows.append({
                "protocol": name,
                "P_dB": p_db,
                "m": g.m,
                "sum_rate": boundary.sum_rate_max(),
                "outer": outer_name,
                "contained": contained(boundary, outer) if outer is not None else None,
            })
        session.save_event("power_done", {"P_dB": p_db, "protocols": list(boundaries)})
    return rows


def _baselines(cfg: ScenarioConfig, session: ExperimentSession, g: GainMatrix,
               options: RegionOptions) -> List[dict]:
    """Single-relay (1,2) and (1,3) regions for each relay of the network."""
    rows = []
    for relay in g.relays:
        sub = g.restrict([relay])
        for p_db, P in cfg.powers():
            for name in BASELINE_PROTOCOLS:
                if name not in cfg.protocols:
                    continue
                boundary = ProtocolRegistry.get_protocol(name).boundary(sub, P, options)
                label = f"{name}-r{relay}"
                boundary.protocol = label
                session.save_table(_table_name(cfg.scenario, label, p_db), _boundary_frame(boundary, p_db))
                rows.append({"protocol": label, "P_dB": p_db, "m": 1, "sum_rate": boundary.sum_rate_max(),
                             "outer": None, "contained": None})
    return rows


def _labelled_set_regions(cfg: ScenarioConfig, session: ExperimentSession, g: GainMatrix,
                       options: RegionOptions) -> None:
    for p_db, P in cfg.powers():
        for label, ds in labelled_decode_sets():
            boundary = trace_boundary(lambda cfg_, P=P: build_mabc_df(g, P, cfg_), [ds], options.weights(),
                                      hull=options.hull, protocol=f"DF-MABC-set{label}")
            session.save_table(_table_name(cfg.scenario, boundary.protocol, p_db),
                               _boundary_frame(boundary, p_db, {"decode_sets": ds.config_id}))


def _power_split_regions(cfg: ScenarioConfig, session: ExperimentSession, g: GainMatrix,
                         options: RegionOptions) -> None:
    split = replace(options, power_grid=True)
    for p_db, P in cfg.powers():
        for name in ("DF-MABC", "DF-TDBC"):
            if name not in cfg.protocols:
                continue
            boundary = ProtocolRegistry.get_protocol(name).boundary(g, P, split)
            boundary.protocol = f"{name}-power-split"
            session.save_table(_table_name(cfg.scenario, boundary.protocol, p_db), _boundary_frame(boundary, p_db))


def scenario_regions(cfg: ScenarioConfig, session: ExperimentSession) -> pd.DataFrame:
    """
    Rate regions of every protocol on the configured network.

    Besides the per-protocol boundaries this emits single-relay baselines,
    the four labelled two-relay MABC decode-set regions and, with
    ``power_grid``, the frontiers over broadcast power splits.
    """
    g = cfg.gains()
    options = cfg.region_options(power_grid=False)
    rows = _region_sweep(cfg, session, g, options)
    if cfg.config.get("baselines") and g.m >= 2:
        rows += _baselines(cfg, session, g, options)
    if g.m == 2 and "DF-MABC" in cfg.protocols:
        _labelled_set_regions(cfg, session, g, options)
    if cfg.config["power_grid"]:
        _power_split_regions(cfg, session, g, options)
    summary = pd.DataFrame.from_records(rows)
    session.save_table(f"{cfg.scenario}_summary", summary)
    return summary


def scenario_line(cfg: ScenarioConfig, session: ExperimentSession) -> pd.DataFrame:
    """Regions and sum rates for m relays evenly spaced between the terminals."""
    g = cfg.gains()
    rows = _region_sweep(cfg, session, g, cfg.region_options(power_grid=False))
    if cfg.config["power_grid"]:
        _power_split_regions(cfg, session, g, cfg.region_options(power_grid=False))
    summary = pd.DataFrame.from_records(rows)
    session.save_table(f"{cfg.scenario}_summary", summary)
    return summary


def _sum_rate_or_nan(name: str, g: GainMatrix, P: float, options: RegionOptions) -> float:
    try:
        return ProtocolRegistry.get_protocol(name).sum_rate(g, P, options)
    except SKIPPABLE as e:
        logger.warning(f"Skipping {name} at m={g.m}: {e}")
        return math.nan


def scenario_relay_count(cfg: ScenarioConfig, session: ExperimentSession) -> pd.DataFrame:
    """Optimized sum rate against the number of relays on the line geometry."""
    options = cfg.region_options(power_grid=False, workers=1)
    points = [(m, p_db, P, name) for m in cfg.m_values() for p_db, P in cfg.powers() for name in cfg.protocols]
    networks = {m: cfg.gains(m) for m in cfg.m_values()}
    logger.info(f"relay-count: {len(points)} point(s) over m={cfg.m_values()}")

    def evaluate(point: Tuple[int, float, float, str]) -> dict:
        m, p_db, P, name = point
        return {"protocol": name, "P_dB": p_db, "m": m, "sum_rate": _sum_rate_or_nan(name, networks[m], P, options)}

    frame = pd.DataFrame.from_records(_ordered_map(evaluate, points, int(cfg.config["workers"])))
    for (name, p_db), group in frame.groupby(["protocol", "P_dB"], sort=False):
        session.save_table(_table_name(cfg.scenario, name, p_db), group[["m", "sum_rate"]].reset_index(drop=True))
    session.save_table(f"{cfg.scenario}_summary", frame)
    return frame


def grid_positions(step: float) -> List[Tuple[float, float]]:
    """Relay position pairs d1 < d2 on the interior grid of (0, 1)."""
    n = int(round(1.0 / step))
    ticks = [round(i * step, 10) for i in range(1, n)]
    return [(d1, d2) for i, d1 in enumerate(ticks) for d2 in ticks[i + 1:]]


def scenario_two_relay_grid(cfg: ScenarioConfig, session: ExperimentSession) -> pd.DataFrame:
    """
    Sum rate of each protocol over the positions of two relays on the a-b line.

    Returns the per-protocol argmax table; full grids are written per
    protocol and power.
    """
    c = cfg.config
    d_ab = float(c["d_ab"])
    options = cfg.region_options(power_grid=False, workers=1)
    positions = grid_positions(float(c["grid_step"]))
    networks = {
        pair: positions_gains([pair[0] * d_ab, pair[1] * d_ab], d_ab=d_ab, exponent=float(c["pathloss_exponent"]),
                              k=float(c["k"]), h_ab_sq=None if c["h_ab_sq"] is None else float(c["h_ab_sq"]))
        for pair in positions
    }
    logger.info(f"two-relay-grid: {len(positions)} position pair(s) x {len(cfg.protocols)} protocol(s)")

    best_rows = []
    for p_db, P in cfg.powers():
        for name in cfg.protocols:
            def evaluate(pair, name=name, P=P):
                return {"d1": pair[0], "d2": pair[1], "sum_rate": _sum_rate_or_nan(name, networks[pair], P, options)}

            grid = pd.DataFrame.from_records(_ordered_map(evaluate, positions, int(c["workers"])))
            session.save_table(_table_name(cfg.scenario, name, p_db), grid)
            valid = grid.dropna(subset=["sum_rate"])
            if valid.empty:
                logger.warning(f"two-relay-grid: {name} is undefined at every position for P={p_db} dB")
                best_rows.append({"protocol": name, "P_dB": p_db, "d1": math.nan, "d2": math.nan,
                                  "sum_rate": math.nan})
                continue
            top = valid.loc[valid["sum_rate"].idxmax()]
            best_rows.append({"protocol": name, "P_dB": p_db, "d1": float(top["d1"]), "d2": float(top["d2"]),
                              "sum_rate": float(top["sum_rate"])})
    best = pd.DataFrame.from_records(best_rows)
    session.save_table(f"{cfg.scenario}_argmax", best)
    return best


def scenario_schedule(cfg: ScenarioConfig, session: ExperimentSession) -> pd.DataFrame:
    """Run the network-coded multi-hop schedule on random blocks and verify it."""
    c = cfg.config
    m, blocks, L = int(c["m"]), int(c["blocks"]), int(c["group_size"])
    rng = np.random.default_rng(int(c["seed"]))
    messages_a = c.get("messages_a") or [s.value for s in random_sub_messages(rng, "a", blocks, L)]
    messages_b = c.get("messages_b") or [s.value for s in random_sub_messages(rng, "b", blocks, L)]

    transcript = run_schedule(m, blocks, messages_a, messages_b, L)
    session.save_transcript(f"{cfg.scenario}_m{m}_b{blocks}", transcript)

    mismatches = [
        e for e in transcript.events
        if 1 <= e.tx <= m and expected_relay_payload(m, blocks, e.tx, e.slot) != (e.a_index, e.b_index)
    ]
    delivered = verify_delivery(transcript, messages_a, messages_b)
    expected = phase_count(m, blocks)
    report = {
        "m": m,
        "blocks": blocks,
        "group_size": L,
        "events": len(transcript),
        "phase_count": expected,
        "phase_count_matches": len(transcript) == expected,
        "phases_per_block": len(transcript) / blocks,
        "naive_phase_count": naive_phase_count(m, blocks),
        "relay_payload_mismatches": len(mismatches),
        "delivered": delivered,
    }
    if not (delivered and report["phase_count_matches"] and not mismatches):
        logger.warning(f"Schedule check failed: {report}")
    session.save_json(f"{cfg.scenario}_report", report)
    frame = pd.DataFrame.from_records(transcript.to_records())
    session.save_table(f"{cfg.scenario}_m{m}_b{blocks}", frame)
    return pd.DataFrame.from_records([report])


def _delta_text(schedules) -> str:
    return ";".join("(" + ", ".join(f"{d:.6g}" for d in s.delta) + ")" for s in schedules)


def scenario_asymptotics(cfg: ScenarioConfig, session: ExperimentSession) -> pd.DataFrame:
    """
    Closed-form low/high SNR behavior next to numeric estimates on an equal-gain network.

    Emits the low-SNR sum rates, the asymptotic phase allocations, the
    pre-log table and a gap report per achievable protocol.
    """
    c = cfg.config
    m, h_sq = int(c["m"]), float(c["h_sq"])
    P_low = float(c["low_snr_power"])
    P_lo, P_hi = (float(p) for p in c["prelog_powers"])
    g = equal_gain_matrix(m, h_sq)
    options = RegionOptions(screen_step=cfg.config["screen_step"])

    low_rows = []
    for name in LOW_SNR_PROTOCOLS:
        measured = sum_rate_evaluator(name, g, options)(P_low)
        for bound in BOUNDS:
            closed = low_snr_sumrate(name, m, h_sq, P_low, bound)
            low_rows.append({"protocol": name, "bound": bound, "P": P_low, "closed_form": closed,
                             "measured": measured, "ratio": measured / closed})
    session.save_table(f"{cfg.scenario}_low-snr", pd.DataFrame.from_records(low_rows))

    delta_rows = []
    for name in LOW_SNR_PROTOCOLS:
        for regime in ("low", "high"):
            for bound in BOUNDS if regime == "low" else ("lower",):
                family = asymptotic_delta(name, m, regime, bound)
                delta_rows.append({"protocol": name, "regime": regime, "bound": bound,
                                   "parametric": family.parametric, "delta": _delta_text(family.samples())})
    session.save_table(f"{cfg.scenario}_delta", pd.DataFrame.from_records(delta_rows))

    prelogs = pd.DataFrame.from_records(prelog_table(m, h_sq, P_lo, P_hi))
    session.save_table(f"{cfg.scenario}_prelog", prelogs)

    reports = []
    for name in GAP_PROTOCOLS:
        outer = ProtocolRegistry.get_protocol(name).outer
        measured = numeric_gap(sum_rate_evaluator(name, g, options), sum_rate_evaluator(outer, g, options), P_hi)
        reports.append(gap_report(name, g, measured))
    gaps = pd.DataFrame.from_records([r.__dict__ for r in reports])
    session.save_table(f"{cfg.scenario}_gaps", gaps)
    session.save_json(f"{cfg.scenario}_gap_reports", [r.__dict__ for r in reports])
    return gaps


SCENARIOS: Dict[str, Callable[[ScenarioConfig, ExperimentSession], pd.DataFrame]] = {
    "regions": scenario_regions,
    "line": scenario_line,
    "relay-count": scenario_relay_count,
    "two-relay-grid": scenario_two_relay_grid,
    "schedule": scenario_schedule,
    "asymptotics": scenario_asymptotics,
}


def run_scenario(cfg: ScenarioConfig, session: Optional[ExperimentSession] = None) -> Tuple[pd.DataFrame, ExperimentSession]:
    """
    Run the scenario named in ``cfg`` inside an experiment session.

    Returns:
        tuple: (summary table, session)
    """
    session = session or ExperimentSession(cfg)
    session.save_event("scenario_started", {"scenario": cfg.scenario, "protocols": cfg.protocols})
    summary = SCENARIOS[cfg.scenario](cfg, session)
    session.save_event("scenario_finished", {"rows": len(summary), "files": len(session.written)})
    logger.info(f"Scenario {cfg.scenario} finished: {len(session.written)} file(s) in {session.session_dir}")
    return summary, session
