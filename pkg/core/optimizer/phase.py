# core/optimizer/phase.py
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from core.errors import EnumerationLimitError, RelayNetError, UnboundedRegionError

logger = logging.getLogger("PhaseOptimizer")

TARGET_A = "R_a"
TARGET_B = "R_b"
TARGET_SUM = "R_a+R_b"
TARGETS = (TARGET_A, TARGET_B, TARGET_SUM)

SIMPLEX_TOL = 1e-9
DEFAULT_LAMBDA_STEPS = 101
MAX_LATTICE_POINTS = 2_000_000

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass(frozen=True)
class PhaseSchedule:
    """Relative phase durations (delta_1..delta_t) on the probability simplex."""

    delta: Tuple[float, ...]

    def __post_init__(self):
        delta = tuple(float(d) for d in self.delta)
        object.__setattr__(self, "delta", delta)
        if not delta:
            raise RelayNetError("A phase schedule needs at least one phase")
        if any(d < -SIMPLEX_TOL for d in delta):
            raise RelayNetError(f"Phase durations must be nonnegative, got {delta}")
        if abs(sum(delta) - 1.0) > SIMPLEX_TOL:
            raise RelayNetError(f"Phase durations must sum to 1, got {sum(delta)}")

    @property
    def t(self) -> int:
        return len(self.delta)

    @classmethod
    def uniform(cls, t: int) -> "PhaseSchedule":
        return cls(tuple([1.0 / t] * t))

    @classmethod
    def from_array(cls, x) -> "PhaseSchedule":
        """Clip tiny negatives from a solver and renormalize."""
        arr = np.clip(np.asarray(x, dtype=float), 0.0, None)
        total = arr.sum()
        if total <= 0:
            raise RelayNetError("Cannot normalize an all-zero phase vector")
        return cls(tuple(arr / total))


@dataclass(frozen=True)
class RatePair:
    R_a: float
    R_b: float

    def __post_init__(self):
        if self.R_a < -SIMPLEX_TOL or self.R_b < -SIMPLEX_TOL:
            raise RelayNetError(f"Rates must be nonnegative, got ({self.R_a}, {self.R_b})")
        object.__setattr__(self, "R_a", max(0.0, float(self.R_a)))
        object.__setattr__(self, "R_b", max(0.0, float(self.R_b)))

    @property
    def sum_rate(self) -> float:
        return self.R_a + self.R_b

    def weighted(self, lam: float) -> float:
        return lam * self.R_a + (1.0 - lam) * self.R_b


@dataclass(frozen=True)
class Constraint:
    """``target <= sum_l delta_l * coeff[l]``."""

    target: str
    coeff: Tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        if self.target not in TARGETS:
            raise RelayNetError(f"Unknown constraint target '{self.target}'")
        coeff = tuple(float(c) for c in self.coeff)
        if not all(math.isfinite(c) for c in coeff):
            raise RelayNetError(f"Constraint '{self.label}' has a non-finite coefficient: {coeff}")
        object.__setattr__(self, "coeff", coeff)


@dataclass(frozen=True)
class RateConstraintSet:
    """
    Linear rate constraints over (R_a, R_b, delta).

    Every protocol builder produces one of these. Constraints whose
    right-hand side would be a minimum over an empty set are simply absent.
    """

    t: int
    constraints: Tuple[Constraint, ...]
    protocol: str = ""
    config_id: str = ""

    def __post_init__(self):
        constraints = tuple(self.constraints)
        object.__setattr__(self, "constraints", constraints)
        if self.t < 1:
            raise RelayNetError(f"Phase count must be positive, got {self.t}")
        for c in constraints:
            if len(c.coeff) != self.t:
                raise RelayNetError(
                    f"Constraint '{c.label}' has {len(c.coeff)} coefficients, expected {self.t}"
                )

    def by_target(self, target: str) -> List[Constraint]:
        return [c for c in self.constraints if c.target == target]

    def bounds(self, target: str) -> bool:
        """Whether some constraint bounds the given single rate."""
        return any(c.target in (target, TARGET_SUM) for c in self.constraints)

    def matrix(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return (target codes 0/1/2, coefficient matrix k x t)."""
        codes = np.array([TARGETS.index(c.target) for c in self.constraints], dtype=int)
        coeffs = np.array([c.coeff for c in self.constraints], dtype=float).reshape(len(self.constraints), self.t)
        return codes, coeffs

    def max_coeff(self) -> float:
        if not self.constraints:
            return 0.0
        return float(max(max(c.coeff) for c in self.constraints))

    def scaled(self, factor: float) -> "RateConstraintSet":
        return RateConstraintSet(
            self.t,
            tuple(Constraint(c.target, tuple(factor * x for x in c.coeff), c.label) for c in self.constraints),
            self.protocol,
            self.config_id,
        )

    def evaluate(self, delta) -> Dict[str, float]:
        """Per-target upper bounds at a fixed schedule (inf when unconstrained)."""
        d = np.asarray(delta.delta if isinstance(delta, PhaseSchedule) else delta, dtype=float)
        out = {target: math.inf for target in TARGETS}
        for c in self.constraints:
            out[c.target] = min(out[c.target], float(np.dot(c.coeff, d)))
        return out

    def best_rates_at(self, delta, lam: float) -> RatePair:
        """Exact weighted-optimal rate pair at a fixed schedule."""
        u = self.evaluate(delta)
        r_a, r_b = _best_rates(u[TARGET_A], u[TARGET_B], u[TARGET_SUM], lam)
        if not (math.isfinite(r_a) and math.isfinite(r_b)):
            raise UnboundedRegionError(f"Rates unbounded for {self.protocol} {self.config_id}")
        return RatePair(max(r_a, 0.0), max(r_b, 0.0))


@dataclass(frozen=True)
class WeightedOptimum:
    rates: RatePair
    schedule: PhaseSchedule
    objective: float
    lam: float
    config_id: str = ""


def _best_rates(u_a, u_b, u_s, lam):
    """Rates maximizing lam*R_a + (1-lam)*R_b; ties go to the largest (R_a, R_b)."""
    if lam >= 0.5:
        r_a = np.minimum(u_a, u_s)
        r_b = np.minimum(u_b, u_s - r_a)
    else:
        r_b = np.minimum(u_b, u_s)
        r_a = np.minimum(u_a, u_s - r_b)
    return r_a, r_b


def _check_bounded(cs: RateConstraintSet) -> None:
    for target in (TARGET_A, TARGET_B):
        if not cs.bounds(target):
            raise UnboundedRegionError(
                f"No constraint bounds {target} in {cs.protocol or 'constraint set'} {cs.config_id}".rstrip()
            )


def _solve(c, A_ub, b_ub, A_eq, b_eq):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs", options=_HIGHS_OPTIONS)
    if res.status == 3:
        raise UnboundedRegionError("Weighted rate objective is unbounded")
    if not res.success:
        raise RelayNetError(f"LP solver failed: {res.message}")
    return res


def max_weighted(cs: RateConstraintSet, lam: float) -> WeightedOptimum:
    """
    Maximize lam*R_a + (1-lam)*R_b over rates and phase durations.

    Variables are (R_a, R_b, delta_1..delta_t). The optimum is found with
    HiGHS; ties among optimal vertices are broken towards the
    lexicographically largest (R_a, R_b) by two follow-up solves, and the
    final rates are recomputed exactly at the returned schedule.

    Args:
        cs (RateConstraintSet): Constraint set
        lam (float): Weight on R_a in [0, 1]

    Returns:
        WeightedOptimum: rates, schedule and objective value

    Raises:
        UnboundedRegionError: If R_a or R_b is not bounded by any constraint
    """
    if not 0.0 <= lam <= 1.0:
        raise RelayNetError(f"Weight must lie in [0, 1], got {lam}")
    _check_bounded(cs)
    t = cs.t
    n = t + 2

    rows, rhs = [], []
    for con in cs.constraints:
        row = np.zeros(n)
        if con.target in (TARGET_A, TARGET_SUM):
            row[0] = 1.0
        if con.target in (TARGET_B, TARGET_SUM):
            row[1] = 1.0
        row[2:] = -np.asarray(con.coeff)
        rows.append(row)
        rhs.append(0.0)
    A_eq = np.zeros((1, n))
    A_eq[0, 2:] = 1.0
    b_eq = np.array([1.0])

    weights = np.zeros(n)
    weights[0], weights[1] = lam, 1.0 - lam
    res = _solve(-weights, np.array(rows), np.array(rhs), A_eq, b_eq)
    best = -res.fun
    tol = 1e-9 * max(1.0, abs(best))

    # Lexicographic tie-break: largest R_a, then largest R_b, among optimal points.
    rows.append(-weights)
    rhs.append(-(best - tol))
    lex_a = np.zeros(n)
    lex_a[0] = -1.0
    res_a = _solve(lex_a, np.array(rows), np.array(rhs), A_eq, b_eq)
    rows.append(lex_a.copy())
    rhs.append(res_a.fun + tol)
    lex_b = np.zeros(n)
    lex_b[1] = -1.0
    res_b = _solve(lex_b, np.array(rows), np.array(rhs), A_eq, b_eq)

    schedule = PhaseSchedule.from_array(res_b.x[2:])
    rates = cs.best_rates_at(schedule, lam)
    objective = rates.weighted(lam)
    logger.debug(f"max_weighted {cs.protocol} {cs.config_id} lam={lam:.3f}: "
                 f"R=({rates.R_a:.6f}, {rates.R_b:.6f}) obj={objective:.6f}")
    return WeightedOptimum(rates, schedule, objective, lam, cs.config_id)


def max_sum_rate(cs: RateConstraintSet) -> WeightedOptimum:
    """Convenience wrapper: the sum-rate maximizer (lam = 0.5)."""
    return max_weighted(cs, 0.5)


@lru_cache(maxsize=32)
def _compositions(n: int, t: int) -> np.ndarray:
    if t == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for first in range(n + 1):
        rest = _compositions(n - first, t - 1)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def simplex_lattice(t: int, step: float) -> np.ndarray:
    """
    All points of the t-simplex whose coordinates are multiples of ``step``.

    Raises:
        EnumerationLimitError: If the lattice would exceed MAX_LATTICE_POINTS
    """
    n = int(round(1.0 / step))
    if n < 1:
        raise RelayNetError(f"Lattice step must be at most 1, got {step}")
    count = math.comb(n + t - 1, t - 1)
    if count > MAX_LATTICE_POINTS:
        raise EnumerationLimitError(
            f"Simplex lattice with t={t}, step={step} has {count} points (cap {MAX_LATTICE_POINTS})"
        )
    return _compositions(n, t) / n


def _lattice_values(cs: RateConstraintSet, lattice: np.ndarray, lams: Sequence[float]) -> np.ndarray:
    """Best weighted objective over the lattice, one value per weight."""
    codes, coeffs = cs.matrix()
    rhs = coeffs @ lattice.T
    u = []
    for code in range(3):
        sel = rhs[codes == code]
        u.append(sel.min(axis=0) if len(sel) else np.full(lattice.shape[0], np.inf))
    weights = np.asarray(lams, dtype=float)
    out = np.empty(len(weights))
    # Both branches of _best_rates are weight independent; score all weights at once.
    for mask, branch in ((weights >= 0.5, 1.0), (weights < 0.5, 0.0)):
        if not mask.any():
            continue
        r_a, r_b = _best_rates(u[0], u[1], u[2], branch)
        w = weights[mask][:, None]
        out[mask] = np.max(w * r_a[None, :] + (1.0 - w) * r_b[None, :], axis=1)
    return out


def grid_oracle(cs: RateConstraintSet, lam: float, step: float = 1e-3) -> float:
    """
    Exhaustive simplex-lattice evaluation of the weighted optimum.

    At each lattice schedule the constraint right-hand sides are constants,
    so the best rates follow in closed form. The result never exceeds the
    LP optimum and refining the step never lowers it.
    """
    if not 0.0 < step <= 0.1:
        raise RelayNetError(f"Oracle step must lie in (0, 0.1], got {step}")
    _check_bounded(cs)
    lattice = simplex_lattice(cs.t, step)
    return float(_lattice_values(cs, lattice, [lam])[0])


def default_lambdas(steps: int = DEFAULT_LAMBDA_STEPS) -> List[float]:
    if steps < 2:
        raise RelayNetError(f"Need at least two weights, got {steps}")
    return [float(x) for x in np.linspace(0.0, 1.0, steps)]


@dataclass(frozen=True)
class BoundaryEntry:
    lam: float
    rates: RatePair
    schedule: PhaseSchedule
    config_id: str


@dataclass
class RegionBoundary:
    """
    Result of a weighted-sum sweep over one protocol.

    ``entries`` keeps the best configuration per weight (one row per
    weight); ``points`` is the Pareto frontier of every rate pair the
    sweep evaluated, sorted by R_a ascending.
    """

    protocol: str
    entries: List[BoundaryEntry]
    evaluated: List[Tuple[RatePair, str]] = field(default_factory=list)
    hull: bool = False

    @property
    def points(self) -> List[RatePair]:
        candidates = [e.rates for e in self.entries] + [r for r, _ in self.evaluated]
        frontier = pareto_frontier(candidates)
        return convex_frontier(frontier) if self.hull else frontier

    def sum_rate_max(self) -> float:
        return max(e.rates.sum_rate for e in self.entries)

    def value(self, lam: float) -> float:
        for e in self.entries:
            if abs(e.lam - lam) < 1e-12:
                return e.rates.weighted(lam)
        raise RelayNetError(f"Weight {lam} not part of this boundary")

    def to_frame(self) -> pd.DataFrame:
        t = max(e.schedule.t for e in self.entries)
        records = []
        for e in self.entries:
            row: Dict[str, Any] = {"lambda": e.lam, "R_a": e.rates.R_a, "R_b": e.rates.R_b}
            for i in range(t):
                row[f"delta_{i + 1}"] = e.schedule.delta[i] if i < e.schedule.t else 0.0
            row["config_id"] = e.config_id
            records.append(row)
        return pd.DataFrame.from_records(records)


def pareto_frontier(points: Sequence[RatePair]) -> List[RatePair]:
    """Non-dominated points, R_a ascending and R_b nonincreasing."""
    ordered = sorted(points, key=lambda p: (-p.R_a, -p.R_b))
    frontier: List[RatePair] = []
    best_b = -math.inf
    for p in ordered:
        if p.R_b > best_b + 1e-12:
            frontier.append(p)
            best_b = p.R_b
    return frontier[::-1]


def convex_frontier(points: Sequence[RatePair]) -> List[RatePair]:
    """Upper-right part of the convex hull (time-sharing closure)."""
    if len(points) < 2:
        return list(points)
    max_a = max(p.R_a for p in points)
    max_b = max(p.R_b for p in points)
    cloud = np.array([[p.R_a, p.R_b] for p in points] + [[0.0, 0.0], [max_a, 0.0], [0.0, max_b]])
    try:
        hull = ConvexHull(cloud)
    except QhullError:
        return pareto_frontier(points)
    vertices = [RatePair(*cloud[i]) for i in hull.vertices]
    return [p for p in pareto_frontier(vertices) if p.R_a > 0 or p.R_b > 0]


def _screen(sets: List[RateConstraintSet], lams: Sequence[float], step: float) -> Tuple[np.ndarray, np.ndarray]:
    """Lattice lower bounds and Lipschitz upper bounds, shape (configs, weights)."""
    lower = np.empty((len(sets), len(lams)))
    upper = np.empty_like(lower)
    lattices: Dict[int, np.ndarray] = {}
    for i, cs in enumerate(sets):
        if cs.t not in lattices:
            lattices[cs.t] = simplex_lattice(cs.t, step)
        lower[i] = _lattice_values(cs, lattices[cs.t], lams)
        upper[i] = lower[i] + cs.max_coeff() * cs.t * step
    return lower, upper


def trace_boundary(builder: Callable[[Any], RateConstraintSet], configs: Sequence[Any],
                   lambdas: Optional[Sequence[float]] = None, hull: bool = False,
                   screen_step: Optional[float] = None, workers: int = 1,
                   protocol: str = "") -> RegionBoundary:
    """
    Weighted-sum sweep over a union of configurations.

    For every weight the best configuration is kept. With ``screen_step``
    set, configurations are first scored on a simplex lattice and only
    those whose Lipschitz upper bound can still beat the incumbent are
    solved exactly, which returns the same optimum for far fewer LPs.

    Args:
        builder: Maps a configuration to its RateConstraintSet
        configs: Configurations to union over
        lambdas: Weights (defaults to 101 evenly spaced values)
        hull (bool): Report the time-sharing (convex hull) frontier
        screen_step (float, optional): Lattice step for screening
        workers (int): Threads used across weights
        protocol (str): Label for the boundary

    Returns:
        RegionBoundary: best configuration per weight and the frontier
    """
    if not configs:
        raise RelayNetError("trace_boundary needs at least one configuration")
    lams = list(lambdas) if lambdas is not None else default_lambdas()
    if not lams:
        raise RelayNetError("trace_boundary needs at least one weight")

    sets = [builder(cfg) for cfg in configs]
    for cs in sets:
        _check_bounded(cs)
    label = protocol or sets[0].protocol
    logger.info(f"Tracing {label}: {len(sets)} configuration(s) x {len(lams)} weight(s)")

    if screen_step is not None and len(sets) > 1:
        lower, upper = _screen(sets, lams, screen_step)
    else:
        lower = upper = None

    def solve_weight(j: int):
        lam = lams[j]
        if upper is None:
            order = range(len(sets))
        else:
            order = np.argsort(-upper[:, j], kind="stable")
        best: Optional[WeightedOptimum] = None
        seen = []
        for i in order:
            if upper is not None and best is not None and upper[i, j] <= best.objective + 1e-12:
                break
            opt = max_weighted(sets[i], lam)
            seen.append((opt.rates, sets[i].config_id))
            if best is None or opt.objective > best.objective + 1e-12 or (
                abs(opt.objective - best.objective) <= 1e-12
                and (opt.rates.R_a, opt.rates.R_b) > (best.rates.R_a, best.rates.R_b)
            ):
                best = opt
        return BoundaryEntry(lam, best.rates, best.schedule, best.config_id), seen

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_weight, range(len(lams))))
    else:
        results = [solve_weight(j) for j in range(len(lams))]

    entries = [r[0] for r in results]
    evaluated = [item for r in results for item in r[1]]
    logger.debug(f"{label}: solved {len(evaluated)} LPs")
    return RegionBoundary(label, entries, evaluated, hull)
