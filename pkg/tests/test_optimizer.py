import numpy as np
import pytest

from core.errors import EnumerationLimitError, RelayNetError, UnboundedRegionError
from core.optimizer.phase import (
    TARGET_A,
    TARGET_B,
    TARGET_SUM,
    Constraint,
    PhaseSchedule,
    RateConstraintSet,
    RatePair,
    convex_frontier,
    default_lambdas,
    grid_oracle,
    max_sum_rate,
    max_weighted,
    pareto_frontier,
    simplex_lattice,
    trace_boundary,
)


def _cs(t, rows, config_id=""):
    return RateConstraintSet(t, tuple(Constraint(target, coeff) for target, coeff in rows), "TEST", config_id)


def random_constraint_set(rng, t, k=4, scale=0.5):
    rows = [(TARGET_A, rng.uniform(0, scale, t)), (TARGET_B, rng.uniform(0, scale, t))]
    targets = (TARGET_A, TARGET_B, TARGET_SUM)
    rows += [(targets[rng.integers(3)], rng.uniform(0, scale, t)) for _ in range(k - 2)]
    return _cs(t, [(target, tuple(coeff)) for target, coeff in rows])


class TestPhaseSchedule:
    def test_validation(self):
        with pytest.raises(RelayNetError):
            PhaseSchedule((0.5, 0.6))
        with pytest.raises(RelayNetError):
            PhaseSchedule((1.5, -0.5))
        with pytest.raises(RelayNetError):
            PhaseSchedule(())

    def test_constructors(self):
        assert PhaseSchedule.uniform(4).delta == (0.25, 0.25, 0.25, 0.25)
        assert PhaseSchedule.from_array([2.0, -1e-12, 2.0]).delta == pytest.approx((0.5, 0.0, 0.5))
        with pytest.raises(RelayNetError):
            PhaseSchedule.from_array([0.0, 0.0])


class TestConstraintSet:
    def test_shape_and_target_checks(self):
        with pytest.raises(RelayNetError):
            _cs(2, [(TARGET_A, (1.0,))])
        with pytest.raises(RelayNetError):
            Constraint("R_c", (1.0,))
        with pytest.raises(RelayNetError):
            Constraint(TARGET_A, (float("nan"),))

    def test_evaluate_and_best_rates(self):
        cs = _cs(2, [(TARGET_A, (2.0, 0.0)), (TARGET_B, (0.0, 2.0)), (TARGET_SUM, (1.0, 1.0))])
        u = cs.evaluate((0.5, 0.5))
        assert u == {TARGET_A: 1.0, TARGET_B: 1.0, TARGET_SUM: 1.0}
        assert cs.best_rates_at((0.5, 0.5), 0.5) == RatePair(1.0, 0.0)
        assert cs.best_rates_at((0.5, 0.5), 0.2) == RatePair(0.0, 1.0)

    def test_scaled(self):
        cs = _cs(1, [(TARGET_A, (2.0,)), (TARGET_B, (3.0,))])
        assert cs.scaled(0.5).max_coeff() == 1.5


class TestMaxWeighted:
    def test_time_sharing_tie_breaks_towards_r_a(self):
        cs = _cs(2, [(TARGET_A, (2.0, 0.0)), (TARGET_B, (0.0, 2.0))])
        opt = max_sum_rate(cs)
        assert opt.objective == pytest.approx(1.0)
        assert opt.rates.R_a == pytest.approx(2.0)
        assert opt.rates.R_b == pytest.approx(0.0, abs=1e-9)

    def test_weighted(self):
        cs = _cs(2, [(TARGET_A, (2.0, 0.0)), (TARGET_B, (0.0, 4.0))])
        opt = max_weighted(cs, 0.7)
        assert opt.schedule.delta == pytest.approx((1.0, 0.0), abs=1e-9)
        assert opt.objective == pytest.approx(1.4)
        opt = max_weighted(cs, 0.3)
        assert opt.rates.R_b == pytest.approx(4.0)

    def test_sum_constraint_split(self):
        cs = _cs(1, [(TARGET_A, (3.0,)), (TARGET_B, (3.0,)), (TARGET_SUM, (4.0,))])
        assert max_weighted(cs, 0.5).rates == RatePair(3.0, 1.0)
        assert max_weighted(cs, 0.2).rates == RatePair(1.0, 3.0)

    def test_balanced_optimum(self):
        # sum <= delta_1 and each rate <= 4 delta_2: optimum at delta_2 = 1/9
        cs = _cs(2, [(TARGET_A, (1.0, 0.0)), (TARGET_B, (1.0, 0.0)), (TARGET_SUM, (1.0, 0.0)),
                     (TARGET_A, (0.0, 4.0)), (TARGET_B, (0.0, 4.0))])
        opt = max_sum_rate(cs)
        assert opt.rates.sum_rate == pytest.approx(8 / 9)
        assert opt.rates.R_a == pytest.approx(4 / 9)
        assert opt.schedule.delta[1] == pytest.approx(1 / 9)

    def test_unbounded(self):
        with pytest.raises(UnboundedRegionError):
            max_weighted(_cs(1, [(TARGET_A, (1.0,))]), 0.5)

    def test_bad_weight(self):
        with pytest.raises(RelayNetError):
            max_weighted(_cs(1, [(TARGET_SUM, (1.0,))]), 1.5)

    def test_matches_grid_oracle(self, rng):
        for _ in range(10):
            cs = random_constraint_set(rng, 2)
            lam = float(rng.uniform())
            lp = max_weighted(cs, lam).objective
            oracle = grid_oracle(cs, lam, 1e-3)
            assert oracle <= lp + 1e-9
            assert lp - oracle <= 1e-3

    @pytest.mark.slow
    def test_matches_grid_oracle_three_phases(self, rng):
        for _ in range(100):
            cs = random_constraint_set(rng, 3, k=int(rng.integers(2, 7)))
            lam = float(rng.uniform())
            lp = max_weighted(cs, lam).objective
            oracle = grid_oracle(cs, lam, 1e-3)
            assert oracle <= lp + 1e-9
            assert lp - oracle <= 1e-3


class TestLattice:
    def test_points(self):
        lattice = simplex_lattice(3, 0.5)
        assert lattice.shape == (6, 3)
        assert np.allclose(lattice.sum(axis=1), 1.0)

    def test_limit(self):
        with pytest.raises(EnumerationLimitError):
            simplex_lattice(10, 1e-3)

    def test_oracle_step_range(self):
        cs = _cs(1, [(TARGET_SUM, (1.0,))])
        with pytest.raises(RelayNetError):
            grid_oracle(cs, 0.5, 0.2)

    def test_refinement_never_lowers_oracle(self, rng):
        cs = random_constraint_set(rng, 3)
        assert grid_oracle(cs, 0.5, 0.01) >= grid_oracle(cs, 0.5, 0.02) - 1e-12


def test_default_lambdas():
    lams = default_lambdas()
    assert len(lams) == 101 and lams[0] == 0.0 and lams[-1] == 1.0
    with pytest.raises(RelayNetError):
        default_lambdas(1)


class TestTraceBoundary:
    def configs(self):
        return {
            "left": _cs(2, [(TARGET_A, (1.0, 0.0)), (TARGET_B, (0.0, 3.0))], "left"),
            "right": _cs(2, [(TARGET_A, (3.0, 0.0)), (TARGET_B, (0.0, 1.0))], "right"),
        }

    def test_best_config_per_weight(self):
        sets = self.configs()
        boundary = trace_boundary(sets.get, list(sets), [0.0, 0.5, 1.0], protocol="TEST")
        ids = [e.config_id for e in boundary.entries]
        assert ids[0] == "left" and ids[-1] == "right"
        assert boundary.value(1.0) == pytest.approx(3.0)
        assert boundary.sum_rate_max() == pytest.approx(3.0)
        with pytest.raises(RelayNetError):
            boundary.value(0.25)

    def test_frame(self):
        sets = self.configs()
        frame = trace_boundary(sets.get, list(sets), [0.0, 1.0]).to_frame()
        assert list(frame.columns) == ["lambda", "R_a", "R_b", "delta_1", "delta_2", "config_id"]
        assert len(frame) == 2

    def test_screening_matches_exhaustive(self, rng):
        sets = [random_constraint_set(rng, 3) for _ in range(12)]
        lams = default_lambdas(11)
        exact = trace_boundary(lambda cs: cs, sets, lams)
        screened = trace_boundary(lambda cs: cs, sets, lams, screen_step=0.05, workers=2)
        for a, b in zip(exact.entries, screened.entries):
            assert a.rates.weighted(a.lam) == pytest.approx(b.rates.weighted(b.lam), abs=1e-9)

    def test_empty(self):
        with pytest.raises(RelayNetError):
            trace_boundary(lambda c: c, [], [0.5])


def test_pareto_and_convex_frontier():
    points = [RatePair(0.0, 2.0), RatePair(1.0, 0.9), RatePair(2.0, 0.0), RatePair(0.5, 0.5)]
    pareto = pareto_frontier(points)
    assert pareto == [RatePair(0.0, 2.0), RatePair(1.0, 0.9), RatePair(2.0, 0.0)]
    hull = convex_frontier(pareto)
    assert RatePair(1.0, 0.9) not in hull
    assert RatePair(0.0, 2.0) in hull and RatePair(2.0, 0.0) in hull
