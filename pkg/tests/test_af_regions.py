import pytest

from core.channel.model import capacity, line_gains
from core.errors import RelayNetError, UnknownProtocolError
from core.regions.af import (
    AF_EVALUATORS,
    af_mabc_rates,
    af_mhmr_effective_gains,
    af_mhmr_rates,
    af_sum_rate_gradient_probe,
    af_tdbc_rates,
)
from core.regions.df import RelayOrder
from core.regions.protocols import RegionOptions
from core.regions.registry import ProtocolRegistry


class TestClosedForms:
    def test_mabc_single_relay(self, equal_gains):
        rates = af_mabc_rates(equal_gains(1), 2.0)
        # scaling 2/3, received SNR 0.4 after self-interference cancellation
        assert rates.R_a == pytest.approx(0.5 * capacity(0.4))
        assert rates.R_a == pytest.approx(0.2428, abs=1e-4)
        assert rates.R_b == pytest.approx(rates.R_a)

    def test_tdbc_single_relay(self, equal_gains):
        rates = af_tdbc_rates(equal_gains(1), 1.0)
        assert rates.R_a == pytest.approx(capacity(1.0 + 0.25 / 1.5) / 3)

    def test_tdbc_uses_direct_link(self, example_gains):
        weak = af_tdbc_rates(example_gains, 10.0)
        no_relays = capacity(10.0 * example_gains(0, 3)) / 3
        assert weak.R_a > no_relays

    def test_bad_power(self, example_gains):
        with pytest.raises(RelayNetError):
            af_mabc_rates(example_gains, 0.0)


class TestMhmrChain:
    def test_single_relay_matches_tdbc(self, example_gains):
        g = example_gains.restrict([1])
        for P in (1.0, 100.0):
            mhmr = af_mhmr_rates(g, P)
            tdbc = af_tdbc_rates(g, P)
            assert mhmr.R_a == pytest.approx(tdbc.R_a)
            assert mhmr.R_b == pytest.approx(tdbc.R_b)

    def test_single_relay_needs_no_sweeps(self, example_gains):
        eff = af_mhmr_effective_gains(example_gains.restrict([2]), 1.0)
        assert eff.sweeps == 0 and eff.converged

    def test_fixed_point(self):
        g = line_gains(4, h_ab_sq=0.04)
        P = 10.0
        eff = af_mhmr_effective_gains(g, P)
        assert eff.converged
        assert eff.h_a_tilde_sq[0] == pytest.approx(g(0, 1))
        assert eff.h_b_tilde_sq[-1] == pytest.approx(g(5, 4))
        for i in range(2, 5):
            link, prev, p = g(i - 1, i), eff.h_a_tilde_sq[i - 2], eff.p_tilde[i - 2]
            assert eff.h_a_tilde_sq[i - 1] == pytest.approx(link * prev * p * P / (2 * link * p + 1), rel=1e-8)
        for idx, p in enumerate(eff.p_tilde):
            assert p == pytest.approx(P / (P * (eff.h_a_tilde_sq[idx] + eff.h_b_tilde_sq[idx]) + 2), rel=1e-8)

    @pytest.mark.parametrize("P", [1.0, 100.0])
    def test_line_sum_rate_falls_with_relay_count(self, P):
        sums = [af_mhmr_rates(line_gains(m, h_ab_sq=0.04), P).sum_rate for m in range(2, 9)]
        assert all(b < a for a, b in zip(sums, sums[1:])), sums

        # one relay is the three-phase protocol and sits below two relays
        single = af_mhmr_rates(line_gains(1, h_ab_sq=0.04), P)
        assert single.sum_rate == pytest.approx(af_tdbc_rates(line_gains(1, h_ab_sq=0.04), P).sum_rate)
        assert single.sum_rate < sums[0]

    def test_mirror_symmetric_line(self):
        rates = af_mhmr_rates(line_gains(4, h_ab_sq=0.04), 10.0)
        assert rates.R_a == pytest.approx(rates.R_b, rel=1e-9)

    def test_relay_order(self, example_gains):
        swapped = af_mhmr_rates(example_gains, 10.0, RelayOrder((2, 1)))
        assert swapped.sum_rate > 0
        with pytest.raises(RelayNetError):
            af_mhmr_rates(example_gains, 10.0, RelayOrder((1, 3)))


class TestProtocolWrappers:
    @pytest.mark.parametrize("name", sorted(AF_EVALUATORS))
    def test_fixed_equal_phases(self, example_gains, name):
        protocol = ProtocolRegistry.get_protocol(name)
        boundary = protocol.boundary(example_gains, 10.0, RegionOptions(lambdas=[0.0, 0.5, 1.0]))
        t = protocol.phase_count(example_gains.m, RegionOptions())
        rates = AF_EVALUATORS[name](example_gains, 10.0)
        for entry in boundary.entries:
            assert entry.rates == rates
            assert entry.schedule.delta == pytest.approx(tuple([1 / t] * t))
            assert entry.config_id == "fixed"
        assert protocol.sum_rate(example_gains, 10.0, RegionOptions()) == pytest.approx(rates.sum_rate)


class TestGradientProbe:
    def test_frame_shape(self, example_gains):
        frame = af_sum_rate_gradient_probe(example_gains, 10.0, "AF-TDBC")
        assert list(frame.columns) == ["i", "j", "derivative", "negative"]
        assert len(frame) == 6
        assert (frame["negative"] == (frame["derivative"] < 0)).all()

    def test_direct_link_helps_tdbc(self, example_gains):
        frame = af_sum_rate_gradient_probe(example_gains, 10.0, "AF-TDBC")
        direct = frame[(frame["i"] == 0) & (frame["j"] == 3)]["derivative"].iloc[0]
        assert direct > 0

    def test_mabc_ignores_direct_link(self, example_gains):
        frame = af_sum_rate_gradient_probe(example_gains, 10.0, "AF-MABC")
        direct = frame[(frame["i"] == 0) & (frame["j"] == 3)]["derivative"].iloc[0]
        assert direct == pytest.approx(0.0, abs=1e-6)

    def test_unknown_protocol(self, example_gains):
        with pytest.raises(UnknownProtocolError):
            af_sum_rate_gradient_probe(example_gains, 10.0, "DF-MABC")
