import math

import numpy as np
import pytest

from core.channel.model import (
    GainMatrix,
    Geometry,
    NodeId,
    PowerConfig,
    capacity,
    db_to_linear,
    equal_gain_matrix,
    equal_power_split,
    line_gains,
    linear_to_db,
    positions_gains,
)
from core.errors import CapacityDomainError, DegenerateGeometryError, RelayNetError


class TestCapacity:
    def test_known_values(self):
        assert capacity(0.0) == 0.0
        assert capacity(1.0) == pytest.approx(1.0)
        assert capacity(3.0) == pytest.approx(2.0)

    def test_vectorized(self):
        out = capacity(np.array([0.0, 1.0, 3.0]))
        assert np.allclose(out, [0.0, 1.0, 2.0])

    def test_low_snr_slope(self):
        x = 1e-6
        assert capacity(x) == pytest.approx(x / math.log(2), rel=1e-5)

    @pytest.mark.parametrize("bad", [-1e-3, math.inf, math.nan])
    def test_domain(self, bad):
        with pytest.raises(CapacityDomainError):
            capacity(bad)


def test_db_conversion():
    assert db_to_linear(0) == 1.0
    assert db_to_linear(20) == pytest.approx(100.0)
    assert linear_to_db(100.0) == pytest.approx(20.0)
    assert PowerConfig.from_db(10).P == pytest.approx(10.0)
    with pytest.raises(RelayNetError):
        linear_to_db(0.0)
    with pytest.raises(RelayNetError):
        PowerConfig(-1.0)


def test_node_labels():
    assert NodeId(0, 2).label == "a"
    assert NodeId(3, 2).label == "b"
    assert NodeId(1, 2).label == "r1"
    assert NodeId(3, 2).is_terminal and not NodeId(2, 2).is_terminal
    with pytest.raises(RelayNetError):
        NodeId(4, 2)


class TestGainMatrix:
    def test_two_relay_example_is_squared(self, example_gains):
        assert example_gains.m == 2
        assert example_gains(0, 1) == pytest.approx(1.44)
        assert example_gains(1, 2) == pytest.approx(4.0)
        assert example_gains(0, 3) == pytest.approx(0.04)
        assert example_gains(2, 1) == example_gains(1, 2)

    def test_read_only(self, example_gains):
        with pytest.raises(ValueError):
            example_gains.g[0, 1] = 5.0

    @pytest.mark.parametrize("matrix", [
        [[0, 1, 1], [2, 0, 1], [1, 1, 0]],
        [[1, 1, 1], [1, 0, 1], [1, 1, 0]],
        [[0, -1, 1], [-1, 0, 1], [1, 1, 0]],
    ])
    def test_validation(self, matrix):
        with pytest.raises(RelayNetError):
            GainMatrix(1, np.array(matrix, dtype=float))

    def test_wrong_shape(self):
        with pytest.raises(RelayNetError):
            GainMatrix(2, np.zeros((3, 3)))

    def test_swap_terminals(self, example_gains):
        swapped = example_gains.swap_terminals()
        assert swapped(0, 1) == example_gains(3, 2)
        assert swapped(0, 3) == example_gains(0, 3)
        assert np.allclose(swapped.swap_terminals().g, example_gains.g)

    def test_restrict_and_reorder(self, example_gains):
        single = example_gains.restrict([2])
        assert single.m == 1
        assert single(0, 1) == example_gains(0, 2)
        assert single(1, 2) == example_gains(2, 3)
        reversed_chain = example_gains.reorder([2, 1])
        assert reversed_chain(0, 1) == example_gains(0, 2)
        with pytest.raises(RelayNetError):
            example_gains.restrict([1, 1])
        with pytest.raises(RelayNetError):
            example_gains.reorder([1, 3])

    def test_extremal_gains(self, example_gains):
        assert example_gains.h_min_sq() == pytest.approx(0.04)
        assert example_gains.h_max_sq() == pytest.approx(4.0)

    def test_csv_and_json_files(self, tmp_path, example_gains):
        csv_path = str(tmp_path / "g.csv")
        example_gains.write_csv(csv_path)
        with open(csv_path) as f:
            assert f.readline().strip() == "m=2"
        assert np.allclose(GainMatrix.load(csv_path).g, example_gains.g)

        json_path = str(tmp_path / "g.json")
        example_gains.write_json(json_path)
        assert np.allclose(GainMatrix.load(json_path).g, example_gains.g)

    def test_bad_csv_header(self, tmp_path):
        path = tmp_path / "g.csv"
        path.write_text("0,1\n1,0\n")
        with pytest.raises(RelayNetError, match="m=<value>"):
            GainMatrix.read_csv(str(path))


class TestGeometry:
    def test_line_gains(self):
        g = line_gains(1)
        assert g(0, 1) == pytest.approx(0.5 ** -3.8)
        assert g(0, 2) == pytest.approx(1.0)
        assert line_gains(1, h_ab_sq=0.04)(0, 2) == pytest.approx(0.04)

    def test_line_is_mirror_symmetric(self):
        g = line_gains(4, h_ab_sq=0.04)
        assert np.allclose(g.swap_terminals().g, g.g)

    def test_positions(self):
        g = positions_gains([0.2, 0.6], exponent=2.0, k=1.0)
        assert g(0, 1) == pytest.approx(25.0)
        assert g(1, 2) == pytest.approx(1 / 0.16)

    @pytest.mark.parametrize("positions", [(0.0, 0.5), (0.0, 0.5, 0.5, 1.0), (0.1, 0.5, 1.0), (0.0, 0.7, 0.3, 1.0)])
    def test_degenerate(self, positions):
        with pytest.raises(DegenerateGeometryError):
            Geometry(positions)

    def test_bad_parameters(self):
        with pytest.raises(RelayNetError):
            Geometry((0.0, 0.5, 1.0), pathloss_exponent=0.0)
        with pytest.raises(DegenerateGeometryError):
            line_gains(2, d_ab=0.0)


def test_equal_gain_matrix():
    g = equal_gain_matrix(3, 2.0)
    assert g.h_min_sq() == g.h_max_sq() == 2.0
    assert g(0, 0) == 0.0


def test_equal_power_split():
    assert equal_power_split([2, 1, 2], 4.0) == {1: 2.0, 2: 2.0}
    with pytest.raises(RelayNetError):
        equal_power_split([], 1.0)
