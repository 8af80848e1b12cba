import pytest
import os
import json
import yaml
import logging

import numpy as np
import pandas as pd

from core.channel.model import line_gains
from core.errors import ConfigError
from core.experiment.config import ScenarioConfig
from core.experiment.scenarios import contained, grid_positions, run_scenario
from core.experiment.session import ExperimentSession
from core.optimizer.phase import BoundaryEntry, PhaseSchedule, RatePair, RegionBoundary
from core.regions.protocols import RegionOptions
from core.regions.registry import ProtocolRegistry
from tests.validation.assertions import extract_scenario_data, validate_assertions
from tests.validation.snapshot import compare_with_snapshot
import main as cli

logger = logging.getLogger("ScenarioTest")

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))


def test_scenario(scenario_case, update_snapshots, output_root):
    """
    Run one configured scenario end-to-end and validate its outputs.

    Args:
        scenario_case: Path to the case's test_config.yaml (parameterized)
        update_snapshots: Flag to update snapshots instead of comparing (fixture)
        output_root: Temporary output directory (fixture)
    """
    with open(scenario_case, 'r') as f:
        test_config = yaml.safe_load(f)

    cfg = ScenarioConfig.load(os.path.join(project_root, test_config['scenario_config']))
    cfg.apply_overrides(output_dir=output_root)
    logger.info(f"Running scenario test: {test_config['name']}")

    _, session = run_scenario(cfg)

    validation = test_config.get('validation', {})
    if validation.get('type', 'assertions') == 'snapshot':
        actual = session.path(validation['actual_file'])
        expected = os.path.join(project_root, validation['snapshot_file'])
        match, message = compare_with_snapshot(actual, expected, update=update_snapshots)
        assert match, message

    assertions = validation.get('assertions', [])
    if assertions:
        passed, message = validate_assertions(session.session_dir, assertions)
        assert passed, message


class TestScenarioConfig:
    def test_defaults_and_db_conversion(self, output_root):
        cfg = ScenarioConfig.for_scenario("regions")
        assert [p for _, p in cfg.powers()] == pytest.approx([1.0, 100.0])
        assert cfg.output_dir == output_root
        assert cfg.gains().m == 2
        assert len(cfg.region_options().weights()) == 101

    def test_missing_scenario_key(self):
        with pytest.raises(ConfigError, match="scenario"):
            ScenarioConfig({"powers_db": [0]})

    def test_unknown_scenario_and_protocol(self):
        with pytest.raises(ConfigError, match="Unknown scenario"):
            ScenarioConfig({"scenario": "figures"})
        with pytest.raises(ConfigError, match="Unknown protocols"):
            ScenarioConfig({"scenario": "regions", "protocols": ["DF-XYZ"]})

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ScenarioConfig.load(str(tmp_path / "nope.yaml"))

    def test_missing_gain_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ScenarioConfig({"scenario": "regions", "gain_source": "matrix", "gain_file": str(tmp_path / "g.csv")})

    def test_matrix_gain_source(self, tmp_path, example_gains):
        path = str(tmp_path / "g.json")
        example_gains.write_json(path)
        cfg = ScenarioConfig({"scenario": "regions", "gain_source": "matrix", "gain_file": path})
        assert np.allclose(cfg.gains().g, example_gains.g)

    def test_decode_set_cap(self):
        with pytest.raises(ConfigError, match="cap"):
            ScenarioConfig({"scenario": "line", "m": 9, "protocols": ["DF-MABC"]})

    def test_explicit_decode_sets_lift_cap(self):
        cfg = ScenarioConfig({"scenario": "line", "m": 9, "protocols": ["DF-MABC"],
                              "decode_sets": [{"A": [1, 2], "B": [8, 9]}]})
        assert cfg.region_options().decode_sets[0].config_id == "A={1,2};B={8,9}"

    def test_bad_grid_step(self):
        with pytest.raises(ConfigError, match="grid_step"):
            ScenarioConfig({"scenario": "two-relay-grid", "grid_step": 0.3})

    def test_schedule_preconditions(self):
        with pytest.raises(ConfigError, match="blocks"):
            ScenarioConfig({"scenario": "schedule", "m": 3, "blocks": 2})

    def test_overrides(self, tmp_path):
        cfg = ScenarioConfig.for_scenario("regions")
        cfg.apply_overrides(output_dir=str(tmp_path), output_format="json", hull=True, lambda_steps=5)
        assert cfg.output_dir == str(tmp_path)
        assert cfg.output_format == "json"
        options = cfg.region_options()
        assert options.hull and options.weights() == [0.0, 0.25, 0.5, 0.75, 1.0]
        with pytest.raises(ConfigError, match="lambda_steps"):
            cfg.apply_overrides(lambda_steps=1)

    def test_environment_defaults(self, monkeypatch, tmp_path):
        monkeypatch.setenv("RELAYNET_OUTPUT_DIR", str(tmp_path))
        monkeypatch.setenv("RELAYNET_WORKERS", "3")
        cfg = ScenarioConfig.for_scenario("line")
        assert cfg.output_dir == str(tmp_path)
        assert cfg.region_options().workers == 3

    def test_config_hash_is_stable(self):
        a = ScenarioConfig.for_scenario("schedule")
        b = ScenarioConfig.for_scenario("schedule")
        assert a.config_hash() == b.config_hash()
        b.apply_overrides(output_format="json")
        assert a.config_hash() != b.config_hash()


class TestExperimentSession:
    def test_layout(self, output_root):
        cfg = ScenarioConfig.for_scenario("schedule", format="json")
        session = ExperimentSession(cfg)
        assert os.path.isdir(session.session_dir)
        assert os.path.exists(session.path("config.yaml"))
        with open(session.path("session_metadata.json")) as f:
            metadata = json.load(f)
        assert metadata["scenario"] == "schedule"
        assert metadata["config_hash"] == cfg.config_hash()

        session.save_table("schedule_demo", pd.DataFrame({"x": [1, 2]}))
        assert os.path.exists(session.path("schedule_demo.csv"))
        assert os.path.exists(session.path("schedule_demo.json"))
        with open(session.events_path) as f:
            events = [json.loads(line) for line in f]
        assert [e["event_type"] for e in events] == ["table_written"]
        assert events[0]["data"] == {"name": "schedule_demo", "rows": 2}

    def test_sessions_do_not_collide(self, output_root):
        cfg = ScenarioConfig.for_scenario("schedule")
        first, second = ExperimentSession(cfg), ExperimentSession(cfg)
        assert first.session_dir != second.session_dir


def _boundary(name, values):
    entries = [BoundaryEntry(lam, RatePair(ra, rb), PhaseSchedule((0.5, 0.5)), "c") for lam, ra, rb in values]
    return RegionBoundary(name, entries)


def test_contained_compares_shared_weights():
    inner = _boundary("in", [(0.0, 0.5, 1.0), (1.0, 1.0, 0.2)])
    outer = _boundary("out", [(0.0, 0.0, 1.2), (1.0, 1.1, 0.0)])
    assert contained(inner, outer)
    assert not contained(outer, inner)


def test_grid_positions():
    pairs = grid_positions(0.1)
    assert len(pairs) == 36
    assert pairs[0] == (0.1, 0.2)
    assert all(0 < d1 < d2 < 1 for d1, d2 in pairs)


def test_relay_count_small(output_root):
    cfg = ScenarioConfig({"scenario": "relay-count", "m_range": [1, 3], "powers_db": [0],
                          "protocols": ["DF-MABC", "DF-MHMR", "AF-MABC", "DF-NAIVE"]})
    frame, session = run_scenario(cfg)
    assert len(frame) == 3 * 4
    mhmr = frame[frame["protocol"] == "DF-MHMR"].sort_values("m")["sum_rate"].tolist()
    assert all(b >= a - 1e-9 for a, b in zip(mhmr, mhmr[1:]))
    naive = frame[frame["protocol"] == "DF-NAIVE"].set_index("m")["sum_rate"]
    assert (frame[frame["protocol"] == "DF-MHMR"].set_index("m")["sum_rate"] >= naive - 1e-9).all()

    # m=1 rows are the single-relay protocols on the one-relay line
    single = ProtocolRegistry.get_protocol("DF-MABC").sum_rate(line_gains(1, h_ab_sq=0.04), 1.0, RegionOptions())
    row = frame[(frame["protocol"] == "DF-MABC") & (frame["m"] == 1)]["sum_rate"].iloc[0]
    assert row == pytest.approx(single, abs=1e-9)
    assert os.path.exists(session.path("relay-count_DF-MHMR_0dB.csv"))


def test_relay_count_af_chain_falls_from_two_relays(output_root):
    cfg = ScenarioConfig({"scenario": "relay-count", "m_range": [1, 8], "protocols": ["AF-MHMR", "DF-MHMR"]})
    frame, _ = run_scenario(cfg)
    for p_db in (0.0, 20.0):
        rows = frame[frame["P_dB"] == p_db]
        af = rows[rows["protocol"] == "AF-MHMR"].set_index("m")["sum_rate"]
        chain = af.loc[2:].tolist()
        assert all(b < a for a, b in zip(chain, chain[1:])), chain
        # the m=1 row is the three-phase single-relay protocol
        assert af.loc[1] < af.loc[2]
        dfm = rows[rows["protocol"] == "DF-MHMR"].sort_values("m")["sum_rate"].tolist()
        assert all(b >= a - 1e-9 for a, b in zip(dfm, dfm[1:]))


def test_two_relay_grid_undefined_protocol(output_root):
    cfg = ScenarioConfig({"scenario": "two-relay-grid", "powers_db": [0], "t": 4,
                          "protocols": ["DF-MHMR-T", "DF-MHMR"]})
    best, session = run_scenario(cfg)
    undefined = best[best["protocol"] == "DF-MHMR-T"].iloc[0]
    assert np.isnan(undefined["sum_rate"]) and np.isnan(undefined["d1"])
    assert best[best["protocol"] == "DF-MHMR"].iloc[0]["sum_rate"] > 0
    assert os.path.exists(session.path("two-relay-grid_argmax.csv"))


def test_contained_flags_from_summary(tmp_path):
    pd.DataFrame({
        "protocol": ["DF-MABC", "DF-MABC", "AF-MABC"],
        "P_dB": [0.0, 20.0, 0.0],
        "sum_rate": [1.0, 2.0, 0.5],
        "contained": [True, False, None],
    }).to_csv(tmp_path / "regions_summary.csv", index=False)
    data = extract_scenario_data(str(tmp_path))
    assert data["contained"] == {"DF-MABC": [True, False]}
    assert data["sum_rate"]["AF-MABC"] == {0.0: 0.5}


def test_two_relay_grid(output_root):
    cfg = ScenarioConfig({"scenario": "two-relay-grid", "protocols": ["DF-MABC", "DF-MHMR", "AF-MHMR"]})
    best, session = run_scenario(cfg)
    grid = pd.read_csv(session.path("two-relay-grid_DF-MHMR_0dB.csv"))
    assert len(grid) == 36

    mhmr = best[best["protocol"] == "DF-MHMR"].iloc[0]
    near = [max(abs(mhmr["d1"] - a), abs(mhmr["d2"] - b)) <= 0.1 + 1e-9 for a, b in ((0.2, 0.6), (0.4, 0.8))]
    assert any(near)
    assert (round(mhmr["d1"], 6), round(mhmr["d2"], 6)) != (0.4, 0.6)

    mabc = best[best["protocol"] == "DF-MABC"].iloc[0]
    assert min(abs(mabc["d1"] - 0.5), abs(mabc["d2"] - 0.5)) <= 0.1 + 1e-9


def test_schedule_random_blocks(output_root):
    cfg = ScenarioConfig({"scenario": "schedule", "m": 4, "blocks": 9, "group_size": 2, "seed": 7})
    report, _ = run_scenario(cfg)
    row = report.iloc[0]
    assert row["events"] == 9 * 6 + 6
    assert row["delivered"] and row["relay_payload_mismatches"] == 0


def test_schedule_boundary_blocks_equal_relays(output_root):
    report, _ = run_scenario(ScenarioConfig({"scenario": "schedule", "m": 3, "blocks": 3}))
    assert report.iloc[0]["events"] == 3 * 5 + 3


@pytest.mark.slow
def test_line_eight_relays(output_root):
    cfg = ScenarioConfig({"scenario": "line", "lambda_steps": 11})
    summary, _ = run_scenario(cfg)
    rates = summary.set_index(["protocol", "P_dB"])["sum_rate"]
    for p_db in (0.0, 20.0):
        df_best = max(rates[(name, p_db)] for name in ("DF-MABC", "DF-TDBC", "DF-MHMR"))
        assert rates[("DF-MHMR", p_db)] == pytest.approx(df_best)
    assert rates[("AF-MHMR", 0.0)] < rates[("AF-MABC", 0.0)]
    flags = summary[summary["protocol"].str.startswith("DF-")]["contained"]
    assert flags.all()


@pytest.mark.slow
def test_asymptotics_scenario(output_root):
    cfg = ScenarioConfig({"scenario": "asymptotics", "m": 2})
    gaps, session = run_scenario(cfg)
    assert set(gaps["protocol"]) == {"AF-MABC", "DF-MABC", "AF-TDBC", "DF-TDBC", "AF-MHMR", "DF-MHMR"}
    low = pd.read_csv(session.path("asymptotics_low-snr.csv"))
    lower = low[(low["bound"] == "lower") & low["protocol"].isin(["DF-MABC", "DF-TDBC", "DF-MHMR"])]
    assert ((lower["ratio"] - 1.0).abs() < 0.01).all()
    prelog = pd.read_csv(session.path("asymptotics_prelog.csv"))
    assert len(prelog) == 9


class TestCli:
    def test_schedule_subcommand(self, tmp_path, capsys):
        assert cli.main(["schedule", "--out", str(tmp_path), "--format", "json"]) == 0
        out = capsys.readouterr().out
        assert "Scenario complete: schedule" in out
        sessions = os.listdir(tmp_path)
        assert len(sessions) == 1
        files = os.listdir(tmp_path / sessions[0])
        assert "schedule_m2_b3.jsonl" in files
        assert "schedule_m2_b3.json" in files

    def test_missing_config_reports_json_error(self, tmp_path, capsys):
        code = cli.main(["regions", "--config", str(tmp_path / "missing.yaml")])
        assert code == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "FileNotFoundError"

    def test_config_for_other_scenario(self, tmp_path, capsys):
        path = tmp_path / "schedule.yaml"
        path.write_text("scenario: schedule\n")
        assert cli.main(["regions", "--config", str(path)]) == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "ConfigError"

    def test_invalid_schedule_config(self, tmp_path, capsys):
        path = tmp_path / "schedule.yaml"
        path.write_text("scenario: schedule\nm: 1\nblocks: 3\n")
        assert cli.main(["schedule", "--config", str(path), "--out", str(tmp_path)]) == 1
        assert "ConfigError" in capsys.readouterr().err

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["regions", "--format", "xml"])
        assert exc.value.code == 2
