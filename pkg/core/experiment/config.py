# core/experiment/config.py
import copy
import hashlib
import json
import logging
import os
from typing import Any, Dict, List, Optional, Tuple

import yaml

from core.channel.model import GainMatrix, db_to_linear, line_gains, two_relay_example_gains
from core.errors import ConfigError
from core.regions.df import DECODE_SET_CAP, DecodeSets, HopPartition
from core.regions.outer import CUT_CAP
from core.regions.protocols import RegionOptions
from core.regions.registry import ProtocolRegistry

logger = logging.getLogger("ScenarioConfig")

SCENARIOS = ("regions", "line", "relay-count", "two-relay-grid", "schedule", "asymptotics")
GAIN_SOURCES = ("two_relay_example", "line", "matrix")
FORMATS = ("csv", "json")

ALL_PROTOCOLS = ["DF-MABC", "DF-TDBC", "DF-MHMR", "AF-MABC", "AF-TDBC", "AF-MHMR",
                 "MABC-OUT", "TDBC-OUT", "MHMR-OUT"]

# Per-scenario defaults layered under the common ones.
SCENARIO_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "regions": {"gain_source": "two_relay_example", "baselines": True},
    "line": {"gain_source": "line", "m": 8},
    "relay-count": {"gain_source": "line", "m_range": [1, 8], "protocols": [
        "DF-MABC", "DF-TDBC", "DF-MHMR", "AF-MABC", "AF-TDBC", "AF-MHMR", "DF-NAIVE"]},
    "two-relay-grid": {"gain_source": "line", "m": 2, "powers_db": [0], "grid_step": 0.1, "protocols": [
        "DF-MABC", "DF-TDBC", "DF-MHMR", "AF-MABC", "AF-TDBC", "AF-MHMR"]},
    "schedule": {"m": 2, "blocks": 3, "group_size": 256},
    "asymptotics": {"m": 2, "h_sq": 1.0, "prelog_powers": [1e6, 1e8], "low_snr_power": 1e-4},
}

COMMON_DEFAULTS: Dict[str, Any] = {
    "powers_db": [0, 20],
    "protocols": ALL_PROTOCOLS,
    "d_ab": 1.0,
    "pathloss_exponent": 3.8,
    "k": 1.0,
    "h_ab_sq": 0.04,
    "lambda_steps": 101,
    "hull": False,
    "power_grid": False,
    "power_points": 21,
    "exhaustive_order": False,
    "screen_step": 0.02,
    "seed": 0,
    "format": "csv",
}


class ScenarioConfig:
    """
    Loads and validates scenario configurations from YAML files.

    Keys are flat; anything missing is filled from the scenario's
    defaults and from RELAYNET_* environment variables.
    """

    def __init__(self, config: Dict[str, Any], source: Optional[str] = None):
        """
        Build a configuration from an already parsed mapping.

        Args:
            config (dict): Raw key/value configuration
            source (str, optional): File the mapping was read from

        Raises:
            ConfigError: If the configuration is invalid
            FileNotFoundError: If a referenced gain file doesn't exist
        """
        if not isinstance(config, dict):
            raise ConfigError(f"Scenario config must be a mapping, got {type(config).__name__}")
        self.source = source
        self.config = copy.deepcopy(config)
        self._validate_required_keys()
        self._apply_defaults()
        self._validate()
        logger.info(f"Loaded scenario config: {self.scenario}" + (f" ({source})" if source else ""))

    @classmethod
    def load(cls, config_path: str) -> "ScenarioConfig":
        """
        Load a scenario configuration from a YAML file.

        Raises:
            ConfigError: If the configuration is invalid
            FileNotFoundError: If the file doesn't exist
        """
        if not os.path.exists(config_path):
            raise FileNotFoundError(f"Scenario configuration file not found: {config_path}")
        with open(config_path, "r") as f:
            try:
                raw = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigError(f"Could not parse {config_path}: {e}") from e
        return cls(raw or {}, source=config_path)

    @classmethod
    def for_scenario(cls, scenario: str, **overrides) -> "ScenarioConfig":
        return cls({"scenario": scenario, **overrides})

    def _validate_required_keys(self) -> None:
        if "scenario" not in self.config:
            raise ConfigError("Missing required configuration key: 'scenario'")
        if self.config["scenario"] not in SCENARIOS:
            raise ConfigError(f"Unknown scenario '{self.config['scenario']}' (expected one of {', '.join(SCENARIOS)})")

    def _apply_defaults(self) -> None:
        defaults = dict(COMMON_DEFAULTS)
        defaults.update(SCENARIO_DEFAULTS[self.config["scenario"]])
        defaults["output_dir"] = os.environ.get("RELAYNET_OUTPUT_DIR", "data/runs")
        defaults["workers"] = int(os.environ.get("RELAYNET_WORKERS", "1"))
        for key, value in defaults.items():
            self.config.setdefault(key, copy.deepcopy(value))

    def _validate(self) -> None:
        c = self.config
        if c.get("gain_source", "two_relay_example") not in GAIN_SOURCES:
            raise ConfigError(f"gain_source must be one of {GAIN_SOURCES}, got '{c.get('gain_source')}'")
        if c.get("gain_source") == "matrix":
            path = c.get("gain_file")
            if not path:
                raise ConfigError("gain_source 'matrix' requires 'gain_file'")
            if not os.path.exists(path):
                raise FileNotFoundError(f"Gain matrix file not found: {path}")

        powers = c["powers_db"]
        if not isinstance(powers, list) or not powers or not all(isinstance(p, (int, float)) for p in powers):
            raise ConfigError(f"powers_db must be a non-empty list of numbers, got {powers}")

        protocols = c["protocols"]
        if not isinstance(protocols, list) or not protocols:
            raise ConfigError("protocols must be a non-empty list")
        unknown = [p for p in protocols if p not in ProtocolRegistry.names()]
        if unknown:
            raise ConfigError(f"Unknown protocols {unknown} (known: {', '.join(ProtocolRegistry.names())})")

        if c["format"] not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got '{c['format']}'")
        if int(c["lambda_steps"]) < 2:
            raise ConfigError(f"lambda_steps must be at least 2, got {c['lambda_steps']}")
        if int(c["workers"]) < 1:
            raise ConfigError(f"workers must be at least 1, got {c['workers']}")
        if c["screen_step"] is not None and not 0 < float(c["screen_step"]) <= 0.5:
            raise ConfigError(f"screen_step must lie in (0, 0.5], got {c['screen_step']}")

        if "m_range" in c:
            m_range = c["m_range"]
            if not (isinstance(m_range, list) and len(m_range) == 2 and 1 <= m_range[0] <= m_range[1]):
                raise ConfigError(f"m_range must be [lo, hi] with 1 <= lo <= hi, got {m_range}")
        if "m" in c and int(c["m"]) < 1:
            raise ConfigError(f"m must be at least 1, got {c['m']}")
        self._validate_caps()

        if self.scenario == "two-relay-grid":
            step = float(c["grid_step"])
            n = round(1.0 / step)
            if not 0 < step < 0.5 or abs(n * step - 1.0) > 1e-9:
                raise ConfigError(f"grid_step must divide (0, 1) evenly and leave room for two relays, got {step}")
        if self.scenario == "schedule":
            if int(c["m"]) < 2 or int(c["blocks"]) < int(c["m"]):
                raise ConfigError(f"schedule needs m >= 2 and blocks >= m, got m={c['m']}, blocks={c['blocks']}")
            if int(c["group_size"]) < 2:
                raise ConfigError(f"group_size must be at least 2, got {c['group_size']}")
        if "DF-MHMR-T" in protocols or "MHMR-OUT-T" in protocols:
            if "t" not in c:
                raise ConfigError("(m,t) protocols require the phase count 't'")

        # Parse structured entries eagerly so errors surface at load time.
        self.decode_sets = self._parse_decode_sets(c.get("decode_sets"))
        self.partitions = self._parse_partitions(c.get("partitions"))

    def _validate_caps(self) -> None:
        largest = self.m_values()[-1] if self.scenario in ("regions", "line", "relay-count") else None
        if largest is None:
            return
        if self.config.get("decode_sets") is None and largest > DECODE_SET_CAP and any(
            p in self.protocols for p in ("DF-MABC", "DF-TDBC")
        ):
            raise ConfigError(
                f"m={largest} exceeds the decode-set enumeration cap {DECODE_SET_CAP}; list decode_sets explicitly"
            )
        if largest > CUT_CAP and any(p.endswith("OUT") or "-OUT-" in p for p in self.protocols):
            raise ConfigError(f"m={largest} exceeds the cut-set enumeration cap {CUT_CAP}")

    @staticmethod
    def _parse_decode_sets(entries) -> Optional[List[DecodeSets]]:
        if entries is None:
            return None
        if not isinstance(entries, list):
            raise ConfigError("decode_sets must be a list of {A: [...], B: [...]} entries")
        out = []
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict) or "A" not in entry or "B" not in entry:
                raise ConfigError(f"decode_sets entry {i} must have 'A' and 'B' lists")
            out.append(DecodeSets(frozenset(entry["A"] or []), frozenset(entry["B"] or [])))
        return out

    @staticmethod
    def _parse_partitions(entries) -> Optional[List[HopPartition]]:
        if entries is None:
            return None
        if not isinstance(entries, list) or not all(isinstance(p, list) for p in entries):
            raise ConfigError("partitions must be a list of hop lists, e.g. [[[1, 2], [3, 4]]]")
        return [HopPartition(tuple(tuple(h) for h in p)) for p in entries]

    @property
    def scenario(self) -> str:
        return self.config["scenario"]

    @property
    def protocols(self) -> List[str]:
        return list(self.config["protocols"])

    @property
    def output_dir(self) -> str:
        return self.config["output_dir"]

    @property
    def output_format(self) -> str:
        return self.config["format"]

    def powers(self) -> List[Tuple[float, float]]:
        """(dB, linear) pairs with P = 10^(dB/10)."""
        return [(float(p), db_to_linear(float(p))) for p in self.config["powers_db"]]

    def m_values(self) -> List[int]:
        if "m_range" in self.config and self.scenario == "relay-count":
            lo, hi = self.config["m_range"]
            return list(range(int(lo), int(hi) + 1))
        if self.config.get("gain_source") == "two_relay_example" and "m" not in self.config:
            return [2]
        return [int(self.config.get("m", 2))]

    def gains(self, m: Optional[int] = None) -> GainMatrix:
        """Network for this scenario (``m`` overrides the relay count of line geometries)."""
        c = self.config
        source = c["gain_source"]
        if source == "two_relay_example":
            return two_relay_example_gains()
        if source == "matrix":
            return GainMatrix.load(c["gain_file"])
        return line_gains(
            m if m is not None else int(c.get("m", 8)),
            d_ab=float(c["d_ab"]),
            exponent=float(c["pathloss_exponent"]),
            k=float(c["k"]),
            h_ab_sq=None if c["h_ab_sq"] is None else float(c["h_ab_sq"]),
        )

    def region_options(self, **overrides) -> RegionOptions:
        c = self.config
        steps = int(c["lambda_steps"])
        options = RegionOptions(
            lambdas=[i / (steps - 1) for i in range(steps)],
            hull=bool(c["hull"]),
            power_grid=bool(c["power_grid"]),
            power_points=int(c["power_points"]),
            exhaustive_order=bool(c["exhaustive_order"]),
            decode_sets=self.decode_sets,
            partitions=self.partitions,
            t=int(c["t"]) if "t" in c else None,
            screen_step=None if c["screen_step"] is None else float(c["screen_step"]),
            workers=int(c["workers"]),
        )
        for key, value in overrides.items():
            setattr(options, key, value)
        return options

    def apply_overrides(self, output_dir: Optional[str] = None, output_format: Optional[str] = None,
                        hull: Optional[bool] = None, power_grid: Optional[bool] = None,
                        lambda_steps: Optional[int] = None) -> None:
        """Apply command-line overrides and re-validate."""
        updates = {"output_dir": output_dir, "format": output_format, "hull": hull,
                   "power_grid": power_grid, "lambda_steps": lambda_steps}
        for key, value in updates.items():
            if value is not None:
                self.config[key] = value
        self._validate()

    def config_hash(self) -> str:
        """Stable hash of the resolved configuration."""
        text = json.dumps(self.config, sort_keys=True, default=str)
        return hashlib.md5(text.encode()).hexdigest()
