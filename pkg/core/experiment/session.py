# core/experiment/session.py
import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, List

import pandas as pd
import yaml

from core.schedule.mhmr import ScheduleTranscript

logger = logging.getLogger("ExperimentSession")


class ExperimentSession:
    """
    Manages the output directory of a single scenario run.

    Creates a unique session directory and provides methods for saving
    tables, JSON documents, transcripts and milestone events.
    """

    def __init__(self, scenario_config, base_dir: str = None):
        """
        Initialize a new experiment session.

        Args:
            scenario_config (ScenarioConfig): Resolved scenario configuration
            base_dir (str, optional): Output root; defaults to the config's output_dir
        """
        self.timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        self.scenario = scenario_config.scenario
        self.session_id = f"{self.scenario.replace('-', '_')}_{self.timestamp}"
        self.output_format = scenario_config.output_format

        self.base_dir = base_dir or scenario_config.output_dir
        self.session_dir = os.path.join(self.base_dir, self.session_id)
        suffix = 1
        while os.path.exists(self.session_dir):
            self.session_dir = os.path.join(self.base_dir, f"{self.session_id}_{suffix}")
            suffix += 1
        os.makedirs(self.session_dir)

        self.config = scenario_config.config
        with open(os.path.join(self.session_dir, "config.yaml"), "w") as f:
            yaml.dump(self.config, f)

        metadata = {
            "session_id": self.session_id,
            "scenario": self.scenario,
            "timestamp": self.timestamp,
            "config_hash": scenario_config.config_hash(),
            "source": scenario_config.source,
        }
        with open(os.path.join(self.session_dir, "session_metadata.json"), "w") as f:
            json.dump(metadata, f, indent=2)

        self.events_path = os.path.join(self.session_dir, "events.jsonl")
        self.event_count = 0
        self.written: List[str] = []

        logger.info(f"Created experiment session: {self.session_id} in {self.session_dir}")

    def path(self, filename: str) -> str:
        return os.path.join(self.session_dir, filename)

    def save_event(self, event_type: str, event_data: Dict[str, Any]) -> int:
        """
        Append a milestone event to events.jsonl.

        Returns:
            int: The event id
        """
        event = {
            "session_id": self.session_id,
            "event_id": self.event_count,
            "event_type": event_type,
            "timestamp": datetime.now().isoformat(),
            "data": event_data,
            "record_type": "event",
        }
        with open(self.events_path, "a") as f:
            f.write(json.dumps(event, default=str) + "\n")
        self.event_count += 1
        return self.event_count - 1

    def save_table(self, name: str, frame: pd.DataFrame) -> str:
        """
        Write a table as CSV, plus a JSON mirror when the format is json.

        Args:
            name (str): File stem, e.g. ``regions_DF-MABC_0dB``
            frame (pd.DataFrame): Table to write

        Returns:
            str: Path of the CSV file
        """
        csv_path = self.path(f"{name}.csv")
        frame.to_csv(csv_path, index=False)
        self.written.append(csv_path)
        if self.output_format == "json":
            json_path = self.path(f"{name}.json")
            frame.to_json(json_path, orient="records", indent=2)
            self.written.append(json_path)
        logger.debug(f"Wrote {len(frame)} rows to {csv_path}")
        self.save_event("table_written", {"name": name, "rows": len(frame)})
        return csv_path

    def save_json(self, name: str, data: Any) -> str:
        json_path = self.path(f"{name}.json")
        with open(json_path, "w") as f:
            json.dump(data, f, indent=2, default=str)
        self.written.append(json_path)
        self.save_event("json_written", {"name": name})
        return json_path

    def save_transcript(self, name: str, transcript: ScheduleTranscript) -> str:
        jsonl_path = self.path(f"{name}.jsonl")
        transcript.write_jsonl(jsonl_path)
        self.written.append(jsonl_path)
        self.save_event("transcript_written", {"name": name, "events": len(transcript)})
        return jsonl_path

    def summary(self) -> Dict[str, Any]:
        return {
            "session_id": self.session_id,
            "session_dir": self.session_dir,
            "files": [os.path.basename(p) for p in self.written],
            "event_count": self.event_count,
        }
