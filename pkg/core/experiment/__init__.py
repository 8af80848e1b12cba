from core.experiment.config import ScenarioConfig
from core.experiment.scenarios import (
    SCENARIOS,
    contained,
    grid_positions,
    run_scenario,
    scenario_asymptotics,
    scenario_line,
    scenario_regions,
    scenario_relay_count,
    scenario_schedule,
    scenario_two_relay_grid,
)
from core.experiment.session import ExperimentSession
