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
    two_relay_example_gains,
    positions_gains,
)
