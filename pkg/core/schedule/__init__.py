from core.schedule.mhmr import (
    NodeState,
    ScheduleEvent,
    ScheduleTranscript,
    SubMessage,
    expected_relay_payload,
    naive_phase_count,
    node_label,
    phase_count,
    random_sub_messages,
    replay_states,
    run_schedule,
    verify_delivery,
)
