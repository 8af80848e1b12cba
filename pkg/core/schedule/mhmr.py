# core/schedule/mhmr.py
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from core.errors import InsufficientBlocksError, ProtocolUndefinedError, RelayNetError

logger = logging.getLogger("MHMRScheduler")

STAGES = ("init", "main", "term")


@dataclass(frozen=True)
class SubMessage:
    """One block of a terminal's message, an element of Z_L."""

    source: str
    block: int
    value: int

    @property
    def label(self) -> str:
        return f"{self.source}{self.block}"


def random_sub_messages(rng, source: str, blocks: int, group_size: int) -> List[SubMessage]:
    """Split a random message of ``source`` into B blocks drawn uniformly from Z_L."""
    values = rng.integers(0, group_size, size=blocks)
    return [SubMessage(source, k, int(v)) for k, v in enumerate(values)]


@dataclass(frozen=True)
class ScheduleEvent:
    """
    One transmission of the (m,m+2) DF schedule.

    ``a_index``/``b_index`` identify the sub-messages combined in the
    payload (None when absent); ``value`` is their sum in Z_L.
    """

    slot: int
    phase: int
    tx: int
    a_index: Optional[int]
    b_index: Optional[int]
    value: int
    decoders: Tuple[int, ...]
    stage: str
    step: Tuple[int, int]

    @property
    def payload(self) -> str:
        parts = []
        if self.a_index is not None:
            parts.append(f"a{self.a_index}")
        if self.b_index is not None:
            parts.append(f"b{self.b_index}")
        return "^".join(parts)


def node_label(index: int, m: int) -> str:
    if index == 0:
        return "a"
    if index == m + 1:
        return "b"
    return f"r{index}"


def parse_node_label(label: str, m: int) -> int:
    if label == "a":
        return 0
    if label == "b":
        return m + 1
    if label.startswith("r") and label[1:].isdigit() and 1 <= int(label[1:]) <= m:
        return int(label[1:])
    raise RelayNetError(f"Unknown node label '{label}' for m={m}")


def _parse_payload(text: str) -> Tuple[Optional[int], Optional[int]]:
    a_index = b_index = None
    for part in text.split("^"):
        if part.startswith("a"):
            a_index = int(part[1:])
        elif part.startswith("b"):
            b_index = int(part[1:])
        else:
            raise RelayNetError(f"Malformed payload expression '{text}'")
    return a_index, b_index


@dataclass
class ScheduleTranscript:
    m: int
    blocks: int
    group_size: int
    events: List[ScheduleEvent] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)

    def by_stage(self, stage: str) -> List[ScheduleEvent]:
        return [e for e in self.events if e.stage == stage]

    def to_records(self) -> List[dict]:
        return [
            {
                "slot": e.slot,
                "phase": e.phase,
                "tx": node_label(e.tx, self.m),
                "payload": e.payload,
                "value": e.value,
                "decoders": [node_label(d, self.m) for d in e.decoders],
                "stage": e.stage,
                "step": list(e.step),
            }
            for e in self.events
        ]

    def write_jsonl(self, path: str) -> None:
        with open(path, "w") as f:
            for record in self.to_records():
                f.write(json.dumps(record) + "\n")
        logger.info(f"Wrote {len(self.events)} schedule events to {path}")

    @classmethod
    def read_jsonl(cls, path: str, m: int, blocks: int, group_size: int) -> "ScheduleTranscript":
        events = []
        with open(path, "r") as f:
            for line in f:
                if not line.strip():
                    continue
                rec = json.loads(line)
                a_index, b_index = _parse_payload(rec["payload"])
                events.append(ScheduleEvent(
                    slot=int(rec["slot"]),
                    phase=int(rec["phase"]),
                    tx=parse_node_label(rec["tx"], m),
                    a_index=a_index,
                    b_index=b_index,
                    value=int(rec["value"]),
                    decoders=tuple(parse_node_label(d, m) for d in rec["decoders"]),
                    stage=rec.get("stage", ""),
                    step=tuple(rec.get("step", (0, 0))),
                ))
        return cls(m, blocks, group_size, events)


@dataclass
class NodeState:
    """Sub-messages a node has originated or decoded, by block index."""

    a_known: Dict[int, int] = field(default_factory=dict)
    b_known: Dict[int, int] = field(default_factory=dict)


def _check_params(m: int, blocks: int) -> None:
    if m < 2:
        raise ProtocolUndefinedError(f"The (m,m+2) schedule needs m >= 2 relays, got m={m}")
    if blocks < m:
        raise InsufficientBlocksError(f"The (m,m+2) schedule needs B >= m blocks, got B={blocks}, m={m}")


def _slot(m: int, tx: int, a_index: Optional[int], b_index: Optional[int]) -> int:
    if a_index is not None:
        return a_index + tx + 1
    return b_index + m + 1


class _Simulator:
    """Executes transmissions with subtraction decoding over Z_L."""

    def __init__(self, m: int, blocks: int, L: int, messages_a: Sequence[int], messages_b: Sequence[int]):
        self.m = m
        self.blocks = blocks
        self.L = L
        self.states = {n: NodeState() for n in range(m + 2)}
        self.states[0].a_known = dict(enumerate(messages_a))
        self.states[m + 1].b_known = dict(enumerate(messages_b))
        self.events: List[ScheduleEvent] = []

    def transmit(self, tx: int, a_index: Optional[int], b_index: Optional[int],
                 decoders: Iterable[int], stage: str, step: Tuple[int, int]) -> None:
        state = self.states[tx]
        if a_index is not None and a_index not in state.a_known:
            raise RelayNetError(f"{node_label(tx, self.m)} cannot send a{a_index} before decoding it")
        if b_index is not None and b_index not in state.b_known:
            raise RelayNetError(f"{node_label(tx, self.m)} cannot send b{b_index} before decoding it")
        value = (state.a_known.get(a_index, 0) + state.b_known.get(b_index, 0)) % self.L
        event = ScheduleEvent(
            slot=_slot(self.m, tx, a_index, b_index),
            phase=self.m + 2 - tx,
            tx=tx,
            a_index=a_index,
            b_index=b_index,
            value=value,
            decoders=tuple(decoders),
            stage=stage,
            step=step,
        )
        _decode(event, self.states, self.L)
        self.events.append(event)


def _decode(event: ScheduleEvent, states: Dict[int, NodeState], L: int) -> None:
    """Each decoder subtracts the component it knows and learns the other."""
    for d in event.decoders:
        if d == event.tx:
            raise RelayNetError(f"Node {d} cannot receive its own transmission (half-duplex)")
        state = states[d]
        knows_a = event.a_index is None or event.a_index in state.a_known
        knows_b = event.b_index is None or event.b_index in state.b_known
        if knows_a and knows_b:
            continue
        if not knows_a and not knows_b:
            raise RelayNetError(f"Node {d} cannot decode payload {event.payload}: no component known")
        if not knows_a:
            known = state.b_known[event.b_index] if event.b_index is not None else 0
            state.a_known[event.a_index] = (event.value - known) % L
        else:
            known = state.a_known[event.a_index] if event.a_index is not None else 0
            state.b_known[event.b_index] = (event.value - known) % L


def _validate_messages(messages: Sequence[int], blocks: int, L: int, name: str) -> None:
    if L < 2:
        raise RelayNetError(f"Group size L must be at least 2, got {L}")
    if len(messages) != blocks:
        raise RelayNetError(f"{name} needs {blocks} sub-messages, got {len(messages)}")
    bad = [v for v in messages if not 0 <= int(v) < L]
    if bad:
        raise RelayNetError(f"{name} values {bad[:5]} are outside Z_{L}")


def run_schedule(m: int, blocks: int, messages_a: Sequence[int], messages_b: Sequence[int],
                 group_size: int = 256) -> ScheduleTranscript:
    """
    Execute the (m,m+2) DF multi-hop schedule at the message level.

    Runs the initialization, main routine and termination loops in
    order. Relays combine one a-block and one b-block by addition in
    Z_L; receivers decode by subtracting the component they already hold.

    Args:
        m (int): Relay count (>= 2)
        blocks (int): Number of sub-messages B per terminal (>= m)
        messages_a: B values in Z_L sent by a
        messages_b: B values in Z_L sent by b
        group_size (int): L

    Returns:
        ScheduleTranscript: Ordered transmission events

    Raises:
        ProtocolUndefinedError: If m < 2
        InsufficientBlocksError: If B < m
    """
    _check_params(m, blocks)
    _validate_messages(messages_a, blocks, group_size, "messages_a")
    _validate_messages(messages_b, blocks, group_size, "messages_b")
    sim = _Simulator(m, blocks, group_size, [int(v) for v in messages_a], [int(v) for v in messages_b])
    b_node = m + 1

    # Initialization: the first m a-blocks fill the chain.
    for i in range(m):
        for j in range(i + 1):
            sim.transmit(i - j, j, None, (i - j + 1,), "init", (i, j))

    # Main routine: one b-block sweeps down while the a-blocks shift up.
    for i in range(blocks - m):
        sim.transmit(b_node, None, i, (m,), "main", (i, -1))
        for j in range(m):
            tx = m - j
            sim.transmit(tx, i + j, i, (tx - 1, tx + 1), "main", (i, j))
        sim.transmit(0, m + i, None, (1,), "main", (i, m))

    # Termination: the last b-blocks flush the remaining a-blocks.
    for i in range(blocks - m, blocks):
        sim.transmit(b_node, None, i, (m,), "term", (i, -1))
        for j in range(m):
            tx = m - j
            carries_a = i + j <= blocks - 1
            decoders = (tx - 1, tx + 1) if carries_a else (tx - 1,)
            sim.transmit(tx, i + j if carries_a else None, i, decoders, "term", (i, j))

    transcript = ScheduleTranscript(m, blocks, group_size, sim.events)
    logger.info(f"Schedule m={m}, B={blocks}: {len(transcript)} transmissions")
    return transcript


def replay_states(tr: ScheduleTranscript, messages_a: Sequence[int], messages_b: Sequence[int],
                  stages: Optional[Iterable[str]] = None) -> Dict[int, NodeState]:
    """
    Replay a transcript from its recorded payload values.

    Transmitters must already hold every component they send and never
    decode their own transmission; any violation raises RelayNetError.
    """
    m = tr.m
    states = {n: NodeState() for n in range(m + 2)}
    states[0].a_known = dict(enumerate(int(v) for v in messages_a))
    states[m + 1].b_known = dict(enumerate(int(v) for v in messages_b))
    wanted = set(stages) if stages is not None else None
    for event in tr.events:
        if wanted is not None and event.stage not in wanted:
            continue
        state = states[event.tx]
        if event.a_index is not None and event.a_index not in state.a_known:
            raise RelayNetError(f"Causality violated: {node_label(event.tx, m)} sends unknown a{event.a_index}")
        if event.b_index is not None and event.b_index not in state.b_known:
            raise RelayNetError(f"Causality violated: {node_label(event.tx, m)} sends unknown b{event.b_index}")
        held = state.a_known.get(event.a_index, 0) + state.b_known.get(event.b_index, 0)
        if held % tr.group_size != event.value:
            raise RelayNetError(
                f"{node_label(event.tx, m)} records {event.value} for {event.payload} but holds {held % tr.group_size}"
            )
        _decode(event, states, tr.group_size)
    return states


def verify_delivery(tr: ScheduleTranscript, messages_a: Sequence[int], messages_b: Sequence[int]) -> bool:
    """
    Check that b ends with every a-block and a with every b-block, in order.

    Returns False on any causality or half-duplex violation, on a
    transmission slot shared by two nodes, or when a decoded value
    differs from the original.
    """
    seen = set()
    for event in tr.events:
        key = (event.slot, event.phase)
        if key in seen:
            logger.debug(f"Two transmissions share slot/phase {key}")
            return False
        seen.add(key)
    try:
        states = replay_states(tr, messages_a, messages_b)
    except RelayNetError as e:
        logger.debug(f"Replay failed: {e}")
        return False
    at_b = states[tr.m + 1].a_known
    at_a = states[0].b_known
    delivered_a = [at_b.get(k) for k in range(len(messages_a))]
    delivered_b = [at_a.get(k) for k in range(len(messages_b))]
    return delivered_a == [int(v) for v in messages_a] and delivered_b == [int(v) for v in messages_b]


def phase_count(m: int, blocks: int) -> int:
    """Transmissions used by the schedule: B(m+2) + m(m-1)/2."""
    _check_params(m, blocks)
    return blocks * (m + 2) + m * (m - 1) // 2


def naive_phase_count(m: int, blocks: int) -> int:
    """Transmissions of the uncoded hop-by-hop protocol: B(2m+2)."""
    if m < 1 or blocks < 1:
        raise RelayNetError(f"Need m >= 1 and B >= 1, got m={m}, B={blocks}")
    return blocks * (2 * m + 2)


def expected_relay_payload(m: int, blocks: int, relay: int, slot: int) -> Tuple[Optional[int], Optional[int]]:
    """
    Sub-message indices relay ``relay`` forwards in ``slot`` (1..B+m).

    Returns (a_index, b_index) with None for an absent component, or
    (None, None) when the relay has nothing to send yet.
    """
    if not 1 <= relay <= m or not 1 <= slot <= blocks + m:
        raise RelayNetError(f"Relay {relay}, slot {slot} out of range for m={m}, B={blocks}")
    lag = slot - relay
    if lag < 1:
        return None, None
    if lag <= blocks and slot >= m + 1:
        return lag - 1, slot - m - 1
    if lag <= blocks:
        return lag - 1, None
    return None, slot - m - 1
