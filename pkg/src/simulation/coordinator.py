import logging
import math
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Any, Dict, List, Tuple

import simpy

from .reception import Interference, JamAction, Outcome
from ..nodes.attacker import Attacker
from ..nodes.base_node import BaseNode
from ..nodes.guardian import Guardian
from ..nodes.victim import Victim
from ..protocol.frame_codec import (
    AddrMode,
    Frame,
    FrameType,
    ack_frame,
    association_request,
    build_fcf,
    intra_pan_data_frame,
)
from ..radio.rf_model import ShadowingField
from ..rules.chain import Verdict, evaluate_chain
from ..rules.gtables import chain_from_sources
from ..utils.errors import ScenarioValidationError
from ..utils.schemas import (
    FlowTotals,
    IntervalRow,
    NodeCounters,
    Role,
    Scenario,
    StatsReport,
    TemplateFrameType,
    TrafficFlow,
)

logger = logging.getLogger(__name__)

# transmissions and jams older than this can no longer overlap a frame in flight
HISTORY_HORIZON_US = 10_000.0


class EventKind(IntEnum):
    COMMIT = 0
    FRAME_DUE = 1
    CLASSIFY = 2
    FRAME_END = 3


@dataclass
class Transmission:
    flow_index: int
    frame: Frame
    src: str
    start: float
    end: float
    power_dbm: float
    interval: int
    should_block: bool


@dataclass
class ChannelJam:
    action: JamAction
    guardian: str


class SimEvent(simpy.Event):
    """A simulator action due at ``time_us`` on behalf of ``node_id``.

    SimPy pops events by (time, priority, insertion order); the coordinator
    passes the node's rank among the sorted node ids as the priority.
    """

    def __init__(self, env: simpy.Environment, time_us: float, node_id: str, kind: EventKind, payload: Any = None):
        super().__init__(env)
        self.time_us = time_us
        self.node_id = node_id
        self.kind = kind
        self.payload = payload
        # born triggered, as simpy.Timeout is
        self._ok = True
        self._value = payload


def build_flow_frame(flow: TrafficFlow, src: BaseNode, dst: BaseNode, seq: int) -> Frame:
    """Instantiate a flow's frame template for one transmission."""
    template = flow.template
    payload = bytearray(template.payload_len)
    if template.nw_ctrl is not None:
        payload[0:2] = template.nw_ctrl.to_bytes(2, "little")
    if template.asl_cmd is not None:
        payload[10] = template.asl_cmd
    dst_addr = template.dst_addr if template.dst_addr is not None else dst.spec.addr

    if template.frame_type == TemplateFrameType.DATA:
        return intra_pan_data_frame(flow.pan, dst_addr, src.spec.addr, seq, bytes(payload))
    if template.frame_type == TemplateFrameType.CONTROL:
        payload = bytes([0x01]) + bytes(payload[1:])
        return association_request(flow.pan, dst_addr, src.spec.extended_address, seq, payload)
    if template.frame_type == TemplateFrameType.BEACON:
        fcf = build_fcf(FrameType.BEACON, src_mode=AddrMode.SHORT)
        return Frame(fcf=fcf, seq=seq & 0xFF, src_pan=flow.pan, src_addr=src.spec.addr, payload=bytes(payload))
    return ack_frame(seq)


class SimulationCoordinator:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.shadowing = ShadowingField(scenario.rf, scenario.seed)
        self.nodes: Dict[str, BaseNode] = {}
        self.guardians: List[Guardian] = []
        self.victims: List[Victim] = []

        for spec in scenario.nodes:
            if spec.role == Role.GUARDIAN:
                node = Guardian(spec, chain_from_sources(spec.rules))
                self.guardians.append(node)
            elif spec.role == Role.VICTIM:
                node = Victim(spec)
                self.victims.append(node)
            else:
                node = Attacker(spec)
            self.nodes[spec.id] = node

        self.env = simpy.Environment()
        self.rank: Dict[str, int] = {node_id: rank for rank, node_id in enumerate(sorted(self.nodes))}
        self.channel_busy_until = 0.0
        self.transmissions: List[Transmission] = []
        self.jams: List[ChannelJam] = []
        self.frame_seq: Dict[int, int] = {}

        self.n_intervals = max(1, math.ceil(scenario.duration_s / scenario.report_interval_s - 1e-9))
        self.rows: Dict[Tuple[int, int], IntervalRow] = {}
        self.totals: Dict[str, FlowTotals] = {}
        logger.info(
            f"Simulation initialized: {len(self.nodes)} nodes, {len(scenario.flows)} flows, "
            f"{len(scenario.rule_updates)} rule updates"
        )

    def schedule_event(self, time_us: float, node_id: str, kind: EventKind, payload: Any = None) -> SimEvent:
        """Queue an action at absolute time ``time_us``; ties go by node id, then by insertion."""
        event = SimEvent(self.env, time_us, node_id, kind, payload)
        event.callbacks.append(self._dispatch)
        self.env.schedule(event, priority=self.rank[node_id], delay=max(0.0, time_us - self.env.now))
        return event

    def _dispatch(self, event: SimEvent) -> None:
        if event.kind == EventKind.COMMIT:
            self.nodes[event.node_id].commit(event.time_us, event.payload)
        elif event.kind == EventKind.FRAME_DUE:
            self._handle_frame_due(event)
        elif event.kind == EventKind.CLASSIFY:
            self._handle_classify(event)
        elif event.kind == EventKind.FRAME_END:
            self._handle_frame_end(event)

    def _row(self, interval: int, flow_index: int) -> IntervalRow:
        return self.rows[(interval, flow_index)]

    def _interval_of(self, time_us: float) -> int:
        index = int(time_us / 1e6 // self.scenario.report_interval_s)
        return min(max(index, 0), self.n_intervals - 1)

    def _schedule_initial_events(self) -> None:
        latency = self.scenario.effective_reconfig_latency
        for update in sorted(self.scenario.rule_updates, key=lambda u: u.time_s):
            guardian = self.nodes[update.guardian]
            chain = chain_from_sources(update.rules)
            at = update.time_s * 1e6
            guardian.schedule(at, chain)
            # the previous chain stays active until the write completes
            self.schedule_event(at + latency, guardian.id, EventKind.COMMIT, chain)

        for index, flow in enumerate(self.scenario.flows):
            self.frame_seq[index] = 0
            self.schedule_event(flow.window[0] * 1e6, flow.src, EventKind.FRAME_DUE, (index, 0))

    def run(self) -> StatsReport:
        """Drain the event queue and build the report."""
        scenario = self.scenario
        for index in range(len(scenario.flows)):
            self.totals[scenario.flow_id(index)] = FlowTotals()
            for interval in range(self.n_intervals):
                self.rows[(interval, index)] = IntervalRow(
                    interval_start_s=round(interval * scenario.report_interval_s, 9),
                    flow_id=scenario.flow_id(index),
                )

        self._schedule_initial_events()
        logger.info(f"Running scenario for {scenario.duration_s} s (seed {scenario.seed})")

        self.env.run()

        report = self._build_report()
        logger.info(
            f"Simulation finished: {report.jam_transmissions} jams, "
            f"{sum(t.sent for t in report.flows.values())} frames sent"
        )
        return report

    def _handle_frame_due(self, event: SimEvent) -> None:
        index, k = event.payload
        flow = self.scenario.flows[index]
        interval_us = 1e6 / flow.rate
        nominal = flow.window[0] * 1e6 + k * interval_us

        if flow.carrier_sense and self.channel_busy_until > event.time_us:
            # carrier sensing: wait for the channel, keep the nominal schedule for the next frame
            self.schedule_event(self.channel_busy_until, flow.src, EventKind.FRAME_DUE, (index, k))
            return

        next_nominal = nominal + interval_us
        if next_nominal < flow.window[1] * 1e6:
            self.schedule_event(next_nominal, flow.src, EventKind.FRAME_DUE, (index, k + 1))

        self._transmit(index, flow, event.time_us)

    def _transmit(self, index: int, flow: TrafficFlow, start: float) -> None:
        src = self.nodes[flow.src]
        dst = self.nodes[flow.dst]
        flow_id = self.scenario.flow_id(index)

        if isinstance(src, Attacker):
            power = src.choose_power(flow.strategy, dst, self.guardians, self.scenario.rf)
        else:
            power = src.spec.tx_power_dbm
        if power is None:
            self.totals[flow_id].abstained += 1
            src.remember(start, "abstain")
            return

        seq = self.frame_seq[index]
        self.frame_seq[index] = (seq + 1) & 0xFF
        frame = build_flow_frame(flow, src, dst, seq)
        end = start + frame.airtime_us

        tx = Transmission(
            flow_index=index,
            frame=frame,
            src=src.id,
            start=start,
            end=end,
            power_dbm=power,
            interval=self._interval_of(start),
            should_block=False,
        )
        self.channel_busy_until = max(self.channel_busy_until, end)
        self.transmissions.append(tx)
        self._row(tx.interval, index).sent += 1
        self.totals[flow_id].sent += 1
        src.remember(start, "transmit", flow=flow_id, power_dbm=power)

        for guardian in self.guardians:
            rx = self.shadowing.received_dbm(power, src.id, src.position, guardian.id, guardian.position)
            observed = replace(frame, rx_meta=rx)
            if evaluate_chain(guardian.intended_chain_at(start), observed).verdict == Verdict.DROP:
                tx.should_block = True
            if guardian.detects(rx):
                guardian.counters.detected += 1
                at = guardian.classification_start(frame, start)
                self.schedule_event(at, guardian.id, EventKind.CLASSIFY, (tx, rx))

        self.schedule_event(end, src.id, EventKind.FRAME_END, tx)

    def _handle_classify(self, event: SimEvent) -> None:
        tx, rx = event.payload
        guardian = self.nodes[event.node_id]
        start = guardian.classification_start(tx.frame, tx.start)
        if start > event.time_us:
            # a commit since the frame began needs bytes that have not arrived yet
            self.schedule_event(start, guardian.id, EventKind.CLASSIFY, (tx, rx))
            return
        action = guardian.classify(tx.frame, rx, event.time_us)
        if action is None:
            return
        self.jams.append(ChannelJam(action=action, guardian=guardian.id))
        self._row(tx.interval, tx.flow_index).jam_airtime_us += action.duration
        self.totals[self.scenario.flow_id(tx.flow_index)].jam_airtime_us += action.duration
        logger.debug(
            f"{guardian.id} jams flow {tx.flow_index} frame at {tx.start:.1f} us: "
            f"[{action.start:.1f}, {action.end:.1f}] us"
        )

    def _interferers_at(self, victim: BaseNode, tx: Transmission) -> List[Interference]:
        items: List[Interference] = []
        for jam in self.jams:
            if jam.action.end > tx.start and jam.action.start < tx.end:
                guardian = self.nodes[jam.guardian]
                power = self.shadowing.received_dbm(
                    jam.action.power_dbm, guardian.id, guardian.position, victim.id, victim.position
                )
                items.append(Interference(jam.action.start, jam.action.end, power))
        for other in self.transmissions:
            if other is tx or other.src == victim.id:
                continue
            if other.end > tx.start and other.start < tx.end:
                src = self.nodes[other.src]
                power = self.shadowing.received_dbm(other.power_dbm, src.id, src.position, victim.id, victim.position)
                items.append(Interference(other.start, other.end, power))
        return items

    def _handle_frame_end(self, event: SimEvent) -> None:
        tx: Transmission = event.payload
        flow = self.scenario.flows[tx.flow_index]
        flow_id = self.scenario.flow_id(tx.flow_index)
        src = self.nodes[tx.src]
        rf = self.scenario.rf
        min_overlap = self._min_overlap()

        for victim in self.victims:
            if victim.id == tx.src:
                continue
            rx = self.shadowing.received_dbm(tx.power_dbm, src.id, src.position, victim.id, victim.position)
            outcome = victim.receive(
                event.time_us, (tx.start, tx.end), rx, self._interferers_at(victim, tx), rf, min_overlap
            )
            if victim.id != flow.dst:
                continue

            row = self._row(tx.interval, tx.flow_index)
            totals = self.totals[flow_id]
            if outcome == Outcome.RECEIVED:
                row.received += 1
                totals.received += 1
                if tx.should_block:
                    row.false_neg += 1
                    totals.false_neg += 1
            elif outcome == Outcome.DESTROYED:
                row.destroyed += 1
                totals.destroyed += 1
                if not tx.should_block:
                    row.false_pos += 1
                    totals.false_pos += 1
            else:
                row.below_sensitivity += 1
                totals.below_sensitivity += 1

        self._prune(event.time_us)

    def _min_overlap(self) -> float:
        # the victims' symbol fragility is a property of the PHY, shared by every guardian timing model
        if self.guardians:
            return min(g.timing.min_overlap for g in self.guardians)
        return 13.0

    def _prune(self, now: float) -> None:
        horizon = now - HISTORY_HORIZON_US
        if self.transmissions and self.transmissions[0].end < horizon:
            self.transmissions = [tx for tx in self.transmissions if tx.end >= horizon]
        if self.jams and self.jams[0].action.end < horizon:
            self.jams = [jam for jam in self.jams if jam.action.end >= horizon]

    def _build_report(self) -> StatsReport:
        scenario = self.scenario
        rows = [
            self.rows[(interval, index)]
            for interval in range(self.n_intervals)
            for index in range(len(scenario.flows))
        ]
        nodes: Dict[str, NodeCounters] = {node_id: node.counters for node_id, node in sorted(self.nodes.items())}
        return StatsReport(
            duration_s=scenario.duration_s,
            seed=scenario.seed,
            rows=rows,
            flows=self.totals,
            nodes=nodes,
            jam_transmissions=sum(g.counters.jams for g in self.guardians),
            jam_airtime_us=sum(g.counters.jam_airtime_us for g in self.guardians),
        )


def run(scenario: Scenario) -> StatsReport:
    """Execute one scenario. Deterministic for a given scenario, seed included."""
    if not isinstance(scenario, Scenario):
        raise ScenarioValidationError(f"expected a Scenario, got {type(scenario).__name__}")
    return SimulationCoordinator(scenario).run()
