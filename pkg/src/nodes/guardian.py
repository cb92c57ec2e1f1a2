import logging
from dataclasses import replace
from typing import List, Optional, Tuple

from .base_node import BaseNode
from ..protocol.frame_codec import Frame, US_PER_BYTE
from ..rules.chain import RuleChain, Verdict, chain_inspection_depth, decide_time, evaluate_chain
from ..simulation.reception import JamAction
from ..utils.schemas import NodeSpec, TimingModel

logger = logging.getLogger(__name__)


class Guardian(BaseNode):
    """Overhears frames, classifies them against its chain and jams the ones it must drop.

    A rule update replaces ``chain`` in one step when it commits; until then the
    previous chain stays in force.
    """

    def __init__(self, spec: NodeSpec, chain: RuleChain):
        super().__init__(spec)
        self.chain: RuleChain = chain
        # (time_us, chain) as scheduled, ignoring reconfiguration latency
        self.intended: List[Tuple[float, RuleChain]] = [(0.0, chain)]

    @property
    def timing(self) -> TimingModel:
        return self.spec.timing

    @property
    def jam_power_dbm(self) -> float:
        return self.spec.jam_power_dbm

    def detects(self, rx_power_dbm: float) -> bool:
        return rx_power_dbm >= self.spec.sensitivity_dbm

    def schedule(self, time_us: float, chain: RuleChain) -> None:
        self.intended.append((time_us, chain))
        self.intended.sort(key=lambda item: item[0])

    def intended_chain_at(self, time_us: float) -> RuleChain:
        current = self.intended[0][1]
        for start, chain in self.intended:
            if start <= time_us:
                current = chain
            else:
                break
        return current

    def commit(self, time_us: float, chain: RuleChain) -> None:
        logger.debug(f"{self.id}: committing {len(chain)} rules at {time_us:.0f} us")
        self.chain = chain
        self.remember(time_us, "commit", rules=len(chain))

    def classification_start(self, frame: Frame, frame_start: float) -> float:
        """When the rule evaluation begins: the inspected byte has arrived and passed the receiver pipeline."""
        depth = min(chain_inspection_depth(self.chain, frame, strict=False), frame.total_bytes)
        return frame_start + depth * US_PER_BYTE + self.timing.rx_delay

    def classify(self, frame: Frame, rx_power_dbm: float, at_us: float) -> Optional[JamAction]:
        """Evaluate the active chain at ``at_us``; a DROP yields the interference burst to transmit."""
        chain = self.chain
        observed = replace(frame, rx_meta=rx_power_dbm)
        result = evaluate_chain(chain, observed)
        if result.verdict != Verdict.DROP:
            return None

        start = at_us + decide_time(chain, self.timing.decision) + self.timing.t_init
        action = JamAction(start=start, duration=self.timing.t_interfere, power_dbm=self.jam_power_dbm)
        self.counters.jams += 1
        self.counters.jam_airtime_us += action.duration
        self.remember(at_us, "jam", rule=result.rule_index, start=action.start)
        return action


def guardian_pipeline(
    frame: Frame, guardian: Guardian, rx_power_dbm: float, frame_start: float
) -> Optional[JamAction]:
    """Listen, decide, init, interfere for one detected frame, using the guardian's current chain."""
    return guardian.classify(frame, rx_power_dbm, guardian.classification_start(frame, frame_start))
