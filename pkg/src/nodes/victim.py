from typing import Iterable, Tuple

from .base_node import BaseNode
from ..simulation.reception import Interference, Outcome, reception_outcome
from ..utils.schemas import RfParams


class Victim(BaseNode):
    """A protected sensor node; drops every frame whose FCS fails."""

    def receive(
        self,
        time_us: float,
        window: Tuple[float, float],
        rx_power_dbm: float,
        interferers: Iterable[Interference],
        params: RfParams,
        min_overlap: float,
    ) -> Outcome:
        outcome = reception_outcome(
            window, rx_power_dbm, self.spec.sensitivity_dbm, interferers, params, min_overlap
        )
        self.counters.heard += 1
        if outcome == Outcome.RECEIVED:
            self.counters.received += 1
        elif outcome == Outcome.DESTROYED:
            self.counters.destroyed += 1
            self.remember(time_us, "destroyed", rx_power_dbm=rx_power_dbm)
        else:
            self.counters.below_sensitivity += 1
        return outcome
