import logging
from typing import Optional, Sequence

from .base_node import BaseNode
from ..analysis.protection import stealth_power_window
from ..radio.rf_model import path_loss_db
from ..utils.schemas import AttackStrategy, RfParams

logger = logging.getLogger(__name__)


class Attacker(BaseNode):
    """Injects unauthorized frames; picks its transmit power by strategy."""

    def choose_power(
        self,
        strategy: AttackStrategy,
        victim: BaseNode,
        guardians: Sequence[BaseNode],
        params: RfParams,
    ) -> Optional[float]:
        """Transmit power in dBm for the next frame, or None to abstain.

        ``tx_power_dbm`` is the radio's maximum. A stealthy attacker aims at the
        middle of the window that reaches the victim yet stays under every
        guardian's sensitivity, using the deterministic path loss it can know.
        """
        max_power = self.spec.tx_power_dbm
        if strategy in (AttackStrategy.FIXED_POWER, AttackStrategy.BRUTE_FORCE):
            return max_power

        if not guardians:
            return max_power

        d_av = self.distance_to(victim)
        windows = [
            stealth_power_window(
                d_av,
                self.distance_to(guardian),
                victim.spec.sensitivity_dbm,
                guardian.spec.sensitivity_dbm,
                params,
            )
            for guardian in guardians
        ]
        if any(window is None for window in windows):
            return None

        low = victim.spec.sensitivity_dbm + path_loss_db(d_av, params)
        high = min(window.high_dbm for window in windows)
        if low >= high or low > max_power:
            return None
        return min((low + high) / 2.0, max_power)
