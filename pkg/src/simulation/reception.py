"""
Symbol-level destruction arithmetic at a receiving victim.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Sequence, Tuple

from ..protocol.frame_codec import US_PER_SYMBOL
from ..radio.rf_model import sum_dbm
from ..utils.schemas import RfParams

# float slack when comparing accumulated overlap against min_overlap
EPSILON_US = 1e-9


class Outcome(str, Enum):
    RECEIVED = "received"
    DESTROYED = "destroyed"
    BELOW_SENSITIVITY = "below_sensitivity"


@dataclass(frozen=True)
class JamAction:
    start: float
    duration: float
    power_dbm: float

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class Interference:
    """Any energy on the channel as seen by one receiver: a jam or an overlapping frame."""

    start: float
    end: float
    power_dbm: float


def _corrupted_time(
    s0: float, s1: float, rx_power_dbm: float, interferers: Sequence[Interference], gamma_eff_db: float
) -> float:
    points = {s0, s1}
    for item in interferers:
        if s0 < item.start < s1:
            points.add(item.start)
        if s0 < item.end < s1:
            points.add(item.end)
    edges = sorted(points)

    corrupted = 0.0
    for a, b in zip(edges, edges[1:]):
        active = [item for item in interferers if item.start < b and item.end > a]
        if not active:
            continue
        total_dbm = sum_dbm(item.power_dbm for item in active)
        if rx_power_dbm - total_dbm < gamma_eff_db:
            corrupted += b - a
    return corrupted


def reception_outcome(
    window: Tuple[float, float],
    rx_power_dbm: float,
    sensitivity_dbm: float,
    interferers: Iterable[Interference],
    params: RfParams,
    min_overlap: float,
) -> Outcome:
    """Outcome of one frame at one receiver.

    Destroyed iff some 16 us symbol spends at least ``min_overlap`` us under
    interference (powers summed linearly) that pushes the SIR below
    gamma_SIR + waveform gain.
    """
    if rx_power_dbm < sensitivity_dbm:
        return Outcome.BELOW_SENSITIVITY

    start, end = window
    relevant: List[Interference] = [
        item for item in interferers if item.end > start and item.start < end and item.end > item.start
    ]
    if not relevant:
        return Outcome.RECEIVED

    n_symbols = int(round((end - start) / US_PER_SYMBOL))
    candidates = set()
    for item in relevant:
        first = max(0, int(math.floor((max(item.start, start) - start) / US_PER_SYMBOL)))
        last = min(n_symbols - 1, int(math.ceil((min(item.end, end) - start) / US_PER_SYMBOL)) - 1)
        candidates.update(range(first, last + 1))

    for k in sorted(candidates):
        s0 = start + k * US_PER_SYMBOL
        s1 = s0 + US_PER_SYMBOL
        corrupted = _corrupted_time(s0, s1, rx_power_dbm, relevant, params.gamma_eff_db)
        if corrupted > 0 and corrupted + EPSILON_US >= min_overlap:
            return Outcome.DESTROYED
    return Outcome.RECEIVED
