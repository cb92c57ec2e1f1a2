"""
Reaction-time budget: how much airtime remains after the inspected byte, and
whether a guardian's pipeline lands enough interference inside the frame.
"""

from dataclasses import asdict, dataclass
from typing import Dict

from ..protocol.frame_codec import Frame, US_PER_BYTE
from ..rules.chain import RuleChain, chain_inspection_depth, decide_time
from ..utils.errors import AnalysisError
from ..utils.schemas import TimingModel


def max_react_time(inspect_offset: int, total_frame_bytes: int) -> float:
    """Airtime left after byte ``inspect_offset`` (1-indexed) of a frame."""
    if not 1 <= inspect_offset <= total_frame_bytes:
        raise AnalysisError(f"offset {inspect_offset} outside a {total_frame_bytes}-byte frame")
    return float((total_frame_bytes - inspect_offset) * US_PER_BYTE)


def t_react(chain: RuleChain, timing: TimingModel) -> float:
    return decide_time(chain, timing.decision) + timing.t_init + timing.t_interfere


@dataclass(frozen=True)
class FeasibilityReport:
    depth: int
    total_frame_bytes: int
    t_listen_budget: float
    rx_delay: float
    t_decide: float
    t_init: float
    t_interfere: float
    t_react: float
    min_overlap: float
    # time from the inspected byte until min_overlap of interference has landed
    required: float
    slack: float
    feasible: bool

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


def reaction_feasible(
    chain: RuleChain, layout: Frame, timing: TimingModel, total_frame_bytes: int
) -> FeasibilityReport:
    """Feasible iff at least ``min_overlap`` of the burst lands before the frame ends."""
    depth = chain_inspection_depth(chain, layout)
    budget = max_react_time(depth, total_frame_bytes)
    t_decide = decide_time(chain, timing.decision)
    reaction = t_decide + timing.t_init + timing.t_interfere
    required = timing.rx_delay + reaction - (timing.t_interfere - timing.min_overlap)
    return FeasibilityReport(
        depth=depth,
        total_frame_bytes=total_frame_bytes,
        t_listen_budget=budget,
        rx_delay=timing.rx_delay,
        t_decide=t_decide,
        t_init=timing.t_init,
        t_interfere=timing.t_interfere,
        t_react=reaction,
        min_overlap=timing.min_overlap,
        required=required,
        slack=budget - required,
        feasible=required <= budget and timing.t_interfere >= timing.min_overlap,
    )
