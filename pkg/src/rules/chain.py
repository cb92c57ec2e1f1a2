"""
Rule chains: matches, rules, first-match evaluation, inspection depth and
worst-case decision time.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from ..protocol.frame_codec import (
    FieldRef,
    Frame,
    FrameType,
    Selector,
    field_offset,
    field_value,
)
from ..utils.errors import (
    FrameValidationError,
    InspectionDepthError,
    RuleEvaluationError,
    RuleSyntaxError,
)
from ..utils.schemas import CostVariant, DecisionCostModel

logger = logging.getLogger(__name__)

# the framer has to read the FCF before anything can be classified
MIN_INSPECTION_DEPTH = 8


class Verdict(str, Enum):
    DROP = "DROP"
    ACCEPT = "ACCEPT"


class MatchKind(str, Enum):
    SRC = "src"
    DST = "dst"
    TYPE = "type"
    RSS = "rss"
    NW_CTRL = "nw_ctrl"
    ASL_CMD = "asl_cmd"
    RAW_BYTE = "raw_byte"


class RssDirection(str, Enum):
    ABOVE = "above"
    BELOW = "below"


FRAME_TYPES = {
    "control": FrameType.COMMAND,
    "data": FrameType.DATA,
    "beacon": FrameType.BEACON,
    "ack": FrameType.ACK,
}


@dataclass(frozen=True)
class Match:
    kind: MatchKind
    addr: Optional[int] = None
    pan: Optional[int] = None
    frame_type: Optional[str] = None
    rss_threshold: Optional[float] = None
    rss_direction: Optional[RssDirection] = None
    value: Optional[int] = None
    offset: Optional[int] = None
    hamming_tolerance: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", MatchKind(self.kind))
        kind = self.kind
        if kind in (MatchKind.SRC, MatchKind.DST):
            if self.addr is None and self.pan is None:
                raise RuleSyntaxError(0, f"-m {kind.value} needs --addr and/or --pan")
            for name in ("addr", "pan"):
                value = getattr(self, name)
                if value is not None and not 0 <= value <= 0xFFFF:
                    raise RuleSyntaxError(0, f"--{name} {value:#x} is not a 16-bit value")
        elif kind == MatchKind.TYPE:
            if self.frame_type not in FRAME_TYPES:
                raise RuleSyntaxError(0, f"unknown frame type {self.frame_type!r}")
        elif kind == MatchKind.RSS:
            if self.rss_threshold is None or self.rss_direction is None:
                raise RuleSyntaxError(0, "-m rss needs --above or --below with a dBm threshold")
            object.__setattr__(self, "rss_direction", RssDirection(self.rss_direction))
        elif kind in (MatchKind.NW_CTRL, MatchKind.ASL_CMD):
            if self.value is None:
                raise RuleSyntaxError(0, f"-m {kind.value} needs a value")
            if not 0 <= self.value < (1 << self.bit_width):
                raise RuleSyntaxError(0, f"{kind.value} value {self.value:#x} exceeds {self.bit_width} bits")
        elif kind == MatchKind.RAW_BYTE:
            if self.offset is None or self.value is None:
                raise RuleSyntaxError(0, "-m raw_byte needs --offset and --value")
            if self.offset < 1:
                raise RuleSyntaxError(0, "raw_byte offsets are 1-indexed")
            if not 0 <= self.value <= 0xFF:
                raise RuleSyntaxError(0, f"raw_byte value {self.value:#x} is not a byte")

        if self.hamming_tolerance < 0:
            raise RuleSyntaxError(0, "hamming tolerance must be non-negative")
        if self.hamming_tolerance and self.hamming_tolerance >= self.bit_width:
            raise RuleSyntaxError(
                0, f"hamming tolerance {self.hamming_tolerance} must be below the {self.bit_width}-bit field width"
            )

    @property
    def bit_width(self) -> int:
        if self.kind in (MatchKind.SRC, MatchKind.DST):
            return 16 * ((self.addr is not None) + (self.pan is not None))
        if self.kind == MatchKind.NW_CTRL:
            return 16
        if self.kind in (MatchKind.ASL_CMD, MatchKind.RAW_BYTE):
            return 8
        return 0

    def field_literals(self) -> List[Tuple[FieldRef, int]]:
        """Header/payload fields this match compares, with the literal each must equal."""
        if self.kind == MatchKind.SRC:
            pairs = [(Selector.SRC_PAN, self.pan), (Selector.SRC_ADDR, self.addr)]
        elif self.kind == MatchKind.DST:
            pairs = [(Selector.DST_PAN, self.pan), (Selector.DST_ADDR, self.addr)]
        elif self.kind == MatchKind.NW_CTRL:
            pairs = [(Selector.NW_CTRL, self.value)]
        elif self.kind == MatchKind.ASL_CMD:
            pairs = [(Selector.ASL_CMD, self.value)]
        else:
            return []
        return [(FieldRef(selector), literal) for selector, literal in pairs if literal is not None]

    def fires(self, frame: Frame) -> bool:
        if self.kind == MatchKind.RSS:
            if frame.rx_meta is None:
                raise RuleEvaluationError("rss match evaluated on a frame without reception metadata")
            if self.rss_direction == RssDirection.ABOVE:
                return frame.rx_meta > self.rss_threshold
            return frame.rx_meta < self.rss_threshold
        if self.kind == MatchKind.TYPE:
            return frame.frame_type == FRAME_TYPES[self.frame_type]
        if self.kind == MatchKind.RAW_BYTE:
            wire = frame.wire
            if self.offset > len(wire):
                return False
            return hamming_distance(wire[self.offset - 1], self.value) <= self.hamming_tolerance

        distance = 0
        for field_ref, literal in self.field_literals():
            observed = field_value(frame, field_ref)
            if observed is None:
                return False
            value, width = observed
            if width != 16 and field_ref.selector in (Selector.SRC_ADDR, Selector.DST_ADDR):
                # extended addresses never equal a 16-bit literal
                return False
            distance += hamming_distance(value, literal)
            if distance > self.hamming_tolerance:
                return False
        return True

    def offsets(self, layout: Frame) -> List[int]:
        """Last-byte offsets of everything this match reads. Raises FrameValidationError for absent fields."""
        if self.kind == MatchKind.RSS:
            return [field_offset(layout, FieldRef(Selector.RSS))]
        if self.kind == MatchKind.TYPE:
            return [field_offset(layout, FieldRef(Selector.FRAME_TYPE))]
        if self.kind == MatchKind.RAW_BYTE:
            if self.offset > layout.total_bytes:
                raise FrameValidationError(
                    "raw_byte", f"offset {self.offset} beyond a {layout.total_bytes}-byte frame"
                )
            return [self.offset]
        return [field_offset(layout, field_ref) for field_ref, _ in self.field_literals()]


def hamming_distance(a: int, b: int) -> int:
    return bin(a ^ b).count("1")


@dataclass(frozen=True)
class Rule:
    matches: Tuple[Match, ...]
    verdict: Verdict

    def __post_init__(self):
        object.__setattr__(self, "matches", tuple(self.matches))
        object.__setattr__(self, "verdict", Verdict(self.verdict))

    def fires(self, frame: Frame) -> bool:
        return all(match.fires(frame) for match in self.matches)


@dataclass(frozen=True)
class RuleChain:
    rules: Tuple[Rule, ...] = ()
    default_verdict: Verdict = Verdict.ACCEPT

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    @property
    def has_rss(self) -> bool:
        return any(m.kind == MatchKind.RSS for rule in self.rules for m in rule.matches)

    def __len__(self) -> int:
        return len(self.rules)


@dataclass(frozen=True)
class ChainResult:
    verdict: Verdict
    rule_index: Optional[int] = None


def evaluate_chain(chain: RuleChain, frame: Frame) -> ChainResult:
    """First firing rule decides; an empty or non-firing chain yields the default verdict."""
    if chain.has_rss and frame.rx_meta is None:
        raise RuleEvaluationError("chain has an rss match but the frame carries no RSS")
    for index, rule in enumerate(chain.rules):
        if rule.fires(frame):
            return ChainResult(rule.verdict, index)
    return ChainResult(chain.default_verdict, None)


def chain_inspection_depth(chain: RuleChain, layout: Frame, strict: bool = True) -> int:
    """Byte after which the whole chain can be evaluated on frames shaped like ``layout``.

    With ``strict=False`` matches on fields the layout lacks are skipped; such
    matches cannot fire on that frame anyway.
    """
    depth = MIN_INSPECTION_DEPTH
    for rule_index, rule in enumerate(chain.rules):
        for match_index, match in enumerate(rule.matches):
            try:
                offsets = match.offsets(layout)
            except FrameValidationError as e:
                if strict:
                    raise InspectionDepthError(
                        f"rule {rule_index} match {match_index} (-m {match.kind.value})", str(e)
                    )
                continue
            depth = max([depth, *offsets])
    return depth


def decide_time(chain: RuleChain, model: DecisionCostModel) -> float:
    """Worst-case rule evaluation time in microseconds (full traversal, nothing fires)."""
    if model.variant == CostVariant.FPGA:
        return model.fpga_const
    per_match = model.c_dispatch + model.c_exec
    total = model.c_base
    for rule in chain.rules:
        total += model.c_rule + per_match * len(rule.matches)
    return total
