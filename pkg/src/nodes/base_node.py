from collections import deque
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, List, Optional, Tuple

from ..radio.rf_model import distance
from ..utils.schemas import NodeCounters, NodeSpec, Role


@dataclass
class NodeEvent:
    time_us: float
    kind: str
    detail: Dict[str, Any] = field(default_factory=dict)


class BaseNode:
    def __init__(self, spec: NodeSpec):
        self.spec = spec
        self.counters = NodeCounters()
        self.memory: Deque[NodeEvent] = deque(maxlen=100)

    @property
    def id(self) -> str:
        return self.spec.id

    @property
    def role(self) -> Role:
        return self.spec.role

    @property
    def position(self) -> Tuple[float, float]:
        return self.spec.position

    def distance_to(self, other: "BaseNode") -> float:
        return distance(self.position, other.position)

    def remember(self, time_us: float, kind: str, **detail: Any) -> None:
        """Keep a bounded history of what this node did."""
        self.memory.append(NodeEvent(time_us=time_us, kind=kind, detail=detail))

    def get_recent_events(self, limit: int = 5, kind: Optional[str] = None) -> List[NodeEvent]:
        """Recent events, optionally filtered by kind."""
        events = [e for e in self.memory if kind is None or e.kind == kind]
        return events[-limit:]

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.id!r})"
