import math
from enum import Enum
from typing import Annotated, Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator


def _parse_int(value: Any) -> Any:
    # scenario files write addresses and PAN ids as "0xACAC"
    if isinstance(value, str):
        return int(value, 0)
    return value


HexInt = Annotated[int, BeforeValidator(_parse_int)]


class RfParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    d0: float = Field(8.0, gt=0, description="Reference distance in meters")
    alpha: float = Field(3.3, gt=0, description="Path-loss exponent")
    pl_d0_db: float = Field(58.5, description="Path loss at the reference distance in dB")
    gamma_sir_db: float = Field(3.0, description="SIR below which a symbol cannot be recovered")
    waveform_gain_db: float = Field(
        4.0,
        description="Extra jamming effectiveness of the interference waveform, added to gamma_sir_db",
    )
    shadowing_sigma_db: float = Field(0.0, ge=0, description="Log-normal shadowing spread, 0 = deterministic")

    @field_validator("gamma_sir_db", "waveform_gain_db", "pl_d0_db")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value

    @property
    def gamma_eff_db(self) -> float:
        return self.gamma_sir_db + self.waveform_gain_db


class SensitivityBudget(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    thermal_noise_dbm: float = Field(..., description="Thermal noise N_T over the channel bandwidth")
    noise_figure_db: float = Field(0.0, ge=0, description="Receiver noise figure N_F")
    snr_min_db: float = Field(0.0, description="Minimum SNR for reception")
    tolerance_gain_db: float = Field(
        0.0, ge=0, description="Gain from tolerating bit errors outside (or inside) matched fields"
    )


class CostVariant(str, Enum):
    FIRMWARE = "firmware"
    FPGA = "fpga"


class DecisionCostModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: CostVariant = CostVariant.FIRMWARE
    c_base: float = Field(4.03, ge=0, description="Constant firmware overhead per packet, us")
    c_rule: float = Field(0.26, ge=0, description="Per-rule evaluation cost, us")
    c_dispatch: float = Field(0.34, ge=0, description="Per-match cost to start the match function, us")
    c_exec: float = Field(1.86, ge=0, description="Per-match execution cost (address match), us")
    fpga_const: float = Field(10.0, ge=0, description="Constant decision time of the FPGA variant, us")


class TimingModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rx_delay: float = Field(4.0, ge=0, description="Receiver pipeline latency, us")
    t_init: float = Field(3.0, ge=0, description="Time to start the interference transmission, us")
    t_interfere: float = Field(26.0, ge=0, description="Interference burst duration, us")
    min_overlap: float = Field(13.0, ge=0, le=16, description="Overlap with a symbol needed to corrupt it, us")
    decision: DecisionCostModel = Field(default_factory=DecisionCostModel)


class Role(str, Enum):
    ATTACKER = "attacker"
    VICTIM = "victim"
    GUARDIAN = "guardian"


class AttackStrategy(str, Enum):
    FIXED_POWER = "fixed_power"
    STEALTHY = "stealthy"
    BRUTE_FORCE = "brute_force"


class TemplateFrameType(str, Enum):
    DATA = "data"
    CONTROL = "control"
    BEACON = "beacon"
    ACK = "ack"


class NodeSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    role: Role
    position: Tuple[float, float]
    tx_power_dbm: float = 0.0
    sensitivity_dbm: float = -94.0
    addr: HexInt = Field(0x0000, ge=0, le=0xFFFF, description="Short MAC address")
    ext_addr: Optional[HexInt] = Field(None, ge=0, lt=1 << 64, description="Extended MAC address")
    rules: List[str] = Field(
        default_factory=list,
        description="Initial chain: gtables lines, or paths to rules files (resolved by the loader)",
    )
    timing: Optional[TimingModel] = None
    jam_power_dbm: Optional[float] = None

    @field_validator("position")
    @classmethod
    def _finite_position(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        for coord in value:
            if not math.isfinite(coord):
                raise ValueError("position must be finite")
        return value

    @model_validator(mode="before")
    @classmethod
    def _guardian_defaults(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("role") in (Role.GUARDIAN, Role.GUARDIAN.value):
            data = dict(data)
            if data.get("timing") is None:
                data["timing"] = TimingModel()
            if data.get("jam_power_dbm") is None:
                data["jam_power_dbm"] = data.get("tx_power_dbm", 0.0)
        return data

    @property
    def extended_address(self) -> int:
        return self.ext_addr if self.ext_addr is not None else 0x00124B0000000000 | self.addr


class FrameTemplate(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    frame_type: TemplateFrameType = TemplateFrameType.DATA
    payload_len: int = Field(15, ge=0, le=100)
    dst_addr: Optional[HexInt] = Field(None, ge=0, le=0xFFFF, description="Override of the destination address")
    nw_ctrl: Optional[HexInt] = Field(None, ge=0, le=0xFFFF)
    asl_cmd: Optional[HexInt] = Field(None, ge=0, le=0xFF)

    @model_validator(mode="after")
    def _payload_room(self) -> "FrameTemplate":
        if self.nw_ctrl is not None and self.payload_len < 2:
            raise ValueError("payload_len must be at least 2 to carry nw_ctrl")
        if self.asl_cmd is not None and self.payload_len < 11:
            raise ValueError("payload_len must be at least 11 to carry asl_cmd")
        return self


class TrafficFlow(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: Optional[str] = None
    src: str
    dst: str
    pan: HexInt = Field(0x0022, ge=0, le=0xFFFF)
    template: FrameTemplate = Field(default_factory=FrameTemplate)
    rate: float = Field(..., gt=0, description="Packets per second")
    window: Tuple[float, float] = Field(..., description="Active window [start_s, end_s)")
    strategy: AttackStrategy = AttackStrategy.FIXED_POWER
    carrier_sense: bool = True

    @model_validator(mode="after")
    def _window(self) -> "TrafficFlow":
        start, end = self.window
        if start < 0 or end <= start:
            raise ValueError(f"flow window {self.window} must be non-empty and non-negative")
        return self


class RuleUpdate(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    time_s: float = Field(..., ge=0)
    guardian: str
    rules: List[str] = Field(default_factory=list)


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rf: RfParams = Field(default_factory=RfParams)
    nodes: List[NodeSpec] = Field(default_factory=list)
    flows: List[TrafficFlow] = Field(default_factory=list)
    rule_updates: List[RuleUpdate] = Field(default_factory=list)
    duration_s: float = Field(..., gt=0)
    seed: int = 0
    reconfig_latency: Optional[float] = Field(
        None, ge=0, description="Rule reconfiguration latency in us; default one frame interval"
    )
    report_interval_s: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _references(self) -> "Scenario":
        ids = [node.id for node in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        roles = {node.id: node.role for node in self.nodes}

        flow_ids = set()
        for i, flow in enumerate(self.flows):
            if flow.src not in roles:
                raise ValueError(f"flow {i}: unknown src {flow.src!r}")
            if flow.dst not in roles:
                raise ValueError(f"flow {i}: unknown dst {flow.dst!r}")
            if roles[flow.src] == Role.GUARDIAN:
                raise ValueError(f"flow {i}: guardians do not originate traffic")
            if roles[flow.dst] != Role.VICTIM:
                raise ValueError(f"flow {i}: dst {flow.dst!r} must be a victim")
            if flow.window[1] > self.duration_s:
                raise ValueError(f"flow {i}: window ends after duration_s")
            flow_id = self.flow_id(i)
            if flow_id in flow_ids:
                raise ValueError(f"duplicate flow id {flow_id!r}")
            flow_ids.add(flow_id)

        self._check_link_distances()

        for update in self.rule_updates:
            if roles.get(update.guardian) != Role.GUARDIAN:
                raise ValueError(f"rule update at {update.time_s}s: {update.guardian!r} is not a guardian")
            if update.time_s > self.duration_s:
                raise ValueError(f"rule update at {update.time_s}s is after duration_s")
        return self

    def _check_link_distances(self) -> None:
        # every link the simulator evaluates needs a positive distance for path loss
        by_id = {node.id: node for node in self.nodes}
        senders = {flow.src for flow in self.flows}
        links = set()
        for node in self.nodes:
            if node.role == Role.GUARDIAN or node.id in senders:
                links.update((node.id, other.id) for other in self.nodes if other.role == Role.VICTIM)
            if node.id in senders:
                links.update((node.id, other.id) for other in self.nodes if other.role == Role.GUARDIAN)
        for a, b in sorted(links):
            if a != b and by_id[a].position == by_id[b].position:
                raise ValueError(f"nodes {a!r} and {b!r} share position {tuple(by_id[a].position)}")

    def flow_id(self, index: int) -> str:
        flow = self.flows[index]
        return flow.id if flow.id is not None else f"flow{index}"

    @property
    def effective_reconfig_latency(self) -> float:
        if self.reconfig_latency is not None:
            return self.reconfig_latency
        if not self.flows:
            return 0.0
        return 1e6 / max(flow.rate for flow in self.flows)


class IntervalRow(BaseModel):
    interval_start_s: float
    flow_id: str
    sent: int = 0
    received: int = 0
    destroyed: int = 0
    below_sensitivity: int = 0
    false_pos: int = 0
    false_neg: int = 0
    jam_airtime_us: float = 0.0


class NodeCounters(BaseModel):
    heard: int = 0
    received: int = 0
    destroyed: int = 0
    below_sensitivity: int = 0
    detected: int = 0
    jams: int = 0
    jam_airtime_us: float = 0.0


class FlowTotals(BaseModel):
    sent: int = 0
    received: int = 0
    destroyed: int = 0
    below_sensitivity: int = 0
    false_pos: int = 0
    false_neg: int = 0
    abstained: int = 0
    jam_airtime_us: float = 0.0


class StatsReport(BaseModel):
    duration_s: float
    seed: int
    rows: List[IntervalRow] = Field(default_factory=list)
    flows: Dict[str, FlowTotals] = Field(default_factory=dict)
    nodes: Dict[str, NodeCounters] = Field(default_factory=dict)
    jam_transmissions: int = 0
    jam_airtime_us: float = 0.0

    @property
    def jam_duty_cycle(self) -> float:
        return self.jam_airtime_us / (self.duration_s * 1e6)
