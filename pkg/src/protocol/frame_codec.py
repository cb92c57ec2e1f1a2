"""
IEEE 802.15.4 (2.4 GHz O-QPSK PHY) frame codec.

Wire layout, 1-indexed over the whole frame:

    1-4   preamble (4 x 0x00)
    5     SFD (0xA7)
    6     PHR (MPDU length, 7 bits)
    7-8   frame control field (little endian)
    9     sequence number
    10..  addressing fields as dictated by the FCF, then payload, then FCS
"""

import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from functools import cached_property
from typing import ClassVar, Dict, Optional, Tuple

from .fcs import compute_fcs
from ..utils.errors import FrameParseError, FrameValidationError

PREAMBLE = b"\x00\x00\x00\x00"
SFD = 0xA7
SHR_PHR_LEN = 6
MAX_PHY_LEN = 127
FCS_LEN = 2
US_PER_SYMBOL = 16
US_PER_BYTE = 2 * US_PER_SYMBOL

BROADCAST_ADDR = 0xFFFF
BROADCAST_PAN = 0xFFFF

# ZigBee fields inside the MAC payload (0-based payload indices)
NW_CTRL_INDEX = 0
# NWK header (fc 2, dst 2, src 2, radius 1, seq 1), APS frame control, APS counter
ASL_CMD_INDEX = 10


class FrameType(IntEnum):
    BEACON = 0
    DATA = 1
    ACK = 2
    COMMAND = 3


class AddrMode(IntEnum):
    NONE = 0
    RESERVED = 1
    SHORT = 2
    EXTENDED = 3


FCF_TYPE_MASK = 0x0007
FCF_SECURITY = 0x0008
FCF_FRAME_PENDING = 0x0010
FCF_ACK_REQUEST = 0x0020
FCF_PAN_COMPRESSION = 0x0040
FCF_DST_MODE_SHIFT = 10
FCF_VERSION_SHIFT = 12
FCF_SRC_MODE_SHIFT = 14

_ADDR_LEN = {AddrMode.NONE: 0, AddrMode.SHORT: 2, AddrMode.EXTENDED: 8}


def build_fcf(
    frame_type: FrameType,
    dst_mode: AddrMode = AddrMode.NONE,
    src_mode: AddrMode = AddrMode.NONE,
    pan_compression: bool = False,
    ack_request: bool = False,
    frame_version: int = 0,
) -> int:
    """Assemble a 16-bit frame control field."""
    fcf = int(frame_type) & FCF_TYPE_MASK
    if ack_request:
        fcf |= FCF_ACK_REQUEST
    if pan_compression:
        fcf |= FCF_PAN_COMPRESSION
    fcf |= (int(dst_mode) & 0x3) << FCF_DST_MODE_SHIFT
    fcf |= (frame_version & 0x3) << FCF_VERSION_SHIFT
    fcf |= (int(src_mode) & 0x3) << FCF_SRC_MODE_SHIFT
    return fcf


@dataclass(frozen=True)
class AddressingLayout:
    dst_mode: AddrMode
    src_mode: AddrMode
    dst_pan: bool
    src_pan: bool

    @property
    def length(self) -> int:
        return (
            (2 if self.dst_pan else 0) + _ADDR_LEN[self.dst_mode]
            + (2 if self.src_pan else 0) + _ADDR_LEN[self.src_mode]
        )


def addressing_layout(fcf: int) -> AddressingLayout:
    """Which addressing fields an FCF calls for. Raises ValueError on combinations the codec rejects."""
    dst_mode = AddrMode((fcf >> FCF_DST_MODE_SHIFT) & 0x3)
    src_mode = AddrMode((fcf >> FCF_SRC_MODE_SHIFT) & 0x3)
    if AddrMode.RESERVED in (dst_mode, src_mode):
        raise ValueError("reserved addressing mode")
    compressed = bool(fcf & FCF_PAN_COMPRESSION)
    if compressed and (dst_mode == AddrMode.NONE or src_mode == AddrMode.NONE):
        raise ValueError("PAN ID compression requires both addresses")
    return AddressingLayout(
        dst_mode=dst_mode,
        src_mode=src_mode,
        dst_pan=dst_mode != AddrMode.NONE,
        src_pan=src_mode != AddrMode.NONE and not compressed,
    )


class Selector(str, Enum):
    SFD = "sfd"
    PHR = "phr"
    FCF = "fcf"
    SEQ = "seq"
    DST_PAN = "dst_pan"
    DST_ADDR = "dst_addr"
    SRC_PAN = "src_pan"
    SRC_ADDR = "src_addr"
    FRAME_TYPE = "frame_type"
    PAYLOAD_BYTE = "payload_byte"
    NW_CTRL = "nw_ctrl"
    ASL_CMD = "asl_cmd"
    RSS = "rss"


@dataclass(frozen=True)
class FieldRef:
    selector: Selector
    index: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "selector", Selector(self.selector))
        if self.selector == Selector.PAYLOAD_BYTE:
            if self.index is None or self.index < 0:
                raise FrameValidationError("payload_byte", "index must be a non-negative integer")
        elif self.index is not None:
            raise FrameValidationError(self.selector.value, "only payload_byte takes an index")

    @classmethod
    def payload_byte(cls, index: int) -> "FieldRef":
        return cls(Selector.PAYLOAD_BYTE, index)

    def __str__(self) -> str:
        if self.selector == Selector.PAYLOAD_BYTE:
            return f"payload_byte({self.index})"
        return self.selector.value


@dataclass(frozen=True)
class Frame:
    """A parsed or to-be-serialized 802.15.4 frame.

    ``fcs`` and ``rx_meta`` are metadata and take no part in equality; ``corrupt``
    is set by the decoder when the received FCS does not match the MPDU.
    """

    fcf: int
    seq: int
    dst_pan: Optional[int] = None
    dst_addr: Optional[int] = None
    src_pan: Optional[int] = None
    src_addr: Optional[int] = None
    payload: bytes = b""
    sfd: int = SFD
    corrupt: bool = False
    fcs: Optional[int] = field(default=None, compare=False)
    rx_meta: Optional[float] = field(default=None, compare=False)

    preamble_len: ClassVar[int] = len(PREAMBLE)

    def __post_init__(self):
        object.__setattr__(self, "payload", bytes(self.payload))

    @property
    def frame_type(self) -> FrameType:
        return FrameType(self.fcf & FCF_TYPE_MASK)

    @cached_property
    def layout(self) -> AddressingLayout:
        try:
            return addressing_layout(self.fcf)
        except ValueError as e:
            raise FrameValidationError("fcf", str(e))

    @property
    def mhr_len(self) -> int:
        return 3 + self.layout.length

    @property
    def phy_len(self) -> int:
        return self.mhr_len + len(self.payload) + FCS_LEN

    @property
    def total_bytes(self) -> int:
        return SHR_PHR_LEN + self.phy_len

    @property
    def airtime_us(self) -> float:
        return frame_airtime(self.total_bytes)

    @property
    def payload_offset(self) -> int:
        """1-indexed whole-frame offset of the first payload byte."""
        return SHR_PHR_LEN + self.mhr_len + 1

    @cached_property
    def offsets(self) -> Dict[str, Tuple[int, int]]:
        """First and last 1-indexed offset of every field present in this frame."""
        spans: Dict[str, Tuple[int, int]] = {
            "preamble": (1, 4),
            "sfd": (5, 5),
            "phr": (6, 6),
            "fcf": (7, 8),
            "seq": (9, 9),
        }
        pos = 10
        layout = self.layout
        for name, present, size in (
            ("dst_pan", layout.dst_pan, 2),
            ("dst_addr", layout.dst_mode != AddrMode.NONE, _ADDR_LEN[layout.dst_mode]),
            ("src_pan", layout.src_pan, 2),
            ("src_addr", layout.src_mode != AddrMode.NONE, _ADDR_LEN[layout.src_mode]),
        ):
            if present:
                spans[name] = (pos, pos + size - 1)
                pos += size
        if self.payload:
            spans["payload"] = (pos, pos + len(self.payload) - 1)
            pos += len(self.payload)
        spans["fcs"] = (pos, pos + 1)
        return spans

    @property
    def nw_ctrl(self) -> Optional[int]:
        if len(self.payload) < NW_CTRL_INDEX + 2:
            return None
        return struct.unpack_from("<H", self.payload, NW_CTRL_INDEX)[0]

    @property
    def asl_cmd(self) -> Optional[int]:
        if len(self.payload) <= ASL_CMD_INDEX:
            return None
        return self.payload[ASL_CMD_INDEX]

    @cached_property
    def wire(self) -> bytes:
        return encode_frame(self)


def _check_width(name: str, value: Optional[int], bits: int) -> None:
    if value is not None and not 0 <= value < (1 << bits):
        raise FrameValidationError(name, f"value {value:#x} does not fit in {bits} bits")


def _validate(frame: Frame) -> AddressingLayout:
    _check_width("fcf", frame.fcf, 16)
    _check_width("seq", frame.seq, 8)
    _check_width("sfd", frame.sfd, 8)
    if frame.fcf & FCF_TYPE_MASK > FrameType.COMMAND:
        raise FrameValidationError("fcf", f"reserved frame type {frame.fcf & FCF_TYPE_MASK}")
    layout = frame.layout

    expected = {
        "dst_pan": (layout.dst_pan, 16),
        "dst_addr": (layout.dst_mode != AddrMode.NONE, 8 * _ADDR_LEN[layout.dst_mode]),
        "src_pan": (layout.src_pan, 16),
        "src_addr": (layout.src_mode != AddrMode.NONE, 8 * _ADDR_LEN[layout.src_mode]),
    }
    for name, (present, bits) in expected.items():
        value = getattr(frame, name)
        if present and value is None:
            raise FrameValidationError(name, "required by the frame control field but missing")
        if not present and value is not None:
            raise FrameValidationError(name, "set but the frame control field has no room for it")
        _check_width(name, value, bits)

    if frame.phy_len > MAX_PHY_LEN:
        raise FrameValidationError("phy_len", f"{frame.phy_len} exceeds {MAX_PHY_LEN} bytes")
    return layout


def _pack_addr(mode: AddrMode, value: int) -> bytes:
    return struct.pack("<Q" if mode == AddrMode.EXTENDED else "<H", value)


def mpdu_without_fcs(frame: Frame) -> bytes:
    layout = _validate(frame)
    parts = [struct.pack("<HB", frame.fcf, frame.seq)]
    if layout.dst_pan:
        parts.append(struct.pack("<H", frame.dst_pan))
    if layout.dst_mode != AddrMode.NONE:
        parts.append(_pack_addr(layout.dst_mode, frame.dst_addr))
    if layout.src_pan:
        parts.append(struct.pack("<H", frame.src_pan))
    if layout.src_mode != AddrMode.NONE:
        parts.append(_pack_addr(layout.src_mode, frame.src_addr))
    parts.append(frame.payload)
    return b"".join(parts)


def encode_frame(frame: Frame) -> bytes:
    """Serialize SHR + PHR + MHR + payload + FCS. The FCS is always recomputed."""
    body = mpdu_without_fcs(frame)
    fcs = compute_fcs(body)
    return PREAMBLE + bytes([frame.sfd, len(body) + FCS_LEN]) + body + struct.pack("<H", fcs)


def decode_frame(data: bytes) -> Frame:
    """Parse a whole frame. A wrong FCS is reported through ``Frame.corrupt``, not raised."""
    data = bytes(data)
    if len(data) < SHR_PHR_LEN:
        raise FrameParseError(len(data) + 1, f"truncated: {len(data)} bytes, need at least {SHR_PHR_LEN}")
    for i, byte in enumerate(data[:4]):
        if byte != 0x00:
            raise FrameParseError(i + 1, f"bad preamble byte {byte:#04x}")
    if data[4] != SFD:
        raise FrameParseError(5, f"bad start-of-frame delimiter {data[4]:#04x}")

    phy_len = data[5]
    if phy_len > MAX_PHY_LEN:
        raise FrameParseError(6, f"PHR length {phy_len} exceeds {MAX_PHY_LEN}")
    if phy_len < 3 + FCS_LEN:
        raise FrameParseError(6, f"PHR length {phy_len} too short for FCF, sequence number and FCS")
    end = SHR_PHR_LEN + phy_len
    if len(data) < end:
        raise FrameParseError(len(data) + 1, f"truncated: PHR announces {phy_len} bytes, got {len(data) - SHR_PHR_LEN}")
    if len(data) > end:
        raise FrameParseError(end + 1, f"{len(data) - end} trailing bytes after FCS")

    fcf, seq = struct.unpack_from("<HB", data, 6)
    if fcf & FCF_TYPE_MASK > FrameType.COMMAND:
        raise FrameParseError(7, f"reserved frame type {fcf & FCF_TYPE_MASK}")
    try:
        layout = addressing_layout(fcf)
    except ValueError as e:
        raise FrameParseError(7, f"unsupported addressing in FCF {fcf:#06x}: {e}")

    fcs_start = end - FCS_LEN
    pos = 9
    values: Dict[str, Optional[int]] = {}

    def take(name: str, size: int) -> int:
        nonlocal pos
        if pos + size > fcs_start:
            raise FrameParseError(pos + 1, f"truncated {name}: needs {size} bytes before FCS")
        value = int.from_bytes(data[pos:pos + size], "little")
        pos += size
        return value

    values["dst_pan"] = take("dst_pan", 2) if layout.dst_pan else None
    values["dst_addr"] = take("dst_addr", _ADDR_LEN[layout.dst_mode]) if layout.dst_mode != AddrMode.NONE else None
    values["src_pan"] = take("src_pan", 2) if layout.src_pan else None
    values["src_addr"] = take("src_addr", _ADDR_LEN[layout.src_mode]) if layout.src_mode != AddrMode.NONE else None

    payload = data[pos:fcs_start]
    fcs = struct.unpack_from("<H", data, fcs_start)[0]
    corrupt = fcs != compute_fcs(data[SHR_PHR_LEN:fcs_start])

    return Frame(
        fcf=fcf,
        seq=seq,
        payload=payload,
        sfd=data[4],
        corrupt=corrupt,
        fcs=fcs,
        **values,
    )


def frame_airtime(total_frame_bytes: int) -> float:
    """Airtime in microseconds: two 16 us symbols per byte."""
    if total_frame_bytes < 1:
        raise FrameValidationError("total_frame_bytes", "must be at least 1")
    return float(total_frame_bytes * US_PER_BYTE)


def _src_pan_compressed(frame: Frame) -> bool:
    layout = frame.layout
    return layout.src_mode != AddrMode.NONE and not layout.src_pan


def field_offset(frame_layout: Frame, field_ref: FieldRef) -> int:
    """1-indexed offset of the LAST byte of a field, i.e. the byte after which a rule on it can fire."""
    sel = field_ref.selector
    spans = frame_layout.offsets
    if sel == Selector.RSS:
        # RSS is sampled while the SHR is received
        return spans["sfd"][1]
    if sel == Selector.FRAME_TYPE:
        # frame type bits travel in the first FCF byte
        return spans["fcf"][0]
    if sel == Selector.PAYLOAD_BYTE:
        if field_ref.index >= len(frame_layout.payload):
            raise FrameValidationError(
                str(field_ref), f"payload has only {len(frame_layout.payload)} bytes"
            )
        return frame_layout.payload_offset + field_ref.index
    if sel == Selector.NW_CTRL:
        if frame_layout.nw_ctrl is None:
            raise FrameValidationError("nw_ctrl", "payload too short for the network control field")
        return frame_layout.payload_offset + NW_CTRL_INDEX + 1
    if sel == Selector.ASL_CMD:
        if frame_layout.asl_cmd is None:
            raise FrameValidationError("asl_cmd", "payload too short for the APS command identifier")
        return frame_layout.payload_offset + ASL_CMD_INDEX
    if sel == Selector.SRC_PAN and _src_pan_compressed(frame_layout):
        # with PAN ID compression the source PAN is the destination PAN
        return spans["dst_pan"][1]
    if sel.value not in spans:
        raise FrameValidationError(sel.value, "not present in this frame layout")
    return spans[sel.value][1]


def field_value(frame: Frame, field_ref: FieldRef) -> Optional[Tuple[int, int]]:
    """(value, bit width) of a field, or None when the frame does not carry it."""
    sel = field_ref.selector
    if sel == Selector.SFD:
        return frame.sfd, 8
    if sel == Selector.PHR:
        return frame.phy_len, 8
    if sel == Selector.FCF:
        return frame.fcf, 16
    if sel == Selector.SEQ:
        return frame.seq, 8
    if sel == Selector.FRAME_TYPE:
        return int(frame.frame_type), 3
    if sel == Selector.SRC_PAN and _src_pan_compressed(frame):
        return frame.dst_pan, 16
    if sel in (Selector.DST_PAN, Selector.SRC_PAN):
        value = getattr(frame, sel.value)
        return None if value is None else (value, 16)
    if sel == Selector.DST_ADDR:
        if frame.dst_addr is None:
            return None
        return frame.dst_addr, 8 * _ADDR_LEN[frame.layout.dst_mode]
    if sel == Selector.SRC_ADDR:
        if frame.src_addr is None:
            return None
        return frame.src_addr, 8 * _ADDR_LEN[frame.layout.src_mode]
    if sel == Selector.PAYLOAD_BYTE:
        if field_ref.index >= len(frame.payload):
            return None
        return frame.payload[field_ref.index], 8
    if sel == Selector.NW_CTRL:
        return None if frame.nw_ctrl is None else (frame.nw_ctrl, 16)
    if sel == Selector.ASL_CMD:
        return None if frame.asl_cmd is None else (frame.asl_cmd, 8)
    return None


def frame_to_hex(frame: Frame) -> str:
    return encode_frame(frame).hex().upper()


def frame_from_hex(text: str) -> Frame:
    cleaned = text.strip()
    try:
        data = bytes.fromhex(cleaned)
    except ValueError:
        raise FrameParseError(1, f"not a hex string: {cleaned[:16]!r}")
    return decode_frame(data)


def intra_pan_data_frame(
    pan: int,
    dst_addr: int,
    src_addr: int,
    seq: int,
    payload: bytes = b"",
    ack_request: bool = False,
) -> Frame:
    """Data frame with short addresses and PAN ID compression (the layout used throughout the experiments)."""
    fcf = build_fcf(
        FrameType.DATA,
        dst_mode=AddrMode.SHORT,
        src_mode=AddrMode.SHORT,
        pan_compression=True,
        ack_request=ack_request,
    )
    return Frame(fcf=fcf, seq=seq & 0xFF, dst_pan=pan, dst_addr=dst_addr, src_addr=src_addr, payload=payload)


def association_request(pan: int, coordinator: int, src_ext_addr: int, seq: int, payload: bytes = b"\x01\x8e") -> Frame:
    """MAC command frame laid out like an association request (FCF 0xC823)."""
    fcf = build_fcf(
        FrameType.COMMAND,
        dst_mode=AddrMode.SHORT,
        src_mode=AddrMode.EXTENDED,
        ack_request=True,
    )
    return Frame(
        fcf=fcf,
        seq=seq & 0xFF,
        dst_pan=pan,
        dst_addr=coordinator,
        src_pan=BROADCAST_PAN,
        src_addr=src_ext_addr,
        payload=payload,
    )


def ack_frame(seq: int) -> Frame:
    return Frame(fcf=build_fcf(FrameType.ACK), seq=seq & 0xFF)
