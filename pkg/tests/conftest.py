import pytest

from src.protocol.frame_codec import association_request, intra_pan_data_frame
from src.utils.schemas import RfParams

PROTECTION_RULE_LINES = [
    "gtables -A -m dst --pan 0x22 --addr 0xFFFF -m type --ctrl -j DROP",
    "gtables -A -m dst --addr 0xFFFF --pan 0x22 -j DROP",
    "gtables -A -m dst --pan 0xACAC -m nw_ctrl 0x0008 -m asl_cmd 0x01 -j DROP",
    "gtables -A -m type --control -m dst --pan 0xACAC -m RSS --above -80 -j DROP",
    "gtables -A -m src --addr 0x1111 --pan 0xACAC -j DROP",
]


def ota_payload(nw_ctrl: int = 0x0008, asl_cmd: int = 0x01, length: int = 15) -> bytes:
    payload = bytearray(length)
    payload[0:2] = nw_ctrl.to_bytes(2, "little")
    payload[10] = asl_cmd
    return bytes(payload)


@pytest.fixture
def rf():
    return RfParams()


@pytest.fixture
def protection_rule_lines():
    return list(PROTECTION_RULE_LINES)


@pytest.fixture
def broadcast_frame():
    # 32 bytes on air: 6 SHR/PHR + 9 MHR + 15 payload + 2 FCS
    return intra_pan_data_frame(0x0022, 0xFFFF, 0x0001, 7, bytes(15))


@pytest.fixture
def ota_frame():
    return intra_pan_data_frame(0xACAC, 0x2001, 0x0BAD, 1, ota_payload())


@pytest.fixture
def association_frame():
    return association_request(0xACAC, 0x0000, 0x00124B0000000F01, 3)
