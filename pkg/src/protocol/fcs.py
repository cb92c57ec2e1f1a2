"""
IEEE 802.15.4 frame check sequence.

CRC-16 with generator x^16 + x^12 + x^5 + 1, zero initial value, bits
processed least significant first (the reflected form, 0x8408), no final XOR.
"""

from array import array
from typing import Iterable

POLY = 0x1021
POLY_REFLECTED = 0x8408


def _build_table() -> array:
    table = array('H')
    for byte in range(256):
        crc = byte
        for _ in range(8):
            if crc & 1:
                crc = (crc >> 1) ^ POLY_REFLECTED
            else:
                crc >>= 1
        table.append(crc)
    return table


TABLE = _build_table()


def compute_fcs(mpdu_without_fcs: Iterable[int]) -> int:
    """Table-driven FCS over the MPDU (MAC header + payload)."""
    crc = 0
    for byte in bytes(mpdu_without_fcs):
        crc = TABLE[(crc ^ byte) & 0xFF] ^ (crc >> 8)
    return crc


def _reflect(value: int, width: int) -> int:
    result = 0
    for _ in range(width):
        result = (result << 1) | (value & 1)
        value >>= 1
    return result


def compute_fcs_bitwise(mpdu_without_fcs: Iterable[int]) -> int:
    """Long division, most significant bit first, over bit-reflected input.

    Shares nothing with the table path except the generator polynomial, so the
    two can check each other.
    """
    crc = 0
    for byte in bytes(mpdu_without_fcs):
        crc ^= _reflect(byte, 8) << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ POLY) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return _reflect(crc, 16)
