import numpy as np

from src.protocol.fcs import TABLE, compute_fcs, compute_fcs_bitwise


def test_check_value():
    assert compute_fcs(b"123456789") == 0x2189
    assert compute_fcs_bitwise(b"123456789") == 0x2189


def test_empty_input():
    assert compute_fcs(b"") == 0
    assert compute_fcs_bitwise(b"") == 0


def test_table_shape():
    assert len(TABLE) == 256
    assert TABLE[0] == 0
    assert TABLE[0x80] == 0x8408


def test_table_matches_bitwise_on_random_inputs():
    rng = np.random.default_rng(1234)
    for _ in range(10_000):
        length = int(rng.integers(0, 126))
        data = rng.integers(0, 256, size=length, dtype=np.uint8).tobytes()
        assert compute_fcs(data) == compute_fcs_bitwise(data)

