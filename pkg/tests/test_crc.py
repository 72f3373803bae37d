import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import crc_long_division

from mkpolar.crc import (
    PRESETS,
    CrcConfig,
    attach_crc,
    attach_crc_batch,
    check_crc,
    crc_matrix,
    crc_remainder,
    syndrome_matrix,
)


def _bits(byte):
    return [(byte >> k) & 1 for k in range(7, -1, -1)]


def test_crc8_of_c2():
    crc = CrcConfig.parse("crc8")
    assert crc_remainder(_bits(0xC2), crc).tolist() == _bits(0x40)


@pytest.mark.parametrize("name", sorted(PRESETS))
@given(payload=st.lists(st.integers(0, 1), min_size=1, max_size=80))
def test_remainder_matches_long_division(name, payload):
    crc = CrcConfig.parse(name)
    assert crc_remainder(payload, crc).tolist() == crc_long_division(payload, crc.poly, crc.r)


def test_round_trip_and_single_error_detection():
    crc = CrcConfig.parse("crc11")
    rng = np.random.default_rng(0)
    for _ in range(1000):
        payload = rng.integers(0, 2, 25)
        word = attach_crc(payload, crc, K=36)
        assert word.size == 36
        assert check_crc(word, crc)
        flipped = word.copy()
        flipped[rng.integers(0, 36)] ^= 1
        assert not check_crc(flipped, crc)


def test_crc_must_be_shorter_than_k():
    with pytest.raises(ValueError):
        attach_crc([1, 0], CrcConfig.parse("crc8"), K=8)
    with pytest.raises(ValueError):
        check_crc([1] * 8, CrcConfig.parse("crc8"))


def test_parse():
    assert CrcConfig.parse("0x07/8") == CrcConfig(7, 8)
    assert CrcConfig.parse("CRC8") == CrcConfig(7, 8)
    assert CrcConfig(0x21, 6).label == "0x21/6"
    for bad in ("crc99", "7", "0x1ff/8"):
        with pytest.raises(ValueError):
            CrcConfig.parse(bad)


def test_matrices_agree_with_bitwise_routines():
    crc = CrcConfig.parse("crc6")
    rng = np.random.default_rng(1)
    payload = rng.integers(0, 2, (300, 18)).astype(np.uint8)
    batch = attach_crc_batch(payload, crc)
    m = crc_matrix(18, crc).astype(np.int64)
    syn = syndrome_matrix(24, crc).astype(np.int64)
    for p, w in zip(payload, batch):
        assert np.array_equal(w, attach_crc(p, crc))
        assert np.array_equal((p @ m) & 1, crc_remainder(p, crc))
        assert not ((w @ syn) & 1).any()
    bad = batch.copy()
    bad[:, 3] ^= 1
    assert ((bad.astype(np.int64) @ syn) & 1).any(axis=1).all()
