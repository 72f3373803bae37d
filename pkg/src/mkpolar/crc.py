"""Cyclic redundancy check over bit vectors (MSB first, zero initial register)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PRESETS = {
    "crc6": (0x21, 6),
    "crc8": (0x07, 8),
    "crc11": (0x621, 11),
    "crc16": (0x1021, 16),
    "crc24c": (0xB2B117, 24),
}


@dataclass(frozen=True)
class CrcConfig:
    """Generator ``x^r + poly``; ``poly`` holds the low ``r`` coefficients."""

    poly: int
    r: int

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("CRC length must be positive")
        if not 0 <= self.poly < (1 << self.r):
            raise ValueError(f"polynomial 0x{self.poly:x} does not fit in {self.r} bits")

    @classmethod
    def parse(cls, text: str) -> CrcConfig:
        """Accept a preset name (``crc8``) or ``poly/r`` such as ``0x07/8``."""
        text = text.strip().lower()
        if text in PRESETS:
            return cls(*PRESETS[text])
        try:
            poly, r = text.split("/")
            return cls(int(poly, 0), int(r))
        except ValueError:
            raise ValueError(f"cannot parse CRC config {text!r}") from None

    @property
    def label(self) -> str:
        return f"0x{self.poly:x}/{self.r}"

    def generator_bits(self) -> np.ndarray:
        """Coefficients of ``x^r + poly`` from the highest degree down."""
        full = (1 << self.r) | self.poly
        return np.array([(full >> k) & 1 for k in range(self.r, -1, -1)], dtype=np.uint8)


def crc_remainder(bits, crc: CrcConfig) -> np.ndarray:
    """Remainder of ``bits(x) * x^r`` divided by the generator, as ``r`` bits."""
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1) & 1
    g = crc.generator_bits()
    buf = np.concatenate([bits, np.zeros(crc.r, dtype=np.uint8)])
    for i in range(bits.size):
        if buf[i]:
            buf[i : i + crc.r + 1] ^= g
    return buf[bits.size :].copy()


def attach_crc(payload, crc: CrcConfig, K: int | None = None) -> np.ndarray:
    """Append the CRC remainder to ``payload``.

    If ``K`` (total information length) is given, ``crc.r < K`` is enforced.
    """
    if K is not None and crc.r >= K:
        raise ValueError(f"CRC length {crc.r} must be smaller than K={K}")
    payload = np.asarray(payload, dtype=np.uint8).reshape(-1)
    return np.concatenate([payload, crc_remainder(payload, crc)])


def check_crc(bits, crc: CrcConfig) -> bool:
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if bits.size <= crc.r:
        raise ValueError("bit vector is not longer than the CRC")
    g = crc.generator_bits()
    buf = bits.copy()
    for i in range(bits.size - crc.r):
        if buf[i]:
            buf[i : i + crc.r + 1] ^= g
    return not buf[-crc.r :].any()


def syndrome_matrix(n_bits: int, crc: CrcConfig) -> np.ndarray:
    """``M`` such that ``bits @ M % 2`` is the division remainder of ``n_bits``-long words.

    The zero-initialised CRC is linear, so row ``k`` is the remainder of the unit
    word ``e_k``. Used to check many candidates at once.
    """
    g = crc.generator_bits()
    out = np.zeros((n_bits, crc.r), dtype=np.uint8)
    for k in range(n_bits):
        buf = np.zeros(n_bits, dtype=np.uint8)
        buf[k] = 1
        for i in range(n_bits - crc.r):
            if buf[i]:
                buf[i : i + crc.r + 1] ^= g
        out[k] = buf[-crc.r :]
    return out


def crc_matrix(n_payload: int, crc: CrcConfig) -> np.ndarray:
    """``M`` with ``payload @ M % 2`` equal to the CRC of each ``n_payload``-bit row."""
    out = np.zeros((n_payload, crc.r), dtype=np.uint8)
    for k in range(n_payload):
        e = np.zeros(n_payload, dtype=np.uint8)
        e[k] = 1
        out[k] = crc_remainder(e, crc)
    return out


def attach_crc_batch(payload, crc: CrcConfig) -> np.ndarray:
    payload = np.asarray(payload, dtype=np.uint8)
    m = crc_matrix(payload.shape[-1], crc).astype(np.int64)
    return np.concatenate([payload, ((payload.astype(np.int64) @ m) & 1).astype(np.uint8)], axis=-1)
