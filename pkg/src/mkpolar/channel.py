"""BPSK over AWGN with counter-based noise streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Stream tags keep construction noise and simulation noise independent.
STREAM_CONSTRUCTION = 1
STREAM_SIMULATION = 2

CONVENTIONS = ("es_n0", "eb_n0")
# Design and simulation SNRs are Eb/N0 unless stated otherwise.
DEFAULT_CONVENTION = "eb_n0"


def noise_variance(snr_db: float, convention: str = "es_n0", rate: float = 1.0) -> float:
    """Per-dimension noise variance for unit-energy BPSK."""
    if convention == "es_n0":
        return 1.0 / (2.0 * 10.0 ** (snr_db / 10.0))
    if convention == "eb_n0":
        if not 0.0 < rate <= 1.0:
            raise ValueError(f"rate must be in (0, 1], got {rate}")
        return 1.0 / (2.0 * rate * 10.0 ** (snr_db / 10.0))
    raise ValueError(f"unknown SNR convention {convention!r}; expected one of {CONVENTIONS}")


@dataclass(frozen=True)
class SnrPoint:
    snr_db: float
    convention: str = "es_n0"
    rate: float = 1.0

    @property
    def sigma2(self) -> float:
        return noise_variance(self.snr_db, self.convention, self.rate)


def stream(seed: int, tag: int, *counter: int) -> np.random.Generator:
    """Philox generator keyed by ``(seed, tag, *counter)``.

    A chunk of blocks draws from its own stream, so results do not depend on
    how chunks are spread over workers.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag),) + tuple(int(c) for c in counter))
    return np.random.Generator(np.random.Philox(ss))


def modulate(x) -> np.ndarray:
    """Bit 0 -> +1.0, bit 1 -> -1.0."""
    x = np.asarray(x)
    return 1.0 - 2.0 * x.astype(np.float64)


def transmit(symbols, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Add zero-mean Gaussian noise of variance ``sigma2`` (drawn with ``rng.standard_normal``)."""
    if sigma2 < 0:
        raise ValueError("noise variance must be non-negative")
    symbols = np.asarray(symbols, dtype=np.float64)
    return symbols + np.sqrt(sigma2) * rng.standard_normal(symbols.shape)


def llr_from_observation(y, sigma2: float) -> np.ndarray:
    if sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    return 2.0 * np.asarray(y, dtype=np.float64) / sigma2


def hard_demap(y) -> np.ndarray:
    return (np.asarray(y) < 0).astype(np.uint8)
