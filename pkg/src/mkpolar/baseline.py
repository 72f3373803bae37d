"""Length-matched punctured and shortened Arikan codes used as baselines.

Both schemes start from a mother code of length ``N' = 2^ceil(log2 N)`` with
the all-T2 transform and drop ``N' - N`` coded positions:

* ``punctured_qup``: quasi-uniform puncturing, i.e. the bit-reversal images of
  ``0 .. N'-N-1``. Punctured bits are not sent; the decoder sees LLR 0.
* ``shortened_wl``: the last ``N' - N`` coded positions. The transform is lower
  triangular, so freezing the same input positions forces those coded bits to
  0 and the decoder sees LLR +inf.

The frozen set is then re-derived by genie-aided Monte Carlo with the pattern
in effect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import DEFAULT_CONVENTION
from .codec import encode as _encode
from .codec import llr_ops_per_decode
from .construction import (
    CodeSpec,
    ReliabilityProfile,
    build_frozen_set,
    dump_code,
    estimate_reliabilities_mc,
    load_code,
)
from .crc import CrcConfig
from .graph import KernelOrder

SCHEMES = ("punctured_qup", "shortened_wl")


def bit_reverse(i: int, bits: int) -> int:
    return int(format(i, f"0{bits}b")[::-1], 2) if bits else 0


def mother_length(target_N: int) -> int:
    if target_N < 2:
        raise ValueError("target length must be at least 2")
    return 1 << (target_N - 1).bit_length()


@dataclass(frozen=True, eq=False)
class RateMatchedSpec:
    target_N: int
    K: int
    scheme: str
    pattern: tuple[int, ...]  # dropped mother coded positions, sorted
    mother: CodeSpec
    profile: ReliabilityProfile | None = None

    @property
    def mother_N(self) -> int:
        return self.mother.N

    @property
    def N(self) -> int:
        return self.target_N

    @property
    def sent(self) -> np.ndarray:
        """Mother positions that are transmitted, ascending."""
        keep = np.ones(self.mother_N, dtype=bool)
        keep[list(self.pattern)] = False
        return np.flatnonzero(keep)

    @property
    def fill_llr(self) -> float:
        return 0.0 if self.scheme == "punctured_qup" else math.inf

    def encode(self, info) -> np.ndarray:
        """Transmitted ``target_N`` coded bits (single vector or batch)."""
        return _encode(self.mother, info)[..., self.sent]

    def mother_llrs(self, llrs) -> np.ndarray:
        """Expand received LLRs to mother length, filling the dropped positions."""
        llrs = np.asarray(llrs, dtype=np.float64)
        if llrs.shape[-1] != self.target_N:
            raise ValueError(f"expected {self.target_N} LLRs, got {llrs.shape[-1]}")
        out = np.full(llrs.shape[:-1] + (self.mother_N,), self.fill_llr)
        out[..., self.sent] = llrs
        return out


def pattern_for(scheme: str, target_N: int) -> tuple[int, ...]:
    Np = mother_length(target_N)
    if Np == target_N:
        raise ValueError(f"N={target_N} is a power of two; use a plain polar code")
    m = Np - target_N
    if scheme == "punctured_qup":
        bits = Np.bit_length() - 1
        return tuple(sorted(bit_reverse(i, bits) for i in range(m)))
    if scheme == "shortened_wl":
        return tuple(range(target_N, Np))
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def _build(scheme, target_N, K, design_snr_db, mc_iterations, seed, crc, workers, convention):
    pattern = pattern_for(scheme, target_N)
    Np = mother_length(target_N)
    if not 1 <= K <= target_N:
        raise ValueError(f"K must be in [1, {target_N}], got {K}")
    order = KernelOrder.from_sizes([2] * (Np.bit_length() - 1))
    kw = {"erased": list(pattern)} if scheme == "punctured_qup" else {"known": list(pattern)}
    profile = estimate_reliabilities_mc(
        order, design_snr_db, mc_iterations, seed, workers=workers,
        convention=convention, rate=K / target_N, **kw,
    )
    forced = pattern if scheme == "shortened_wl" else ()
    frozen = build_frozen_set(profile, K, forced=forced)
    mother = CodeSpec(K, order, frozen, float(design_snr_db), crc)
    return RateMatchedSpec(target_N, K, scheme, pattern, mother, profile)


def build_punctured(
    target_N: int,
    K: int,
    design_snr_db: float = 2.0,
    mc_iterations: int = 1_000_000,
    seed: int = 0,
    crc: CrcConfig | None = None,
    workers: int = 1,
    convention: str = DEFAULT_CONVENTION,
) -> RateMatchedSpec:
    return _build("punctured_qup", target_N, K, design_snr_db, mc_iterations, seed, crc, workers, convention)


def build_shortened(
    target_N: int,
    K: int,
    design_snr_db: float = 2.0,
    mc_iterations: int = 1_000_000,
    seed: int = 0,
    crc: CrcConfig | None = None,
    workers: int = 1,
    convention: str = DEFAULT_CONVENTION,
) -> RateMatchedSpec:
    return _build("shortened_wl", target_N, K, design_snr_db, mc_iterations, seed, crc, workers, convention)


def complexity_llr_count(spec) -> int:
    """LLRs per SC pass: ``N*s`` for a multi-kernel code, ``N' log2 N'`` on the mother graph."""
    if isinstance(spec, RateMatchedSpec):
        Np = spec.mother_N
        return Np * (Np.bit_length() - 1)
    return spec.N * spec.order.s


def measured_llr_count(spec) -> int:
    """Same quantity, counted from the decoder schedule."""
    code = spec.mother if isinstance(spec, RateMatchedSpec) else spec
    return llr_ops_per_decode(code.order)


def dump_pattern(spec: RateMatchedSpec) -> str:
    """Mother-code profile and frozen flags plus the dropped positions.

    Uses the frozen-set text layout; the pattern goes in a ``# pattern`` line.
    """
    extra = {"scheme": spec.scheme, "target_N": spec.target_N}
    text = dump_code(spec.mother, spec.profile, extra)
    return text + "# pattern " + " ".join(str(p) for p in spec.pattern) + "\n"


def load_pattern(text: str) -> RateMatchedSpec:
    mother, profile, meta = load_code(text)
    pattern = ()
    for line in text.splitlines():
        if line.startswith("# pattern"):
            pattern = tuple(int(v) for v in line.split()[2:])
    scheme = meta.get("scheme")
    if scheme not in SCHEMES:
        raise ValueError(f"not a rate-matched code description (scheme={scheme!r})")
    target_N = int(meta["target_N"])
    if len(pattern) != mother.N - target_N:
        raise ValueError("pattern size does not match the mother and target lengths")
    return RateMatchedSpec(target_N, mother.K, scheme, pattern, mother, profile)
