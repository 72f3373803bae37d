"""Multi-kernel polar codes: kernels, Tanner graph, construction, SC/SCL decoding
and punctured/shortened baselines."""

from .baseline import (
    RateMatchedSpec,
    build_punctured,
    build_shortened,
    complexity_llr_count,
)
from .channel import SnrPoint, llr_from_observation, modulate, noise_variance, transmit
from .codec import Decoder, encode, sc_decode, scl_decode
from .construction import (
    CodeSpec,
    ReliabilityProfile,
    build_frozen_set,
    construct_code,
    enumerate_orders,
    estimate_reliabilities_ga,
    estimate_reliabilities_mc,
    select_kernel_order,
)
from .crc import CrcConfig, attach_crc, check_crc
from .graph import KernelOrder, TannerGraph, build_graph, transformation_matrix
from .kernel import T2, T3, Kernel, boxplus, hard_update, llr_update

__all__ = [
    "T2",
    "T3",
    "CodeSpec",
    "CrcConfig",
    "Decoder",
    "Kernel",
    "KernelOrder",
    "RateMatchedSpec",
    "ReliabilityProfile",
    "SnrPoint",
    "TannerGraph",
    "attach_crc",
    "boxplus",
    "build_frozen_set",
    "build_graph",
    "build_punctured",
    "build_shortened",
    "check_crc",
    "complexity_llr_count",
    "construct_code",
    "encode",
    "enumerate_orders",
    "estimate_reliabilities_ga",
    "estimate_reliabilities_mc",
    "hard_update",
    "llr_from_observation",
    "llr_update",
    "modulate",
    "noise_variance",
    "sc_decode",
    "scl_decode",
    "select_kernel_order",
    "transformation_matrix",
    "transmit",
]
