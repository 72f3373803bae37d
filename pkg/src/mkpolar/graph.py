"""Kernel orders, stage permutations and the staged Tanner graph.

Stage 1 is the channel-side stage. Wiring is 0-based: stage-(i-1) position
``j`` feeds stage-i position ``P_i[j]`` and channel position ``j`` feeds stage-1
position ``P_1[j]``. Box ``b`` of stage ``i`` owns positions
``[b*n_i, (b+1)*n_i)`` on both of its sides.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kernel import Kernel, kernel_for_size

MATRIX_CAP = 4096


@dataclass(frozen=True)
class KernelOrder:
    """Ordered kernels ``(T_{n_1}, ..., T_{n_s})`` with ``G_N = T_{n_1} x ... x T_{n_s}``."""

    kernels: tuple[Kernel, ...]

    def __post_init__(self):
        kernels = tuple(self.kernels)
        if not kernels:
            raise ValueError("a kernel order needs at least one kernel")
        object.__setattr__(self, "kernels", kernels)

    @classmethod
    def from_sizes(cls, sizes: Iterable[int]) -> KernelOrder:
        return cls(tuple(kernel_for_size(int(n)) for n in sizes))

    @classmethod
    def parse(cls, text: str) -> KernelOrder:
        """Parse ``"T3xT2xT2"`` (or sizes such as ``"3,2,2"``)."""
        text = text.strip()
        if "T" in text:
            parts = [p for p in text.replace(" ", "").split("x") if p]
            return cls.from_sizes(int(p.lstrip("T")) for p in parts)
        return cls.from_sizes(int(p) for p in text.replace(" ", ",").split(",") if p)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(k.size for k in self.kernels)

    @property
    def s(self) -> int:
        return len(self.kernels)

    @property
    def N(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def partial_products(self) -> tuple[int, ...]:
        """``(N_1, ..., N_{s+1})`` with ``N_1 = 1`` and ``N_{s+1} = N``."""
        out = [1]
        for n in self.sizes:
            out.append(out[-1] * n)
        return tuple(out)

    @property
    def label(self) -> str:
        return "x".join(k.name for k in self.kernels)

    def __str__(self):
        return self.label


def is_permutation(p: Sequence[int]) -> bool:
    p = np.asarray(p)
    return p.ndim == 1 and np.array_equal(np.sort(p), np.arange(p.size))


def invert(p: Sequence[int]) -> np.ndarray:
    p = np.asarray(p, dtype=np.int64)
    inv = np.empty_like(p)
    inv[p] = np.arange(p.size)
    return inv


def canonical_permutation(N_i: int, n_i: int) -> np.ndarray:
    """Transpose shuffle of ``N_i * n_i`` elements: ``a*N_i + b -> b*n_i + a``."""
    if N_i < 1 or n_i < 1:
        raise ValueError(f"canonical permutation needs positive sizes, got ({N_i}, {n_i})")
    k = np.arange(N_i * n_i)
    a, b = np.divmod(k, N_i)
    return b * n_i + a


def stage_permutation(i: int, order: KernelOrder) -> np.ndarray:
    """``P_i`` for ``2 <= i <= s``: ``Q_i`` repeated over consecutive blocks of ``N_{i+1}``."""
    if not 2 <= i <= order.s:
        raise ValueError(f"stage index {i} out of range [2, {order.s}]")
    pp = order.partial_products
    q = canonical_permutation(pp[i - 1], order.sizes[i - 1])
    block = pp[i]
    offsets = np.arange(order.N // block) * block
    return (offsets[:, None] + q[None, :]).reshape(-1)


def input_permutation(stage_perms: Sequence[np.ndarray], N: int | None = None) -> np.ndarray:
    """``P_1``: inverse of applying ``P_2``, then ``P_3``, ..., then ``P_s``."""
    if not stage_perms:
        if N is None:
            raise ValueError("N is required when there are no stage permutations")
        return np.arange(N)
    r = np.arange(len(stage_perms[0]))
    for p in stage_perms:
        r = np.asarray(p)[r]
    return invert(r)


def transformation_matrix(order: KernelOrder, cap: int = MATRIX_CAP) -> np.ndarray:
    """Dense ``G_N`` as a uint8 matrix (Kronecker product in the given order)."""
    if order.N > cap:
        raise ValueError(f"N={order.N} exceeds the dense-matrix cap of {cap}")
    g = np.ones((1, 1), dtype=np.uint8)
    for k in order.kernels:
        g = np.kron(g, k.matrix) & 1
    return g.astype(np.uint8)


@dataclass(frozen=True, eq=False)
class TannerGraph:
    order: KernelOrder
    stage_perms: tuple[np.ndarray, ...]  # P_1 .. P_s

    @property
    def N(self) -> int:
        return self.order.N

    @property
    def s(self) -> int:
        return self.order.s

    @cached_property
    def inverse_perms(self) -> tuple[np.ndarray, ...]:
        out = []
        for p in self.stage_perms:
            inv = invert(p)
            inv.setflags(write=False)
            out.append(inv)
        return tuple(out)

    def boxes(self, stage: int) -> int:
        return self.N // self.order.sizes[stage - 1]

    def propagate(self, u: np.ndarray) -> np.ndarray:
        """Push inputs left to right through boxes and wires; works on ``(..., N)`` batches."""
        u = np.asarray(u, dtype=np.uint8)
        if u.shape[-1] != self.N:
            raise ValueError(f"expected {self.N} input bits, got {u.shape[-1]}")
        batch = u.shape[:-1]
        v = u.reshape(-1, self.N)
        for stage in range(self.s, 0, -1):
            kernel = self.order.kernels[stage - 1]
            n = kernel.size
            boxes = v.reshape(v.shape[0], -1, n).astype(np.int64)
            out = ((boxes @ kernel.matrix) & 1).reshape(v.shape[0], self.N)
            v = out[:, self.stage_perms[stage - 1]].astype(np.uint8)
        return v.reshape(*batch, self.N)

    def dump(self) -> str:
        lines = [f"graph N={self.N} s={self.s} order={self.order.label}"]
        for stage in range(1, self.s + 1):
            k = self.order.kernels[stage - 1]
            perm = " ".join(str(int(v)) for v in self.stage_perms[stage - 1])
            lines.append(f"stage {stage} kernel={k.name} boxes={self.boxes(stage)} perm={perm}")
        return "\n".join(lines) + "\n"


def build_graph(order: KernelOrder) -> TannerGraph:
    later = [stage_permutation(i, order) for i in range(2, order.s + 1)]
    p1 = input_permutation(later, order.N)
    perms = [p1] + later
    for p in perms:
        p.setflags(write=False)
    return TannerGraph(order, tuple(perms))
