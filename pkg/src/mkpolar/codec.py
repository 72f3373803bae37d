"""Encoding and SC / SCL decoding over the multi-kernel Tanner graph."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _engine
from .construction import CodeSpec, graph_for
from .crc import CrcConfig, attach_crc, check_crc, crc_remainder, syndrome_matrix
from .graph import KernelOrder, TannerGraph
from .kernel import MODES, hard_update, llr_update

__all__ = [
    "CrcConfig",
    "DecodeResult",
    "Decoder",
    "attach_crc",
    "check_crc",
    "crc_remainder",
    "encode",
    "llr_ops_per_decode",
    "sc_decode",
    "scatter_info",
    "scl_decode",
]


@lru_cache(maxsize=64)
def _compiled(order: KernelOrder):
    graph = graph_for(order)
    ops = _engine.build_schedule(graph)
    ops.setflags(write=False)
    return ops, _engine.graph_tables(graph)


@lru_cache(maxsize=64)
def _syndrome(K: int, crc: CrcConfig) -> np.ndarray:
    return syndrome_matrix(K, crc).astype(np.int64)


def llr_ops_per_decode(order: KernelOrder) -> int:
    """Kernel-phase LLR evaluations in one SC pass (one list path)."""
    ops, _ = _compiled(order)
    return int(np.count_nonzero(ops[:, 0] == _engine.OP_LLR))


def scatter_info(spec: CodeSpec, info) -> np.ndarray:
    """Place information bits at the non-frozen positions; frozen positions stay 0."""
    info = np.asarray(info, dtype=np.uint8)
    if info.shape[-1] != spec.K:
        raise ValueError(f"expected {spec.K} information bits, got {info.shape[-1]}")
    u = np.zeros(info.shape[:-1] + (spec.N,), dtype=np.uint8)
    u[..., spec.info_positions] = info & 1
    return u


def encode(spec: CodeSpec, info) -> np.ndarray:
    """Codeword(s) ``x = u G_N``; accepts a single vector or a ``(B, K)`` batch."""
    return spec.graph.propagate(scatter_info(spec, info))


METRICS = ("magnitude", "exact")


@dataclass
class DecodeResult:
    u: np.ndarray  # (B, N) input-bit decisions of the selected path
    info: np.ndarray  # (B, K)
    pm: np.ndarray  # (B,) selected path metric
    llrs: np.ndarray  # (B, N) decision LLRs of the best-metric path
    crc_ok: np.ndarray | None  # (B,) whether the selected path passed the CRC
    paths: np.ndarray  # (B, L, N) all surviving paths, best metric first
    path_pm: np.ndarray  # (B, L)
    survivors: np.ndarray  # (B,)


class Decoder:
    """SC (``L=1``) or SCL decoder bound to one code.

    ``metric="magnitude"`` charges ``|lam|`` when a decision disagrees with the
    LLR sign. ``metric="exact"`` uses ``log(1 + e^{-(1-2u) lam})``, the exact
    negative log-likelihood, so a list that keeps every codeword selects the ML
    one. ``llr_ops`` and ``blocks`` accumulate over calls to :meth:`decode`.
    """

    def __init__(self, spec: CodeSpec, L: int = 1, mode: str = "exact", metric: str = "magnitude"):
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
        if L < 1:
            raise ValueError("list size must be at least 1")
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
        self.spec = spec
        self.L = int(L)
        self.mode = mode
        self.metric = metric
        self._ops, self._tables = _compiled(spec.order)
        self._frozen = np.ascontiguousarray(spec.frozen_mask, dtype=np.uint8)
        self._llr_ops = 0
        self._blocks = 0

    @property
    def llr_ops(self) -> int:
        return self._llr_ops

    @property
    def blocks(self) -> int:
        return self._blocks

    def decode(self, channel_llrs) -> DecodeResult:
        ch = np.asarray(channel_llrs, dtype=np.float64)
        single = ch.ndim == 1
        ch = np.ascontiguousarray(ch.reshape(-1, self.spec.N))
        if np.isnan(ch).any():
            raise ValueError("channel LLRs contain NaN")
        B, N, L = ch.shape[0], self.spec.N, self.L
        paths = np.zeros((B, L, N), dtype=np.uint8)
        path_pm = np.zeros((B, L))
        count = np.zeros(B, dtype=np.int64)
        llrs = np.zeros((B, N))
        sizes, codes, mats, inv = self._tables
        n = _engine.decode_batch(
            ch, self._ops, sizes, codes, mats, inv, self._frozen, L,
            self.mode == "minsum", self.metric == "exact", paths, path_pm, count, llrs,
        )
        self._llr_ops += int(n)
        self._blocks += B

        pick = np.zeros(B, dtype=np.int64)
        crc_ok = None
        info_all = paths[:, :, self.spec.info_positions]
        crc = self.spec.crc
        if crc is not None:
            synd = (info_all.astype(np.int64) @ _syndrome(self.spec.K, crc)) & 1
            passing = ~synd.any(axis=2) & (np.arange(L)[None, :] < count[:, None])
            crc_ok = passing.any(axis=1)
            pick = np.where(crc_ok, passing.argmax(axis=1), 0)
        rows = np.arange(B)
        res = DecodeResult(
            u=paths[rows, pick],
            info=info_all[rows, pick],
            pm=path_pm[rows, pick],
            llrs=llrs,
            crc_ok=crc_ok,
            paths=paths,
            path_pm=path_pm,
            survivors=count,
        )
        if single:
            res.u, res.info, res.pm, res.llrs = res.u[0], res.info[0], res.pm[0], res.llrs[0]
            res.paths, res.path_pm = res.paths[0], res.path_pm[0]
            res.survivors = res.survivors[0]
            if crc_ok is not None:
                res.crc_ok = crc_ok[0]
        return res


def _sc_walk(spec: CodeSpec, ch: np.ndarray, mode: str):
    """Plain recursive SC: every LLR and partial sum is recomputed on demand."""
    graph: TannerGraph = spec.graph
    kernels = graph.order.kernels
    perms = graph.stage_perms
    inv = graph.inverse_perms
    s, N = graph.s, graph.N
    u_hat = np.zeros(N, dtype=np.uint8)

    def bit(j, m):
        # value on the left side of stage j at position m
        if j == s:
            return int(u_hat[m])
        q = int(perms[j][m])
        n = kernels[j].size
        b, k = divmod(q, n)
        u_box = [bit(j + 1, b * n + r) for r in range(n)]
        return int(hard_update(kernels[j], u_box)[k])

    def llr(j, m):
        if j == 0:
            return float(ch[m])
        n = kernels[j - 1].size
        b, p = divmod(m, n)
        l = [llr(j - 1, int(inv[j - 1][b * n + k])) for k in range(n)]
        u_prev = [bit(j, b * n + q) for q in range(p)]
        return llr_update(kernels[j - 1], p, l, u_prev, mode)

    out = np.zeros(N)
    for i in range(N):
        lam = llr(s, i)
        out[i] = lam
        u_hat[i] = 0 if spec.frozen_mask[i] or lam >= 0 else 1
    return u_hat, out


def sc_decode(spec: CodeSpec, channel_llrs, mode: str = "exact", memoize: bool = True):
    """Successive-cancellation decoding; returns ``(info_bits, decision_llrs)``.

    ``memoize=False`` runs a recursive walker that recomputes every intermediate
    value; it is slow and meant for cross-checking.
    """
    if memoize:
        res = Decoder(spec, 1, mode).decode(channel_llrs)
        return res.info, res.llrs
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    ch = np.asarray(channel_llrs, dtype=np.float64)
    single = ch.ndim == 1
    ch = ch.reshape(-1, spec.N)
    infos, llrs = [], []
    for row in ch:
        u, lam = _sc_walk(spec, row, mode)
        infos.append(u[spec.info_positions])
        llrs.append(lam)
    infos, llrs = np.array(infos, dtype=np.uint8), np.array(llrs)
    return (infos[0], llrs[0]) if single else (infos, llrs)


def scl_decode(spec: CodeSpec, channel_llrs, L: int, mode: str = "exact", metric: str = "magnitude"):
    """List decoding; returns ``(info_bits, selected_path_metric)``."""
    res = Decoder(spec, L, mode, metric).decode(channel_llrs)
    return res.info, res.pm
