"""Compiled SC/SCL decoder driven by a static schedule over the Tanner graph.

The order in which SC touches the graph does not depend on the received
values, so it is flattened once per graph into an instruction list:

* ``OP_LLR  (j, b, p)``: compute LLR(j, b*n_j + p) from the stage-(j-1) LLRs
  wired into box ``b`` and the box's earlier decisions;
* ``OP_DECIDE (i)``: decide ``u_i`` (and fork paths in list decoding);
* ``OP_HARD (j, b)``: box ``b`` of stage ``j`` is complete, push its outputs
  to the left side of stage ``j-1``.

Every intermediate value is written exactly once per path, which is the
memoization of the recursive description. List paths share per-stage arrays
and copy them on first write after a fork.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .kernel import CODE_T2, CODE_T3, generic_llr, t2_llr, t3_llr

OP_LLR = 0
OP_DECIDE = 1
OP_HARD = 2


def build_schedule(graph) -> np.ndarray:
    """Instruction list ``(op, a, b, c)`` for one SC pass over ``graph``."""
    s, N = graph.s, graph.N
    sizes = graph.order.sizes
    inv = graph.inverse_perms
    valid = [None] + [np.zeros(N, dtype=bool) for _ in range(s)]
    known = [None] + [np.zeros(N, dtype=bool) for _ in range(s)]
    ops: list[tuple[int, int, int, int]] = []

    def need(j, m):
        if valid[j][m]:
            return
        n = sizes[j - 1]
        b, p = divmod(m, n)
        if j > 1:
            for k in range(n):
                need(j - 1, int(inv[j - 1][b * n + k]))
        if not known[j][b * n : b * n + p].all():
            raise RuntimeError(f"stage {j} box {b} phase {p} scheduled before its inputs")
        ops.append((OP_LLR, j, b, p))
        valid[j][m] = True

    def mark_known(j, m):
        known[j][m] = True
        n = sizes[j - 1]
        b = m // n
        if j == 1 or not known[j][b * n : (b + 1) * n].all():
            return
        ops.append((OP_HARD, j, b, 0))
        for k in range(n):
            mark_known(j - 1, int(inv[j - 1][b * n + k]))

    for i in range(N):
        need(s, i)
        ops.append((OP_DECIDE, i, 0, 0))
        mark_known(s, i)
    return np.array(ops, dtype=np.int64)


def graph_tables(graph):
    """Pack kernel codes, padded kernel matrices and inverse wirings for the engine."""
    order = graph.order
    nmax = max(order.sizes)
    sizes = np.array(order.sizes, dtype=np.int64)
    codes = np.array([k.code for k in order.kernels], dtype=np.int64)
    mats = np.zeros((order.s, nmax, nmax), dtype=np.uint8)
    for t, k in enumerate(order.kernels):
        mats[t, : k.size, : k.size] = k.matrix
    inv = np.stack([np.asarray(p, dtype=np.int64) for p in graph.inverse_perms])
    return sizes, codes, mats, inv


@njit(cache=True)
def _kernel_llr(code, mat, n, l, u, phase, minsum):
    if code == CODE_T2:
        return t2_llr(l[0], l[1], phase, u[0] if phase > 0 else 0, minsum)
    if code == CODE_T3:
        return t3_llr(
            l[0], l[1], l[2], phase,
            u[0] if phase > 0 else 0,
            u[1] if phase > 1 else 0,
            minsum,
        )
    return generic_llr(mat[:n, :n], l[:n], phase, u[:phase])


@njit(cache=True)
def _take_slot(ref, t, L):
    for f in range(L):
        if ref[t, f] == 0:
            return f
    return -1


@njit(cache=True)
def _own_llr(llr_pool, llr_ptr, llr_ref, path, t, L):
    slot = llr_ptr[path, t]
    if llr_ref[t, slot] > 1:
        f = _take_slot(llr_ref, t, L)
        llr_pool[t, f, :] = llr_pool[t, slot, :]
        llr_ref[t, slot] -= 1
        llr_ref[t, f] = 1
        llr_ptr[path, t] = f
        return f
    return slot


@njit(cache=True)
def _own_bits(bit_pool, bit_ptr, bit_ref, path, t, L):
    slot = bit_ptr[path, t]
    if bit_ref[t, slot] > 1:
        f = _take_slot(bit_ref, t, L)
        bit_pool[t, f, :] = bit_pool[t, slot, :]
        bit_ref[t, slot] -= 1
        bit_ref[t, f] = 1
        bit_ptr[path, t] = f
        return f
    return slot


@njit(cache=True)
def _penalty(lam, bit, exact_metric):
    # metric increment for deciding ``bit`` against decision LLR ``lam``
    mag = abs(lam)
    if mag == np.inf:
        extra = 0.0
    else:
        extra = np.log1p(np.exp(-mag)) if exact_metric else 0.0
    if (lam < 0.0) != (bit == 1):
        return mag + extra
    return extra


@njit(cache=True)
def decode_batch(
    channel, ops, sizes, codes, mats, inv, frozen, L, minsum, exact_metric,
    out_u, out_pm, out_count, out_llr,
):
    """Decode every row of ``channel``; paths are written sorted by metric.

    ``out_u[blk, r]`` holds the input-bit decisions of the rank-``r`` path,
    ``out_pm`` its metric, ``out_count[blk]`` the number of surviving paths and
    ``out_llr[blk]`` the decision LLRs of the best path. ``exact_metric`` adds
    ``log(1 + e^-|lam|)`` to every decision so the metric is ``-log P(u | y)``
    rather than its magnitude-penalty approximation. Returns the total number
    of kernel LLR evaluations summed over paths and blocks.
    """
    n_blocks, N = channel.shape
    s = sizes.shape[0]
    nmax = mats.shape[1]
    llr_pool = np.zeros((s, L, N))
    bit_pool = np.zeros((s, L, N), dtype=np.uint8)
    llr_ptr = np.zeros((L, s), dtype=np.int64)
    bit_ptr = np.zeros((L, s), dtype=np.int64)
    llr_ref = np.zeros((s, L), dtype=np.int64)
    bit_ref = np.zeros((s, L), dtype=np.int64)
    active = np.zeros(L, dtype=np.bool_)
    pm = np.zeros(L)
    lam = np.zeros(L)
    cand = np.zeros(2 * L)
    keep0 = np.zeros(L, dtype=np.bool_)
    keep1 = np.zeros(L, dtype=np.bool_)
    was = np.zeros(L, dtype=np.bool_)
    lbuf = np.zeros(nmax)
    ubuf = np.zeros(nmax, dtype=np.uint8)
    xbuf = np.zeros(nmax, dtype=np.uint8)
    n_llr = 0
    last = s - 1

    for blk in range(n_blocks):
        ch = channel[blk]
        llr_ref[:, :] = 0
        bit_ref[:, :] = 0
        active[:] = False
        llr_ptr[0, :] = 0
        bit_ptr[0, :] = 0
        llr_ref[:, 0] = 1
        bit_ref[:, 0] = 1
        active[0] = True
        pm[:] = 0.0

        for o in range(ops.shape[0]):
            op = ops[o, 0]
            if op == 0:
                j = ops[o, 1]
                b = ops[o, 2]
                p = ops[o, 3]
                t = j - 1
                n = sizes[t]
                base = b * n
                for path in range(L):
                    if not active[path]:
                        continue
                    if j == 1:
                        for k in range(n):
                            lbuf[k] = ch[inv[0, base + k]]
                    else:
                        src = llr_pool[t - 1, llr_ptr[path, t - 1]]
                        for k in range(n):
                            lbuf[k] = src[inv[t, base + k]]
                    ub = bit_pool[t, bit_ptr[path, t]]
                    for q in range(p):
                        ubuf[q] = ub[base + q]
                    val = _kernel_llr(codes[t], mats[t], n, lbuf, ubuf, p, minsum)
                    slot = _own_llr(llr_pool, llr_ptr, llr_ref, path, t, L)
                    llr_pool[t, slot, base + p] = val
                    n_llr += 1
            elif op == 1:
                i = ops[o, 1]
                n_act = 0
                for path in range(L):
                    if active[path]:
                        lam[path] = llr_pool[last, llr_ptr[path, last], i]
                        n_act += 1
                if frozen[i]:
                    for path in range(L):
                        if active[path]:
                            pm[path] += _penalty(lam[path], 0, exact_metric)
                            slot = _own_bits(bit_pool, bit_ptr, bit_ref, path, last, L)
                            bit_pool[last, slot, i] = 0
                    continue
                # candidates ordered (bit 0 by path, then bit 1 by path); a stable
                # sort on the metric then breaks ties toward bit 0, lower path
                for path in range(L):
                    keep0[path] = False
                    keep1[path] = False
                    if active[path]:
                        cand[path] = pm[path] + _penalty(lam[path], 0, exact_metric)
                        cand[L + path] = pm[path] + _penalty(lam[path], 1, exact_metric)
                    else:
                        cand[path] = np.inf
                        cand[L + path] = np.inf
                if 2 * n_act <= L:
                    for path in range(L):
                        if active[path]:
                            keep0[path] = True
                            keep1[path] = True
                else:
                    order = np.argsort(cand, kind="mergesort")
                    taken = 0
                    for r in range(2 * L):
                        c = order[r]
                        path = c % L
                        if not active[path]:
                            continue
                        if c < L:
                            keep0[path] = True
                        else:
                            keep1[path] = True
                        taken += 1
                        if taken == L:
                            break
                # drop paths with no surviving child, then extend the others
                for path in range(L):
                    was[path] = active[path]
                    if active[path] and not keep0[path] and not keep1[path]:
                        active[path] = False
                        for t in range(s):
                            llr_ref[t, llr_ptr[path, t]] -= 1
                            bit_ref[t, bit_ptr[path, t]] -= 1
                for path in range(L):
                    if not was[path] or not (keep0[path] or keep1[path]):
                        continue
                    if keep0[path] and keep1[path]:
                        clone = 0
                        while active[clone]:
                            clone += 1
                        active[clone] = True
                        for t in range(s):
                            llr_ptr[clone, t] = llr_ptr[path, t]
                            bit_ptr[clone, t] = bit_ptr[path, t]
                            llr_ref[t, llr_ptr[path, t]] += 1
                            bit_ref[t, bit_ptr[path, t]] += 1
                        pm[clone] = cand[L + path]
                        slot = _own_bits(bit_pool, bit_ptr, bit_ref, clone, last, L)
                        bit_pool[last, slot, i] = 1
                        bit = 0
                    elif keep0[path]:
                        bit = 0
                    else:
                        bit = 1
                    pm[path] = cand[path] if bit == 0 else cand[L + path]
                    slot = _own_bits(bit_pool, bit_ptr, bit_ref, path, last, L)
                    bit_pool[last, slot, i] = bit
            else:
                j = ops[o, 1]
                b = ops[o, 2]
                t = j - 1
                n = sizes[t]
                base = b * n
                for path in range(L):
                    if not active[path]:
                        continue
                    ub = bit_pool[t, bit_ptr[path, t]]
                    for k in range(n):
                        acc = 0
                        for q in range(n):
                            acc ^= ub[base + q] & mats[t, q, k]
                        xbuf[k] = acc
                    slot = _own_bits(bit_pool, bit_ptr, bit_ref, path, t - 1, L)
                    dst = bit_pool[t - 1, slot]
                    for k in range(n):
                        dst[inv[t, base + k]] = xbuf[k]

        # rank surviving paths by metric (ties: lower path slot)
        n_act = 0
        for path in range(L):
            cand[path] = pm[path] if active[path] else np.inf
            if active[path]:
                n_act += 1
        order = np.argsort(cand[:L], kind="mergesort")
        out_count[blk] = n_act
        for r in range(L):
            path = order[r]
            if r < n_act:
                out_pm[blk, r] = pm[path]
                out_u[blk, r, :] = bit_pool[last, bit_ptr[path, last], :]
                if r == 0:
                    out_llr[blk, :] = llr_pool[last, llr_ptr[path, last], :]
            else:
                out_pm[blk, r] = np.inf
                out_u[blk, r, :] = 0
    return n_llr
