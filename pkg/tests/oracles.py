"""Independent reference implementations used to check the library."""

from __future__ import annotations

import itertools
import math

import numpy as np


def marginal_llr(matrix, l, phase, u_prev):
    """log P(u_p=0)/P(u_p=1) by summing over every completion of the undecided inputs."""
    T = np.asarray(matrix, dtype=np.int64)
    n = T.shape[0]
    free = n - phase - 1
    logp = []
    for v in (0, 1):
        terms = []
        for tail in itertools.product((0, 1), repeat=free):
            u = np.array(list(u_prev) + [v] + list(tail), dtype=np.int64)
            x = u @ T % 2
            # log P(x_j | l_j) up to a common factor: -log(1 + e^{-(1-2x)l})
            terms.append(sum(-math.log1p(math.exp(-(1 - 2 * xj) * lj)) for xj, lj in zip(x, l)))
        m = max(terms)
        logp.append(m + math.log(sum(math.exp(t - m) for t in terms)))
    return logp[0] - logp[1]


def dense_generator(kernels) -> np.ndarray:
    """``G[i, j] = prod_t T_t[i_t, j_t]`` with mixed-radix digits, first kernel most significant."""
    sizes = [np.asarray(k).shape[0] for k in kernels]
    N = math.prod(sizes)

    def digits(v):
        out = []
        for n in reversed(sizes):
            v, d = divmod(v, n)
            out.append(d)
        return out[::-1]

    G = np.zeros((N, N), dtype=np.uint8)
    for i in range(N):
        di = digits(i)
        for j in range(N):
            dj = digits(j)
            G[i, j] = all(np.asarray(k)[a, b] for k, a, b in zip(kernels, di, dj))
    return G


def _f_exact(a, b):
    # tanh form where the result is small (relative precision near zero),
    # log-domain form elsewhere (the tanh form saturates for large LLRs)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.tanh(a / 2) * np.tanh(b / 2)
        near_zero = 2 * np.arctanh(np.clip(t, -0.9, 0.9))
        far = (
            np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
            + np.log1p(np.exp(-np.abs(a + b)))
            - np.log1p(np.exp(-np.abs(a - b)))
        )
    return np.where(np.abs(t) < 0.5, near_zero, far)


def _f_minsum(a, b):
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def arikan_sc(llr, frozen_mask, minsum=False):
    """Recursive SC for ``x = u F^{(x)n}``, ``F = [[1,0],[1,1]]``, over a ``(B, N)`` batch.

    Splits ``u = (a, b)`` so that ``x = ((a+b)G', bG')``: the left half is decoded
    from ``f(l_left, l_right)``, the right half from ``l_right + (-1)^v l_left``.
    Returns ``(u_hat, x_hat, decision_llrs)``.
    """
    f = _f_minsum if minsum else _f_exact
    llr = np.atleast_2d(np.asarray(llr, dtype=np.float64))
    B, N = llr.shape
    u_hat = np.zeros((B, N), dtype=np.uint8)
    lam = np.zeros((B, N))

    def rec(l, offset):
        n = l.shape[1]
        if n == 1:
            lam[:, offset] = l[:, 0]
            bit = np.zeros(B, dtype=np.uint8) if frozen_mask[offset] else (l[:, 0] < 0).astype(np.uint8)
            u_hat[:, offset] = bit
            return bit[:, None]
        h = n // 2
        left, right = l[:, :h], l[:, h:]
        v1 = rec(f(left, right), offset)
        v2 = rec(right + (1 - 2.0 * v1) * left, offset + h)
        return np.concatenate([v1 ^ v2, v2], axis=1)

    x = rec(llr, 0)
    return u_hat, x, lam


def ml_decode(codewords, y):
    """Minimum Euclidean distance codeword for BPSK observations ``y`` (rows)."""
    s = 1.0 - 2.0 * np.asarray(codewords, dtype=np.float64)
    d = ((np.asarray(y)[:, None, :] - s[None]) ** 2).sum(axis=-1)
    return np.asarray(codewords)[d.argmin(axis=1)]


def crc_long_division(bits, poly, r):
    """Remainder of ``bits(x) x^r`` modulo ``x^r + poly`` using integer arithmetic."""
    a = 0
    for b in bits:
        a = (a << 1) | int(b)
    a <<= r
    g = (1 << r) | poly
    while a.bit_length() > r:
        a ^= g << (a.bit_length() - g.bit_length())
    return [(a >> k) & 1 for k in range(r - 1, -1, -1)]


def bit_reversal(n_bits):
    return np.array([int(format(i, f"0{n_bits}b")[::-1], 2) for i in range(1 << n_bits)])


def scl_reference(spec, llr, L, mode="exact"):
    """Slow list decoder: each path reruns a non-memoized SC walk over the graph.

    Returns ``(paths, trace)``: the final ``(decisions, metric)`` pairs and the
    survivor list after every phase.
    """
    from mkpolar.kernel import hard_update, llr_update

    graph = spec.graph
    kernels = graph.order.kernels
    perms, inv = graph.stage_perms, graph.inverse_perms
    s, N = graph.s, graph.N

    def decision_llr(prefix):
        def bit(j, m):
            if j == s:
                return prefix[m]
            q = int(perms[j][m])
            n = kernels[j].size
            b, k = divmod(q, n)
            return int(hard_update(kernels[j], [bit(j + 1, b * n + r) for r in range(n)])[k])

        def lr(j, m):
            if j == 0:
                return float(llr[m])
            n = kernels[j - 1].size
            b, p = divmod(m, n)
            ls = [lr(j - 1, int(inv[j - 1][b * n + k])) for k in range(n)]
            return llr_update(kernels[j - 1], p, ls, [bit(j, b * n + q) for q in range(p)], mode)

        return lr(s, len(prefix))

    paths = [((), 0.0)]
    trace = []
    for i in range(N):
        cands = []
        ext = [(pre, pm, decision_llr(list(pre))) for pre, pm in paths]
        if spec.frozen_mask[i]:
            paths = [(pre + (0,), pm + (-lam if lam < 0 else 0.0)) for pre, pm, lam in ext]
        else:
            for pre, pm, lam in ext:
                cands.append((pm + (-lam if lam < 0 else 0.0), pre + (0,)))
            for pre, pm, lam in ext:
                cands.append((pm + (lam if lam >= 0 else 0.0), pre + (1,)))
            order = sorted(range(len(cands)), key=lambda c: cands[c][0])
            paths = [(cands[c][1], cands[c][0]) for c in order[:L]]
        trace.append(list(paths))
    return paths, trace
