"""Binary polarization kernels and their SC update rules.

LLRs follow ``log(P(bit=0) / P(bit=1))``. The scalar rules are numba-jitted so
the batch decoder in :mod:`mkpolar._engine` runs the exact same arithmetic as
this public API.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numba import njit

# Kernel codes understood by the compiled decoder.
CODE_T2 = 0
CODE_T3 = 1
CODE_GENERIC = 2

MODES = ("exact", "minsum")


def gf2_inverse(matrix: np.ndarray) -> np.ndarray:
    """Invert a square binary matrix over GF(2) by Gauss-Jordan elimination.

    Raises
    ------
    ValueError
        If the matrix is singular.
    """
    a = np.array(matrix, dtype=np.uint8) & 1
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    aug = np.concatenate([a, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        pivots = np.nonzero(aug[col:, col])[0]
        if pivots.size == 0:
            raise ValueError("matrix is singular over GF(2)")
        piv = col + pivots[0]
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        for row in range(n):
            if row != col and aug[row, col]:
                aug[row] ^= aug[col]
    return aug[:, n:].copy()


@dataclass(frozen=True, eq=False)
class Kernel:
    """Square binary kernel ``T`` acting as ``x = u . T`` over GF(2)."""

    matrix: np.ndarray
    name: str = ""
    inverse: np.ndarray = field(init=False, repr=False)
    code: int = field(init=False, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.uint8)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ValueError(f"kernel must be an n x n matrix with n >= 2, got {m.shape}")
        if np.any(m > 1):
            raise ValueError("kernel entries must be 0 or 1")
        inv = gf2_inverse(m)
        m.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "inverse", inv)
        if not self.name:
            object.__setattr__(self, "name", f"K{m.shape[0]}")
        if np.array_equal(m, _T2_MATRIX):
            code = CODE_T2
        elif np.array_equal(m, _T3_MATRIX):
            code = CODE_T3
        else:
            code = CODE_GENERIC
        object.__setattr__(self, "code", code)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def __eq__(self, other):
        return isinstance(other, Kernel) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def __repr__(self):
        return f"Kernel({self.name})"


_T2_MATRIX = np.array([[1, 0], [1, 1]], dtype=np.uint8)
_T3_MATRIX = np.array([[1, 1, 1], [1, 0, 1], [0, 1, 1]], dtype=np.uint8)

T2 = Kernel(_T2_MATRIX, "T2")
T3 = Kernel(_T3_MATRIX, "T3")

BUILTIN = {2: T2, 3: T3}


def kernel_for_size(n: int) -> Kernel:
    try:
        return BUILTIN[n]
    except KeyError:
        raise ValueError(f"no built-in kernel of size {n}") from None


# ---------------------------------------------------------------------------
# scalar rules (shared with the compiled decoder)


@njit(cache=True)
def boxplus_exact(a, b):
    # Small results: 2 atanh(tanh tanh) keeps full relative precision near 0.
    # Large results: sign*min plus two softplus corrections, stable at any size.
    s = 1.0
    if a < 0.0:
        s = -s
    if b < 0.0:
        s = -s
    aa = abs(a)
    bb = abs(b)
    if aa < bb:
        m = aa
        d = bb - aa
    else:
        m = bb
        d = aa - bb
    if m == np.inf:
        return s * m
    # tanh(x/2) = -expm1(-x) / (1 + e^-x), 2 atanh(t) = log1p(2t / (1 - t))
    t = (np.expm1(-aa) / (1.0 + np.exp(-aa))) * (np.expm1(-bb) / (1.0 + np.exp(-bb)))
    if t < 0.5:
        return s * min(np.log1p(2.0 * t / (1.0 - t)), m)
    return s * (m + np.log1p(np.exp(-(aa + bb))) - np.log1p(np.exp(-d)))


@njit(cache=True)
def boxplus_minsum(a, b):
    s = 1.0
    if a < 0.0:
        s = -s
    if b < 0.0:
        s = -s
    return s * min(abs(a), abs(b))


@njit(cache=True)
def _bp(a, b, minsum):
    if minsum:
        return boxplus_minsum(a, b)
    return boxplus_exact(a, b)


@njit(cache=True)
def _signed_sum(a, flip_a, b, flip_b):
    # +inf and -inf meeting means contradictory certainty: report no information
    if flip_a:
        a = -a
    if flip_b:
        b = -b
    r = a + b
    if r != r:
        return 0.0
    return r


@njit(cache=True)
def t2_llr(l0, l1, phase, u0, minsum):
    if phase == 0:
        return _bp(l0, l1, minsum)
    return _signed_sum(l0, u0 == 1, l1, False)


@njit(cache=True)
def t3_llr(l0, l1, l2, phase, u0, u1, minsum):
    if phase == 0:
        return _bp(_bp(l0, l1, minsum), l2, minsum)
    if phase == 1:
        return _signed_sum(l0, u0 == 1, _bp(l1, l2, minsum), False)
    return _signed_sum(l1, u0 == 1, l2, (u0 ^ u1) == 1)


@njit(cache=True)
def _log_prob(llr, bit):
    # log P(x = bit) for a bit with the given LLR, never NaN
    z = -llr if bit == 0 else llr
    if z > 0.0:
        return -(z + np.log1p(np.exp(-z)))
    return -np.log1p(np.exp(z))


@njit(cache=True)
def generic_llr(matrix, l, phase, u_prev):
    """Exact marginal LLR of input ``phase`` by enumerating all completions."""
    n = matrix.shape[0]
    free = n - phase - 1
    best = np.full(2, -np.inf)
    terms = np.empty((2, 1 << free))
    x = np.empty(n, dtype=np.uint8)
    for v in range(2):
        for c in range(1 << free):
            for j in range(n):
                acc = 0
                for r in range(phase):
                    acc ^= u_prev[r] & matrix[r, j]
                acc ^= v & matrix[phase, j]
                for t in range(free):
                    acc ^= ((c >> t) & 1) & matrix[phase + 1 + t, j]
                x[j] = acc
            lp = 0.0
            for j in range(n):
                lp += _log_prob(l[j], x[j])
            terms[v, c] = lp
            best[v] = max(best[v], lp)
    out = np.empty(2)
    for v in range(2):
        if best[v] == -np.inf:
            out[v] = -np.inf
        else:
            acc = 0.0
            for c in range(1 << free):
                acc += np.exp(terms[v, c] - best[v])
            out[v] = best[v] + np.log(acc)
    if out[0] == -np.inf and out[1] == -np.inf:
        return 0.0
    return out[0] - out[1]


# ---------------------------------------------------------------------------
# public API


def _bits(u, n: int, what: str) -> np.ndarray:
    arr = np.asarray(u, dtype=np.uint8).reshape(-1)
    if arr.size != n:
        raise ValueError(f"{what} must have {n} entries, got {arr.size}")
    if np.any(arr > 1):
        raise ValueError(f"{what} entries must be 0 or 1")
    return arr


def hard_update(kernel: Kernel, u: Sequence[int]) -> np.ndarray:
    """Return ``u . T`` over GF(2)."""
    u = _bits(u, kernel.size, "u")
    return ((u.astype(np.int64) @ kernel.matrix) & 1).astype(np.uint8)


def hard_partial(kernel: Kernel, u_all: Sequence[int]) -> np.ndarray:
    """Push a completed box's input decisions to its outputs (same as :func:`hard_update`)."""
    return hard_update(kernel, u_all)


def boxplus(a: float, b: float, mode: str = "exact") -> float:
    if mode == "exact":
        return float(boxplus_exact(float(a), float(b)))
    if mode == "minsum":
        return float(boxplus_minsum(float(a), float(b)))
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def llr_update(kernel: Kernel, phase: int, l, u_prev=(), mode: str = "exact") -> float:
    """LLR of kernel input ``phase`` given output LLRs ``l`` and earlier input decisions.

    T2 and T3 use their closed-form rules; any other kernel falls back to exact
    marginalization over the undecided inputs (``mode`` is then ignored).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    n = kernel.size
    if not 0 <= phase < n:
        raise ValueError(f"phase {phase} out of range for a size-{n} kernel")
    l = np.asarray(l, dtype=np.float64).reshape(-1)
    if l.size != n:
        raise ValueError(f"expected {n} LLRs, got {l.size}")
    u_prev = _bits(u_prev, phase, "u_prev")
    minsum = mode == "minsum"
    if kernel.code == CODE_T2:
        u0 = int(u_prev[0]) if phase > 0 else 0
        return float(t2_llr(l[0], l[1], phase, u0, minsum))
    if kernel.code == CODE_T3:
        u0 = int(u_prev[0]) if phase > 0 else 0
        u1 = int(u_prev[1]) if phase > 1 else 0
        return float(t3_llr(l[0], l[1], l[2], phase, u0, u1, minsum))
    return float(generic_llr(kernel.matrix, l, phase, u_prev))
