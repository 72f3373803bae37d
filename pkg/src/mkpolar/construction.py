"""Bit-channel reliabilities, kernel-order selection and frozen sets.

The Monte-Carlo estimator is genie-aided: the all-zero codeword is sent and
every earlier decision is forced correct, so each stage reduces to evaluating
all phases of every box with zero inputs decided. That makes the estimator a
batch computation over iterations, done here with numpy on chunks drawn from
counter-based streams (one stream per chunk, so any worker count gives the
same counts).
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cache, lru_cache

import numpy as np
from scipy import integrate, optimize

from .channel import DEFAULT_CONVENTION, STREAM_CONSTRUCTION, noise_variance, stream
from .crc import CrcConfig
from .graph import KernelOrder, TannerGraph, build_graph
from .kernel import CODE_T2, CODE_T3, Kernel

MC_CHUNK = 10_000
LLR_CLAMP = 60.0

METHODS = ("monte_carlo", "gaussian_approx")


class UnsupportedMethodError(ValueError):
    """The requested reliability method cannot handle this kernel order."""


@dataclass(frozen=True, eq=False)
class ReliabilityProfile:
    pe: np.ndarray
    method: str
    design_snr_db: float
    iterations: int = 0
    seed: int = 0
    mean_llr: np.ndarray | None = None
    convention: str = "es_n0"
    rate: float = 1.0

    @property
    def N(self) -> int:
        return self.pe.size

    def score(self, K: int) -> float:
        """Sum of correct-decision probabilities over the ``K`` best bit channels."""
        best = np.sort(self.pe, kind="stable")[:K]
        return float(np.sum(1.0 - best))


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """Complete code definition: ``(N, K, order, frozen set, design SNR, CRC)``.

    With a CRC, the last ``crc.r`` of the ``K`` information bits carry the CRC.
    """

    K: int
    order: KernelOrder
    frozen: tuple[int, ...]
    design_snr_db: float = 0.0
    crc: CrcConfig | None = None
    info_positions: np.ndarray = field(init=False, repr=False)
    frozen_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        N = self.order.N
        frozen = tuple(sorted(int(f) for f in self.frozen))
        object.__setattr__(self, "frozen", frozen)
        if len(set(frozen)) != len(frozen):
            raise ValueError("frozen set has repeated positions")
        if frozen and (frozen[0] < 0 or frozen[-1] >= N):
            raise ValueError(f"frozen positions must lie in [0, {N})")
        if self.K < 1 or len(frozen) != N - self.K:
            raise ValueError(f"need K >= 1 and |frozen| = N - K, got K={self.K}, |F|={len(frozen)}")
        if self.crc is not None and self.crc.r >= self.K:
            raise ValueError(f"CRC length {self.crc.r} must be smaller than K={self.K}")
        mask = np.zeros(N, dtype=np.uint8)
        mask[list(frozen)] = 1
        info = np.flatnonzero(mask == 0)
        mask.setflags(write=False)
        info.setflags(write=False)
        object.__setattr__(self, "frozen_mask", mask)
        object.__setattr__(self, "info_positions", info)

    @property
    def N(self) -> int:
        return self.order.N

    @property
    def payload_bits(self) -> int:
        return self.K - (self.crc.r if self.crc else 0)

    @property
    def graph(self) -> TannerGraph:
        return graph_for(self.order)


@lru_cache(maxsize=64)
def graph_for(order: KernelOrder) -> TannerGraph:
    return build_graph(order)


# ---------------------------------------------------------------------------
# Monte-Carlo (genie-aided)


def _genie_stage(kernel: Kernel, r: np.ndarray) -> np.ndarray:
    """All phases of every box given zero earlier decisions; ``r`` is ``(B, boxes, n)``."""
    # tanh saturates to +-1 for large inputs; the resulting infinities are clipped below
    with np.errstate(divide="ignore"):
        if kernel.code == CODE_T2:
            t = np.tanh(0.5 * r)
            out = np.empty_like(r)
            out[..., 0] = 2.0 * np.arctanh(t[..., 0] * t[..., 1])
            out[..., 1] = r[..., 0] + r[..., 1]
        elif kernel.code == CODE_T3:
            t = np.tanh(0.5 * r)
            t12 = t[..., 1] * t[..., 2]
            out = np.empty_like(r)
            out[..., 0] = 2.0 * np.arctanh(t[..., 0] * t12)
            out[..., 1] = r[..., 0] + 2.0 * np.arctanh(t12)
            out[..., 2] = r[..., 1] + r[..., 2]
        else:
            out = _genie_generic(kernel, r)
    np.clip(out, -LLR_CLAMP, LLR_CLAMP, out=out)
    return out


def _genie_generic(kernel: Kernel, r: np.ndarray) -> np.ndarray:
    n = kernel.size
    # log P(x_j = 0), log P(x_j = 1), no NaN for infinite inputs
    lp0 = -np.logaddexp(0.0, -r)
    lp1 = -np.logaddexp(0.0, r)
    out = np.empty_like(r)
    for p in range(n):
        free = n - p - 1
        tails = np.array(
            [[(c >> t) & 1 for t in range(free)] for c in range(1 << free)], dtype=np.int64
        ).reshape(1 << free, free)
        sums = []
        for v in (0, 1):
            u = np.zeros((1 << free, n), dtype=np.int64)
            u[:, p] = v
            u[:, p + 1 :] = tails
            x = (u @ kernel.matrix) & 1
            terms = np.where(x[:, None, None, :] == 0, lp0[None], lp1[None]).sum(axis=-1)
            sums.append(np.logaddexp.reduce(terms, axis=0))
        with np.errstate(invalid="ignore"):
            d = sums[0] - sums[1]
        out[..., p] = np.nan_to_num(d, nan=0.0, posinf=np.inf, neginf=-np.inf)
    return out


def genie_llrs(graph: TannerGraph, channel: np.ndarray) -> np.ndarray:
    """Decision LLRs with all earlier decisions forced to zero, for a ``(B, N)`` batch."""
    B, N = channel.shape
    cur = channel
    for j in range(1, graph.s + 1):
        kernel = graph.order.kernels[j - 1]
        r = cur[:, graph.inverse_perms[j - 1]].reshape(B, -1, kernel.size)
        cur = _genie_stage(kernel, r).reshape(B, N)
    return cur


def _channel_chunk(N, sigma2, seed, chunk, size, erased, known):
    rng = stream(seed, STREAM_CONSTRUCTION, chunk)
    y = 1.0 + math.sqrt(sigma2) * rng.standard_normal((size, N))
    llr = 2.0 * y / sigma2
    if erased is not None:
        llr[:, erased] = 0.0
    if known is not None:
        llr[:, known] = np.inf
    return llr


def _count_chunk(args):
    orders, sigma2, seed, chunk, size, erased, known = args
    N = orders[0].N
    llr = _channel_chunk(N, sigma2, seed, chunk, size, erased, known)
    counts = []
    for order in orders:
        lam = genie_llrs(graph_for(order), llr)
        # doubled counts so a tie can count half
        counts.append(2 * np.count_nonzero(lam < 0, axis=0) + np.count_nonzero(lam == 0, axis=0))
    return np.array(counts, dtype=np.int64)


def _chunks(iterations: int):
    n = -(-iterations // MC_CHUNK)
    return [(c, min(MC_CHUNK, iterations - c * MC_CHUNK)) for c in range(n)]


def mc_error_counts(
    orders: Sequence[KernelOrder],
    sigma2: float,
    iterations: int,
    seed: int,
    erased=None,
    known=None,
    workers: int = 1,
) -> np.ndarray:
    """Doubled genie error counts ``(len(orders), N)`` on shared noise of variance ``sigma2``."""
    N = orders[0].N
    if any(o.N != N for o in orders):
        raise ValueError("all orders must have the same length")
    jobs = [(tuple(orders), sigma2, seed, c, size, erased, known) for c, size in _chunks(iterations)]
    total = np.zeros((len(orders), N), dtype=np.int64)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_count_chunk, jobs):
                total += part
    else:
        for job in jobs:
            total += _count_chunk(job)
    return total


def estimate_reliabilities_mc(
    order: KernelOrder,
    design_snr_db: float,
    iterations: int = 1_000_000,
    seed: int = 0,
    erased=None,
    known=None,
    workers: int = 1,
    convention: str = "es_n0",
    rate: float = 1.0,
) -> ReliabilityProfile:
    """Genie-aided Monte-Carlo estimate of every bit channel's error probability.

    Ties (decision LLR exactly zero) count as half an error. ``erased`` coded
    positions receive LLR 0 and ``known`` ones receive +inf (punctured and
    shortened positions of a rate-matched code). ``convention`` and ``rate``
    map the SNR to a noise variance as in :func:`channel.noise_variance`.
    """
    if iterations < 1000:
        raise ValueError("Monte-Carlo construction needs at least 1000 iterations")
    sigma2 = noise_variance(design_snr_db, convention, rate)
    counts = mc_error_counts([order], sigma2, iterations, seed, erased, known, workers)[0]
    pe = counts / (2.0 * iterations)
    return ReliabilityProfile(
        pe, "monte_carlo", float(design_snr_db), int(iterations), int(seed),
        convention=convention, rate=float(rate),
    )


# ---------------------------------------------------------------------------
# Gaussian approximation (all-T2 orders only)


def _phi_integrand(u, m):
    return math.tanh(u / 2.0) * math.exp(-((u - m) ** 2) / (4.0 * m))


@cache
def ga_phi(m: float) -> float:
    """``1 - E[tanh(L/2)]`` for ``L ~ N(m, 2m)``."""
    if m <= 0.0:
        return 1.0
    if m > 50.0:
        return math.sqrt(math.pi / m) * math.exp(-m / 4.0) * (1.0 - 10.0 / (7.0 * m))
    sd = math.sqrt(2.0 * m)
    val, _ = integrate.quad(_phi_integrand, m - 12 * sd, m + 12 * sd, args=(m,), epsabs=1e-13, epsrel=1e-12)
    return 1.0 - val / math.sqrt(4.0 * math.pi * m)


@cache
def ga_phi_inv(y: float) -> float:
    if y >= 1.0:
        return 0.0
    if y <= 0.0:
        return math.inf
    target = math.log(y)
    lo, hi = 1e-10, 1.0
    while math.log(ga_phi(hi)) > target:
        hi *= 2.0
        if hi > 1e7:
            return math.inf
    return optimize.brentq(lambda m: math.log(ga_phi(m)) - target, lo, hi, xtol=1e-13, rtol=1e-13)


def _ga_check(a: float, b: float) -> float:
    pa, pb = ga_phi(a), ga_phi(b)
    return ga_phi_inv(pa + pb - pa * pb)


def estimate_reliabilities_ga(
    order: KernelOrder, design_snr_db: float, convention: str = "es_n0", rate: float = 1.0
) -> ReliabilityProfile:
    """Gaussian-approximation estimate; mean LLRs follow the same stage wiring as SC."""
    if any(k.code != CODE_T2 for k in order.kernels):
        raise UnsupportedMethodError("Gaussian approximation supports T2-only kernel orders; use monte_carlo")
    sigma2 = noise_variance(design_snr_db, convention, rate)
    graph = graph_for(order)
    N = order.N
    means = np.full(N, 2.0 / sigma2)
    for j in range(1, graph.s + 1):
        r = means[graph.inverse_perms[j - 1]].reshape(-1, 2)
        out = np.empty_like(r)
        for b in range(r.shape[0]):
            out[b, 0] = _ga_check(float(r[b, 0]), float(r[b, 1]))
            out[b, 1] = r[b, 0] + r[b, 1]
        means = out.reshape(N)
    pe = np.array([0.5 * math.erfc(math.sqrt(m) / 2.0) for m in means])
    return ReliabilityProfile(
        pe, "gaussian_approx", float(design_snr_db), mean_llr=means, convention=convention, rate=float(rate)
    )


# ---------------------------------------------------------------------------
# order selection and frozen sets


def _sizes_of(multiset: Iterable) -> list[int]:
    out = []
    for k in multiset:
        out.append(k.size if isinstance(k, Kernel) else int(k))
    if not out:
        raise ValueError("kernel multiset is empty")
    if any(n < 2 for n in out):
        raise ValueError("kernel sizes must be at least 2")
    return out


def enumerate_orders(multiset: Iterable) -> list[KernelOrder]:
    """All distinct orderings of a kernel multiset, lexicographic by kernel size."""
    sizes = sorted(_sizes_of(multiset))
    found: list[tuple[int, ...]] = []

    def walk(prefix, remaining):
        if not remaining:
            found.append(tuple(prefix))
            return
        for idx, n in enumerate(remaining):
            if idx and remaining[idx - 1] == n:
                continue
            walk(prefix + [n], remaining[:idx] + remaining[idx + 1 :])

    walk([], sizes)
    return [KernelOrder.from_sizes(t) for t in found]


def rank_kernel_orders(
    multiset: Iterable,
    K: int,
    design_snr_db: float,
    method: str = "monte_carlo",
    iterations: int = 1_000_000,
    seed: int = 0,
    workers: int = 1,
    convention: str = DEFAULT_CONVENTION,
) -> list[tuple[KernelOrder, float, ReliabilityProfile]]:
    """Score every ordering; Monte-Carlo orders share the same noise realisations.

    The design SNR is read under ``convention`` at code rate ``K / N``.
    """
    orders = enumerate_orders(multiset)
    N = orders[0].N
    if not 1 <= K <= N:
        raise ValueError(f"K must be in [1, {N}], got {K}")
    rate = K / N
    if method == "monte_carlo":
        if iterations < 1000:
            raise ValueError("Monte-Carlo construction needs at least 1000 iterations")
        sigma2 = noise_variance(design_snr_db, convention, rate)
        counts = mc_error_counts(orders, sigma2, iterations, seed, workers=workers)
        profiles = [
            ReliabilityProfile(
                c / (2.0 * iterations), method, float(design_snr_db), int(iterations), int(seed),
                convention=convention, rate=rate,
            )
            for c in counts
        ]
    elif method == "gaussian_approx":
        profiles = [estimate_reliabilities_ga(o, design_snr_db, convention, rate) for o in orders]
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return [(o, p.score(K), p) for o, p in zip(orders, profiles)]


def select_kernel_order(
    multiset: Iterable,
    K: int,
    design_snr_db: float,
    method: str = "monte_carlo",
    iterations: int = 1_000_000,
    seed: int = 0,
    workers: int = 1,
    convention: str = DEFAULT_CONVENTION,
) -> tuple[KernelOrder, ReliabilityProfile]:
    """Order with the largest reliability sum over its ``K`` best bits (first wins ties)."""
    ranked = rank_kernel_orders(multiset, K, design_snr_db, method, iterations, seed, workers, convention)
    best = best_ranked(ranked)
    return best[0], best[2]


def best_ranked(ranked):
    """Highest-scoring entry of :func:`rank_kernel_orders` output; the earliest wins ties."""
    best = ranked[0]
    for cand in ranked[1:]:
        if cand[1] > best[1]:
            best = cand
    return best


def build_frozen_set(profile: ReliabilityProfile, K: int, forced: Iterable[int] = ()) -> tuple[int, ...]:
    """The ``N - K`` least reliable positions; equal ``pe`` freezes the smaller index first.

    ``forced`` positions are frozen unconditionally and count toward ``N - K``.
    """
    N = profile.N
    if not 0 <= K <= N:
        raise ValueError(f"K must be in [0, {N}], got {K}")
    forced = sorted(set(int(f) for f in forced))
    if len(forced) > N - K:
        raise ValueError(f"{len(forced)} forced positions exceed N - K = {N - K}")
    rest = np.setdiff1d(np.arange(N), forced)
    ranked = rest[np.lexsort((rest, -profile.pe[rest]))]
    chosen = list(forced) + [int(i) for i in ranked[: N - K - len(forced)]]
    return tuple(sorted(chosen))


def construct_code(
    kernels: Iterable,
    K: int,
    design_snr_db: float = 2.0,
    method: str = "monte_carlo",
    iterations: int = 1_000_000,
    seed: int = 0,
    crc: CrcConfig | None = None,
    fixed_order: bool = False,
    workers: int = 1,
    convention: str = DEFAULT_CONVENTION,
) -> tuple[CodeSpec, ReliabilityProfile]:
    """Pick the kernel order (unless ``fixed_order``) and freeze the least reliable bits."""
    if fixed_order:
        order = kernels if isinstance(kernels, KernelOrder) else KernelOrder.from_sizes(_sizes_of(kernels))
        if not 1 <= K <= order.N:
            raise ValueError(f"K must be in [1, {order.N}], got {K}")
        rate = K / order.N
        if method == "monte_carlo":
            profile = estimate_reliabilities_mc(
                order, design_snr_db, iterations, seed, workers=workers, convention=convention, rate=rate
            )
        elif method == "gaussian_approx":
            profile = estimate_reliabilities_ga(order, design_snr_db, convention, rate)
        else:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    else:
        order, profile = select_kernel_order(
            kernels, K, design_snr_db, method, iterations, seed, workers, convention
        )
    frozen = build_frozen_set(profile, K)
    return CodeSpec(K, order, frozen, float(design_snr_db), crc), profile


# ---------------------------------------------------------------------------
# text serialization


def _fmt_float(v: float) -> str:
    return f"{v:.9e}"


def dump_code(spec: CodeSpec, profile: ReliabilityProfile, extra: dict | None = None) -> str:
    """Deterministic text form: ``#`` metadata, header ``N K design_snr method seed``,
    then ``index pe frozen_flag`` per position."""
    meta = {
        "order": spec.order.label,
        "iterations": profile.iterations,
        "convention": profile.convention,
        "rate": f"{profile.rate:.12g}",
        "crc": spec.crc.label if spec.crc else "none",
    }
    if extra:
        meta.update(extra)
    lines = ["# " + " ".join(f"{k}={v}" for k, v in meta.items())]
    lines.append(f"{spec.N} {spec.K} {spec.design_snr_db:g} {profile.method} {profile.seed}")
    mask = spec.frozen_mask
    for i in range(spec.N):
        lines.append(f"{i} {_fmt_float(float(profile.pe[i]))} {int(mask[i])}")
    return "\n".join(lines) + "\n"


def load_code(text: str) -> tuple[CodeSpec, ReliabilityProfile, dict]:
    meta: dict[str, str] = {}
    body = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for item in line[1:].split():
                if "=" in item:
                    k, v = item.split("=", 1)
                    meta[k] = v
            continue
        body.append(line.split())
    if not body:
        raise ValueError("empty code description")
    N, K, snr, method, seed = body[0]
    N, K = int(N), int(K)
    rows = body[1:]
    if len(rows) != N:
        raise ValueError(f"expected {N} position lines, got {len(rows)}")
    pe = np.array([float(r[1]) for r in rows])
    frozen = [int(r[0]) for r in rows if r[2] == "1"]
    order = KernelOrder.parse(meta["order"]) if "order" in meta else KernelOrder.from_sizes([2] * int(math.log2(N)))
    crc = None if meta.get("crc", "none") == "none" else CrcConfig.parse(meta["crc"])
    spec = CodeSpec(K, order, frozen, float(snr), crc)
    profile = ReliabilityProfile(
        pe, method, float(snr), int(meta.get("iterations", 0)), int(seed),
        convention=meta.get("convention", "es_n0"), rate=float(meta.get("rate", 1.0)),
    )
    return spec, profile, meta
