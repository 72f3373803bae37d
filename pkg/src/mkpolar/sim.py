"""Monte-Carlo BLER/BER runs with deterministic, worker-independent results.

Blocks are processed in fixed-size chunks. Chunk ``c`` draws its payloads and
its unit-variance noise from the counter stream ``(seed, STREAM_SIMULATION, c)``,
so every scheme and every SNR point sees the same realisations (common random
numbers) and the worker count only changes wall time. A point stops after the
first chunk at which every scheme has ``min_block_errors`` errors, or at
``max_blocks``.
"""

from __future__ import annotations

import csv
import io
import math
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baseline import (
    RateMatchedSpec,
    build_punctured,
    build_shortened,
    load_pattern,
    measured_llr_count,
)
from .channel import CONVENTIONS, STREAM_SIMULATION, noise_variance, stream
from .codec import Decoder, encode
from .construction import METHODS, CodeSpec, construct_code, load_code
from .crc import CrcConfig, attach_crc_batch
from .graph import KernelOrder
from .kernel import MODES

CSV_FIELDS = ("snr_db", "blocks", "block_errors", "bit_errors", "bler", "ber", "llr_ops", "seconds")
CODE_KINDS = ("multi_kernel", "punctured", "shortened")
DECODERS = ("sc", "scl")


class ConfigError(ValueError):
    """Invalid simulation or construction configuration."""


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text: str) -> int:
    # accepts 1e6 and 1_000_000
    v = float(text.replace("_", ""))
    if not v.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _sizes(text: str) -> tuple[int, ...]:
    if "T" in text:
        return KernelOrder.parse(text).sizes
    return tuple(int(p) for p in text.replace(" ", ",").split(",") if p)


def _opt_str(text: str):
    t = text.strip()
    return None if t.lower() in ("", "none") else t


def _opt_int(text: str):
    t = text.strip()
    return None if t.lower() in ("", "none") else _int(t)


def _names(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


_PARSERS = {
    "code": str,
    "kernels": _sizes,
    "order": _opt_str,
    "target_n": _opt_int,
    "K": _opt_int,
    "design_snr_db": float,
    "method": str,
    "mc_iterations": _int,
    "decoder": str,
    "L": _int,
    "mode": str,
    "crc": _opt_str,
    "snr_start": float,
    "snr_stop": float,
    "snr_step": float,
    "convention": str,
    "min_block_errors": _int,
    "max_blocks": _int,
    "chunk_blocks": _int,
    "seed": _int,
    "workers": _int,
    "output": _opt_str,
    "noiseless": _bool,
    "timing": _bool,
    "schemes": _names,
    "code_file": _opt_str,
}


@dataclass(frozen=True)
class SimConfig:
    code: str = "multi_kernel"
    kernels: tuple[int, ...] = (2, 2, 2, 3, 3)
    order: str | None = None  # fixed kernel order; skips order selection
    target_n: int | None = None  # rate-matched length, defaults to the kernel product
    K: int | None = None  # defaults to half the code length
    design_snr_db: float = 2.0
    method: str = "monte_carlo"
    mc_iterations: int = 1_000_000
    decoder: str = "scl"
    L: int = 8
    mode: str = "exact"
    crc: str | None = None
    snr_start: float = 2.5
    snr_stop: float = 2.5
    snr_step: float = 0.5
    convention: str = "eb_n0"
    min_block_errors: int = 100
    max_blocks: int = 1_000_000
    chunk_blocks: int = 1000
    seed: int = 0
    workers: int = 1
    output: str | None = None
    noiseless: bool = False
    timing: bool = False  # wall time in the CSV makes it run-dependent
    schemes: tuple[str, ...] = CODE_KINDS
    code_file: str | None = None

    def __post_init__(self):
        if self.K is None:
            object.__setattr__(self, "K", max(1, self.length // 2))

    @classmethod
    def from_items(cls, items: Iterable[tuple[str, str]], base: SimConfig | None = None) -> SimConfig:
        updates = {}
        for key, value in items:
            key = key.strip()
            if key not in _PARSERS:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                updates[key] = _PARSERS[key](value.strip())
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        base = base or cls()
        if "K" not in updates and ("kernels" in updates or "target_n" in updates):
            updates["K"] = None  # re-derive from the new length
        cfg = replace(base, **updates)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | None = None, overrides: Sequence[str] = ()) -> SimConfig:
        """Read a ``key = value`` file (``#`` comments) and apply ``key=value`` overrides."""
        items = []
        if path is not None:
            try:
                with open(path) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            items += _split_lines(text.splitlines(), path)
        items += _split_lines(overrides, "command line")
        return cls.from_items(items)

    def validate(self) -> None:
        checks = [
            (self.code in CODE_KINDS, f"code must be one of {CODE_KINDS}"),
            (self.method in METHODS, f"method must be one of {METHODS}"),
            (self.decoder in DECODERS, f"decoder must be one of {DECODERS}"),
            (self.mode in MODES, f"mode must be one of {MODES}"),
            (self.convention in CONVENTIONS, f"convention must be one of {CONVENTIONS}"),
            (len(self.kernels) > 0 and all(n >= 2 for n in self.kernels), "kernels must be sizes >= 2"),
            (self.K >= 1, "K must be at least 1"),
            (self.L >= 1, "L must be at least 1"),
            (self.snr_step > 0, "snr_step must be positive"),
            (self.snr_stop >= self.snr_start, "snr_stop must not be below snr_start"),
            (self.min_block_errors >= 1, "min_block_errors must be at least 1"),
            (self.max_blocks >= self.min_block_errors, "max_blocks must be at least min_block_errors"),
            (self.chunk_blocks >= 1, "chunk_blocks must be at least 1"),
            (self.mc_iterations >= 1000, "mc_iterations must be at least 1000"),
            (self.workers >= 1, "workers must be at least 1"),
            (self.seed >= 0, "seed must be non-negative"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        for name in self.schemes:
            kind, _, L = name.partition(":")
            if kind not in CODE_KINDS or (L and not L.isdigit()) or L == "0":
                raise ConfigError(f"bad scheme {name!r}; use kind or kind:L with kind in {CODE_KINDS}")
        if self.crc is not None:
            try:
                CrcConfig.parse(self.crc)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        N = self.length
        if self.K > N:
            raise ConfigError(f"K={self.K} exceeds N={N}")
        if self.order is not None:
            try:
                order = KernelOrder.parse(self.order)
            except ValueError as exc:
                raise ConfigError(f"bad order: {exc}") from None
            if sorted(order.sizes) != sorted(self.kernels):
                raise ConfigError(f"order {self.order} does not use the kernel multiset {self.kernels}")

    @property
    def length(self) -> int:
        return self.target_n if self.target_n is not None else math.prod(self.kernels)

    @property
    def list_size(self) -> int:
        return 1 if self.decoder == "sc" else self.L

    def snr_points(self) -> list[float]:
        n = int(math.floor((self.snr_stop - self.snr_start) / self.snr_step + 1e-9)) + 1
        return [round(self.snr_start + k * self.snr_step, 10) for k in range(n)]


def _split_lines(lines: Iterable[str], where: str) -> list[tuple[str, str]]:
    out = []
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out.append((key, value))
    return out


# ---------------------------------------------------------------------------
# schemes


@dataclass(frozen=True, eq=False)
class Arm:
    """One code plus decoder settings, run on the shared noise."""

    name: str
    code: CodeSpec | RateMatchedSpec
    L: int
    mode: str

    @property
    def N(self) -> int:
        return self.code.N

    @property
    def spec(self) -> CodeSpec:
        return self.code.mother if isinstance(self.code, RateMatchedSpec) else self.code

    @property
    def payload_bits(self) -> int:
        return self.spec.payload_bits

    @property
    def llr_ops(self) -> int:
        return measured_llr_count(self.code)

    def transmit_bits(self, info) -> np.ndarray:
        if isinstance(self.code, RateMatchedSpec):
            return self.code.encode(info)
        return encode(self.code, info)

    def decoder_llrs(self, llrs) -> np.ndarray:
        if isinstance(self.code, RateMatchedSpec):
            return self.code.mother_llrs(llrs)
        return llrs

    def run(self, payload: np.ndarray, z: np.ndarray, sigma2: float, noiseless: bool) -> tuple[int, int]:
        failed, bits = self.errors(payload, z, sigma2, noiseless)
        return int(failed.sum()), int(bits.sum())

    def errors(self, payload: np.ndarray, z: np.ndarray, sigma2: float, noiseless: bool):
        """Per-block ``(failed, wrong_bit_count)`` arrays for one chunk."""
        spec = self.spec
        info = attach_crc_batch(payload, spec.crc) if spec.crc is not None else payload
        x = self.transmit_bits(info)
        s = 1.0 - 2.0 * x
        if noiseless:
            llr = s * np.inf
        else:
            llr = 2.0 * (s + math.sqrt(sigma2) * z) / sigma2
        res = Decoder(spec, self.L, self.mode).decode(self.decoder_llrs(llr))
        got = res.info[:, : spec.payload_bits]
        wrong = got != payload
        return wrong.any(axis=1), wrong.sum(axis=1)


def build_code(cfg: SimConfig, kind: str):
    """Construct (or load) the code of ``kind`` described by ``cfg``."""
    crc = CrcConfig.parse(cfg.crc) if cfg.crc else None
    if kind == "multi_kernel":
        if cfg.code_file:
            try:
                with open(cfg.code_file) as fh:
                    spec, _, _ = load_code(fh.read())
            except OSError as exc:
                raise ConfigError(f"cannot read code file: {exc}") from None
            return spec
        if math.prod(cfg.kernels) != cfg.length:
            raise ConfigError(f"N={cfg.length} is not the product of the kernel sizes {cfg.kernels}")
        kernels = KernelOrder.parse(cfg.order) if cfg.order else cfg.kernels
        spec, _ = construct_code(
            kernels, cfg.K, cfg.design_snr_db, cfg.method, cfg.mc_iterations, cfg.seed, crc,
            fixed_order=cfg.order is not None, workers=cfg.workers, convention=cfg.convention,
        )
        return spec
    if cfg.code_file and cfg.code == kind:
        with open(cfg.code_file) as fh:
            return load_pattern(fh.read())
    build = build_punctured if kind == "punctured" else build_shortened
    try:
        return build(
            cfg.length, cfg.K, cfg.design_snr_db, cfg.mc_iterations, cfg.seed, crc, cfg.workers, cfg.convention
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_arms(cfg: SimConfig, names: Sequence[str]) -> list[Arm]:
    arms = []
    built = {}
    for name in names:
        kind, _, L = name.partition(":")
        if kind not in built:
            built[kind] = build_code(cfg, kind)
        arms.append(Arm(name, built[kind], int(L) if L else cfg.list_size, cfg.mode))
    if len({a.N for a in arms}) != 1 or len({a.payload_bits for a in arms}) != 1:
        raise ConfigError("compared schemes must share the transmitted length and payload size")
    return arms


# ---------------------------------------------------------------------------
# chunked runner

_ARMS: list[Arm] = []


def _init_worker(arms):
    global _ARMS
    _ARMS = arms


def _chunk_noise(seed: int, chunk: int, size: int, k: int, N: int):
    rng = stream(seed, STREAM_SIMULATION, chunk)
    payload = rng.integers(0, 2, (size, k), dtype=np.uint8)
    z = rng.standard_normal((size, N))
    return payload, z


def _run_chunk(args):
    sigma2, seed, chunk, size, noiseless = args
    arms = _ARMS
    payload, z = _chunk_noise(seed, chunk, size, arms[0].payload_bits, arms[0].N)
    return np.array([a.run(payload, z, sigma2, noiseless) for a in arms], dtype=np.int64)


@dataclass
class SimRecord:
    snr_db: float
    blocks: int
    block_errors: int
    bit_errors: int
    llr_ops: int
    seconds: float
    stop: str
    payload_bits: int
    scheme: str = ""

    @property
    def bler(self) -> float:
        return self.block_errors / self.blocks if self.blocks else 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.blocks * self.payload_bits) if self.blocks else 0.0


def _point(arms, cfg: SimConfig, snr: float, pool) -> list[SimRecord]:
    rate = arms[0].spec.K / arms[0].N
    sigma2 = noise_variance(snr, cfg.convention, min(rate, 1.0))
    tally = np.zeros((len(arms), 2), dtype=np.int64)
    blocks = 0
    chunk = 0
    stop = "max_blocks"
    t0 = time.perf_counter()
    done = False
    while not done and blocks < cfg.max_blocks:
        wave = []
        planned = blocks
        for _ in range(cfg.workers if pool else 1):
            if planned >= cfg.max_blocks:
                break
            size = min(cfg.chunk_blocks, cfg.max_blocks - planned)
            wave.append((sigma2, cfg.seed, chunk + len(wave), size, cfg.noiseless))
            planned += size
        results = pool.map(_run_chunk, wave) if pool else map(_run_chunk, wave)
        for job, part in zip(wave, results):
            tally += part
            blocks += job[3]
            chunk += 1
            if (tally[:, 0] >= cfg.min_block_errors).all():
                stop = "min_block_errors"
                done = True
                break
    seconds = time.perf_counter() - t0 if cfg.timing else 0.0
    return [
        SimRecord(snr, blocks, int(t[0]), int(t[1]), a.llr_ops, seconds, stop, a.payload_bits, a.name)
        for a, t in zip(arms, tally)
    ]


def run(cfg: SimConfig, arms: Sequence[Arm]) -> list[SimRecord]:
    """All SNR points for the given arms, rows ordered by SNR then arm."""
    arms = list(arms)
    _init_worker(arms)
    records = []
    pool = None
    if cfg.workers > 1:
        pool = ProcessPoolExecutor(max_workers=cfg.workers, initializer=_init_worker, initargs=(arms,))
    try:
        for snr in cfg.snr_points():
            records += _point(arms, cfg, snr, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    return records


def simulate(cfg: SimConfig) -> list[SimRecord]:
    return run(cfg, build_arms(cfg, [cfg.code]))


def compare(cfg: SimConfig) -> list[SimRecord]:
    if math.prod(cfg.kernels) != cfg.length and any(s.startswith("multi_kernel") for s in cfg.schemes):
        raise ConfigError(f"N={cfg.length} is not expressible with the kernel multiset {cfg.kernels}")
    return run(cfg, build_arms(cfg, cfg.schemes))


def _g(v: float) -> str:
    return f"{v:.6g}"


def format_csv(records: Sequence[SimRecord], with_scheme: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((("scheme",) if with_scheme else ()) + CSV_FIELDS)
    for r in records:
        row = [_g(r.snr_db), r.blocks, r.block_errors, r.bit_errors, _g(r.bler), _g(r.ber), r.llr_ops, _g(r.seconds)]
        w.writerow(([r.scheme] if with_scheme else []) + row)
    stops = []
    for r in records:
        tag = f"{r.scheme}@{_g(r.snr_db)}" if with_scheme else _g(r.snr_db)
        stops.append(f"{tag}={r.stop}")
    buf.write("# stop " + " ".join(stops) + "\n")
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    """Parse rows written by :func:`format_csv` (comment lines skipped)."""
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    return list(csv.DictReader(lines))
