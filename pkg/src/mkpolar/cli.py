"""Command-line front end: ``mkpolar <command> [--config FILE] [key=value ...]``."""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import sim
from .baseline import (
    RateMatchedSpec,
    build_punctured,
    build_shortened,
    complexity_llr_count,
    dump_pattern,
    load_pattern,
    mother_length,
    pattern_for,
)
from .codec import Decoder, encode, llr_ops_per_decode
from .construction import (
    CodeSpec,
    best_ranked,
    build_frozen_set,
    construct_code,
    dump_code,
    graph_for,
    load_code,
    rank_kernel_orders,
)
from .crc import CrcConfig
from .graph import KernelOrder
from .sim import ConfigError, SimConfig

EXIT_OK = 0
EXIT_CONFIG = 2

_SCHEME_OF = {"punctured": "punctured_qup", "shortened": "shortened_wl"}


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None


def _read_code(path: str | None):
    if not path:
        raise ConfigError("this command needs code_file=<path> (as written by 'construct')")
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read code file: {exc}") from None
    try:
        if "# pattern" in text:
            return load_pattern(text)
        return load_code(text)[0]
    except (ValueError, KeyError, IndexError) as exc:
        raise ConfigError(f"bad code file {path}: {exc}") from None


def _read_rows(path: str | None, as_float: bool) -> list[list]:
    """One block per line: floats separated by spaces/commas, or a run of 0/1 digits."""
    try:
        fh = sys.stdin if path in (None, "-") else open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    rows = []
    try:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if not as_float and len(parts) == 1:
                parts = list(parts[0])
            rows.append([float(v) if as_float else int(v) for v in parts])
    except ValueError as exc:
        raise ConfigError(f"bad input line: {exc}") from None
    finally:
        if fh is not sys.stdin:
            fh.close()
    if len({len(r) for r in rows}) > 1:
        raise ConfigError("input lines have different lengths")
    return rows


def cmd_construct(cfg: SimConfig, args) -> str:
    crc = CrcConfig.parse(cfg.crc) if cfg.crc else None
    if cfg.code != "multi_kernel":
        build = build_punctured if cfg.code == "punctured" else build_shortened
        try:
            rm = build(
                cfg.length, cfg.K, cfg.design_snr_db, cfg.mc_iterations, cfg.seed, crc, cfg.workers, cfg.convention
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return dump_pattern(rm)
    if math.prod(cfg.kernels) != cfg.length:
        raise ConfigError(f"N={cfg.length} is not the product of the kernel sizes {cfg.kernels}")
    if cfg.order:
        spec, profile = construct_code(
            KernelOrder.parse(cfg.order), cfg.K, cfg.design_snr_db, cfg.method, cfg.mc_iterations, cfg.seed,
            crc, fixed_order=True, workers=cfg.workers, convention=cfg.convention,
        )
        return dump_code(spec, profile)
    try:
        ranked = rank_kernel_orders(
            cfg.kernels, cfg.K, cfg.design_snr_db, cfg.method, cfg.mc_iterations, cfg.seed,
            cfg.workers, cfg.convention,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    order, _, profile = best_ranked(ranked)
    spec = CodeSpec(cfg.K, order, build_frozen_set(profile, cfg.K), cfg.design_snr_db, crc)
    scores = "".join(f"# score {o.label} {s:.12f}\n" for o, s, _ in ranked)
    return scores + dump_code(spec, profile)


def cmd_encode(cfg: SimConfig, args) -> str:
    code = _read_code(cfg.code_file)
    rows = np.array(_read_rows(args.input, False), dtype=np.uint8)
    if rows.size == 0:
        return ""
    if rows.shape[-1] != code.K:
        raise ConfigError(f"expected {code.K} information bits per line, got {rows.shape[-1]}")
    x = code.encode(rows) if isinstance(code, RateMatchedSpec) else encode(code, rows)
    return "".join("".join(str(int(b)) for b in row) + "\n" for row in x)


def cmd_decode(cfg: SimConfig, args) -> str:
    code = _read_code(cfg.code_file)
    rows = _read_rows(args.input, True)
    if not rows:
        return ""
    llr = np.array(rows, dtype=np.float64)
    if llr.shape[-1] != code.N:
        raise ConfigError(f"expected {code.N} LLRs per line, got {llr.shape[-1]}")
    if isinstance(code, RateMatchedSpec):
        spec, llr = code.mother, code.mother_llrs(llr)
    else:
        spec = code
    res = Decoder(spec, cfg.list_size, cfg.mode).decode(llr)
    return "".join("".join(str(int(b)) for b in row) + "\n" for row in res.info)


def cmd_simulate(cfg: SimConfig, args) -> str:
    return sim.format_csv(sim.simulate(cfg))


def cmd_compare(cfg: SimConfig, args) -> str:
    return sim.format_csv(sim.compare(cfg), with_scheme=True)


def _graph_dump(order: KernelOrder, lines: list[str]) -> str:
    return "\n".join(lines) + "\n" + graph_for(order).dump()


def cmd_info(cfg: SimConfig, args) -> str:
    if cfg.code_file:
        code = _read_code(cfg.code_file)
        if isinstance(code, RateMatchedSpec):
            lines = [
                f"scheme={code.scheme} target_N={code.target_N} mother_N={code.mother_N} K={code.K}",
                f"llr_ops={complexity_llr_count(code)}",
                "pattern " + " ".join(str(p) for p in code.pattern),
            ]
            return _graph_dump(code.mother.order, lines)
        lines = [
            f"order={code.order.label} N={code.N} K={code.K} s={code.order.s}",
            f"llr_ops={complexity_llr_count(code)}",
        ]
        return _graph_dump(code.order, lines)
    if cfg.code != "multi_kernel":
        try:
            pattern = pattern_for(_SCHEME_OF[cfg.code], cfg.length)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        Np = mother_length(cfg.length)
        order = KernelOrder.from_sizes([2] * (Np.bit_length() - 1))
        lines = [
            f"scheme={_SCHEME_OF[cfg.code]} target_N={cfg.length} mother_N={Np}",
            f"llr_ops={llr_ops_per_decode(order)}",
            "pattern " + " ".join(str(p) for p in pattern),
        ]
        return _graph_dump(order, lines)
    order = KernelOrder.parse(cfg.order) if cfg.order else KernelOrder.from_sizes(cfg.kernels)
    lines = [f"order={order.label} N={order.N} s={order.s}", f"llr_ops={llr_ops_per_decode(order)}"]
    return _graph_dump(order, lines)


COMMANDS = {
    "construct": (cmd_construct, "select the kernel order and frozen set; write the code description"),
    "encode": (cmd_encode, "encode information bits (one block per input line)"),
    "decode": (cmd_decode, "decode channel LLRs (one block per input line)"),
    "simulate": (cmd_simulate, "BLER/BER sweep of one code, CSV output"),
    "compare": (cmd_compare, "multi-kernel vs punctured vs shortened on shared noise, CSV output"),
    "info": (cmd_info, "LLR-operation count and Tanner graph dump"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mkpolar", description="Multi-kernel polar codes: construction, coding and simulation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", "-c", help="key=value configuration file")
        p.add_argument("--output", "-o", help="output file (default: standard output)")
        p.add_argument("--workers", "-j", type=int, help="worker processes")
        p.add_argument("--seed", type=int)
        if name in ("encode", "decode"):
            p.add_argument("--input", "-i", help="input file (default: standard input)")
        p.add_argument("overrides", nargs="*", metavar="key=value", help="configuration overrides")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    overrides = list(args.overrides)
    for key in ("output", "workers", "seed"):
        value = getattr(args, key)
        if value is not None:
            overrides.append(f"{key}={value}")
    try:
        cfg = SimConfig.load(args.config, overrides)
        text = COMMANDS[args.command][0](cfg, args)
        _write(text, cfg.output)
    except ConfigError as exc:
        print(f"mkpolar: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
