"""Command-line interface: mine, verify, replay, simulate, analyze.

Machine-readable output is line-delimited JSON on stdout with sorted keys,
so seeded runs diff clean; diagnostics go to stderr.  Exit codes: 0 ok,
1 validation negative, 2 usage or decode error, 3 search budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import analysis, netsim, report
from .chains import ChainKind, FixedLength
from .consensus import (
    BindingMode,
    Block,
    DecodeError,
    RetargetConfig,
    decode_block,
    encode_block,
    genesis_block,
    header_hash,
    load_chain,
    origin_of,
    prescribed_target,
    validate_block,
    ChainState,
)
from .miner import BlockTemplate, MinerConfig, mine_block

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_EXHAUSTED = 3


class CliError(Exception):
    """Bad input; maps to exit code 2."""


def _emit(record: dict) -> None:
    sys.stdout.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def _diag(message: str) -> None:
    sys.stderr.write(message + "\n")


def _read_source(value: str) -> bytes:
    """Accept literal hex or a path to a hex file; 'genesis' for the root block."""
    if value == "genesis":
        return encode_block(genesis_block())
    text = value
    try:
        if os.path.exists(value):
            with open(value, "r", encoding="ascii") as fh:
                text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {value}: {exc}") from exc
    text = "".join(text.split())
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise CliError(f"not valid hex: {exc}") from exc


def _load_block(value: str) -> Block:
    try:
        return decode_block(_read_source(value))
    except DecodeError as exc:
        raise CliError(f"cannot decode block: {exc}") from exc


def _binding(value: str) -> BindingMode:
    return BindingMode(value)


def _target(value: str) -> FixedLength:
    try:
        return FixedLength.from_float(float(value))
    except ValueError as exc:
        raise CliError(f"bad target: {exc}") from exc


def _retarget_config(args: argparse.Namespace) -> RetargetConfig:
    return RetargetConfig(min_target=FixedLength.from_float(args.min_target))


# -- mine ------------------------------------------------------------------


def cmd_mine(args: argparse.Namespace) -> int:
    parent_block = _load_block(args.parent)
    parent = parent_block.header
    if args.payload is None:
        payload = b""
    else:
        try:
            with open(args.payload, "rb") as fh:
                payload = fh.read()
        except OSError as exc:
            raise CliError(f"cannot read payload: {exc}") from exc
    target = _target(args.target)
    config = _retarget_config(args)
    if target.raw < config.min_target.raw:
        raise CliError(f"target {target} below consensus minimum {config.min_target}")
    timestamp = args.timestamp if args.timestamp is not None else parent.timestamp + 1
    template = BlockTemplate(parent=parent, payload=payload, target=target, timestamp=timestamp)
    miner_config = MinerConfig(
        worker_count=args.workers,
        batch_size=args.batch_size,
        sieve_prime_limit=args.sieve_limit,
        max_batches=args.budget,
        seed=args.seed,
    )
    started = time.perf_counter()
    header = mine_block(template, miner_config, _binding(args.binding))
    elapsed = time.perf_counter() - started
    if header is None:
        _diag(f"exhausted {args.budget} batches in {elapsed:.2f}s without a proof")
        return EXIT_EXHAUSTED
    _diag(f"found certificate after {elapsed:.2f}s")
    block = Block(header=header, payload=payload)
    sys.stdout.write(encode_block(block).hex() + "\n")
    _emit(
        {
            "type": "mined_block",
            "hash": header_hash(header).hex(),
            "kind": header.kind.name,
            "certificate": header.certificate,
            "nonce": header.nonce,
            "target_raw": header.target.raw,
            "timestamp": header.timestamp,
            "origin_bits": origin_of(header, _binding(args.binding)).bit_length(),
        }
    )
    return EXIT_OK


# -- verify ------------------------------------------------------------------


def cmd_verify(args: argparse.Namespace) -> int:
    block = _load_block(args.block)
    parent = _load_block(args.parent).header
    verdict = validate_block(block, parent, _retarget_config(args), _binding(args.binding))
    _emit(
        {
            "type": "verdict",
            "hash": header_hash(block.header).hex(),
            "valid": verdict.valid,
            "reason": verdict.reason,
        }
    )
    return EXIT_OK if verdict.valid else EXIT_INVALID


# -- replay ------------------------------------------------------------------


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        blocks = load_chain(args.chain)
    except (OSError, DecodeError) as exc:
        raise CliError(f"cannot load chain: {exc}") from exc
    if not blocks:
        raise CliError("chain file is empty")
    config = _retarget_config(args)
    genesis = blocks[0]
    expected_genesis = genesis_block(genesis.header.target)
    if encode_block(genesis) != encode_block(expected_genesis):
        raise CliError("first block is not the genesis fixture")
    state = ChainState()
    ghash = header_hash(genesis.header)
    state.insert(
        ghash,
        None,
        work=0,
        timestamp=genesis.header.timestamp,
        target_raw=genesis.header.target.raw,
        header=genesis.header,
    )
    all_valid = True
    by_hash = {ghash: genesis}
    for i, block in enumerate(blocks[1:], start=1):
        parent_hash = block.header.prev_hash
        parent = by_hash.get(parent_hash)
        if parent is None:
            _emit({"type": "replay", "index": i, "valid": False, "reason": "UNKNOWN_PARENT"})
            all_valid = False
            continue
        expected = prescribed_target(state, parent_hash, config)
        verdict = validate_block(
            block, parent.header, config, _binding(args.binding), expected_target=expected
        )
        bhash = header_hash(block.header)
        _emit(
            {
                "type": "replay",
                "index": i,
                "hash": bhash.hex(),
                "valid": verdict.valid,
                "reason": verdict.reason,
            }
        )
        if verdict.valid:
            state.insert(
                bhash,
                parent_hash,
                work=block.header.target.raw,
                timestamp=block.header.timestamp,
                target_raw=block.header.target.raw,
                header=block.header,
            )
            by_hash[bhash] = block
        else:
            all_valid = False
    return EXIT_OK if all_valid else EXIT_INVALID


# -- simulate -----------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = netsim.SimConfig.from_json(fh.read())
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"bad simulation config: {exc}") from exc
    if args.seed is not None:
        config = netsim.SimConfig.from_dict({**config.to_dict(), "seed": args.seed})
    metrics = netsim.run_simulation(config)
    payload = metrics.to_dict()
    payload["type"] = "sim_metrics"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")
        _diag(f"metrics written to {args.output}")
    if args.pretty:
        sys.stdout.write(report.metrics_table(metrics) + "\n")
    elif not args.output:
        _emit(payload)
    if args.figures:
        for path in report.save_simulation_figures(metrics, args.figures):
            _diag(f"figure written to {path}")
    return EXIT_OK


# -- analyze -------------------------------------------------------------------


def cmd_analyze_pnt(args: argparse.Namespace) -> int:
    xs = [int(x) for x in args.x.split(",")]
    reports = [analysis.pnt_ratio(x) for x in xs]
    if args.pretty:
        sys.stdout.write(report.density_table(reports) + "\n")
    else:
        for rep in reports:
            _emit({"type": "pnt", **rep.to_dict()})
    if args.figures:
        for path in report.save_density_figure(reports, args.figures):
            _diag(f"figure written to {path}")
    return EXIT_OK


def cmd_analyze_density(args: argparse.Namespace) -> int:
    rep = analysis.chain_frequency(
        bits=args.bits,
        depth=args.depth,
        samples=args.samples,
        seed=args.seed,
        kind=ChainKind[args.kind],
    )
    _emit({"type": "chain_frequency", **rep.to_dict()})
    return EXIT_OK


def cmd_analyze_asymmetry(args: argparse.Namespace) -> int:
    rep = analysis.verification_asymmetry(
        _target(args.target), args.trials, seed=args.seed
    )
    if args.pretty:
        sys.stdout.write(report.asymmetry_table(rep) + "\n")
    else:
        _emit({"type": "asymmetry", **rep.to_dict()})
    if args.figures:
        for path in report.save_asymmetry_figure(rep, args.figures):
            _diag(f"figure written to {path}")
    return EXIT_OK


def cmd_analyze_speedup(args: argparse.Namespace) -> int:
    workers = [int(w) for w in args.workers.split(",")]
    reports = analysis.parallel_speedup(
        [_target(args.target)],
        workers,
        trials=args.trials,
        seed=args.seed,
        window=args.window,
    )
    if args.pretty:
        sys.stdout.write(report.speedup_table(reports) + "\n")
    else:
        for rep in reports:
            _emit({"type": "speedup", **rep.to_dict()})
    if args.figures:
        for path in report.save_speedup_figure(reports, args.figures):
            _diag(f"figure written to {path}")
    return EXIT_OK


def cmd_analyze_sensitivity(args: argparse.Namespace) -> int:
    if args.block:
        header = _load_block(args.block).header
    else:
        _diag("mining a fixture block against genesis for the sweep")
        template = BlockTemplate(
            parent=genesis_block().header,
            payload=b"sensitivity-fixture",
            target=_target(args.target),
            timestamp=1,
        )
        header = mine_block(template, MinerConfig(seed=args.seed))
        if header is None:
            _diag("failed to mine the fixture block")
            return EXIT_EXHAUSTED
    rep = analysis.sensitivity_sweep(header, args.mutations, seed=args.seed)
    _emit({"type": "sensitivity", **rep.to_dict()})
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="primework",
        description="Prime-chain proof-of-useful-work engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--binding", choices=["previous", "header"], default="previous")
        p.add_argument("--min-target", type=float, default=2.0, dest="min_target")

    p_mine = sub.add_parser("mine", help="search for a block extending a parent")
    p_mine.add_argument("--parent", required=True, help="parent block hex, file, or 'genesis'")
    p_mine.add_argument("--payload", help="file with payload bytes (default empty)")
    p_mine.add_argument("--target", required=True, help="difficulty target, e.g. 2.0")
    p_mine.add_argument("--workers", type=int, default=1)
    p_mine.add_argument("--seed", type=int, default=0)
    p_mine.add_argument("--budget", type=int, default=4096, help="batch budget")
    p_mine.add_argument("--batch-size", type=int, default=4096, dest="batch_size")
    p_mine.add_argument("--sieve-limit", type=int, default=10_000, dest="sieve_limit")
    p_mine.add_argument("--timestamp", type=int, default=None)
    add_common(p_mine)
    p_mine.set_defaults(func=cmd_mine)

    p_verify = sub.add_parser("verify", help="validate a block against its parent")
    p_verify.add_argument("--block", required=True, help="block hex or file")
    p_verify.add_argument("--parent", required=True, help="parent block hex, file, or 'genesis'")
    add_common(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_replay = sub.add_parser("replay", help="validate a persisted chain file")
    p_replay.add_argument("--chain", required=True, help="chain file, one hex block per line")
    add_common(p_replay)
    p_replay.set_defaults(func=cmd_replay)

    p_sim = sub.add_parser("simulate", help="run a seeded network simulation")
    p_sim.add_argument("--config", required=True, help="simulation config JSON file")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument("--output", help="write metrics JSON to this path")
    p_sim.add_argument("--pretty", action="store_true")
    p_sim.add_argument("--figures", help="write figures into this directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_analyze = sub.add_parser("analyze", help="empirical property reports")
    asub = p_analyze.add_subparsers(dest="analysis", required=True)

    p_pnt = asub.add_parser("pnt", help="prime counting vs x/ln x")
    p_pnt.add_argument("--x", default="1000,10000,100000,1000000")
    p_pnt.add_argument("--pretty", action="store_true")
    p_pnt.add_argument("--figures")
    p_pnt.set_defaults(func=cmd_analyze_pnt)

    p_density = asub.add_parser("density", help="chain frequency by origin size")
    p_density.add_argument("--bits", type=int, default=32)
    p_density.add_argument("--depth", type=int, default=1)
    p_density.add_argument("--samples", type=int, default=10_000)
    p_density.add_argument("--seed", type=int, default=0)
    p_density.add_argument("--kind", choices=[k.name for k in ChainKind], default="CC1")
    p_density.set_defaults(func=cmd_analyze_density)

    p_asym = asub.add_parser("asymmetry", help="mine vs verify timing")
    p_asym.add_argument("--target", default="3.0")
    p_asym.add_argument("--trials", type=int, default=5)
    p_asym.add_argument("--seed", type=int, default=0)
    p_asym.add_argument("--pretty", action="store_true")
    p_asym.add_argument("--figures")
    p_asym.set_defaults(func=cmd_analyze_asymmetry)

    p_speed = asub.add_parser("speedup", help="throughput across worker counts")
    p_speed.add_argument("--target", default="2.0")
    p_speed.add_argument("--workers", default="1,2,4")
    p_speed.add_argument("--trials", type=int, default=3)
    p_speed.add_argument("--seed", type=int, default=0)
    p_speed.add_argument("--window", type=int, default=20_000)
    p_speed.add_argument("--pretty", action="store_true")
    p_speed.add_argument("--figures")
    p_speed.set_defaults(func=cmd_analyze_speedup)

    p_sens = asub.add_parser("sensitivity", help="single-bit binding mutations")
    p_sens.add_argument("--mutations", type=int, default=1000)
    p_sens.add_argument("--seed", type=int, default=0)
    p_sens.add_argument("--block", help="fixture block hex or file (default: mine one)")
    p_sens.add_argument("--target", default="2.0", help="target when self-mining the fixture")
    p_sens.set_defaults(func=cmd_analyze_sensitivity)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except CliError as exc:
        _diag(f"error: {exc}")
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        _diag(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
