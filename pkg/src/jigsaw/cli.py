"""Command-line interface.

    jigsaw keygen --out pair.key [--ps 1024] [--k 7] [--seed N]
    jigsaw recv   --key pair.key --listen 127.0.0.1:9000 --output out.bin
    jigsaw send   --key pair.key --to 127.0.0.1:9000 --input in.bin [--l-min BITS]
    jigsaw demo   --faults "reorder:3,duplicate:7" [--size BYTES]
    jigsaw curves [--k 2:10] [--n 1:20] [--data-bits 10240] [--out curves.csv]

Exit codes: 0 success, 1 usage or configuration error, 2 transport
failure, 3 authentication failure or desynchronization detected, 4 the
demo receiver finished without error but with wrong data.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from . import costmodel
from .bitblock import random_source
from .errors import JigsawError, KeyFileError, TransportError
from .keystate import generate, read_key_file, write_key_file
from .transport import (
    DEFAULT_TIMEOUT,
    AdversarialChannel,
    TransferReport,
    loopback_transfer,
    parse_faults,
    recv_stream,
    send_stream,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_TRANSPORT = 2
EXIT_DETECTED = 3
EXIT_CORRUPTED = 4

PS_RANGE = (64, 8192)
K_RANGE = (2, 64)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _address(text: str):
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def _int_range(text: str) -> List[int]:
    """Parse ``a:b`` (inclusive) or a comma list."""
    out: List[int] = []
    for item in text.split(","):
        if ":" in item:
            lo, hi = item.split(":", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif item.strip():
            out.append(int(item))
    if not out:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return out


def _check_params(ps: int, k: int, l_min: Optional[int]) -> int:
    if not PS_RANGE[0] <= ps <= PS_RANGE[1] or ps % 8:
        raise UsageError(f"--ps must be a multiple of 8 in [{PS_RANGE[0]}, {PS_RANGE[1]}]")
    if not K_RANGE[0] <= k <= K_RANGE[1]:
        raise UsageError(f"--k must be in [{K_RANGE[0]}, {K_RANGE[1]}]")
    if l_min is None:
        l_min = ps // 2
    if not 1 <= l_min <= ps - 2:
        raise UsageError(f"--l-min must be in [1, {ps - 2}]")
    return l_min


def _print_report(report: TransferReport, out=None) -> None:
    out = out or sys.stdout
    for line in report.lines():
        print(f"{report.role}.{line}", file=out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jigsaw", description="Jigsaw secure data transfer")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", help="write a fresh pre-shared key file")
    p.add_argument("--out", required=True)
    p.add_argument("--ps", type=int, default=1024, help="block width in bits")
    p.add_argument("--k", type=int, default=7, help="blocks per key (group width)")
    p.add_argument("--seed", type=int, help="deterministic key material (testing only)")

    p = sub.add_parser("send", help="send a file to a listening receiver")
    p.add_argument("--key", required=True)
    p.add_argument("--to", required=True, type=_address)
    p.add_argument("--input", required=True)
    p.add_argument("--l-min", type=int, help="minimum part size in bits (default ps/2)")
    p.add_argument("--seed", type=int, help="deterministic tearing, offsets and R")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)

    p = sub.add_parser("recv", help="receive one transfer and write it to a file")
    p.add_argument("--key", required=True)
    p.add_argument("--listen", required=True, type=_address)
    p.add_argument("--output", required=True)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)

    p = sub.add_parser("demo", help="in-process transfer through a fault-injecting channel")
    p.add_argument("--faults", default="", help='e.g. "reorder:3,tamper:all,drop:r"')
    p.add_argument("--ps", type=int, default=1024)
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--l-min", type=int)
    p.add_argument("--size", type=int, default=64 * 1024, help="bytes of random data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)

    p = sub.add_parser("curves", help="analytic operation counts as CSV")
    p.add_argument("--k", type=_int_range, default=list(range(2, 11)), help="e.g. 2:10")
    p.add_argument("--n", type=_int_range, default=list(range(1, 21)),
                   help="data sizes in blocks, e.g. 1:20 or 10")
    p.add_argument("--data-bits", type=_int_range, default=[],
                   help="data sizes in bits (converted with --ps)")
    p.add_argument("--ps", type=int, default=1024)
    p.add_argument("--out")
    return parser


def cmd_keygen(args) -> int:
    _check_params(args.ps, args.k, None)
    state = generate(random_source(args.seed), args.k, args.ps)
    try:
        size = write_key_file(state, args.out)
    except OSError as exc:
        print(f"jigsaw: cannot write key file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"ps={state.ps}")
    print(f"k={state.k}")
    print(f"key_bits={state.k * state.ps}")
    print(f"file_bytes={size}")
    return EXIT_OK


def _load_key(path):
    try:
        return read_key_file(path)
    except (OSError, KeyFileError) as exc:
        raise UsageError(f"cannot load key file {path}: {exc}") from exc


def cmd_send(args) -> int:
    key = _load_key(args.key)
    l_min = _check_params(key.ps, key.k, args.l_min)
    try:
        with open(args.input, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from exc
    try:
        report = send_stream(args.to, key, data, l_min=l_min, seed=args.seed,
                             timeout=args.timeout)
    except TransportError as exc:
        print(f"jigsaw: {exc}", file=sys.stderr)
        if exc.report is not None:
            _print_report(exc.report)
        return EXIT_TRANSPORT
    _print_report(report)
    return EXIT_OK


def cmd_recv(args) -> int:
    key = _load_key(args.key)
    try:
        out = open(args.output, "wb")
    except OSError as exc:
        raise UsageError(f"cannot open {args.output}: {exc}") from exc
    with out:
        try:
            report = recv_stream(args.listen, key, out.write, timeout=args.timeout)
        except TransportError as exc:
            print(f"jigsaw: {exc}", file=sys.stderr)
            if exc.report is not None:
                _print_report(exc.report)
            return EXIT_TRANSPORT
        except JigsawError as exc:
            print(f"jigsaw: {type(exc).__name__}: {exc}", file=sys.stderr)
            report = getattr(exc, "report", None)
            if report is not None:
                _print_report(report)
            return EXIT_DETECTED
    _print_report(report)
    return EXIT_OK


def cmd_demo(args) -> int:
    l_min = _check_params(args.ps, args.k, args.l_min)
    try:
        faults = parse_faults(args.faults, seed=args.seed)
    except ValueError as exc:
        raise UsageError(f"bad fault spec: {exc}") from exc
    rng = random_source(args.seed)
    key = generate(rng, args.k, args.ps)
    data = rng.randbytes(args.size)
    channel = AdversarialChannel(faults)
    result = loopback_transfer([data], key, channel, rng=rng, l_min=l_min, timeout=args.timeout)

    for fault in faults:
        target = "r" if fault.r_only else ("all" if fault.target_seq is None else fault.target_seq)
        print(f"fault={fault.kind} target={target} arg={fault.arg if fault.arg is not None else ''} "
              f"applied={channel.stats[fault.kind]}")
    recv = result.received
    rejected = recv.auth_failures + recv.malformed
    rate = rejected / recv.packets if recv.packets else 0.0
    print(f"packets_sent={result.sent.packets}")
    print(f"packets_received={recv.packets}")
    print(f"rejected={rejected}")
    print(f"rejection_rate={rate:.3f}")
    print(f"duplicates_dropped={recv.duplicates}")
    print(f"outcome={result.outcome}")
    if result.error is not None:
        print(f"error={type(result.error).__name__}: {result.error}")
    _print_report(result.sent)
    _print_report(recv)
    return {"recovered": EXIT_OK, "failed-detected": EXIT_DETECTED}.get(result.outcome,
                                                                       EXIT_CORRUPTED)


def cmd_curves(args) -> int:
    rows = costmodel.emit_curves(args.k, args.n, args.data_bits, ps=args.ps)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            costmodel.write_csv(rows, fh)
    else:
        costmodel.write_csv(rows, sys.stdout)
    return EXIT_OK


COMMANDS = {
    "keygen": cmd_keygen,
    "send": cmd_send,
    "recv": cmd_recv,
    "demo": cmd_demo,
    "curves": cmd_curves,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        print(f"jigsaw: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
