"""Command-line front end.

Exit codes: 0 ok, 2 unreadable input (and usage errors), 3 malformed UTF-8,
4 inconsistent count table, 5 schema violation, 6 quadrature failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from . import estimator, harness, limits, sampling, shadow
from .errors import ConsistencyError, QuadratureError, SchemaError

EXIT_UNREADABLE = 2
EXIT_BAD_UTF8 = 3
EXIT_BAD_COUNTS = 4
EXIT_SCHEMA = 5
EXIT_QUADRATURE = 6


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _warn(msg: str) -> None:
    print(f"goodturing: {msg}", file=sys.stderr)


@contextmanager
def _open_input(path: str):
    if path == "-":
        yield sys.stdin.buffer
        return
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise CliError(EXIT_UNREADABLE, f"cannot read {path}: {exc.strerror}") from None
    with fh:
        yield fh


def _emit(text: str, output: str | None) -> None:
    if output is None or output == "-":
        sys.stdout.buffer.write(text.encode("utf-8"))
        sys.stdout.flush()
    else:
        Path(output).write_text(text, encoding="utf-8", newline="\n")


def _tokens_to_table(stream, delimiter) -> sampling.FrequencyTable:
    try:
        counts = sampling.count_tokens(stream, delimiter)
    except sampling.TokenDecodeError as exc:
        raise CliError(EXIT_BAD_UTF8, str(exc)) from None
    except OSError as exc:
        raise CliError(EXIT_UNREADABLE, f"read failed: {exc}") from None
    return sampling.frequencies_from_counts(counts)


def cmd_count(args) -> None:
    with _open_input(args.input) as stream:
        freq = _tokens_to_table(stream, args.delimiter)
    if freq.n == 0:
        _warn("input contains no tokens")
    _emit(estimator.write_counts_csv(freq), args.output)


def _looks_like_counts(head: bytes) -> bool:
    for line in head.decode("utf-8", errors="replace").splitlines():
        line = line.strip()
        if line:
            return line == estimator.COUNTS_HEADER or line.startswith("# n=")
    return False


def cmd_estimate(args) -> None:
    with _open_input(args.input) as stream:
        head = stream.peek(4096) if hasattr(stream, "peek") else b""
        if _looks_like_counts(head):
            try:
                text = stream.read().decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CliError(EXIT_BAD_UTF8, f"malformed UTF-8 at byte {exc.start}: {exc.reason}") from None
            try:
                freq = estimator.read_counts_csv(text)
            except (ConsistencyError, SchemaError) as exc:
                raise CliError(EXIT_BAD_COUNTS, f"invalid count table: {exc}") from None
        else:
            freq = _tokens_to_table(stream, args.delimiter)
    if freq.n == 0:
        _warn("no observations; nothing to estimate")
        _emit(estimator.ZETA_HEADER + "\n", args.output)
        return
    out = estimator.write_zeta_csv(estimator.good_turing_totals(freq))
    if args.per_symbol:
        out += "\n" + estimator.write_per_symbol_csv(freq)
    _emit(out, args.output)


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_UNREADABLE, f"cannot read {path}: {exc.strerror}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CliError(EXIT_SCHEMA, f"{path}: invalid JSON ({exc})") from None


def cmd_simulate(args) -> None:
    raw = _load_json(args.config)
    if isinstance(raw, dict) and os.environ.get("GT_SEED"):
        try:
            raw = {**raw, "seed": int(os.environ["GT_SEED"])}
        except ValueError:
            raise CliError(EXIT_SCHEMA, "GT_SEED must be an integer") from None
    try:
        config = harness.ExperimentConfig.from_json(raw)
    except SchemaError as exc:
        raise CliError(EXIT_SCHEMA, f"config: {exc}") from None
    try:
        report = harness.run_experiment(config, threads=args.threads)
    except QuadratureError as exc:
        raise CliError(EXIT_QUADRATURE, str(exc)) from None

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / f"{args.prefix}.json"
    csv_path = out_dir / f"{args.prefix}.csv"
    json_path.write_text(report.dumps(), encoding="utf-8", newline="\n")
    csv_path.write_text(report.to_csv(), encoding="utf-8", newline="\n")
    for row in report.summary:
        print(
            f"n={row['n']} trials={row['trials']} "
            + " ".join(f"{m}_median={estimator.fmt(row[m]['median'])}" for m in harness.L1_METRICS)
        )
    _warn(f"wrote {json_path} and {csv_path}")


def cmd_limit(args) -> None:
    raw = _load_json(args.spec)
    try:
        q = shadow.mixing_from_json(raw)
    except SchemaError as exc:
        raise CliError(EXIT_SCHEMA, f"mixing distribution: {exc}") from None
    try:
        vec = limits.poisson_mixture(q, args.kmax)
    except QuadratureError as exc:
        raise CliError(EXIT_QUADRATURE, str(exc)) from None
    _emit(limits.write_lambda_csv(vec), args.output)


def _delimiter(value: str) -> str:
    if len(value) != 1:
        raise argparse.ArgumentTypeError("delimiter must be a single character")
    return value


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _nonnegative_int(value: str) -> int:
    n = int(value)
    if n < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goodturing", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="count-of-counts table from a token stream")
    p.add_argument("input", nargs="?", default="-", help="UTF-8 token file (default: stdin)")
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    p.add_argument("--delimiter", type=_delimiter, help="single-character token separator (default: whitespace runs)")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("estimate", help="Good-Turing total probabilities from tokens or a k,phi_k table")
    p.add_argument("input", nargs="?", default="-")
    p.add_argument("-o", "--output")
    p.add_argument("--delimiter", type=_delimiter)
    p.add_argument("--per-symbol", action="store_true", help="also emit the per-symbol probability of each occupied class")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--out-dir", default=".", help="directory for the report files")
    p.add_argument("--prefix", default="report", help="report file stem (default: report)")
    p.add_argument("--threads", type=_positive_int, default=None, help="worker threads (default: all cores)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("limit", help="Poisson-mixture limit from a mixing-distribution JSON")
    p.add_argument("spec")
    p.add_argument("--kmax", type=_nonnegative_int, default=limits.DEFAULT_KMAX)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_limit)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        _warn(str(exc))
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
