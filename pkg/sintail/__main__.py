import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from . import __version__
from .bounds import (
    RationalApprox,
    certify_report,
    mahler_check,
    pi_convergents,
    sum_by_class,
    tail_report,
    verify_lemma_tame,
    verify_mahler,
    verify_wild_growth,
)
from .classify import cached_wild_up_to, classify
from .config import RunConfig, load_config
from .errors import ConfigError, SintailError, UndecidableAtPrecision
from .hiprec import MAX_INDEX, reduction_bits, seed_pi_cache
from .series import Engine, partial_sum

log = logging.getLogger("sintail")

PI_CACHE_NAME = "pi-v1.bin"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_UNDECIDABLE = 3


# ---------------- argument types -----------------


def index_arg(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {n}")
    if n > MAX_INDEX:
        raise argparse.ArgumentTypeError(f"{n} is beyond the supported index range (max 2**63 - 1)")
    return n


def count_arg(text: str) -> int:
    n = index_arg(text)
    if n > 10**4:
        raise argparse.ArgumentTypeError(f"at most 10000 convergents, got {n}")
    return n


def exponent_arg(text: str) -> Fraction:
    try:
        e = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if e <= 0:
        raise argparse.ArgumentTypeError(f"exponent must be positive, got {text}")
    return e


def rational_arg(text: str) -> RationalApprox:
    try:
        p_text, q_text = text.split("/")
        return RationalApprox(int(p_text), int(q_text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected P/Q, got {text!r}")


# ---------------- output -----------------


def write_json(obj: Any, stream=None) -> None:
    stream = stream or sys.stdout
    json.dump(obj, stream, ensure_ascii=False, indent=2, sort_keys=True)
    stream.write("\n")


def _human_lines(obj: Any, prefix: str = "") -> List[str]:
    if isinstance(obj, dict):
        if set(obj) == {"lo", "hi"}:
            return [f"{prefix}: [{obj['lo']}, {obj['hi']}]"]
        lines = []
        for key in sorted(obj):
            name = f"{prefix}.{key}" if prefix else key
            lines.extend(_human_lines(obj[key], name))
        return lines
    if isinstance(obj, list) and len(obj) > 20:
        return [f"{prefix}: {len(obj)} items, first {obj[:5]}"]
    return [f"{prefix}: {obj}"]


def write_human(obj: Any, stream=None) -> None:
    stream = stream or sys.stdout
    stream.write("\n".join(_human_lines(obj)) + "\n")


def emit(config: RunConfig, report: Dict[str, Any]) -> None:
    if config.output == "human":
        write_human(report)
    else:
        write_json(report)


# ---------------- commands -----------------


def _needed_pi_bits(n: int, p: int) -> int:
    return reduction_bits(n, p + n.bit_length() + 8)


def prepare_pi(config: RunConfig, largest_index: int) -> None:
    if not config.cache_dir:
        return
    seed_pi_cache(
        os.path.join(config.cache_dir, PI_CACHE_NAME),
        _needed_pi_bits(largest_index, config.precision_bits),
    )


def cmd_sum(args, config: RunConfig) -> Tuple[Dict[str, Any], bool]:
    prepare_pi(config, args.terms)
    engine = config.engine_or(Engine.FAST)
    result = partial_sum(
        args.terms, engine, config.precision_bits, config.workers, progress=args.progress
    )
    report = result.to_dict()
    if args.split:
        report["split"] = sum_by_class(
            args.terms, config.precision_bits, config.precision_ceiling, config.workers
        ).to_dict()
    return report, True


def cmd_classify(args, config: RunConfig) -> Tuple[Dict[str, Any], bool]:
    prepare_pi(config, args.n)
    return classify(args.n, config.precision_bits, config.precision_ceiling).to_dict(), True


def _wild_table(args, config: RunConfig):
    prepare_pi(config, args.limit)
    return cached_wild_up_to(
        args.limit,
        config.cache_dir if args.cache else None,
        config.precision_bits,
        config.precision_ceiling,
        config.workers,
    )


def cmd_wild(args, config: RunConfig) -> Tuple[Dict[str, Any], bool]:
    return _wild_table(args, config).to_dict(), True


def cmd_verify_tame(args, config: RunConfig) -> Tuple[Dict[str, Any], bool]:
    prepare_pi(config, args.upto)
    report = verify_lemma_tame(
        args.start,
        args.upto,
        config.precision_bits,
        config.precision_ceiling,
        config.workers,
    )
    return report.to_dict(), report.passed


def cmd_verify_wild_growth(args, config: RunConfig) -> Tuple[Dict[str, Any], bool]:
    report = verify_wild_growth(_wild_table(args, config), config.precision_bits)
    return report.to_dict(), report.passed


def cmd_verify_mahler(args, config: RunConfig) -> Tuple[Dict[str, Any], bool]:
    if args.rational is not None:
        check = mahler_check(
            args.rational, args.exponent, config.precision_bits, config.precision_ceiling
        )
        return check.to_dict(), check.passed
    approximations = [
        c for c in pi_convergents(args.convergents + 1, config.precision_bits) if abs(c.q) > 1
    ][: args.convergents]
    report = verify_mahler(
        approximations, args.exponent, config.precision_bits, config.precision_ceiling
    )
    return report.to_dict(), report.passed


def cmd_tail(args, config: RunConfig) -> Tuple[Dict[str, Any], bool]:
    return tail_report(args.after, config.precision_bits).to_dict(), True


def cmd_certify(args, config: RunConfig) -> Tuple[Dict[str, Any], bool]:
    prepare_pi(config, args.terms)
    report = certify_report(args.terms, config.precision_bits, config.workers)
    return report, report["below_200"]


# ---------------- parser -----------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--precision", type=int, default=None, help="Working precision in bits (default 96)"
    )
    common.add_argument("--workers", type=int, default=None, help="Worker processes (default 1)")
    common.add_argument("--cache-dir", default=None, help="Cache directory for pi and wild tables")
    common.add_argument(
        "--output", choices=["json", "human"], default=None, help="Report format (default json)"
    )
    common.add_argument(
        "--config", default=None, help="YAML config file (default ./sintail.yaml if present)"
    )
    common.add_argument(
        "--precision-ceiling", type=int, default=None, help="Give up refining above this many bits"
    )
    common.add_argument("--verbose", action="store_true", help="Log progress to stderr")
    common.add_argument("--debug", action="store_true", help="Enable debug logging")

    parser = argparse.ArgumentParser(
        prog="sintail",
        description="Certified numerics for sum (2/3 + sin(n)/3)^n / n",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("sum", parents=[common], help="Partial sum of the first N terms")
    p.add_argument("--terms", type=index_arg, required=True)
    p.add_argument("--engine", choices=[e.value for e in Engine], default=None)
    p.add_argument("--progress", action="store_true", help="Log a line per million terms")
    p.add_argument("--split", action="store_true", help="Also report the certified tame/wild split")
    p.set_defaults(func=cmd_sum)

    p = sub.add_parser("classify", parents=[common], help="Tame/wild verdict for one index")
    p.add_argument("n", type=index_arg)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("wild", parents=[common], help="All wild numbers up to a limit")
    p.add_argument("--limit", type=index_arg, required=True)
    p.add_argument("--cache", action="store_true", help="Read and extend the wild table cache")
    p.set_defaults(func=cmd_wild)

    verify = sub.add_parser("verify", help="Numerical verification sweeps")
    vsub = verify.add_subparsers(dest="check", metavar="CHECK")
    vsub.required = True

    v = vsub.add_parser(
        "tame", aliases=["lemma-tame"], parents=[common], help="Tame powers below e^-sqrt(n)"
    )
    v.add_argument("--upto", type=index_arg, required=True)
    v.add_argument("--from", dest="start", type=index_arg, default=1)
    v.set_defaults(func=cmd_verify_tame, engine=Engine.CERTIFIED.value)

    v = vsub.add_parser("wild-growth", parents=[common], help="W_k >= k^(77/76)/2")
    v.add_argument("--limit", type=index_arg, required=True)
    v.add_argument("--cache", action="store_true", help="Read and extend the wild table cache")
    v.set_defaults(func=cmd_verify_wild_growth, engine=Engine.CERTIFIED.value)

    v = vsub.add_parser("mahler", parents=[common], help="|pi - p/q| > 1/|q|^E on convergents")
    group = v.add_mutually_exclusive_group(required=True)
    group.add_argument("--convergents", type=count_arg)
    group.add_argument("--rational", type=rational_arg, help="Check a single P/Q")
    v.add_argument("--exponent", type=exponent_arg, default=Fraction(20))
    v.set_defaults(func=cmd_verify_mahler, engine=Engine.CERTIFIED.value)

    p = sub.add_parser("tail", parents=[common], help="Upper bounds on the tail after N")
    p.add_argument("--after", type=index_arg, required=True)
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("certify", parents=[common], help="Certified enclosure of the full sum")
    p.add_argument("--terms", type=index_arg, required=True)
    p.set_defaults(func=cmd_certify, engine=Engine.CERTIFIED.value)
    return parser


def setup_logging(verbose: bool, debug: bool) -> None:
    level = logging.DEBUG if debug else logging.INFO if verbose else logging.WARNING
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(level)


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    setup_logging(args.verbose, args.debug)
    try:
        config = load_config(args)
        report, passed = args.func(args, config)
    except ConfigError as e:
        parser.print_usage(sys.stderr)
        print(f"sintail: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except UndecidableAtPrecision as e:
        print(f"sintail: undecidable: {e}", file=sys.stderr)
        return EXIT_UNDECIDABLE
    except SintailError as e:
        print(f"sintail: error: {e}", file=sys.stderr)
        if args.debug:
            import traceback

            traceback.print_exc()
        return EXIT_USAGE

    emit(config, report)
    return EXIT_OK if passed else EXIT_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    return run(argv)


if __name__ == "__main__":
    raise SystemExit(main())
