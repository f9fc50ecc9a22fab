from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import AsyncExitStack
from logging import getLogger
from typing import Any, Callable, Sequence

import anyio
import numpy as np

from . import __version__
from .codec import Codeword, UnrecoverablePattern, decode_erasures, encode
from .gf import FieldError, FieldTower
from .linalg import MatrixError
from .mrcons import (
    CodeFormatError,
    MrCode,
    MrParams,
    ParameterError,
    build_code,
    construction_field_size,
    example1_code,
    predicted_distance,
    small_field_regime,
)
from .reportstore import BaseReportStore, open_report_store
from .sumrank import DEFAULT_MAX_CODEWORDS, InstanceTooLarge, LrsParameterError
from .utils import dumps
from .verify import (
    DEFAULT_MAX_PATTERNS,
    BoundError,
    Method,
    ReductionPreconditionError,
    amutation_trial,
    averify_mr,
    field_size_lower_bound,
    min_distance_bruteforce,
    singleton_lrc_bound,
    sweep_instances,
    verify_mr,
    verify_mr_definition,
)

log = getLogger(__name__)

EXIT_OK = 0
EXIT_COUNTEREXAMPLE = 1
EXIT_USAGE = 2

INPUT_ERRORS = (
    FieldError,
    MatrixError,
    ParameterError,
    LrsParameterError,
    CodeFormatError,
    BoundError,
    InstanceTooLarge,
    ReductionPreconditionError,
    json.JSONDecodeError,
    OSError,
)

# regression values of the bundled code
EXAMPLE1_EXPECTED = {"total_patterns": 108, "failures": 0, "min_distance": 5, "predicted_distance": 5}


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _text_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _emit(data: Any, fmt: str) -> None:
    if fmt == "table" and isinstance(data, dict):
        for key in sorted(data):
            value = data[key]
            print(f"{key}: {value if not isinstance(value, (dict, list)) else dumps(value)}")
    elif fmt == "table" and isinstance(data, list):
        for row in data:
            print("  ".join(f"{k}={row[k]}" for k in sorted(row) if not isinstance(row[k], dict)))
    else:
        print(dumps(data, indent=2))


def _read_json(path: str) -> Any:
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as f:
        return json.load(f)


def _add_params(parser: argparse.ArgumentParser, required: bool) -> None:
    group = parser.add_argument_group("code parameters")
    for name, help in (
        ("p", "field characteristic"),
        ("e", "q = p^e"),
        ("r", "locality"),
        ("delta", "local distance"),
        ("h", "global parities"),
        ("m", "number of repair sets"),
    ):
        group.add_argument(f"--{name}", type=int, required=required, help=help)


def _add_code_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in", dest="input", help="code JSON file ('-' for stdin)")
    parser.add_argument("--example1", action="store_true", help="use the bundled 5x9 code over GF(16)")
    parser.add_argument("--alphas", type=_text_list, help="comma-separated alpha elements")
    parser.add_argument("--gamma-basis", type=_text_list, help="comma-separated GF(q)-basis of GF(Q)")
    _add_params(parser, required=False)


def _params_from(args: argparse.Namespace) -> MrParams:
    values = [getattr(args, name) for name in ("p", "e", "r", "delta", "h", "m")]
    if any(v is None for v in values):
        raise UsageError("give --in, --example1, or all of --p --e --r --delta --h --m")
    return MrParams(*values)


def _build(params: MrParams, args: argparse.Namespace) -> MrCode:
    alphas = gamma_basis = None
    if args.alphas or args.gamma_basis:
        tower = FieldTower(params.p, params.e, params.h)
        if args.alphas:
            alphas = [tower.parse_element(x) for x in args.alphas]
        if args.gamma_basis:
            gamma_basis = [tower.parse_element(x) for x in args.gamma_basis]
    return build_code(params, alphas=alphas, gamma_basis=gamma_basis)


def _load_code(args: argparse.Namespace) -> MrCode:
    if args.example1:
        return example1_code()
    if args.input:
        return MrCode.from_json(_read_json(args.input))
    return _build(_params_from(args), args)


def cmd_construct(args: argparse.Namespace) -> int:
    code = _build(_params_from(args), args)
    _emit(code.to_json(power=args.format == "pow"), "json")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    code = _load_code(args)
    methods = [Method.DIRECT, Method.REDUCTION] if args.method == "both" else [Method(args.method)]
    reports = [
        verify_mr(
            code,
            method,
            jobs=args.jobs,
            max_patterns=args.max_patterns,
            with_distance=args.distance,
            max_codewords=args.max_codewords,
        )
        for method in methods
    ]
    if len(reports) > 1 and [f.erased for f in reports[0].failures] != [f.erased for f in reports[1].failures]:
        log.error("Verifiers disagree")
        _emit({"reports": [r.to_json(timing=args.timing) for r in reports]}, args.format)
        return EXIT_COUNTEREXAMPLE
    _emit(reports[0].to_json(timing=args.timing), args.format)
    return EXIT_OK if all(r.is_mr for r in reports) else EXIT_COUNTEREXAMPLE


def cmd_mindist(args: argparse.Namespace) -> int:
    code = _load_code(args)
    params = code.params
    d = min_distance_bruteforce(code, args.max_codewords)
    predicted = predicted_distance(params)
    _emit(
        {
            "min_distance": d,
            "predicted_distance": predicted,
            "singleton_lrc_bound": singleton_lrc_bound(params.n, params.k, params.r, params.delta),
        },
        args.format,
    )
    return EXIT_OK if d == predicted else EXIT_COUNTEREXAMPLE


def cmd_encode(args: argparse.Namespace) -> int:
    code = _load_code(args)
    message = [code.tower.parse_element(x) for x in args.message]
    word = encode(code, message)
    _emit(word.to_json(code.tower, power=args.format == "pow"), "json")
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    code = _load_code(args)
    word = Codeword.from_json(_read_json(args.word), code.tower)
    try:
        completed = decode_erasures(code, word)
    except UnrecoverablePattern as exc:
        _emit(
            {"error": "UnrecoverablePattern", "erased": list(exc.erased), "rank": exc.rank, "deficiency": exc.deficiency},
            "json",
        )
        return EXIT_COUNTEREXAMPLE
    _emit(completed.to_json(code.tower, power=args.format == "pow"), "json")
    return EXIT_OK


def cmd_bound(args: argparse.Namespace) -> int:
    result: dict[str, Any] = {"singleton_lrc_bound": singleton_lrc_bound(args.n, args.k, args.r, args.delta)}
    if args.h is not None and args.m is not None:
        result["field_size_lower_bound"] = field_size_lower_bound(args.n, args.r, args.delta, args.h, args.m).to_json()
    # the distance bound alone prints bare unless JSON is asked for
    if len(result) == 1 and args.format in (None, "table"):
        print(result["singleton_lrc_bound"])
    else:
        _emit(result, args.format or "json")
    return EXIT_OK


async def _sweep(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    rows: list[dict[str, Any]] = []
    failed = 0
    async with AsyncExitStack() as exit_stack:
        store = None
        if args.store:
            store = await exit_stack.enter_async_context(open_report_store(args.store, label=args.label))
        failed = await _sweep_instances(args, rng, store, rows)
    summary = {"instances": len(rows), "failed": failed, "rows": rows}
    _emit(rows if args.format == "table" else summary, args.format)
    return EXIT_OK if failed == 0 else EXIT_COUNTEREXAMPLE


async def _sweep_instances(
    args: argparse.Namespace, rng: np.random.Generator, store: BaseReportStore | None, rows: list
) -> int:
    failed = 0
    for params in sweep_instances(args.q, args.delta, args.h, args.r_max, args.m_max, args.max_patterns):
        code = build_code(params)
        report = await averify_mr(code, Method.DIRECT, jobs=args.jobs, max_patterns=args.max_patterns)
        row: dict[str, Any] = {**params.to_json(), "n": params.n, "k": params.k, "patterns": report.total_patterns}
        ok = report.is_mr
        if args.dual:
            dual = await averify_mr(code, Method.REDUCTION, jobs=args.jobs, max_patterns=args.max_patterns)
            row["dual_agrees"] = [f.erased for f in dual.failures] == [f.erased for f in report.failures]
            ok = ok and row["dual_agrees"]
        if args.definition:
            try:
                definition = verify_mr_definition(code)
            except InstanceTooLarge:
                row["definition_agrees"] = None
            else:
                row["definition_agrees"] = definition.is_mr == report.is_mr
                ok = ok and row["definition_agrees"]
        if args.distance and construction_field_size(params) ** params.k <= args.max_codewords:
            row["min_distance"] = min_distance_bruteforce(code, args.max_codewords)
            row["predicted_distance"] = predicted_distance(params)
            ok = ok and row["min_distance"] == row["predicted_distance"]
        if args.mutations:
            broken = 0
            for _ in range(args.mutations):
                _, mutated = await amutation_trial(code, rng, jobs=args.jobs, max_patterns=args.max_patterns)
                broken += not mutated.is_mr
            row["mutations_broken"] = broken
        row["small_field_regime"] = small_field_regime(params)
        row["mr"] = report.is_mr
        row["pass"] = ok
        failed += not ok
        log.info("Sweep %s: %s", params.to_json(), "pass" if ok else "FAIL")
        rows.append(row)
        if store is not None:
            await store.write(row)
    return failed


def cmd_sweep(args: argparse.Namespace) -> int:
    return anyio.run(_sweep, args)


def cmd_selftest(args: argparse.Namespace) -> int:
    code = example1_code()
    observed = {}
    direct = verify_mr(code, Method.DIRECT, jobs=args.jobs)
    reduction = verify_mr(code, Method.REDUCTION, jobs=args.jobs)
    definition = verify_mr_definition(code)
    observed["total_patterns"] = direct.total_patterns
    observed["failures"] = len(direct.failures) + len(reduction.failures) + len(definition.failures)
    observed["min_distance"] = min_distance_bruteforce(code)
    observed["predicted_distance"] = predicted_distance(code.params)
    constructed = build_code(code.params)
    checks = {key: observed[key] == value for key, value in EXAMPLE1_EXPECTED.items()}
    checks["constructed_mr"] = verify_mr(constructed, jobs=args.jobs).is_mr
    checks["constructed_rank"] = constructed.H.rank() == code.params.parity_rows
    checks["singleton_lrc_bound"] = singleton_lrc_bound(9, 4, 2, 2) == 5
    _emit({"observed": observed, "checks": checks, "ok": all(checks.values())}, args.format)
    return EXIT_OK if all(checks.values()) else EXIT_COUNTEREXAMPLE


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmds", description="Construct and verify maximally recoverable codes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--error-json", action="store_true", help="report input errors as JSON on stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func: Callable[[argparse.Namespace], int], help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("--format", choices=["json", "table", "pow"], default="json")
        p.add_argument("--jobs", type=int, default=1)
        return p

    p = add("construct", cmd_construct, "build a code and print its JSON")
    _add_params(p, required=True)
    p.add_argument("--alphas", type=_text_list)
    p.add_argument("--gamma-basis", type=_text_list)

    p = add("verify", cmd_verify, "check every maximal erasure pattern")
    _add_code_source(p)
    p.add_argument("--method", choices=["direct", "reduction", "definition", "both"], default="direct")
    p.add_argument("--max-patterns", type=int, default=DEFAULT_MAX_PATTERNS)
    p.add_argument("--max-codewords", type=int, default=DEFAULT_MAX_CODEWORDS)
    p.add_argument("--distance", action="store_true", help="also compute the minimum distance")
    p.add_argument("--timing", action="store_true", help="include elapsed_ms")

    p = add("mindist", cmd_mindist, "brute-force minimum distance next to its prediction")
    _add_code_source(p)
    p.add_argument("--max-codewords", type=int, default=DEFAULT_MAX_CODEWORDS)

    p = add("encode", cmd_encode, "encode a message")
    _add_code_source(p)
    p.add_argument("--message", type=_text_list, required=True, help="comma-separated message elements")

    p = add("decode", cmd_decode, "fill in erased symbols")
    _add_code_source(p)
    p.add_argument("--word", required=True, help="codeword JSON file ('-' for stdin); erasures are null")

    p = add("bound", cmd_bound, "evaluate the distance bound and the field-size lower bound")
    p.set_defaults(format=None)
    for name in ("n", "k", "r", "delta"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.add_argument("--h", type=int)
    p.add_argument("--m", type=int)

    p = add("sweep", cmd_sweep, "construct and verify every valid parameter tuple within caps")
    p.add_argument("--q", type=_int_list, default=[4, 5, 7, 8, 9])
    p.add_argument("--delta", type=_int_list, default=[2, 3])
    p.add_argument("--h", type=_int_list, default=[1, 2, 3])
    p.add_argument("--r-max", type=int, default=4)
    p.add_argument("--m-max", type=int, default=4)
    p.add_argument("--max-patterns", type=int, default=10**6)
    p.add_argument("--max-codewords", type=int, default=DEFAULT_MAX_CODEWORDS)
    p.add_argument("--dual", action="store_true", help="also run the reduction verifier and require agreement")
    p.add_argument("--definition", action="store_true", help="also run the literal definition check where feasible")
    p.add_argument("--distance", action="store_true", help="also check the minimum distance where feasible")
    p.add_argument("--mutations", type=int, default=0, help="random single-entry mutations per instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--store", help="append one record per instance (.db for SQLite)")
    p.add_argument("--label", default="sweep")

    p = add("selftest", cmd_selftest, "run the bundled regression")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except INPUT_ERRORS as exc:
        if args.error_json:
            print(dumps({"error": type(exc).__name__, "message": str(exc)}))
        else:
            log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_USAGE
    return EXIT_USAGE  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
