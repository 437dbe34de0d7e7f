"""
Subcommand parsing and dispatch.

Every command writes exactly one JSON object to standard output. Exit
codes: 0 on success, 1 on usage or input errors, 2 when an input fails
validation or a certificate check fails.
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Tuple

from backend.certificates import FEASIBILITY_TOL, certify_base_norm
from backend.channels import CPTP_TOL, is_cptp, random_channel
from backend.conj_sampler import estimate_conjugate, quasiprob_weights
from backend.errors import DualChanError, ValidationError
from backend.linalg import HERMITIAN_TOL
from backend.petz import BUDGET_POLICIES, attempt_budget, estimate_adjoint, estimate_petz
from backend.sampling import WORKERS_ENV, hoeffding_rounds
from backend.transpose_protocol import simulate_transpose
from cli.loaders import (
    InputError, channel_from_json, channel_to_json, load_instance, matrix_to_json, read_json,
    write_json,
)

SCHEMA = "dualchan/1"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2


class UsageError(Exception):
    """Raised instead of argparse's own exit so usage errors map to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dimension_range(text: str) -> Tuple[int, int]:
    try:
        lo, hi = (int(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    if lo < 2 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid dimension range {text!r}")
    return lo, hi


def _add_estimator_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--eps", type=float, required=True, help="target accuracy epsilon")
    parser.add_argument("--delta", type=float, required=True, help="target failure probability")
    parser.add_argument("--seed", type=int, required=True, help="master random seed")
    parser.add_argument("--workers", type=int, default=None,
                        help=f"sampling threads (default: ${WORKERS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dualchan", description="Dual quantum channel simulation toolkit")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    parser.add_argument("--tol", type=float, default=HERMITIAN_TOL,
                        help="validation tolerance for states and observables")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("transpose-sim", help="simulate the post-selected transpose")
    p.add_argument("--channel", required=True)
    p.add_argument("--state", required=True)

    for name, help_text in (("conjugate-estimate", "estimate tr[O N*(rho)]"),
                            ("adjoint-estimate", "estimate tr[O N^dagger(rho)]")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--channel", required=True)
        p.add_argument("--state", required=True)
        p.add_argument("--obs", required=True)
        p.add_argument("--rounds", type=int, default=None,
                       help="override the Hoeffding round count")
        _add_estimator_flags(p)

    p = sub.add_parser("petz-estimate", help="estimate tr[O P(omega)]")
    p.add_argument("--instance", required=True)
    p.add_argument("--budget", choices=BUDGET_POLICIES, default="max")
    p.add_argument("--attempts", type=int, default=None, help="override the attempt budget")
    _add_estimator_flags(p)

    p = sub.add_parser("certify-basenorm", help="verify the optimal-overhead certificates")
    p.add_argument("--da", type=int)
    p.add_argument("--db", type=int)
    p.add_argument("--da-range", type=_dimension_range)
    p.add_argument("--db-range", type=_dimension_range)
    p.add_argument("--tol", dest="cert_tol", type=float, default=FEASIBILITY_TOL)
    p.add_argument("--random-channels", type=int, default=20)

    p = sub.add_parser("gen-channel", help="write a random channel file")
    p.add_argument("--din", type=int, required=True)
    p.add_argument("--dout", type=int, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output", default=None)
    return parser


def _transpose_sim(args) -> Tuple[int, Dict]:
    inputs = load_instance({"channel": args.channel, "state": args.state}, args.tol)
    result = simulate_transpose(inputs.channel, inputs.state)
    report = {
        "success_probability": result.success_probability,
        "succeeded": result.succeeded,
        "unnormalized": matrix_to_json(result.unnormalized),
        "conditional_state": matrix_to_json(result.conditional_state.matrix) if result.succeeded else None,
    }
    return EXIT_OK, report


def _estimate(args, adjoint: bool) -> Tuple[int, Dict]:
    inputs = load_instance({"channel": args.channel, "state": args.state, "observable": args.obs},
                           args.tol, estimator=True)
    n = inputs.channel
    rounds = args.rounds
    if rounds is None:
        gamma = quasiprob_weights(n.d_in, n.d_out).gamma
        value_range = gamma * n.d_in * n.d_out if adjoint else gamma
        rounds = hoeffding_rounds(args.eps, args.delta, value_range)
    if adjoint:
        report = estimate_adjoint(n, inputs.state, inputs.observable, rounds, args.seed, args.workers)
    else:
        report = estimate_conjugate(n, inputs.state, inputs.observable, rounds, args.seed, args.workers)
    data = report.to_dict()
    data.update({"epsilon": args.eps, "delta": args.delta})
    return EXIT_OK, data


def _petz_estimate(args) -> Tuple[int, Dict]:
    inst = load_instance({"petz": args.instance}, args.tol, estimator=True).petz
    budget = attempt_budget(inst, args.eps, args.delta, args.budget)
    report = estimate_petz(inst, args.eps, args.delta, args.seed, args.workers,
                           budget=args.budget, attempts=args.attempts)
    data = report.to_dict()
    data.update({
        "epsilon": args.eps,
        "delta": args.delta,
        "budget": {
            "policy": args.budget,
            "hoeffding_part": budget.hoeffding_part,
            "chernoff_part": budget.chernoff_part,
            "total": budget.total,
        },
    })
    return EXIT_OK, data


def _certify(args) -> Tuple[int, Dict]:
    if args.da_range or args.db_range:
        if not (args.da_range and args.db_range):
            raise UsageError("grid mode needs both --da-range and --db-range")
        reports = [
            certify_base_norm(d_a, d_b, args.cert_tol, args.random_channels)
            for d_a in range(args.da_range[0], args.da_range[1] + 1)
            for d_b in range(args.db_range[0], args.db_range[1] + 1)
        ]
        passed = all(r.passed for r in reports)
        return (EXIT_OK if passed else EXIT_INVALID,
                {"reports": [r.to_dict() for r in reports], "pass": passed})
    if args.da is None or args.db is None:
        raise UsageError("certify-basenorm needs --da and --db (or --da-range and --db-range)")
    report = certify_base_norm(args.da, args.db, args.cert_tol, args.random_channels)
    return EXIT_OK if report.passed else EXIT_INVALID, report.to_dict()


def _gen_channel(args) -> Tuple[int, Dict]:
    try:
        channel = random_channel(args.din, args.dout, args.rank, args.seed)
    except ValueError as e:
        raise UsageError(str(e))
    record = channel_to_json(channel)
    report: Dict[str, Any] = {"d_in": channel.d_in, "d_out": channel.d_out,
                              "kraus_rank": channel.kraus_rank, "seed": args.seed}
    if args.output:
        write_json(args.output, record)
        # Reload to confirm the file round-trips through validation
        reloaded = channel_from_json(read_json(args.output), CPTP_TOL)
        report["output"] = args.output
        report["cptp"] = bool(is_cptp(reloaded.choi, reloaded.d_in, reloaded.d_out))
    else:
        report["channel"] = record
    return EXIT_OK, report


COMMANDS = {
    "transpose-sim": _transpose_sim,
    "conjugate-estimate": lambda args: _estimate(args, adjoint=False),
    "adjoint-estimate": lambda args: _estimate(args, adjoint=True),
    "petz-estimate": _petz_estimate,
    "certify-basenorm": _certify,
    "gen-channel": _gen_channel,
}


def configure_logging(verbose: bool):
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def emit(report: Dict, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(report, sort_keys=True) + "\n")


def run(argv: Optional[List[str]] = None, stream=None) -> int:
    """
    Parse argv, execute the subcommand and write its JSON report.

    Returns:
        Process exit code
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    # Known before parsing so that usage errors still name the subcommand
    command = next((token for token in argv if token in COMMANDS), None)
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        if command is None:
            raise UsageError("a subcommand is required")
        configure_logging(args.verbose)
        code, report = COMMANDS[command](args)
        report = {"schema": SCHEMA, "command": command, "status": "ok" if code == EXIT_OK else "failed",
                  **report}
    except (UsageError, InputError) as e:
        code = EXIT_USAGE
        report = {"schema": SCHEMA, "command": command, "status": "error", "error": str(e)}
    except ValidationError as e:
        code = EXIT_INVALID
        report = {"schema": SCHEMA, "command": command, "status": "error", "error": str(e),
                  "constraint": e.constraint, "magnitude": e.magnitude}
    except DualChanError as e:
        code = EXIT_INVALID
        report = {"schema": SCHEMA, "command": command, "status": "error", "error": str(e)}
    except ValueError as e:
        # Out-of-range numeric flags rejected by the backend
        code = EXIT_USAGE
        report = {"schema": SCHEMA, "command": command, "status": "error", "error": str(e)}
    emit(report, stream)
    return code
