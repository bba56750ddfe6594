"""
Command-line driver: sampling, predicate tables, construction,
verification, LP decoding, gap trials and vertex cover runs.

Every command prints a JSON result on stdout. Exit codes: 0 success,
2 verification failure, 3 cap exceeded, 4 usage or malformed input.
"""
import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from dotenv import load_dotenv

from .models.errors import CapExceededError, ClosureBudgetError, HierGapError, ResolutionAbortError, UsageError
from .models.pydantic_models import ErrorResponse, Hierarchy, PredicateKind, SystemConfig, format_rational
from .services.coset_service import coset_service
from .services.distribution_service import distribution_service
from .services.ensemble_service import ensemble_service
from .services.experiment_service import experiment_service
from .services.lasserre_service import lasserre_service
from .services.sherali_adams_service import sherali_adams_service
from .utils.logging_config import get_logger, setup_logging
from .utils.rng import trial_seed
from .utils.serialization import (
    coset_to_dict, distribution_to_dict, family_from_dict, graph_to_alist, graph_to_dict, hypergraph_to_dict,
    instance_from_dict, instance_to_dict, load_graph, moment_from_dict, read_json, write_json,
)

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION = 2
EXIT_CAP = 3
EXIT_USAGE = 4


def emit(payload: Any) -> None:
    if hasattr(payload, "model_dump_json"):
        print(payload.model_dump_json(indent=2))
    else:
        print(json.dumps(payload, indent=2, default=str))


def parse_bits(text: str) -> List[int]:
    cleaned = text.strip().replace(",", "").replace(" ", "")
    if not cleaned or any(ch not in "01" for ch in cleaned):
        raise UsageError(f"received word must be a string of 0/1, got {text!r}")
    return [int(ch) for ch in cleaned]


# Commands

def cmd_sample(args: argparse.Namespace) -> int:
    g = ensemble_service.sample_ldpc(args.n, args.dv, args.dc, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(graph_to_alist(g))
    meta = graph_to_dict(g)
    meta.pop("checks")
    result: Dict[str, Any] = {"code": str(out), **meta}
    if args.report_degrees:
        result["degrees"] = ensemble_service.degree_profile(g).model_dump(mode="json")
    write_json(out.with_suffix(".json"), result)
    emit(result)
    return EXIT_OK


def cmd_predicates(args: argparse.Namespace) -> int:
    if args.feasibility:
        k, q, kind = args.feasibility
        result = distribution_service.pi_feasibility(int(k), int(q), PredicateKind(kind))
        payload: Dict[str, Any] = {"k": result.k, "q": result.q, "kind": result.kind.value,
                                   "feasible": result.feasible}
        if result.certificate is not None:
            payload["certificate"] = {"multipliers": {name: format_rational(y) for name, y in
                                                      result.certificate.multipliers.items()},
                                      "rhs_value": format_rational(result.certificate.rhs_value)}
        if result.weights is not None:
            payload["weights_by_zeros"] = {str(r): format_rational(w) for r, w in result.weights.weights.items()}
        emit(payload)
        return EXIT_OK

    if args.hierarchy == Hierarchy.SHERALI_ADAMS.value:
        table = distribution_service.select_sa_predicates(args.dc)
        entries = {f"{arity}:{kind.value}": distribution_to_dict(dist) for (arity, kind), dist in table.entries.items()}
    else:
        table = coset_service.select_lasserre_predicates(args.dc)
        entries = {f"{arity}:{kind.value}": coset_to_dict(c) for (arity, kind), c in table.entries.items()}
    reports = {f"{arity}:{kind.value}": report.model_dump(mode="json") for (arity, kind), report in table.reports.items()}
    payload = {"d_c": args.dc, "q": table.q, "hierarchy": args.hierarchy, "entries": entries, "reports": reports}
    if args.out:
        write_json(args.out, payload)
    emit({"d_c": args.dc, "q": table.q, "certified": all(r.passed for r in table.reports.values()),
          "reports": reports})
    return EXIT_OK


def cmd_construct(args: argparse.Namespace) -> int:
    g = load_graph(args.code)
    if args.received:
        received = parse_bits(args.received)
    elif args.errors is not None:
        received = experiment_service.error_pattern(g.n, args.errors, args.seed)
    else:
        raise UsageError("give --received or --errors")
    outcome = experiment_service.construct(g, received, Hierarchy(args.hierarchy), args.rounds,
                                           seed=args.seed, brute_force=args.brute_force)
    out = Path(args.out)
    kind = "family" if args.hierarchy == Hierarchy.SHERALI_ADAMS.value else "moment_matrix"
    write_json(out / "solution.json", {"kind": kind, "solution": outcome.solution})
    write_json(out / "instance.json", instance_to_dict(outcome.instance))
    write_json(out / "verification.json", outcome.verification)
    write_json(out / "gap_report.json", outcome.gap)
    emit(outcome.gap)
    return EXIT_OK if outcome.gap.verified else EXIT_VERIFICATION


def cmd_verify(args: argparse.Namespace) -> int:
    data = read_json(args.solution)
    try:
        kind, body = data["kind"], data["solution"]
    except (KeyError, TypeError):
        raise UsageError(f"{args.solution} is not a stored solution")
    if kind == "family":
        instance_path = Path(args.instance) if args.instance else Path(args.solution).with_name("instance.json")
        if not instance_path.exists():
            raise UsageError("verifying a family needs --instance")
        instance = instance_from_dict(read_json(instance_path))
        report = sherali_adams_service.verify_family(family_from_dict(body), instance)
    elif kind == "moment_matrix":
        report = lasserre_service.verify_lasserre(moment_from_dict(body))
    else:
        raise UsageError(f"unknown solution kind {kind!r}")
    emit(report)
    return EXIT_OK if report.passed else EXIT_VERIFICATION


def cmd_lp_decode(args: argparse.Namespace) -> int:
    g = load_graph(args.code)
    result = sherali_adams_service.lp_decode(g, parse_bits(args.received))
    if args.out:
        write_json(args.out, result)
    emit(result)
    return EXIT_OK


def _trial(params: Dict[str, Any]) -> Dict[str, Any]:
    return experiment_service.gap_trial(**params)


def cmd_gap_report(args: argparse.Namespace) -> int:
    hierarchy = Hierarchy(args.hierarchy)
    params = [{"n": args.n, "d_v": args.dv, "d_c": args.dc, "hierarchy": hierarchy, "rounds": args.rounds,
               "errors": args.errors, "seed": trial_seed(args.seed, i), "s_max": args.s_max,
               "alpha": Fraction(args.alpha), "boundary": not args.union_expansion} for i in range(args.trials)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_trial, params))
    else:
        rows = [_trial(p) for p in params]
    for i, row in enumerate(rows):
        row["trial"] = i
    frame = pd.DataFrame(rows)
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(args.csv, index=False)
    summary = {"trials": len(rows), "seed": args.seed, "hierarchy": hierarchy.value,
               "rows": rows, "caps": SystemConfig.from_env().model_dump(mode="json")}
    if args.out:
        write_json(args.out, summary)
    emit(summary)
    failed = [r for r in rows if r.get("status") == "ok" and not r.get("verified")]
    return EXIT_VERIFICATION if failed else EXIT_OK


def cmd_hvc(args: argparse.Namespace) -> int:
    h = ensemble_service.sample_hypergraph(args.n, Fraction(args.beta), args.k, args.seed,
                                           max_overlap=args.max_overlap)
    report = experiment_service.hvc_report(h, Fraction(args.epsilon), args.rounds)
    if args.out:
        write_json(args.out, {"hypergraph": hypergraph_to_dict(h), "report": report.model_dump(mode="json")})
    emit(report)
    return EXIT_VERIFICATION if report.lasserre_verified is False else EXIT_OK


# Parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hiergap",
                                     description="Sherali-Adams and Lasserre gap certificates for LDPC decoding")
    parser.add_argument("--log-level", default=None, help="overrides HIERGAP_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a parity-check graph from the socket model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dv", type=int, required=True)
    p.add_argument("--dc", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="alist path; metadata goes next to it as .json")
    p.add_argument("--report-degrees", action="store_true")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("predicates", help="certified predicate tables or the feasibility oracle")
    p.add_argument("--hierarchy", choices=["sa", "lasserre"], default="sa")
    p.add_argument("--dc", type=int)
    p.add_argument("--feasibility", nargs=3, metavar=("K", "Q", "KIND"))
    p.add_argument("--out")
    p.set_defaults(handler=cmd_predicates)

    p = sub.add_parser("construct", help="build and verify a fractional solution for a received word")
    p.add_argument("--code", required=True)
    p.add_argument("--received")
    p.add_argument("--errors", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hierarchy", choices=["sa", "lasserre"], required=True)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--brute-force", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=cmd_construct)

    p = sub.add_parser("verify", help="re-check a stored family or moment matrix")
    p.add_argument("--solution", required=True)
    p.add_argument("--instance", help="instance JSON for families (default: instance.json beside the solution)")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("lp-decode", help="exact Feldman LP decoding with a uniqueness check")
    p.add_argument("--code", required=True)
    p.add_argument("--received", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_lp_decode)

    p = sub.add_parser("gap-report", help="construction trials over sampled codes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dv", type=int, default=3)
    p.add_argument("--dc", type=int, required=True)
    p.add_argument("--hierarchy", choices=["sa", "lasserre"], required=True)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--errors", type=int, required=True)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--s-max", type=int, default=0, help="exhaustive expansion check up to this many checks")
    p.add_argument("--alpha", default="9/4")
    p.add_argument("--union-expansion", action="store_true",
                   help="count the union of the checks instead of their boundary")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--csv")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_gap_report)

    p = sub.add_parser("hvc", help="vertex cover gap on a sampled hypergraph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--beta", default="2")
    p.add_argument("--epsilon", default="3/5")
    p.add_argument("--max-overlap", type=int, help="largest intersection of two edges")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_hvc)
    return parser


def _fail(error: str, message: str, exit_code: int, details: Optional[Dict[str, Any]] = None) -> int:
    response = ErrorResponse(error=error, message=message, exit_code=exit_code, details=details)
    print(response.model_dump_json(), file=sys.stderr)
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    setup_logging(args.log_level or os.getenv("HIERGAP_LOG_LEVEL", "INFO"),
                  os.getenv("HIERGAP_LOG_FILE", "logs/hiergap.log"))
    if args.command == "predicates" and not args.feasibility and args.dc is None:
        return _fail("UsageError", "predicates needs --dc or --feasibility", EXIT_USAGE)

    try:
        return args.handler(args)
    except CapExceededError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_CAP,
                     {"cap": exc.cap, "limit": exc.limit, "requested": exc.requested})
    except ClosureBudgetError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_CAP, {"size": exc.size, "budget": exc.budget})
    except ResolutionAbortError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_VERIFICATION,
                     {"status": exc.status, "derivation": exc.witness[:50]})
    except (UsageError, ValueError, KeyError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_USAGE)
    except HierGapError as exc:
        logger.error("command failed", command=args.command, error=str(exc))
        return _fail(type(exc).__name__, str(exc), EXIT_VERIFICATION)


if __name__ == "__main__":
    sys.exit(main())
