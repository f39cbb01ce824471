"""Command line front end.

Exit codes: 0 for a computed answer, 1 when a run is falsified or a
discrepancy is found, 2 for usage errors, 3 when a search budget runs out.
"""

from __future__ import annotations

import argparse
import json
import sys

from .common import FalsificationError
from .config import SolveConfig, load_config
from .digraph import FormatError, dump_digraph_text, load_digraph_text
from .harness import (
    FamilyParams,
    GenerationFailedError,
    classify,
    fuzz,
    gen_counterexample_family,
    replay,
)
from .oracle import BUDGET_EXHAUSTED as ORACLE_BUDGET
from .oracle import solve_exact
from .pipeline import FALSIFIED_VERDICT, run_pipeline
from .polymorphism import (
    BUDGET_EXHAUSTED,
    check_polymorphism,
    check_weak_nu,
    dump_table_text,
    find_weak_nu,
    load_table_text,
)

_CONFIG_FIELDS = (
    "k",
    "pick_order",
    "wnu_node_budget",
    "oracle_node_budget",
    "validator_frequency",
    "seed",
    "inject_fault",
)


def _shared_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    s = argparse.SUPPRESS
    p.add_argument("--config", default=s, help="JSON config file")
    p.add_argument(
        "--show-config",
        action="store_true",
        default=s,
        help="print the resolved configuration and exit",
    )
    p.add_argument("--k", type=int, default=s)
    p.add_argument("--pick-order", choices=("lex", "revlex"), default=s)
    p.add_argument("--wnu-budget", type=int, dest="wnu_node_budget", default=s)
    p.add_argument(
        "--oracle-budget", type=int, dest="oracle_node_budget", default=s
    )
    p.add_argument(
        "--validator-frequency", choices=("boundary", "off"), default=s
    )
    p.add_argument("--seed", type=int, default=s)
    p.add_argument("--inject-fault", choices=("retarget-corrupt",), default=s)
    return p


def _resolve_config(args) -> SolveConfig:
    overrides = {
        name: getattr(args, name)
        for name in _CONFIG_FIELDS
        if hasattr(args, name)
    }
    return load_config(getattr(args, "config", None), **overrides)


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _maybe_show_config(args, config: SolveConfig) -> bool:
    if getattr(args, "show_config", False):
        print(config.to_json())
        return True
    return False


def _cmd_solve(args) -> int:
    config = _resolve_config(args)
    if _maybe_show_config(args, config):
        return 0
    g = load_digraph_text(_read(args.g_file))
    h = load_digraph_text(_read(args.h_file))
    if args.phi_file:
        phi = load_table_text(_read(args.phi_file))
    else:
        phi = find_weak_nu(h, k=config.k, node_budget=config.wnu_node_budget)
        if phi is BUDGET_EXHAUSTED:
            print(f"table search budget exhausted (k={config.k})")
            return 3
        if phi is None:
            print(
                f"verdict: inapplicable "
                f"(no idempotent pattern-agreeing table at k={config.k})"
            )
            return 0
    result = run_pipeline(g, h, phi, config)
    print(f"verdict: {result.verdict}")
    if result.assignment is not None:
        print("assignment:", " ".join(str(v) for v in result.assignment))
    if result.falsification is not None:
        print("falsification:", json.dumps(result.falsification.to_json(), sort_keys=True))
    if result.empty_witness is not None:
        print("empty-witness:", " ".join(str(v) for v in result.empty_witness))
    if args.trace_out:
        header = {
            "version": 1,
            "g": g.digest(),
            "h": h.digest(),
            "phi": phi.digest(),
            "verdict": result.verdict,
        }
        _write(args.trace_out, result.trace.to_text(header))
    if args.report_out:
        _write(args.report_out, result.report_json() + "\n")
    return 1 if result.verdict == FALSIFIED_VERDICT else 0


def _cmd_wnu_find(args) -> int:
    config = _resolve_config(args)
    if _maybe_show_config(args, config):
        return 0
    h = load_digraph_text(_read(args.h_file))
    phi = find_weak_nu(h, k=config.k, node_budget=config.wnu_node_budget)
    if phi is BUDGET_EXHAUSTED:
        print(f"budget exhausted after {config.wnu_node_budget} nodes")
        return 3
    if phi is None:
        print(f"none: exhaustive refutation at k={config.k}")
        return 0
    text = dump_table_text(phi)
    if args.out:
        _write(args.out, text)
        print(f"found: table written to {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_fuzz(args) -> int:
    config = _resolve_config(args)
    if _maybe_show_config(args, config):
        return 0
    summary = fuzz(
        trials=args.trials,
        seed=config.seed,
        profile=args.profile,
        config=config,
        report_path=args.report_out,
    )
    print(json.dumps(summary.counts, sort_keys=True))
    print(f"report-digest: {summary.digest}")
    return 1 if summary.counts["discrepancies"] else 0


def _cmd_replay(args) -> int:
    summary = replay(args.report)
    print(f"replayed {summary.total} discrepancies, {summary.matched} matched")
    if summary.mismatches:
        print("mismatched line indices:", summary.mismatches)
        return 1
    return 0


def _cmd_gen(args) -> int:
    params = FamilyParams(
        levels=args.levels,
        comp_vertices=args.comp_size,
        comp_arc_prob=args.arc_prob,
        instance_vertices=args.g_size,
        instance_arc_prob=args.arc_prob,
        retry_budget=args.retry_budget,
    )
    try:
        g, h, meta = gen_counterexample_family(params, args.gen_seed)
    except GenerationFailedError as err:
        print(str(err), file=sys.stderr)
        return 1
    _write(args.out_g, dump_digraph_text(g))
    _write(args.out_h, dump_digraph_text(h))
    if args.meta_out:
        _write(args.meta_out, json.dumps(meta, sort_keys=True) + "\n")
    print(f"g: {g.n} vertices -> {args.out_g}")
    print(f"h: {h.n} vertices -> {args.out_h}")
    return 0


def _cmd_validate(args) -> int:
    config = _resolve_config(args)
    if _maybe_show_config(args, config):
        return 0
    config = config.replace(validator_frequency="boundary")
    g = load_digraph_text(_read(args.g_file))
    h = load_digraph_text(_read(args.h_file))
    if args.phi_file:
        phi = load_table_text(_read(args.phi_file))
    else:
        phi = find_weak_nu(h, k=config.k, node_budget=config.wnu_node_budget)
        if phi is BUDGET_EXHAUSTED:
            print("table search budget exhausted")
            return 3
        if phi is None:
            print("inapplicable: no suitable table layer")
            return 0
    poly = check_polymorphism(h, phi)
    wnu = check_weak_nu(phi)
    print(f"polymorphism: {'ok' if poly.is_polymorphism else 'FAIL'}")
    print(f"pattern-agreement: {'ok' if wnu.is_weak_nu else 'FAIL'}")
    print(f"idempotent: {'ok' if wnu.is_idempotent else 'FAIL'}")
    result = run_pipeline(g, h, phi, config)
    print(f"pipeline: {result.verdict} ({result.validations_run} validations)")
    oracle_result = solve_exact(g, h, node_budget=config.oracle_node_budget)
    if oracle_result is ORACLE_BUDGET:
        print("oracle: budget exhausted, no cross-check")
        return 3
    oracle_verdict = "hom" if oracle_result is not None else "none"
    print(f"oracle: {oracle_verdict}")
    label = classify(result.verdict, oracle_verdict)
    if label is not None:
        print(f"DISCREPANCY: {label}")
        return 1
    print("consistent")
    return 0


def build_parser() -> argparse.ArgumentParser:
    shared = _shared_flags()
    parser = argparse.ArgumentParser(
        prog="homsolver",
        description="digraph homomorphism solving with built-in falsification",
    )
    parser.add_argument(
        "--show-config", action="store_true", help="print default configuration"
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("solve", parents=[shared], help="run the full pipeline")
    p.add_argument("--g-file", required=True)
    p.add_argument("--h-file", required=True)
    p.add_argument("--phi-file")
    p.add_argument("--trace-out")
    p.add_argument("--report-out")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser(
        "wnu-find", parents=[shared], help="search for a table layer"
    )
    p.add_argument("--h-file", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_wnu_find)

    p = sub.add_parser("fuzz", parents=[shared], help="randomized oracle cross-check")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--profile", choices=("random", "mixed", "counterexample", "loop"),
                   default="mixed")
    p.add_argument("--report-out")
    p.set_defaults(func=_cmd_fuzz)

    p = sub.add_parser("replay", parents=[shared], help="re-run a report file")
    p.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser(
        "gen", parents=[shared], help="generate a layered two-sided instance"
    )
    p.add_argument("--gen-seed", type=int, default=0)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--comp-size", type=int, default=4)
    p.add_argument("--g-size", type=int, default=4)
    p.add_argument("--arc-prob", type=float, default=0.55)
    p.add_argument("--retry-budget", type=int, default=80)
    p.add_argument("--out-g", required=True)
    p.add_argument("--out-h", required=True)
    p.add_argument("--meta-out")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser(
        "validate", parents=[shared], help="check one instance end to end"
    )
    p.add_argument("--g-file", required=True)
    p.add_argument("--h-file", required=True)
    p.add_argument("--phi-file")
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        if getattr(args, "show_config", False):
            print(SolveConfig().to_json())
            return 0
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except FormatError as err:
        print(f"input error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"missing file: {err.filename}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except FalsificationError as err:
        print(
            f"falsified: {json.dumps(err.event.to_json(), sort_keys=True)}",
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
