"""Command-line interface.

Every operation of the library is reachable over a file or an inline
expression.  Exit codes are three-valued: 0 for positive verdicts
(well-formed, normalised, typeable, valid, strongly normalising), 1 for
negative mathematical verdicts, 2 for usage or parse errors, so scripts can
tell "the property fails" from "the tool was misused".
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import bridge, rewrite, sn, typecheck, wellformed
from .syntax import (
    LJ, ND, ParseError, ResourceSet, parse, pretty, pretty_type, sort_of, TERM,
)

OK, FAIL, USAGE = 0, 1, 2


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        expr_text = _read_input(args)
        res = ResourceSet.parse(args.res)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    try:
        e = parse(expr_text, args.base) if expr_text is not None else None
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return USAGE
    try:
        return args.handler(args, e, res)
    except rewrite.ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rclam",
        description="resource-control lambda calculi: checking, reduction, "
                    "typing, translation, and strong-normalisation analysis",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_input=True):
        sp.add_argument("--base", choices=[ND, LJ], default=ND,
                        help="natural-deduction (nd) or sequent (lj) base")
        sp.add_argument("--res", default="none",
                        help="explicit resources: none, c, w, or cw")
        sp.add_argument("--fuel", type=int, default=1000)
        sp.add_argument("--json", action="store_true",
                        help="emit one JSON document on stdout")
        if needs_input:
            group = sp.add_mutually_exclusive_group(required=True)
            group.add_argument("-e", "--expr", help="inline expression")
            group.add_argument("file", nargs="?", help="file with one expression")

    sp = sub.add_parser("check", help="well-formedness under the resource set")
    common(sp)
    sp.set_defaults(handler=_cmd_check)

    sp = sub.add_parser("reduce", help="contract the first redex once")
    common(sp)
    sp.set_defaults(handler=_cmd_reduce)

    sp = sub.add_parser("normalize", help="reduce to normal form")
    common(sp)
    sp.add_argument("--strategy", choices=["leftmost", "exhaustive"],
                    default="leftmost")
    sp.add_argument("--trace", action="store_true",
                    help="one line per step: rule, path, result")
    sp.set_defaults(handler=_cmd_normalize)

    sp = sub.add_parser("type", help="principal simple type")
    common(sp)
    sp.set_defaults(handler=_cmd_type)

    sp = sub.add_parser("itype", help="intersection typing: check or synthesize")
    common(sp, needs_input=False)
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--check", metavar="FILE",
                       help="validate a derivation JSON file")
    group.add_argument("--synthesize", metavar="EXPR",
                       help="build a derivation for a strongly normalising expression")
    sp.set_defaults(handler=_cmd_itype)

    sp = sub.add_parser("translate", help="map a sequent term into the "
                                          "natural-deduction base")
    common(sp)
    sp.set_defaults(handler=_cmd_translate)

    sp = sub.add_parser("measure", help="size and resource norms")
    common(sp)
    sp.set_defaults(handler=_cmd_measure)

    sp = sub.add_parser("sn", help="strong-normalisation verdict")
    common(sp)
    sp.set_defaults(handler=_cmd_sn)
    return p


def _read_input(args) -> Optional[str]:
    expr = getattr(args, "expr", None)
    path = getattr(args, "file", None)
    if expr is not None:
        return expr
    if path is not None:
        with open(path) as fh:
            lines = fh.read().splitlines()
        return " ".join(ln for ln in lines if not ln.strip().startswith("#"))
    return None


def _emit(args, human: str, payload: dict) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(human)


def _cmd_check(args, e, res) -> int:
    v = wellformed.check(e, res, args.base)
    if v is None:
        _emit(args, f"well-formed in ({args.base}, R={res})",
              {"command": "check", "base": args.base, "res": str(res),
               "wellformed": True})
        return OK
    _emit(args, f"violation: {v}",
          {"command": "check", "base": args.base, "res": str(res),
           "wellformed": False, "clause": v.clause,
           "path": list(v.path), "detail": v.detail})
    return FAIL


def _cmd_reduce(args, e, res) -> int:
    _require_wf(e, res, args.base)
    rs = rewrite.redexes(e, args.base, res)
    if not rs:
        _emit(args, f"normal form: {pretty(e)}",
              {"command": "reduce", "normal": True, "expr": pretty(e)})
        return OK
    out = rewrite.step(e, rs[0], res)
    _emit(args, f"{rs[0].describe()}\n{pretty(out)}",
          {"command": "reduce", "normal": False, "rule": rs[0].rule,
           "path": list(rs[0].path), "expr": pretty(out)})
    return OK


def _cmd_normalize(args, e, res) -> int:
    _require_wf(e, res, args.base)
    r = rewrite.normalize(e, args.base, res, strategy=args.strategy,
                          fuel=args.fuel)
    steps = [
        {"rule": s.redex.rule, "path": list(s.redex.path),
         "expr": pretty(s.result)}
        for s in r.trace
    ]
    if args.trace and not args.json:
        for s in steps:
            print(f"{s['rule']} at {'/'.join(map(str, s['path'])) or 'root'}: "
                  f"{s['expr']}")
    payload = {"command": "normalize", "normal": r.normal,
               "steps": steps if args.trace else len(steps),
               "expr": pretty(r.expr)}
    if r.normal:
        _emit(args, f"normal form after {len(steps)} steps: {pretty(r.expr)}", payload)
        return OK
    _emit(args, f"fuel exhausted after {len(steps)} steps: {pretty(r.expr)}", payload)
    return FAIL


def _cmd_type(args, e, res) -> int:
    _require_wf(e, res, args.base)
    r = typecheck.infer_simple(e, args.base, res)
    if isinstance(r, typecheck.Untypeable):
        _emit(args, str(r), {"command": "type", "typeable": False,
                             "reason": r.reason})
        return FAIL
    stoup = pretty_type(r.stoup) if r.stoup is not None else None
    human = f"{r.basis}; {stoup} |- {pretty_type(r.ty)}" if stoup else \
        f"{r.basis} |- {pretty_type(r.ty)}"
    _emit(args, human, {
        "command": "type", "typeable": True,
        "basis": {str(k): pretty_type(v) for k, v in r.basis.items},
        "stoup": stoup, "type": pretty_type(r.ty),
    })
    return OK


def _cmd_itype(args, e, res) -> int:
    if args.check:
        with open(args.check) as fh:
            d = typecheck.derivation_loads(fh.read(), args.base)
        inv = typecheck.check_derivation(d, res, args.base)
        if inv is None:
            _emit(args, "valid derivation",
                  {"command": "itype", "valid": True,
                   "subject": pretty(d.subject), "type": pretty_type(d.ty)})
            return OK
        _emit(args, str(inv), {"command": "itype", "valid": False,
                               "path": list(inv.path), "reason": inv.reason})
        return FAIL
    try:
        expr = parse(args.synthesize, args.base)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return USAGE
    _require_wf(expr, res, args.base)
    r = sn.synthesize(expr, args.base, res, fuel=args.fuel)
    if not r.ok:
        _emit(args, f"no derivation: {r.failure} ({r.verdict})",
              {"command": "itype", "synthesized": False,
               "failure": r.failure, "verdict": r.verdict.kind})
        return FAIL
    doc = typecheck.derivation_to_json(r.derivation, args.base)
    if args.json:
        print(json.dumps({"command": "itype", "synthesized": True,
                          "derivation": doc}, indent=2, sort_keys=True))
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))
    return OK


def _cmd_translate(args, e, res) -> int:
    if args.base != LJ or sort_of(e) != TERM:
        print("error: translate expects a sequent-base term", file=sys.stderr)
        return USAGE
    _require_wf(e, res, LJ)
    out = bridge.translate_term(e, res)
    _emit(args, pretty(out), {"command": "translate", "expr": pretty(out)})
    return OK


def _cmd_measure(args, e, res) -> int:
    m = bridge.measures(e)
    _emit(args, str(m), {"command": "measure", "size": m.size,
                         "cnorm": m.cnorm, "wnorm": m.wnorm})
    return OK


def _cmd_sn(args, e, res) -> int:
    _require_wf(e, res, args.base)
    v = sn.is_sn(e, args.base, res, fuel=args.fuel)
    payload = {"command": "sn", "verdict": v.kind,
               "max_path_len": v.max_path_len, "graph_size": v.graph_size,
               "cycle": list(v.cycle)}
    _emit(args, str(v), payload)
    return OK if v.kind == "sn" else FAIL


def _require_wf(e, res, base) -> None:
    v = wellformed.check(e, res, base)
    if v is not None:
        raise rewrite.ContractError(f"ill-formed input: {v}")


if __name__ == "__main__":
    sys.exit(main())
