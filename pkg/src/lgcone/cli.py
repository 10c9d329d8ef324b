"""Command line front end: ``lgcone {model,ifunction,invariants,verify}``.

Exit codes: 0 success, 1 usage error, 2 model invariant violation,
3 verification failure, 4 internal inconsistency.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .exactseries import dump, format_rational
from .hyperi import EpsilonChamber, big_I, small_I, unstable_sum
from .lgmodel import (INFINITY, FermatModel, ModelError, build_model, chamber_walls,
                      epsilon_text, load_model_file, parse_epsilon)
from .cone.bigj import big_J
from .cone.pipelines import (chamber_label, cor4_check, j_epsilon, mirror_small, routes_check,
                             selection_check, sigma_check, string_dilaton_check, transport_check)
from .cone.reconstruction import Orders, ReconstructionError, regularity_check
from .cone.tables import InconsistentTableError

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_VERIFY, EXIT_INTERNAL = 0, 1, 2, 3, 4
DEFAULT_EPS = parse_epsilon("1/2")
CHECKS = ("regularity", "cor4", "transport", "string", "sigma", "routes", "selection")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def thread_count(env=None) -> int:
    """LGCONE_THREADS as a positive int (default 1).  Computations run on one thread."""
    raw = (os.environ if env is None else env).get("LGCONE_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"LGCONE_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"LGCONE_THREADS must be a positive integer, got {raw!r}")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--weights", help="comma separated weights, e.g. 1,1,1,1,1")
    common.add_argument("--degree", type=int, help="degree d of the Fermat polynomial")
    common.add_argument("--model", help="JSON file with weights and degree")
    common.add_argument("--config", help="JSON job file; its keys mirror the long flags")
    common.add_argument("--eps", action="append", help="epsilon: p/q, infinity or zero (repeatable)")
    common.add_argument("--order", type=int, help="weighted u-degree T_u")
    common.add_argument("--t-order", type=int, dest="t_order", help="t-degree T_t")
    common.add_argument("--zneg", type=int, help="keep z-powers >= -ZNEG in dumps")
    common.add_argument("--small", action="store_true", default=None,
                        help="restrict to the degree <= 1 directions")
    common.add_argument("--check", action="append", choices=CHECKS, help="verification to run (repeatable)")
    common.add_argument("--inject-fault", action="store_true", default=None, dest="inject_fault",
                        help="perturb one coefficient before the regularity check")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv", "dump"), dest="format")

    parser = _Parser(prog="lgcone", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("model", parents=[common], help="describe a model")
    sub.add_parser("ifunction", parents=[common], help="dump the I-function or an unstable sum")
    sub.add_parser("invariants", parents=[common], help="compute an invariant table")
    sub.add_parser("verify", parents=[common], help="run consistency checks")
    return parser


DEFAULTS = {"order": None, "t_order": 0, "zneg": None, "small": False, "check": None,
            "inject_fault": False, "out": None, "format": None, "eps": None,
            "weights": None, "degree": None, "model": None}


def resolve(args: argparse.Namespace) -> dict:
    """Merge the config file (if any) under explicitly given flags."""
    opts = dict(DEFAULTS)
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        for key, value in data.items():
            key = key.replace("-", "_")
            if key == "command":
                if value != args.command:
                    raise UsageError(f"config is for command {value!r}, not {args.command!r}")
                continue
            if key not in opts:
                raise UsageError(f"unknown config key {key!r}")
            opts[key] = value
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    if isinstance(opts["eps"], (str, int)):
        opts["eps"] = [opts["eps"]]
    if isinstance(opts["check"], str):
        opts["check"] = [opts["check"]]
    for key in ("order", "t_order", "zneg"):
        if opts[key] is not None and (not isinstance(opts[key], int) or opts[key] < 0):
            raise UsageError(f"{key} must be a nonnegative integer")
    try:
        opts["eps"] = [parse_epsilon(e) for e in opts["eps"]] if opts["eps"] else None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return opts


def load_model(opts: dict) -> FermatModel:
    if opts["model"]:
        try:
            return load_model_file(opts["model"])
        except (OSError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise UsageError(f"cannot read model file: {exc}") from None
    if opts["weights"] is None or opts["degree"] is None:
        raise UsageError("give --weights and --degree, or --model")
    weights = opts["weights"]
    if isinstance(weights, str):
        try:
            weights = [int(w) for w in weights.replace(",", " ").split()]
        except ValueError:
            raise UsageError(f"bad weights {opts['weights']!r}") from None
    return build_model(weights, opts["degree"])


def _require(opts: dict, key: str, flag: str) -> int:
    if opts[key] is None:
        raise UsageError(f"{flag} is required")
    return opts[key]


# commands

def cmd_model(model: FermatModel, opts: dict) -> tuple:
    walls = [epsilon_text(w) for w in chamber_walls(4)] + ["..."]
    report = {
        "model": model.to_json(),
        "charges": [format_rational(q) for q in model.charges],
        "total_charge": format_rational(model.total_charge),
        "narrow": list(model.narrow),
        "degrees": {str(k): format_rational(model.deg(k)) for k in model.narrow},
        "pairing_matrix": [[format_rational(x) for x in row] for row in model.space.pairing_matrix()],
        "chamber_walls": walls,
    }
    if opts["format"] == "json":
        return json.dumps(report, indent=2) + "\n", EXIT_OK
    lines = [f"weights: {report['model']['weights']}", f"degree: {model.d}",
             f"charges q_j: {', '.join(report['charges'])}", f"total charge q: {report['total_charge']}",
             f"narrow sectors: {{{', '.join(str(k) for k in model.narrow)}}}",
             "degrees: " + ", ".join(f"deg phi_{k} = {v}" for k, v in report["degrees"].items()),
             "pairing matrix (rows and columns over narrow sectors):"]
    lines += ["  " + " ".join(row) for row in report["pairing_matrix"]]
    lines.append("chamber walls: " + ", ".join(walls))
    return "\n".join(lines) + "\n", EXIT_OK


def cmd_ifunction(model: FermatModel, opts: dict) -> tuple:
    T = _require(opts, "order", "--order")
    eps = opts["eps"] or []
    if len(eps) > 1:
        raise UsageError("ifunction takes one --eps")
    if opts["small"] and eps:
        raise UsageError("--small and --eps cannot be combined")
    if opts["small"]:
        series = small_I(model, T)
    elif eps:
        series = unstable_sum(model, EpsilonChamber.of(eps[0]), T)
    else:
        series = big_I(model, T)
    if opts["zneg"] is not None:
        series = series.windowed(lo=-opts["zneg"])
    fmt = opts["format"] or "dump"
    if fmt == "csv":
        raise UsageError("ifunction writes dump or json")
    if fmt == "json":
        rows = [{"z": j, "u": list(m.u), "component": k, "value": format_rational(v)}
                for j, m, k, v in sorted(series.terms(), key=lambda r: (r[0], r[1], r[2]))]
        return json.dumps({"model": model.to_json(), "u_labels": list(series.variables.u_labels),
                           "T_u": T, "terms": rows}, indent=2) + "\n", EXIT_OK
    return dump(series), EXIT_OK


def _table(model: FermatModel, eps, opts: dict):
    T_u, T_t = opts["order"] or 0, opts["t_order"] or 0
    if opts["small"]:
        if eps is not INFINITY:
            raise UsageError("--small gives the infinity-chamber table only")
        return mirror_small(model, Orders(T_u, 0)).table
    if eps is INFINITY:
        return big_J(model, Orders(t_degree=T_t)).table
    return j_epsilon(model, eps, Orders(T_u, T_t)).table


def cmd_invariants(model: FermatModel, opts: dict) -> tuple:
    eps = opts["eps"] or [INFINITY]
    if len(eps) > 1:
        raise UsageError("invariants takes one --eps")
    table = _table(model, eps[0], opts)
    fmt = opts["format"] or "json"
    if fmt == "csv":
        return table.to_csv_text(), EXIT_OK
    if fmt == "dump":
        raise UsageError("invariants writes json or csv")
    return table.to_json_text(), EXIT_OK


def _regularity(model: FermatModel, eps, orders: Orders, inject: bool) -> dict:
    je = j_epsilon(model, eps, orders, verify=False)
    point = je.point
    report = {"epsilon": chamber_label(je.chamber)}
    if inject:
        k = model.narrow[0]
        m = point.variables.var("u", 0)
        point = point.perturbed(-1, m, k)
        report["injected_fault"] = {"z": -1, "u": list(m.u), "t": list(m.t), "component": k, "delta": "1"}
    report.update(regularity_check(point).to_json())
    return report


def cmd_verify(model: FermatModel, opts: dict) -> tuple:
    checks = opts["check"] or list(CHECKS)
    T_u = _require(opts, "order", "--order")
    T_t = opts["t_order"] or 0
    orders = Orders(T_u, T_t)
    eps_list = opts["eps"] or [DEFAULT_EPS]
    results = {}
    for name in checks:
        if name == "regularity":
            results[name] = [_regularity(model, e, orders, opts["inject_fault"]) for e in eps_list]
        elif name == "cor4":
            results[name] = cor4_check(model, T_u)
        elif name == "transport":
            pairs = ([(eps_list[0], eps_list[1])] if len(eps_list) >= 2 else [(INFINITY, eps_list[0])])
            results[name] = [transport_check(model, a, b, orders) for a, b in pairs]
        elif name == "string":
            results[name] = [dict(string_dilaton_check(_table(model, e, opts)), epsilon=epsilon_text(e))
                             for e in eps_list]
        elif name == "sigma":
            results[name] = sigma_check(model, T_u)
        elif name == "routes":
            results[name] = routes_check(model, T_u)
        elif name == "selection":
            results[name] = selection_check([_table(model, e, opts) for e in eps_list])

    def ok(r):
        return all(x["status"] == "pass" for x in r) if isinstance(r, list) else r["status"] == "pass"
    passed = all(ok(r) for r in results.values())
    out = {"model": model.to_json(), "orders": orders.to_json(),
           "status": "pass" if passed else "fail",
           "checks": {name: {"status": "pass" if ok(r) else "fail", "report": r} for name, r in results.items()}}
    return json.dumps(out, indent=2) + "\n", EXIT_OK if passed else EXIT_VERIFY


COMMANDS = {"model": cmd_model, "ifunction": cmd_ifunction, "invariants": cmd_invariants,
            "verify": cmd_verify}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        thread_count()
        opts = resolve(args)
        model = load_model(opts)
        text, code = COMMANDS[args.command](model, opts)
    except UsageError as exc:
        print(f"lgcone: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"lgcone: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ReconstructionError, InconsistentTableError) as exc:
        print(f"lgcone: inconsistency: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    if opts["out"]:
        Path(opts["out"]).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
