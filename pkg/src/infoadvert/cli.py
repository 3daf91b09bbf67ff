"""Command-line front end.

Subcommands: ``solve``, ``verify``, ``oracle``, ``convert-disclosure``.
Reports go to stdout (or ``--output``), logs to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import io
from .errors import InfoAdvertError, ResourceCapError, SolverError, ValidationError
from .model import (
    AdvertisingRule,
    MultiTypeInstance,
    SingleTypeInstance,
    convert_disclosure,
    cost_of_uncertainty,
    evaluate_rule_multi,
    evaluate_rule_single,
    posterior,
    rule_to_decomposition,
)
from .multi_solver import DEFAULT_EPSILON, realized_purchase_set, solve_grid_lp
from .oracle import brute_force_multi, grid_concave_closure
from .single_solver import SolveReport, check_optimality_conditions, solve_binary, solve_concave_closure

log = logging.getLogger("infoadvert")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_CAP = 4

CURVE_POINTS = 101
# keys stripped from reports so that output is byte-identical across runs
_VOLATILE = {"seconds", "solve_time", "setup_time"}


def _stable(obj):
    if isinstance(obj, dict):
        return {k: _stable(v) for k, v in obj.items() if k not in _VOLATILE}
    if isinstance(obj, list):
        return [_stable(v) for v in obj]
    return obj


def _epsilon(text: str) -> float:
    try:
        value = float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError("epsilon must lie in (0, 1]")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def _load_single_or_multi(path: str) -> tuple[io.InstanceFile, SingleTypeInstance | MultiTypeInstance]:
    doc = io.load_instance(path)
    if doc.kind == "disclosure":
        inst, scale = convert_disclosure(doc.prospects)
        doc = io.InstanceFile("single", inst, scale_factor=scale)
    return doc, doc.instance


def _single_method(instance: SingleTypeInstance, method: str) -> str:
    if method == "auto":
        return "binary" if instance.problem.n_states == 2 else "closure"
    if method == "binary" and instance.problem.n_states != 2:
        raise ValidationError("--method binary requires a two-state instance")
    return method


def _run_single(instance: SingleTypeInstance, method: str) -> SolveReport:
    if method == "binary":
        return solve_binary(instance)
    if method == "slsqp":
        return solve_concave_closure(instance, backend="slsqp")
    return solve_concave_closure(instance)


def _decomp_doc(report: SolveReport, instance: SingleTypeInstance) -> dict:
    d = report.decomposition
    return {
        "phi": d.phi,
        "posteriors": d.etas,
        "cost": [float(instance.C(e)) for e in d.etas],
        "likelihood_ratio": [float(instance.R(e)) for e in d.etas],
    }


def _curve(instance: SingleTypeInstance) -> dict:
    xs = np.linspace(0.0, 1.0, CURVE_POINTS)
    pts = np.column_stack([xs, 1.0 - xs])
    return {"eta0": xs, "f": np.asarray(instance.f(pts), dtype=float)}


def cmd_solve(args: argparse.Namespace) -> dict:
    doc, instance = _load_single_or_multi(args.instance)
    if isinstance(instance, MultiTypeInstance):
        epsilon = DEFAULT_EPSILON if args.epsilon is None else args.epsilon
        if args.epsilon is None:
            log.info("epsilon not given; using default %s", epsilon)
        res = solve_grid_lp(instance, epsilon, mode=args.lambda_mode)
        return {
            "command": "solve",
            "kind": "multi",
            "method": "grid_lp",
            "epsilon": res.epsilon,
            "epsilon_default_used": args.epsilon is None,
            "lambda_mode": args.lambda_mode,
            "lp_value": res.lp_value,
            "revenue": res.realized_revenue,
            "rule": io.rule_doc(res.rule),
            "declared_purchase_sets": [lam.sorted() for lam in res.declared],
            "diagnostics": res.diagnostics,
        }
    method = _single_method(instance, args.method)
    report = _run_single(instance, method)
    log.info("solved with %s in %.3fs", method, report.diagnostics.get("seconds", 0.0))
    out = {
        "command": "solve",
        "kind": "single",
        "method": method,
        "revenue": report.revenue,
        "rule": io.rule_doc(report.rule),
        "decomposition": _decomp_doc(report, instance),
        "diagnostics": report.diagnostics,
    }
    if doc.scale_factor is not None:
        out["scale_factor"] = doc.scale_factor
        out["sender_payoff"] = report.revenue / doc.scale_factor
    if args.emit_curve:
        if instance.problem.n_states != 2:
            raise ValidationError("--emit-curve requires a two-state instance")
        out["curve"] = _curve(instance)
    return out


def _verify_single(instance: SingleTypeInstance, rule: AdvertisingRule, tol: float) -> dict:
    revenue = evaluate_rule_single(instance, rule)
    signals = []
    for s in range(rule.n_signals):
        phi = float(instance.theta @ rule.pi[s])
        entry = {"index": s, "price": rule.prices[s], "probability": phi}
        if phi > 0.0:
            _, eta = posterior(instance.theta, rule, s)
            cost = float(instance.C(eta))
            entry.update(posterior=eta, cost=cost, buys=bool(cost >= rule.prices[s] - 1e-9))
        else:
            entry.update(posterior=None, cost=None, buys=False)
        signals.append(entry)
    check = check_optimality_conditions(instance, rule_to_decomposition(instance, rule), tol=tol)
    out = {"revenue": revenue, "signals": signals, "optimality": check.as_dict()}
    best = _run_single(instance, _single_method(instance, "auto")).revenue
    if best > revenue + tol:
        out["note"] = f"the solver reaches revenue {best:.12g} on this instance"
    out["solver_revenue"] = best
    return out


def _verify_multi(instance: MultiTypeInstance, rule: AdvertisingRule) -> dict:
    signals = []
    for s in range(rule.n_signals):
        per_type = []
        for k, theta in enumerate(instance.types):
            phi = float(theta @ rule.pi[s])
            if phi > 0.0:
                eta = theta * rule.pi[s] / phi
                per_type.append({"type": k, "probability": phi, "posterior": eta, "cost": cost_of_uncertainty(instance.problem, eta)})
            else:
                per_type.append({"type": k, "probability": 0.0, "posterior": None, "cost": None})
        lam = realized_purchase_set(instance, rule, s)
        signals.append({
            "index": s,
            "price": rule.prices[s],
            "purchase_set": lam.sorted() if lam else [],
            "types": per_type,
        })
    return {"revenue": evaluate_rule_multi(instance, rule), "signals": signals}


def cmd_verify(args: argparse.Namespace) -> dict:
    _, instance = _load_single_or_multi(args.instance)
    rule = io.load_rule(args.rule, instance.problem.n_states)
    tol = 1e-7 if args.tolerance is None else args.tolerance
    if isinstance(instance, MultiTypeInstance):
        body = _verify_multi(instance, rule)
        kind = "multi"
    else:
        body = _verify_single(instance, rule, tol)
        kind = "single"
    return {"command": "verify", "kind": kind, "valid": True, **body}


def cmd_oracle(args: argparse.Namespace) -> dict:
    _, instance = _load_single_or_multi(args.instance)
    if isinstance(instance, MultiTypeInstance):
        g = 20 if args.grid_g is None else args.grid_g
        signals = 2 if args.signals is None else args.signals
        value = brute_force_multi(instance, signals, g)
        out = {"command": "oracle", "kind": "multi", "oracle": "brute_force_multi", "grid_g": g, "signals": signals, "oracle_value": value}
        if args.compare:
            epsilon = DEFAULT_EPSILON if args.epsilon is None else args.epsilon
            tol = 2e-2 if args.tolerance is None else args.tolerance
            res = solve_grid_lp(instance, epsilon, mode=args.lambda_mode)
            out.update(
                epsilon=epsilon,
                lp_value=res.lp_value,
                realized_revenue=res.realized_revenue,
                bracket_lower=value - epsilon - tol,
                bracket_holds=bool(res.lp_value >= value - epsilon - tol),
            )
        return out
    m = 10 if args.grid_m is None else args.grid_m
    value = grid_concave_closure(instance, m)
    out = {"command": "oracle", "kind": "single", "oracle": "grid_concave_closure", "grid_m": m, "oracle_value": value}
    if args.compare:
        tol = 1e-7 if args.tolerance is None else args.tolerance
        solved = _run_single(instance, _single_method(instance, args.method)).revenue
        out.update(solver_value=solved, gap=abs(solved - value), within_tolerance=bool(abs(solved - value) <= tol), tolerance=tol)
    return out


def cmd_convert(args: argparse.Namespace) -> dict:
    doc = io.load_instance(args.instance)
    if doc.kind != "disclosure":
        raise ValidationError(f"{args.instance}: kind must be 'disclosure', got {doc.kind!r}")
    inst, scale = convert_disclosure(doc.prospects)
    return io.single_doc(inst, scale_factor=scale)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infoadvert", description="Revenue-maximizing advertising rules for selling information.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--output", help="write the report here instead of stdout")
        p.add_argument("--tolerance", type=float, help="comparison tolerance")

    def solver_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--epsilon", type=_epsilon, help="price grid step for multi-type instances (default 1/64)")
        p.add_argument("--lambda-mode", choices=("subsets", "intervals", "auto"), default="auto")
        p.add_argument("--method", choices=("auto", "binary", "closure", "slsqp"), default="auto",
                       help="single-type solver (auto: binary for two states)")

    p = sub.add_parser("solve", help="compute an optimal or epsilon-optimal rule")
    p.add_argument("instance")
    solver_flags(p)
    p.add_argument("--emit-curve", action="store_true", help="sample f on a grid of eta0 (two states)")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="evaluate a rule file against an instance")
    p.add_argument("instance")
    p.add_argument("rule")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="run the brute-force reference")
    p.add_argument("instance")
    solver_flags(p)
    p.add_argument("--grid-m", type=_positive_int, help="simplex grid resolution (single type, default 10)")
    p.add_argument("--grid-g", type=_positive_int, help="scheme grid resolution (multi type, default 20)")
    p.add_argument("--signals", type=_positive_int, help="signals in the brute-force search (default 2)")
    p.add_argument("--compare", action="store_true", help="also run the solver and report the gap")
    common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("convert-disclosure", help="turn a prospect list into a single-type instance")
    p.add_argument("instance")
    p.add_argument("--output", help="write the instance here instead of stdout")
    p.set_defaults(func=cmd_convert, tolerance=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        report = args.func(args)
        text = io.dumps(_stable(report))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResourceCapError as exc:
        print(f"error: resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (SolverError, InfoAdvertError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
