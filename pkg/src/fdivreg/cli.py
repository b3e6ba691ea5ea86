"""Command-line front end.

Exit codes: 0 success, 1 malformed input, 2 infeasible regularization factor,
3 inconclusive classification, non-convergence or failed check.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import logging
import math
import os
import sys
import time

import numpy as np

from . import io
from .divergences import BUILTIN_NAMES, builtin
from .equivalence import solve_equivalent
from .errors import (ConfigurationError, DivergentIntegral, FDRError, Inconclusive, InfeasiblePointError,
                     NoFeasibleBeta, NonConvergence, PreconditionError)
from .measures import DiscreteMeasure, QuadratureMeasure
from .oracle import certify, certify_batch, simplex_minimize
from .reproductions import format_table, run_all
from .solver import BoundaryReport, classify_boundary, objective, posterior, stationarity_residual

log = logging.getLogger("fdivreg")

EXIT_OK, EXIT_SCHEMA, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 1, 2, 3


class CheckFailed(FDRError):
    """A verification command ran but its check did not pass."""


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

def boundary_record(rep: BoundaryReport) -> dict:
    adm = rep.admissible_lambda
    return {
        "boundary": rep.boundary,
        "t_star": rep.t_star,
        "t_sup": rep.t_sup,
        "orientation": rep.orientation,
        "lambda_star": rep.lambda_star,
        "admissible_lambda": None if adm is None else {
            "lo": adm.lo, "lo_closed": adm.lo_closed, "hi": adm.hi, "text": adm.describe()},
        "refinement_sums": list(rep.probe),
        "eps_probes": [[e, k] for e, k in rep.eps_probes],
    }


def posterior_record(post) -> dict:
    rec = {
        "lambda": post.lam,
        "beta": post.beta,
        "constraint_value": post.constraint_value,
        "evaluations": post.iterations,
        "stationarity_residual": stationarity_residual(post),
        "objective": objective(post, post.measure, None, post.lam, post.spec),
        "points": np.asarray(post.measure.points).tolist(),
        "rn": post.rn.tolist(),
    }
    if isinstance(post.measure, DiscreteMeasure):
        rec["masses"] = post.masses.tolist()
    else:
        rec["node_weights"] = post.measure.weights.tolist()
    return rec


def _problem_echo(args, prob) -> dict:
    rec = {"command": args.command, "problem": args.problem, "divergence": prob.divergence.name}
    if isinstance(prob.measure, QuadratureMeasure):
        rec["panels"] = prob.measure.panels
    return rec


def _lambda(args, prob) -> float:
    lam = args.lam if args.lam is not None else prob.lam
    if lam is None:
        raise ConfigurationError("no regularization factor: set 'lambda' in the file or pass --lambda")
    if not (lam > 0 and math.isfinite(lam)):
        raise ConfigurationError(f"lambda must be positive and finite, got {lam!r}")
    return float(lam)


def _tol(args, prob):
    return args.tol if args.tol is not None else prob.tol


def _load(args):
    if not args.problem:
        raise ConfigurationError(f"{args.command} needs --problem PATH")
    return io.read_problem(args.problem, panels=args.panels)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> dict:
    prob = _load(args)
    lam, tol = _lambda(args, prob), _tol(args, prob)
    t0 = time.perf_counter()
    post = _posterior_or_explain(prob, lam, tol)
    rec = _problem_echo(args, prob)
    rec.update(posterior_record(post))
    rec["timings"] = {"solve_s": time.perf_counter() - t0}
    return rec


def _posterior_or_explain(prob, lam, tol, spec=None, risk=None):
    """Solve; on infeasibility attach the minimum factor to the error when known."""
    spec = prob.divergence if spec is None else spec
    risk = prob.risk if risk is None else risk
    try:
        return posterior(spec, prob.measure, risk, lam, tol)
    except NoFeasibleBeta as exc:
        if exc.lambda_star is None and exc.reason != "empty":
            try:
                rep = classify_boundary(spec, prob.measure, risk, tol)
            except FDRError:
                rep = None
            if rep is not None and rep.admissible_lambda is not None:
                adm = rep.admissible_lambda
                exc.lambda_star = rep.lambda_star
                extra = (f"minimum regularization factor lambda* = {rep.lambda_star!r}"
                         if rep.lambda_star is not None else f"admissible factors {adm.describe()}")
                exc.args = (f"{exc.args[0]}; {extra}",)
        raise


def cmd_sweep(args) -> str:
    prob = _load(args)
    tol = _tol(args, prob)
    if args.lam is not None:
        grid = np.array([args.lam])
    elif prob.lam_grid is not None:
        grid = prob.lam_grid
    elif prob.lam is not None:
        grid = np.array([prob.lam])
    else:
        raise ConfigurationError("sweep needs a lambda grid in the problem file")
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "N_lambda", "beta", "min_rn", "max_rn", "feasible"])
    prev = -math.inf
    for lam in np.sort(grid):
        try:
            post = posterior(prob.divergence, prob.measure, prob.risk, float(lam), tol)
        except (NoFeasibleBeta, InfeasiblePointError, NonConvergence, DivergentIntegral) as exc:
            log.info("lambda=%g infeasible: %s", lam, exc)
            w.writerow([io._num(float(lam)), "", "", "", "", "false"])
            continue
        b = post.beta
        if not b > prev:
            # only reverse_kl is guaranteed to increase in beta; beta/lambda always does
            log.warning("%s: beta does not increase at lambda=%g (beta/lambda = %.17g)",
                        prob.divergence.name, lam, b / lam)
        prev = b
        w.writerow([io._num(float(lam)), io._num(b), io._num(b), io._num(float(post.rn.min())),
                    io._num(float(post.rn.max())), "true"])
    return buf.getvalue()


def cmd_classify(args) -> dict:
    prob = _load(args)
    tol = _tol(args, prob)
    rec = _problem_echo(args, prob)
    rec.update(boundary_record(classify_boundary(prob.divergence, prob.measure, prob.risk, tol)))
    return rec


def cmd_equiv(args) -> dict:
    prob = _load(args)
    lam, tol = _lambda(args, prob), _tol(args, prob)
    g = io.load_divergence(args.g) if args.g else prob.divergence_g
    if g is None:
        raise ConfigurationError("equiv needs --g NAME or 'divergence_g' in the problem file")
    res = solve_equivalent(prob.divergence, g, lam, prob.measure, prob.risk, tol)
    L = prob.risk.values_on(prob.measure)
    rec = _problem_echo(args, prob)
    rec.update({
        "divergence_g": g.name,
        "lambda": lam,
        "beta_f": res.f_posterior.beta,
        "beta_g": res.g_posterior.beta,
        "gap": res.gap,
        "transformed_risk": np.asarray(res.transform(L), dtype=float).tolist(),
        "rn_f": res.f_posterior.rn.tolist(),
        "rn_g": res.g_posterior.rn.tolist(),
    })
    if args.check is not None and not res.gap <= args.check:
        raise CheckFailed(f"posterior gap {res.gap!r} exceeds {args.check!r}")
    return rec


def cmd_oracle_check(args) -> dict:
    tol = args.tol if args.tol is not None else 1e-6
    if args.problem:
        prob = _load(args)
        lam = _lambda(args, prob)
        post = _posterior_or_explain(prob, lam, None)
        orc = simplex_minimize(prob.measure, prob.risk, lam, prob.divergence)
        rep = certify(prob.measure, prob.risk, lam, prob.divergence, post.masses, orc, tol)
        rec = _problem_echo(args, prob)
        rec.update({"lambda": lam, "passed": rep.passed, "mass_gap": rep.mass_gap,
                    "objective_gap": rep.objective_gap,
                    "closed_form_objective": rep.closed_form_objective,
                    "oracle_objective": rep.oracle_objective, "oracle_iterations": orc.iterations,
                    "oracle_converged": orc.converged, "tol": tol})
        failed = not rep.passed
    else:
        seed = 0 if args.seed is None else args.seed
        rows = certify_batch([builtin(n) for n in BUILTIN_NAMES], count=args.count, seed=seed, tol=tol)
        rec = {"command": args.command, "seed": seed, "tol": tol, "instances": [
            {"divergence": r.divergence, "index": r.index, "atoms": r.atoms, "lambda": r.lam,
             "passed": r.report.passed, "mass_gap": r.report.mass_gap,
             "objective_gap": r.report.objective_gap} for r in rows]}
        rec["passed"] = all(r.report.passed for r in rows)
        rec["worst_mass_gap"] = max(r.report.mass_gap for r in rows)
        failed = not rec["passed"]
    if failed:
        args._record = rec
        raise CheckFailed("closed form and oracle disagree beyond tolerance")
    return rec


def cmd_examples(args):
    kw = {}
    if args.panels is not None:
        kw["panels"] = args.panels
    reps = run_all(tol=args.tol, **kw)
    table = format_table(reps) + "\n"
    rec = {"command": "examples", "panels": kw.get("panels"), "tol": args.tol,
           "results": [r.as_dict() for r in reps], "passed": all(r.passed for r in reps)}
    if args.out is not None:
        sys.stdout.write(table)
    if not rec["passed"]:
        if args.out is None:
            sys.stdout.write(table)
            args._quiet = True
        args._record = rec
        raise CheckFailed(f"{sum(not r.passed for r in reps)} reproduction(s) failed")
    return rec if args.out is not None else table


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "classify": cmd_classify,
    "equiv": cmd_equiv,
    "oracle-check": cmd_oracle_check,
    "examples": cmd_examples,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", help="JSON problem file")
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--tol", type=float, help="solver tolerance on the constraint integral")
    common.add_argument("--seed", type=int, help="seed for random instances")
    common.add_argument("--panels", type=int, help="quadrature panels for density references")
    common.add_argument("--lambda", dest="lam", type=float, help="override the regularization factor")
    common.add_argument("--timings", action="store_true",
                        help="include wall-clock timings (output is then not reproducible)")

    p = argparse.ArgumentParser(prog="fdivreg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve one problem")
    sub.add_parser("sweep", parents=[common], help="normalization function over a lambda grid (CSV)")
    sub.add_parser("classify", parents=[common], help="feasible multipliers and admissible factors")
    eq = sub.add_parser("equiv", parents=[common], help="solve with a second divergence on the transformed risk")
    eq.add_argument("--g", help="second divergence (builtin name)")
    eq.add_argument("--check", type=float, help="fail with exit 3 if the posterior gap exceeds this")
    oc = sub.add_parser("oracle-check", parents=[common], help="compare the closed form with a brute-force optimizer")
    oc.add_argument("--count", type=int, default=20, help="random instances per divergence")
    sub.add_parser("examples", parents=[common], help="reproduce the worked examples")
    return p


def _strip_timings(obj):
    if isinstance(obj, dict):
        return {k: _strip_timings(v) for k, v in obj.items() if k not in ("timings", "seconds")}
    if isinstance(obj, list):
        return [_strip_timings(v) for v in obj]
    return obj


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _configure_logging():
    level = os.environ.get("FDR_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG", "WARNING"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code else EXIT_OK
    args._record = None
    args._quiet = False
    try:
        result = COMMANDS[args.command](args)
    except ConfigurationError as exc:
        return _fail(args, EXIT_SCHEMA, exc)
    except (NoFeasibleBeta, InfeasiblePointError) as exc:
        return _fail(args, EXIT_INFEASIBLE, exc)
    except (Inconclusive, NonConvergence, DivergentIntegral, PreconditionError, CheckFailed) as exc:
        return _fail(args, EXIT_NUMERIC, exc)
    if isinstance(result, str):
        _emit(result, args.out)
    else:
        _emit(io.dumps(result if args.timings else _strip_timings(result)), args.out)
    return EXIT_OK


def _fail(args, code: int, exc: Exception) -> int:
    print(f"fdivreg {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
    if args._quiet:
        return code
    rec = args._record or {"command": args.command, "problem": getattr(args, "problem", None)}
    rec = dict(rec)
    rec["error"] = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("reason", "lambda_star", "point", "index"):
        if getattr(exc, attr, None) is not None:
            val = getattr(exc, attr)
            rec["error"][attr] = val.tolist() if isinstance(val, np.ndarray) else val
    _emit(io.dumps(rec if args.timings else _strip_timings(rec)), args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
