"""Command-line front-end.

Subcommands: ``structure`` inspects the operator pair and prints the
chain/projector certificates; ``solve`` runs the family back-end and
writes the solution as CSV; ``verify`` additionally measures the
solution against the problem file's oracle and fails on excess;
``report`` writes the full text report (structure, reduction, solver
diagnostics, residuals, oracle verdict).

Exit codes: 0 success, 1 verification or solvability failure, 2 input
error.  Identical input files and flags produce byte-identical CSV and
report text, except the wall-time field.
"""

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chains import (certify_operators, commutability_matrix,
                     complete_structure, structure_report)
from .errors import (CompatibilityError, ConfigurationError, DegenPDEError,
                     ParseError, UsageError)
from .problems import evaluate_oracle, instantiate, load_problem
from .reduction import describe_reduction, reduce, residual_check
from .solvers import field_raw, solve_family, write_solution_csv

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2


@dataclass
class RunReport:
    """Ordered text sections; renders to a stable report."""

    problem: str
    family: str
    sections: list = field(default_factory=list)
    wall_time_s: float = None

    def add(self, title, text):
        lines = text.splitlines() if isinstance(text, str) else list(text)
        self.sections.append((title, lines))

    def to_text(self):
        out = [f"problem: {self.problem}", f"family: {self.family}"]
        for title, lines in self.sections:
            out.append("")
            out.append(f"== {title} ==")
            out.extend(lines)
        if self.wall_time_s is not None:
            out.append("")
            out.append(f"wall_time_s={self.wall_time_s:.3f}")
        return "\n".join(out) + "\n"


def _overrides(args):
    return dict(grid_scale=args.grid_scale, dt=args.dt,
                modes=tuple(args.modes) if args.modes else None,
                lambda_param=args.lambda_param)


def _structure_section(spec, js, ps, comm):
    lines = structure_report(js, ps, comm).splitlines()
    for i, Aop in enumerate(spec.A, start=1):
        r = commutability_matrix(Aop, js)
        lines.append(f"A{i}_residual_primal={r.residual_primal:.6e}")
        lines.append(f"A{i}_residual_dual={r.residual_dual:.6e}")
    return lines


def _solver_section(fld):
    lines = []
    for key in sorted(fld.meta):
        if key in ("raw", "family", "tolerances"):
            continue
        val = fld.meta[key]
        if isinstance(val, float):
            lines.append(f"{key}={val:.6e}")
        else:
            lines.append(f"{key}={val}")
    return lines


def _residual_section(spec, rp, fld):
    axes, u = field_raw(fld)
    resid, report = residual_check(spec, axes, u, rp.js, rp.ps)
    lines = []
    for key, val in report.items():
        lines.append(f"{key}: {val:.6e}")
    return lines


def _oracle_section(outcome, tol_override):
    tol = tol_override if tol_override is not None else outcome.tol
    passed = outcome.deviation <= tol
    return ([f"kind={outcome.kind}",
             f"detail={outcome.detail}",
             f"deviation={outcome.deviation:.6e}",
             f"tol={tol:g}",
             f"verdict={'pass' if passed else 'fail'}"], passed)


def cmd_structure(args):
    pf = load_problem(args.problem)
    spec = instantiate(pf, **_overrides(args))
    report = RunReport(problem=str(args.problem), family=pf.family)
    t0 = time.perf_counter()
    js, ps = complete_structure(spec.B, spec.A[0])
    if js.l == 0:
        report.add("structure", ["regular equation: the leading operator is "
                                 "invertible; apply its inverse directly, no "
                                 "reduction needed"])
        report.wall_time_s = time.perf_counter() - t0
        print(report.to_text(), end="")
        return EXIT_OK
    comm = certify_operators(js, spec.A)
    report.add("structure", _structure_section(spec, js, ps, comm))
    report.wall_time_s = time.perf_counter() - t0
    print(report.to_text(), end="")
    return EXIT_OK if all(comm.certified) else EXIT_FAIL


def _run_solve(args):
    pf = load_problem(args.problem)
    spec = instantiate(pf, **_overrides(args))
    report = RunReport(problem=str(args.problem), family=pf.family)
    t0 = time.perf_counter()
    js, ps = complete_structure(spec.B, spec.A[0])
    comm = certify_operators(js, spec.A)
    report.add("structure", _structure_section(spec, js, ps, comm))
    rp = reduce(spec, js, ps)
    report.add("reduction", describe_reduction(rp).rstrip("\n"))
    fld = solve_family(rp)
    report.add("solver", _solver_section(fld))
    report.wall_time_s = time.perf_counter() - t0
    return pf, rp, fld, report


def cmd_solve(args):
    pf, rp, fld, report = _run_solve(args)
    out = args.output
    if out is None:
        out = Path(args.problem).stem + ".csv"
    write_solution_csv(fld, out)
    report.add("output", [f"csv={out}", f"rows={int(np.prod([len(v) for _, v in fld.axes])) * fld.values.shape[-1]}"])
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_verify(args):
    pf, rp, fld, report = _run_solve(args)
    report.add("residuals", _residual_section(rp.system, rp, fld))
    outcome = evaluate_oracle(pf, rp, fld)
    lines, passed = _oracle_section(outcome, args.tol)
    report.add("oracle", lines)
    print(report.to_text(), end="")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_report(args):
    pf, rp, fld, report = _run_solve(args)
    report.add("residuals", _residual_section(rp.system, rp, fld))
    code = EXIT_OK
    if pf.oracle is not None:
        outcome = evaluate_oracle(pf, rp, fld)
        lines, passed = _oracle_section(outcome, args.tol)
        report.add("oracle", lines)
        if not passed:
            code = EXIT_FAIL
    text = report.to_text()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"report written to {args.output}")
    else:
        print(text, end="")
    return code


def build_parser():
    parser = argparse.ArgumentParser(
        prog="degenpde",
        description="Reduce and solve linear operator-differential systems "
                    "with a degenerate leading operator.")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = (
        ("structure", cmd_structure,
         "inspect the chain structure and operator certificates"),
        ("solve", cmd_solve, "solve the problem and write the CSV field"),
        ("verify", cmd_verify, "solve, then gate on the bundled oracle"),
        ("report", cmd_report, "write the full text report"),
    )
    for name, func, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("problem", help="path to a problem JSON file")
        p.add_argument("--grid-scale", type=float, default=None,
                       help="rescale grid node counts by this factor")
        p.add_argument("--dt", type=float, default=None,
                       help="override the time step")
        p.add_argument("--modes", type=int, nargs=2, default=None,
                       metavar=("NX", "NY"),
                       help="override the retained mode table")
        p.add_argument("--tol", type=float, default=None,
                       help="override the verification tolerance")
        p.add_argument("--lambda", dest="lambda_param", type=float,
                       default=None, help="override the spectral parameter")
        if name in ("solve", "report"):
            p.add_argument("--output", default=None,
                           help="output path (CSV for solve, text for report)")
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParseError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenPDEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
