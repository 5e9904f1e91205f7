"""Command-line front end.

Every subcommand writes a JSON report (and CSV where relevant) to ``--out``
and prints one summary line.  Exit codes: 0 success, 1 invalid input,
2 solver non-convergence, 3 internal error.

A whole run can be described by ``--manifest run.json``; its keys are the
flag names of the chosen ``command`` (dashes or underscores), and relative
paths resolve against the manifest's directory.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, reports
from .calculus import FieldPair, field_to_dict, load_field
from .energy import Problem, ProblemSpec
from .errors import GraphlogError, NoConvergedSeed, ParseError, ValidationError
from .graph import load_graph
from .nehari import fibering_coefficients, project_to_nehari
from .solver import SolverConfig, lambda_sweep, solve_dirichlet, solve_ground_state, write_trace_csv

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_INTERNAL = 0, 1, 2, 3
PATH_KEYS = ("graph", "u", "v", "xi", "eta")


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which would read as non-convergence
    def error(self, message):
        raise _ArgError(message)


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _int_list(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(x) for x in str(text).split(",") if x.strip()]


def _add_solver_flags(sp):
    d = SolverConfig()
    sp.add_argument("--seeds", type=int, default=d.seeds)
    sp.add_argument("--rng-seed", type=int, default=d.rng_seed)
    sp.add_argument("--max-iters", type=int, default=d.max_iters)
    sp.add_argument("--step-init", type=float, default=d.step_init)
    sp.add_argument("--backtrack-factor", type=float, default=d.backtrack_factor)
    sp.add_argument("--armijo-c", type=float, default=d.armijo_c)
    sp.add_argument("--tol", "--residual-tol", dest="residual_tol", type=float, default=d.residual_tol)
    sp.add_argument("--stall-tol", type=float, default=d.stall_tol)
    sp.add_argument("--direction", choices=("lbfgs", "gradient"), default=d.direction)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphlog", description=__doc__.splitlines()[0])
    parser.add_argument("--manifest", help="JSON manifest describing the whole run")
    parser.add_argument("--out", default=None, help="output directory (default: current directory)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    out_help = "output directory; may also precede the command"

    sp = sub.add_parser("solve", help="ground state of the base or lambda-penalized system")
    sp.add_argument("--graph")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    _add_solver_flags(sp)

    sp = sub.add_parser("solve-dirichlet", help="ground state with zero boundary values")
    sp.add_argument("--graph")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--omega-a", default=None, help="comma-separated vertex ids (default: zero set of a)")
    sp.add_argument("--omega-b", default=None, help="comma-separated vertex ids (default: zero set of b)")
    _add_solver_flags(sp)

    sp = sub.add_parser("sweep-lambda", help="ground states along a lambda continuation")
    sp.add_argument("--graph")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--lambdas", required=True, help="comma-separated ascending values")
    sp.add_argument("--no-warm-start", dest="warm_start", action="store_false")
    _add_solver_flags(sp)

    sp = sub.add_parser("check-gradient", help="derivative pairing against central differences")
    sp.add_argument("--graph")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--u")
    sp.add_argument("--v")
    sp.add_argument("--xi")
    sp.add_argument("--eta")
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--h", type=float, default=1e-6)
    sp.add_argument("--rtol", type=float, default=1e-5)
    sp.add_argument("--rng-seed", type=int, default=0)

    sp = sub.add_parser("project-nehari", help="scale a pair onto the Nehari manifold")
    sp.add_argument("--graph")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--u")
    sp.add_argument("--v")
    sp.add_argument("--lambda", dest="lam", type=float, default=None)

    sp = sub.add_parser("appendix-series", help="convergent and divergent log series")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--checkpoints", default=",".join(str(n) for n in analysis.DEFAULT_CHECKPOINTS))

    sp = sub.add_parser("calibrate", help="exponent calibration system")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--epsilon", type=float, required=True)

    sp = sub.add_parser("check-embedding", help="empirical vs analytic embedding constant")
    sp.add_argument("--graph")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--potential", choices=("a", "b"), default="a")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--rng-seed", type=int, default=0)
    for sp in sub.choices.values():
        sp.add_argument("--out", default=argparse.SUPPRESS, help=out_help)
    return parser


def _from_manifest(parser, path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"manifest {path}: {exc}") from exc
    if not isinstance(data, dict) or "command" not in data:
        raise ValidationError("manifest must be an object with a 'command' field")
    command = data["command"]
    base = Path(path).resolve().parent
    sub = parser._subparsers._group_actions[0].choices.get(command)
    if sub is None:
        raise ValidationError(f"manifest field 'command': unknown command {command!r}")
    known = {a.dest: a for a in sub._actions if a.dest != "help"}
    aliases = {opt.lstrip("-").replace("-", "_"): a.dest for a in sub._actions for opt in a.option_strings}
    required = [a.option_strings[0] for a in sub._actions if a.required]
    argv = [command]
    for opt in required:
        key = opt.lstrip("-").replace("-", "_")
        dest = aliases[key]
        match = [k for k in data if aliases.get(k.replace("-", "_")) == dest]
        if not match:
            raise ValidationError(f"manifest is missing field {key!r}")
        argv += [opt, _as_arg(data[match[0]])]
    ns = sub.parse_args(argv[1:])
    ns.command = command
    ns.out = data.get("out")
    if ns.out is not None:
        ns.out = str((base / ns.out).resolve())
    for key, value in data.items():
        if key in ("command", "out"):
            continue
        dest = aliases.get(key.replace("-", "_"))
        if dest is None or dest not in known:
            raise ValidationError(f"manifest field {key!r} is not an option of {command}")
        if dest in PATH_KEYS and value is not None:
            value = str((base / value).resolve())
        act = known[dest]
        if act.type is not None and value is not None and not isinstance(value, bool):
            value = act.type(value)
        setattr(ns, dest, value)
    return ns


def _as_arg(value):
    if isinstance(value, (list, tuple)):
        return ",".join(str(x) for x in value)
    return str(value)


def _config(ns) -> SolverConfig:
    return SolverConfig(
        seeds=ns.seeds,
        rng_seed=ns.rng_seed,
        max_iters=ns.max_iters,
        step_init=ns.step_init,
        backtrack_factor=ns.backtrack_factor,
        armijo_c=ns.armijo_c,
        residual_tol=ns.residual_tol,
        stall_tol=ns.stall_tol,
        direction=ns.direction,
    )


def _spec(ns) -> ProblemSpec:
    lam = getattr(ns, "lam", None)
    return ProblemSpec(ns.p) if lam is None else ProblemSpec.with_lambda(ns.p, lam)


def _graph(ns):
    if not ns.graph:
        raise ValidationError("--graph is required")
    return load_graph(ns.graph)


def _pair(ns, g, a="u", b="v"):
    pa, pb = getattr(ns, a), getattr(ns, b)
    if not pa or not pb:
        raise ValidationError(f"--{a} and --{b} field files are required")
    return FieldPair(load_field(pa, g), load_field(pb, g))


def _ids(g, ids, name):
    if ids is None:
        return None
    out = set()
    for x in ids:
        try:
            out.add(g.index(x))
        except GraphlogError as exc:
            raise ValidationError(f"{name}: {exc}") from exc
    return frozenset(out)


# --------------------------------------------------------------------------
# commands: each returns (report, summary, exit_code, extra files)

def _cmd_solve(ns, out):
    spec = _spec(ns)
    cfg = _config(ns)
    g = _graph(ns)
    return _solve_common(g, lambda: solve_ground_state(g, spec, cfg), "solve", out)


def _cmd_solve_dirichlet(ns, out):
    ProblemSpec(ns.p)
    cfg = _config(ns)
    g = _graph(ns)
    oa = _ids(g, _int_list(ns.omega_a), "omega_a")
    ob = _ids(g, _int_list(ns.omega_b), "omega_b")
    return _solve_common(g, lambda: solve_dirichlet(g, oa, ob, ns.p, cfg), "solve-dirichlet", out)


def _solve_common(g, run, name, out):
    code = EXIT_OK
    try:
        rep = run()
    except NoConvergedSeed as exc:
        rep = exc.report
        code = EXIT_NONCONVERGED
        if rep is None:
            raise
    report = {"command": name, **reports.solve_report_to_dict(g, rep)}
    write_trace_csv(rep.trace, out / "trace.csv")
    summary = f"{name} energy={rep.energy:.10g} converged={str(rep.converged).lower()}"
    return report, summary, code


def _cmd_sweep(ns, out):
    ProblemSpec(ns.p)
    cfg = _config(ns)
    g = _graph(ns)
    lambdas = _float_list(ns.lambdas)
    sw = lambda_sweep(g, lambdas, ns.p, cfg, warm_start=ns.warm_start)
    report = {"command": "sweep-lambda", "warm_start": ns.warm_start, **reports.sweep_to_dict(g, sw)}
    with open(out / "sweep.csv", "w", encoding="utf-8") as fh:
        fh.write("lambda,d_lambda,mass_out,penalty_mass,residual_sup,converged\n")
        for row in zip(sw.lambdas, sw.d_lambda, sw.mass_out, sw.penalty_mass, sw.residual_sup, sw.converged):
            fh.write(",".join(format(x, ".17g") for x in row[:5]) + f",{str(row[5]).lower()}\n")
    ok = all(sw.converged) and sw.omega_converged
    gap = abs(sw.d_lambda[-1] - sw.d_omega) if sw.d_lambda else math.nan
    summary = f"sweep-lambda d_omega={sw.d_omega:.10g} gap_last={gap:.3g} converged={str(ok).lower()}"
    return report, summary, EXIT_OK if ok else EXIT_NONCONVERGED


def _cmd_check_gradient(ns, out):
    spec = _spec(ns)
    g = _graph(ns)
    fp = _pair(ns, g)
    prob = Problem(g, spec)
    u, v = prob.check(fp.u, fp.v)
    rng = np.random.default_rng(ns.rng_seed)
    tests = []
    if ns.xi or ns.eta:
        tp = _pair(ns, g, "xi", "eta")
        tests.append((np.asarray(tp.u), np.asarray(tp.v)))
    for _ in range(ns.trials):
        tests.append((rng.uniform(-1, 1, g.n), rng.uniform(-1, 1, g.n)))
    rows = []
    h = ns.h
    for xi, eta in tests:
        exact = prob.pairing(u, v, xi, eta)
        fd = (prob.J(u + h * xi, v + h * eta) - prob.J(u - h * xi, v - h * eta)) / (2 * h)
        rel = abs(exact - fd) / max(abs(exact), abs(fd), 1e-300)
        rows.append({"pairing": exact, "finite_difference": fd, "relative_error": rel})
    worst = max(r["relative_error"] for r in rows)
    passed = worst <= ns.rtol
    report = {"command": "check-gradient", "h": h, "rtol": ns.rtol, "max_relative_error": worst,
              "passed": passed, "trials": rows}
    summary = f"check-gradient max_relative_error={worst:.3g} passed={str(passed).lower()}"
    return report, summary, EXIT_OK if passed else EXIT_INVALID


def _cmd_project(ns, out):
    spec = _spec(ns)
    g = _graph(ns)
    fp = _pair(ns, g)
    coef = fibering_coefficients(g, fp, spec)
    t, proj = project_to_nehari(g, fp, spec)
    prob = Problem(g, spec)
    report = {
        "command": "project-nehari",
        "t_star": t,
        "coefficients": coef.to_dict(),
        "energy": prob.J(proj.u, proj.v),
        "nehari_defect": prob.pairing(proj.u, proj.v, proj.u, proj.v),
        "projected": {"u": field_to_dict(g, proj.u), "v": field_to_dict(g, proj.v)},
    }
    return report, f"project-nehari t_star={t:.17g}", EXIT_OK


def _cmd_appendix(ns, out):
    prm = analysis.appendix_params(ns.p, ns.delta)
    checkpoints = _int_list(ns.checkpoints)
    rep = analysis.appendix_series(prm, checkpoints)
    rep.write_csv(out / "series.csv")
    v = rep.verdict
    summary = (
        f"appendix-series convergent_estimate={v['convergent_upper_estimate']:.6g} "
        f"I1={rep.diverging_partials_I1[rep.checkpoints[-1]]:.6g} "
        f"divergence_tracked={str(v['I1_tracks_asymptote'] and v['I2_tracks_asymptote']).lower()}"
    )
    return {"command": "appendix-series", **rep.to_dict()}, summary, EXIT_OK


def _cmd_calibrate(ns, out):
    res = analysis.calibrate_exponents(ns.p, ns.epsilon)
    summary = f"calibrate s={res.s:.17g} p1={res.p1:.17g} p2={res.p2:.17g} t={res.t:.17g}"
    return {"command": "calibrate", **res.to_dict()}, summary, EXIT_OK


def _cmd_embedding(ns, out):
    g = _graph(ns)
    pot = g.a if ns.potential == "a" else g.b
    emp, bound = analysis.embedding_constant(g, ns.p, ns.q, pot, ns.trials, ns.rng_seed)
    holds = emp <= bound * (1 + 1e-12)
    report = {"command": "check-embedding", "p": ns.p, "q": ns.q, "potential": ns.potential,
              "trials": ns.trials, "empirical_sup": emp, "analytic_bound": bound, "holds": holds}
    summary = f"check-embedding empirical_sup={emp:.10g} analytic_bound={bound:.10g} holds={str(holds).lower()}"
    return report, summary, EXIT_OK if holds else EXIT_INVALID


COMMANDS = {
    "solve": _cmd_solve,
    "solve-dirichlet": _cmd_solve_dirichlet,
    "sweep-lambda": _cmd_sweep,
    "check-gradient": _cmd_check_gradient,
    "project-nehari": _cmd_project,
    "appendix-series": _cmd_appendix,
    "calibrate": _cmd_calibrate,
    "check-embedding": _cmd_embedding,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.manifest:
            out_flag = ns.out
            ns = _from_manifest(parser, ns.manifest)
            if out_flag is not None:
                ns.out = out_flag
        if not ns.command:
            raise _ArgError("a command is required")
        out = Path(ns.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        report, summary, code = COMMANDS[ns.command](ns, out)
        reports.write_json(report, out / f"{ns.command.replace('-', '_')}_report.json")
        print(summary, file=stdout)
        return code
    except NoConvergedSeed as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_NONCONVERGED
    except (_ArgError, GraphlogError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
