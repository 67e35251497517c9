"""Command line: classify | constants | solve | sweep | verify | ground-state.

Exit codes: 0 success, 2 invalid parameters, 3 solver failure, 4 failed checks.
Every command that takes ``--out`` writes ``config.json`` there, and
``error.json`` when it fails.
"""
from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import fiber as fb
from . import verify as vf
from .constants import ConstantsCache, build_table
from .exceptions import (BranchUnavailable, ChoquardError, InvalidParams, RegimeUnsupported,
                         RegimeViolation, SolverDiverged)
from .field import RadialGrid, build_kernel
from .params import (check_assumption_basic, classify_regime, params_from_dict, parse_exponent,
                     theorem_applicability)
from .solvers import (GroundStateSolver, SolveConfig, minimize_gamma_minus, minimize_gamma_plus,
                      problem_constants, suggest_grid, sweep_mu, sweep_p)
from .svgplot import write_plot

EXIT_OK, EXIT_PARAMS, EXIT_SOLVER, EXIT_CHECKS = 0, 2, 3, 4
DEFAULT_CACHE = "choquard_constants.json"


class ChecksFailed(Exception):
    pass


def _parse_grid(text, N: int):
    if text is None or text == "auto":
        return None
    if isinstance(text, dict):
        return RadialGrid.from_descriptor(text)
    try:
        m, rmax = text.split(",")
        return RadialGrid(N, float(rmax), int(m))
    except ValueError:
        raise InvalidParams(f"--grid expects M,RMAX, got {text!r}") from None


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidParams(f"cannot read config {path}: {exc}") from None


def _params(doc: dict):
    return params_from_dict(doc.get("params", doc))


def _solve_config(doc: dict, args) -> SolveConfig:
    sc = dict(doc.get("solve", {}))
    if getattr(args, "seed", None) is not None:
        sc["seed"] = args.seed
    elif doc.get("seed") is not None:
        sc["seed"] = doc["seed"]
    if getattr(args, "max_iter", None) is not None:
        sc["max_iter"] = args.max_iter
    if getattr(args, "init", None) is not None:
        sc["init"] = args.init
    try:
        return SolveConfig(**sc)
    except TypeError as exc:
        raise InvalidParams(f"bad solve options: {exc}") from None


def _cache(args) -> ConstantsCache:
    return ConstantsCache(args.cache)


def _out(args) -> Path | None:
    if args.out is None:
        return None
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(vf._jsonable(obj), indent=2))


def _run_config(args, params=None, grid=None, solve=None, extra=None) -> dict:
    return {"command": args.command, "params": params.to_dict() if params else None,
            "grid": grid.descriptor() if grid is not None else (args.grid or "auto"),
            "solve": solve.to_dict() if solve else None, "seed": args.seed,
            "options": extra or {}}


# --------------------------------------------------------------------------
# commands


def cmd_classify(args) -> int:
    doc = _load_config(args.config)
    params = _params(doc)
    tag = classify_regime(params)
    consts = problem_constants(params, cache=_cache(args))
    try:
        basic = check_assumption_basic(params, consts.get("cg_p"), consts["cg_q"],
                                       consts.get("s_h"))
    except RegimeUnsupported:
        basic = None
    tags = theorem_applicability(params, consts.get("cg_p"), consts["cg_q"], consts.get("s_h"))
    lines = [f"regime: {tag}", f"Xi: {consts.get('xi')}",
             f"basic assumption: {basic}"]
    if "mu_threshold" in consts:
        lines.append(f"mass-critical coupling threshold: {consts['mu_threshold']:.10g}")
    lines.append("applicable: " + (", ".join(_describe(t) for t in tags) if tags else "none"))
    print("\n".join(lines))
    out = _out(args)
    if out:
        _dump(out / "config.json", _run_config(args, params))
        _dump(out / "classify.json", {"regime": str(tag), "xi": consts.get("xi"),
                                      "basic_assumption": basic, "theorems": tags,
                                      "constants": consts})
    return EXIT_OK


_DESCRIPTIONS = {
    "1(i)": "local minimiser at negative level",
    "1(ii)": "second solution at positive level",
    "2": "the negative level is a minimum over the small-gradient set",
    "3(i)": "ground state at positive level",
    "3(ii)": "no ground state",
    "4": "ground state at positive level",
    "5(i)": "ground state at positive level",
    "5(ii)": "no ground state",
    "6(i)": "level and kinetic energy vanish as mu -> 0",
    "6(ii)": "level tends to the critical level as mu -> 0",
}


def _describe(tag: str) -> str:
    return f"{tag} ({_DESCRIPTIONS[tag]})" if tag in _DESCRIPTIONS else tag


def cmd_constants(args) -> int:
    cache = _cache(args)
    grid = _parse_grid(args.grid, args.N)
    r_list = [parse_exponent(r, args.N, args.alpha) for r in (args.r or [])]
    before = set(cache.entries)
    table = build_table(args.N, args.alpha, r_list, grid=grid, cache=cache)
    defect = table.consistency_defect()
    assert defect < 1e-12, f"S_H identity defect {defect}"
    print(f"riesz_A   {table.riesz_A:.15g}")
    print(f"hls_C     {table.hls_C:.15g}")
    print(f"sobolev_S {table.sobolev_S:.15g}")
    print(f"s_h       {table.s_h:.15g}   (identity defect {defect:.1e})")
    for k, v in table.cg.items():
        print(f"C_G({k}) {v:.15g}")
    print(f"cache: {args.cache} ({len(set(cache.entries) - before)} new entries)")
    out = _out(args)
    if out:
        _dump(out / "config.json", _run_config(args, extra={"N": args.N, "alpha": args.alpha,
                                                            "r": [str(r) for r in r_list]}))
        _dump(out / "constants.json", table.to_dict())
    return EXIT_OK


def _branch_allowed(params, consts, branch: str) -> bool:
    tags = set(theorem_applicability(params, consts.get("cg_p"), consts["cg_q"],
                                     consts.get("s_h")))
    if branch == "plus":
        return "1(i)" in tags
    if float(params.mu) == 0:
        return True
    return bool(tags & {"1(ii)", "3(i)", "4", "5(i)"})


def cmd_solve(args) -> int:
    doc = _load_config(args.config)
    params = _params(doc)
    config = _solve_config(doc, args)
    cache = _cache(args)
    consts = problem_constants(params, cache=cache)
    branch = args.branch
    if not args.force and not _branch_allowed(params, consts, branch):
        raise RegimeViolation(f"no existence statement covers branch {branch!r} here "
                              "(use --force to run anyway)")
    grid = _parse_grid(args.grid or doc.get("grid"), params.N) or suggest_grid(params, branch)
    out = _out(args)
    if out:
        _dump(out / "config.json", _run_config(args, params, grid, config, {"branch": branch}))
    kernel = build_kernel(grid, params.alpha)
    fn = minimize_gamma_plus if branch == "plus" else minimize_gamma_minus
    rep = fn(params, grid, kernel, consts, config)
    print(f"branch {rep.branch}: level {rep.level:.10g}, lambda {rep.lam:.10g}, "
          f"|P|/A {rep.residuals['pohozaev']:.2e}, iterations {rep.iterations}")
    for note in rep.notes:
        print(note)
    if out:
        rep.write(out)
        _dump(out / "constants.json", consts)
        it = [r["iter"] for r in rep.trace]
        write_plot(out / "trace.svg", [(it, [r["E"] for r in rep.trace], "lifted energy")],
                   title="energy trace", xlabel="iteration", ylabel="E")
        c = fb.fiber_from_field(rep.field, params, kernel)
        fb.write_fiber_csv(c, out / "fiber.csv", s_min=1e-2, s_max=1e2)
        s, f, _, _ = fb.fiber_profile(c, 1e-2, 1e2)
        write_plot(out / "fiber.svg", [(s, f / 2, "E[s o u]")], title="fiber profile",
                   xlabel="s", ylabel="energy", logx=True)
    return EXIT_OK


def cmd_sweep(args) -> int:
    doc = _load_config(args.config)
    params = _params(doc)
    config = _solve_config(doc, args)
    cache = _cache(args)
    values = [parse_exponent(v, params.N, params.alpha) for v in args.values]
    out = _out(args)
    grid = _parse_grid(args.grid, params.N)
    if out:
        _dump(out / "config.json", _run_config(args, params, grid, config,
                                               {"var": args.var, "values": [str(v) for v in values],
                                                "branch": args.branch}))
    if args.var == "mu":
        rep = sweep_mu(params, [float(v) for v in values], args.branch, grid, config, cache)
    else:
        rep = sweep_p(params, values, args.branch, grid, config, cache)
    for row in rep.rows:
        if row["converged"]:
            print(f"{args.var}={row['value']:<12.6g} level {row['level']:.10g}  A {row['A']:.6g}"
                  f"  lambda {row['lambda']:.6g}")
        else:
            print(f"{args.var}={row['value']:<12.6g} failed: {row.get('error')}")
    print("summary:", json.dumps(vf._jsonable(rep.summary)))
    ok = [r for r in rep.rows if r["converged"]]
    if out:
        rep.to_csv(out / "sweep.csv")
        _dump(out / "summary.json", rep.summary)
        if ok:
            ok[-1]["report"].field.to_csv(out / "solution.csv")
            _dump(out / "constants.json", ok[-1]["report"].constants_used)
        write_plot(out / "sweep.svg", [([r["value"] for r in ok], [r["level"] for r in ok],
                                        "level")],
                   title=f"level against {args.var}", xlabel=args.var, ylabel="level",
                   logx=args.var == "mu" and all(r["value"] > 0 for r in ok))
    if not ok:
        raise SolverDiverged("no sweep row converged")
    return EXIT_OK


def cmd_verify(args) -> int:
    doc = _load_config(args.config)
    suite = args.suite
    results = []
    cache = _cache(args)
    out = _out(args)
    params = _params(doc) if ("params" in doc or "N" in doc) else None
    if out:
        _dump(out / "config.json", _run_config(args, params, extra={"suite": suite}))
    if suite in ("gn", "all"):
        N = params.N if params else 3
        alpha = params.alpha if params else 2.0
        r = params.q if params else 2.0
        grid = _parse_grid(args.grid, N) or RadialGrid(N)
        gs = GroundStateSolver(N=N, alpha=alpha, r=r, grid=grid).fit()
        kern = build_kernel(grid, alpha)
        results.append(vf.check_gn(N, alpha, r, gs.gn_constant_, args.samples, args.seed or 0,
                                   grid, kern))
        results.append(vf.check_gn_equality(gs.profile_, r, gs.gn_constant_, kern))
    if suite in ("bubble", "all"):
        N = params.N if params else 3
        alpha = params.alpha if params else 2.0
        results.append(vf.check_bubble_rates(N, alpha, 4.0 if N == 3 else 3.0))
    if suite in ("pohozaev", "decay", "all") and params is not None:
        consts = problem_constants(params, cache=cache)
        branch = "plus" if _branch_allowed(params, consts, "plus") else "minus"
        grid = _parse_grid(args.grid, params.N) or suggest_grid(params, branch)
        kern = build_kernel(grid, params.alpha)
        fn = minimize_gamma_plus if branch == "plus" else minimize_gamma_minus
        rep = fn(params, grid, kern, consts, _solve_config(doc, args))
        if suite in ("pohozaev", "all"):
            results.append(vf.check_pohozaev(rep))
        if suite in ("decay", "all"):
            results.append(vf.check_decay(rep))
    if suite in ("thresholds", "all") and params is not None:
        if classify_regime(params).perturbation == "mass_critical":
            consts = problem_constants(params, cache=cache)
            results.append(vf.check_thresholds(params, consts["cg_q"]))
    if not results:
        raise InvalidParams(f"suite {suite!r} needs a parameter config")
    print(vf.summary_table(results))
    if out:
        vf.write_checks(results, out / "checks.json")
    if any(r.status == "fail" for r in results):
        raise ChecksFailed("one or more checks failed")
    return EXIT_OK


def cmd_ground_state(args) -> int:
    grid = _parse_grid(args.grid, args.N) or RadialGrid(args.N)
    r = parse_exponent(args.r, args.N, args.alpha)
    gs = GroundStateSolver(N=args.N, alpha=args.alpha, r=r, grid=grid).fit()
    print(f"||W||_2 {gs.norm_:.15g}  C_G {gs.gn_constant_:.15g}  residual {gs.residual_:.2e}"
          f"  iterations {gs.n_iter_}")
    out = _out(args)
    if out:
        _dump(out / "config.json", _run_config(args, grid=grid, extra={
            "N": args.N, "alpha": args.alpha, "r": str(r)}))
        gs.profile_.to_csv(out / "solution.csv")
        _dump(out / "report.json", {"norm": gs.norm_, "gn_constant": gs.gn_constant_,
                                    "residual": gs.residual_, "iterations": gs.n_iter_})
        write_plot(out / "profile.svg", [(grid.nodes, gs.profile_.values, "W")],
                   title="ground state", xlabel="r", ylabel="W")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with parameters (and optional 'solve')")
    common.add_argument("--out", help="run directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--grid", help="M,RMAX (default: chosen from the problem scale)")
    common.add_argument("--force", action="store_true", help="skip regime prechecks")
    common.add_argument("--cache", default=DEFAULT_CACHE, help="constants cache file")

    ap = argparse.ArgumentParser(prog="choquard", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="regime, threshold and theorems")
    c = sub.add_parser("constants", parents=[common], help="constants table")
    c.add_argument("--N", type=int, default=3)
    c.add_argument("--alpha", type=float, default=2.0)
    c.add_argument("--r", nargs="*", help="GN exponents (numbers, n/d or two_sharp)")
    s = sub.add_parser("solve", parents=[common], help="one normalized solution")
    s.add_argument("--branch", choices=("plus", "minus", "auto"), default="auto")
    s.add_argument("--max-iter", type=int, dest="max_iter")
    s.add_argument("--init", choices=("auto", "gaussian", "bubble", "wp_seed"))
    w = sub.add_parser("sweep", parents=[common], help="solve along mu or p")
    w.add_argument("--var", choices=("mu", "p"), required=True)
    w.add_argument("--values", nargs="+", required=True)
    w.add_argument("--branch", choices=("plus", "minus", "auto"), default="auto")
    w.add_argument("--max-iter", type=int, dest="max_iter")
    w.add_argument("--init", choices=("auto", "gaussian", "bubble", "wp_seed"))
    v = sub.add_parser("verify", parents=[common], help="verification suites")
    v.add_argument("--suite", choices=("gn", "pohozaev", "bubble", "thresholds", "decay", "all"),
                   default="gn")
    v.add_argument("--samples", type=int, default=1000)
    g = sub.add_parser("ground-state", parents=[common], help="ground state W_r and C_G")
    g.add_argument("--N", type=int, default=3)
    g.add_argument("--alpha", type=float, default=2.0)
    g.add_argument("--r", default="2")
    return ap


COMMANDS = {"classify": cmd_classify, "constants": cmd_constants, "solve": cmd_solve,
            "sweep": cmd_sweep, "verify": cmd_verify, "ground-state": cmd_ground_state}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ChecksFailed):
        return EXIT_CHECKS
    if isinstance(exc, (InvalidParams, RegimeUnsupported, RegimeViolation)):
        return EXIT_PARAMS
    if isinstance(exc, (SolverDiverged, BranchUnavailable, ChoquardError)):
        return EXIT_SOLVER
    return EXIT_SOLVER


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ChoquardError, ChecksFailed, ValueError) as exc:
        code = _exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        if args.out:
            d = Path(args.out)
            d.mkdir(parents=True, exist_ok=True)
            _dump(d / "error.json", {"error": type(exc).__name__, "message": str(exc),
                                     "exit_code": code,
                                     "traceback": traceback.format_exc().splitlines()[-5:]})
        return code


if __name__ == "__main__":
    sys.exit(main())
