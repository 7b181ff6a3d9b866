"""Command-line entry point: experiment orchestration and report emission.

Reports are canonical JSON on stdout (or ``--out``); ``--format csv``
switches the report types that have a tabular form.  Exit codes: 0 ok,
2 parameter error, 3 convergence/resolution error, 4 invariant or
acceptance failure, 64 usage.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .acceptance import AcceptanceConfig, run_battery
from .errors import USAGE_EXIT, InvariantViolation, PolyharmError
from .exponents import classify_regime, compute_exponents, run_bootstrap, validate_trace
from .geometry import BallProblem, build_grid, default_cone
from .green import SampleSpec, build_kernel, dump_kernel_matrix, eval_green, verify_green_lower_bound
from .potential import (
    apply_green_operator,
    default_rhs_family,
    falsify_estimate,
    solve_at_center,
    verify_estimate,
)
from .reporting import canonical_csv, canonical_json
from .singular import construct_counterexample, near_vertex_max
from .spectral import principal_eigenpair

_RHS_NAMES = ("const", "one", "one_plus_r", "gauss", "boundary_singular")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _load_config(path: str) -> dict:
    """Flat ``key = value`` lines; keys match the long flag names."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise PolyharmError(f"bad config line (expected key = value): {raw!r}")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _emit(doc, args, csv_text=None) -> None:
    text = csv_text if (getattr(args, "format", "json") == "csv" and csv_text) else canonical_json(doc)
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _float_or_inf(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def _coerce(raw: str, current):
    """Config-file value coerced to the flag's type (int/float/bool/str)."""
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return _float_or_inf(raw)
    if current is None:
        try:
            return int(raw)
        except ValueError:
            pass
        try:
            return _float_or_inf(raw)
        except ValueError:
            return raw
    return raw


def _build_parser() -> _Parser:
    parser = _Parser(prog="polyharm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, pq=False, nm=True):
        p.add_argument("--config", help="key = value defaults file")
        p.add_argument("--out", help="write the JSON/CSV report here instead of stdout")
        p.add_argument("--format", choices=["json", "csv"], default="json")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cache-dir", dest="cache_dir", help="grid cache directory")
        if nm:
            p.add_argument("--n", type=int, required=True)
            p.add_argument("--m", type=int, required=True)
        if pq:
            p.add_argument("--p", type=_float_or_inf, required=True)
            p.add_argument("--q", type=_float_or_inf, required=True)

    p = sub.add_parser("regimes", help="exponents alpha/beta and the regime tag")
    common(p, pq=True)

    p = sub.add_parser("bootstrap", help="run the integrability bootstrap")
    common(p, pq=True)

    p = sub.add_parser("green", help="verify kernel lower bounds or evaluate the kernel")
    common(p)
    p.add_argument("--bound", choices=["g1", "g2", "g3"])
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--base-pairs", dest="base_pairs", type=int, default=400)
    p.add_argument("--x", help="comma-separated point")
    p.add_argument("--y", help="comma-separated point")
    p.add_argument("--dump-matrix", dest="dump_matrix", help="write the Nystrom matrix here")
    p.add_argument("--level", type=int, default=0, help="grid level for --dump-matrix")

    p = sub.add_parser("solve", help="apply the Green operator to a named rhs")
    common(p)
    p.add_argument("--rhs", choices=_RHS_NAMES, default="one")
    p.add_argument("--level", type=int, default=None, help="single level (default ladder 0..3)")
    p.add_argument("--levels", type=int, default=4)

    p = sub.add_parser("eigen", help="principal eigenpair by power iteration")
    common(p)
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--dump-field", dest="dump_field", help="write the eigenfunction values here")

    p = sub.add_parser("estimate", help="verify or falsify a weighted a priori estimate")
    common(p)
    p.add_argument("--case", required=True,
                   choices=["prop21_1", "prop21_2", "prop23", "lemma_propDS", "final_prop"])
    p.add_argument("--p", type=_float_or_inf)
    p.add_argument("--q", type=_float_or_inf)
    p.add_argument("--k", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--exploratory", action="store_true",
                   help="admit the unproved band 2m/(n+m) < 1/p - 1/q <= 2m/(n-m)")

    p = sub.add_parser("singular", help="construct the Theorem-2 counterexample system")
    common(p, pq=True)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--profile-csv", dest="profile_csv", help="radial u/v profiles along the cone axis")

    p = sub.add_parser("suite", help="run the acceptance battery")
    common(p, nm=False)
    p.add_argument("--fast", action="store_true", help="trimmed ladders (for smoke runs)")
    p.add_argument("--estimate-levels", dest="estimate_levels", type=int)
    p.add_argument("--falsify-levels", dest="falsify_levels", type=int)
    p.add_argument("--singular-levels", dest="singular_levels", type=int)
    return parser


def _cmd_regimes(args) -> int:
    params = compute_exponents(args.p, args.q, args.m)
    doc = params.to_doc()
    doc["n"] = args.n
    doc["regime"] = classify_regime(params, args.n, args.m)
    _emit(doc, args)
    return 0


def _cmd_bootstrap(args) -> int:
    trace = run_bootstrap(args.p, args.q, args.m, args.n)
    violations = validate_trace(trace)
    lines = [f"{'round':>5s} {'k':>10s} {'eta':>10s} {'rho':>10s} {'k1':>10s} {'k2':>10s}"]
    for i, rnd in enumerate(trace.rounds):
        lines.append(f"{i:5d} {rnd.k:10.6f} {rnd.eta:10.6f} {rnd.rho:10.6f} "
                     f"{rnd.k1:10.6f} {rnd.k2:10.6f}")
    lines.append(f"final k_bar={trace.k_bar:.6f} k1={trace.k1_final:.6f} k2=inf")
    sys.stderr.write("\n".join(lines) + "\n")
    doc = trace.to_doc()
    doc["violations"] = violations
    _emit(doc, args)
    if violations:
        raise InvariantViolation("; ".join(violations))
    return 0


def _cmd_green(args) -> int:
    kern = build_kernel(args.n, args.m)
    if args.dump_matrix:
        grid = build_grid(kern.problem, args.level)
        dump_kernel_matrix(kern, grid, args.dump_matrix)
        _emit({"dumped": args.dump_matrix, "nodes": grid.node_count}, args)
        return 0
    if args.x and args.y:
        x = [float(c) for c in args.x.split(",")]
        y = [float(c) for c in args.y.split(",")]
        _emit({"n": args.n, "m": args.m, "x": x, "y": y, "G": eval_green(kern, x, y)}, args)
        return 0
    case = args.bound or {1: "g1", 0: "g2", -1: "g3"}[int(np.sign(args.n - 2 * args.m))]
    rep = verify_green_lower_bound(
        kern, case, SampleSpec(levels=args.levels, base_pairs=args.base_pairs, seed=args.seed)
    )
    csv_text = canonical_csv(["level", "pairs", "min_ratio"],
                             [[e["level"], e["pairs"], e["min_ratio"]] for e in rep.per_level])
    _emit(rep.to_doc(), args, csv_text)
    return 0


def _rhs_field(grid, name, m):
    name = "one" if name == "const" else name
    for key, f in default_rhs_family(BallProblem(grid.n, m), grid):
        if key == name:
            return f
    raise PolyharmError(f"unknown rhs {name!r}")


def _cmd_solve(args) -> int:
    kern = build_kernel(args.n, args.m)
    levels = [args.level] if args.level is not None else list(range(args.levels))
    rows = []
    for level in levels:
        grid = build_grid(kern.problem, level)
        f = _rhs_field(grid, args.rhs, args.m)
        u0 = solve_at_center(kern, f)
        rows.append({"level": level, "nodes": grid.node_count, "u_center": u0})
    doc = {"n": args.n, "m": args.m, "rhs": args.rhs, "levels": rows}
    csv_text = canonical_csv(["level", "nodes", "u_center"],
                             [[r["level"], r["nodes"], r["u_center"]] for r in rows])
    _emit(doc, args, csv_text)
    return 0


def _cmd_eigen(args) -> int:
    kern = build_kernel(args.n, args.m)
    grid = build_grid(kern.problem, args.level)
    pair = principal_eigenpair(kern, grid, tol=args.tol)
    if args.dump_field:
        header = f"polyharm-field v1 n={args.n} count={grid.node_count}\n"
        with open(args.dump_field, "wb") as fh:
            fh.write(header.encode())
            fh.write(pair.eigenfunction.values.astype("<f8").tobytes())
    _emit(pair.to_doc(), args)
    return 0


def _cmd_estimate(args) -> int:
    kern = build_kernel(args.n, args.m)
    if args.case == "final_prop":
        if args.p is None or args.q is None:
            raise PolyharmError("final_prop requires --p and --q")
        rep = falsify_estimate(kern, args.p, args.q, levels=args.levels or 4,
                               alpha=args.alpha, exploratory=args.exploratory)
    else:
        params = {}
        for key in ("p", "q", "k", "theta", "alpha"):
            val = getattr(args, key)
            if val is not None:
                params[key] = val
        levels = tuple(range(args.levels)) if args.levels else (0, 1, 2)
        rep = verify_estimate(kern, args.case, params, levels=levels,
                              eval_level=0 if args.n >= 3 else 1)
    _emit(rep.to_doc(), args, rep.to_csv())
    return 0


def _cmd_singular(args) -> int:
    params = compute_exponents(args.p, args.q, args.m)
    region = default_cone(args.n)
    growth = []
    system = None
    for level in range(args.levels):
        system = construct_counterexample(args.p, args.q, args.m, args.n, level=level)
        growth.append(near_vertex_max(system.u, region, 2.0**-level))
    doc = system.to_doc()
    doc["regime"] = classify_regime(params, args.n, args.m)
    doc["near_vertex_growth"] = growth
    if args.profile_csv:
        kern = build_kernel(args.n, args.m)
        s = np.geomspace(2.0**-args.levels, region.cap_radius * 0.98, 40)
        pts = np.asarray(region.x0) + s[:, None] * np.asarray(region.axis)
        uprof = apply_green_operator(kern, system.phi, eval_points=pts)
        vprof = apply_green_operator(kern, system.psi, eval_points=pts)
        Path(args.profile_csv).write_text(
            canonical_csv(["s", "u", "v"], [[s[i], uprof[i], vprof[i]] for i in range(len(s))])
        )
    _emit(doc, args)
    return 0


def _cmd_suite(args) -> int:
    cfg = AcceptanceConfig(seed=args.seed)
    if args.fast:
        cfg = cfg.fast()
    for key in ("estimate_levels", "falsify_levels", "singular_levels"):
        val = getattr(args, key, None)
        if val is not None:
            cfg = replace(cfg, **{key: val})
    doc = run_battery(cfg, log=lambda line: sys.stderr.write(line + "\n"))
    _emit(doc, args)
    if doc["failed"]:
        raise InvariantViolation("failed acceptance criteria: " + ", ".join(doc["failed"]))
    return 0


_COMMANDS = {
    "regimes": _cmd_regimes,
    "bootstrap": _cmd_bootstrap,
    "green": _cmd_green,
    "solve": _cmd_solve,
    "eigen": _cmd_eigen,
    "estimate": _cmd_estimate,
    "singular": _cmd_singular,
    "suite": _cmd_suite,
}


def run_command(argv) -> int:
    """Dispatch one CLI invocation; returns the process exit status."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _run_parsed(args, argv)
    except PolyharmError as exc:
        sys.stderr.write(f"polyharm {args.command}: {exc}\n")
        return exc.exit_code


def _run_parsed(args, argv) -> int:
    if getattr(args, "config", None):
        for key, raw in _load_config(args.config).items():
            if not hasattr(args, key):
                raise PolyharmError(f"config key {key!r} does not match any flag")
            if f"--{key.replace('_', '-')}" in (argv or []):
                continue  # explicit flags win over the config file
            setattr(args, key, _coerce(raw, getattr(args, key)))
    if getattr(args, "cache_dir", None):
        os.environ["POLYHARM_CACHE_DIR"] = args.cache_dir
    return _COMMANDS[args.command](args)


def main(argv=None) -> int:
    try:
        return run_command(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
