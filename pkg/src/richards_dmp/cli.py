"""Command-line front end.

Exit codes: 0 success, 1 bad input (config or arguments), 2 solver failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .config import ConfigError
from .runner import check_mesh, list_builtins, resolve_scenario, run_scenario, run_sweep

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2


def _mesh_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers") from None
    if not values or min(values) < 2:
        raise argparse.ArgumentTypeError("node counts must be >= 2")
    return values


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError("must be a positive number")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="richards-dmp",
        description="Semi-implicit P1 solver for the Richards equation with positivity and "
        "maximum-principle diagnostics.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario file or builtin name (see 'list')")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
        sp.add_argument("--tau", type=_positive_float, help="override the time step")
        sp.add_argument("--scheme", choices=("explicit", "implicit"), help="override the scheme")

    run = sub.add_parser("run", help="run one scenario and write its diagnostics CSV")
    common(run)
    run.add_argument("--vtk-every", type=int, default=None, metavar="K", help="VTK snapshot every K steps (0: off)")

    sw = sub.add_parser("sweep", help="repeat an interval scenario over several meshes")
    common(sw)
    sw.add_argument("--meshes", type=_mesh_list, help="node counts, e.g. 40,80,160,400")

    sub.add_parser("list", help="list builtin scenarios")

    cm = sub.add_parser("check-mesh", help="weakly-acute and local Peclet checks on the initial state")
    cm.add_argument("scenario")
    return p


def _cmd_run(args) -> int:
    cfg = resolve_scenario(args.scenario).with_overrides(args.tau, args.scheme)
    if args.vtk_every is not None and args.vtk_every < 0:
        raise ConfigError("--vtk-every must be >= 0")
    out = args.out
    res = run_scenario(cfg, out, vtk_every=args.vtk_every)
    d = res.diagnostics
    print(f"{cfg.name}: {len(d)} step(s), scheme={cfg.scheme.scheme.value}, tau={cfg.scheme.tau:g}")
    if d:
        print(f"  theta range over run: [{min(x.theta_min for x in d):.6g}, {max(x.theta_max for x in d):.6g}]")
        print(f"  explicit condition met at {sum(x.explicit_condition_met for x in d)}/{len(d)} steps")
    print(f"  diagnostics: {res.csv_path}")
    if res.profile_path:
        print(f"  profile: {res.profile_path}")
    if res.vtk_paths:
        print(f"  vtk: {len(res.vtk_paths)} snapshot(s) in {out}")
    if not res.ok:
        print(f"solver failure: {res.error}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = resolve_scenario(args.scenario).with_overrides(args.tau, args.scheme)
    rows = run_sweep(cfg, args.meshes, args.out)
    print(f"{'N':>6} {'h_eff':>10} {'pe_max':>10} {'theta_min':>11} {'theta_max':>11}  max_principle")
    for r in rows:
        flag = "yes" if r.max_principle else "no"
        print(f"{r.N:>6} {r.h_eff:>10.4g} {r.pe_max:>10.4g} {r.theta_min:>11.5g} {r.theta_max:>11.5g}  {flag}"
              + ("" if r.status == "ok" else f"  ({r.status})"))
    print(f"summary: {args.out / (cfg.name + '_sweep.csv')}")
    return EXIT_SOLVER if any(r.status != "ok" for r in rows) else EXIT_OK


def _cmd_list(args) -> int:
    entries = list_builtins()
    width = max(len(n) for n, _ in entries)
    for name, desc in entries:
        print(f"{name:<{width}}  {desc}")
    return EXIT_OK


def _cmd_check_mesh(args) -> int:
    cfg = resolve_scenario(args.scenario)
    mc = check_mesh(cfg)
    print(f"{cfg.name}: {mc.n_vertices} vertices, {mc.n_elements} elements, {mc.n_interior} unknowns")
    wa = mc.weakly_acute
    print(f"  weakly acute: {'pass' if wa.passed else 'FAIL'} ({len(wa.violations)} offending pair(s))")
    for e, i, j, dot in wa.violations[:10]:
        print(f"    element {e}: grad phi_{i} . grad phi_{j} = {dot:.3e}")
    print(f"  local Peclet condition: {'pass' if mc.peclet_ok else 'FAIL'}; max cell Peclet {mc.pe_max:.6g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "list": _cmd_list, "check-mesh": _cmd_check_mesh}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
