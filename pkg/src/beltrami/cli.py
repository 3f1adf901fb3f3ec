"""Command-line front end: ``beltrami {solve,field,tangent,reconstruct,verify,plot}``.

Exit codes: 0 all checks pass, 1 check failures, 2 configuration error,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig, load_config_file, parse_a_set, parse_complex_list
from .errors import BeltramiError, ConfigError, EllipticityError, GridSpecError, NonConvergenceError
from .field import field_sweep, solve_for_a
from .grid import GridSpec, make_operators
from .reconstruction import chart_a_set, default_z_probes, gradient_charts, invert_gradient, round_trip
from .solver import distortion_check, min_jacobian, solve_nonlinear
from .structure import RadialH, ZeroH, parse_complex, parse_structure
from .tangent import nondegeneracy_report, tangent_data, verify_linearization
from .verify import run_suite

log = logging.getLogger("beltrami")

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_NONCONV = 0, 1, 2, 3

# command-line flag -> config key
_FLAGS = {
    "H": "H", "n": "n", "L": "L", "rho": "rho", "tol": "tol", "newton_tol": "newton_tol",
    "max_iter": "max_iter", "threads": "threads", "seed": "seed", "out": "out", "w": "w",
    "a": "a", "e": "e", "t": "t", "z": "z", "w_probes": "w_probes", "chart_n": "chart_n",
    "heatmap": "heatmap",
}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("global")
    g.add_argument("--config", action="append", help="key=value config file (repeatable)")
    g.add_argument("--H", help="structure function id, e.g. radial:k=0.3")
    g.add_argument("--n", type=int, help="grid samples per side")
    g.add_argument("--L", type=float, help="half width of the periodic square")
    g.add_argument("--rho", type=float, help="support radius")
    g.add_argument("--tol", type=float, help="fixed-point tolerance")
    g.add_argument("--newton-tol", dest="newton_tol", type=float, help="normalization tolerance")
    g.add_argument("--max-iter", dest="max_iter", type=int, help="fixed-point iteration cap")
    g.add_argument("--threads", type=int, help="FFT / sweep worker count")
    g.add_argument("--deterministic", action="store_true", help="single-threaded bit-reproducible mode")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("-v", "--verbose", action="count")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="beltrami", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="principal solution with slope w")
    p.add_argument("--w", help="slope at infinity")

    p = sub.add_parser("field", parents=[common], help="field members for an a-set")
    p.add_argument("--a", help="a-set: circle:r=1,n=16 | grid:re=[..],im=[..],n=9 | list")
    p.add_argument("--cold", action="store_true", help="cold-start every member (parallel with --threads)")

    p = sub.add_parser("tangent", parents=[common], help="linearization report at a base point")
    p.add_argument("--a", help="base point")
    p.add_argument("--e", help="directions (list)")
    p.add_argument("--t", type=float, help="ladder step (default 2e-2 max(1,|a|))")

    p = sub.add_parser("reconstruct", parents=[common], help="round trip H -> field -> H_F")
    p.add_argument("--z", help="probe points (list); default 4 spiral points")
    p.add_argument("--w-probes", dest="w_probes", help="gradient probes (list); default inside every chart")
    p.add_argument("--chart-n", dest="chart_n", type=int, help="samples per chart circle")
    p.add_argument("--heatmap", type=int, help="side of a w-grid for an error heat map at the first z")

    p = sub.add_parser("verify", parents=[common], help="run the property suite")
    p.add_argument("--full", action="store_true", default=None, help="full sample counts")

    p = sub.add_parser("plot", parents=[common], help="PNG images of a field member")
    p.add_argument("--a", help="field parameter")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for path in getattr(args, "config", []):
        load_config_file(path, cfg)
    for flag, key in _FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            cfg.set(key, v, where="--" + flag.replace("_", "-") + ": ")
    if getattr(args, "deterministic", None):
        cfg.deterministic = True
    if getattr(args, "full", None):
        cfg.full = True
    return cfg


def _setup(cfg: ExperimentConfig):
    try:
        spec = GridSpec(cfg.n, cfg.L, cfg.rho)
    except GridSpecError as exc:
        raise ConfigError(str(exc)) from exc
    H = parse_structure(cfg.H)
    ops = make_operators(spec, workers=cfg.effective_threads())
    return H, ops


def _out_dir(cfg: ExperimentConfig) -> Path | None:
    if not cfg.out:
        return None
    d = Path(cfg.out)
    cfg.write_echo(d)
    return d


def _emit(obj) -> None:
    sys.stdout.write(io.dumps_json(obj) + "\n")


def oracle_block(H, sol) -> dict | None:
    """Closed-form comparison for the members that have one (sup over ``|z| <= rho``)."""
    spec = sol.spec
    w = sol.w_infinity
    if isinstance(H, ZeroH):
        expected = w * spec.z
    elif isinstance(H, RadialH) and w.imag == 0 and w.real > 0:
        expected = H.stretch(spec.z, w.real)
    else:
        return None
    got = w * spec.z + sol.f_values.values - sol.value(0j)
    m = spec.disk_mask(spec.support_radius)
    err = float(np.max(np.abs(got - expected)[m]))
    scale = float(np.max(np.abs(expected)[m])) or 1.0
    return {"oracle": "linear map" if isinstance(H, ZeroH) else "radial stretch", "sup_error": err, "sup_relative": err / scale, "passed": err <= 0.01 * max(1.0, abs(w))}


def cmd_solve(cfg: ExperimentConfig) -> int:
    H, ops = _setup(cfg)
    w = parse_complex(cfg.w)
    sol = solve_nonlinear(H, w, ops, tol=cfg.tol, max_iter=cfg.max_iter)
    out = {
        "structure": H.ident,
        "w": w,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "contraction_ratio": sol.contraction_ratio,
        "k_bound": H.k_bound,
        "distortion": distortion_check(sol),
        "min_jacobian": min_jacobian(sol) if w != 0 else 0.0,
        "spec": ops.spec.as_dict(),
    }
    oracle = oracle_block(H, sol)
    if oracle is not None:
        out["oracle_comparison"] = oracle
    d = _out_dir(cfg)
    if d is not None:
        io.write_solution(d, sol, structure=H.ident)
        io.dump_json(d / "summary.json", out)
    _emit(out)
    return EXIT_OK if oracle is None or oracle["passed"] else EXIT_CHECKS


def cmd_field(cfg: ExperimentConfig, cold: bool = False) -> int:
    H, ops = _setup(cfg)
    a_set = parse_a_set(cfg.a)
    res = field_sweep(H, a_set, ops, tol=cfg.newton_tol, warm=not cold, workers=cfg.effective_threads(), solver_tol=cfg.tol, max_iter=cfg.max_iter)
    lines = []
    for s in res.samples:
        lines.append({"a": s.a, "w": s.w, "residual": s.residual, "newton_iters": s.newton_iterations})
    for a, msg in res.failures:
        lines.append({"a": a, "error": msg})
    text = "".join(io.dumps_json(x, indent=None) + "\n" for x in lines)
    sys.stdout.write(text)
    d = _out_dir(cfg)
    if d is not None:
        (d / "field.jsonl").write_text(text)
    if any("NonConvergenceError" in m for _, m in res.failures):
        return EXIT_NONCONV
    bad = res.failures or any(s.residual > 1e-6 for s in res.samples)
    return EXIT_CHECKS if bad else EXIT_OK


def cmd_tangent(cfg: ExperimentConfig) -> int:
    H, ops = _setup(cfg)
    a = parse_complex(cfg.a)
    es = parse_complex_list(cfg.e)
    t = cfg.t or None
    base = solve_for_a(H, a, ops, tol=1e-12, solver_tol=1e-13)
    reports = [verify_linearization(H, a, e, ops, t=t, base=base) for e in es]
    nd = nondegeneracy_report(H, a, ops, data=tangent_data(H, a, ops, base=base))
    out = []
    for r in reports:
        d = r.as_dict()
        d.update({"coeff_gap_sup": nd.coeff_gap_sup, "det_min": nd.det_min, "det_max": nd.det_max, "det_sign": nd.det_sign, "slope_ratio_minmax": [nd.slope_ratio_min, nd.slope_ratio_max]})
        out.append(d)
    ok = all(r.ok() or max(r.residuals) <= 100 * r.solver_tol / r.t_ladder[-1] for r in reports)
    ok = ok and nd.det_sign != 0 and nd.coeff_gap_sup <= max(2 * nd.t, 1e-4)
    d = _out_dir(cfg)
    if d is not None:
        io.dump_json(d / "tangent.json", out)
    _emit(out)
    return EXIT_OK if ok else EXIT_CHECKS


def cmd_reconstruct(cfg: ExperimentConfig) -> int:
    H, ops = _setup(cfg)
    zs = parse_complex_list(cfg.z) if cfg.z else default_z_probes(4)
    ws = parse_complex_list(cfg.w_probes) if cfg.w_probes else None
    charts = gradient_charts(H, zs, chart_a_set((0.5, 1.0, 2.0), cfg.chart_n), ops)
    rep = round_trip(H, zs, ws, ops, charts=charts)
    out = rep.as_dict()
    d = _out_dir(cfg)
    if d is not None:
        io.dump_json(d / "round_trip.json", out)
        rep.write_csv(d / "round_trip.csv")
        if cfg.heatmap > 0:
            from .plotting import heatmap_png

            ch = charts[0]
            r = 0.8 * ch.inner_image_radius()
            g = np.linspace(-r, r, cfg.heatmap)
            err = np.full((cfg.heatmap, cfg.heatmap), np.nan)
            prev = None
            for j, y in enumerate(g):
                for k, x in enumerate(g):
                    w = complex(x, y)
                    if abs(w) > r:
                        continue
                    try:
                        inv = invert_gradient(ch, w, warm=prev)
                    except BeltramiError:
                        continue
                    prev = inv if inv.solution is not None else prev
                    err[j, k] = abs(inv.dzbar - H.evaluate(ch.z_probe, w))
            heatmap_png(d / "round_trip_error.png", err, scale=max(1, 256 // cfg.heatmap))
    _emit(out)
    ok = not rep.failures and rep.sup_relative <= 0.05 and rep.lipschitz_max <= H.k_bound + 1e-6
    return EXIT_OK if ok else EXIT_CHECKS


def cmd_verify(cfg: ExperimentConfig) -> int:
    H, ops = _setup(cfg)
    rep = run_suite(H, ops, seed=cfg.seed, quick=not cfg.full)
    d = _out_dir(cfg)
    if d is not None:
        io.dump_json(d / "verify.json", rep.as_dict())
        (d / "verify.txt").write_text(rep.table() + "\n")
    sys.stdout.write(rep.table() + "\n")
    return EXIT_OK if rep.passed else EXIT_CHECKS


def cmd_plot(cfg: ExperimentConfig) -> int:
    from .plotting import deformed_grid_png, heatmap_png

    H, ops = _setup(cfg)
    if not cfg.out:
        raise ConfigError("plot needs --out")
    d = _out_dir(cfg)
    s = solve_for_a(H, parse_complex(cfg.a), ops, tol=cfg.newton_tol, solver_tol=cfg.tol)
    deformed_grid_png(d / "phi_grid.png", s.value_grid())
    sol = s.solution
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.abs(sol.dzbar_f.values) / np.abs(sol.dz_f.values)
    heatmap_png(d / "distortion.png", mu, vmin=0.0, vmax=max(H.k_bound, 1e-12))
    heatmap_png(d / "jacobian.png", np.abs(sol.dz_f.values) ** 2 - np.abs(sol.dzbar_f.values) ** 2)
    _emit({"a": s.a, "w": s.w, "files": ["phi_grid.png", "distortion.png", "jacobian.png"]})
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(getattr(args, "verbose", 0), 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        cmd = args.command
        if cmd == "solve":
            return cmd_solve(cfg)
        if cmd == "field":
            return cmd_field(cfg, cold=args.cold)
        if cmd == "tangent":
            return cmd_tangent(cfg)
        if cmd == "reconstruct":
            return cmd_reconstruct(cfg)
        if cmd == "verify":
            return cmd_verify(cfg)
        return cmd_plot(cfg)
    except (ConfigError, EllipticityError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except BeltramiError as exc:
        print(f"check failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECKS


if __name__ == "__main__":
    sys.exit(main())
