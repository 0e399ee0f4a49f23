"""Command-line front end: ``magwill <command> [options]``."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional

import pydantic

from magwill import __version__
from magwill.asymptotics import calibrate_lambda3, falsification_experiment, load_calibration
from magwill.errors import MagwillError, MissingCalibrationError, ValidationError
from magwill.geometry import functionals_quadrature, intrinsic_volumes
from magwill.io import (
    read_distance_matrix,
    read_off,
    read_point_cloud,
    write_curve_csv,
    write_experiment_csv,
    write_manifest,
    write_model,
)
from magwill.mesh import functionals_mesh, mesh_domain, validate_mesh
from magwill.metric import magnitude_curve
from magwill.reduction import (
    Manifold,
    expectation_expansion,
    parity_vanishing_check,
    reduce_two_variable,
)
from magwill.sampling import estimate_curve
from magwill.symbols import PolyhomSymbol, homogeneity_check, parametrix, symbol_product
from magwill.types import CalibrationResult, FiniteMetricSpace, MagnitudeCurve, RunManifest
from magwill.utils import parse_domain, parse_grid, utc_now

logger = logging.getLogger("magwill")

DEFAULT_A_GRID = "1,0.5,0.25,0.125"
DEFAULT_CALIBRATION_GRID = "0.5:1.5:6"


def _summary(text: str) -> None:
    print(text, file=sys.stderr)


def _scales(args: argparse.Namespace) -> list[float]:
    if args.R is not None and args.R_grid is not None:
        raise ValidationError("Give either --R or --R-grid, not both")
    if args.R is not None:
        return [args.R]
    if args.R_grid is not None:
        return parse_grid(args.R_grid)
    raise ValidationError("One of --R or --R-grid is required")


def _parameters(args: argparse.Namespace) -> dict[str, Any]:
    return {k: v for k, v in vars(args).items() if k not in ("handler",)}


def _finish(args: argparse.Namespace, started: str) -> None:
    manifest = RunManifest(
        command=args.command,
        parameters=_parameters(args),
        seed=getattr(args, "seed", None),
        tool_version=__version__,
        started_at=started,
        finished_at=utc_now(),
    )
    if args.manifest is not None:
        write_model(manifest, args.manifest)
        logger.debug("manifest written to %s", args.manifest)
    elif args.out is not None:
        path = write_manifest(manifest, args.out)
        logger.debug("manifest written to %s", path)
    else:
        _summary(f"manifest: {manifest.model_dump_json()}")


def cmd_magnitude(args: argparse.Namespace) -> int:
    grid = _scales(args)
    curve: MagnitudeCurve
    if args.points or args.distances:
        space = (
            FiniteMetricSpace.from_points(read_point_cloud(args.points))
            if args.points
            else read_distance_matrix(args.distances)
        )
        curve = magnitude_curve(space, grid, threads=args.threads)
    elif args.domain:
        spec = parse_domain(args.domain)
        curve, _ = estimate_curve(
            spec, grid, tol=args.tol, N_max=args.N_max, strategy=args.strategy,
            seed=args.seed, threads=args.threads,
        )
    else:
        raise ValidationError("One of --points, --distances or --domain is required")
    write_curve_csv(curve, args.out)
    failed = [s.R for s in curve.samples if s.failed]
    _summary(f"magnitude: {len(curve.samples)} scales, {len(failed)} failed")
    return 3 if failed else 0


def cmd_geometry(args: argparse.Namespace) -> int:
    result: dict[str, Any] = {}
    if args.mesh:
        mesh = read_off(args.mesh)
        validate_mesh(mesh)
        result["functionals"] = functionals_mesh(mesh).model_dump()
    else:
        if not args.domain:
            raise ValidationError("One of --domain or --mesh is required")
        spec = parse_domain(args.domain)
        if args.mode == "mesh":
            mesh = mesh_domain(spec, refinement=args.refinement)
            validate_mesh(mesh)
            result["functionals"] = functionals_mesh(mesh).model_dump()
        else:
            result["functionals"] = functionals_quadrature(spec, args.quad_order).model_dump()
        if args.intrinsic_volumes:
            iv = intrinsic_volumes(spec, N_mc=args.mc_samples, seed=args.seed)
            result["intrinsic_volumes"] = iv.model_dump()
    text = json.dumps(result, indent=2)
    if args.out is None:
        sys.stdout.write(text + "\n")
    else:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    f = result["functionals"]
    _summary(f"geometry: area={f['area']:.6g} willmore={f['willmore']:.6g}")
    return 0


def _calibrate(args: argparse.Namespace, grid_text: str) -> CalibrationResult:
    return calibrate_lambda3(
        parse_grid(grid_text), tol=args.tol, N_max=args.N_max, seed=args.seed,
        strategy=args.strategy, n_boot=args.n_boot, use_extrapolated=args.use_extrapolated,
        threads=args.threads,
    )


def cmd_calibrate(args: argparse.Namespace) -> int:
    result = _calibrate(args, args.R_grid)
    write_model(result, args.out)
    _summary(f"calibrate: lambda3={result.lambda3:.6g} +/- {result.uncertainty:.2g}")
    return 0


def cmd_falsify(args: argparse.Namespace) -> int:
    if args.calibration and Path(args.calibration).exists():
        calibration = load_calibration(args.calibration)
    elif args.calibrate:
        calibration = _calibrate(args, args.calibration_R_grid)
        if args.calibration:
            write_model(calibration, args.calibration)
    else:
        raise MissingCalibrationError(
            "No calibration file; pass --calibration PATH or --calibrate",
            details={"calibration": args.calibration},
        )
    table = falsification_experiment(
        parse_grid(args.a_grid),
        calibration,
        R_grid=parse_grid(args.R_grid) if args.R_grid else None,
        budget=args.budget or None,
        tol=args.tol,
        seed=args.seed,
        quad_order=args.quad_order,
        mc_samples=args.mc_samples,
        threads=args.threads,
    )
    write_experiment_csv(table, args.out)
    spread = "n/a" if table.spread is None else f"{table.spread:.3g}"
    _summary(f"falsify: spread={spread} verdict={table.verdict}")
    return 0


def _load_symbol(
    path: Optional[str], args: argparse.Namespace, full: bool = True
) -> PolyhomSymbol:
    if full and args.full_symbol is not None:
        return PolyhomSymbol.from_full_symbol(
            args.full_symbol, order=args.order, dim=args.dim, levels=args.levels
        )
    if path is None:
        raise ValidationError("A symbol input (--input or --full-symbol) is required")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ValidationError(f"File not found: {path}") from e
    return PolyhomSymbol.from_json(text)


def _bindings(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        name, sep, body = item.partition("=")
        if not sep or not name.strip():
            raise ValidationError(f"Binding must look like name=expression: {item!r}")
        out[name.strip()] = body
    return out


def _manifold(text: str) -> Any:
    adapter: pydantic.TypeAdapter[Any] = pydantic.TypeAdapter(Manifold)
    payload = json.loads(text) if text.strip().startswith("{") else {"kind": text.strip()}
    return adapter.validate_python(payload)


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text + "\n")
    else:
        Path(out).write_text(text + "\n", encoding="utf-8")


def cmd_symbol(args: argparse.Namespace) -> int:
    sym = _load_symbol(args.input, args)
    action = args.action
    if action == "check":
        report = homogeneity_check(sym)
        _emit(report.model_dump_json(indent=2), args.out)
        _summary(f"symbol check: {len(report.failures)} of {len(report.checks)} terms fail")
        return 0 if report.passed else 2
    if action == "parity":
        parity = parity_vanishing_check(sym)
        _emit(parity.model_dump_json(indent=2), args.out)
        _summary(f"symbol parity: {len(parity.survivors)} terms survive xi = 0")
        return 0
    if action == "expect":
        coeffs = expectation_expansion(
            sym, _manifold(args.manifold), args.k_max, bindings=_bindings(args.bind)
        )
        rows = [{"k": k, "re": c.real, "im": c.imag} for k, c in enumerate(coeffs)]
        _emit(json.dumps(rows, indent=2), args.out)
        return 0
    if args.cutoff is None:
        raise ValidationError(f"symbol {action} needs --cutoff")
    if action == "product":
        if args.other is None:
            raise ValidationError("symbol product needs --other")
        result = symbol_product(sym, _load_symbol(args.other, args, full=False), args.cutoff)
    elif action == "parametrix":
        result = parametrix(sym, args.cutoff)
    else:
        result = reduce_two_variable(sym, args.cutoff, S=args.S)
    _emit(result.to_json(), args.out)
    _summary(f"symbol {action}: order {result.order}, {len(result.components)} levels")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="Output file (default: standard output)")
    p.add_argument(
        "--manifest", default=None,
        help="Run manifest JSON (default: <out>.manifest.json, or standard error)",
    )
    p.add_argument("--threads", type=int, default=1, help="Worker threads")
    p.add_argument("--log-level", default="WARNING", help="Logging level on standard error")


def _add_sampler(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-3, help="Absolute convergence tolerance")
    p.add_argument("--N-max", dest="N_max", type=int, default=4096, help="Largest sample size")
    p.add_argument("--strategy", choices=["grid", "farthest_point"], default="grid")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magwill", description="Magnitude of metric spaces and its asymptotic expansion"
    )
    parser.add_argument("--version", action="version", version=f"magwill {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("magnitude", help="Magnitude function of a finite space or domain")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--points", help="Point cloud CSV (header x[,y[,z]])")
    src.add_argument("--distances", help="Distance matrix CSV")
    src.add_argument("--domain", help="Domain JSON or bare kind, e.g. ball")
    p.add_argument("--R", type=float, default=None, help="Single scale")
    p.add_argument("--R-grid", dest="R_grid", default=None, help="start:stop:count or a,b,c")
    _add_sampler(p)
    _add_common(p)
    p.set_defaults(handler=cmd_magnitude)

    p = sub.add_parser("geometry", help="Boundary functionals and intrinsic volumes")
    p.add_argument("--domain", help="Domain JSON or bare kind")
    p.add_argument("--mesh", help="Triangle mesh in OFF format (mesh estimator)")
    p.add_argument("--mode", choices=["quadrature", "mesh"], default="quadrature")
    p.add_argument("--refinement", type=int, default=3)
    p.add_argument("--quad-order", dest="quad_order", type=int, default=128)
    p.add_argument("--intrinsic-volumes", dest="intrinsic_volumes", action="store_true")
    p.add_argument("--mc-samples", dest="mc_samples", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(handler=cmd_geometry)

    p = sub.add_parser("calibrate", help="Calibrate lambda_3 on the unit ball")
    p.add_argument("--R-grid", dest="R_grid", default=DEFAULT_CALIBRATION_GRID)
    p.add_argument("--n-boot", dest="n_boot", type=int, default=1000)
    p.add_argument(
        "--use-extrapolated", dest="use_extrapolated", default=True,
        action=argparse.BooleanOptionalAction, help="Use zero-spacing extrapolated estimates",
    )
    _add_sampler(p)
    _add_common(p)
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("falsify", help="c3 / V0 over the ellipsoid family")
    p.add_argument("--a-grid", dest="a_grid", default=DEFAULT_A_GRID)
    p.add_argument("--R-grid", dest="R_grid", default=None, help="Scales for sampled c3 fits")
    p.add_argument("--budget", type=int, default=0, help="N_max for sampled fits (0 skips them)")
    p.add_argument("--calibration", default=None, help="Calibration JSON")
    p.add_argument("--calibrate", action="store_true", help="Calibrate when no file is present")
    p.add_argument(
        "--calibration-R-grid", dest="calibration_R_grid", default=DEFAULT_CALIBRATION_GRID
    )
    p.add_argument("--n-boot", dest="n_boot", type=int, default=1000)
    p.add_argument(
        "--use-extrapolated", dest="use_extrapolated", default=True,
        action=argparse.BooleanOptionalAction, help="Use zero-spacing extrapolated estimates",
    )
    p.add_argument("--quad-order", dest="quad_order", type=int, default=128)
    p.add_argument("--mc-samples", dest="mc_samples", type=int, default=None)
    _add_sampler(p)
    _add_common(p)
    p.set_defaults(handler=cmd_falsify)

    p = sub.add_parser("symbol", help="Symbol calculus on JSON term lists")
    p.add_argument(
        "action", choices=["check", "product", "parametrix", "expect", "reduce", "parity"]
    )
    p.add_argument("--input", help="Symbol JSON")
    p.add_argument("--other", help="Right factor for product")
    p.add_argument("--full-symbol", dest="full_symbol", default=None,
                   help="Full symbol expression, expanded into homogeneous levels")
    p.add_argument("--order", type=int, default=0)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--cutoff", type=int, default=None, help="Lowest retained degree")
    p.add_argument("--manifold", default="circle", help='e.g. {"kind":"torus2","r1":1,"r2":2}')
    p.add_argument("--k-max", dest="k_max", type=int, default=3)
    p.add_argument("--bind", action="append", default=[], help="name=expression in x1..xd")
    p.add_argument("--S", default=None, help="Explicit graph function in z1..zd")
    _add_common(p)
    p.set_defaults(handler=cmd_symbol)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    handler: Callable[[argparse.Namespace], int] = args.handler
    started = utc_now()
    try:
        status = handler(args)
    except MagwillError as e:
        _summary(f"error: {e}")
        return e.exit_code
    except pydantic.ValidationError as e:
        _summary(f"error: invalid input: {e}")
        return 2
    except (json.JSONDecodeError, OSError) as e:
        _summary(f"error: {e}")
        return 2
    _finish(args, started)
    return status


if __name__ == "__main__":
    sys.exit(main())
