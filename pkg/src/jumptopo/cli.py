"""Command-line front end.

Subcommands: ``sweep``, ``convergence``, ``kcc``, ``winding``,
``trajectories`` and ``check``. Exit codes: 0 success, 2 usage error,
3 numerical-invariant failure, 4 singular or degenerate input. Failures are
reported on stderr as one JSON object carrying the error class.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import SweepConfig, load_config_file
from .errors import (
    ConfigError,
    EmptyEnsembleError,
    JumptopoError,
    NumericalInvariantError,
    SingularityError,
    TailMassWarning,
)
from .output import fmt, phase_csv, svg_plot, trajectories_jsonl

log = logging.getLogger("jumptopo")

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_SINGULAR = 0, 2, 3, 4

AXES = {"dp": "delta_p", "dq": "delta_q", "tfinal": "t_final", "nfinal": "n_final", "ncir": "n_cir"}
# base settings shared by every convergence axis
CONVERGENCE_BASE = dict(n_final=200, n_cir=50, t_final=50.0, delta_p=0.01, delta_q=0.02)

# flag destination -> SweepConfig field
_FLAG_FIELDS = {
    "v": "v",
    "gamma": "gamma",
    "ncir": "n_cir",
    "dp": "delta_p",
    "dq": "delta_q",
    "tfinal": "t_final",
    "nfinal": "n_final",
    "ancilla": "ancilla_dim",
    "seed": "seed",
    "method": "method",
    "corrected_sum": "corrected_sum",
    "rule": "rule",
}


class UsageError(JumptopoError):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc


def _sweep_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("model and discretization")
    g.add_argument("--v", type=float, help="intracell hopping (default 1)")
    g.add_argument("--gamma", type=float, help="decay rate (default 1)")
    g.add_argument("--w-min", type=float, help="first w of an evenly spaced grid")
    g.add_argument("--w-max", type=float, help="last w of an evenly spaced grid")
    g.add_argument("--w-steps", type=int, help="number of grid points")
    g.add_argument("--w-list", type=_float_list, help="explicit comma separated w values")
    g.add_argument("--ncir", type=int, help="momentum loop points N_cir")
    g.add_argument("--dp", type=float, help="finite difference step in p")
    g.add_argument("--dq", type=float, help="momentum mismatch p' - p")
    g.add_argument("--tfinal", type=float, help="measurement window t_final")
    g.add_argument("--nfinal", type=int, help="number of measurement times N_final")
    g.add_argument("--ancilla", type=int, choices=(2, 3), help="ancilla dimension")
    g.add_argument("--seed", type=int, help="recorded seed (the sweep itself is deterministic)")
    g.add_argument("--method", choices=("emulated", "analytic"), help="propagator source")
    g.add_argument("--rule", choices=("left-riemann", "trapezoid"), help="time-sum rule")
    g.add_argument("--corrected-sum", action="store_true", default=None, help="drop the duplicated k=N_cir term")
    g.add_argument("--config", type=Path, help="key = value file with SweepConfig field names")
    g.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes")
    g.add_argument("--plot", type=Path, help="write an SVG plot of Re T against w")


def _resolve_grid(args) -> tuple[float, ...] | None:
    if args.w_list is not None:
        if any(x is not None for x in (args.w_min, args.w_max, args.w_steps)):
            raise UsageError("--w-list excludes --w-min/--w-max/--w-steps")
        return tuple(args.w_list)
    ranged = (args.w_min, args.w_max, args.w_steps)
    if all(x is None for x in ranged):
        return None
    if any(x is None for x in ranged):
        raise UsageError("--w-min, --w-max and --w-steps must be given together")
    if args.w_steps < 1:
        return ()
    return tuple(float(x) for x in np.round(np.linspace(args.w_min, args.w_max, args.w_steps), 12))


def build_config(args, base: dict | None = None) -> SweepConfig:
    """Defaults, then ``base``, then the config file, then explicit flags."""
    values = dict(base or {})
    if args.config is not None:
        values.update(load_config_file(args.config))
    for flag, name in _FLAG_FIELDS.items():
        val = getattr(args, flag, None)
        if val is not None:
            values[name] = val
    grid = _resolve_grid(args)
    if grid is not None:
        values["w_grid"] = grid
    if "w_grid" in values and not values["w_grid"]:
        raise UsageError("w grid is empty")
    return SweepConfig(**values)


def _write(path: Path | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")


def _run_sweep(cfg: SweepConfig, workers: int):
    from .emulator import phase_sweep

    result = phase_sweep(cfg.w_grid, cfg, workers=workers)
    for w, why in result.skipped:
        log.info("skipped w=%s: %s", fmt(w), why)
    if result.tail_warnings:
        log.warning("%d order-parameter evaluation(s) left ancilla weight beyond t_final", result.tail_warnings)
    if not result.rows:
        raise SingularityError("every grid point was singular or degenerate")
    return result


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    result = _run_sweep(cfg, args.workers)
    _write(args.out, phase_csv(result))
    if args.plot is not None:
        _write(args.plot, svg_plot([(cfg.method, result.w, result.t_re)]))
    log.info("sweep of %d point(s) took %.1f s", len(result.rows), result.duration_s)
    return EXIT_OK


def cmd_convergence(args) -> int:
    if not args.values:
        raise UsageError("--values must list at least one value")
    field = AXES[args.axis]
    base = build_config(args, CONVERGENCE_BASE)
    outdir = args.out or Path(".")
    series = []
    for val in args.values:
        cast = int(val) if field in ("n_cir", "n_final") else float(val)
        cfg = base.replace(**{field: cast})
        result = _run_sweep(cfg, args.workers)
        _write(outdir / f"convergence_{args.axis}_{fmt(cast)}.csv", phase_csv(result))
        series.append((f"{args.axis}={fmt(cast)}", result.w, result.t_re))
    if args.plot is not None:
        _write(args.plot, svg_plot(series))
    return EXIT_OK


def cmd_kcc(args) -> int:
    from .emulator import build_extended, kcc_emulated
    from .sshtopo import BlochParams, MomentumPair, kcc_closed_form

    params = BlochParams(args.v, args.w, args.gamma)
    pair = MomentumPair(args.p, args.p_prime)
    if args.method == "analytic":
        k = kcc_closed_form(params, pair.p, pair.p_prime)
    else:
        k = kcc_emulated(build_extended(params, pair, args.ancilla), args.tfinal, args.nfinal)
    out = {"v": args.v, "w": args.w, "gamma": args.gamma, "p": args.p, "p_prime": args.p_prime}
    out.update(method=args.method, K_re=float(fmt(k.real)), K_im=float(fmt(k.imag)))
    if args.method == "emulated":
        out.update(t_final=args.tfinal, n_final=args.nfinal, ancilla_dim=args.ancilla)
    sys.stdout.write(json.dumps(out, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_winding(args) -> int:
    from .sshtopo import BlochParams, winding_integral, winding_number

    params = BlochParams(args.v, args.w, args.gamma)
    out = {
        "v": args.v,
        "w": args.w,
        "n_grid": args.n_grid,
        "winding": winding_number(params, args.n_grid),
        "integral": float(fmt(winding_integral(params, args.n_grid))),
    }
    sys.stdout.write(json.dumps(out, sort_keys=True) + "\n")
    return EXIT_OK


def _trajectory_model(args):
    from .lindblad import LindbladModel
    from .sshtopo import SIGMA_MINUS, BlochParams, MomentumPair

    if args.model == "amplitude-damping":
        model = LindbladModel(np.zeros((2, 2)), ((args.gamma, SIGMA_MINUS),))
        return model, np.array([0.0, 1.0], dtype=np.complex128)
    from .emulator import build_extended

    ext = build_extended(BlochParams(args.v, args.w, args.gamma), MomentumPair(args.p, args.p_prime), args.ancilla)
    return ext.model, ext.initial_state


def cmd_trajectories(args) -> int:
    from .jumptime import mc_unravel

    if args.ntraj < 1:
        raise UsageError("--ntraj must be >= 1")
    model, psi0 = _trajectory_model(args)
    records = mc_unravel(model, psi0, args.tfinal, dt=args.dt, n_traj=args.ntraj, seed=args.seed, max_capture=0)
    meta = {"model": args.model, "seed": args.seed, "gamma": args.gamma, "dt": args.dt}
    if args.model == "ssh-extended":
        meta.update(v=args.v, w=args.w, p=args.p, p_prime=args.p_prime, ancilla_dim=args.ancilla)
    _write(args.out, trajectories_jsonl(records, args.tfinal, meta))
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import run_checks

    results = run_checks(args.substeps)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        sys.stdout.write(f"{status}  {r.name}: {r.detail} [{r.seconds:.2f} s]\n")
    failed = sum(not r.passed for r in results)
    sys.stdout.write(f"{len(results) - failed}/{len(results)} checks passed\n")
    return EXIT_OK if failed == 0 else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jumptopo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="order parameter against w")
    _sweep_flags(p)
    p.add_argument("--out", type=Path, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("convergence", help="family of sweeps along one discretization axis")
    p.add_argument("--axis", required=True, choices=sorted(AXES))
    p.add_argument("--values", required=True, type=_float_list, help="comma separated axis values")
    _sweep_flags(p)
    p.add_argument("--out", type=Path, help="output directory for one CSV per value (default .)")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("kcc", help="jump-time propagator for one momentum pair")
    _point_flags(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--p-prime", type=float, required=True)
    p.add_argument("--method", choices=("emulated", "analytic"), default="emulated")
    p.add_argument("--tfinal", type=float, default=300.0)
    p.add_argument("--nfinal", type=int, default=300)
    p.add_argument("--ancilla", type=int, choices=(2, 3), default=3)
    p.set_defaults(func=cmd_kcc)

    p = sub.add_parser("winding", help="winding number of the Bloch loop")
    _point_flags(p)
    p.add_argument("--n-grid", type=int, default=1000)
    p.set_defaults(func=cmd_winding)

    p = sub.add_parser("trajectories", help="Monte-Carlo jump records as JSON lines")
    p.add_argument("--model", choices=("amplitude-damping", "ssh-extended"), default="amplitude-damping")
    _point_flags(p, w_required=False)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--p-prime", type=float, default=float(np.pi / 2))
    p.add_argument("--ancilla", type=int, choices=(2, 3), default=3)
    p.add_argument("--ntraj", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tfinal", type=float, default=3.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--out", type=Path, help="JSONL path (default stdout)")
    p.set_defaults(func=cmd_trajectories)

    p = sub.add_parser("check", help="fast cross-oracle invariant suite")
    p.add_argument("--substeps", type=int, default=100, help="RK4 steps per unit time")
    p.set_defaults(func=cmd_check)
    return parser


def _point_flags(p: argparse.ArgumentParser, w_required: bool = True):
    p.add_argument("--v", type=float, default=1.0)
    p.add_argument("--w", type=float, required=w_required, default=0.5)
    p.add_argument("--gamma", type=float, default=1.0)


def _fail(exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    with warnings.catch_warnings():
        warnings.simplefilter("default", TailMassWarning)
        try:
            return args.func(args)
        except (UsageError, ConfigError) as exc:
            return _fail(exc, EXIT_USAGE)
        except SingularityError as exc:
            return _fail(exc, EXIT_SINGULAR)
        except (NumericalInvariantError, EmptyEnsembleError) as exc:
            return _fail(exc, EXIT_INVARIANT)
        except ValueError as exc:
            return _fail(exc, EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
