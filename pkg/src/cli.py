"""
Command-line entry point.

    python app.py design --K 2 --M 4
    python app.py sweep --config config/fig3.json --seed 7 --out fig3.csv
    python app.py validate --config my_defaults.yaml
    python app.py pdf --K 4 --samples 1000000 --out pdf.csv
    python app.py offset --K 10 --N 5

Machine-readable output goes to stdout (or --out); progress goes to stderr.
"""

from dotenv import load_dotenv
load_dotenv()

import argparse
import io
import sys
from contextlib import nullcontext
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from src import __version__
from src.agents.supervisor import run_sweep, summarize
from src.agents.validator_agent import run_validation
from src.chains.codebook import design_codebook
from src.tools.channel import cascaded_gain, sample_nlos
from src.tools.phase_density import amplitude_weighted_phase_density, gaussian_phase_pdf, rician_phase_pdf
from src.tools.placement import phase_offset_experiment
from src.tools.results_io import codebook_to_json, format_csv
from src.tools.rng import SeededStream
from src.utils.config import config, config_from, default_geometry, design_config, load_experiment_spec
from src.utils.errors import ConfigError, IRSSimError
from src.utils.progress import report


class UsageError(Exception):
    """argparse asked to exit"""

    def __init__(self, code: int):
        super().__init__(code)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def exit(self, status=0, message=None):
        if message:
            self._print_message(message, sys.stderr)
        raise UsageError(status)


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(out)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e
    report(f"[OK] Wrote {path}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed of the random streams")
    common.add_argument("--trials", type=int, default=None, help="Monte Carlo trials")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument(
        "--config", default=None,
        help="sweep: JSON experiment spec; other commands: YAML defaults replacing config/config.yaml",
    )

    parser = _Parser(prog="irs-sim", description="Movable-element IRS simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", parents=[common], help="design a DPS codebook (JSON)")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--weighting", choices=["amplitude", "unweighted"])
    p.add_argument("--objective", choices=["absolute_error", "resultant"])
    p.add_argument("--phase-model", choices=["gaussian", "rician"])
    p.add_argument("--quadrature-points", type=int)
    p.add_argument("--restarts", type=int, help="extra Lloyd runs from rotated grids")

    p = sub.add_parser("sweep", parents=[common], help="run an experiment spec (CSV)")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("validate", parents=[common], help="run the invariant suite")

    p = sub.add_parser("pdf", parents=[common], help="phase densities for plotting (CSV)")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--points", type=int, default=256, help="phase grid size / histogram bins")
    p.add_argument("--samples", type=int, default=0, help="Monte Carlo samples for a histogram column")

    p = sub.add_parser("offset", parents=[common], help="measure the per-element phase offset")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--spacing", type=float, default=0.5, help="element spacing in wavelengths")
    p.add_argument("--cos-sum", type=float, default=0.2)
    p.add_argument("--samples", type=int, default=100_000)
    return parser


# ========== SUBCOMMANDS ==========

def cmd_design(args) -> int:
    settings = {"weighting": args.weighting, "objective": args.objective, "phase_model": args.phase_model}
    if args.quadrature_points:
        settings["quadrature_points"] = args.quadrature_points
    if args.restarts:
        settings["restarts"] = args.restarts
    cb = design_codebook(design_config(args.K, args.M, **settings))
    report(f"[OK] K={args.K:g} M={args.M}: {np.array2string(cb.shifts, precision=4)} "
           f"({cb.iterations} iterations, converged={cb.converged})")
    _write(codebook_to_json(cb), args.out)
    return 0


def cmd_sweep(args) -> int:
    if not args.config:
        raise ConfigError("sweep needs --config <experiment spec>")
    spec = load_experiment_spec(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.workers is not None:
        updates["workers"] = args.workers
    if updates:
        try:
            spec = type(spec).model_validate({**spec.model_dump(), **updates})
        except ValidationError as e:
            raise ConfigError(f"{args.config}: {e.errors()[0]['loc']} {e.errors()[0]['msg']}") from e
    result = run_sweep(spec)
    report("\n" + summarize(result, spec.schemes))
    _write(format_csv(result.rows), args.out)
    return 0


def cmd_validate(args) -> int:
    results = run_validation(trials=args.trials, seed=args.seed)
    if args.out:
        lines = [f"{r['name']},{'pass' if r['passed'] else 'fail'},{r['elapsed_s']:.3f},\"{r['detail']}\"" for r in results]
        _write("check,status,elapsed_s,detail\n" + "\n".join(lines) + "\n", args.out)
    return 0 if all(r["passed"] for r in results) else 1


def cmd_pdf(args) -> int:
    if args.points < 2:
        raise ValueError(f"--points must be >= 2, got {args.points}")
    edges = np.linspace(-np.pi, np.pi, args.points + 1)
    phi = 0.5 * (edges[:-1] + edges[1:])
    columns = {
        "phi_rad": phi,
        "rician_pdf": rician_phase_pdf(args.K, phi),
        "amplitude_weighted": amplitude_weighted_phase_density(args.K, phi),
        "gaussian_approx": gaussian_phase_pdf(args.K, phi),
    }
    if args.samples > 0:
        seed = int(config["monte_carlo"]["seed"]) if args.seed is None else args.seed
        geometry = default_geometry().to_link_geometry()
        h = cascaded_gain(args.K, sample_nlos(SeededStream(seed).generator, args.samples), 0.0, geometry)
        columns["histogram"], _ = np.histogram(np.angle(h), bins=edges, density=True)

    buffer = io.StringIO()
    buffer.write(",".join(columns) + "\n")
    for i in range(phi.size):
        buffer.write(",".join("%.9g" % columns[c][i] for c in columns) + "\n")
    _write(buffer.getvalue(), args.out)
    return 0


def cmd_offset(args) -> int:
    seed = int(config["validation"]["seed"]) if args.seed is None else args.seed
    rep = phase_offset_experiment(
        K=args.K, N=args.N, spacing_wavelengths=args.spacing, cos_sum=args.cos_sum,
        samples=args.samples, seed=seed, ks_samples=min(args.samples, 100_000),
    )
    lines = ["element,position_m,circular_mean_rad,step_rad,predicted_step_rad"]
    for i in range(args.N):
        step = "" if i == 0 else "%.9g" % rep.steps[i - 1]
        predicted = "" if i == 0 else "%.9g" % rep.predicted_steps[i - 1]
        lines.append(f"{i + 1},{rep.positions[i]:.9g},{rep.circular_means[i]:.9g},{step},{predicted}")
    report(f"[OK] max step error {rep.max_step_error:.4f} rad, max pairwise KS {rep.max_pairwise_ks:.4f}")
    _write("\n".join(lines) + "\n", args.out)
    return 0


COMMANDS = {
    "design": cmd_design,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "pdf": cmd_pdf,
    "offset": cmd_offset,
}


def cli_main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on a runtime failure (or failed validation),
        2 on a usage or config error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        return e.code

    try:
        defaults = config_from(args.config) if args.config and args.command != "sweep" else nullcontext()
        with defaults:
            return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return 2
    except (IRSSimError, OSError) as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        # pydantic ValidationError included
        print(f"[ERROR] invalid argument: {str(e).splitlines()[0]}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(cli_main())
