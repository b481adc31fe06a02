"""
Command-line entry point.

Usage:
    python -m src.cli analyze problems/nsfp_ex51.json [--json]
    python -m src.cli normal-cone problems/nsfp_ex51.json --set C --at 1,1
    python -m src.cli solve problems/nsfp_ex51.json --start 2,1
    python -m src.cli probe problems/nsfp_ex51.json --samples 1000 --seed 7 --ci

Exit codes: analyze 0 = LipschitzLike, 3 = NotLipschitzLike, 4 = Inconclusive;
probe --ci 1 = INCONSISTENT; 2 = any error.
"""

import argparse
import logging
import sys
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from src.aubin_probe import ProbeLabel, consistency_label, estimate_modulus
from src.certifier import certify
from src.cone_algebra import ConeRecord
from src.config import probe_config
from src.errors import SplitStabilityError
from src.feasibility import solve_alternating
from src.problem_file import load_problem
from src.reports import (
    EXIT_CODES,
    EXIT_ERROR,
    EXIT_PROBE_INCONSISTENT,
    AnalyzeReport,
    NormalConeReport,
    ProbeReport,
    SolveCommandReport,
    render_analyze,
    render_normal_cone,
    render_probe,
    render_solve,
)

logger = logging.getLogger(__name__)


def _floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m src.cli",
        description="Lipschitz-like stability certificates for split equality / feasibility problems",
    )
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="Certify the solution map at the reference point")
    analyze.add_argument("file")
    analyze.add_argument("--json", action="store_true", help="Print the JSON report")

    cone = sub.add_parser("normal-cone", help="Limiting normal cone of C or Q at a point")
    cone.add_argument("file")
    cone.add_argument("--set", dest="set_name", choices=["C", "Q"], required=True)
    cone.add_argument(
        "--at", type=_floats, required=True, help="Comma-separated point (write --at=-1,0 for negatives)"
    )
    cone.add_argument("--json", action="store_true")

    solve = sub.add_parser("solve", help="Alternating projections from a start point")
    solve.add_argument("file")
    solve.add_argument("--start", type=_floats, help="Start point (defaults to the reference point)")
    solve.add_argument("--tol", type=float, default=1e-8)
    solve.add_argument("--max-iter", type=int, default=100_000)
    solve.add_argument("--json", action="store_true")

    probe = sub.add_parser("probe", help="Empirical Lipschitz-modulus probe")
    probe.add_argument("file")
    probe.add_argument("--radii", type=_floats, help="Strictly decreasing radii, e.g. 0.1,0.01,0.001")
    probe.add_argument("--samples", type=int, help="Solution samples per pool member and radius")
    probe.add_argument("--seed", type=int, help="PCG64 seed (SPLITSTAB_SEED overrides the default)")
    probe.add_argument("--workers", type=int, default=1, help="Threads for per-radius batches")
    probe.add_argument("--ci", action="store_true", help="Exit 1 when the probe contradicts the verdict")
    probe.add_argument("--json", action="store_true")
    return parser


def _analyze(args) -> int:
    instance = load_problem(args.file)
    report = AnalyzeReport(problem=args.file, result=certify(instance))
    print(report.model_dump_json(indent=2) if args.json else render_analyze(report))
    return EXIT_CODES[report.result.verdict]


def _normal_cone(args) -> int:
    instance = load_problem(args.file)
    target = instance.C if args.set_name == "C" else instance.Q
    point = np.array(args.at, dtype=float)
    cone = ConeRecord.from_cone(target.normal_cone(point))
    report = NormalConeReport(problem=args.file, set_name=args.set_name, point=point.tolist(), cone=cone)
    print(report.model_dump_json(indent=2) if args.json else render_normal_cone(report))
    return 0


def _solve(args) -> int:
    instance = load_problem(args.file)
    result = solve_alternating(instance, start=args.start, max_iter=args.max_iter, tol=args.tol)
    report = SolveCommandReport(problem=args.file, result=result)
    print(report.model_dump_json(indent=2) if args.json else render_solve(report))
    return 0


def _probe(args) -> int:
    instance = load_problem(args.file)
    verdict = certify(instance).verdict
    config = probe_config.model_copy(update={"workers": args.workers})
    estimate = estimate_modulus(
        instance, radii=args.radii, samples_per_radius=args.samples, seed=args.seed, config=config
    )
    label = consistency_label(verdict, estimate)
    report = ProbeReport(problem=args.file, verdict=verdict, label=label, result=estimate)
    if args.json:
        print(report.model_dump_json(indent=2))
    else:
        print(render_probe(report, estimate.to_frame().to_string()))
    if args.ci and label == ProbeLabel.INCONSISTENT:
        return EXIT_PROBE_INCONSISTENT
    return 0


COMMANDS = {
    "analyze": _analyze,
    "normal-cone": _normal_cone,
    "solve": _solve,
    "probe": _probe,
}


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv, dispatch, and return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code not in (0, None) else 0

    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        return COMMANDS[args.command](args)
    except (SplitStabilityError, ValidationError) as e:
        print(f"[!] {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


def main():
    """CLI entry point."""
    logging.basicConfig(
        level=logging.WARNING,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )
    sys.exit(run())


if __name__ == "__main__":
    main()
