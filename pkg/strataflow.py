#!/usr/bin/env python3
"""
strataflow

Batch front-end for the mean curvature flow stratification lab: simulate a
scenario into a track file, then stratify it or study its regularity, and
aggregate the JSON summaries of a run.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from config_manager import SCENARIOS, config_manager
from errors import ConfigError, StrataflowError
from pipelines import pipeline_manager

__version__ = "0.1.0"

EXIT_OK = 0
EXIT_PIPELINE_ERROR = 1
EXIT_USAGE = 2

# per-fit and per-slice debug chatter, let through only with --verbose-debug
CHATTY_LOGGERS = ("model_catalog", "brakke_distance", "selfsimilar_fit", "varifold", "parallel")


class RunLogger:
    """Debug logger for pipeline runs: 'message | key=value, ...' lines in a log file"""

    def __init__(self, enabled: bool = False, verbose: bool = False, debug_file_path: Optional[str] = None):
        self.enabled = enabled
        self.verbose = verbose
        self.logger = None
        if enabled:
            if debug_file_path is None:
                debug_file_path = "strataflow-debug.log"
            Path(debug_file_path).parent.mkdir(parents=True, exist_ok=True)
            logging.basicConfig(
                level=logging.DEBUG,
                format="%(asctime)s [STRATAFLOW] %(name)s: %(message)s",
                handlers=[logging.FileHandler(debug_file_path)],
            )
            if not verbose:
                for name in CHATTY_LOGGERS:
                    logging.getLogger(name).setLevel(logging.INFO)
            self.logger = logging.getLogger("strataflow-run")
            mode_text = "VERBOSE" if verbose else "STANDARD"
            self.logger.info(f"=== Debug Mode ({mode_text}) Enabled - Logging to: {debug_file_path} ===")

    def _format_value(self, value: Any) -> str:
        """Long sequences are shortened to their head and length"""
        if isinstance(value, (list, tuple)) and len(value) > 8:
            head = ", ".join(str(v) for v in value[:3])
            return f"[{head}, ... ({len(value)} items)]"
        if isinstance(value, float):
            return f"{value:.6g}"
        return str(value)

    def _emit(self, level: int, message: str, **kwargs) -> None:
        if self.enabled and self.logger:
            context = ", ".join(f"{k}={self._format_value(v)}" for k, v in kwargs.items())
            self.logger.log(level, f"{message}" + (f" | {context}" if context else ""))

    def debug(self, message: str, **kwargs):
        self._emit(logging.DEBUG, message, **kwargs)

    def info(self, message: str, **kwargs):
        self._emit(logging.INFO, message, **kwargs)

    def error(self, message: str, **kwargs):
        self._emit(logging.ERROR, message, **kwargs)


# Global run logger (disabled by default, enabled in main() with --debug)
run_logger = RunLogger(enabled=False)


def _common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML or JSON run file")
    parser.add_argument("--out", type=str, help="Output directory (default from config)")
    parser.add_argument("--j", type=int, nargs="+", help="Strata indices j")
    parser.add_argument("--eta", type=float, nargs="+", help="Fit thresholds eta")
    parser.add_argument("--gamma", type=float, help="Scale ladder ratio gamma in (0, 1/2)")
    parser.add_argument("--delta", type=float, help="Energy threshold delta for signatures")
    parser.add_argument("--q", type=int, help="Signature window half-width q")
    parser.add_argument("--p", type=float, nargs="+", help="Exponents for L^p statistics")
    parser.add_argument("--grid", type=int, help="Tubular volume cells per radius")
    parser.add_argument("--seed", type=int, help="Seed for sample point selection")
    parser.add_argument("--points", type=int, help="Number of sample points")
    parser.add_argument("--debug", action="store_true", help="Write a run log")
    parser.add_argument(
        "--verbose-debug", action="store_true", help="Run log including per-fit and per-slice detail"
    )
    parser.add_argument("--debug-location", type=str, help="Run log path (default: <out>/strataflow-debug.log)")


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        prog="strataflow", description="Quantitative stratification of mean curvature flows"
    )
    parser.add_argument("--version", action="version", version=f"strataflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Simulate or sample a scenario into a track file")
    simulate.add_argument("--scenario", choices=SCENARIOS, help="Scenario name")
    simulate.add_argument("--radius", type=float, nargs="+", help="Radius (or ellipse semi-axes, dumbbell bell radius)")
    simulate.add_argument("--neck-radius", type=float, help="Dumbbell neck radius")
    simulate.add_argument("--resolution", type=int, help="Vertices of the initial curve or profile")
    simulate.add_argument("--t-end", type=float, help="Stop time")
    _common_arguments(simulate)

    for name, text in (("stratify", "Quantitative strata of a track"), ("regularity", "Regularity scale of a track")):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("track", type=Path, help="Track file written by simulate")
        _common_arguments(cmd)

    summarize = sub.add_parser("summarize", help="Aggregate JSON summaries of one run")
    summarize.add_argument("summaries", type=Path, nargs="+", help="JSON summary files")
    _common_arguments(summarize)
    return parser.parse_args(argv)


def build_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """CLI flags as a nested config override"""
    overrides: Dict[str, Any] = {}
    scenario: Dict[str, Any] = {}
    if getattr(args, "scenario", None):
        scenario["type"] = args.scenario
    if getattr(args, "radius", None):
        scenario["radii"] = list(args.radius)
        if getattr(args, "scenario", None) == "dumbbell":
            scenario["bell_radius"] = args.radius[0]
    if getattr(args, "neck_radius", None) is not None:
        scenario["neck_radius"] = args.neck_radius
    if getattr(args, "resolution", None) is not None:
        scenario["resolution"] = args.resolution
    if getattr(args, "t_end", None) is not None:
        scenario["stop"] = {"t_end": args.t_end}
    if scenario:
        overrides["scenario"] = scenario

    strat = {
        key: value
        for key, value in (
            ("j", args.j), ("eta", args.eta), ("gamma", args.gamma), ("delta", args.delta), ("q", args.q)
        )
        if value is not None
    }
    if strat:
        overrides["stratification"] = strat
    if args.p is not None:
        overrides["regularity"] = {"p": list(args.p)}
    for key in ("grid", "seed", "points", "out"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    return overrides


def run(args: argparse.Namespace) -> int:
    config = config_manager.resolve(args.config, build_overrides(args))
    out_dir = Path(config.out)
    run_logger.info("Config resolved", command=args.command, scenario=config.scenario_type, hash=config.hash)

    if args.command == "simulate":
        config_manager.save_run_config(config, out_dir)
        path = pipeline_manager.simulate(config, out_dir)
        print(f"track: {path}")
    elif args.command == "stratify":
        summary = pipeline_manager.stratify(args.track, config, out_dir)
        print(f"strata: {out_dir / 'strata-summary.json'} ({summary['strata']['points']} points)")
    elif args.command == "regularity":
        summary = pipeline_manager.regularity(args.track, config, out_dir)
        print(f"regularity: {out_dir / 'regularity-summary.json'} ({summary['points']} points)")
    else:
        path = pipeline_manager.summarize(args.summaries, out_dir)
        print(f"summary: {path}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = parse_arguments(argv)

    global run_logger
    debug_enabled = args.debug or args.verbose_debug
    location = args.debug_location or str(Path(args.out or ".") / "strataflow-debug.log")
    run_logger = RunLogger(enabled=debug_enabled, verbose=args.verbose_debug, debug_file_path=location)
    pipeline_manager.set_run_logger(run_logger)
    run_logger.debug("Starting strataflow", command=args.command, verbose_debug=args.verbose_debug)

    try:
        return run(args)
    except ConfigError as e:
        run_logger.error("Configuration error", error=str(e))
        print(f"strataflow: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except StrataflowError as e:
        run_logger.error("Pipeline failed", error=str(e), kind=type(e).__name__)
        print(f"strataflow: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_PIPELINE_ERROR


if __name__ == "__main__":
    sys.exit(main())
