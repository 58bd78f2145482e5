"""Command-line front end."""

import argparse
import json
import logging
import sys
from typing import Callable, Optional

from src import __version__
from src.config import Settings, build_settings
from src.knowledge.scenarios import benchmark_scenarios, landmark_scenario
from src.models.errors import (
    ConfigError,
    LocalizationError,
    MapFormatError,
    UnknownParameterError,
    UnreachableGoalError,
)
from src.models.run import Variant
from src.models.world import OccupancyGrid, Pose
from src.services.harness import (
    SWEEPABLE,
    generate_log,
    measure_cost,
    replica_rng,
    run_experiment,
    sweep_parameter,
)
from src.services.metrics import summarize_runs
from src.services.storage import storage
from src.services.world import build_landmark_room, build_symmetric_map

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_BAD_INPUT = 3
EXIT_UNKNOWN_NAME = 4
EXIT_DIVERGED = 5


class UnknownVariantError(LocalizationError, ValueError):
    """A variant name outside mcl/gmcl/ceamcl."""


def parse_variant(name: str) -> Variant:
    try:
        return Variant(name.lower())
    except ValueError:
        choices = ", ".join(v.value for v in Variant)
        raise UnknownVariantError(f"unknown variant '{name}' (choose from {choices})") from None


def parse_pose(text: str) -> Pose:
    """'x,y' or 'x,y,theta'."""
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad pose '{text}'") from None
    if len(values) not in (2, 3):
        raise argparse.ArgumentTypeError(f"pose needs 2 or 3 numbers, got '{text}'")
    return Pose(x=values[0], y=values[1], theta=values[2] if len(values) == 3 else 0.0)


def parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad value list '{text}'") from None


def _seeds(settings: Settings, n_seeds: Optional[int]) -> list[int]:
    count = settings.n_seeds if n_seeds is None else n_seeds
    return list(range(settings.seed, settings.seed + count))


def _scenario_logs(grid: OccupancyGrid, settings: Settings, landmark: bool) -> list:
    """One generated log per catalogue scenario."""
    scenarios = (
        [landmark_scenario(settings.map_side)]
        if landmark
        else benchmark_scenarios(settings.map_side, settings.rooms_per_side)
    )
    return [
        _make_log(grid, settings, sc.start, sc.goal, replica_rng(settings.seed, 1000 + index))
        for index, sc in enumerate(scenarios)
    ]


def _make_log(grid, settings: Settings, start: Pose, goal: Pose, rng):
    return generate_log(
        grid,
        start,
        goal,
        settings.noise_params(),
        settings.step_len,
        rng,
        n_beams=settings.n_beams,
        max_range=settings.max_range,
        fov=settings.fov,
        clearance=settings.clearance,
    )


def _build_map(settings: Settings, landmark: bool) -> OccupancyGrid:
    if landmark:
        return build_landmark_room(settings.map_side, settings.resolution)
    return build_symmetric_map(
        settings.map_side, settings.rooms_per_side, settings.door_width, settings.resolution
    )


# Commands


def cmd_gen_map(args: argparse.Namespace, settings: Settings) -> int:
    grid = _build_map(settings, args.landmark)
    storage.save_map(grid, args.out)
    print(f"Wrote {grid.width_cells}x{grid.height_cells} map to {args.out}")
    return EXIT_OK


def cmd_gen_log(args: argparse.Namespace, settings: Settings) -> int:
    grid = storage.load_map(args.map)
    if args.start is not None and args.goal is not None:
        start, goal = args.start, args.goal
    else:
        scenarios = benchmark_scenarios(settings.map_side, settings.rooms_per_side)
        scenario = scenarios[args.scenario % len(scenarios)]
        start, goal = scenario.start, scenario.goal
    records = _make_log(grid, settings, start, goal, replica_rng(settings.seed, 1000))
    storage.save_log(records, args.out)
    print(f"Wrote {len(records)} records to {args.out}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace, settings: Settings) -> int:
    variant = parse_variant(args.variant)
    grid = storage.load_map(args.map)
    records = storage.load_log(args.log)
    runs = run_experiment(
        grid, [records], variant, settings, [settings.seed], jobs=1, tracking=args.tracking
    )
    storage.save_metrics_csv(runs, args.out_csv, include_wall_time=args.timing)
    if args.out_json:
        summary = {"runs": [r.model_dump(exclude={"wall_times"}) for r in runs]}
        summary["summary"] = summarize_runs(runs)
        storage.save_json(summary, args.out_json)
    run = runs[0]
    print(f"{variant.value}: success={run.success} expired_step={run.expired_step}")
    return EXIT_DIVERGED if run.diverged else EXIT_OK


def _load_or_generate_logs(args: argparse.Namespace, grid: OccupancyGrid, settings: Settings):
    if args.log:
        return [storage.load_log(path) for path in args.log]
    return _scenario_logs(grid, settings, args.landmark)


def cmd_compare(args: argparse.Namespace, settings: Settings) -> int:
    variants = [parse_variant(v) for v in args.variants.split(",")]
    grid = storage.load_map(args.map) if args.map else _build_map(settings, args.landmark)
    logs = _load_or_generate_logs(args, grid, settings)
    runs = run_experiment(grid, logs, variants, settings, _seeds(settings, args.seeds))
    summary = summarize_runs(runs)
    if args.out_csv:
        storage.save_metrics_csv(runs, args.out_csv)
    if args.out_json:
        storage.save_json(summary, args.out_json)
    print(f"{'variant':<8} {'runs':>5} {'success':>8} {'never_expired':>14} {'mean_error':>11}")
    for name, row in summary.items():
        error = row["mean_error"]
        print(
            f"{name:<8} {row['runs']:>5} {row['success_rate']:>8.2f} "
            f"{row['never_expired']:>14} {error if error is None else round(error, 3)!s:>11}"
        )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, settings: Settings) -> int:
    if args.param not in SWEEPABLE:
        choices = ", ".join(sorted(SWEEPABLE))
        raise UnknownParameterError(f"cannot sweep '{args.param}' (choose from {choices})")
    variant = parse_variant(args.variant)
    grid = storage.load_map(args.map) if args.map else _build_map(settings, args.landmark)
    records = _load_or_generate_logs(args, grid, settings)[0]
    curves = sweep_parameter(
        grid, records, args.param, args.values, settings, _seeds(settings, args.seeds), variant
    )
    storage.save_sweep_csv(args.param, curves, args.out)
    for value, curve in curves.items():
        final = curve[-1] if curve else float("nan")
        print(f"{args.param}={value}: final mean samples {final:.1f}")
    return EXIT_OK


def cmd_cost(args: argparse.Namespace, settings: Settings) -> int:
    grid = storage.load_map(args.map) if args.map else _build_map(settings, args.landmark)
    records = _load_or_generate_logs(args, grid, settings)[0]
    report = measure_cost(grid, records, settings, _seeds(settings, args.seeds))
    storage.save_json(report.model_dump(), args.out)
    if report.measured_ratio is not None:
        print(
            f"measured CEAMCL/MCL per-sample ratio {report.measured_ratio:.2f}, "
            f"predicted {report.predicted.approx:.2f} (exact form {report.predicted.exact:.2f})"
        )
    return EXIT_OK


def cmd_config(args: argparse.Namespace, settings: Settings) -> int:
    print(json.dumps(settings.model_dump(), indent=2, sort_keys=True))
    return EXIT_OK


def _add_map_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--map", help="map file (default: build the benchmark map)")
    parser.add_argument("--log", action="append", help="log file; repeat for several")
    parser.add_argument("--landmark", action="store_true", help="use the landmark room")
    parser.add_argument("--seeds", type=int, help="number of seeds (default: n_seeds)")


def _common_options() -> argparse.ArgumentParser:
    """Options accepted both before and after the command name."""
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--jobs", type=int, help="parallel replica workers")
    common.add_argument("--seed", type=int, help="base seed (default: CEAMCL_SEED or 0)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="ceamcl", description="Monte Carlo localization benchmark suite", parents=[common]
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-map", parents=[common], help="write the benchmark map")
    p.add_argument("--side", type=float, dest="map_side")
    p.add_argument("--rooms", type=int, dest="rooms_per_side")
    p.add_argument("--door", type=float, dest="door_width")
    p.add_argument("--resolution", type=float)
    p.add_argument("--landmark", action="store_true", help="asymmetric single room instead")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_gen_map)

    p = sub.add_parser("gen-log", parents=[common], help="simulate a drive and log it")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scenario", type=int, default=0, help="catalogue scenario index")
    p.add_argument("--start", type=parse_pose, help="x,y[,theta]")
    p.add_argument("--goal", type=parse_pose, help="x,y[,theta]")
    p.set_defaults(handler=cmd_gen_log)

    p = sub.add_parser("run", parents=[common], help="run one variant over one log")
    p.add_argument("--variant", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json")
    p.add_argument("--tracking", action="store_true", help="start from the known first pose")
    p.add_argument("--timing", action="store_true", help="include wall-clock column")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("compare", parents=[common], help="all variants over a seed set")
    _add_map_source(p)
    p.add_argument("--variants", default="mcl,gmcl,ceamcl")
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("sweep", parents=[common], help="sample-size curve per value")
    _add_map_source(p)
    p.add_argument("--param", default="delta")
    p.add_argument("--values", type=parse_values, required=True, help="comma-separated")
    p.add_argument("--variant", default="ceamcl")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("cost", parents=[common], help="iteration timing and cost fit")
    _add_map_source(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_cost)

    p = sub.add_parser("config", parents=[common], help="print the effective settings")
    p.set_defaults(handler=cmd_config)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("seed", "jobs", "map_side", "rooms_per_side", "door_width", "resolution")
    values = {key: getattr(args, key, None) for key in keys}
    if getattr(args, "verbose", False):
        values["debug"] = True
    return values


def configure_logging(settings: Settings) -> None:
    level = logging.DEBUG if settings.debug else getattr(logging, settings.log_level.upper(), 20)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK

    try:
        settings = build_settings(getattr(args, "config", None), _overrides(args))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    configure_logging(settings)

    handler: Callable[[argparse.Namespace, Settings], int] = args.handler
    try:
        return handler(args, settings)
    except (UnknownVariantError, UnknownParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_NAME
    except (MapFormatError, ConfigError, UnreachableGoalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except Exception:
        logger.exception("Unexpected error")
        return EXIT_ERROR
