# START OF FILE cli.py

"""Command-line entry point: mixzone gen | place | weber | cost | sim | replay.

Exit codes: 0 success, 2 usage, 3 bad input, 4 numeric trouble
(non-convergence or an oracle mismatch).
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import settings as app_settings
from cost_model import METHOD_ALIASES, AllocationMethod, CostParams, allocation_rows, multi_site_allocate, search_allocation, weighted_link_cost
from errors import InputFormatError, InvalidInputError, MixZoneError, NonConvergenceError, OracleMismatchError
from linear_placement import optimal_multi, oracle_multi
from placement_search import (METRICS, SearchParams, exhaustive_placement, fitness, ga_search, make_placement,
                              place_normal_traffic, placement_to_dict)
from privacy_sim import TRACKING_MODES, SimConfig, capacity_curve, privacy_curve
from reports import format_csv, privacy_rows, svg_line_chart, trace_rows, write_csv, write_svg
from road_graph import dumps_network, generate_grid, generate_line, generate_poisson, load_network
from weber_solver import SolverConfig, load_points_csv, problem_to_dict, solution_to_dict, solve_with

LOG_FORMAT = '%(asctime)s - %(levelname)s - [%(funcName)s:%(lineno)d] %(message)s'

COST_FIELDS = ["link_index", "length", "weight", "method", "cost"]
TRACE_FIELDS = ["generation", "best", "mean"]
PRIVACY_FIELDS = ["mz", "j", "ts", "entropy_mean", "anonymity_mean"]
WEBER_MODES = {"weiszfeld": "weiszfeld", "smoothed": "smoothed_gradient"}


# --- Settings ---
def default_settings():
    return {
        name[len("DEFAULT_"):].lower(): value
        for name, value in vars(app_settings).items()
        if name.startswith("DEFAULT_")
    }


def _accepts(default, value):
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, type(default))


def load_settings(path=None):
    """Defaults from settings.py, overridden key by key from the user JSON file.

    Values of the wrong type keep their default; a file that cannot be parsed
    leaves every default in place.
    """
    defaults = default_settings()
    path = path or os.environ.get(app_settings.SETTINGS_ENV_VAR) or app_settings.USER_SETTINGS_FILE
    if not os.path.exists(path):
        logging.debug(f"[SETTINGS] {path} not found. Using default settings.")
        return defaults
    try:
        with open(path, "r", encoding="utf-8") as f:
            user_settings = json.load(f)
        if not isinstance(user_settings, dict):
            raise TypeError(f"expected a JSON object, got {type(user_settings).__name__}")
    except (json.JSONDecodeError, OSError, TypeError) as e:
        logging.error(f"[SETTINGS] Error loading {path}: {e}. Using default settings.")
        return defaults

    loaded = {**defaults}
    for key, default in defaults.items():
        value = user_settings.get(key, default)
        if _accepts(default, value):
            loaded[key] = float(value) if isinstance(default, float) else value
        else:
            logging.warning(f"[SETTINGS] Ignoring {key}={value!r} (expected {type(default).__name__})")
    for key in sorted(set(user_settings) - set(defaults)):
        logging.warning(f"[SETTINGS] Unknown setting '{key}' ignored")
    logging.info(f"[SETTINGS] Loaded settings from {path}")
    return loaded


# --- Run Manifest ---
@dataclass
class RunManifest:
    command: str
    inputs: list
    params: dict
    seed: int = None
    version: str = app_settings.TOOL_VERSION
    outputs: list = field(default_factory=list)
    argv: list = field(default_factory=list)

    def write(self, primary):
        path = f"{primary}.manifest.json"
        with open(path, "w", encoding="utf-8") as f:
            f.write(dumps_json(dataclasses.asdict(self)))
        return path


def dumps_json(data):
    return json.dumps(data, indent=2) + "\n"


def _emit(text, path):
    """Write a primary output to `path`, or to stdout when no path was given."""
    if path is None:
        sys.stdout.write(text)
        return []
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    logging.info(f"[CLI] Wrote {path}")
    return [path]


def _recorded_params(args):
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "parser", "argv")}
    return json.loads(json.dumps(params))


def _finish(args, inputs, outputs, seed=None):
    if not outputs:
        return
    manifest = RunManifest(args.command, inputs, _recorded_params(args), seed, outputs=outputs,
                           argv=list(getattr(args, "argv", [])))
    manifest.write(outputs[0])


def resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env_seed = os.environ.get(app_settings.SEED_ENV_VAR)
    if env_seed is not None:
        try:
            return int(env_seed)
        except ValueError:
            args.parser.error(f"{app_settings.SEED_ENV_VAR} must be an integer, got '{env_seed}'")
    args.parser.error(f"this command needs a seed: pass --seed or set {app_settings.SEED_ENV_VAR}")


# --- Argument Types ---
def int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def area(text):
    try:
        width, height = (float(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got '{text}'") from None
    return width, height


# --- Commands ---
def cmd_gen(args, config):
    seed = None
    if args.kind == "line":
        if args.n is None:
            args.parser.error("gen line needs --n")
        lengths = args.lengths if args.lengths else [args.length]
        net = generate_line(args.n, lengths, args.range)
    elif args.kind == "grid":
        if args.rows is None or args.cols is None:
            args.parser.error("gen grid needs --rows and --cols")
        net = generate_grid(args.rows, args.cols, args.spacing, args.range)
    else:
        seed = resolve_seed(args)
        width, height = args.area
        net = generate_poisson(width, height, args.intensity, seed, args.range)
    if net.warning:
        logging.warning(f"[CLI] {net.warning}")
    _finish(args, [], _emit(dumps_network(net), args.out), seed)
    return 0


def _search_params(args, seed):
    return SearchParams(
        population_size=args.pop,
        pc=args.pc,
        pm=args.pm,
        maxgen=args.maxgen,
        seed=seed,
        local_search=not args.no_local_search,
        init=args.init,
        metric=args.metric,
        workers=args.workers,
    )


def cmd_place(args, config):
    net = load_network(args.network)
    n, mz = net.size, args.mz
    if mz < 1:
        raise InvalidInputError(f"need at least one mix zone, got --mz {mz}")
    cp = CostParams(config["cost_z"], config["cost_alpha"], config["cost_gamma"], config["cost_budget"])
    method = args.method
    if method == "auto":
        method = "linear" if net.kind == "line" else "ga"

    seed, trace, extra = None, None, {}
    if method == "linear":
        if net.kind != "line":
            raise InvalidInputError(f"the linear method needs a line network, got kind '{net.kind}'")
        result = optimal_multi(n, mz)
        placement = make_placement(net, result.sites)
        extra = {"avg_hops_exact": str(result.avg_hops), "case": result.case}
        if args.oracle:
            check = oracle_multi(n, min(mz, n))
            if check.avg_hops != result.avg_hops:
                raise OracleMismatchError(
                    f"closed form gives {result.avg_hops} at {result.sites}, enumeration {check.avg_hops} at {check.sites}"
                )
            extra["oracle_avg_hops"] = str(check.avg_hops)
    else:
        seed = resolve_seed(args)
        sp = _search_params(args, seed)
        if mz >= n:
            placement = make_placement(net, net.ids)
        elif method == "ga":
            placement, trace = ga_search(net, mz, sp, cp)
        else:
            placement = place_normal_traffic(net, mz, cp, sp)
        if args.oracle:
            best, best_value = exhaustive_placement(net, min(mz, n), cp, args.metric)
            extra["oracle_value"] = best_value
            extra["oracle_sites"] = list(best.sites)

    value = fitness(net, placement, cp, args.metric)
    if "oracle_value" in extra and value > extra["oracle_value"] + 1e-9:
        logging.warning(f"[CLI] {method} placement {value:.6g} is above the exhaustive best {extra['oracle_value']:.6g}")
    data = placement_to_dict(placement, args.metric, value)
    data.update(extra)
    if placement.note:
        data["note"] = placement.note

    outputs = _emit(dumps_json(data), args.out)
    if args.trace and trace is not None:
        write_csv(args.trace, TRACE_FIELDS, trace_rows(trace))
        outputs.append(args.trace)
    _finish(args, [args.network], outputs, seed)
    return 0


def cmd_weber(args, config):
    problem = load_points_csv(args.points)
    cfg = SolverConfig(args.epsilon, args.step_tol, args.max_iters, WEBER_MODES[args.mode])
    solution = solve_with(problem, cfg)
    data = {"problem": problem_to_dict(problem), "solution": solution_to_dict(solution)}
    _finish(args, [args.points], _emit(dumps_json(data), args.out))
    if not solution.converged:
        raise NonConvergenceError(f"{args.mode} solver did not converge in {args.max_iters} iterations")
    return 0


def cmd_cost(args, config):
    params = CostParams(args.z, args.alpha, args.gamma, args.budget)
    sites = args.sites if args.sites else list(optimal_multi(args.n, args.mz).sites)
    allocation = multi_site_allocate(args.n, sites, params, args.method)
    if args.oracle:
        if allocation.method != AllocationMethod.OPTIMAL:
            raise InvalidInputError("--oracle cross-checks the optimal method only")
        # the allocator works on weights clipped at 1
        effective = [max(w, 1) for w in allocation.weights]
        _, oracle_cost = search_allocation(effective, params)
        ours = weighted_link_cost(effective, allocation.lengths, params)
        if abs(ours - oracle_cost) > app_settings.DEFAULT_ORACLE_REL_TOL * max(abs(oracle_cost), 1.0):
            raise OracleMismatchError(f"optimal allocation costs {ours:.9g}, restart search found {oracle_cost:.9g}")
    logging.info(f"[COST] N={args.n} sites={list(allocation.sites)} {allocation.method.value}: CT={allocation.total_cost:.6g}")
    text = format_csv(COST_FIELDS, allocation_rows(allocation, params))
    _finish(args, [], _emit(text, args.out))
    return 0


def cmd_sim(args, config):
    net = load_network(args.network)
    seed = resolve_seed(args)
    cfg = SimConfig(
        vehicle_count=args.vehicles,
        trips_per_vehicle=args.trips,
        mean_speed=args.speed,
        zone_dwell_window=args.window,
        seed=seed,
        duration=args.duration,
        mixing=args.mixing,
        mc_trials=args.mc_trials,
        tracking=args.tracking,
        intersection_strength=args.strength,
    )
    sp = _search_params(args, seed)
    curve = privacy_curve(net, cfg, args.mz, sp, max_j=args.max_j, workers=args.workers)

    outputs = _emit(format_csv(PRIVACY_FIELDS, privacy_rows(curve)), args.out)
    if args.json:
        capacity = capacity_curve(net.size, args.mz, args.strength)
        summary = {
            str(mz): {
                "sites": list(point.sites),
                **point.report.to_dict(),
                "line_capacity_phi_max": str(capacity[mz]),
            }
            for mz, point in curve.items()
        }
        outputs += _emit(dumps_json(summary), args.json)
    if args.svg_dir:
        os.makedirs(args.svg_dir, exist_ok=True)
        ts_series = {f"MZ={mz}": sorted(point.report.ts_curve.items()) for mz, point in curve.items()}
        entropy_series = {"mean entropy": [(mz, curve[mz].report.mean_entropy) for mz in sorted(curve)]}
        charts = {
            "ts_vs_j.svg": svg_line_chart("Tracking success vs zones traversed", ts_series, "j", "TS(j)"),
            "entropy_vs_mz.svg": svg_line_chart("Mean cumulative entropy vs mix zones", entropy_series, "MZ", "bits"),
        }
        for name, svg in charts.items():
            path = os.path.join(args.svg_dir, name)
            write_svg(path, svg)
            outputs.append(path)
    _finish(args, [args.network], outputs, seed)
    return 0


def cmd_replay(args, config):
    """Re-run the command line recorded in a manifest; its outputs land on the recorded paths again."""
    try:
        with open(args.manifest, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        argv = [str(token) for token in manifest["argv"]]
        recorded = manifest["params"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise InputFormatError(f"cannot read manifest {args.manifest}: {e}") from e
    if not argv or "replay" in argv[:2]:
        raise InputFormatError(f"manifest {args.manifest} records no replayable command line")
    if manifest.get("version") != app_settings.TOOL_VERSION:
        logging.warning(f"[CLI] Manifest written by version {manifest.get('version')}, "
                        f"replaying with {app_settings.TOOL_VERSION}")
    # a seed taken from the environment is pinned explicitly
    if manifest.get("seed") is not None and "--seed" not in argv:
        argv += ["--seed", str(manifest["seed"])]

    replayed = build_parser(config).parse_args(argv)
    replayed.argv = argv
    current = {k: v for k, v in _recorded_params(replayed).items() if k != "seed"}
    recorded = {k: v for k, v in recorded.items() if k != "seed"}
    changed = sorted(k for k in set(current) | set(recorded) if current.get(k) != recorded.get(k))
    if changed:
        raise InvalidInputError(f"current settings change recorded parameters: {', '.join(changed)}")
    logging.info(f"[CLI] Replaying '{' '.join(argv)}' from {args.manifest}")
    return replayed.func(replayed, config)


# --- Parser ---
def _add_search_options(sub, config):
    sub.add_argument("--seed", type=int, default=None, help=f"RNG seed (falls back to ${app_settings.SEED_ENV_VAR})")
    sub.add_argument("--pop", type=int, default=config["ga_population_size"], help="GA population size")
    sub.add_argument("--maxgen", type=int, default=config["ga_maxgen"], help="GA generations")
    sub.add_argument("--pc", type=float, default=config["ga_crossover_prob"], help="crossover probability")
    sub.add_argument("--pm", type=float, default=config["ga_mutation_prob"], help="mutation probability")
    sub.add_argument("--init", choices=("weber", "random"), default=config["ga_init"])
    sub.add_argument("--metric", choices=METRICS, default=config["ga_metric"])
    sub.add_argument("--no-local-search", action="store_true", default=not config["ga_local_search"])
    sub.add_argument("--workers", type=int, default=config["workers"], help="threads for fitness evaluation / sweeps")


def build_parser(config=None):
    config = config or default_settings()
    parser = argparse.ArgumentParser(prog=app_settings.TOOL_NAME, description="Mix-zone placement and privacy toolkit.")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    parser.add_argument("--version", action="version", version=f"%(prog)s {app_settings.TOOL_VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="generate a road network")
    gen.add_argument("kind", choices=("line", "grid", "poisson"))
    gen.add_argument("--n", type=int, help="line: number of intersections")
    gen.add_argument("--length", type=float, default=config["link_length"], help="line: uniform link length")
    gen.add_argument("--lengths", type=float_list, help="line: comma-separated link lengths")
    gen.add_argument("--rows", type=int)
    gen.add_argument("--cols", type=int)
    gen.add_argument("--spacing", type=float, default=config["grid_spacing"])
    gen.add_argument("--area", type=area, default=(config["poisson_width"], config["poisson_height"]),
                     help="poisson: region as WIDTHxHEIGHT in meters")
    gen.add_argument("--intensity", type=float, default=config["poisson_intensity"], help="poisson: points per m^2")
    gen.add_argument("--range", type=float, default=None, help="connection range r(N)")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", default=None)
    gen.set_defaults(func=cmd_gen, parser=gen)

    place = commands.add_parser("place", help="place mix zones on a network")
    place.add_argument("--network", required=True)
    place.add_argument("--mz", type=int, required=True)
    place.add_argument("--method", choices=("auto", "linear", "ga", "normal"), default="auto")
    place.add_argument("--oracle", action="store_true", help="cross-check against exhaustive enumeration")
    place.add_argument("--trace", default=None, help="GA trace CSV path")
    place.add_argument("--out", default=None)
    _add_search_options(place, config)
    place.set_defaults(func=cmd_place, parser=place)

    weber = commands.add_parser("weber", help="solve a Weber point instance")
    weber.add_argument("--points", required=True, help="CSV of x,y[,weight]")
    weber.add_argument("--mode", choices=sorted(WEBER_MODES), default="weiszfeld")
    weber.add_argument("--epsilon", type=float, default=config["weber_epsilon"])
    weber.add_argument("--step-tol", type=float, default=None)
    weber.add_argument("--max-iters", type=int, default=config["weber_max_iters"])
    weber.add_argument("--out", default=None)
    weber.set_defaults(func=cmd_weber, parser=weber)

    cost = commands.add_parser("cost", help="allocate link lengths under a corridor budget")
    cost.add_argument("--n", type=int, required=True)
    cost.add_argument("--sites", type=int_list, default=None, help="comma-separated site ids")
    cost.add_argument("--mz", type=int, default=1, help="optimal line sites for MZ zones when --sites is absent")
    cost.add_argument("--z", type=float, default=config["cost_z"])
    cost.add_argument("--alpha", type=float, default=config["cost_alpha"])
    cost.add_argument("--gamma", type=float, default=config["cost_gamma"])
    cost.add_argument("--budget", type=float, default=config["cost_budget"])
    cost.add_argument("--method", choices=sorted(METHOD_ALIASES), default="paper")
    cost.add_argument("--oracle", action="store_true")
    cost.add_argument("--out", default=None)
    cost.set_defaults(func=cmd_cost, parser=cost)

    sim = commands.add_parser("sim", help="simulate traffic and report privacy metrics per MZ")
    sim.add_argument("--network", required=True)
    sim.add_argument("--mz", type=int_list, required=True, help="comma-separated mix-zone counts")
    sim.add_argument("--vehicles", type=int, default=config["sim_vehicles"])
    sim.add_argument("--trips", type=int, default=config["sim_trips"])
    sim.add_argument("--speed", type=float, default=config["sim_mean_speed"])
    sim.add_argument("--window", type=float, default=config["sim_dwell_window"])
    sim.add_argument("--duration", type=float, default=config["sim_duration"])
    sim.add_argument("--mixing", choices=("zone", "network"), default=config["sim_mixing"])
    sim.add_argument("--tracking", choices=TRACKING_MODES, default=config["sim_tracking"], help="TS evaluation")
    sim.add_argument("--mc-trials", type=int, default=config["sim_mc_trials"], help="adversary runs for monte_carlo")
    sim.add_argument("--max-j", type=int, default=config["sim_max_j"])
    sim.add_argument("--strength", type=float, default=config["intersection_strength"], help="I_T")
    sim.add_argument("--out", default=None)
    sim.add_argument("--json", default=None, help="JSON summary path")
    sim.add_argument("--svg-dir", default=None)
    _add_search_options(sim, config)
    sim.set_defaults(func=cmd_sim, parser=sim)

    replay = commands.add_parser("replay", help="re-run the command recorded in a run manifest")
    replay.add_argument("manifest", help="path of a .manifest.json file")
    replay.set_defaults(func=cmd_replay, parser=replay)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT, stream=sys.stderr)
    config = load_settings()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser(config).parse_args(argv)
    args.argv = argv
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        return args.func(args, config)
    except MixZoneError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())

# END OF FILE cli.py
