# START OF FILE privacy_sim.py

"""Seeded vehicle traffic through placed mix zones, and the privacy metrics over it.

Vehicles chain shortest-path trips between random intersections; every time a
route touches a mix-zone intersection the vehicle changes pseudonym there.
The adversary guesses uniformly inside the anonymity set of each change, so a
vehicle is linked through one zone with probability 1/k.
"""

import concurrent.futures
import dataclasses
import itertools
import logging
import math
import numbers
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np

import settings as app_settings
from cost_model import CostParams
from errors import InvalidInputError, OversizeError
from linear_placement import optimal_multi
from placement_search import SearchParams, fitness, ga_search, make_placement

MIXING_MODES = ("zone", "network")
TRACKING_MODES = ("exact", "monte_carlo")

# Adversary outcomes the brute-force oracle is willing to enumerate
ENUMERATION_LIMIT = 10 ** 6


@dataclass(frozen=True)
class SimConfig:
    vehicle_count: int = app_settings.DEFAULT_SIM_VEHICLES
    trips_per_vehicle: int = app_settings.DEFAULT_SIM_TRIPS
    mean_speed: float = app_settings.DEFAULT_SIM_MEAN_SPEED
    zone_dwell_window: float = app_settings.DEFAULT_SIM_DWELL_WINDOW
    seed: int = 0
    duration: float = app_settings.DEFAULT_SIM_DURATION
    mixing: str = app_settings.DEFAULT_SIM_MIXING
    mc_trials: int = app_settings.DEFAULT_SIM_MC_TRIALS
    tracking: str = app_settings.DEFAULT_SIM_TRACKING
    intersection_strength: float = app_settings.DEFAULT_INTERSECTION_STRENGTH

    def __post_init__(self):
        for name in ("vehicle_count", "trips_per_vehicle", "mean_speed", "zone_dwell_window",
                     "duration", "mc_trials", "intersection_strength"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidInputError(f"simulation parameter {name} must be positive, got {value}")
        if self.mixing not in MIXING_MODES:
            raise InvalidInputError(f"unknown mixing mode '{self.mixing}'")
        if self.tracking not in TRACKING_MODES:
            raise InvalidInputError(f"unknown tracking mode '{self.tracking}'")


@dataclass(frozen=True)
class ZoneTraversal:
    vehicle: int
    zone: int
    entry_time: float
    exit_time: float
    anonymity_set_size: int = 1


@dataclass(frozen=True)
class TrackingResult:
    value: object        # Fraction in exact mode, float in Monte Carlo mode
    tracked: object      # M_s(j), expected number of vehicles linked through their first j zones
    population: int      # M(j)
    mode: str
    empty: bool = False


@dataclass(frozen=True)
class EntropyResult:
    bits: float
    traversals: int
    empty: bool = False


@dataclass
class SimulationReport:
    ts_curve: dict
    entropy_per_vehicle: dict
    mean_anonymity_set: float
    capacity_phi_max: float
    demand_phi: float = 0.0
    admitted_phi: float = 0.0
    journey_ts: float = 1.0
    tracking: str = "exact"
    cohort_size: int = 0
    traversal_count: int = 0

    @property
    def within_capacity(self):
        return self.demand_phi <= self.capacity_phi_max

    @property
    def mean_entropy(self):
        if not self.entropy_per_vehicle:
            return 0.0
        return float(np.mean(list(self.entropy_per_vehicle.values())))

    def to_dict(self):
        return {
            "ts_curve": {str(j): ts for j, ts in sorted(self.ts_curve.items())},
            "mean_entropy": self.mean_entropy,
            "mean_anonymity_set": self.mean_anonymity_set,
            "capacity_phi_max": self.capacity_phi_max if math.isfinite(self.capacity_phi_max) else "inf",
            "demand_phi": self.demand_phi,
            "admitted_phi": self.admitted_phi,
            "within_capacity": self.within_capacity,
            "journey_ts": self.journey_ts,
            "tracking": self.tracking,
            "cohort_size": self.cohort_size,
            "traversal_count": self.traversal_count,
        }


@dataclass(frozen=True)
class CurvePoint:
    mz: int
    sites: tuple
    report: SimulationReport = field(compare=False)


# --- Simulation ---
def _sites_of(net, placement):
    sites = getattr(placement, "sites", placement)
    sites = tuple(sites)
    if not sites:
        raise InvalidInputError("placement has no sites")
    for site in sites:
        net.check_id(site)
    return sites


def anonymity_set_sizes(traversals, window, mixing="zone"):
    """Recount every traversal's anonymity set.

    The set holds the distinct vehicles with a traversal of the same zone (any
    zone under network mixing) whose interval, padded by `window` seconds on
    both sides, overlaps this one.
    """
    if mixing not in MIXING_MODES:
        raise InvalidInputError(f"unknown mixing mode '{mixing}'")
    groups = defaultdict(list)
    for index, t in enumerate(traversals):
        groups[t.zone if mixing == "zone" else 0].append(index)

    sizes = [1] * len(traversals)
    for members in groups.values():
        members.sort(key=lambda index: traversals[index].entry_time)
        entries = np.array([traversals[index].entry_time for index in members])
        longest = max(traversals[index].exit_time - traversals[index].entry_time for index in members)
        for index in members:
            t = traversals[index]
            low = np.searchsorted(entries, t.entry_time - window - longest, side="left")
            high = np.searchsorted(entries, t.exit_time + window, side="right")
            present = {
                traversals[other].vehicle
                for other in members[low:high]
                if traversals[other].exit_time >= t.entry_time - window
            }
            sizes[index] = len(present | {t.vehicle})
    return [dataclasses.replace(t, anonymity_set_size=size) for t, size in zip(traversals, sizes)]


class _RouteCache:
    """Length-shortest routes, one Dijkstra per origin."""

    def __init__(self, net):
        self.net = net
        self._paths = {}
        self._lengths = {}

    def route(self, origin, destination):
        if origin not in self._paths:
            self._lengths[origin], self._paths[origin] = nx.single_source_dijkstra(
                self.net.graph, origin, weight="length"
            )
        path = self._paths[origin][destination]
        lengths = self._lengths[origin]
        return [(node, lengths[node]) for node in path]


def simulate(net, placement, cfg):
    """Drive cfg.vehicle_count vehicles through the network and record their mix-zone traversals.

    Each vehicle starts at a uniform time in [0, duration) from a random
    intersection and chains trips_per_vehicle trips, each to a random other
    intersection. Trip draws do not depend on the placement, so one seed gives
    the same traffic for every placement of the same network.
    """
    sites = _sites_of(net, placement)
    zone_of = {site: index for index, site in enumerate(sites)}
    rng = np.random.default_rng(cfg.seed)
    routes = _RouteCache(net)
    n = net.size

    raw = []
    for vehicle in range(1, cfg.vehicle_count + 1):
        clock = float(rng.uniform(0.0, cfg.duration))
        origin = int(rng.integers(1, n + 1))
        if origin in zone_of:
            raw.append(ZoneTraversal(vehicle, zone_of[origin], clock, clock))
        for _ in range(cfg.trips_per_vehicle):
            if n == 1:
                break
            destination = int(rng.integers(1, n))
            if destination >= origin:
                destination += 1
            start = clock
            # the origin was recorded when the previous trip ended there
            for node, meters in routes.route(origin, destination)[1:]:
                clock = start + meters / cfg.mean_speed
                if node in zone_of:
                    raw.append(ZoneTraversal(vehicle, zone_of[node], clock, clock))
            origin = destination

    traversals = anonymity_set_sizes(raw, cfg.zone_dwell_window, cfg.mixing)
    logging.info(
        f"[SIM] {cfg.vehicle_count} vehicles, {len(sites)} zones, {len(traversals)} traversals "
        f"(mixing={cfg.mixing}, seed={cfg.seed})"
    )
    return traversals


# --- Privacy Metrics ---
def _by_vehicle(traversals):
    journeys = defaultdict(list)
    for t in traversals:
        journeys[t.vehicle].append(t)
    for journey in journeys.values():
        journey.sort(key=lambda t: (t.entry_time, t.zone))
    return journeys


def _cohort(traversals, j, cohort):
    if j < 1:
        raise InvalidInputError(f"j must be >= 1, got {j}")
    cohort = j if cohort is None else cohort
    if cohort < j:
        raise InvalidInputError(f"cohort threshold {cohort} is below j={j}")
    journeys = _by_vehicle(traversals)
    return [journeys[v][:j] for v in sorted(journeys) if len(journeys[v]) >= cohort]


def tracking_success(traversals, j, mode="exact", cohort=None, trials=None, seed=0):
    """TS(j) = M_s(j) / M(j) over vehicles with at least `cohort` (default j) traversals.

    A vehicle counts as tracked when the adversary links it through each of
    its first j zones. Exact mode returns a Fraction; Monte Carlo mode draws
    `trials` adversary runs.
    """
    if mode not in TRACKING_MODES:
        raise InvalidInputError(f"unknown tracking mode '{mode}'")
    prefixes = _cohort(traversals, j, cohort)
    if not prefixes:
        zero = Fraction(0) if mode == "exact" else 0.0
        return TrackingResult(zero, zero, 0, mode, empty=True)

    chances = [math.prod(Fraction(1, t.anonymity_set_size) for t in prefix) for prefix in prefixes]
    if mode == "exact":
        tracked = sum(chances, Fraction(0))
        return TrackingResult(tracked / len(prefixes), tracked, len(prefixes), mode)

    trials = trials or app_settings.DEFAULT_SIM_MC_TRIALS
    rng = np.random.default_rng(seed)
    p = np.array([float(c) for c in chances])
    hits = rng.random((trials, len(p))) < p
    tracked = float(hits.sum(axis=1).mean())
    return TrackingResult(tracked / len(p), tracked, len(p), mode)


def enumerate_tracking_success(traversals, j, cohort=None):
    """Brute-force TS(j): walk every joint adversary guess and count the linked vehicles."""
    prefixes = _cohort(traversals, j, cohort)
    if not prefixes:
        return Fraction(0)
    steps = [t.anonymity_set_size for prefix in prefixes for t in prefix]
    outcomes = math.prod(steps)
    if outcomes > ENUMERATION_LIMIT:
        raise OversizeError(f"{outcomes} adversary outcomes exceed the enumeration limit {ENUMERATION_LIMIT}")

    # guess 0 stands for the adversary picking the right vehicle
    linked = 0
    for guesses in itertools.product(*(range(k) for k in steps)):
        position = 0
        for prefix in prefixes:
            if not any(guesses[position:position + len(prefix)]):
                linked += 1
            position += len(prefix)
    return Fraction(linked, outcomes * len(prefixes))


def journey_tracking_success(traversals, vehicle_count):
    """Share of all vehicles the adversary follows through every zone they cross.

    A vehicle that crosses no zone never changes pseudonym and is followed
    with certainty.
    """
    if vehicle_count < 1:
        raise InvalidInputError(f"vehicle_count must be >= 1, got {vehicle_count}")
    journeys = _by_vehicle(traversals)
    tracked = sum(
        (math.prod(Fraction(1, t.anonymity_set_size) for t in journeys.get(vehicle, ()))
         for vehicle in range(1, vehicle_count + 1)),
        Fraction(0),
    )
    return tracked / vehicle_count


def cumulative_entropy(traversals, vehicle):
    """Bits of uncertainty a vehicle accumulates: the sum of log2 k over its traversals."""
    sizes = [t.anonymity_set_size for t in traversals if t.vehicle == vehicle]
    if not sizes:
        return EntropyResult(0.0, 0, empty=True)
    return EntropyResult(float(sum(math.log2(k) for k in sizes)), len(sizes))


# --- Capacity ---
def capacity_bound(i_t, n, lambda_min):
    """Largest per-RSU rate phi with phi * lambda_min * n <= I_T.

    Rational inputs (int, Fraction) give an exact Fraction.
    """
    for name, value in (("I_T", i_t), ("n", n), ("lambda_min", lambda_min)):
        if not value > 0:
            raise InvalidInputError(f"capacity bound needs positive {name}, got {value}")
    if all(isinstance(v, numbers.Rational) for v in (i_t, n, lambda_min)):
        return Fraction(i_t) / (Fraction(n) * Fraction(lambda_min))
    return float(i_t) / (float(n) * float(lambda_min))


def capacity_curve(n, mz_counts, i_t, rsu_count=None):
    """phi_max per mix-zone count, taking lambda_min from the optimal line placement."""
    rsu_count = n if rsu_count is None else rsu_count
    curve = {}
    for mz in mz_counts:
        lambda_min = optimal_multi(n, mz).avg_hops
        curve[mz] = math.inf if lambda_min == 0 else capacity_bound(i_t, rsu_count, lambda_min)
    return curve


def zone_demand(traversals, duration):
    """Arrival rate phi at each zone: traversals per second over the simulated duration."""
    if not duration > 0:
        raise InvalidInputError(f"duration must be positive, got {duration}")
    counts = defaultdict(int)
    for t in traversals:
        counts[t.zone] += 1
    return {zone: counts[zone] / duration for zone in sorted(counts)}


def admissible_rate(demand, i_t, n, lambda_avg):
    """Demand clipped to what the intersections can carry."""
    if demand < 0:
        raise InvalidInputError(f"demand must be non-negative, got {demand}")
    if lambda_avg == 0:
        return demand
    return min(demand, capacity_bound(i_t, n, lambda_avg))


# --- Reports ---
def build_report(net, placement, traversals, cfg, max_j=None):
    """TS(1..max_j) over the fixed cohort of vehicles with at least max_j traversals, plus entropy and capacity.

    TS uses cfg.tracking; Monte Carlo runs draw cfg.mc_trials adversaries from
    cfg.seed, the same draws for every j, so the curve stays non-increasing.
    The busiest zone's arrival rate is checked against the capacity bound.
    """
    max_j = max_j or app_settings.DEFAULT_SIM_MAX_J
    sites = _sites_of(net, placement)
    ts_curve = {
        j: float(tracking_success(traversals, j, cfg.tracking, cohort=max_j, trials=cfg.mc_trials, seed=cfg.seed).value)
        for j in range(1, max_j + 1)
    }
    entropies = {
        vehicle: cumulative_entropy(traversals, vehicle).bits for vehicle in range(1, cfg.vehicle_count + 1)
    }
    sizes = [t.anonymity_set_size for t in traversals]
    lambda_min = fitness(net, make_placement(net, sites), metric="avg_hops")
    phi_max = math.inf if lambda_min == 0 else float(capacity_bound(cfg.intersection_strength, net.size, lambda_min))
    demand = max(zone_demand(traversals, cfg.duration).values(), default=0.0)
    admitted = float(admissible_rate(demand, cfg.intersection_strength, net.size, lambda_min))
    if demand > phi_max:
        logging.warning(f"[SIM] zone demand {demand:.4g}/s exceeds the capacity bound {phi_max:.4g}/s")
    cohort_size = len(_cohort(traversals, max_j, None))
    if cohort_size == 0:
        logging.warning(f"[SIM] no vehicle crossed {max_j} zones; TS curve is empty")
    return SimulationReport(
        ts_curve=ts_curve,
        entropy_per_vehicle=entropies,
        mean_anonymity_set=float(np.mean(sizes)) if sizes else 0.0,
        capacity_phi_max=phi_max,
        demand_phi=demand,
        admitted_phi=admitted,
        journey_ts=float(journey_tracking_success(traversals, cfg.vehicle_count)),
        tracking=cfg.tracking,
        cohort_size=cohort_size,
        traversal_count=len(traversals),
    )


def _grown_placements(net, mz_counts, sp, cp):
    """Placements for the sweep in ascending MZ; each keeps the sites of the next smaller MZ."""
    placements, kept = {}, ()
    for mz in sorted(set(mz_counts)):
        # isolated stream per (seed, MZ)
        seed = int(np.random.SeedSequence([sp.seed, mz]).generate_state(1)[0])
        placement, _ = ga_search(net, mz, dataclasses.replace(sp, seed=seed), cp, keep=kept)
        placements[mz] = placement
        kept = placement.sites
    return placements


def _curve_point(net, cfg, mz, placement, max_j):
    traversals = simulate(net, placement, cfg)
    report = build_report(net, placement, traversals, cfg, max_j)
    logging.info(f"[SIM] MZ={mz}: TS={report.ts_curve} mean entropy {report.mean_entropy:.4f} bits")
    return CurvePoint(mz, placement.sites, report)


def privacy_curve(net, cfg, mz_counts, sp=None, cp=None, max_j=None, workers=1):
    """Place, simulate and score each MZ in the sweep; returns {MZ: CurvePoint}.

    Placements grow with MZ: the search for each count keeps the sites chosen
    for the next smaller one. Every point sees the same seeded traffic, so
    per-vehicle entropy can only grow and whole-journey tracking success can
    only fall along the sweep.
    """
    sp = sp or SearchParams(seed=cfg.seed)
    cp = cp or CostParams()
    mz_counts = list(mz_counts)
    for mz in mz_counts:
        if not 1 <= mz <= net.size:
            raise InvalidInputError(f"mix-zone count must lie in [1, {net.size}], got {mz}")
    placements = _grown_placements(net, mz_counts, sp, cp)

    if workers <= 1:
        return {mz: _curve_point(net, cfg, mz, placements[mz], max_j) for mz in mz_counts}

    net.build_tables()
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {mz: executor.submit(_curve_point, net, cfg, mz, placements[mz], max_j) for mz in mz_counts}
        return {mz: futures[mz].result() for mz in mz_counts}

# END OF FILE privacy_sim.py
