"""Multi-mix-zone placement on general road networks.

One engine serves both search tables: the "best locations" variant seeds the
population from per-cluster Weber points, the "optimal placement" variant
starts from random distinct sites. Either way the loop is tournament
selection, one-point crossover with duplicate repair, single-site mutation,
local search on the elite and elitism of one.
"""

import concurrent.futures
import itertools
import logging
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

import settings as app_settings
from cost_model import CostParams, relay_costs_from
from errors import InvalidInputError, OversizeError
from linear_placement import optimal_multi
from road_graph import nearest_site_assignment, subnetwork
from weber_solver import SolverConfig, WeberProblem, solve

METRICS = ("avg_hops", "total_cost", "weighted_distance")
INIT_STRATEGIES = ("weber", "random")

IMPROVEMENT_TOL = 1e-12
EXHAUSTIVE_LIMIT = 200000


# --- Data Types ---
@dataclass(frozen=True)
class Placement:
    sites: tuple
    assignment: dict = field(compare=False, hash=False)
    note: str = field(default=None, compare=False)


@dataclass(frozen=True)
class SubNetwork:
    members: tuple
    network: object


@dataclass(frozen=True)
class SearchParams:
    population_size: int = app_settings.DEFAULT_GA_POPULATION_SIZE
    pc: float = app_settings.DEFAULT_GA_CROSSOVER_PROB
    pm: float = app_settings.DEFAULT_GA_MUTATION_PROB
    maxgen: int = app_settings.DEFAULT_GA_MAXGEN
    seed: int = 0
    local_search: bool = app_settings.DEFAULT_GA_LOCAL_SEARCH
    init: str = app_settings.DEFAULT_GA_INIT
    metric: str = app_settings.DEFAULT_GA_METRIC
    tournament_size: int = app_settings.DEFAULT_GA_TOURNAMENT_SIZE
    workers: int = app_settings.DEFAULT_WORKERS

    def __post_init__(self):
        if self.population_size < 2:
            raise InvalidInputError(f"population_size must be >= 2, got {self.population_size}")
        for name in ("pc", "pm"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1], got {value}")
        if self.maxgen < 1:
            raise InvalidInputError(f"maxgen must be >= 1, got {self.maxgen}")
        if self.init not in INIT_STRATEGIES:
            raise InvalidInputError(f"unknown init strategy '{self.init}'")
        if self.metric not in METRICS:
            raise InvalidInputError(f"unknown fitness metric '{self.metric}'")
        if self.tournament_size < 1 or self.workers < 1:
            raise InvalidInputError("tournament_size and workers must be >= 1")


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best: float
    mean: float
    best_sites: tuple


@dataclass
class SearchTrace:
    records: list = field(default_factory=list)

    @property
    def best_values(self):
        return [record.best for record in self.records]

    @property
    def generations_to_best(self):
        """First generation at which the final best value was reached."""
        final = self.records[-1].best
        for record in self.records:
            if record.best <= final:
                return record.generation
        return self.records[-1].generation

    def rows(self):
        return [{"generation": r.generation, "best": repr(r.best), "mean": repr(r.mean)} for r in self.records]


def make_placement(net, sites, note=None):
    sites = tuple(sorted(int(s) for s in sites))
    return Placement(sites, nearest_site_assignment(net, sites), note)


def snap_to_intersection(net, point, candidates=None):
    """Intersection closest (Euclidean) to a planar point; ties go to the lowest id."""
    ids = np.array(sorted(candidates) if candidates is not None else list(net.ids))
    d = np.hypot(*(net.positions[ids - 1] - np.asarray(point, dtype=float)).T)
    return int(ids[int(np.argmin(d))])


def placement_to_dict(placement, metric, value):
    return {"sites": list(placement.sites), "metric": metric, "value": value}


# --- Fitness ---
class FitnessEvaluator:
    """Memoized fitness of site sets for one network, metric and cost setting."""

    def __init__(self, net, cp, metric="avg_hops"):
        if metric not in METRICS:
            raise InvalidInputError(f"unknown fitness metric '{metric}'")
        self.net = net
        self.cp = cp or CostParams()
        self.metric = metric
        self._cache = {}
        self._relay_columns = {}
        self.hops = net.hop_matrix

    def _relay_column(self, site):
        if site not in self._relay_columns:
            self._relay_columns[site] = relay_costs_from(self.net, site, self.cp)
        return self._relay_columns[site]

    def __call__(self, sites):
        key = tuple(sorted(int(s) for s in sites))
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        columns = [s - 1 for s in key]
        hops = self.hops[:, columns]
        if self.metric == "avg_hops":
            value = float(hops.min(axis=1).mean())
        else:
            nearest = np.argmin(hops, axis=1)
            rows = np.arange(self.net.size)
            if self.metric == "total_cost":
                table = np.column_stack([self._relay_column(s) for s in key])
                value = float(table[rows, nearest].sum())
            else:
                distances = self.net.distance_matrix[:, columns][rows, nearest]
                value = float((self.net.node_traffic_weights * distances).sum())
        self._cache[key] = value
        return value


def fitness(net, placement, params=None, metric="avg_hops"):
    """Placement quality under the chosen metric (lower is better)."""
    return FitnessEvaluator(net, params, metric)(placement.sites)


# --- Clustering ---
def cluster_network(net, k, seed=0):
    """Split the network into k connected clusters of similar traffic.

    Seeds are spread by farthest-first traversal (starting from the far end of
    a random intersection), then a multi-source BFS grows whichever cluster
    currently carries the least traffic by one frontier intersection.
    """
    n = net.size
    if not 1 <= k <= n:
        raise InvalidInputError(f"cluster count must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    hops = net.hop_matrix
    traffic = net.node_traffic_weights

    start = int(rng.integers(1, n + 1))
    seeds = [int(np.argmax(hops[start - 1])) + 1]
    while len(seeds) < k:
        spread = hops[:, [s - 1 for s in seeds]].min(axis=1)
        spread[[s - 1 for s in seeds]] = -1
        seeds.append(int(np.argmax(spread)) + 1)

    owner = {s: index for index, s in enumerate(seeds)}
    load = [float(traffic[s - 1]) for s in seeds]
    frontiers = [set(net.graph.neighbors(s)) - set(owner) for s in seeds]
    while len(owner) < n:
        growing = [i for i in range(k) if frontiers[i]]
        i = min(growing, key=lambda index: (load[index], index))
        node = min(frontiers[i])
        owner[node] = i
        load[i] += float(traffic[node - 1])
        for frontier in frontiers:
            frontier.discard(node)
        frontiers[i].update(v for v in net.graph.neighbors(node) if v not in owner)

    members = [sorted(v for v, i in owner.items() if i == index) for index in range(k)]
    members.sort(key=lambda group: group[0])
    logging.debug(f"[CLUSTER] k={k} sizes={[len(m) for m in members]}")
    return [SubNetwork(tuple(group), subnetwork(net, group)) for group in members]


# --- Local Search ---
def _one_medians(hops, sites, nearest, fixed=frozenset()):
    """Member minimizing the summed hop count to the rest of its cluster, per site; fixed sites stay put."""
    centers = []
    for index, site in enumerate(sites):
        members = np.nonzero(nearest == index)[0]
        if members.size == 0 or site in fixed:
            centers.append(site)
            continue
        sums = hops[np.ix_(members, members)].sum(axis=1)
        centers.append(int(members[int(np.argmin(sums))]) + 1)
    return centers


def _local_search_sites(net, sites, evaluate, fixed=frozenset()):
    current = tuple(sorted(sites))
    value = evaluate(current)
    all_ids = list(net.ids)
    improved = True
    while improved:
        improved = False

        nearest = np.argmin(net.hop_matrix[:, [s - 1 for s in current]], axis=1)
        recentered = tuple(sorted(set(_one_medians(net.hop_matrix, current, nearest, fixed))))
        if len(recentered) == len(current) and recentered != current:
            candidate_value = evaluate(recentered)
            if candidate_value < value - IMPROVEMENT_TOL:
                current, value, improved = recentered, candidate_value, True
                continue

        best_move, best_value = None, value
        occupied = set(current)
        for index in range(len(current)):
            if current[index] in fixed:
                continue
            for v in all_ids:
                if v in occupied:
                    continue
                candidate = current[:index] + (v,) + current[index + 1:]
                candidate_value = evaluate(candidate)
                if candidate_value < best_value - IMPROVEMENT_TOL:
                    best_move, best_value = tuple(sorted(candidate)), candidate_value
        if best_move is not None:
            current, value, improved = best_move, best_value, True
    return current, value


def local_search(net, placement, cp=None, metric="avg_hops"):
    """Alternate recentering and single-site relocation until neither improves."""
    evaluate = FitnessEvaluator(net, cp, metric)
    sites, _ = _local_search_sites(net, placement.sites, evaluate)
    return make_placement(net, sites)


# --- Genetic Search ---
def _random_individual(pool, size, rng):
    return tuple(sorted(int(v) for v in rng.choice(pool, size=size, replace=False)))


def _seed_weights(weights):
    """Strictly positive Weber weights: idle intersections get the smallest busy weight, all-idle clusters weigh 1."""
    weights = np.asarray(weights, dtype=float)
    busy = weights[weights > 0]
    if busy.size == 0:
        return np.ones_like(weights)
    return np.where(weights > 0, weights, busy.min())


def _weber_seeded_individual(net, mz, sp):
    sites = []
    for cluster in cluster_network(net, mz, sp.seed):
        sub = cluster.network
        problem = WeberProblem(tuple(map(tuple, sub.positions)), tuple(_seed_weights(sub.node_traffic_weights)))
        location = solve(problem, SolverConfig()).location
        sites.append(snap_to_intersection(net, location, cluster.members))
    return tuple(sorted(sites))


def _greedy_extension(pool, size, keep, evaluate):
    """Add the pool site that lowers fitness most, one at a time; ties go to the lowest id."""
    chosen = []
    for _ in range(size):
        remaining = [int(v) for v in pool if int(v) not in chosen]
        chosen.append(min(remaining, key=lambda v: (evaluate(keep + tuple(chosen) + (v,)), v)))
    return tuple(sorted(chosen))


def _initial_population(net, size, sp, rng, pool, keep, evaluate):
    population = []
    if sp.init == "weber":
        if keep:
            population.append(_greedy_extension(pool, size, keep, evaluate))
        else:
            population.append(_weber_seeded_individual(net, size, sp))
    while len(population) < sp.population_size:
        population.append(_random_individual(pool, size, rng))
    return population


def _repair(genes, pool, rng):
    seen, repaired = set(), []
    for gene in genes:
        if gene in seen:
            continue
        seen.add(gene)
        repaired.append(gene)
    if len(repaired) < len(genes):
        unused = np.array(sorted(set(int(v) for v in pool) - seen))
        extra = rng.choice(unused, size=len(genes) - len(repaired), replace=False)
        repaired.extend(int(v) for v in extra)
    return tuple(sorted(repaired))


def _crossover(a, b, pool, rng):
    if len(a) < 2:
        return a, b
    cut = int(rng.integers(1, len(a)))
    return _repair(a[:cut] + b[cut:], pool, rng), _repair(b[:cut] + a[cut:], pool, rng)


def _mutate(individual, pool, rng):
    if len(individual) >= len(pool):
        return individual
    position = int(rng.integers(len(individual)))
    unused = np.array(sorted(set(int(v) for v in pool) - set(individual)))
    genes = list(individual)
    genes[position] = int(rng.choice(unused))
    return tuple(sorted(genes))


def _tournament(population, fitnesses, size, rng):
    contenders = rng.integers(len(population), size=size)
    winner = min(contenders, key=lambda index: (fitnesses[index], index))
    return population[winner]


def _evaluate_population(evaluate, population, workers):
    if workers <= 1:
        return [evaluate(individual) for individual in population]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(evaluate, population))


def _checked_keep(net, mz, keep):
    keep = tuple(sorted(int(s) for s in keep))
    if len(set(keep)) != len(keep):
        raise InvalidInputError(f"kept sites repeat: {keep}")
    if len(keep) > mz:
        raise InvalidInputError(f"cannot keep {len(keep)} sites in a placement of {mz}")
    for site in keep:
        net.check_id(site)
    return keep


def ga_search(net, mz, sp=None, cp=None, keep=()):
    """Genetic search with local search for MZ mix-zone sites; returns (Placement, SearchTrace).

    Sites in `keep` are part of every individual and never move; the search
    only places the remaining MZ - len(keep) sites.
    """
    sp = sp or SearchParams()
    cp = cp or CostParams()
    n = net.size
    if not 1 <= mz <= n:
        raise InvalidInputError(f"mix-zone count must lie in [1, {n}], got {mz}")
    keep = _checked_keep(net, mz, keep)
    evaluate = FitnessEvaluator(net, cp, sp.metric)
    trace = SearchTrace()
    if mz == n or len(keep) == mz:
        sites = tuple(net.ids) if mz == n else keep
        trace.records.append(GenerationRecord(0, evaluate(sites), evaluate(sites), sites))
        return make_placement(net, sites), trace

    kept = set(keep)
    pool = np.array([v for v in net.ids if v not in kept])
    size = mz - len(keep)

    def whole(individual):
        return tuple(sorted(keep + individual))

    def evaluate_free(individual):
        return evaluate(whole(individual))

    rng = np.random.default_rng(sp.seed)
    population = _initial_population(net, size, sp, rng, pool, keep, evaluate)
    best_sites, best_value = None, math.inf
    for generation in range(sp.maxgen):
        fitnesses = _evaluate_population(evaluate_free, population, sp.workers)
        elite_index = min(range(len(population)), key=lambda index: (fitnesses[index], index))
        elite, elite_value = whole(population[elite_index]), fitnesses[elite_index]
        if sp.local_search:
            elite, elite_value = _local_search_sites(net, elite, evaluate, frozenset(keep))
        if elite_value < best_value - IMPROVEMENT_TOL or best_sites is None:
            best_sites, best_value = elite, elite_value
            logging.debug(f"[GA] gen {generation}: new best {best_value:.6g} at {best_sites}")
        trace.records.append(GenerationRecord(generation, best_value, float(np.mean(fitnesses)), best_sites))
        if generation == sp.maxgen - 1:
            break

        children = [tuple(s for s in best_sites if s not in kept)]
        while len(children) < sp.population_size:
            a = _tournament(population, fitnesses, sp.tournament_size, rng)
            b = _tournament(population, fitnesses, sp.tournament_size, rng)
            if rng.random() < sp.pc:
                a, b = _crossover(a, b, pool, rng)
            for child in (a, b):
                if rng.random() < sp.pm:
                    child = _mutate(child, pool, rng)
                if len(children) < sp.population_size:
                    children.append(child)
        population = children

    logging.info(f"[GA] MZ={mz} best {sp.metric}={best_value:.6g} after {sp.maxgen} generations (seed={sp.seed})")
    return make_placement(net, best_sites), trace


def exhaustive_placement(net, mz, cp=None, metric="avg_hops"):
    """Best placement over every MZ-subset; ties go to the lexicographically first."""
    n = net.size
    if not 1 <= mz <= n:
        raise InvalidInputError(f"mix-zone count must lie in [1, {n}], got {mz}")
    if math.comb(n, mz) > EXHAUSTIVE_LIMIT:
        raise OversizeError(f"C({n},{mz}) = {math.comb(n, mz)} placements exceed the limit {EXHAUSTIVE_LIMIT}")
    evaluate = FitnessEvaluator(net, cp, metric)
    best = min(itertools.combinations(net.ids, mz), key=evaluate)
    return make_placement(net, best), evaluate(best)


# --- Normal-Traffic Networks ---
def find_backbone(net):
    """Shortest path between the lexicographically first pair of intersections at maximum hop distance."""
    hops = net.hop_matrix
    longest = int(hops.max())
    a, b = (int(v) + 1 for v in np.argwhere(hops == longest)[0])
    return nx.shortest_path(net.graph, a, b)


def place_normal_traffic(net, mz, cp=None, sp=None):
    """Reduce a line-like network to its backbone and apply the 1-D closed form.

    Intersections are projected onto their nearest backbone position; the
    ordered projection is cut into the optimal line groups and each group's
    median is mapped to its backbone intersection. Networks without a usable
    backbone fall back to ga_search.
    """
    n = net.size
    if mz < 1:
        raise InvalidInputError(f"need at least one mix zone, got MZ={mz}")
    if mz >= n:
        return make_placement(net, net.ids)

    backbone = find_backbone(net)
    hops_to_backbone = net.hop_matrix[:, [v - 1 for v in backbone]]
    coverage = float((hops_to_backbone.min(axis=1) <= 1).mean())
    if coverage < app_settings.BACKBONE_MIN_COVERAGE or len(backbone) < min(n, 2 * mz + 1):
        note = f"no usable backbone (coverage {coverage:.2f}, length {len(backbone)}); used genetic search"
        logging.warning(f"[BACKBONE] {note}")
        placement, _ = ga_search(net, mz, sp or SearchParams(), cp)
        return Placement(placement.sites, placement.assignment, note)

    position = {v: int(np.argmin(hops_to_backbone[v - 1])) for v in net.ids}
    order = sorted(net.ids, key=lambda v: (position[v], v))
    groups = optimal_multi(n, mz).group_sizes
    used, sites, start = set(), [], 0
    for size in groups:
        median = order[start + (size - 1) // 2]
        start += size
        target = position[median]
        # nearest free backbone slot if two medians project onto the same one
        for offset in sorted(range(-len(backbone), len(backbone) + 1), key=lambda o: (abs(o), o)):
            slot = target + offset
            if 0 <= slot < len(backbone) and backbone[slot] not in used:
                used.add(backbone[slot])
                sites.append(backbone[slot])
                break
    logging.debug(f"[BACKBONE] length {len(backbone)}, coverage {coverage:.2f}, sites {sorted(sites)}")
    return make_placement(net, sites)


# --- Deployment Curve ---
def deployment_curve(net, mz_counts, sp=None, cp=None):
    """Average hops, total cost and search steps to the best placement for each MZ."""
    sp = sp or SearchParams()
    cp = cp or CostParams()
    rows = []
    for mz in mz_counts:
        placement, trace = ga_search(net, mz, sp, cp)
        rows.append({
            "mz": mz,
            "avg_hops": fitness(net, placement, cp, "avg_hops"),
            "total_cost": fitness(net, placement, cp, "total_cost"),
            "generations_to_best": trace.generations_to_best,
        })
    return rows
