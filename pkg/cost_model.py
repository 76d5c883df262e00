"""Placement cost model and link-length allocation under a corridor length budget.

A relay path pays Z * d^alpha for every link of length d it crosses; on a line
the total cost CT therefore weights each link by the number of intersections
whose path to their mix zone crosses it.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import networkx as nx
import numpy as np

import settings as app_settings
from errors import InvalidInputError, NoPathError, UnsupportedExponentError
from road_graph import nearest_site_assignment


class AllocationMethod(str, Enum):
    PAPER = "paper_closed_form"
    OPTIMAL = "numerical_optimal"
    UNIFORM = "uniform"


# CLI spellings
METHOD_ALIASES = {
    "paper": AllocationMethod.PAPER,
    "optimal": AllocationMethod.OPTIMAL,
    "uniform": AllocationMethod.UNIFORM,
}


@dataclass(frozen=True)
class CostParams:
    z: float = app_settings.DEFAULT_COST_Z
    alpha: float = app_settings.DEFAULT_COST_ALPHA
    gamma: float = app_settings.DEFAULT_COST_GAMMA
    budget: float = app_settings.DEFAULT_COST_BUDGET

    def __post_init__(self):
        for name in ("z", "alpha", "gamma", "budget"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidInputError(f"cost parameter {name} must be positive, got {value}")
        if self.alpha < 1:
            raise InvalidInputError(f"path exponent alpha must be >= 1, got {self.alpha}")
        if self.gamma < 1:
            raise InvalidInputError(f"path-loss exponent gamma must be >= 1, got {self.gamma}")


@dataclass(frozen=True)
class LinkAllocation:
    lengths: tuple
    weights: tuple
    total_cost: float
    method: AllocationMethod
    sites: tuple = ()


# --- Cost Evaluation ---
def zone_placement_cost(params, d):
    """Cost of one mix-zone link of length d: Z * d^alpha."""
    if not d > 0:
        raise InvalidInputError(f"link length must be positive, got {d}")
    return params.z * d ** params.alpha


def path_relay_cost(params, link_lengths_on_path):
    """Relay cost of a path: the sum of Z * d_i^alpha over its links (0 for an empty path)."""
    return sum(zone_placement_cost(params, d) for d in link_lengths_on_path)


def relay_costs_from(net, site, params):
    """Relay cost of every intersection's length-shortest path to one site (indexed by id - 1)."""
    net.check_id(site)
    _, paths = nx.single_source_dijkstra(net.graph, site, weight="length")
    costs = np.full(net.size, np.inf)
    for node_id, path in paths.items():
        lengths = [net.graph.edges[a, b]["length"] for a, b in zip(path, path[1:])]
        costs[node_id - 1] = path_relay_cost(params, lengths)
    return costs


def total_cost(net, sites, params):
    """CT: every intersection relays to its assigned site along its shortest path."""
    assignment = nearest_site_assignment(net, sites)
    sites = [int(s) for s in sites]
    columns = {site: relay_costs_from(net, site, params) for site in set(sites)}
    cost = 0.0
    for node_id, site_index in assignment.items():
        relay = columns[sites[site_index]][node_id - 1]
        if not math.isfinite(relay):
            raise NoPathError(f"no path from intersection {node_id} to site {sites[site_index]}")
        cost += relay
    return float(cost)


def weighted_link_cost(weights, lengths, params):
    return params.z * sum(w * d ** params.alpha for w, d in zip(weights, lengths))


def deployment_cost_scaling(params, r, i_g):
    """Deployment cost proportional to r^gamma * I(G) (unit proportionality constant)."""
    if not r > 0:
        raise InvalidInputError(f"connection range must be positive, got {r}")
    if i_g < 0:
        raise InvalidInputError(f"intersection count must be non-negative, got {i_g}")
    return r ** params.gamma * i_g


# --- Link Weights ---
def _check_sites(n, sites):
    if n < 2:
        raise InvalidInputError(f"allocation needs at least two intersections, got N={n}")
    sites = [int(s) for s in sites]
    if not sites:
        raise InvalidInputError("allocation needs at least one site")
    if sites != sorted(set(sites)):
        raise InvalidInputError(f"sites must be sorted and distinct, got {sites}")
    if sites[0] < 1 or sites[-1] > n:
        raise InvalidInputError(f"sites must lie in [1, {n}], got {sites}")
    return sites


def segment_bounds(n, sites):
    """Segment ends z_0..z_MZ: site i serves intersections z_{i-1}+1 .. z_i."""
    bounds = [0]
    for left, right in zip(sites, sites[1:]):
        bounds.append((left + right) // 2)
    bounds.append(n)
    return bounds


def line_link_weights(n, sites):
    """How many relay paths cross each link of the line (link i joins i and i+1).

    Links between two segments are crossed by no path and get weight 0.
    """
    if isinstance(sites, int):
        sites = [sites]
    sites = _check_sites(n, sites)
    bounds = segment_bounds(n, sites)
    weights = [0] * (n - 1)
    for index, site in enumerate(sites):
        low, high = bounds[index], bounds[index + 1]
        for link in range(low + 1, high):
            weights[link - 1] = link - low if link < site else high - link
    return weights


# --- Allocators ---
def _allocate(n, sites, params, method):
    sites = _check_sites(n, [sites] if isinstance(sites, int) else sites)
    weights = line_link_weights(n, sites)
    effective = np.maximum(np.array(weights, dtype=float), 1.0)
    if method == AllocationMethod.PAPER:
        shares = effective ** (-1.0 / params.alpha)
    elif method == AllocationMethod.OPTIMAL:
        if params.alpha <= 1:
            raise UnsupportedExponentError(
                f"optimal allocation needs alpha > 1 (got {params.alpha}); the minimizer sits on the boundary"
            )
        shares = effective ** (-1.0 / (params.alpha - 1.0))
    else:
        shares = np.ones_like(effective)
    lengths = params.budget * shares / shares.sum()
    cost = weighted_link_cost(weights, lengths, params)
    logging.debug(f"[COST] N={n} sites={sites} method={method.value} CT={cost:.6g}")
    return LinkAllocation(tuple(float(d) for d in lengths), tuple(weights), float(cost), method, tuple(sites))


def allocate_links_paper(n, site, params):
    """Closed form from the AM-GM equality condition: d_i proportional to w_i^(-1/alpha)."""
    return _allocate(n, [site], params, AllocationMethod.PAPER)


def allocate_links_optimal(n, site, params):
    """Exact minimizer of sum w_i d_i^alpha subject to sum d_i = budget: d_i proportional to w_i^(-1/(alpha-1))."""
    return _allocate(n, [site], params, AllocationMethod.OPTIMAL)


def allocate_links_uniform(n, sites, params):
    return _allocate(n, sites, params, AllocationMethod.UNIFORM)


def multi_site_allocate(n, sites, params, method=AllocationMethod.PAPER):
    """Allocate the budget over a line served by several mix zones.

    The line is split at the midpoints between consecutive sites; each segment
    gets the chosen single-site rule and one common scale makes the lengths sum
    to the budget.
    """
    method = AllocationMethod(METHOD_ALIASES.get(method, method))
    return _allocate(n, sites, params, method)


# --- Allocation Oracles ---
def _simplex_projection(v, total):
    """Euclidean projection of v onto {x >= 0, sum x = total}."""
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - total
    ranks = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - cumulative / ranks > 0)[0][-1]
    theta = cumulative[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def grid_allocation(weights, params, steps=None):
    """Exhaustive search over a two-link simplex grid."""
    if len(weights) != 2:
        raise InvalidInputError(f"grid oracle handles exactly two links, got {len(weights)}")
    steps = steps or app_settings.DEFAULT_ORACLE_GRID_STEPS
    first = np.linspace(0.0, params.budget, steps + 1)
    second = params.budget - first
    costs = params.z * (weights[0] * first ** params.alpha + weights[1] * second ** params.alpha)
    best = int(np.argmin(costs))
    return (float(first[best]), float(second[best])), float(costs[best])


def search_allocation(weights, params, restarts=None, seed=0, max_iters=5000):
    """Random-restart projected gradient descent on the budget simplex."""
    restarts = restarts or app_settings.DEFAULT_ORACLE_RESTARTS
    w = np.array(weights, dtype=float)
    rng = np.random.default_rng(seed)
    budget, alpha, z = params.budget, params.alpha, params.z

    def cost(d):
        return z * float(np.sum(w * d ** alpha))

    best_lengths, best_cost = None, math.inf
    for _ in range(restarts):
        d = _simplex_projection(rng.random(len(w)), budget)
        current = cost(d)
        step = budget
        for _ in range(max_iters):
            grad = z * alpha * w * d ** (alpha - 1)
            while True:
                candidate = _simplex_projection(d - step * grad, budget)
                candidate_cost = cost(candidate)
                if candidate_cost <= current - 1e-4 * float(grad @ (d - candidate)) or step < 1e-16:
                    break
                step *= 0.5
            moved = float(np.abs(candidate - d).max())
            d, current = candidate, candidate_cost
            step *= 2.0
            if moved < 1e-13 * budget:
                break
        if current < best_cost:
            best_lengths, best_cost = d, current
    return tuple(float(v) for v in best_lengths), best_cost


def allocation_rows(allocation, params):
    """CSV rows: link_index, length, weight, method, cost."""
    return [
        {
            "link_index": index + 1,
            "length": repr(length),
            "weight": weight,
            "method": allocation.method.value,
            "cost": repr(params.z * weight * length ** params.alpha),
        }
        for index, (length, weight) in enumerate(zip(allocation.lengths, allocation.weights))
    ]

