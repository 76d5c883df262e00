import dataclasses
import math
from fractions import Fraction

import numpy as np
import pytest

from errors import InvalidInputError
from linear_placement import optimal_single
from placement_search import SearchParams, fitness, make_placement
from privacy_sim import (SimConfig, ZoneTraversal, admissible_rate, anonymity_set_sizes, build_report,
                         capacity_bound, capacity_curve, cumulative_entropy, enumerate_tracking_success,
                         journey_tracking_success, privacy_curve, simulate, tracking_success, zone_demand)
from road_graph import generate_grid, generate_line, generate_poisson


def journeys(sizes_per_vehicle):
    """Traversals with preset anonymity set sizes, one vehicle per entry."""
    traversals = []
    for vehicle, sizes in enumerate(sizes_per_vehicle, start=1):
        for step, k in enumerate(sizes):
            traversals.append(ZoneTraversal(vehicle, step, 10.0 * step, 10.0 * step, k))
    return traversals


@pytest.fixture(scope="module")
def grid5():
    return generate_grid(5, 5)


def test_lone_vehicle_is_its_own_anonymity_set(line5):
    traversals = simulate(line5, [3], SimConfig(vehicle_count=1, trips_per_vehicle=6, seed=3))
    assert traversals
    assert all(t.anonymity_set_size == 1 for t in traversals)


def test_simultaneous_vehicles_share_a_set():
    sized = anonymity_set_sizes([ZoneTraversal(1, 0, 10.0, 10.0), ZoneTraversal(2, 0, 10.0, 10.0)], window=5.0)
    assert [t.anonymity_set_size for t in sized] == [2, 2]


def test_single_intersection_network_mixes_everyone():
    net = generate_line(1)
    cfg = SimConfig(vehicle_count=2, trips_per_vehicle=1, zone_dwell_window=100.0, duration=50.0)
    traversals = simulate(net, [1], cfg)
    assert [t.anonymity_set_size for t in traversals] == [2, 2]


def test_window_and_mixing_mode():
    raw = [ZoneTraversal(1, 0, 0.0, 0.0), ZoneTraversal(2, 1, 3.0, 3.0), ZoneTraversal(3, 0, 20.0, 20.0)]
    assert [t.anonymity_set_size for t in anonymity_set_sizes(raw, 5.0, "zone")] == [1, 1, 1]
    assert [t.anonymity_set_size for t in anonymity_set_sizes(raw, 5.0, "network")] == [2, 2, 1]
    assert [t.anonymity_set_size for t in anonymity_set_sizes(raw, 20.0, "zone")] == [2, 1, 2]


def test_repeat_visits_count_a_vehicle_once():
    raw = [ZoneTraversal(1, 0, 0.0, 0.0), ZoneTraversal(1, 0, 1.0, 1.0), ZoneTraversal(2, 0, 2.0, 2.0)]
    assert [t.anonymity_set_size for t in anonymity_set_sizes(raw, 5.0)] == [2, 2, 2]


def test_simulation_is_deterministic(grid5):
    cfg = SimConfig(vehicle_count=40, seed=12)
    assert simulate(grid5, [7, 19], cfg) == simulate(grid5, [7, 19], cfg)


def test_traffic_does_not_depend_on_the_placement(grid5):
    cfg = SimConfig(vehicle_count=30, seed=4)
    few = simulate(grid5, [13], cfg)
    many = simulate(grid5, [13, 1], cfg)
    at_center = [(t.vehicle, t.entry_time) for t in many if t.zone == 0]
    assert at_center == [(t.vehicle, t.entry_time) for t in few]


def test_traversals_are_well_formed(grid5):
    cfg = SimConfig(vehicle_count=50, trips_per_vehicle=4, seed=9)
    traversals = simulate(grid5, make_placement(grid5, [7, 13, 19]), cfg)
    assert all(t.exit_time >= t.entry_time >= 0 for t in traversals)
    assert all(1 <= t.anonymity_set_size <= cfg.vehicle_count for t in traversals)
    assert {t.zone for t in traversals} <= {0, 1, 2}


def test_mean_set_grows_with_traffic(grid5):
    means = []
    for count in (50, 100, 200):
        traversals = simulate(grid5, [13], SimConfig(vehicle_count=count, seed=1))
        means.append(np.mean([t.anonymity_set_size for t in traversals]))
    assert means[0] < means[1] < means[2]


def test_unknown_site_rejected(grid5):
    with pytest.raises(InvalidInputError):
        simulate(grid5, [26], SimConfig(vehicle_count=1))


@pytest.mark.parametrize("kwargs", [{"vehicle_count": 0}, {"mean_speed": -1.0}, {"zone_dwell_window": 0.0},
                                    {"mixing": "global"}, {"tracking": "guess"}, {"mc_trials": 0}])
def test_sim_config_validated(kwargs):
    with pytest.raises(InvalidInputError):
        SimConfig(**kwargs)


def test_tracking_with_singleton_sets():
    traversals = journeys([[1, 1, 1], [1, 1]])
    for j in (1, 2):
        assert tracking_success(traversals, j).value == 1
    assert tracking_success(traversals, 3).value == 1
    assert tracking_success(traversals, 3).population == 1


def test_tracking_sets_of_two():
    traversals = journeys([[2, 2, 2]])
    assert tracking_success(traversals, 3).value == Fraction(1, 8)
    assert enumerate_tracking_success(traversals, 3) == Fraction(1, 8)


def test_tracking_empty_population_is_flagged():
    result = tracking_success(journeys([[2]]), 2)
    assert result.empty
    assert result.value == 0
    assert result.population == 0


def test_tracking_rejects_bad_j():
    with pytest.raises(InvalidInputError):
        tracking_success(journeys([[2]]), 0)
    with pytest.raises(InvalidInputError):
        tracking_success(journeys([[2, 2]]), 2, cohort=1)


@pytest.mark.parametrize("sizes", [[[2, 3], [1, 4], [3]], [[2, 2, 2], [5, 1, 1, 1]], [[1], [2], [3], [4]]])
def test_exact_tracking_matches_enumeration(sizes):
    traversals = journeys(sizes)
    for j in (1, 2, 3):
        assert tracking_success(traversals, j).value == enumerate_tracking_success(traversals, j)


def test_monte_carlo_agrees_with_exact():
    rng = np.random.default_rng(17)
    size_lists = [[int(k) for k in rng.integers(1, 5, 3)] for _ in range(20)]
    traversals = journeys(size_lists)
    exact = tracking_success(traversals, 2)
    estimate = tracking_success(traversals, 2, mode="monte_carlo", trials=10000, seed=3)
    chances = [1.0 / (sizes[0] * sizes[1]) for sizes in size_lists]
    sigma = math.sqrt(sum(p * (1 - p) for p in chances)) / len(chances) / math.sqrt(10000)
    assert abs(estimate.value - float(exact.value)) <= 4 * sigma
    assert estimate.mode == "monte_carlo"
    assert estimate.population == exact.population == 20


def test_tracking_non_increasing_in_j_for_a_fixed_cohort():
    traversals = journeys([[2, 1, 3], [1, 1, 2, 2], [4, 4, 4]])
    curve = [tracking_success(traversals, j, cohort=3).value for j in (1, 2, 3)]
    assert curve == sorted(curve, reverse=True)
    assert all(0 <= ts <= 1 for ts in curve)


def test_cumulative_entropy():
    traversals = journeys([[2, 4], [1, 1]])
    assert cumulative_entropy(traversals, 1).bits == pytest.approx(3.0)
    assert cumulative_entropy(traversals, 2).bits == 0.0
    missing = cumulative_entropy(traversals, 9)
    assert missing.empty and missing.bits == 0.0


def test_entropy_is_additive():
    first, second = journeys([[2, 3]]), journeys([[4, 5, 6]])
    whole = cumulative_entropy(first + second, 1).bits
    assert whole == pytest.approx(cumulative_entropy(first, 1).bits + cumulative_entropy(second, 1).bits)


def test_capacity_bound():
    assert capacity_bound(100, 10, 2) == 5
    assert capacity_bound(100, 10, 1) == 2 * capacity_bound(100, 10, 2)
    lambda_min = optimal_single(5).avg_hops
    assert capacity_bound(12, 5, lambda_min) == Fraction(2)
    assert capacity_bound(12.0, 5, 1.2) == pytest.approx(2.0)
    for args in ((0, 5, 1), (12, 0, 1), (12, 5, 0)):
        with pytest.raises(InvalidInputError):
            capacity_bound(*args)


def test_capacity_curve_and_admissible_rate():
    curve = capacity_curve(5, [1, 5], 12)
    assert curve[1] == 2
    assert curve[5] == math.inf
    assert admissible_rate(3, 12, 5, Fraction(6, 5)) == 2
    assert admissible_rate(1, 12, 5, Fraction(6, 5)) == 1
    with pytest.raises(InvalidInputError):
        admissible_rate(-1, 12, 5, 1)


def test_zone_demand_is_arrivals_per_second():
    traversals = [ZoneTraversal(1, 0, 1.0, 1.0), ZoneTraversal(2, 0, 4.0, 4.0), ZoneTraversal(3, 0, 9.0, 9.0),
                  ZoneTraversal(1, 1, 5.0, 5.0)]
    assert zone_demand(traversals, 10.0) == {0: pytest.approx(0.3), 1: pytest.approx(0.1)}
    assert zone_demand([], 10.0) == {}
    with pytest.raises(InvalidInputError):
        zone_demand(traversals, 0.0)


def test_simulated_demand_checked_against_capacity(grid5):
    cfg = SimConfig(vehicle_count=60, seed=2)
    placement = make_placement(grid5, [7, 19])
    traversals = simulate(grid5, placement, cfg)
    report = build_report(grid5, placement, traversals, cfg, max_j=2)
    busiest = max(sum(t.zone == zone for t in traversals) for zone in (0, 1))
    assert report.demand_phi == pytest.approx(busiest / cfg.duration)
    assert report.demand_phi > 0

    lambda_avg = fitness(grid5, placement)
    assert report.within_capacity
    assert report.demand_phi * lambda_avg * grid5.size <= cfg.intersection_strength
    assert report.admitted_phi == report.demand_phi

    # half the strength the measured demand needs
    tight = dataclasses.replace(cfg, intersection_strength=report.demand_phi * lambda_avg * grid5.size / 2)
    squeezed = build_report(grid5, placement, traversals, tight, max_j=2)
    assert not squeezed.within_capacity
    assert squeezed.capacity_phi_max == pytest.approx(report.demand_phi / 2)
    assert squeezed.admitted_phi == pytest.approx(squeezed.capacity_phi_max)
    assert squeezed.admitted_phi * lambda_avg * grid5.size <= tight.intersection_strength * (1 + 1e-9)
    assert squeezed.to_dict()["within_capacity"] is False


def test_report_uses_the_configured_tracking_mode(grid5):
    cfg = SimConfig(vehicle_count=80, trips_per_vehicle=5, seed=6, tracking="monte_carlo", mc_trials=3000)
    placement = make_placement(grid5, [7, 13, 19])
    traversals = simulate(grid5, placement, cfg)
    report = build_report(grid5, placement, traversals, cfg, max_j=3)
    assert report.tracking == "monte_carlo"
    for j in (1, 2, 3):
        drawn = tracking_success(traversals, j, "monte_carlo", cohort=3, trials=3000, seed=6)
        assert report.ts_curve[j] == drawn.value
    values = [report.ts_curve[j] for j in (1, 2, 3)]
    assert values == sorted(values, reverse=True)
    exact = build_report(grid5, placement, traversals, dataclasses.replace(cfg, tracking="exact"), max_j=3)
    assert report.ts_curve[2] == pytest.approx(exact.ts_curve[2], abs=0.05)


def test_journey_tracking_success():
    traversals = journeys([[2, 2], [1], [3]])
    assert journey_tracking_success(traversals, 3) == (Fraction(1, 4) + 1 + Fraction(1, 3)) / 3
    # vehicle 4 never meets a zone and keeps its pseudonym
    assert journey_tracking_success(traversals, 4) == (Fraction(1, 4) + 1 + Fraction(1, 3) + 1) / 4
    with pytest.raises(InvalidInputError):
        journey_tracking_success(traversals, 0)


def test_report_shape(grid5):
    cfg = SimConfig(vehicle_count=80, trips_per_vehicle=5, seed=6)
    placement = make_placement(grid5, [7, 13, 19])
    report = build_report(grid5, placement, simulate(grid5, placement, cfg), cfg, max_j=3)
    assert sorted(report.ts_curve) == [1, 2, 3]
    values = [report.ts_curve[j] for j in (1, 2, 3)]
    assert values == sorted(values, reverse=True)
    assert len(report.entropy_per_vehicle) == 80
    assert all(bits >= 0 for bits in report.entropy_per_vehicle.values())
    assert report.mean_anonymity_set >= 1
    summary = report.to_dict()
    assert set(summary["ts_curve"]) == {"1", "2", "3"}


def test_privacy_curve_rejects_out_of_range_counts(grid5):
    with pytest.raises(InvalidInputError):
        privacy_curve(grid5, SimConfig(vehicle_count=5), [0, 2])
    with pytest.raises(InvalidInputError):
        privacy_curve(grid5, SimConfig(vehicle_count=5), [26])


def test_privacy_curve_threads_match_serial(grid5):
    cfg = SimConfig(vehicle_count=40, seed=3)
    sp = SearchParams(population_size=8, maxgen=4, seed=3)
    serial = privacy_curve(grid5, cfg, [1, 3], sp, max_j=2)
    threaded = privacy_curve(grid5, cfg, [1, 3], sp, max_j=2, workers=2)
    assert list(serial) == [1, 3]
    for mz in (1, 3):
        assert serial[mz].sites == threaded[mz].sites
        assert serial[mz].report.ts_curve == threaded[mz].report.ts_curve


def test_privacy_curve_grows_its_placements(grid5):
    cfg = SimConfig(vehicle_count=60, trips_per_vehicle=4, seed=5)
    sp = SearchParams(population_size=8, maxgen=4, seed=5)
    curve = privacy_curve(grid5, cfg, [4, 1, 2], sp, max_j=2)
    assert list(curve) == [4, 1, 2]
    assert set(curve[1].sites) <= set(curve[2].sites) <= set(curve[4].sites)
    assert [len(curve[mz].sites) for mz in (1, 2, 4)] == [1, 2, 4]
    entropy = [curve[mz].report.mean_entropy for mz in (1, 2, 4)]
    journey = [curve[mz].report.journey_ts for mz in (1, 2, 4)]
    assert entropy == sorted(entropy)
    assert journey == sorted(journey, reverse=True)


@pytest.mark.slow
def test_more_zones_mean_more_entropy_and_shorter_tracked_journeys():
    net = generate_poisson(2000.0, 2000.0, 2.5e-5, seed=42, connection_range=400.0)
    cfg = SimConfig(vehicle_count=200, trips_per_vehicle=6, zone_dwell_window=1800.0, seed=1)
    assert cfg.mixing == "zone"
    sp = SearchParams(population_size=20, maxgen=10, seed=1)
    curve = privacy_curve(net, cfg, [1, 2, 4, 8], sp, max_j=2)
    reports = [curve[mz].report for mz in (1, 2, 4, 8)]
    entropy = [report.mean_entropy for report in reports]
    journey = [report.journey_ts for report in reports]
    assert all(b >= a for a, b in zip(entropy, entropy[1:]))
    assert all(b <= a for a, b in zip(journey, journey[1:]))
    assert entropy[-1] > entropy[0]
