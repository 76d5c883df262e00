"""Optimal mix-zone placement on a line of N intersections.

Every average here is an exact Fraction: the closed forms are rationals and
the enumeration oracle has to agree with them to the last digit.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

import settings as app_settings
from errors import InvalidInputError, OversizeError

# Combinations evaluated per numpy batch in the oracle
ORACLE_BATCH = 20000


@dataclass(frozen=True)
class LinearPlacementResult:
    sites: tuple
    avg_hops: Fraction
    group_sizes: tuple
    case: str = ""
    ties: tuple = ()


def _check_n(n):
    if n < 1:
        raise InvalidInputError(f"line needs at least one intersection, got N={n}")


def avg_hops_for_sites(n, sites):
    """Exact mean hop distance from each of 1..N to its nearest site."""
    _check_n(n)
    if not sites:
        raise InvalidInputError("at least one site is required")
    total = sum(min(abs(i - s) for s in sites) for i in range(1, n + 1))
    return Fraction(total, n)


def group_sizes_for_sites(n, sites):
    """Sizes of the groups formed by assigning each intersection to its nearest site (ties low)."""
    ordered = sorted(sites)
    sizes = [0] * len(ordered)
    for i in range(1, n + 1):
        distances = [abs(i - s) for s in ordered]
        sizes[distances.index(min(distances))] += 1
    return tuple(sizes)


def _single_site_ties(n):
    # even N: both middle intersections reach N/4
    low, high = (n + 1) // 2, (n + 2) // 2
    return ((low,), (high,)) if low != high else ()


def optimal_single(n):
    """Best single mix-zone site on a line (the median intersection)."""
    _check_n(n)
    if n % 2 == 0:
        avg = Fraction(n, 4)
    else:
        avg = Fraction(n * n - 1, 4 * n)
    return LinearPlacementResult(
        sites=((n + 1) // 2,),
        avg_hops=avg,
        group_sizes=(n,),
        case="single",
        ties=_single_site_ties(n),
    )


def _case_bound(n, mz, q, h):
    """Closed-form minimum of the average hop count for the partition case at hand."""
    if h == 0:
        if q % 2 == 1:
            return "odd", Fraction(mz * (q * q - 1), 4 * n)
        return "even", Fraction(n, 4 * mz)
    # H groups carry C_mv + 1 intersections, the other MZ - H carry C_mv; exactly one
    # of the two sizes is odd and each odd group loses 1/4 against the square bound
    odd_groups = mz - h if q % 2 == 1 else h
    numerator = h * (q + 1) ** 2 + (mz - h) * q * q - odd_groups
    return ("remainder_odd" if q % 2 == 1 else "remainder_even"), Fraction(numerator, 4 * n)


def optimal_multi(n, mz):
    """Closed-form optimal placement of MZ mix zones on a line of N intersections.

    The line is cut into MZ contiguous groups whose sizes differ by at most one
    (the larger groups first) and each group is served from its median.
    """
    _check_n(n)
    if mz < 1:
        raise InvalidInputError(f"need at least one mix zone, got MZ={mz}")
    if mz >= n:
        return LinearPlacementResult(
            sites=tuple(range(1, n + 1)),
            avg_hops=Fraction(0),
            group_sizes=(1,) * n,
            case="saturated",
        )
    if mz == 1:
        return optimal_single(n)

    q, h = divmod(n, mz)
    sizes = [q + 1] * h + [q] * (mz - h)
    sites = []
    start = 1
    for size in sizes:
        sites.append(start + (size - 1) // 2)
        start += size
    case, avg = _case_bound(n, mz, q, h)
    logging.debug(f"[LINEAR] N={n} MZ={mz} C_mv={q} H={h} case={case} avg_hops={avg}")
    return LinearPlacementResult(tuple(sites), avg, tuple(sizes), case)


def oracle_multi(n, mz):
    """Globally optimal placement by enumerating every MZ-subset of intersections.

    Limited to N <= 30 and MZ <= 6; larger instances raise OversizeError.
    """
    _check_n(n)
    if mz < 1:
        raise InvalidInputError(f"need at least one mix zone, got MZ={mz}")
    if n > app_settings.ORACLE_MAX_N or mz > app_settings.ORACLE_MAX_MZ:
        raise OversizeError(
            f"oracle limited to N <= {app_settings.ORACLE_MAX_N} and MZ <= {app_settings.ORACLE_MAX_MZ}, "
            f"got N={n}, MZ={mz}"
        )
    k = min(mz, n)
    nodes = np.arange(1, n + 1, dtype=np.int16)
    best_total, best_sites = None, None
    combos = itertools.combinations(range(1, n + 1), k)
    while True:
        batch = np.array(list(itertools.islice(combos, ORACLE_BATCH)), dtype=np.int16)
        if batch.size == 0:
            break
        batch = batch.reshape(-1, k)
        # distance from every intersection to its nearest site, per candidate subset
        nearest = np.abs(nodes[None, :, None] - batch[:, None, :]).min(axis=2)
        totals = nearest.sum(axis=1, dtype=np.int64)
        index = int(np.argmin(totals))
        if best_total is None or totals[index] < best_total:
            best_total, best_sites = int(totals[index]), tuple(int(s) for s in batch[index])

    return LinearPlacementResult(
        sites=best_sites,
        avg_hops=Fraction(best_total, n),
        group_sizes=group_sizes_for_sites(n, best_sites),
        case="oracle",
    )
