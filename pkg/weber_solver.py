# START OF FILE weber_solver.py

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

import settings as app_settings
from errors import CoincidentVertexError, InputFormatError, InvalidInputError

SOLVER_MODES = ("weiszfeld", "smoothed_gradient")


# --- Problem / Config / Solution ---
@dataclass(frozen=True)
class WeberProblem:
    """Weighted planar point set; region is an optional (xmin, ymin, xmax, ymax) box."""
    points: tuple
    weights: tuple = None
    region: tuple = None

    def __post_init__(self):
        if len(self.points) == 0:
            raise InvalidInputError("Weber problem needs at least one point")
        points = tuple((float(x), float(y)) for x, y in self.points)
        if not all(math.isfinite(v) for p in points for v in p):
            raise InvalidInputError("Weber points must be finite")
        weights = (1.0,) * len(points) if self.weights is None else tuple(float(w) for w in self.weights)
        if len(weights) != len(points):
            raise InvalidInputError(f"{len(weights)} weights for {len(points)} points")
        if not all(w > 0 and math.isfinite(w) for w in weights):
            raise InvalidInputError("Weber weights must be positive")
        if self.region is not None:
            xmin, ymin, xmax, ymax = (float(v) for v in self.region)
            if not (xmin <= xmax and ymin <= ymax):
                raise InvalidInputError(f"invalid region {self.region}")
            object.__setattr__(self, "region", (xmin, ymin, xmax, ymax))
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def xy(self):
        return np.array(self.points, dtype=float)

    @property
    def w(self):
        return np.array(self.weights, dtype=float)

    @property
    def diameter(self):
        xy = self.xy
        return float(np.hypot(*(xy.max(axis=0) - xy.min(axis=0))))


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = app_settings.DEFAULT_WEBER_EPSILON
    step_tol: float = None
    max_iters: int = app_settings.DEFAULT_WEBER_MAX_ITERS
    mode: str = app_settings.DEFAULT_WEBER_MODE

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidInputError(f"epsilon must be positive, got {self.epsilon}")
        if self.step_tol is not None and not self.step_tol > 0:
            raise InvalidInputError(f"step_tol must be positive, got {self.step_tol}")
        if self.max_iters < 1:
            raise InvalidInputError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.mode not in SOLVER_MODES:
            raise InvalidInputError(f"unknown solver mode '{self.mode}'")

    def tolerance_for(self, problem):
        if self.step_tol is not None:
            return self.step_tol
        return max(app_settings.DEFAULT_WEBER_STEP_TOL_FACTOR * problem.diameter, 1e-12)


@dataclass(frozen=True)
class WeberSolution:
    location: tuple
    objective: float
    iterations: int
    at_vertex: int = None
    gradient_norm: float = 0.0
    converged: bool = True
    history: tuple = field(default=(), compare=False)


@dataclass(frozen=True)
class VertexTest:
    optimal: bool
    descend_direction: tuple
    omega: float
    own_weight: float = 0.0


# --- Objective and Derivatives ---
def _distances(problem, at):
    return np.hypot(*(problem.xy - np.asarray(at, dtype=float)).T)


def objective(problem, at):
    """Weighted sum of Euclidean distances from `at` to every point."""
    return float(problem.w @ _distances(problem, at))


def smoothed_objective(problem, at, epsilon):
    d = _distances(problem, at)
    return float(problem.w @ np.sqrt(d * d + epsilon * epsilon))


def gradient(problem, at):
    """Sum of w_i times the unit vector from point i to `at`."""
    at = np.asarray(at, dtype=float)
    d = _distances(problem, at)
    hits = np.nonzero(d == 0)[0]
    if hits.size:
        raise CoincidentVertexError(int(hits[0]))
    g = ((problem.w / d)[:, None] * (at - problem.xy)).sum(axis=0)
    return (float(g[0]), float(g[1]))


def smoothed_gradient(problem, at, epsilon):
    at = np.asarray(at, dtype=float)
    d = _distances(problem, at)
    scale = problem.w / np.sqrt(d * d + epsilon * epsilon)
    g = (scale[:, None] * (at - problem.xy)).sum(axis=0)
    return (float(g[0]), float(g[1]))


def force_balance(problem, at):
    """Resultant pull on `at` in complex form: sum of w_i (z_i - z) / |z_i - z|.

    Zero at an interior optimum (the equilibrium of unit forces); points that
    coincide with `at` exert no pull.
    """
    z = complex(*at)
    total = 0j
    for (x, y), w in zip(problem.points, problem.weights):
        delta = complex(x, y) - z
        if delta != 0:
            total += w * delta / abs(delta)
    return total


def pull_angles(problem, at):
    """Directions (degrees, in [0, 360)) from `at` toward every point not located at `at`."""
    z = complex(*at)
    angles = []
    for x, y in problem.points:
        delta = complex(x, y) - z
        if delta != 0:
            angles.append(math.degrees(math.atan2(delta.imag, delta.real)) % 360.0)
    return angles


def vertex_test(problem, k):
    """Optimality test at data point k.

    The pull of the other points has magnitude omega_k; point k is the minimizer
    iff omega_k <= w_k (points stacked on k add their weight to w_k). Otherwise
    the descent direction is the pull scaled by (omega_k - w_k) / omega_k.
    """
    if not 0 <= k < len(problem.points):
        raise InvalidInputError(f"point index {k} out of range")
    xy, w = problem.xy, problem.w
    delta = xy - xy[k]
    d = np.hypot(*delta.T)
    stacked = d == 0
    others = ~stacked
    pull = ((w[others] / d[others])[:, None] * delta[others]).sum(axis=0) if others.any() else np.zeros(2)
    omega = float(np.hypot(*pull))
    own_weight = float(w[stacked].sum())
    if omega <= own_weight:
        return VertexTest(True, (0.0, 0.0), omega, own_weight)
    direction = ((omega - own_weight) / omega) * pull
    return VertexTest(False, (float(direction[0]), float(direction[1])), omega, own_weight)


# --- Solvers ---
def weighted_centroid(problem):
    w = problem.w
    c = (w[:, None] * problem.xy).sum(axis=0) / w.sum()
    return (float(c[0]), float(c[1]))


def _project(problem, at):
    if problem.region is None:
        return at
    xmin, ymin, xmax, ymax = problem.region
    return np.array([min(max(at[0], xmin), xmax), min(max(at[1], ymin), ymax)])


def _best_vertex(problem):
    """Index of the data point with the smallest objective."""
    values = [objective(problem, p) for p in problem.points]
    return int(np.argmin(values))


def _vertex_solution(problem, k, iterations, history, test):
    location = problem.points[k]
    return WeberSolution(
        location=location,
        objective=objective(problem, location),
        iterations=iterations,
        at_vertex=k,
        gradient_norm=max(0.0, test.omega - test.own_weight),
        converged=True,
        history=tuple(history),
    )


def _kuhn_step(problem, k, test):
    """Step off a non-optimal data point along its descent direction."""
    xy, w = problem.xy, problem.w
    d = np.hypot(*(xy - xy[k]).T)
    others = d > 0
    denominator = float((w[others] / d[others]).sum())
    direction = np.array(test.descend_direction)
    # pull scaled by (omega - w_k)/omega divided by sum of w_i/d_i is the modified Weiszfeld step
    return xy[k] + direction / denominator


def solve(problem, cfg=None):
    """Weiszfeld fixed-point iteration from the weighted centroid.

    Data points are screened first with vertex_test (the optimum sits on a
    vertex exactly when that vertex passes), and an iterate that lands within
    step_tol of a point is tested there and pushed off if not optimal.
    """
    cfg = cfg or SolverConfig()
    tol = cfg.tolerance_for(problem)
    if len(problem.points) == 1:
        return WeberSolution(problem.points[0], 0.0, 0, at_vertex=0, history=(0.0,))

    candidate = _best_vertex(problem)
    test = vertex_test(problem, candidate)
    if test.optimal and (problem.region is None or np.allclose(_project(problem, problem.xy[candidate]), problem.xy[candidate])):
        logging.debug(f"[WEBER] Point {candidate} passes the vertex test (omega={test.omega:.6g})")
        return _vertex_solution(problem, candidate, 0, [objective(problem, problem.points[candidate])], test)

    xy, w = problem.xy, problem.w
    x = _project(problem, np.array(weighted_centroid(problem)))
    current = objective(problem, x)
    history = [current]
    for iteration in range(1, cfg.max_iters + 1):
        d = np.hypot(*(xy - x).T)
        k = int(np.argmin(d))
        if d[k] < tol:
            test = vertex_test(problem, k)
            if test.optimal:
                return _vertex_solution(problem, k, iteration, history, test)
            x_new = _project(problem, _kuhn_step(problem, k, test))
        else:
            inverse = w / d
            x_new = _project(problem, (inverse[:, None] * xy).sum(axis=0) / inverse.sum())
        new_value = objective(problem, x_new)
        moved = float(np.hypot(*(x_new - x)))
        x, current = x_new, new_value
        history.append(current)
        if moved < tol:
            return _interior_solution(problem, x, iteration, history, converged=True)

    logging.warning(f"[WEBER] Weiszfeld stopped after {cfg.max_iters} iterations without converging")
    return _interior_solution(problem, x, cfg.max_iters, history, converged=False)


def _interior_solution(problem, x, iterations, history, converged):
    location = (float(x[0]), float(x[1]))
    try:
        g = gradient(problem, location)
        g_norm = math.hypot(*g)
        at_vertex = None
    except CoincidentVertexError as e:
        g_norm, at_vertex = 0.0, e.index
    return WeberSolution(location, objective(problem, location), iterations, at_vertex, g_norm, converged,
                         tuple(history))


def solve_smoothed(problem, cfg=None):
    """Gradient descent on the epsilon-smoothed objective with backtracking line search.

    The first trial step is 1 / sum(w_i / sqrt(d_i^2 + eps^2)), i.e. a smoothed
    Weiszfeld step, halved until the Armijo condition holds.
    """
    cfg = cfg or SolverConfig(mode="smoothed_gradient")
    tol = cfg.tolerance_for(problem)
    eps = cfg.epsilon
    xy, w = problem.xy, problem.w
    x = _project(problem, np.array(weighted_centroid(problem)))
    current = smoothed_objective(problem, x, eps)
    history = [objective(problem, x)]
    g = np.array(smoothed_gradient(problem, x, eps))
    for iteration in range(1, cfg.max_iters + 1):
        g_norm = float(np.hypot(*g))
        if g_norm == 0.0:
            return _smoothed_solution(problem, x, iteration - 1, history, g_norm, True)
        d = np.hypot(*(xy - x).T)
        step = 1.0 / float((w / np.sqrt(d * d + eps * eps)).sum())
        while True:
            x_new = _project(problem, x - step * g)
            new_value = smoothed_objective(problem, x_new, eps)
            if new_value <= current - 1e-4 * float(g @ (x - x_new)) or step < 1e-300:
                break
            step *= 0.5
        moved = float(np.hypot(*(x_new - x)))
        x, current = x_new, new_value
        g = np.array(smoothed_gradient(problem, x, eps))
        history.append(objective(problem, x))
        if moved < tol:
            return _smoothed_solution(problem, x, iteration, history, float(np.hypot(*g)), True)

    logging.warning(f"[WEBER] Smoothed descent stopped after {cfg.max_iters} iterations (eps={eps})")
    return _smoothed_solution(problem, x, cfg.max_iters, history, float(np.hypot(*g)), False)


def _smoothed_solution(problem, x, iterations, history, g_norm, converged):
    location = (float(x[0]), float(x[1]))
    return WeberSolution(location, objective(problem, location), iterations, None, g_norm, converged,
                         tuple(history))


def solve_with(problem, cfg):
    """Dispatch on cfg.mode."""
    return solve_smoothed(problem, cfg) if cfg.mode == "smoothed_gradient" else solve(problem, cfg)


def grid_search_weber(problem, resolution=1000, bounds=None):
    """Dense grid oracle over `bounds` (default: bounding box of the points)."""
    xy, w = problem.xy, problem.w
    if bounds is None:
        (xmin, ymin), (xmax, ymax) = xy.min(axis=0), xy.max(axis=0)
    else:
        xmin, ymin, xmax, ymax = bounds
    xs = np.linspace(xmin, xmax, resolution)
    ys = np.linspace(ymin, ymax, resolution)
    best_value, best_location = math.inf, None
    for y in ys:
        # one grid row at a time keeps memory at resolution x points
        values = (w[None, :] * np.hypot(xs[:, None] - xy[None, :, 0], y - xy[None, :, 1])).sum(axis=1)
        index = int(np.argmin(values))
        if values[index] < best_value:
            best_value, best_location = float(values[index]), (float(xs[index]), float(y))
    return best_location, best_value


# --- Road-Network Bound ---
def avg_hops_lower_bound(net, site):
    """Mean over intersections of ceil(euclidean distance to site / connection range)."""
    r = net.connection_range
    if not r > 0:
        raise InvalidInputError(f"connection range must be positive, got {r}")
    d = np.hypot(*(net.positions - np.asarray(site, dtype=float)).T)
    # round first so distances that are exact multiples of r do not tip over
    return float(np.mean(np.ceil(np.round(d / r, 12))))


# --- I/O ---
def load_points_csv(path):
    """Read `x,y[,weight]` rows (an optional header line is skipped)."""
    points, weights = [], []
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            for line_number, row in enumerate(csv.reader(f), start=1):
                if not row or all(not cell.strip() for cell in row):
                    continue
                try:
                    values = [float(cell) for cell in row]
                except ValueError:
                    if line_number == 1 and not points:
                        continue
                    raise InputFormatError(f"{path}:{line_number}: expected numbers, got {row}") from None
                if len(values) not in (2, 3):
                    raise InputFormatError(f"{path}:{line_number}: expected x,y[,weight], got {len(values)} values")
                points.append((values[0], values[1]))
                weights.append(values[2] if len(values) == 3 else 1.0)
    except OSError as e:
        raise InputFormatError(f"cannot read points file '{path}': {e}") from None
    if not points:
        raise InvalidInputError(f"{path}: no points")
    return WeberProblem(tuple(points), tuple(weights))


def problem_to_dict(problem):
    return {
        "points": [list(p) for p in problem.points],
        "weights": list(problem.weights),
        "region": list(problem.region) if problem.region else None,
    }


def solution_to_dict(solution):
    return {
        "location": list(solution.location),
        "objective": solution.objective,
        "iterations": solution.iterations,
        "at_vertex": solution.at_vertex,
        "gradient_norm": solution.gradient_norm,
        "converged": solution.converged,
    }

# END OF FILE weber_solver.py
