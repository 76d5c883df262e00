# START OF FILE road_graph.py

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np

import settings as app_settings
from errors import InputFormatError, InvalidInputError, NoPathError

TOPOLOGY_KINDS = ("line", "grid", "general")

NETWORK_KEYS = {"intersections", "links", "connection_range", "kind"}
INTERSECTION_KEYS = {"id", "x", "y"}
LINK_KEYS = {"from", "to", "length", "traffic"}


# --- Data Model ---
@dataclass(frozen=True)
class Intersection:
    id: int
    x: float
    y: float

    @property
    def position(self):
        return (self.x, self.y)


@dataclass(frozen=True)
class Link:
    start: int
    end: int
    length: float
    traffic_weight: float = 1.0

    @property
    def pair(self):
        return (min(self.start, self.end), max(self.start, self.end))


@dataclass(frozen=True)
class RoadNetwork:
    """Immutable road network: intersections 1..N joined by undirected links.

    The networkx graph and the all-pairs tables are built lazily on first use
    and cached on the instance, so one network can be shared by every solver.
    """
    intersections: tuple
    links: tuple
    connection_range: float
    kind: str = "general"
    warning: str = field(default=None, compare=False)

    def __post_init__(self):
        n = len(self.intersections)
        if n == 0:
            raise InvalidInputError("empty network: no intersections")
        ids = [node.id for node in self.intersections]
        if ids != list(range(1, n + 1)):
            raise InvalidInputError("intersection ids must be unique and contiguous from 1")
        for node in self.intersections:
            if not (math.isfinite(node.x) and math.isfinite(node.y)):
                raise InvalidInputError(f"intersection {node.id} has a non-finite position")
        if not (self.connection_range > 0 and math.isfinite(self.connection_range)):
            raise InvalidInputError(f"connection_range must be positive, got {self.connection_range}")
        if self.kind not in TOPOLOGY_KINDS:
            raise InvalidInputError(f"unknown topology kind '{self.kind}'")

        seen_pairs = set()
        for link in self.links:
            if link.start == link.end:
                raise InvalidInputError(f"link {link.start}-{link.end} is a self-loop")
            if not (1 <= link.start <= n and 1 <= link.end <= n):
                raise InvalidInputError(f"link {link.start}-{link.end} references an unknown intersection")
            if not (link.length > 0 and math.isfinite(link.length)):
                raise InvalidInputError(f"link {link.start}-{link.end} has non-positive length {link.length}")
            if not (link.traffic_weight >= 0 and math.isfinite(link.traffic_weight)):
                raise InvalidInputError(f"link {link.start}-{link.end} has negative traffic weight")
            if link.pair in seen_pairs:
                raise InvalidInputError(f"duplicate link between {link.pair[0]} and {link.pair[1]}")
            seen_pairs.add(link.pair)

        if not nx.is_connected(self.graph):
            raise InvalidInputError("network is disconnected")
        if self.kind == "line":
            expected = {(i, i + 1) for i in range(1, n)}
            if seen_pairs != expected:
                raise InvalidInputError("line network links must form the path 1-2-...-N")

    @property
    def size(self):
        return len(self.intersections)

    @property
    def ids(self):
        return range(1, self.size + 1)

    def position(self, node_id):
        self.check_id(node_id)
        return self.intersections[node_id - 1].position

    def check_id(self, node_id):
        if not isinstance(node_id, (int, np.integer)) or not 1 <= node_id <= self.size:
            raise InvalidInputError(f"unknown intersection id {node_id}")

    def build_tables(self):
        """Build every lazy table now, so worker threads only ever read them."""
        for name in ("graph", "positions", "hop_matrix", "distance_matrix", "node_traffic_weights"):
            getattr(self, name)
        return self

    @cached_property
    def graph(self):
        g = nx.Graph()
        for node in self.intersections:
            g.add_node(node.id, pos=node.position)
        for link in self.links:
            g.add_edge(link.start, link.end, length=link.length, traffic=link.traffic_weight)
        return g

    @cached_property
    def positions(self):
        return np.array([node.position for node in self.intersections], dtype=float)

    @cached_property
    def hop_matrix(self):
        """Hop counts between every pair, indexed by id - 1."""
        table = np.full((self.size, self.size), -1, dtype=np.int64)
        for source, lengths in nx.all_pairs_shortest_path_length(self.graph):
            for target, hops in lengths.items():
                table[source - 1, target - 1] = hops
        return table

    @cached_property
    def distance_matrix(self):
        """Shortest-path lengths in meters between every pair, indexed by id - 1."""
        table = np.full((self.size, self.size), np.inf)
        for source, lengths in nx.all_pairs_dijkstra_path_length(self.graph, weight="length"):
            for target, meters in lengths.items():
                table[source - 1, target - 1] = meters
        return table

    @cached_property
    def node_traffic_weights(self):
        weights = np.ones(self.size)
        for node_id in self.ids:
            incident = [data["traffic"] for _, _, data in self.graph.edges(node_id, data=True)]
            if incident:
                weights[node_id - 1] = sum(incident) / len(incident)
        return weights


# --- Generators ---
def generate_line(n, link_lengths=None, connection_range=None):
    """Path network 1-2-...-N laid out along the x axis.

    link_lengths holds N-1 positive lengths, or a single value that is
    replicated for every link.
    """
    if n < 1:
        raise InvalidInputError(f"line needs at least one intersection, got N={n}")
    lengths = [app_settings.DEFAULT_LINK_LENGTH] if link_lengths is None else [float(v) for v in link_lengths]
    if len(lengths) == 1:
        lengths = lengths * (n - 1)
    if len(lengths) != n - 1:
        raise InvalidInputError(f"line with N={n} needs {n - 1} link lengths, got {len(lengths)}")
    for value in lengths:
        if not (value > 0 and math.isfinite(value)):
            raise InvalidInputError(f"non-positive link length {value}")

    xs = [0.0]
    for value in lengths:
        xs.append(xs[-1] + value)
    intersections = tuple(Intersection(i + 1, x, 0.0) for i, x in enumerate(xs))
    links = tuple(Link(i + 1, i + 2, value) for i, value in enumerate(lengths))
    if connection_range is None:
        connection_range = max(lengths, default=app_settings.DEFAULT_LINK_LENGTH)
    logging.debug(f"[GRAPH] Generated line network N={n}, total length {sum(lengths)}")
    return RoadNetwork(intersections, links, float(connection_range), "line")


def generate_grid(rows, cols, spacing=None, connection_range=None):
    """Rectangular street grid, ids assigned row-major from 1."""
    if rows < 1 or cols < 1:
        raise InvalidInputError(f"grid needs positive dimensions, got {rows}x{cols}")
    spacing = app_settings.DEFAULT_GRID_SPACING if spacing is None else float(spacing)
    if not (spacing > 0 and math.isfinite(spacing)):
        raise InvalidInputError(f"non-positive grid spacing {spacing}")

    def node_id(r, c):
        return r * cols + c + 1

    intersections = tuple(
        Intersection(node_id(r, c), c * spacing, r * spacing) for r in range(rows) for c in range(cols)
    )
    links = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                links.append(Link(node_id(r, c), node_id(r, c + 1), spacing))
            if r + 1 < rows:
                links.append(Link(node_id(r, c), node_id(r + 1, c), spacing))
    return RoadNetwork(intersections, tuple(links), float(connection_range or spacing), "grid")


def sample_poisson_points(width, height, intensity, seed):
    """Homogeneous Poisson point process on [0, width] x [0, height]."""
    if not (width > 0 and height > 0):
        raise InvalidInputError(f"region must be positive, got {width}x{height}")
    if not intensity > 0:
        raise InvalidInputError(f"intensity must be positive, got {intensity}")
    rng = np.random.default_rng(seed)
    count = rng.poisson(intensity * width * height)
    return rng.uniform((0.0, 0.0), (width, height), size=(count, 2))


def generate_poisson(width, height, intensity, seed, connection_range=None):
    """Random geometric road network over a Poisson point process.

    Points closer than connection_range are linked. A disconnected draw is
    reduced to its largest connected component and the network carries a
    warning saying so.
    """
    connection_range = app_settings.DEFAULT_CONNECTION_RANGE if connection_range is None else float(connection_range)
    if not connection_range > 0:
        raise InvalidInputError(f"connection_range must be positive, got {connection_range}")
    points = sample_poisson_points(width, height, intensity, seed)
    count = len(points)
    if count == 0:
        raise InvalidInputError(
            f"empty network: Poisson draw produced no intersections (expected {intensity * width * height:.3g})"
        )

    distances = np.hypot(*(points[:, None, :] - points[None, :, :]).transpose(2, 0, 1))
    close = np.triu(distances <= connection_range, k=1) & (distances > 0)
    g = nx.Graph()
    g.add_nodes_from(range(count))
    g.add_edges_from((int(i), int(j)) for i, j in np.argwhere(close))

    largest = max(nx.connected_components(g), key=lambda comp: (len(comp), -min(comp)))
    warning = None
    if len(largest) < count:
        warning = f"kept largest connected component ({len(largest)} of {count} points)"
        logging.warning(f"[GRAPH] Poisson network disconnected (seed={seed}): {warning}")

    kept = sorted(largest)
    new_id = {old: index + 1 for index, old in enumerate(kept)}
    intersections = tuple(Intersection(new_id[old], float(points[old, 0]), float(points[old, 1])) for old in kept)
    links = tuple(
        Link(new_id[i], new_id[j], float(distances[i, j]))
        for i, j in sorted((min(a, b), max(a, b)) for a, b in g.subgraph(kept).edges())
    )
    logging.info(f"[GRAPH] Poisson network: {len(intersections)} intersections, {len(links)} links (seed={seed})")
    return RoadNetwork(intersections, links, connection_range, "general", warning=warning)


def subnetwork(net, members):
    """Induced sub-network on `members`, relabelled 1..m in ascending id order."""
    kept = sorted(set(members))
    if not kept:
        raise InvalidInputError("sub-network needs at least one intersection")
    for node_id in kept:
        net.check_id(node_id)
    new_id = {old: index + 1 for index, old in enumerate(kept)}
    intersections = tuple(Intersection(new_id[old], *net.position(old)) for old in kept)
    links = tuple(
        Link(new_id[link.start], new_id[link.end], link.length, link.traffic_weight)
        for link in net.links
        if link.start in new_id and link.end in new_id
    )
    kind = "line" if net.kind == "line" else "general"
    return RoadNetwork(intersections, links, net.connection_range, kind)


# --- Queries ---
def hop_count(net, a, b):
    """Minimum number of links on any a -> b path."""
    net.check_id(a)
    net.check_id(b)
    try:
        return nx.shortest_path_length(net.graph, a, b)
    except nx.NetworkXNoPath:
        raise NoPathError(f"no path between intersections {a} and {b}") from None


def shortest_path_length(net, a, b):
    """Length in meters of the shortest a -> b path."""
    net.check_id(a)
    net.check_id(b)
    try:
        return nx.shortest_path_length(net.graph, a, b, weight="length")
    except nx.NetworkXNoPath:
        raise NoPathError(f"no path between intersections {a} and {b}") from None


def shortest_path(net, a, b):
    """Intersection ids along the shortest (by length) a -> b path, endpoints included."""
    net.check_id(a)
    net.check_id(b)
    try:
        return nx.shortest_path(net.graph, a, b, weight="length")
    except nx.NetworkXNoPath:
        raise NoPathError(f"no path between intersections {a} and {b}") from None


def nearest_site_assignment(net, sites):
    """Map every intersection to the index of its nearest site by hop count.

    Ties go to the lower site index.
    """
    sites = [int(s) for s in sites]
    if not sites:
        raise InvalidInputError("placement needs at least one site")
    if len(set(sites)) != len(sites):
        raise InvalidInputError(f"duplicate sites in {sites}")
    for site in sites:
        net.check_id(site)
    hops = net.hop_matrix[:, [s - 1 for s in sites]]
    if (hops < 0).any():
        raise NoPathError("some intersection cannot reach any site")
    nearest = np.argmin(hops, axis=1)
    return {node_id: int(nearest[node_id - 1]) for node_id in net.ids}


def node_traffic(net, node_id):
    net.check_id(node_id)
    return float(net.node_traffic_weights[node_id - 1])


# --- JSON Serialization ---
def network_to_dict(net):
    return {
        "intersections": [{"id": node.id, "x": node.x, "y": node.y} for node in net.intersections],
        "links": [
            {"from": link.start, "to": link.end, "length": link.length, "traffic": link.traffic_weight}
            for link in net.links
        ],
        "connection_range": net.connection_range,
        "kind": net.kind,
    }


def _reject_unknown(record, allowed, where):
    if not isinstance(record, dict):
        raise InputFormatError(f"{where}: expected an object, got {type(record).__name__}")
    unknown = set(record) - allowed
    if unknown:
        raise InputFormatError(f"{where}: unknown field(s) {', '.join(sorted(unknown))}")


def network_from_dict(data):
    _reject_unknown(data, NETWORK_KEYS, "network")
    if "intersections" not in data or "connection_range" not in data:
        raise InputFormatError("network: 'intersections' and 'connection_range' are required")
    try:
        nodes = []
        for index, record in enumerate(data["intersections"]):
            _reject_unknown(record, INTERSECTION_KEYS, f"intersections[{index}]")
            nodes.append(Intersection(int(record["id"]), float(record["x"]), float(record["y"])))
        links = []
        for index, record in enumerate(data.get("links", [])):
            _reject_unknown(record, LINK_KEYS, f"links[{index}]")
            links.append(Link(int(record["from"]), int(record["to"]), float(record["length"]),
                              float(record.get("traffic", 1.0))))
        connection_range = float(data["connection_range"])
    except (KeyError, TypeError, ValueError) as e:
        raise InputFormatError(f"network: malformed record ({e})") from None
    nodes.sort(key=lambda node: node.id)
    return RoadNetwork(tuple(nodes), tuple(links), connection_range, data.get("kind", "general"))


def dumps_network(net):
    return json.dumps(network_to_dict(net), indent=2) + "\n"


def save_network(net, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_network(net))
    logging.info(f"[GRAPH] Wrote network ({net.size} intersections) to {path}")


def load_network(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise InputFormatError(f"{path}: not valid JSON ({e})") from None
    except OSError as e:
        raise InputFormatError(f"cannot read network file '{path}': {e}") from None
    return network_from_dict(data)

# END OF FILE road_graph.py
