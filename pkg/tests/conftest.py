import pytest

from road_graph import Intersection, Link, RoadNetwork, generate_grid, generate_line


@pytest.fixture
def line5():
    return generate_line(5)


@pytest.fixture
def grid3():
    return generate_grid(3, 3)


@pytest.fixture
def star():
    """Hub 1 with six spokes of one link each."""
    nodes = [Intersection(1, 0.0, 0.0)] + [Intersection(i, float(i), 1.0) for i in range(2, 8)]
    links = [Link(1, i, 1.0) for i in range(2, 8)]
    return RoadNetwork(tuple(nodes), tuple(links), 1.0)


@pytest.fixture
def dumbbell():
    """Two 4-cliques joined by a 3-link bridge 4-9-10-5."""
    nodes = tuple(Intersection(i, float(i), 0.0) for i in range(1, 11))
    links = []
    for group in ((1, 2, 3, 4), (5, 6, 7, 8)):
        links += [Link(a, b, 1.0) for a in group for b in group if a < b]
    links += [Link(4, 9, 1.0), Link(9, 10, 1.0), Link(10, 5, 1.0)]
    return RoadNetwork(nodes, tuple(links), 1.0)
