import numpy as np
import pytest

from ifscreen.graph.interference import from_edges
from ifscreen.panel import generate_allocation, make_panel, write_panel_csv
from ifscreen.settings import OutcomeModelConfig
from ifscreen.simulator.outcomes import gen_covariates, simulate_outcomes

PI = (0.2, 0.4, 0.6)
SIMULATED_PI = (0.1, 0.25, 0.5)

# 12 never treated, 4 always treated, 4 from the second and 4 from the
# third experiment
FIXTURE_W = np.array([[0, 0, 0]] * 12 + [[1, 1, 1]] * 4 + [[0, 1, 1]] * 4 + [[0, 0, 1]] * 4, dtype=np.uint8)
CHORDS = [(0, 5), (2, 9), (4, 13), (7, 20), (11, 17), (3, 22)]


def ring_with_chords(n, chords=()):
    src = list(range(n)) + [a for a, _ in chords]
    dst = [(vertex + 1) % n for vertex in range(n)] + [b for _, b in chords]

    return from_edges(n, src, dst)


@pytest.fixture
def fixture_graph():
    return ring_with_chords(len(FIXTURE_W), CHORDS)


@pytest.fixture
def fixture_panel():
    rng = np.random.default_rng(7)
    n = len(FIXTURE_W)
    X = rng.normal(size=(n, 1))
    Y = rng.normal(size=(n, 3)) + FIXTURE_W + X

    return make_panel(FIXTURE_W, Y, X, pi=PI, unit_ids=[f'u{index:02d}' for index in range(n)])


@pytest.fixture
def simulated_graph():
    return ring_with_chords(60, [(vertex, (vertex + 7) % 60) for vertex in range(0, 60, 3)])


def simulated(graph, signal, seed=1, family='linear_general', rho=0.5):
    X = gen_covariates(graph.n, seed)
    W = generate_allocation(graph.n, SIMULATED_PI, seed)
    Y = simulate_outcomes(graph, W, X, OutcomeModelConfig(family, signal, rho), seed)

    return make_panel(W, Y, X, pi=SIMULATED_PI)


@pytest.fixture
def null_panel(simulated_graph):
    return simulated(simulated_graph, signal=0.0)


@pytest.fixture
def fixture_files(tmp_path, fixture_panel, fixture_graph):
    panel_path = tmp_path / 'panel.csv'
    edges_path = tmp_path / 'edges.csv'
    write_panel_csv(fixture_panel, panel_path)

    src = np.repeat(np.arange(fixture_graph.n), np.diff(fixture_graph.indptr))
    upper = src < fixture_graph.indices

    with open(edges_path, 'w') as edges_fd:
        edges_fd.write('src,dst\n')

        for a, b in zip(src[upper], fixture_graph.indices[upper]):
            edges_fd.write(f'{fixture_panel.unit_ids[a]},{fixture_panel.unit_ids[b]}\n')

    return panel_path, edges_path
