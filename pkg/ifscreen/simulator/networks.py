"""
Synthetic and file-based social networks for simulations. Every network is
reduced to its largest connected component and relabelled 0..n-1
"""

import logging
from pathlib import Path
from typing import Optional

import networkx as nx
import pandas as pd

from ..exceptions import ConfigError, GraphError
from ..graph.interference import InterferenceGraph, from_networkx, largest_component
from ..settings import NetworkConfig
from ..typehints import Logger
from ..utils.rng import derive_seed

# networkx seeds through random.Random / RandomState
NETWORKX_SEED_BITS = 32


def read_network_file(path: str) -> nx.Graph:
    """
    Either a CSV with a src,dst header or a whitespace separated edge list
    ('#' and '%' comment lines allowed)
    """

    try:
        if Path(path).suffix == '.csv':
            edges = pd.read_csv(path, dtype=str)

            if not {'src', 'dst'} <= set(edges.columns):
                raise GraphError(f'{path}: edge list has no src,dst header', path=path)

            return nx.from_pandas_edgelist(edges, source='src', target='dst')

        with open(path, 'r', encoding='utf8') as edges_fd:
            lines = [line for line in edges_fd if not line.lstrip().startswith('%')]

        return nx.parse_edgelist(lines, comments='#', nodetype=str, data=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise GraphError(f'failed to read network {path}: {exc}', path=path)


def gen_network(config: NetworkConfig, seed: int, logger: Optional[Logger] = None) -> InterferenceGraph:
    logger = logger or logging.getLogger(__name__)
    nx_seed = derive_seed(seed, 'network') % 2 ** NETWORKX_SEED_BITS

    if config.kind == 'watts_strogatz':
        if not 0 < config.k < config.n or not 0 <= config.beta <= 1:
            raise ConfigError(f'watts_strogatz needs 0 < k < n and beta in [0, 1], '
                              f'got k={config.k}, n={config.n}, beta={config.beta}')

        nx_graph = nx.watts_strogatz_graph(config.n, config.k, config.beta, seed=nx_seed)
        requested = config.n
    elif config.kind == 'erdos_renyi':
        if not 0 <= config.p <= 1:
            raise ConfigError(f'erdos_renyi needs p in [0, 1], got {config.p}')

        nx_graph = nx.gnp_random_graph(config.n, config.p, seed=nx_seed)
        requested = config.n
    else:
        nx_graph = read_network_file(config.path)
        requested = nx_graph.number_of_nodes()

    component = largest_component(nx_graph)

    if component.number_of_nodes() < requested:
        logger.warning(f'largest connected component keeps {component.number_of_nodes()} '
                       f'of {requested} vertices')

    graph = from_networkx(component)
    logger.info(f'network {config.kind}: n={graph.n}, m={graph.m}')

    return graph
