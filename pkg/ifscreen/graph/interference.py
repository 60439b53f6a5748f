"""
Interference graphs: sparse undirected graphs over the panel's units,
stored as compressed neighbor lists sorted by vertex id
"""

import logging
from functools import cached_property
from pathlib import Path
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
import networkx as nx
from scipy import sparse
from scipy.spatial.distance import cdist

from ..exceptions import GraphError
from ..typehints import IndexArray, Logger, Matrix, UnitId, Vector

SIMILARITIES = ('negative-euclidean', 'cosine')


@dataclass(frozen=True, eq=False)
class InterferenceGraph:
    """
    indices[indptr[i]:indptr[i + 1]] are the neighbors of vertex i in
    increasing order; weights, if present, are aligned with indices
    """

    n: int
    indptr: IndexArray
    indices: IndexArray
    weights: Optional[Vector] = None

    @property
    def m(self) -> int:
        return len(self.indices) // 2

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    @cached_property
    def degree(self) -> Vector:
        return np.diff(self.indptr).astype(float)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        data = np.ones(len(self.indices))

        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    @cached_property
    def weighted_adjacency(self) -> sparse.csr_matrix:
        if self.weights is None:
            raise GraphError('graph has no edge weights')

        return sparse.csr_matrix((self.weights, self.indices, self.indptr), shape=(self.n, self.n))

    @cached_property
    def two_hop(self) -> sparse.csr_matrix:
        """
        Indicator of strict two-hop neighbors: reachable in two steps, not a
        direct neighbor, not the vertex itself
        """

        adjacency = self.adjacency
        reach = (adjacency @ adjacency).astype(bool).astype(float)
        strict = reach - reach.multiply(adjacency.astype(bool)) - reach.multiply(sparse.identity(self.n, format='csr'))
        strict.eliminate_zeros()

        return strict.tocsr()

    def neighbors(self, vertex: int) -> IndexArray:
        return self.indices[self.indptr[vertex]:self.indptr[vertex + 1]]

    def has_edge(self, src: int, dst: int) -> bool:
        neighbors = self.neighbors(src)
        position = np.searchsorted(neighbors, dst)

        return bool(position < len(neighbors) and neighbors[position] == dst)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        src = np.repeat(np.arange(self.n), np.diff(self.indptr))
        upper = src < self.indices
        graph.add_edges_from(zip(src[upper].tolist(), self.indices[upper].tolist()))

        return graph


def from_edges(n: int,
               src: Sequence[int],
               dst: Sequence[int],
               weights: Optional[Sequence[float]] = None,
               logger: Optional[Logger] = None) -> InterferenceGraph:
    """
    Symmetrizes the edge list, collapses duplicates (keeping the max weight)
    and drops self-loops with a warning
    """

    logger = logger or logging.getLogger(__name__)

    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    weights = None if weights is None else np.asarray(weights, dtype=float)

    if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
        raise GraphError(f'edge endpoints must lie in [0, {n})')

    if weights is not None and (weights.shape != src.shape or (weights < 0).any() or (~np.isfinite(weights)).any()):
        raise GraphError('edge weights must be finite, non-negative and one per edge')

    loops = src == dst

    if loops.any():
        logger.warning(f'dropping {int(loops.sum())} self-loops')
        src, dst = src[~loops], dst[~loops]
        weights = None if weights is None else weights[~loops]

    both_src = np.concatenate((src, dst))
    both_dst = np.concatenate((dst, src))
    both_weights = np.zeros(both_src.size) if weights is None else np.concatenate((weights, weights))

    # sorted by (src, dst, weight): the last entry of every (src, dst) run
    # carries the max weight
    order = np.lexsort((both_weights, both_dst, both_src))
    both_src, both_dst, both_weights = both_src[order], both_dst[order], both_weights[order]
    last = np.ones(both_src.size, dtype=bool)
    last[:-1] = (both_src[1:] != both_src[:-1]) | (both_dst[1:] != both_dst[:-1])

    both_src, both_dst, both_weights = both_src[last], both_dst[last], both_weights[last]
    indptr = np.concatenate(([0], np.cumsum(np.bincount(both_src, minlength=n)))).astype(np.int64)

    return InterferenceGraph(
        n=n,
        indptr=indptr,
        indices=both_dst,
        weights=None if weights is None else both_weights
    )


def load_graph(edges: Union[pd.DataFrame, Sequence[Sequence[Any]]],
               unit_ids: Sequence[UnitId],
               logger: Optional[Logger] = None) -> InterferenceGraph:
    """
    Builds a graph over the panel's units from rows of (src, dst[, weight])
    given as unit ids
    """

    if not isinstance(edges, pd.DataFrame):
        rows = [tuple(row) for row in edges]
        columns = ['src', 'dst', 'weight'][:len(rows[0])] if rows else ['src', 'dst']
        edges = pd.DataFrame(rows, columns=columns)

    for column in ('src', 'dst'):
        if column not in edges.columns:
            raise GraphError(f'edge list has no {column} column')

    index: Mapping[UnitId, int] = {str(unit_id): position for position, unit_id in enumerate(unit_ids)}
    resolved = {}

    for column in ('src', 'dst'):
        ids = edges[column].astype(str)
        positions = ids.map(index)
        unknown = positions.isna().to_numpy()

        if unknown.any():
            row = int(np.flatnonzero(unknown)[0])
            raise GraphError(f'edge row {row + 1}: unknown unit id {ids.iloc[row]!r} in {column}',
                             row=row + 1, unit_id=ids.iloc[row])

        resolved[column] = positions.to_numpy(dtype=np.int64)

    weights = None

    if 'weight' in edges.columns:
        weights = pd.to_numeric(edges['weight'], errors='coerce').to_numpy(dtype=float)

        if np.isnan(weights).any():
            row = int(np.flatnonzero(np.isnan(weights))[0])
            raise GraphError(f'edge row {row + 1}: weight is not a number', row=row + 1)

    return from_edges(len(unit_ids), resolved['src'], resolved['dst'], weights, logger=logger)


def read_edges_csv(path: Union[str, Path],
                   unit_ids: Sequence[UnitId],
                   logger: Optional[Logger] = None) -> InterferenceGraph:
    """
    edges.csv with header src,dst[,weight]
    """

    try:
        edges = pd.read_csv(path, dtype={'src': str, 'dst': str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise GraphError(f'failed to read {path}: {exc}', path=str(path))

    return load_graph(edges, unit_ids, logger=logger)


def build_similarity_graph(X: Matrix,
                           similarity: str = 'negative-euclidean',
                           epsilon: float = 0.0) -> InterferenceGraph:
    """
    Competition network: an edge between i != j whenever
    s(X_i, X_j) >= epsilon, weighted by the similarity clamped at 0
    """

    X = np.asarray(X, dtype=float)

    if X.ndim != 2 or X.shape[1] == 0:
        raise GraphError('a similarity graph needs at least one covariate')

    if similarity not in SIMILARITIES:
        raise GraphError(f'unknown similarity {similarity!r}, expected one of {SIMILARITIES}')

    if not np.isfinite(epsilon):
        raise GraphError(f'epsilon must be finite, got {epsilon}')

    if similarity == 'negative-euclidean':
        scores = -cdist(X, X, metric='euclidean')
    else:
        # zero vectors have no direction: cdist yields nan and they get no edges
        with np.errstate(invalid='ignore', divide='ignore'):
            scores = 1.0 - cdist(X, X, metric='cosine')

    linked = np.nan_to_num(scores, nan=-np.inf) >= epsilon
    np.fill_diagonal(linked, False)
    src, dst = np.nonzero(np.triu(linked))

    return from_edges(X.shape[0], src, dst, np.maximum(scores[src, dst], 0.0))


def graph_stats(graph: InterferenceGraph, distances: bool = False) -> Dict[str, Any]:
    degree = graph.degree
    stats = {
        'n': graph.n,
        'm': graph.m,
        'degree_min': float(degree.min()) if graph.n else 0.0,
        'degree_mean': float(degree.mean()) if graph.n else 0.0,
        'degree_max': float(degree.max()) if graph.n else 0.0,
    }

    if distances:
        nx_graph = graph.to_networkx()

        if graph.n and nx.is_connected(nx_graph):
            stats['diameter'] = nx.diameter(nx_graph)
            stats['average_distance'] = nx.average_shortest_path_length(nx_graph)
        else:
            stats['diameter'] = None
            stats['average_distance'] = None

    return stats


def from_networkx(nx_graph: nx.Graph) -> InterferenceGraph:
    """
    Vertices are relabelled 0..n-1 in sorted node order
    """

    nodes = sorted(nx_graph.nodes())
    position = {node: index for index, node in enumerate(nodes)}
    edges = np.array([(position[src], position[dst]) for src, dst in nx_graph.edges()],
                     dtype=np.int64).reshape(-1, 2)

    return from_edges(len(nodes), edges[:, 0], edges[:, 1])


def largest_component(nx_graph: nx.Graph) -> nx.Graph:
    if nx_graph.number_of_nodes() == 0:
        return nx_graph

    # ties go to the component holding the smallest node
    component = min(nx.connected_components(nx_graph), key=lambda nodes: (-len(nodes), min(nodes)))

    return nx_graph.subgraph(component).copy()
