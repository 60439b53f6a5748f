"""
Candidate exposures H_i = h_i(W_-i) computed from an interference graph.

Every shipped kind is linear in the treatment column, so each of them is
described by a sparse operator with a zero diagonal: H = operator @ w. The
zero diagonal is what keeps a unit's own treatment out of its exposure
"""

import abc
import logging
from typing import Dict, Optional, Type

import numpy as np
from scipy import sparse

from .interference import InterferenceGraph
from ..exceptions import GraphError
from ..settings import ExposureSpec
from ..typehints import IndexArray, Logger, Matrix, Vector


class BaseExposure(abc.ABC):
    """
    A base class to be inherited of for all the exposure kinds
    """

    kind: str = ''
    requires_weights: bool = False

    def __init__(self, spec: ExposureSpec):
        self.spec = spec

    @abc.abstractmethod
    def operator(self, graph: InterferenceGraph) -> sparse.csr_matrix:
        """
        n x n matrix whose row i holds the coefficient of every w_j in H_i
        """

    def restricted(self, graph: InterferenceGraph, rows: Optional[IndexArray] = None) -> sparse.csr_matrix:
        if self.requires_weights and not graph.weighted:
            raise GraphError(f'exposure kind {self.kind} needs a weighted graph')

        operator = self.operator(graph)

        return operator if rows is None else operator[rows]

    def evaluate(self, graph: InterferenceGraph, w: Matrix, rows: Optional[IndexArray] = None) -> Matrix:
        """
        Exposures of `rows` (all units by default) for a treatment vector, or
        for every column of a treatment matrix at once
        """

        return np.asarray(self.restricted(graph, rows) @ np.asarray(w, dtype=float))


class NumFriends(BaseExposure):
    kind = 'numFrds'

    def operator(self, graph: InterferenceGraph) -> sparse.csr_matrix:
        return graph.adjacency


class NumCompetitors(NumFriends):
    """
    Number of treated competitors: numFrds on a similarity graph
    """

    kind = 'numCpt'


class FracFriends(BaseExposure):
    """
    Share of treated neighbors. Isolated units have no neighbors and get 0
    """

    kind = 'fracFrds'

    def operator(self, graph: InterferenceGraph) -> sparse.csr_matrix:
        degree = graph.degree
        inverse = np.divide(1.0, degree, out=np.zeros_like(degree), where=degree > 0)

        return sparse.diags(inverse).tocsr() @ graph.adjacency


class NumTwoHopFriends(BaseExposure):
    kind = 'num2Frds'

    def operator(self, graph: InterferenceGraph) -> sparse.csr_matrix:
        return graph.two_hop


class WeightedCompetitors(BaseExposure):
    """
    Similarity-weighted sum of treated competitors; with the `normalize`
    option, divided by the unit's total similarity (0 when that is 0)
    """

    kind = 'wAvgCpt'
    requires_weights = True

    def operator(self, graph: InterferenceGraph) -> sparse.csr_matrix:
        weighted = graph.weighted_adjacency

        if not self.spec.options.get('normalize', False):
            return weighted

        totals = np.asarray(weighted.sum(axis=1)).ravel()
        inverse = np.divide(1.0, totals, out=np.zeros_like(totals), where=totals > 0)

        return sparse.diags(inverse).tocsr() @ weighted


EXPOSURES: Dict[str, Type[BaseExposure]] = {
    exposure.kind: exposure for exposure in (NumFriends, FracFriends, NumTwoHopFriends,
                                             WeightedCompetitors, NumCompetitors)
}


def get_exposure(spec: ExposureSpec) -> BaseExposure:
    try:
        return EXPOSURES[spec.kind](spec)
    except KeyError:
        raise GraphError(f'unknown exposure kind {spec.kind!r}')


def compute_exposure(graph: InterferenceGraph,
                     w_col: Vector,
                     spec: ExposureSpec,
                     rows: Optional[IndexArray] = None) -> Vector:
    w_col = np.asarray(w_col)

    if w_col.shape[0] != graph.n:
        raise GraphError(f'treatment vector has {w_col.shape[0]} entries, graph has {graph.n} vertices')

    return get_exposure(spec).evaluate(graph, w_col, rows)


def neighbor_counts(graph: InterferenceGraph, rows: Optional[IndexArray] = None) -> Vector:
    """
    N_i, the number of neighbors
    """

    return graph.degree if rows is None else graph.degree[rows]


def isolated_units(graph: InterferenceGraph,
                   spec: ExposureSpec,
                   rows: Optional[IndexArray] = None,
                   logger: Optional[Logger] = None) -> IndexArray:
    """
    Units (among `rows`) with no neighbors. Their fracFrds is 0 by convention
    and they carry no interference signal, so they are reported
    """

    logger = logger or logging.getLogger(__name__)
    rows = np.arange(graph.n) if rows is None else np.asarray(rows)
    isolated = rows[graph.degree[rows] == 0]

    if isolated.size and spec.kind == 'fracFrds':
        logger.warning(f'{isolated.size} units have no neighbors; their fracFrds is set to 0')

    return isolated
