import math
import logging
from collections import deque
from typing import Dict, Optional, Type

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import bellman_ford, csgraph_from_dense, maximum_bipartite_matching
from scipy.spatial.distance import cdist

from .base import BaseMatcher
from ..entities import CostMatrix, Matching
from ..exceptions import ConfigError, InfeasibleTestError, ValidationError
from ..graph.interference import InterferenceGraph
from ..typehints import IndexArray, Logger, Matrix, Vector
from ..utils.rng import derive

RIDGE_FACTOR = 1e-8
SINGULAR_TOLERANCE = 1e-12
# reduced costs within this fraction of the largest finite cost count as ties
TIGHT_TOLERANCE = 1e-9


def _check_sides(treated: IndexArray, control: IndexArray) -> None:
    if not len(treated) or not len(control):
        raise InfeasibleTestError(f'cannot match {len(treated)} treated with {len(control)} control units',
                                  treated_count=len(treated), control_count=len(control))

    if np.intersect1d(treated, control).size:
        raise ValidationError('treated and control index sets overlap')


def _build_matching(treated: IndexArray,
                    control: IndexArray,
                    all_treated: IndexArray,
                    method: str,
                    swapped: bool,
                    costs: Optional[Vector] = None) -> Matching:
    order = np.argsort(treated, kind='stable')
    treated, control = treated[order], control[order]
    costs = None if costs is None else costs[order]

    return Matching(
        treated=treated,
        control=control,
        method=method,
        total_cost=None if costs is None else float(costs.sum()),
        costs=costs,
        unmatched=np.setdiff1d(all_treated, treated),
        swapped=swapped
    )


def match_random(treated: IndexArray, control: IndexArray, seed: int) -> Matching:
    """
    Uniform injective assignment. When there are more treated than control
    units the roles swap: every control unit gets a distinct treated unit
    and the remaining treated units stay unmatched
    """

    treated = np.sort(np.asarray(treated, dtype=np.int64))
    control = np.sort(np.asarray(control, dtype=np.int64))
    _check_sides(treated, control)

    rng = derive(seed, 'match_random')

    if len(treated) <= len(control):
        return _build_matching(treated, rng.permutation(control)[:len(treated)], treated, 'random', False)

    return _build_matching(rng.permutation(treated)[:len(control)], control, treated, 'random', True)


def pooled_covariance(features: Matrix, logger: Optional[Logger] = None) -> Matrix:
    """
    Sample covariance of the features, ridge-regularized when singular
    """

    logger = logger or logging.getLogger(__name__)
    dim = features.shape[1]

    if features.shape[0] < 2:
        return np.eye(dim)

    covariance = np.atleast_2d(np.cov(features, rowvar=False))
    trace = float(np.trace(covariance))

    if trace <= 0:
        # every feature is constant: all units are equally close
        return np.eye(dim)

    if np.linalg.eigvalsh(covariance).min() <= SINGULAR_TOLERANCE * trace:
        ridge = RIDGE_FACTOR * trace / dim
        logger.warning(f'feature covariance is singular; adding ridge {ridge:.3g}')
        covariance = covariance + ridge * np.eye(dim)

    return covariance


def mahalanobis_costs(X: Matrix,
                      N: Optional[Vector],
                      treated: IndexArray,
                      control: IndexArray,
                      caliper: Optional[InterferenceGraph] = None,
                      covariance: Optional[Matrix] = None,
                      logger: Optional[Logger] = None) -> CostMatrix:
    """
    Mahalanobis distances between the features z = (X, N) of treated and
    control units, standardized by the covariance pooled over both sets.
    Pairs that are not adjacent in the caliper graph cost +inf
    """

    treated = np.sort(np.asarray(treated, dtype=np.int64))
    control = np.sort(np.asarray(control, dtype=np.int64))
    X = np.asarray(X, dtype=float)
    features = X if N is None else np.column_stack((X, np.asarray(N, dtype=float)))

    if not features.shape[1]:
        raise ValidationError('mahalanobis matching needs at least one feature')

    if covariance is None:
        covariance = pooled_covariance(features[np.concatenate((treated, control))], logger=logger)

    try:
        inverse = np.linalg.inv(np.atleast_2d(covariance))
    except np.linalg.LinAlgError:
        raise ValidationError('feature covariance is singular even after regularization')

    entries = cdist(features[treated], features[control], metric='mahalanobis', VI=inverse)

    if caliper is not None:
        if caliper.n != X.shape[0]:
            raise ValidationError(f'caliper graph has {caliper.n} vertices, panel has {X.shape[0]} units')

        allowed = caliper.adjacency[treated][:, control].toarray() > 0
        entries[~allowed] = math.inf

    return CostMatrix(rows=treated, cols=control, entries=entries)


def _padded(entries: Matrix, fill: float = 0.0) -> Matrix:
    """
    Square copy of the cost matrix; the added dummy rows or columns cost
    `fill`. A dummy partner stands for "left unmatched"
    """

    size = max(entries.shape)
    square = np.full((size, size), fill, dtype=entries.dtype)
    square[:entries.shape[0], :entries.shape[1]] = entries

    return square


def _tight_edges(entries: Matrix, col_of_row: IndexArray, scale: float) -> np.ndarray:
    """
    Pairs with zero reduced cost under dual prices certifying the optimal
    square assignment `col_of_row`. The minimum-cost assignments are exactly
    the perfect matchings of this subgraph.

    Column prices are shortest distances in the graph where the arc c -> c'
    costs the change of moving the row held by c' onto c; an optimal
    assignment leaves no negative cycle in it
    """

    size = entries.shape[0]
    tolerance = TIGHT_TOLERANCE * max(1.0, scale)
    row_of_col = np.argsort(col_of_row)
    held = entries[row_of_col, np.arange(size)]

    # every arc carries a small surcharge so that rounding never closes a
    # negative cycle between tied assignments
    arcs = np.full((size + 1, size + 1), math.inf)
    arcs[:size, :size] = entries[row_of_col, :].T - held[None, :] + tolerance / (4 * (size + 1))
    np.fill_diagonal(arcs, math.inf)
    arcs[size, :size] = 0.0
    distances = bellman_ford(csgraph_from_dense(arcs, null_value=math.inf), indices=[size])[0][:size]

    col_prices = -distances
    row_prices = entries[np.arange(size), col_of_row] - col_prices[col_of_row]
    reduced = entries - row_prices[:, None] - col_prices[None, :]

    return reduced <= tolerance


def _reroute(tight: np.ndarray,
             col_of_row: IndexArray,
             row_of_col: IndexArray,
             blocked: np.ndarray,
             start: int,
             free: int) -> Optional[Dict[int, int]]:
    """
    Alternating path through tight pairs that moves row `start` off its
    column and ends on column `free`. Returns {row: new column} for every
    row on the path, or None if there is none
    """

    seen = blocked.copy()
    came_from: Dict[int, int] = {}
    queue = deque([start])

    while queue:
        row = queue.popleft()

        for col in np.flatnonzero(tight[row] & ~seen):
            col = int(col)
            seen[col] = True
            came_from[col] = row

            if col != free:
                queue.append(int(row_of_col[col]))
                continue

            moves: Dict[int, int] = {}

            while True:
                mover = came_from[col]
                moves[mover] = col

                if mover == start:
                    return moves

                col = int(col_of_row[mover])

    return None


def _lexicographic_assignment(tight: np.ndarray, col_of_row: IndexArray, rows: int) -> IndexArray:
    """
    Among the perfect matchings of the tight subgraph, the one whose column
    sequence read over the first `rows` rows is lexicographically smallest.
    Rows are settled in order; each takes the smallest tight column that the
    unsettled rows can make room for
    """

    size = tight.shape[0]
    col_of_row = np.array(col_of_row, dtype=np.int64)
    row_of_col = np.full(size, -1, dtype=np.int64)
    row_of_col[col_of_row] = np.arange(size)
    settled = np.zeros(size, dtype=bool)

    for row in range(rows):
        current = int(col_of_row[row])

        for col in np.flatnonzero(tight[row] & ~settled):
            col = int(col)

            if col == current:
                break

            blocked = settled.copy()
            blocked[col] = True
            moves = _reroute(tight, col_of_row, row_of_col, blocked, int(row_of_col[col]), current)

            if moves is None:
                continue

            for mover, target in moves.items():
                col_of_row[mover] = target
                row_of_col[target] = mover

            col_of_row[row] = col
            row_of_col[col] = row
            break

        settled[col_of_row[row]] = True

    assert (row_of_col >= 0).all() and (row_of_col[col_of_row] == np.arange(size)).all()

    return col_of_row


def match_optimal(costs: CostMatrix) -> Matching:
    """
    Minimum-total-cost injective assignment. Among the optimal assignments
    the one whose control sequence, read by treated unit, is
    lexicographically smallest wins; an unmatched treated unit counts as
    larger than any control. When there are more treated than control
    units every control is matched and the surplus treated units are
    listed as unmatched
    """

    _check_sides(costs.rows, costs.cols)

    entries = np.asarray(costs.entries, dtype=float)
    rows, cols = entries.shape
    swapped = rows > cols
    finite = np.isfinite(entries)

    if (entries[finite] < 0).any():
        raise ValidationError('matching costs must be nonnegative')

    # the smaller side must be matched completely
    smaller = finite.T if swapped else finite
    feasible = maximum_bipartite_matching(sparse.csr_matrix(smaller.astype(np.int8)), perm_type='column')
    stranded = np.flatnonzero(feasible < 0)

    if stranded.size:
        side, ids = ('control', costs.cols) if swapped else ('treated', costs.rows)
        raise InfeasibleTestError(f'no feasible matching: {stranded.size} {side} units have no admissible partner',
                                  unmatched=ids[stranded].tolist())

    # any assignment through a forbidden pair costs more than every feasible one
    forbidden_cost = float(entries[finite].sum()) + 1.0
    square = _padded(np.where(finite, entries, forbidden_cost))
    _, col_of_row = linear_sum_assignment(square)

    tight = _tight_edges(square, col_of_row, float(entries[finite].max())) & _padded(finite, fill=True)
    col_of_row = _lexicographic_assignment(tight, col_of_row, rows)[:rows]

    matched = np.flatnonzero(col_of_row < cols)
    control = col_of_row[matched]

    return _build_matching(costs.rows[matched], costs.cols[control], costs.rows,
                           'mahalanobis', swapped, entries[matched, control])


class RandomMatcher(BaseMatcher):
    method = 'random'

    def match(self, treated, control, X, N, seed, caliper=None) -> Matching:
        return match_random(treated, control, seed)


class OptimalMatcher(BaseMatcher):
    method = 'mahalanobis'

    def __init__(self, covariance: Optional[Matrix] = None, logger: Optional[Logger] = None):
        self.covariance = covariance
        self.logger = logger or logging.getLogger(__name__)

    def match(self, treated, control, X, N, seed, caliper=None) -> Matching:
        costs = mahalanobis_costs(X, N, treated, control, caliper=caliper,
                                  covariance=self.covariance, logger=self.logger)

        return match_optimal(costs)


MATCHERS: Dict[str, Type[BaseMatcher]] = {
    RandomMatcher.method: RandomMatcher,
    OptimalMatcher.method: OptimalMatcher,
}


def get_matcher(method: str, logger: Optional[Logger] = None) -> BaseMatcher:
    if method not in MATCHERS:
        raise ConfigError(f'unknown matching method {method!r}, expected one of {tuple(MATCHERS)}')

    if method == OptimalMatcher.method:
        return OptimalMatcher(logger=logger)

    return MATCHERS[method]()
