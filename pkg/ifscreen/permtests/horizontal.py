"""
Horizontal test: every unit treated in the last two experiments is matched
with a never-treated unit, and replicates shuffle each pair's outcome
differences across the experiments the treated unit was treated in. Time
fixed effects cancel within a pair, so the shuffle is valid without
touching W
"""

import itertools
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .base import PermutationTest, Prepared, Replicator, bounded_factorial, trivial_group_warning
from ..exceptions import ConfigError, InfeasibleTestError, ValidationError
from ..graph.exposure import get_exposure, neighbor_counts
from ..matching import get_matcher
from ..panel import classify_units
from ..statistics import BaseStatistic, HorizontalContext
from ..typehints import IndexArray, Matrix, Vector
from ..utils.rng import derive, derive_seed, uniform_permutations


@dataclass(frozen=True, eq=False)
class HorizontalReplicator(Replicator):
    statistic: BaseStatistic
    contexts: Tuple[HorizontalContext, ...]
    seed: int

    @property
    def Y_diff(self) -> Matrix:
        return self.contexts[0].Y_diff

    @property
    def treated_from(self) -> IndexArray:
        return self.contexts[0].treated_from

    def statistic_of(self, Y_diff: Matrix) -> float:
        return sum(self.statistic.horizontal(context.with_outcomes(Y_diff)) for context in self.contexts)

    def observed(self) -> float:
        return self.statistic_of(self.Y_diff)

    def replicate(self, index: int) -> float:
        rng = derive(self.seed, 'horizontal_permutation', index)
        K = self.Y_diff.shape[1]
        Y_diff = self.Y_diff.copy()

        # pairs sharing a first treated experiment share the permuted suffix;
        # every pair still gets its own independent permutation
        for start in np.unique(self.treated_from):
            if K - start < 2:
                continue

            rows = np.flatnonzero(self.treated_from == start)
            orders = uniform_permutations(rng, rows.size, K - start)
            suffix = self.Y_diff[rows, start:]
            Y_diff[rows, start:] = np.take_along_axis(suffix, orders, axis=1)

        return self.statistic_of(Y_diff)

    def group_size(self, limit: int) -> Optional[int]:
        size = 1

        for start in self.treated_from:
            factor = bounded_factorial(self.Y_diff.shape[1] - int(start), limit)

            if factor is None or size * factor > limit:
                return None

            size *= factor

        return size

    def enumerate(self) -> Tuple[Vector, Optional[Vector]]:
        K = self.Y_diff.shape[1]
        movable = [row for row, start in enumerate(self.treated_from) if K - start >= 2]
        choices = [list(itertools.permutations(range(self.treated_from[row], K))) for row in movable]
        statistics = []

        for element in itertools.product(*choices):
            Y_diff = self.Y_diff.copy()

            for row, order in zip(movable, element):
                start = self.treated_from[row]
                Y_diff[row, start:] = self.Y_diff[row, list(order)]

            statistics.append(self.statistic_of(Y_diff))

        return np.asarray(statistics), None


class HorizontalTest(PermutationTest):
    algorithm = 'horizontal'

    def prepare(self, panel, graphs, statistic) -> Prepared:
        if panel.K < 2:
            raise ConfigError('horizontal needs at least two experiments')

        classification = classify_units(panel.W)
        treated, control = classification.one, classification.zero

        if not treated.size or not control.size:
            raise InfeasibleTestError(f'horizontal test needs treated and never-treated units, '
                                      f'got {treated.size} and {control.size}',
                                      treated_count=int(treated.size), control_count=int(control.size))

        # matching sees X and N only
        primary = graphs[0] if graphs else None
        N = None if primary is None else neighbor_counts(primary)

        if N is None and not panel.X.shape[1] and self.config.matching != 'random':
            raise ValidationError('mahalanobis matching needs covariates or a graph for neighbor counts')

        matcher = get_matcher(self.config.matching, logger=self.logger)
        matching = matcher.match(
            treated, control, panel.X, N,
            seed=derive_seed(self.config.seed, 'matching'),
            caliper=primary if self.config.caliper else None
        )

        warnings: List[str] = []

        if matching.unmatched.size:
            warning = f'{matching.unmatched.size} treated units left unmatched: fewer controls than treated'
            self.logger.warning(warning)
            warnings.append(warning)

        pairs_treated, pairs_control = matching.treated, matching.control
        treated_from = classification.treated_from[pairs_treated]

        if (panel.K - treated_from < 2).all():
            warnings.append(trivial_group_warning(self.logger))

        contexts = self.contexts(panel, graphs, statistic, pairs_treated, pairs_control, treated_from)

        return Prepared(
            replicator=HorizontalReplicator(statistic=statistic, contexts=contexts, seed=self.config.seed),
            warnings=warnings,
            matching=matching,
            metadata={
                'pairs': len(matching),
                'matching': matching.method,
                'matching_cost': matching.total_cost,
                'graphs': len(graphs),
                'experiments': panel.K,
            }
        )

    def contexts(self, panel, graphs, statistic, treated, control, treated_from) -> Tuple[HorizontalContext, ...]:
        base = dict(
            Y_diff=panel.Y[treated] - panel.Y[control],
            treated_from=treated_from,
            X_treated=panel.X[treated],
            X_control=panel.X[control]
        )

        if not graphs:
            zeros = np.zeros(len(treated))

            return (HorizontalContext(N_treated=zeros, N_control=zeros, **base),)

        exposure = get_exposure(self.config.exposure) if statistic.requires_exposure else None
        contexts = []

        for graph in graphs:
            H = None if exposure is None else exposure.evaluate(graph, panel.W.astype(float))
            degree = neighbor_counts(graph)
            contexts.append(HorizontalContext(
                N_treated=degree[treated],
                N_control=degree[control],
                H_treated=None if H is None else H[treated],
                H_control=None if H is None else H[control],
                **base
            ))

        return tuple(contexts)
