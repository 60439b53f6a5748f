"""
Vertical tests: the statistic is computed on focal units only, and the
randomness comes from the treatments of the auxiliary units. The
one-experiment test regenerates those treatments from Bernoulli(pi); the
multi-experiment test permutes whole treatment rows among auxiliary units,
which keeps the increasing allocation intact
"""

import itertools
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse

from .base import PermutationTest, Prepared, Replicator, bounded_factorial
from ..entities import PanelDataset
from ..exceptions import ConfigError, InfeasibleTestError
from ..graph.exposure import get_exposure, isolated_units, neighbor_counts
from ..graph.interference import InterferenceGraph
from ..panel import INAPPLICABLE_VERTICAL, classify_units, sample_focal_split, sample_uniform_split
from ..settings import ExposureSpec
from ..statistics import BaseStatistic, VerticalContext
from ..typehints import IndexArray, Matrix, Vector
from ..utils.rng import derive


def focal_contexts(panel: PanelDataset,
                   graphs: List[InterferenceGraph],
                   focal: IndexArray,
                   exposure_spec: ExposureSpec) -> Tuple[Tuple[VerticalContext, ...], Tuple[sparse.csr_matrix, ...]]:
    """
    One context per graph, plus the exposure operators restricted to the
    focal rows (H_focal = operator @ W)
    """

    exposure = get_exposure(exposure_spec)
    W = panel.W.astype(float)
    contexts = []
    operators = []

    for graph in graphs:
        operator = exposure.restricted(graph, focal)
        operators.append(operator)
        contexts.append(VerticalContext(
            Y=panel.Y[focal],
            W=W[focal],
            X=panel.X[focal],
            N=neighbor_counts(graph, focal),
            H=np.asarray(operator @ W)
        ))

    return tuple(contexts), tuple(operators)


@dataclass(frozen=True, eq=False)
class VerticalReplicator(Replicator):
    statistic: BaseStatistic
    contexts: Tuple[VerticalContext, ...]
    operators: Tuple[sparse.csr_matrix, ...]
    W: Matrix
    auxiliary: IndexArray
    seed: int

    def statistic_of(self, W: Matrix) -> float:
        """
        Sum over graphs of the statistic with exposures recomputed from W
        """

        return sum(self.statistic.vertical(context.with_exposures(np.asarray(operator @ W)))
                   for context, operator in zip(self.contexts, self.operators))

    def permuted(self, order: np.ndarray) -> Matrix:
        W = self.W.copy()
        W[self.auxiliary] = self.W[self.auxiliary[order]]

        return W

    def observed(self) -> float:
        return self.statistic_of(self.W)

    def replicate(self, index: int) -> float:
        rng = derive(self.seed, 'vertical_permutation', index)

        return self.statistic_of(self.permuted(rng.permutation(self.auxiliary.size)))

    def group_size(self, limit: int) -> Optional[int]:
        return bounded_factorial(self.auxiliary.size, limit)

    def enumerate(self) -> Tuple[Vector, Optional[Vector]]:
        statistics = [self.statistic_of(self.permuted(np.asarray(order, dtype=np.int64)))
                      for order in itertools.permutations(range(self.auxiliary.size))]

        return np.asarray(statistics), None


@dataclass(frozen=True, eq=False)
class RegenerationReplicator(VerticalReplicator):
    """
    Auxiliary treatments redrawn i.i.d. Bernoulli(pi) in the only experiment
    """

    pi: float = 0.5

    def regenerated(self, draws: np.ndarray) -> Matrix:
        W = self.W.copy()
        W[self.auxiliary, 0] = draws

        return W

    def replicate(self, index: int) -> float:
        rng = derive(self.seed, 'single_vertical_draw', index)

        return self.statistic_of(self.regenerated(rng.random(self.auxiliary.size) < self.pi))

    def group_size(self, limit: int) -> Optional[int]:
        size = 2 ** min(self.auxiliary.size, limit.bit_length())

        return size if size <= limit else None

    def enumerate(self) -> Tuple[Vector, Optional[Vector]]:
        statistics = []
        weights = []

        for draws in itertools.product((0.0, 1.0), repeat=self.auxiliary.size):
            treated = int(sum(draws))
            statistics.append(self.statistic_of(self.regenerated(np.asarray(draws))))
            weights.append(self.pi ** treated * (1 - self.pi) ** (self.auxiliary.size - treated))

        return np.asarray(statistics), np.asarray(weights)


def _isolation_warnings(graphs: List[InterferenceGraph], focal: IndexArray,
                        exposure_spec: ExposureSpec, logger) -> List[str]:
    warnings = []

    for graph in graphs:
        isolated = isolated_units(graph, exposure_spec, focal, logger=logger)

        if isolated.size:
            warnings.append(f'{isolated.size} focal units have no neighbors')

    return warnings


class SingleVerticalTest(PermutationTest):
    """
    One experiment: a W-independent uniform focal set, auxiliary treatments
    regenerated from the known pi
    """

    algorithm = 'single_vertical'

    def select_experiments(self, panel: PanelDataset) -> PanelDataset:
        if self.config.experiments is None:
            return panel.select_experiments([panel.K - 1])

        return super().select_experiments(panel)

    def prepare(self, panel, graphs, statistic) -> Prepared:
        if panel.K != 1:
            raise ConfigError(f'single_vertical runs on one experiment, got {panel.K}')

        pi = float(panel.pi[0])

        if not 0 < pi < 1:
            raise ConfigError(f'single_vertical needs a known pi in (0, 1), got {pi}')

        split = sample_uniform_split(panel.n, self.config.focal_target, self.config.seed)
        contexts, operators = focal_contexts(panel, graphs, split.focal, self.config.exposure)
        warnings = list(split.warnings)
        warnings.extend(_isolation_warnings(graphs, split.focal, self.config.exposure, self.logger))

        return Prepared(
            replicator=RegenerationReplicator(
                statistic=statistic,
                contexts=contexts,
                operators=operators,
                W=panel.W.astype(float),
                auxiliary=split.auxiliary,
                seed=self.config.seed,
                pi=pi
            ),
            warnings=warnings,
            metadata={
                'focal_units': int(split.focal.size),
                'auxiliary_units': int(split.auxiliary.size),
                'graphs': len(graphs),
                'pi': pi,
            }
        )


class VerticalTest(PermutationTest):
    """
    Two or more experiments: focal units drawn from the constant-treatment
    units, auxiliary treatment rows permuted. Several graphs share the split
    and the permutations and their statistics are summed
    """

    algorithm = 'vertical'

    def prepare(self, panel, graphs, statistic) -> Prepared:
        if panel.K < 2:
            raise ConfigError('vertical needs at least two experiments; use single_vertical for one')

        classification = classify_units(panel.W)

        if classification.nc.size < 2:
            raise InfeasibleTestError(INAPPLICABLE_VERTICAL if not classification.nc.size else
                                      f'only {classification.nc.size} constant-treatment unit; '
                                      f'vertical test needs at least 2',
                                      constant_units=int(classification.nc.size))

        split = sample_focal_split(classification, self.config.focal_target, self.config.seed,
                                   logger=self.logger)
        contexts, operators = focal_contexts(panel, graphs, split.focal, self.config.exposure)
        warnings = list(split.warnings)
        warnings.extend(_isolation_warnings(graphs, split.focal, self.config.exposure, self.logger))

        return Prepared(
            replicator=VerticalReplicator(
                statistic=statistic,
                contexts=contexts,
                operators=operators,
                W=panel.W.astype(float),
                auxiliary=split.auxiliary,
                seed=self.config.seed
            ),
            warnings=warnings,
            metadata={
                'focal_units': int(split.focal.size),
                'auxiliary_units': int(split.auxiliary.size),
                'constant_units': int(classification.nc.size),
                'graphs': len(graphs),
                'experiments': panel.K,
            }
        )
