"""
The permutation-test engine shared by the vertical and horizontal
families.

A test prepares a Replicator: a picklable object that knows the observed
statistic and how to evaluate replicate b from its own derived random
stream. The engine then evaluates replicates 0..B-1 in index-ordered chunks,
in-process or on a process pool, and reduces them in index order
"""

import abc
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .pvalues import exact_pvalue, pvalue
from ..entities import Matching, PanelDataset, PermutationTestResult
from ..exceptions import ConfigError, GraphError
from ..graph.interference import InterferenceGraph
from ..settings import TestConfig
from ..statistics import BaseStatistic, get_statistic
from ..typehints import Logger, Vector
from ..utils.workers import chunked, map_ordered, resolve_workers

EXHAUSTIVE_LIMIT = 5040

Graphs = Union[None, InterferenceGraph, Sequence[InterferenceGraph]]


@dataclass
class EngineSettings:
    # None: IFS_THREADS or every cpu; the result never depends on it
    workers: Optional[int] = field(default=1)
    chunks_per_worker: int = field(default=4)
    exhaustive_limit: int = field(default=EXHAUSTIVE_LIMIT)

    logger: Logger = field(default_factory=logging.getLogger)


class Replicator(abc.ABC):
    """
    Everything a worker needs to evaluate replicates. Must be picklable
    """

    @abc.abstractmethod
    def observed(self) -> float:
        """
        Statistic of the data as observed
        """

    @abc.abstractmethod
    def replicate(self, index: int) -> float:
        """
        Statistic under the index-th random group element
        """

    def group_size(self, limit: int) -> Optional[int]:
        """
        Number of elements of the randomization distribution, or None if
        it exceeds limit
        """

        return None

    def enumerate(self) -> Tuple[Vector, Optional[Vector]]:
        """
        Statistics under every element of the randomization distribution
        and their weights (None for uniform)
        """

        raise NotImplementedError


class ChunkEvaluator:
    def __init__(self, replicator: Replicator):
        self.replicator = replicator

    def __call__(self, chunk: range) -> List[float]:
        return [self.replicator.replicate(index) for index in chunk]


@dataclass
class Prepared:
    replicator: Replicator
    warnings: List[str] = field(default_factory=list)
    matching: Optional[Matching] = None
    metadata: Dict[str, Any] = field(default_factory=dict)


def bounded_factorial(size: int, limit: int) -> Optional[int]:
    product = 1

    for factor in range(2, size + 1):
        product *= factor

        if product > limit:
            return None

    return product


def as_graph_list(graphs: Graphs) -> List[InterferenceGraph]:
    if graphs is None:
        return []

    if isinstance(graphs, InterferenceGraph):
        return [graphs]

    return list(graphs)


class PermutationTest(abc.ABC):
    """
    A base class for all the permutation tests. Subclasses choose the
    experiments they look at and prepare the Replicator
    """

    algorithm: str = ''

    def __init__(self, config: TestConfig, settings: Optional[EngineSettings] = None):
        if config.algorithm != self.algorithm:
            raise ConfigError(f'{type(self).__name__} runs {self.algorithm} tests, '
                              f'config asks for {config.algorithm}')

        self.config = config
        self.settings = settings or EngineSettings()
        self.logger = self.settings.logger

    def select_experiments(self, panel: PanelDataset) -> PanelDataset:
        if self.config.experiments is None:
            return panel

        beyond = [experiment for experiment in self.config.experiments if experiment > panel.K]

        if beyond:
            raise ConfigError(f'experiments {beyond} do not exist in a panel of {panel.K} experiments')

        return panel.select_experiments([experiment - 1 for experiment in self.config.experiments])

    @abc.abstractmethod
    def prepare(self,
                panel: PanelDataset,
                graphs: List[InterferenceGraph],
                statistic: BaseStatistic) -> Prepared:
        """
        Splits or matches the units and packs the replicate data
        """

    def run(self, panel: PanelDataset, graphs: Graphs = None) -> PermutationTestResult:
        graphs = as_graph_list(graphs)

        for graph in graphs:
            if graph.n != panel.n:
                raise GraphError(f'graph has {graph.n} vertices, panel has {panel.n} units')

        panel = self.select_experiments(panel)
        statistic = get_statistic(self.config.statistic)
        statistic.check(self.algorithm, panel.K)

        if statistic.requires_exposure and not graphs:
            raise GraphError(f'graph required for exposure kind {self.config.exposure.kind}')

        self.logger.debug(f'preparing {self.config.name} test on {panel.n} units, {panel.K} experiments')
        prepared = self.prepare(panel, graphs, statistic)
        replicator = prepared.replicator
        t_observed = replicator.observed()

        exhaustive = False
        group_size = None

        if self.config.exhaustive:
            group_size = replicator.group_size(self.settings.exhaustive_limit)

            if group_size is None:
                warning = (f'permutation group exceeds {self.settings.exhaustive_limit} elements; '
                           f'falling back to {self.config.B} random replicates')
                self.logger.warning(warning)
                prepared.warnings.append(warning)
            else:
                exhaustive = True

        if exhaustive:
            self.logger.debug(f'enumerating all {group_size} group elements')
            t_replicates, weights = replicator.enumerate()
            p_value = exact_pvalue(t_observed, t_replicates, weights)
            prepared.metadata['group_size'] = group_size
        else:
            t_replicates = self.evaluate_replicates(replicator, self.config.B)
            p_value = pvalue(t_observed, t_replicates)

        self.logger.info(f'{self.config.name}: t0={t_observed:.6g}, p={p_value:.4g}')

        return PermutationTestResult(
            algorithm=self.algorithm,
            statistic_kind=self.config.statistic.kind,
            exposure_kind=self.config.exposure.kind if statistic.requires_exposure else None,
            B=len(t_replicates),
            seed=self.config.seed,
            t_observed=t_observed,
            t_replicates=np.asarray(t_replicates, dtype=float),
            p_value=p_value,
            warnings=tuple(prepared.warnings),
            exhaustive=exhaustive,
            matching=prepared.matching,
            metadata=prepared.metadata
        )

    def evaluate_replicates(self, replicator: Replicator, count: int) -> Vector:
        workers = resolve_workers(self.settings.workers, self.logger)
        chunks = chunked(count, workers * self.settings.chunks_per_worker)
        self.logger.debug(f'evaluating {count} replicates in {len(chunks)} chunks on {workers} workers')

        evaluated = map_ordered(ChunkEvaluator(replicator), chunks, workers)

        return np.array([value for chunk in evaluated for value in chunk], dtype=float)


def trivial_group_warning(logger: Logger) -> str:
    warning = 'permutation group trivial, p = 1'
    logger.warning(warning)

    return warning
