"""
Power sweeps: for every (signal, rho) cell and replication, generate a
panel on a fixed network and run every configured test on it. Replication
r of a given rho uses the same covariates, allocation and errors for every
signal, so neighboring cells differ only in the signal
"""

import math
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .networks import gen_network
from .outcomes import gen_covariates, simulate_outcomes
from ..exceptions import IfscreenError
from ..graph.interference import InterferenceGraph
from ..panel import generate_allocation, make_panel
from ..permtests import run_test
from ..settings import SweepConfig, TestConfig
from ..typehints import Logger
from ..utils.rng import derive_seed
from ..utils.workers import chunked, map_ordered, resolve_workers

POWER_COLUMNS = ['test', 'statistic', 'signal', 'rho', 'power', 'se', 'replications']

Job = Tuple[int, int, int]


@dataclass
class SweepSettings:
    workers: Optional[int] = field(default=1)
    chunks_per_worker: int = field(default=4)

    logger: Logger = field(default_factory=logging.getLogger)


def run_replication(graph: InterferenceGraph,
                    sweep: SweepConfig,
                    tests: Sequence[TestConfig],
                    signal: float,
                    rho: float,
                    seed: int,
                    logger: Optional[Logger] = None) -> List[Optional[float]]:
    """
    p-values of every test on one simulated panel; None where a test failed
    """

    logger = logger or logging.getLogger(__name__)
    X = gen_covariates(graph.n, seed)
    W = generate_allocation(graph.n, sweep.pi, seed)
    Y = simulate_outcomes(graph, W, X, sweep.outcome_model(signal, rho), seed)
    panel = make_panel(W, Y, X, pi=sweep.pi, logger=logger)
    p_values: List[Optional[float]] = []

    for index, config in enumerate(tests):
        try:
            result = run_test(panel, graph, replace(config, seed=derive_seed(seed, 'test', index)))
            p_values.append(result.p_value)
        except (IfscreenError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.warning(f'{config.name} failed at signal={signal}, rho={rho}: {type(exc).__name__}: {exc}')
            p_values.append(None)

    return p_values


@dataclass(frozen=True, eq=False)
class ReplicationTask:
    graph: InterferenceGraph
    sweep: SweepConfig
    tests: Tuple[TestConfig, ...]
    seed: int

    def __call__(self, jobs: Sequence[Job]) -> List[List[Optional[float]]]:
        # worker processes log through their own root logger
        logger = logging.getLogger(__name__)

        return [
            run_replication(self.graph, self.sweep, self.tests,
                            self.sweep.signal_grid[signal_index],
                            self.sweep.variance_fractions[rho_index],
                            derive_seed(self.seed, 'replication', rho_index, replication),
                            logger=logger)
            for signal_index, rho_index, replication in jobs
        ]


def run_power_sweep(sweep: SweepConfig,
                    seed: int,
                    settings: Optional[SweepSettings] = None,
                    graph: Optional[InterferenceGraph] = None) -> pd.DataFrame:
    """
    Power table with one row per (test, signal, rho) cell: share of
    replications with p <= alpha and its Monte Carlo standard error.
    `replications` counts the replications that completed and `failed` the
    ones that raised, numerical errors from numpy and scipy included
    """

    settings = settings or SweepSettings()
    logger = settings.logger
    graph = graph or gen_network(sweep.network, seed, logger=logger)
    tests = tuple(sweep.test_configs())

    jobs: List[Job] = [
        (signal_index, rho_index, replication)
        for signal_index in range(len(sweep.signal_grid))
        for rho_index in range(len(sweep.variance_fractions))
        for replication in range(sweep.replications)
    ]

    workers = resolve_workers(settings.workers, logger)
    batches = [jobs[chunk.start:chunk.stop] for chunk in chunked(len(jobs), workers * settings.chunks_per_worker)]
    logger.info(f'running {len(jobs)} replications of {len(tests)} tests on {workers} workers')

    outputs = [p_values for batch in map_ordered(ReplicationTask(graph, sweep, tests, seed), batches, workers)
               for p_values in batch]

    rows = []

    for test_index, config in enumerate(tests):
        for signal_index, signal in enumerate(sweep.signal_grid):
            for rho_index, rho in enumerate(sweep.variance_fractions):
                p_values = [outputs[job_index][test_index]
                            for job_index, (job_signal, job_rho, _) in enumerate(jobs)
                            if job_signal == signal_index and job_rho == rho_index]
                rows.append(power_cell(config, signal, rho, p_values, sweep.alpha))

    table = pd.DataFrame(rows, columns=POWER_COLUMNS + ['failed'])
    incomplete = int((table['failed'] > 0).sum())

    if incomplete:
        logger.warning(f'{incomplete} cells are incomplete: some replications failed')

    return table


def power_cell(config: TestConfig, signal: float, rho: float,
               p_values: Sequence[Optional[float]], alpha: float) -> dict:
    completed = np.array([p for p in p_values if p is not None], dtype=float)
    replications = int(completed.size)

    if replications:
        power = float(np.mean(completed <= alpha))
        se = math.sqrt(power * (1 - power) / replications)
    else:
        power = se = math.nan

    return {
        'test': config.name,
        'statistic': config.statistic.kind,
        'signal': signal,
        'rho': rho,
        'power': power,
        'se': se,
        'replications': replications,
        'failed': len(p_values) - replications,
    }


def write_power_csv(table: pd.DataFrame, path: Union[str, Path]) -> None:
    table[POWER_COLUMNS].to_csv(path, index=False, float_format='%.10g', lineterminator='\n')
