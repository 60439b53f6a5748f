"""
Test statistics are plug-ins: a statistic receives the observed (or
permuted) data of one replicate packed into a context and returns a
nonnegative real. The vertical family hands it focal units, the horizontal
family matched pairs
"""

import abc
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..exceptions import ConfigError, StatisticError
from ..settings import StatisticSpec
from ..typehints import IndexArray, Matrix, Vector


@dataclass(frozen=True, eq=False)
class VerticalContext:
    """
    Focal-unit data. H is the only field that changes between replicates.
    W is passed through although it is constant along each focal row
    """

    Y: Matrix
    W: Matrix
    X: Matrix
    N: Vector
    H: Matrix

    @property
    def K(self) -> int:
        return self.Y.shape[1]

    def with_exposures(self, H: Matrix) -> 'VerticalContext':
        return VerticalContext(Y=self.Y, W=self.W, X=self.X, N=self.N, H=H)


@dataclass(frozen=True, eq=False)
class HorizontalContext:
    """
    Matched-pair data, one row per pair. Y_diff[j, k] is the outcome of the
    treated unit minus the outcome of its control in experiment k; only the
    experiments treated_from[j]..K-1 are ever read. Replicates permute
    Y_diff along those experiments
    """

    Y_diff: Matrix
    treated_from: IndexArray
    X_treated: Matrix
    X_control: Matrix
    N_treated: Vector
    N_control: Vector
    H_treated: Optional[Matrix] = None
    H_control: Optional[Matrix] = None

    @property
    def K(self) -> int:
        return self.Y_diff.shape[1]

    @property
    def H_diff(self) -> Matrix:
        if self.H_treated is None or self.H_control is None:
            raise StatisticError('statistic needs exposures but none were computed')

        return self.H_treated - self.H_control

    def with_outcomes(self, Y_diff: Matrix) -> 'HorizontalContext':
        return HorizontalContext(
            Y_diff=Y_diff,
            treated_from=self.treated_from,
            X_treated=self.X_treated,
            X_control=self.X_control,
            N_treated=self.N_treated,
            N_control=self.N_control,
            H_treated=self.H_treated,
            H_control=self.H_control
        )

    def rows_of(self, experiment: int) -> IndexArray:
        """
        Pairs whose treated unit is treated in the given experiment
        """

        return np.flatnonzero(self.treated_from <= experiment)


class BaseStatistic(abc.ABC):
    """
    A base class to be inherited of for all the test statistics
    """

    kind: str = ''
    algorithms: Tuple[str, ...] = ()
    requires_exposure: bool = True

    def __init__(self, spec: StatisticSpec):
        self.spec = spec

    def supports(self, algorithm: str, K: int) -> bool:
        return algorithm in self.algorithms

    def check(self, algorithm: str, K: int) -> None:
        if not self.supports(algorithm, K):
            raise ConfigError(f'statistic {self.kind} is not available for the {algorithm} test '
                              f'with {K} experiments')

    def vertical(self, context: VerticalContext) -> float:
        """
        Statistic of focal-unit data (single_vertical and vertical tests)
        """

        raise StatisticError(f'statistic {self.kind} has no vertical form')

    def horizontal(self, context: HorizontalContext) -> float:
        """
        Statistic of matched-pair data (horizontal test)
        """

        raise StatisticError(f'statistic {self.kind} has no horizontal form')
