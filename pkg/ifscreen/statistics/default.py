from typing import Dict, List, Optional, Type

import numpy as np

from .base import BaseStatistic, HorizontalContext, VerticalContext
from .. import kernels
from ..exceptions import ConfigError, StatisticError
from ..settings import StatisticSpec
from ..typehints import Matrix


def _pair_covariates(context: HorizontalContext, spec: StatisticSpec,
                     rows: Optional[np.ndarray] = None) -> Optional[Matrix]:
    """
    Covariates of both members of every pair: X_treated, X_control,
    N_treated, N_control, as switched on by the StatisticSpec flags
    """

    rows = slice(None) if rows is None else rows
    blocks: List[Matrix] = []

    if spec.use_covariates:
        blocks.extend((context.X_treated[rows], context.X_control[rows]))

    if spec.use_neighbor_count:
        blocks.append(np.column_stack((context.N_treated[rows], context.N_control[rows])))

    blocks = [block for block in blocks if block.shape[1]]

    return np.hstack(blocks) if blocks else None


class RegressionCoefficient(BaseStatistic):
    """
    One experiment: |coef of H| in Y ~ W + X + N + H.
    Several experiments: the two-experiment regression
    Y_l - Y_k ~ X + N + H_k + (H_l - H_k) summed over pairs k < l.
    Horizontal: the same regression on the pair differences of the last
    two experiments
    """

    kind = 'reg_coef'
    algorithms = ('single_vertical', 'vertical', 'horizontal')

    def supports(self, algorithm: str, K: int) -> bool:
        if algorithm == 'single_vertical':
            return K == 1

        return algorithm in self.algorithms and K >= 2

    def vertical(self, context: VerticalContext) -> float:
        X = context.X if self.spec.use_covariates and context.X.shape[1] else None
        N = context.N if self.spec.use_neighbor_count else None

        if context.K == 1:
            W = context.W[:, 0] if self.spec.use_treatment else None

            return kernels.stat_reg_coef(context.Y[:, 0], context.H[:, 0], X=X, N=N, W=W)

        return kernels.stat_pairwise_reg_coef(context.Y, context.H, X=X, N=N)

    def horizontal(self, context: HorizontalContext) -> float:
        last = context.K - 1
        rows = context.rows_of(last - 1)
        Y_diff = context.Y_diff[rows]
        H_diff = context.H_diff[rows]

        return kernels.stat_reg_coef(
            Y_diff[:, last] - Y_diff[:, last - 1],
            H_diff[:, last] - H_diff[:, last - 1],
            X=_pair_covariates(context, self.spec, rows),
            controls=H_diff[:, last - 1]
        )


class CorrelationDifference(BaseStatistic):
    """
    Vertical: sum over pairs k < l of |Corr(Y_l - Y_k, H_l - H_k)|.
    Horizontal: |Corr(Y_diff_K - Y_diff_K-1, H_diff_K - H_diff_K-1)|
    """

    kind = 'corr_diff'
    algorithms = ('vertical', 'horizontal')

    def supports(self, algorithm: str, K: int) -> bool:
        return algorithm in self.algorithms and K >= 2

    def vertical(self, context: VerticalContext) -> float:
        return kernels.stat_pairwise_corr_diff(context.Y, context.H)

    def horizontal(self, context: HorizontalContext) -> float:
        last = context.K - 1
        rows = context.rows_of(last - 1)
        Y_diff = context.Y_diff[rows]
        H_diff = context.H_diff[rows]

        return kernels.stat_corr_diff(Y_diff[:, last] - Y_diff[:, last - 1],
                                      H_diff[:, last] - H_diff[:, last - 1])


class PairwiseCorrelationSum(BaseStatistic):
    kind = 'pairwise_corr_sum'
    algorithms = ('vertical',)

    def supports(self, algorithm: str, K: int) -> bool:
        return algorithm in self.algorithms and K >= 2

    def vertical(self, context: VerticalContext) -> float:
        return kernels.stat_pairwise_corr_sum(context.Y, context.H)


class DifferenceInDifferences(BaseStatistic):
    """
    Change of the mean pair difference between the last two experiments.
    With use_covariates the means become intercepts of a regression on the
    covariates of both pair members
    """

    kind = 'did'
    algorithms = ('horizontal',)
    requires_exposure = False

    def supports(self, algorithm: str, K: int) -> bool:
        return algorithm in self.algorithms and K >= 2

    def horizontal(self, context: HorizontalContext) -> float:
        last = context.K - 1
        rows = context.rows_of(last - 1)
        y_diffs = [context.Y_diff[rows, last - 1], context.Y_diff[rows, last]]
        covariates = _pair_covariates(context, self.spec, rows)

        if covariates is None:
            return kernels.stat_did(y_diffs)

        return kernels.stat_did_adjusted(y_diffs, [covariates, covariates])


class AnovaF(BaseStatistic):
    """
    Stacks, for every experiment k, the pairs treated in k. The full model
    adds the exposures of both pair members and the indicators of
    experiments 2..K to the intercept and the pair covariates
    """

    kind = 'anova_f'
    algorithms = ('horizontal',)

    def supports(self, algorithm: str, K: int) -> bool:
        return algorithm in self.algorithms and K >= 2

    def horizontal(self, context: HorizontalContext) -> float:
        if context.H_treated is None or context.H_control is None:
            raise StatisticError('anova_f needs exposures but none were computed')

        rows, experiments = self.layout(context)
        covariates = _pair_covariates(context, self.spec, rows)
        exposures = np.column_stack((context.H_treated[rows, experiments],
                                     context.H_control[rows, experiments]))
        indicators = (experiments[:, None] == np.arange(1, context.K)[None, :]).astype(float)

        return kernels.stat_anova_f(context.Y_diff[rows, experiments], covariates, exposures, indicators)

    @staticmethod
    def layout(context: HorizontalContext):
        rows = [context.rows_of(experiment) for experiment in range(context.K)]
        experiments = [np.full(len(chunk), experiment) for experiment, chunk in enumerate(rows)]

        return np.concatenate(rows), np.concatenate(experiments)


STATISTICS: Dict[str, Type[BaseStatistic]] = {
    statistic.kind: statistic for statistic in (RegressionCoefficient, CorrelationDifference,
                                                PairwiseCorrelationSum, DifferenceInDifferences, AnovaF)
}


def get_statistic(spec: StatisticSpec) -> BaseStatistic:
    try:
        return STATISTICS[spec.kind](spec)
    except KeyError:
        raise ConfigError(f'unknown statistic kind {spec.kind!r}')
