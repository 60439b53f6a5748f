from typing import Optional, Sequence

import numpy as np

from ..exceptions import StatisticError, ValidationError
from ..typehints import Vector


def _statistics(t0: float, t_reps: Sequence[float]) -> Vector:
    t_reps = np.asarray(t_reps, dtype=float)

    if not t_reps.size:
        raise StatisticError('no replicate statistics')

    if np.isnan(t0) or np.isnan(t_reps).any():
        raise StatisticError('statistic is nan')

    return t_reps


def pvalue(t0: float, t_reps: Sequence[float]) -> float:
    """
    (1 + #{b : t0 <= t_b}) / (B + 1), ties counted against the observation
    """

    t_reps = _statistics(t0, t_reps)

    return float((1 + np.count_nonzero(t0 <= t_reps)) / (t_reps.size + 1))


def exact_pvalue(t0: float, t_group: Sequence[float], weights: Optional[Sequence[float]] = None) -> float:
    """
    Share of the whole randomization distribution (every group element, or
    every weighted treatment draw) at least as large as t0
    """

    t_group = _statistics(t0, t_group)

    if weights is None:
        return float(np.count_nonzero(t0 <= t_group) / t_group.size)

    weights = np.asarray(weights, dtype=float)

    return float(min(1.0, weights[t0 <= t_group].sum() / weights.sum()))


def aggregate_pvalues(ps: Sequence[float]) -> float:
    """
    min(1, 2 * mean(p)): valid for dependent p-values
    """

    ps = np.asarray(ps, dtype=float)

    if not ps.size:
        raise ValidationError('no p-values to aggregate')

    if ((ps <= 0) | (ps > 1) | np.isnan(ps)).any():
        raise ValidationError(f'p-values must lie in (0, 1], got {ps.tolist()}')

    return float(min(1.0, 2 * ps.mean()))
