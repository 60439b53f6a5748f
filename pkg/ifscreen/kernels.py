"""
Numerical kernels behind every shipped test statistic: least squares,
Pearson correlation, difference-in-differences and the nested-model
F statistic. All of them are pure functions of their arguments
"""

import math
from itertools import combinations, permutations
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .entities import OlsFit
from .exceptions import StatisticError
from .typehints import Matrix, Vector

# a column is dependent on the ones before it when its diagonal entry in R
# is this small relative to the column norm
RANK_TOLERANCE = 1e-7
DEGENERATE_TOLERANCE = 1e-10
MIN_CORRELATION_LENGTH = 3
NESTING_TOLERANCE = 1e-6


def design_matrix(*blocks: Optional[Matrix], n: int, intercept: bool = True) -> Matrix:
    """
    Stacks an intercept column and the given vectors / matrices (None blocks
    are skipped) into an n x p design, left to right
    """

    columns = [np.ones((n, 1))] if intercept else []

    for block in blocks:
        if block is None:
            continue

        block = np.asarray(block, dtype=float)

        if block.ndim == 1:
            block = block[:, None]

        if block.shape[0] != n:
            raise StatisticError(f'design block has {block.shape[0]} rows, expected {n}')

        columns.append(block)

    return np.hstack(columns) if columns else np.empty((n, 0))


def ols_fit(design: Matrix, response: Vector) -> OlsFit:
    """
    Least squares through an economic QR decomposition. A column whose
    diagonal entry of R vanishes (relative to its norm) is a combination of
    the columns to its left and is dropped, so the rightmost member of
    every dependent set goes first. Dropped columns get a zero coefficient
    """

    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float)
    n, p = design.shape

    if response.shape != (n,):
        raise StatisticError(f'response has shape {response.shape}, design has {n} rows')

    if n < p:
        raise StatisticError(f'{n} observations cannot fit {p} columns')

    if not (np.isfinite(design).all() and np.isfinite(response).all()):
        raise StatisticError('design or response is not finite')

    norms = np.linalg.norm(design, axis=0)
    kept = [column for column in range(p) if norms[column] > 0]

    while kept:
        q, r = linalg.qr(design[:, kept], mode='economic')
        diagonal = np.abs(np.diag(r))
        small = np.flatnonzero(diagonal <= RANK_TOLERANCE * norms[kept])

        if not small.size:
            break

        del kept[small[0]]

    coefficients = np.zeros(p)

    if kept:
        coefficients[kept] = linalg.solve_triangular(r, q.T @ response)

    residuals = response - design @ coefficients

    return OlsFit(
        coefficients=coefficients,
        residual_sum_squares=float(max(residuals @ residuals, 0.0)),
        rank=len(kept),
        dof=n - len(kept),
        dropped=tuple(column for column in range(p) if column not in kept)
    )


def pearson(x: Vector, y: Vector) -> Optional[float]:
    """
    Pearson correlation, or None when either vector is (numerically)
    constant
    """

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    if x.shape != y.shape or x.ndim != 1:
        raise StatisticError(f'correlation of vectors with shapes {x.shape} and {y.shape}')

    if x.size < MIN_CORRELATION_LENGTH:
        raise StatisticError(f'correlation needs at least {MIN_CORRELATION_LENGTH} points, got {x.size}')

    centered_x = x - x.mean()
    centered_y = y - y.mean()
    spread_x = np.linalg.norm(centered_x)
    spread_y = np.linalg.norm(centered_y)

    if spread_x <= DEGENERATE_TOLERANCE * np.linalg.norm(x):
        return None

    if spread_y <= DEGENERATE_TOLERANCE * np.linalg.norm(y):
        return None

    return float(np.clip(centered_x @ centered_y / (spread_x * spread_y), -1.0, 1.0))


def _checked(value: float, name: str) -> float:
    if math.isnan(value):
        raise StatisticError(f'{name} statistic is nan')

    return value


def stat_reg_coef(response: Vector,
                  exposure: Vector,
                  X: Optional[Matrix] = None,
                  N: Optional[Vector] = None,
                  W: Optional[Vector] = None,
                  controls: Optional[Matrix] = None) -> float:
    """
    |coefficient of the exposure| in the regression of the response on an
    intercept, W, X, N, any extra controls and the exposure, the exposure
    being the last column. An exposure that the other regressors already
    span has no effect of its own: 0
    """

    response = np.asarray(response, dtype=float)
    design = design_matrix(W, X, N, controls, exposure, n=response.shape[0])
    fit = ols_fit(design, response)

    if design.shape[1] - 1 in fit.dropped:
        return 0.0

    return _checked(abs(float(fit.coefficients[-1])), 'reg_coef')


def stat_corr_diff(y_diff: Vector, h_delta: Vector) -> float:
    """
    |Corr(Y_diff, H_delta)|, 0 when either side is constant
    """

    correlation = pearson(y_diff, h_delta)

    return 0.0 if correlation is None else abs(correlation)


def stat_did(y_diffs: Sequence[Vector]) -> float:
    """
    |mean(Y_diff of the second experiment) - mean(Y_diff of the first)|
    """

    if len(y_diffs) != 2:
        raise StatisticError(f'did compares exactly two experiments, got {len(y_diffs)}')

    first, second = (np.asarray(y_diff, dtype=float) for y_diff in y_diffs)

    if not first.size or not second.size:
        raise StatisticError('did of an empty set of pairs')

    return _checked(abs(float(second.mean() - first.mean())), 'did')


def stat_did_adjusted(y_diffs: Sequence[Vector], covariates: Sequence[Matrix]) -> float:
    """
    did with each mean replaced by the fitted intercept of regressing that
    experiment's Y_diff on its covariates
    """

    if len(y_diffs) != 2 or len(covariates) != 2:
        raise StatisticError('adjusted did compares exactly two experiments')

    intercepts = []

    for y_diff, covariate in zip(y_diffs, covariates):
        y_diff = np.asarray(y_diff, dtype=float)

        if not y_diff.size:
            raise StatisticError('did of an empty set of pairs')

        fit = ols_fit(design_matrix(covariate, n=y_diff.size), y_diff)
        intercepts.append(fit.coefficients[0])

    return _checked(abs(float(intercepts[1] - intercepts[0])), 'did')


def stat_pairwise_corr_sum(Y: Matrix, H: Matrix) -> float:
    """
    Sum over ordered pairs k != l of |Corr(Y_k - Y_l, H_k - H_l)|
    """

    Y = np.asarray(Y, dtype=float)
    H = np.asarray(H, dtype=float)

    if Y.shape != H.shape or Y.ndim != 2:
        raise StatisticError(f'outcomes {Y.shape} and exposures {H.shape} do not line up')

    if Y.shape[1] < 2:
        raise StatisticError('pairwise correlation sum needs at least two experiments')

    return sum(stat_corr_diff(Y[:, k] - Y[:, l], H[:, k] - H[:, l])
               for k, l in permutations(range(Y.shape[1]), 2))


def stat_pairwise_reg_coef(Y: Matrix,
                           H: Matrix,
                           X: Optional[Matrix] = None,
                           N: Optional[Vector] = None) -> float:
    """
    Sum over pairs k < l of |coefficient of H_l - H_k| in the regression of
    Y_l - Y_k on X, N, H_k and H_l - H_k
    """

    Y = np.asarray(Y, dtype=float)
    H = np.asarray(H, dtype=float)

    if Y.shape != H.shape or Y.ndim != 2 or Y.shape[1] < 2:
        raise StatisticError(f'pairwise regression needs matching n x K (K >= 2) inputs, '
                             f'got {Y.shape} and {H.shape}')

    return sum(stat_reg_coef(Y[:, l] - Y[:, k], H[:, l] - H[:, k], X=X, N=N, controls=H[:, k])
               for k, l in combinations(range(Y.shape[1]), 2))


def stat_pairwise_corr_diff(Y: Matrix, H: Matrix) -> float:
    """
    Sum over pairs k < l of |Corr(Y_l - Y_k, H_l - H_k)|
    """

    Y = np.asarray(Y, dtype=float)
    H = np.asarray(H, dtype=float)

    if Y.shape != H.shape or Y.ndim != 2 or Y.shape[1] < 2:
        raise StatisticError(f'correlation difference needs matching n x K (K >= 2) inputs, '
                             f'got {Y.shape} and {H.shape}')

    return sum(stat_corr_diff(Y[:, l] - Y[:, k], H[:, l] - H[:, k])
               for k, l in combinations(range(Y.shape[1]), 2))


def _nested(reduced: Matrix, full: Matrix) -> bool:
    for column in reduced.T:
        residual = math.sqrt(ols_fit(full, column).residual_sum_squares)

        if residual > NESTING_TOLERANCE * max(float(np.linalg.norm(column)), 1.0):
            return False

    return True


def f_statistic(response: Vector, reduced: Matrix, full: Matrix) -> float:
    """
    Nested-model comparison
        F = [(RSS_reduced - RSS_full) / (p_full - p_reduced)] / [RSS_full / (n - p_full)]
    with p the column ranks. The reduced design must lie in the span of
    the full one
    """

    response = np.asarray(response, dtype=float)
    reduced = np.asarray(reduced, dtype=float)
    full = np.asarray(full, dtype=float)
    n = response.shape[0]

    if reduced.shape[0] != n or full.shape[0] != n:
        raise StatisticError('designs and response have different row counts')

    if n < full.shape[1]:
        raise StatisticError(f'{n} rows leave no residual degrees of freedom for {full.shape[1]} columns')

    full_fit = ols_fit(full, response)
    reduced_fit = ols_fit(reduced, response)

    if not _nested(reduced, full):
        raise StatisticError('models are not nested: the reduced design leaves the span of the full one')

    added = full_fit.rank - reduced_fit.rank
    dof = n - full_fit.rank

    if dof <= 0:
        raise StatisticError(f'full model has {dof} residual degrees of freedom')

    if added == 0:
        return 0.0

    rss_full = full_fit.residual_sum_squares
    explained = max(reduced_fit.residual_sum_squares - rss_full, 0.0)
    scale = max(float(response @ response), 1.0)

    if rss_full <= DEGENERATE_TOLERANCE * scale:
        return math.inf if explained > DEGENERATE_TOLERANCE * scale else 0.0

    return _checked((explained / added) / (rss_full / dof), 'anova_f')


def stat_anova_f(y_diff: Vector,
                 covariates: Optional[Matrix],
                 exposures: Matrix,
                 indicators: Optional[Matrix]) -> float:
    """
    F of the model with intercept, covariates, exposures and experiment
    indicators against the one with intercept and covariates only
    """

    y_diff = np.asarray(y_diff, dtype=float)
    n = y_diff.shape[0]
    reduced = design_matrix(covariates, n=n)
    full = design_matrix(covariates, exposures, indicators, n=n)

    return f_statistic(y_diff, reduced, full)
