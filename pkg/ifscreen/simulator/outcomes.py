"""
Semi-synthetic outcomes: two covariates, equicorrelated errors and four
outcome families in which interference enters through the share (linear)
or the number (nonlinear) of treated neighbors, scaled by the signal
strength. Signal 0 gives outcomes that depend on the unit's own treatment
only
"""

from typing import Optional

import numpy as np

from ..exceptions import ConfigError, GraphError
from ..graph.exposure import FracFriends, NumFriends
from ..graph.interference import InterferenceGraph
from ..settings import ExposureSpec, OutcomeModelConfig
from ..typehints import BinaryMatrix, Matrix
from ..utils.rng import derive

SATURATION = 20


def gen_covariates(n: int, seed: int) -> Matrix:
    """
    X1 ~ N(0.5, 1) and X2 ~ Poisson(3), independent
    """

    if n < 1:
        raise ConfigError(f'n must be at least 1, got {n}')

    rng = derive(seed, 'covariates')

    return np.column_stack((rng.normal(0.5, 1.0, n), rng.poisson(3.0, n).astype(float)))


def gen_errors(n: int, K: int, rho: float, seed: int) -> Matrix:
    """
    Rows independent, unit variances, within-row covariance rho
    """

    if not 0 <= rho < 1:
        raise ConfigError(f'common variance fraction must lie in [0, 1), got {rho}')

    rng = derive(seed, 'errors')
    common = rng.standard_normal((n, 1))
    own = rng.standard_normal((n, K))

    return np.sqrt(rho) * common + np.sqrt(1 - rho) * own


def nonlinear_term(M: Matrix) -> Matrix:
    """
    M / 20 + 5 exp(min(M, 20) / 50)
    """

    M = np.asarray(M, dtype=float)

    return M / 20 + 5 * np.exp(np.minimum(M, SATURATION) / 50)


def simulate_outcomes(graph: Optional[InterferenceGraph],
                      W: BinaryMatrix,
                      X: Matrix,
                      model: OutcomeModelConfig,
                      seed: int) -> Matrix:
    if graph is None:
        raise GraphError('outcome simulation needs an interference graph')

    W = np.asarray(W, dtype=float)
    X = np.asarray(X, dtype=float)
    n, K = W.shape

    if graph.n != n:
        raise GraphError(f'graph has {graph.n} vertices, allocation has {n} units')

    if X.shape != (n, 2):
        raise ConfigError(f'outcome models use two covariates, got X of shape {X.shape}')

    signal = model.signal_strength
    X1, X2 = X[:, :1], X[:, 1:]

    if model.family in ('linear_general', 'linear_tfe'):
        interference = FracFriends(ExposureSpec('fracFrds')).evaluate(graph, W)
    else:
        interference = nonlinear_term(NumFriends(ExposureSpec('numFrds')).evaluate(graph, W))

    if model.family.endswith('_tfe'):
        # treated and control units respond differently to exposure
        interference = (2 * W + 1) * interference

    if model.family == 'nonlinear_tfe':
        baseline = X1 * X2 + ((X1 > 0.5) & (X2 > 3.5))
    else:
        baseline = X1 + X2

    Y = signal * interference + 2 * W + baseline + gen_errors(n, K, model.common_variance_fraction, seed)

    if model.time_effects is not None:
        if len(model.time_effects) != K:
            raise ConfigError(f'{len(model.time_effects)} time effects for {K} experiments')

        Y = Y + np.asarray(model.time_effects)[None, :]

    return Y
