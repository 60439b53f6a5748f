"""
The experimental panel: increasing-allocation treatment generation,
validation, unit classification, focal/auxiliary splits and CSV ingestion
"""

import re
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .entities import PanelDataset, SplitResult, UnitClassification
from .exceptions import InfeasibleTestError, ValidationError, Violation
from .typehints import BinaryMatrix, Logger, Vector
from .utils.rng import derive

INAPPLICABLE_VERTICAL = 'no constant-treatment units; vertical test inapplicable'


def pi_violations(pi: Sequence[float]) -> List[Violation]:
    pi = np.asarray(pi, dtype=float)
    violations = []

    if pi.ndim != 1 or pi.size == 0:
        return [Violation('pi', None, None, 'pi must be a non-empty vector')]

    for col, value in enumerate(pi):
        if not 0 < value < 1:
            violations.append(Violation('pi', None, col, f'pi[{col + 1}]={value} is outside (0, 1)'))

    for col in range(1, pi.size):
        if not pi[col] > pi[col - 1]:
            violations.append(Violation('pi', None, col,
                                        f'pi is not strictly increasing at experiment {col + 1} '
                                        f'({pi[col - 1]} -> {pi[col]})'))

    return violations


def conditional_probabilities(pi: Sequence[float]) -> Vector:
    """
    Probability of entering treatment in experiment k for a unit still in
    control after experiment k-1: pi[0], then (pi[k] - pi[k-1]) / (1 - pi[k-1])
    """

    pi = np.asarray(pi, dtype=float)
    violations = pi_violations(pi)

    if violations:
        raise ValidationError(violations=violations)

    previous = np.concatenate(([0.0], pi[:-1]))

    return (pi - previous) / (1 - previous)


def generate_allocation(n: int, pi: Sequence[float], seed: int) -> BinaryMatrix:
    if n < 1:
        raise ValidationError(f'n must be at least 1, got {n}')

    probabilities = conditional_probabilities(pi)
    rng = derive(seed, 'allocation')
    draws = rng.random((n, probabilities.size)) < probabilities

    # a treated unit stays treated
    return np.logical_or.accumulate(draws, axis=1).astype(np.uint8)


def make_panel(W, Y, X=None, pi=None, unit_ids=None, validate: bool = True,
               logger: Optional[Logger] = None) -> PanelDataset:
    """
    Builds a PanelDataset from array-likes. pi defaults to the column means
    of W (with a warning), unit_ids to '0'..'n-1'
    """

    logger = logger or logging.getLogger(__name__)

    W = np.asarray(W)
    Y = np.asarray(Y, dtype=float)

    if W.ndim == 1:
        W = W[:, None]

    if Y.ndim == 1:
        Y = Y[:, None]

    if X is None:
        X = np.empty((W.shape[0], 0))

    X = np.asarray(X, dtype=float)

    if X.ndim == 1:
        X = X[:, None]

    if pi is None:
        pi = W.mean(axis=0)
        logger.warning(f'pi not supplied; inferred as column means of W: {np.round(pi, 4).tolist()}')

    if unit_ids is None:
        unit_ids = [str(index) for index in range(W.shape[0])]

    panel = PanelDataset(
        W=W.astype(np.uint8) if np.isin(W, (0, 1)).all() else W,
        Y=Y,
        X=X,
        pi=np.asarray(pi, dtype=float),
        unit_ids=tuple(str(unit_id) for unit_id in unit_ids)
    )

    if validate:
        validate_panel(panel)

    return panel


def validate_panel(panel: PanelDataset) -> None:
    """
    Returns normally iff every PanelDataset invariant holds, raises
    ValidationError listing every violation otherwise
    """

    violations: List[Violation] = []
    W, Y, X = panel.W, panel.Y, panel.X

    if W.ndim != 2:
        raise ValidationError(violations=[Violation('shape', None, None, f'W must be 2-d, got shape {W.shape}')])

    n, K = W.shape

    if Y.shape != (n, K):
        violations.append(Violation('shape', None, None, f'Y has shape {Y.shape}, W has {(n, K)}'))

    if X.ndim != 2 or X.shape[0] != n:
        violations.append(Violation('shape', None, None, f'X has shape {X.shape}, expected {n} rows'))

    if len(panel.unit_ids) != n:
        violations.append(Violation('shape', None, None,
                                    f'{len(panel.unit_ids)} unit ids for {n} units'))
    elif len(set(panel.unit_ids)) != n:
        violations.append(Violation('unit_ids', None, None, 'unit ids are not unique'))

    if np.shape(panel.pi) != (K,):
        violations.append(Violation('shape', None, None, f'pi has shape {np.shape(panel.pi)}, expected ({K},)'))
    else:
        violations.extend(pi_violations(panel.pi))

    for row, col in zip(*np.nonzero(~np.isin(W, (0, 1)))):
        violations.append(Violation('binary', int(row), int(col),
                                    f'W[{_unit(panel, row)}, experiment {col + 1}]={W[row, col]} is not 0/1'))

    # a treated unit must stay treated
    for row, col in zip(*np.nonzero(np.diff(W.astype(np.int64), axis=1) < 0)):
        violations.append(Violation('monotonicity', int(row), int(col) + 1,
                                    f'unit {_unit(panel, row)} leaves treatment at experiment {col + 2}'))

    for name, matrix in (('Y', Y), ('X', X)):
        if matrix.ndim != 2 or matrix.shape[0] != n:
            continue

        for row, col in zip(*np.nonzero(~np.isfinite(matrix))):
            violations.append(Violation('finite', int(row), int(col),
                                        f'{name}[{_unit(panel, row)}, {col + 1}]={matrix[row, col]} is not finite'))

    if violations:
        raise ValidationError(violations=violations)


def _unit(panel: PanelDataset, row: int) -> str:
    if row < len(panel.unit_ids):
        return f'row {row + 1} ({panel.unit_ids[row]})'

    return f'row {row + 1}'


def classify_units(W: BinaryMatrix) -> UnitClassification:
    W = np.asarray(W, dtype=bool)
    n, K = W.shape

    constant = (W == W[:, :1]).all(axis=1)
    never = ~W.any(axis=1)
    treated_late = W[:, -2:].all(axis=1) if K >= 2 else W[:, 0]
    treated_from = np.where(never, K, W.argmax(axis=1))

    return UnitClassification(
        n=n,
        K=K,
        nc=np.flatnonzero(constant),
        zero=np.flatnonzero(never),
        one=np.flatnonzero(treated_late),
        treated_from=treated_from.astype(np.int64)
    )


def default_focal_target(n: int) -> int:
    return max(1, n // 2)


def sample_focal_split(classification: UnitClassification,
                       target_size: Optional[int],
                       seed: int,
                       logger: Optional[Logger] = None) -> SplitResult:
    """
    Focal units drawn uniformly from the constant-treatment units. The
    target is clamped to |I_nc| with a warning
    """

    logger = logger or logging.getLogger(__name__)
    target_size = default_focal_target(classification.n) if target_size is None else target_size

    if target_size < 1:
        raise ValidationError(f'focal target size must be at least 1, got {target_size}')

    candidates = classification.nc

    if candidates.size == 0:
        raise InfeasibleTestError(INAPPLICABLE_VERTICAL)

    warnings = []

    if target_size > candidates.size:
        warning = (f'focal target {target_size} exceeds the {candidates.size} constant-treatment units; '
                   f'using {candidates.size} focal units')
        logger.warning(warning)
        warnings.append(warning)
        target_size = candidates.size

    rng = derive(seed, 'focal_split')
    focal = np.sort(rng.choice(candidates, size=target_size, replace=False))

    return SplitResult(
        focal=focal,
        auxiliary=np.setdiff1d(np.arange(classification.n), focal),
        warnings=tuple(warnings)
    )


def sample_uniform_split(n: int, target_size: Optional[int], seed: int) -> SplitResult:
    """
    A focal set drawn uniformly from all units, independently of W; the
    split the one-experiment test needs
    """

    target_size = default_focal_target(n) if target_size is None else target_size

    if not 1 <= target_size < n:
        raise ValidationError(f'focal target size must lie in [1, {n - 1}], got {target_size}')

    rng = derive(seed, 'uniform_split')
    focal = np.sort(rng.choice(n, size=target_size, replace=False))

    return SplitResult(focal=focal, auxiliary=np.setdiff1d(np.arange(n), focal))


# ingestion

COLUMN_PATTERN = re.compile(r'^([wyx])(\d+)$', re.IGNORECASE)


def _numbered_columns(frame: pd.DataFrame, prefix: str) -> List[str]:
    numbered = []

    for column in frame.columns:
        match = COLUMN_PATTERN.match(str(column))

        if match and match.group(1).lower() == prefix:
            numbered.append((int(match.group(2)), column))

    return [column for _, column in sorted(numbered)]


def _read_csv(path: Union[str, Path]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={'unit_id': str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ValidationError(f'failed to read {path}: {exc}', path=str(path))

    if 'unit_id' not in frame.columns:
        raise ValidationError(f'{path}: missing unit_id column', path=str(path))

    return frame


def panel_from_frame(frame: pd.DataFrame,
                     pi: Optional[Sequence[float]] = None,
                     logger: Optional[Logger] = None) -> PanelDataset:
    w_columns = _numbered_columns(frame, 'w')
    y_columns = _numbered_columns(frame, 'y')
    x_columns = _numbered_columns(frame, 'x')

    if not w_columns:
        raise ValidationError('panel has no treatment columns w1..wK')

    if len(w_columns) != len(y_columns):
        raise ValidationError(f'{len(w_columns)} treatment columns but {len(y_columns)} outcome columns')

    return make_panel(
        W=frame[w_columns].to_numpy(),
        Y=frame[y_columns].to_numpy(dtype=float),
        X=frame[x_columns].to_numpy(dtype=float) if x_columns else None,
        pi=pi,
        unit_ids=frame['unit_id'].tolist(),
        logger=logger
    )


def read_panel_csv(path: Union[str, Path],
                   pi: Optional[Sequence[float]] = None,
                   logger: Optional[Logger] = None) -> PanelDataset:
    """
    panel.csv with header unit_id,w1..wK,y1..yK,x1..xd
    """

    return panel_from_frame(_read_csv(path), pi=pi, logger=logger)


def read_panel_files(treatments: Union[str, Path],
                     outcomes: Union[str, Path],
                     covariates: Optional[Union[str, Path]] = None,
                     pi: Optional[Sequence[float]] = None,
                     logger: Optional[Logger] = None) -> PanelDataset:
    """
    treatments.csv / outcomes.csv / covariates.csv joined on unit_id, in the
    row order of the treatments file
    """

    frame = _read_csv(treatments)

    for path in filter(None, (outcomes, covariates)):
        other = _read_csv(path)
        missing = set(frame['unit_id']) - set(other['unit_id'])

        if missing:
            raise ValidationError(f'{path}: no rows for units {sorted(missing)[:10]}', path=str(path))

        try:
            frame = frame.merge(other, on='unit_id', how='left', validate='one_to_one')
        except pd.errors.MergeError as exc:
            raise ValidationError(f'{path}: duplicated unit ids: {exc}', path=str(path))

    return panel_from_frame(frame, pi=pi, logger=logger)


def write_panel_csv(panel: PanelDataset, path: Union[str, Path]) -> None:
    columns = {'unit_id': list(panel.unit_ids)}
    columns.update({f'w{k + 1}': panel.W[:, k] for k in range(panel.K)})
    columns.update({f'y{k + 1}': panel.Y[:, k] for k in range(panel.K)})
    columns.update({f'x{j + 1}': panel.X[:, j] for j in range(panel.d)})

    pd.DataFrame(columns).to_csv(path, index=False, float_format='%.17g')
