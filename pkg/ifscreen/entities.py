"""
Immutable domain values shared by every module. Arrays stored here are
never written to after construction; operations return new objects
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .typehints import BinaryMatrix, IndexArray, Matrix, UnitId, Vector


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """
    Treatments W (n x K), outcomes Y (n x K), covariates X (n x d) and the
    marginal treatment probabilities pi (K) of a sequence of experiments
    with increasing allocation. Construction does not validate; call
    panel.validate_panel() for that
    """

    W: BinaryMatrix
    Y: Matrix
    X: Matrix
    pi: Vector
    unit_ids: Tuple[UnitId, ...]

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def K(self) -> int:
        return self.W.shape[1]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def select_experiments(self, experiments: Sequence[int]) -> 'PanelDataset':
        """
        Restricts the panel to the given 0-based experiment columns (kept in
        increasing order, so the allocation stays increasing)
        """

        columns = sorted(set(experiments))

        return PanelDataset(
            W=self.W[:, columns],
            Y=self.Y[:, columns],
            X=self.X,
            pi=self.pi[columns],
            unit_ids=self.unit_ids
        )

    def with_outcomes(self, Y: Matrix) -> 'PanelDataset':
        return PanelDataset(W=self.W, Y=Y, X=self.X, pi=self.pi, unit_ids=self.unit_ids)


@dataclass(frozen=True, eq=False)
class UnitClassification:
    """
    nc   - units whose treatment never changed
    zero - units in control in every experiment (subset of nc)
    one  - units treated in the last two experiments (the horizontal family's
           treated set), or treated in the only experiment when K = 1
    treated_from - per unit, the first 0-based experiment it is treated in
                   (K if never). Monotone rows make the treated set of unit
                   i the suffix treated_from[i]..K-1
    """

    n: int
    K: int
    nc: IndexArray
    zero: IndexArray
    one: IndexArray
    treated_from: IndexArray

    def treated_experiments(self, unit: int) -> IndexArray:
        return np.arange(self.treated_from[unit], self.K)


@dataclass(frozen=True, eq=False)
class SplitResult:
    focal: IndexArray
    auxiliary: IndexArray
    warnings: Tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class OlsFit:
    """
    Least-squares fit. Columns dropped for rank deficiency keep a zero
    coefficient and are listed in `dropped`
    """

    coefficients: Vector
    residual_sum_squares: float
    rank: int
    dof: int
    dropped: Tuple[int, ...] = ()

    @property
    def deficient(self) -> bool:
        return bool(self.dropped)


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """
    Matching costs between `rows` (treated unit indices) and `cols`
    (control unit indices). +inf marks a pair forbidden by the caliper
    """

    rows: IndexArray
    cols: IndexArray
    entries: Matrix

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True, eq=False)
class Matching:
    """
    Injective pairing: treated[j] is matched with control[j]. Pairs are
    sorted by treated index. When the treated side is the larger one, only
    a subset of it is matched and the rest is listed in `unmatched`
    """

    treated: IndexArray
    control: IndexArray
    method: str
    total_cost: Optional[float] = None
    costs: Optional[Vector] = None
    unmatched: IndexArray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    swapped: bool = False

    @property
    def pairs(self) -> Dict[int, int]:
        return dict(zip(self.treated.tolist(), self.control.tolist()))

    def __len__(self) -> int:
        return len(self.treated)


@dataclass(frozen=True, eq=False)
class PermutationTestResult:
    algorithm: str
    statistic_kind: str
    exposure_kind: Optional[str]
    B: int
    seed: int
    t_observed: float
    t_replicates: Vector
    p_value: float
    warnings: Tuple[str, ...] = ()
    exhaustive: bool = False
    matching: Optional[Matching] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self, emit_replicates: bool = False) -> Dict[str, Any]:
        rendered = {
            'algorithm': self.algorithm,
            'statistic_kind': self.statistic_kind,
            'exposure_kind': self.exposure_kind,
            'B': self.B,
            'seed': self.seed,
            't_observed': float(self.t_observed),
            'p_value': float(self.p_value),
            'warnings': list(self.warnings),
            'exhaustive': self.exhaustive,
        }
        rendered.update(self.metadata)

        if emit_replicates:
            rendered['t_replicates'] = [float(value) for value in self.t_replicates]

        return rendered


@dataclass(frozen=True, eq=False)
class RepeatedTestResult:
    """
    The same test run under independent split / matching seeds, with the
    p-values combined by aggregate_pvalues()
    """

    results: Tuple[PermutationTestResult, ...]
    p_value: float

    def to_dict(self, emit_replicates: bool = False) -> Dict[str, Any]:
        return {
            'p_value': float(self.p_value),
            'repeats': len(self.results),
            'results': [result.to_dict(emit_replicates) for result in self.results],
        }


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_digest: Optional[str]
    input_digests: Dict[str, str]
    master_seed: Optional[int]
    tool_version: str
    started: str
    finished: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'config_digest': self.config_digest,
            'input_digests': dict(self.input_digests),
            'master_seed': self.master_seed,
            'tool_version': self.tool_version,
            'started': self.started,
            'finished': self.finished,
        }
