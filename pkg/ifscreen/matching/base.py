import abc
from typing import Optional

from ..entities import Matching
from ..graph.interference import InterferenceGraph
from ..typehints import IndexArray, Matrix, Vector


class BaseMatcher(abc.ABC):
    """
    A base class to be inherited of for all the matching methods.

    A matcher sees the two index sets (derived from W) and the covariates
    X and neighbor counts N, never the outcomes
    """

    method: str = ''

    @abc.abstractmethod
    def match(self,
              treated: IndexArray,
              control: IndexArray,
              X: Matrix,
              N: Vector,
              seed: int,
              caliper: Optional[InterferenceGraph] = None) -> Matching:
        """
        Injective pairing of treated units with distinct control units
        """
