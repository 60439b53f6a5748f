from typing import Any, Dict, List, NamedTuple, Optional


class Violation(NamedTuple):
    """
    A single broken invariant. Row and col are 0-based indices into the
    panel matrices (col is None for unit-level problems, row is None for
    experiment-level ones)
    """

    kind: str
    row: Optional[int]
    col: Optional[int]
    message: str


class IfscreenError(Exception):
    exit_code = 4  # child classes re-define it
    description = 'internal error'

    def __init__(self, msg: str = '', **kwargs):
        self.msg = msg

        # an additional stash for dynamic values, serialized into the
        # structured error report written by the cli
        self.details: Dict[str, Any] = kwargs

        for key, value in kwargs.items():
            setattr(self, key, value)

        super(IfscreenError, self).__init__(msg)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error': self.__class__.__name__,
            'description': self.description,
            'message': self.msg,
            'details': {key: _plain(value) for key, value in self.details.items()},
        }


class ValidationError(IfscreenError):
    exit_code = 2
    description = 'input validation failed'

    def __init__(self, msg: str = '', violations: Optional[List[Violation]] = None, **kwargs):
        violations = list(violations or [])

        if not msg and violations:
            msg = '; '.join(violation.message for violation in violations)

        super(ValidationError, self).__init__(msg, violations=violations, **kwargs)


class ConfigError(IfscreenError):
    exit_code = 2
    description = 'invalid configuration'


class GraphError(IfscreenError):
    exit_code = 2
    description = 'invalid interference graph'


class StatisticError(IfscreenError):
    exit_code = 2
    description = 'test statistic is undefined'


class InfeasibleTestError(IfscreenError):
    exit_code = 3
    description = 'test is infeasible for this panel'


def _plain(value: Any) -> Any:
    if isinstance(value, Violation):
        return value._asdict()

    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]

    if hasattr(value, 'tolist'):
        return value.tolist()

    return value
