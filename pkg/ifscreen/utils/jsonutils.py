import json
import math
from pathlib import Path
from typing import Any, Union

import numpy as np
import simdjson


def load_json(path: Union[str, Path]) -> Any:
    """
    Parses a JSON document into plain python objects (dicts, lists, ...)
    """

    with open(path, 'rb') as json_fd:
        return simdjson.loads(json_fd.read())


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}

    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]

    if isinstance(value, np.ndarray):
        return [to_jsonable(item) for item in value.tolist()]

    if isinstance(value, np.generic):
        return to_jsonable(value.item())

    if isinstance(value, float) and not math.isfinite(value):
        # json has no infinities; results keep them as strings
        return 'inf' if value > 0 else ('-inf' if value < 0 else 'nan')

    return value


def dumps_json(value: Any) -> str:
    """
    Canonical rendering: sorted keys, fixed indentation, trailing newline.
    The same object always renders to the same bytes
    """

    return json.dumps(to_jsonable(value), sort_keys=True, indent=2) + '\n'


def write_json(path: Union[str, Path], value: Any) -> None:
    with open(path, 'w', encoding='utf8', newline='\n') as json_fd:
        json_fd.write(dumps_json(value))
