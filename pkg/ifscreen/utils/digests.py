import hashlib
from pathlib import Path
from typing import Union

CHUNK_LENGTH = 1 << 16


def file_digest(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()

    with open(path, 'rb') as fd:
        chunk = fd.read(CHUNK_LENGTH)

        while chunk:
            digest.update(chunk)
            chunk = fd.read(CHUNK_LENGTH)

    return 'sha256:' + digest.hexdigest()


def text_digest(text: Union[str, bytes]) -> str:
    return 'sha256:' + hashlib.sha256(text.encode() if isinstance(text, str) else text).hexdigest()
