"""Atomic file writing shared by every on-disk format."""

from __future__ import annotations

import contextlib
import os
import tempfile
from pathlib import Path


def _default_mode() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return 0o666 & ~mask


_FILE_MODE = _default_mode()


def temp_sibling(path: Path) -> str:
    """Create an empty temporary file next to ``path`` with ordinary permissions."""
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".part", dir=path.parent)
    os.close(fd)
    os.chmod(tmp, _FILE_MODE)
    return tmp


@contextlib.contextmanager
def atomic_open(path, mode: str = "wb"):
    """Write to a temporary sibling and rename over ``path`` on success.

    Nothing is left at ``path`` if the body raises.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = temp_sibling(path)
    try:
        with open(tmp, mode) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise
