"""n-gram and BERT-gram reward indices."""

from ._core import *  # noqa: F401,F403
from ._core import (
    DataError,
    Error,
    FormatError,
    InvalidArgument,
    __doc__,
)

__all__ = [name for name in dir() if not name.startswith("_")]
