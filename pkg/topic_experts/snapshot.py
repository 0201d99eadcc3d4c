"""
The index snapshot served by the views. Readers get whichever snapshot is
current; a reload reads the new index fully before swapping it in.
"""
import logging
import threading
from typing import Optional

from django.conf import settings

from topic_experts.exceptions import MissingArtifactError
from topic_experts.rank import RankedIndex

logger = logging.getLogger(__name__)

_index: Optional[RankedIndex] = None
_lock = threading.Lock()


def _index_dir(directory=None):
    directory = directory or getattr(settings, "TOPIC_EXPERTS_INDEX_DIR", None)
    if not directory:
        raise MissingArtifactError("TOPIC_EXPERTS_INDEX_DIR", "serve")
    return directory


def get_index() -> RankedIndex:
    global _index

    with _lock:
        index = _index
    if index is not None:
        return index

    loaded = RankedIndex.read(_index_dir())
    with _lock:
        if _index is None:
            _index = loaded
        return _index


def set_index(index: Optional[RankedIndex]) -> None:
    global _index

    with _lock:
        _index = index


def reload_index(directory=None) -> RankedIndex:
    index = RankedIndex.read(_index_dir(directory))
    set_index(index)
    logger.info("Reloaded index snapshot with %d topics", len(index))
    return index
