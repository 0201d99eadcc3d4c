import hashlib
import json
import math
import os
from typing import Iterable, Iterator, List, Optional, Sequence

import numpy as np
from django.conf import settings
from wove import weave

# Connectivity buckets run from 10^0 to 10^8.
MAX_BUCKET = 8


def stable_hash(*values) -> int:
    """A process-independent 64-bit hash of the given values."""
    digest = hashlib.blake2b("|".join(str(v) for v in values).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def partition_of(user: str, partitions: int) -> int:
    return stable_hash("partition", user) % max(partitions, 1)


def log10_bucket(value: float, cap: int = MAX_BUCKET) -> int:
    """floor(log10(max(value, 1))) clamped to [0, cap]."""
    bucket = int(math.floor(math.log10(max(value, 1.0))))
    return min(max(bucket, 0), cap)


def format_float(value: float) -> str:
    return repr(float(value))


def ensure_dir(path) -> None:
    if path and not os.path.exists(path):
        os.makedirs(path, exist_ok=True)


def read_tsv(path, expected: Optional[int] = None) -> Iterator[List[str]]:
    """Yield tab-split rows, skipping blank lines and '#' header lines."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if expected is not None and len(parts) < expected:
                raise ValueError(f"{path}: expected {expected} fields in {line!r}")
            yield parts


def write_tsv(path, rows: Iterable[Sequence], header: Optional[Sequence[str]] = None) -> None:
    ensure_dir(os.path.dirname(str(path)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header is not None:
            fh.write("#" + "\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(str(v) for v in row) + "\n")


def write_manifest(directory, stage: str, payload: dict) -> str:
    path = os.path.join(directory, f"{stage}.json")
    ensure_dir(directory)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(directory, stage: str) -> dict:
    path = os.path.join(directory, f"{stage}.json")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, ValueError):
        return {}


def fit_loglog_slope(centres, densities) -> float:
    """Least-squares slope of log10(density) against log10(bucket centre)."""
    x = np.log10(np.asarray(centres, dtype=float))
    y = np.log10(np.asarray(densities, dtype=float))
    if x.size < 2:
        raise ValueError("At least two non-empty buckets are needed to fit a slope")
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def map_partitions(partitions: dict, fn) -> list:
    """
    Apply ``fn(items)`` to every partition and return the results ordered by
    partition id. Runs the partitions concurrently with wove unless
    ``TOPIC_EXPERTS_PARALLEL`` is False; the ordering makes both paths identical.
    """
    results = {}
    work = sorted(partitions.items())

    if getattr(settings, "TOPIC_EXPERTS_PARALLEL", True) and len(work) > 1:
        with weave() as w:

            @w.do(work)
            def run_partition(item):
                pid, items = item
                results[pid] = fn(items)

    else:
        for pid, items in work:
            results[pid] = fn(items)

    return [results[pid] for pid, _ in work]


def split_partitions(keys: Iterable[str], partitions: int) -> dict:
    buckets = {}
    for key in sorted(keys):
        buckets.setdefault(partition_of(key, partitions), []).append(key)
    return buckets
