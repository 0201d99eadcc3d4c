"""
Population-scaled normalisation of raw features and pairwise feature deltas.

For a feature k and topic t, with M = max over users of log(1 + f_k(u, t)),
the normalised value is log(1 + f_k(u, t)) / M. log1p keeps values in (0, 1)
such as follower ratios non-negative and maps 0 to 0.
"""
import logging
from typing import Dict, Iterable, Tuple

import numpy as np

from topic_experts.features import FeatureStore

logger = logging.getLogger(__name__)


def normalize_store(raw: FeatureStore) -> FeatureStore:
    items = list(raw.items())
    normalized = FeatureStore(raw.catalog, normalized=True)
    if not items:
        return normalized

    groups: Dict[Tuple[object, str], int] = {}
    group_ids = np.empty(len(items), dtype=np.int64)
    values = np.empty(len(items))
    for i, (_, topic, feature, value) in enumerate(items):
        group_ids[i] = groups.setdefault((feature, topic), len(groups))
        values[i] = value

    logs = np.log1p(values)
    maxima = np.zeros(len(groups))
    np.maximum.at(maxima, group_ids, logs)
    denominators = maxima[group_ids]
    scaled = np.divide(logs, denominators, out=np.zeros_like(logs), where=denominators > 0)

    for (user, topic, feature, _), value in zip(items, scaled):
        normalized.set(user, topic, feature, float(min(value, 1.0)))

    logger.info("Normalised %d values across %d (feature, topic) groups", len(items), len(groups))
    return normalized


def feature_delta(u1: str, u2: str, topic: str, norm: FeatureStore) -> np.ndarray:
    """F̂(u1, t) - F̂(u2, t) over the full catalog, absent values read as 0."""
    return norm.vector(u1, topic) - norm.vector(u2, topic)


class DeltaBuilder:
    """Builds delta rows for many labels, reusing each user's vector per topic."""

    def __init__(self, norm: FeatureStore):
        self.norm = norm
        self._vectors: Dict[Tuple[str, str], np.ndarray] = {}

    def vector(self, user: str, topic: str) -> np.ndarray:
        key = (user, topic)
        vec = self._vectors.get(key)
        if vec is None:
            vec = self._vectors[key] = self.norm.vector(user, topic)
        return vec

    def delta(self, u1: str, u2: str, topic: str) -> np.ndarray:
        return self.vector(u1, topic) - self.vector(u2, topic)

    def matrix(self, labels: Iterable) -> np.ndarray:
        rows = [self.delta(label.u1, label.u2, label.topic) for label in labels]
        if not rows:
            return np.zeros((0, len(self.norm.catalog)))
        return np.vstack(rows)
