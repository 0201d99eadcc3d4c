"""
Held-out evaluation of single features and of the trained model, plus the
tab-separated reports describing feature populations.

A label is predicted when the delta it is scored on is non-zero and correct
when ``label * sgn(delta) > 0``. Precision divides by predicted labels,
recall by all labels.
"""
import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from topic_experts.catalog import FeatureId, Network
from topic_experts.features import FeatureStore
from topic_experts.groundtruth import PairLabel
from topic_experts.model import ExpertiseModel, ExpertiseScore
from topic_experts.normalize import normalize_store
from topic_experts.ontology import TopicOntology
from topic_experts.utils import MAX_BUCKET, format_float, log10_bucket, map_partitions, write_tsv

logger = logging.getLogger(__name__)

ALL_NETWORKS = "ALL"


@dataclass
class FeatureMetrics:
    name: str
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    coverage: float = 0.0
    predicted: int = 0
    correct: int = 0
    labels: int = 0
    # Set when there were no labels to evaluate on.
    empty: bool = False

    def as_row(self):
        return (
            self.name,
            format_float(self.precision),
            format_float(self.recall),
            format_float(self.f1),
            format_float(self.coverage),
            self.predicted,
            self.correct,
            self.labels,
        )


METRICS_HEADER = ("name", "precision", "recall", "f1", "coverage", "predicted", "correct", "labels")


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _metrics(name: str, labels: Sequence[PairLabel], delta: Callable[[PairLabel], float], coverage: float):
    metrics = FeatureMetrics(name, coverage=coverage, labels=len(labels), empty=not labels)
    for label in labels:
        d = delta(label)
        if d == 0:
            continue
        metrics.predicted += 1
        if label.label * math.copysign(1.0, d) > 0:
            metrics.correct += 1
    if metrics.predicted:
        metrics.precision = metrics.correct / metrics.predicted
    if metrics.labels:
        metrics.recall = metrics.correct / metrics.labels
    metrics.f1 = f1_score(metrics.precision, metrics.recall)
    return metrics


def _coverage(covered: Iterable[str], corpus_users: Optional[Iterable[str]], fallback: Iterable[str]) -> float:
    corpus = set(corpus_users) if corpus_users is not None else set(fallback)
    if not corpus:
        return 0.0
    return len(corpus.intersection(covered)) / len(corpus)


def evaluate_feature(
    feature: FeatureId,
    labels: Sequence[PairLabel],
    norm: FeatureStore,
    corpus_users: Optional[Iterable[str]] = None,
) -> FeatureMetrics:
    covered = {user for user, _, f, value in norm.items() if f == feature and value != 0}

    def delta(label):
        return norm.get(label.u1, label.topic, feature) - norm.get(label.u2, label.topic, feature)

    metrics = _metrics(feature.name, labels, delta, _coverage(covered, corpus_users, norm.users()))
    if metrics.empty:
        logger.warning("No labels to evaluate %s on", feature.name)
    return metrics


def evaluate_features(
    labels: Sequence[PairLabel], norm: FeatureStore, corpus_users: Optional[Iterable[str]] = None
) -> List[FeatureMetrics]:
    corpus = sorted(set(corpus_users) if corpus_users is not None else norm.users())
    features = {slot: [feature] for slot, feature in enumerate(norm.catalog)}

    def run(chunk):
        return evaluate_feature(chunk[0], labels, norm, corpus)

    return map_partitions(features, run)


def evaluate_model(
    labels: Sequence[PairLabel],
    model: ExpertiseModel,
    norm: FeatureStore,
    corpus_users: Optional[Iterable[str]] = None,
) -> List[FeatureMetrics]:
    """Metrics for the full model ("MODEL") and for each network's slice of it."""
    results = []
    variants = [("MODEL", model.weights)] + [
        (f"{network.value}_MODEL", model.network_weights(network)) for network in model.catalog.networks
    ]
    for name, weights in variants:
        scores = {pair: float(weights @ norm.vector(*pair)) for pair in norm.pairs()}
        covered = {user for (user, _), value in scores.items() if value != 0}

        def delta(label, scores=scores):
            return scores.get((label.u1, label.topic), 0.0) - scores.get((label.u2, label.topic), 0.0)

        results.append(_metrics(name, labels, delta, _coverage(covered, corpus_users, norm.users())))
    return results


@dataclass
class HeatmapGrid:
    feature: str
    values: np.ndarray = field(default_factory=lambda: np.zeros((MAX_BUCKET + 1, MAX_BUCKET + 1)))
    counts: np.ndarray = field(default_factory=lambda: np.zeros((MAX_BUCKET + 1, MAX_BUCKET + 1), dtype=int))
    excluded: int = 0

    def cells(self):
        for i, j in zip(*np.nonzero(self.counts)):
            yield int(i), int(j), float(self.values[i, j]), int(self.counts[i, j])


def _correct_deltas(feature: FeatureId, labels: Iterable[PairLabel], norm: FeatureStore):
    for label in labels:
        d = norm.get(label.u1, label.topic, feature) - norm.get(label.u2, label.topic, feature)
        if d != 0 and label.label * d > 0:
            yield label, abs(d)


def predictability_heatmap(
    feature: FeatureId, labels: Iterable[PairLabel], norm: FeatureStore, connectivities: Mapping[str, float]
) -> HeatmapGrid:
    """Mean |delta| of correctly predicted labels per (bucket C_u1, bucket C_u2) cell."""
    grid = HeatmapGrid(feature.name)
    sums = np.zeros_like(grid.values)
    for label, magnitude in _correct_deltas(feature, labels, norm):
        if label.u1 not in connectivities or label.u2 not in connectivities:
            grid.excluded += 1
            continue
        i = log10_bucket(connectivities[label.u1])
        j = log10_bucket(connectivities[label.u2])
        sums[i, j] += magnitude
        grid.counts[i, j] += 1
    np.divide(sums, grid.counts, out=grid.values, where=grid.counts > 0)
    return grid


def feature_vs_connectivity(
    feature: FeatureId, labels: Iterable[PairLabel], norm: FeatureStore, connectivities: Mapping[str, float]
) -> Dict[int, Tuple[float, int]]:
    """bucket of |C_u1 - C_u2| -> (mean |delta| over correct predictions, count)."""
    grouped: Dict[int, List[float]] = defaultdict(list)
    for label, magnitude in _correct_deltas(feature, labels, norm):
        if label.u1 in connectivities and label.u2 in connectivities:
            bucket = log10_bucket(abs(connectivities[label.u1] - connectivities[label.u2]))
            grouped[bucket].append(magnitude)
    return {bucket: (float(np.mean(v)), len(v)) for bucket, v in sorted(grouped.items())}


def log_histogram(values: Iterable[float], bins_per_decade: int = 5) -> List[Tuple[float, float, int, float]]:
    """
    Log-binned histogram of the positive values: (low, high, count, density)
    per non-empty bin, density being count / (total * bin width).
    """
    values = np.asarray([v for v in values if v > 0], dtype=float)
    if values.size == 0:
        return []
    indices = np.floor(np.log10(values) * bins_per_decade).astype(int)
    bins, counts = np.unique(indices, return_counts=True)
    rows = []
    for index, count in zip(bins, counts):
        low = 10.0 ** (index / bins_per_decade)
        high = 10.0 ** ((index + 1) / bins_per_decade)
        rows.append((low, high, int(count), count / (values.size * (high - low))))
    return rows


def export_distributions(
    raw: FeatureStore,
    connectivities: Mapping[str, float],
    labels: Sequence[PairLabel],
    directory,
    norm: Optional[FeatureStore] = None,
    delta_bins: int = 20,
) -> List[str]:
    """
    Writes feature_histograms.tsv (users per log-bucket of raw value),
    users_vs_connectivity.tsv (users holding a feature per connectivity bucket)
    and label_deltas.tsv (labels per bucket of normalised delta, winner minus
    loser and loser minus winner).
    """
    norm = norm if norm is not None else normalize_store(raw)
    by_feature: Dict[FeatureId, List[float]] = defaultdict(list)
    holders: Dict[FeatureId, set] = defaultdict(set)
    for user, _, feature, value in raw.items():
        by_feature[feature].append(value)
        holders[feature].add(user)

    histogram_rows = []
    connectivity_rows = []
    delta_rows = []
    edges = np.linspace(-1.0, 1.0, delta_bins + 1)
    for feature in raw.catalog:
        for low, high, count, density in log_histogram(by_feature.get(feature, ())):
            histogram_rows.append(
                (feature.name, format_float(low), format_float(high), format_float(math.sqrt(low * high)), count, format_float(density))
            )

        per_bucket = defaultdict(int)
        for user in holders.get(feature, ()):
            per_bucket[log10_bucket(connectivities.get(user, 0.0))] += 1
        for bucket in sorted(per_bucket):
            connectivity_rows.append((feature.name, bucket, per_bucket[bucket]))

        winner_minus_loser = []
        for label in labels:
            winner, loser = (label.u1, label.u2) if label.label > 0 else (label.u2, label.u1)
            d = norm.get(winner, label.topic, feature) - norm.get(loser, label.topic, feature)
            if d != 0:
                winner_minus_loser.append(d)
        if winner_minus_loser:
            deltas = np.asarray(winner_minus_loser)
            forward, _ = np.histogram(deltas, bins=edges)
            backward, _ = np.histogram(-deltas, bins=edges)
            for low, high, up, down in zip(edges[:-1], edges[1:], forward, backward):
                if up or down:
                    delta_rows.append((feature.name, format_float(low), format_float(high), int(up), int(down)))

    paths = [os.path.join(directory, name) for name in ("feature_histograms.tsv", "users_vs_connectivity.tsv", "label_deltas.tsv")]
    write_tsv(paths[0], histogram_rows, header=("feature", "low", "high", "centre", "users", "density"))
    write_tsv(paths[1], connectivity_rows, header=("feature", "connectivity_bucket", "users"))
    write_tsv(paths[2], delta_rows, header=("feature", "low", "high", "winner_minus_loser", "loser_minus_winner"))
    return paths


@dataclass
class RollupReport:
    # scope (network value or ALL) -> super slug -> percentage of users
    percentages: Dict[str, Dict[str, float]] = field(default_factory=dict)
    users: Dict[str, Dict[str, int]] = field(default_factory=dict)
    excluded: Dict[str, int] = field(default_factory=dict)


def _top_super(totals: Mapping[str, float]) -> Optional[str]:
    best = None
    for slug in sorted(totals):
        if totals[slug] > 0 and (best is None or totals[slug] > totals[best]):
            best = slug
    return best


def supertopic_rollup(
    scores: Iterable[ExpertiseScore], ontology: TopicOntology, networks: Sequence[Network] = ()
) -> RollupReport:
    """
    For every scope (each network's score column, then ALL), attribute each
    user to the super-topic with the largest summed score and report the
    share of users per super-topic. Users without any positive score in a
    scope are excluded and counted.
    """
    scopes = [n.value for n in networks] + [ALL_NETWORKS]
    totals: Dict[str, Dict[str, Dict[str, float]]] = {scope: defaultdict(lambda: defaultdict(float)) for scope in scopes}
    users = set()
    for s in scores:
        users.add(s.user)
        node = ontology.super_of(s.topic)
        if node is None:
            continue
        by_network = list(s.by_network[: len(networks)])
        values = by_network + [0.0] * (len(networks) - len(by_network)) + [s.score]
        for scope, value in zip(scopes, values):
            totals[scope][s.user][node.slug] += value

    report = RollupReport()
    for scope in scopes:
        counts: Dict[str, int] = defaultdict(int)
        for user in sorted(users):
            top = _top_super(totals[scope].get(user, {}))
            if top is not None:
                counts[top] += 1
        attributed = sum(counts.values())
        report.excluded[scope] = len(users) - attributed
        report.users[scope] = dict(sorted(counts.items()))
        report.percentages[scope] = {
            slug: 100.0 * count / attributed for slug, count in sorted(counts.items())
        }
    return report


def write_rollup(path, report: RollupReport) -> None:
    rows = []
    for scope, percentages in report.percentages.items():
        for slug, percentage in percentages.items():
            rows.append((scope, slug, report.users[scope][slug], format_float(percentage)))
        rows.append((scope, "-excluded-", report.excluded[scope], ""))
    write_tsv(path, rows, header=("scope", "super_topic", "users", "percentage"))


def write_metrics(path, metrics: Iterable[FeatureMetrics]) -> None:
    write_tsv(path, (m.as_row() for m in metrics), header=METRICS_HEADER)


def write_heatmaps(path, grids: Iterable[HeatmapGrid]) -> None:
    rows = (
        (grid.feature, i, j, format_float(value), count) for grid in grids for i, j, value, count in grid.cells()
    )
    write_tsv(path, rows, header=("feature", "bucket_u1", "bucket_u2", "mean_abs_delta", "labels"))


def write_connectivity_curves(path, curves: Mapping[str, Mapping[int, Tuple[float, int]]]) -> None:
    rows = (
        (name, bucket, format_float(mean), count)
        for name, curve in curves.items()
        for bucket, (mean, count) in curve.items()
    )
    write_tsv(path, rows, header=("feature", "log10_delta_bucket", "mean_abs_delta", "labels"))
