"""
Raw feature extraction: event streams -> sparse (user, topic, feature) store.

Every aggregation here is a plain sum, so results do not depend on how the
events are split into partitions. All events of one user land in the same
partition and are summed in file order, which keeps the floating point
reduction order fixed for every key.
"""
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

import numpy as np
from django.conf import settings

from topic_experts.catalog import (
    TEXT_SOURCES,
    Attribution,
    FeatureCatalog,
    FeatureId,
    Source,
    get_catalog,
)
from topic_experts.exceptions import CatalogError
from topic_experts.ingest import (
    EdgeSet,
    EventKind,
    EventRecord,
    SharedDocPayload,
    WikiPagePayload,
    partition_by_user,
)
from topic_experts.ontology import PhraseDictionary, TopicOntology, hashtag_text, topicize
from topic_experts.utils import (
    ensure_dir,
    format_float,
    map_partitions,
    read_tsv,
    split_partitions,
    write_tsv,
)

logger = logging.getLogger(__name__)

ConnectivityVector = Dict[str, int]

# Edge sets that count towards a user's in-degree.
IN_DEGREE_SETS = (EdgeSet.FOLLOWERS, EdgeSet.FRIENDS)


class FeatureStore:
    """
    Sparse map (user, topic, feature) -> value. Only positive values are kept;
    absent keys read as 0.
    """

    def __init__(self, catalog: Optional[FeatureCatalog] = None, normalized: bool = False):
        self.catalog = catalog or get_catalog()
        self.normalized = normalized
        self._values: Dict[Tuple[str, str], Dict[FeatureId, float]] = {}

    def __len__(self):
        return sum(len(v) for v in self._values.values())

    def __contains__(self, key):
        user, topic, feature = key
        return feature in self._values.get((user, topic), {})

    def add(self, user: str, topic: str, feature: FeatureId, value: float) -> None:
        if feature not in self.catalog:
            raise CatalogError(f"{feature} is not a registered feature")
        if not value > 0:
            return
        slot = self._values.setdefault((user, topic), {})
        slot[feature] = slot.get(feature, 0.0) + value

    def set(self, user: str, topic: str, feature: FeatureId, value: float) -> None:
        if feature not in self.catalog:
            raise CatalogError(f"{feature} is not a registered feature")
        if value > 0:
            self._values.setdefault((user, topic), {})[feature] = value
        else:
            slot = self._values.get((user, topic))
            if slot is not None:
                slot.pop(feature, None)
                if not slot:
                    del self._values[(user, topic)]

    def get(self, user: str, topic: str, feature: FeatureId) -> float:
        return self._values.get((user, topic), {}).get(feature, 0.0)

    def features_of(self, user: str, topic: str) -> Mapping[FeatureId, float]:
        return self._values.get((user, topic), {})

    def vector(self, user: str, topic: str) -> np.ndarray:
        vec = np.zeros(len(self.catalog))
        for feature, value in self._values.get((user, topic), {}).items():
            vec[self.catalog.slot(feature)] = value
        return vec

    def pairs(self) -> List[Tuple[str, str]]:
        return sorted(self._values)

    def users(self) -> List[str]:
        return sorted({user for user, _ in self._values})

    def topics(self) -> List[str]:
        return sorted({topic for _, topic in self._values})

    def items(self) -> Iterator[Tuple[str, str, FeatureId, float]]:
        for user, topic in sorted(self._values):
            features = self._values[(user, topic)]
            for feature in sorted(features, key=self.catalog.slot):
                yield user, topic, feature, features[feature]

    def update(self, other: "FeatureStore") -> None:
        for user, topic, feature, value in other.items():
            self.add(user, topic, feature, value)

    @classmethod
    def merge(cls, stores: Iterable["FeatureStore"], catalog=None, normalized=False) -> "FeatureStore":
        """Merge stores in the given order (partition order)."""
        merged = cls(catalog, normalized=normalized)
        for store in stores:
            merged.update(store)
        return merged

    def write(self, path) -> None:
        ensure_dir(os.path.dirname(str(path)))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            if self.normalized:
                fh.write("#normalized=true\n")
            fh.write("#user\ttopic\tfeature_id\tvalue\n")
            for user, topic, feature, value in self.items():
                fh.write(f"{user}\t{topic}\t{feature.name}\t{format_float(value)}\n")

    @classmethod
    def read(cls, path, catalog=None) -> "FeatureStore":
        catalog = catalog or get_catalog()
        normalized = False
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                if line.strip() == "#normalized=true":
                    normalized = True
        store = cls(catalog, normalized=normalized)
        for user, topic, name, value in read_tsv(path, expected=4):
            store.set(user, topic, catalog.by_name(name), float(value))
        return store


@dataclass
class ExtractionStats:
    events: int = 0
    skipped_triples: int = 0
    degenerate_profiles: int = 0
    unmatched_texts: int = 0

    def absorb(self, other: "ExtractionStats") -> None:
        self.events += other.events
        self.skipped_triples += other.skipped_triples
        self.degenerate_profiles += other.degenerate_profiles
        self.unmatched_texts += other.unmatched_texts


@dataclass
class ListStats:
    collected_topic_lists: Dict[str, int] = field(default_factory=dict)
    collected_total: int = 0
    profile_total: int = 0


@dataclass
class GraphTopicStrength:
    base: Dict[str, Dict[str, float]]
    global_total: Dict[str, float]


def connectivity(c: ConnectivityVector) -> float:
    """Euclidean norm of the per-graph in-degree vector."""
    if not c:
        return 0.0
    return float(np.linalg.norm(np.fromiter(c.values(), dtype=float)))


def _message_text(event: EventRecord) -> str:
    if event.payload.source_tag == Source.HASHTAG:
        return " ".join(hashtag_text(tag) for tag in event.payload.text.split())
    return event.payload.text


def extract_text_features(
    events: Iterable[EventRecord],
    ontology: TopicOntology,
    dictionary: PhraseDictionary,
    store: Optional[FeatureStore] = None,
    stats: Optional[ExtractionStats] = None,
) -> FeatureStore:
    """Topicize MESSAGE payloads and add the bag weights under the event's feature."""
    store = store if store is not None else FeatureStore()
    stats = stats if stats is not None else ExtractionStats()

    for event in events:
        if event.kind != EventKind.MESSAGE:
            continue
        feature = event.feature
        if feature not in store.catalog:
            stats.skipped_triples += 1
            continue
        bag = topicize(_message_text(event), dictionary, ontology)
        if not bag:
            stats.unmatched_texts += 1
        for topic, weight in bag.items():
            store.add(event.subject_user, topic, feature, weight)

    return store


def estimate_list_feature(stats: ListStats, topic: str) -> float:
    """L_c(u, t) * L(u) / L_c(u); 0 when nothing was collected."""
    if stats.collected_total == 0:
        return 0.0
    return stats.collected_topic_lists.get(topic, 0) * stats.profile_total / stats.collected_total


def collect_list_stats(
    events: Iterable[EventRecord], ontology: TopicOntology, dictionary: PhraseDictionary
) -> Dict[FeatureId, ListStats]:
    """
    Per list feature (membership feeds LIST_CREDITED, created or subscribed
    lists feed LIST_GENERATED), count the collected lists and the lists whose
    name matches each topic. L(u) is the larger of the profile count and the
    collected count.
    """
    grouped: Dict[FeatureId, ListStats] = {}
    for event in events:
        if event.kind != EventKind.LIST:
            continue
        stats = grouped.setdefault(event.feature, ListStats())
        stats.collected_total += 1
        for topic in topicize(event.payload.list_name, dictionary, ontology):
            stats.collected_topic_lists[topic] = stats.collected_topic_lists.get(topic, 0) + 1
        if event.payload.profile_total is not None:
            stats.profile_total = max(stats.profile_total, event.payload.profile_total)

    for stats in grouped.values():
        stats.profile_total = max(stats.profile_total, stats.collected_total)
    return grouped


def extract_list_features(
    user: str,
    events: Iterable[EventRecord],
    ontology: TopicOntology,
    dictionary: PhraseDictionary,
    store: FeatureStore,
) -> None:
    for feature, stats in collect_list_stats(events, ontology, dictionary).items():
        for topic in sorted(stats.collected_topic_lists):
            store.add(user, topic, feature, estimate_list_feature(stats, topic))


def extract_socialwww_feature(
    docs: Iterable[SharedDocPayload], ontology: TopicOntology, dictionary: PhraseDictionary
) -> Dict[str, float]:
    """Sum over the user's documents of tf(topic, doc) * reactions(doc)."""
    values: Dict[str, float] = {}
    for doc in docs:
        if doc.reaction_count <= 0:
            continue
        for topic, tf in topicize(doc.text, dictionary, ontology).items():
            values[topic] = values.get(topic, 0.0) + tf * doc.reaction_count
    return values


def extract_shared_doc_features(
    user: str,
    events: Iterable[EventRecord],
    ontology: TopicOntology,
    dictionary: PhraseDictionary,
    store: FeatureStore,
) -> None:
    """Shared documents are summed per feature, never across features."""
    grouped: Dict[FeatureId, List[SharedDocPayload]] = {}
    for event in events:
        if event.kind == EventKind.SHARED_DOC:
            grouped.setdefault(event.feature, []).append(event.payload)
    for feature, docs in grouped.items():
        for topic, value in extract_socialwww_feature(docs, ontology, dictionary).items():
            store.add(user, topic, feature, value)


def extract_wiki_feature(
    page: WikiPagePayload, ontology: TopicOntology, dictionary: PhraseDictionary
) -> Dict[str, float]:
    """tf(topic, page) * L_in / L_out, with L_out clamped to at least 1."""
    outlinks = max(page.outlinks, 1)
    return {
        topic: tf * page.inlinks / outlinks
        for topic, tf in topicize(page.page_text, dictionary, ontology).items()
    }


def extract_profile_features(
    events: Iterable[EventRecord],
    ontology: TopicOntology,
    dictionary: PhraseDictionary,
    store: Optional[FeatureStore] = None,
    stats: Optional[ExtractionStats] = None,
) -> FeatureStore:
    store = store if store is not None else FeatureStore()
    stats = stats if stats is not None else ExtractionStats()

    for event in events:
        if event.kind != EventKind.PROFILE_FIELD:
            continue
        payload = event.payload
        topics = sorted(topicize(payload.text, dictionary, ontology))
        if payload.field == Source.SKILLS:
            value = 1.0
        elif payload.industry_followers > 0:
            value = payload.company_followers / payload.industry_followers
        else:
            stats.degenerate_profiles += 1
            continue
        for topic in topics:
            store.add(event.subject_user, topic, event.feature, value)

    return store


def topic_strengths(store: FeatureStore) -> GraphTopicStrength:
    """
    s(v, t): the sum of v's own generated text features (message text, page
    text, hashtags) on t. global_total(t) sums s over all users.
    """
    base: Dict[str, Dict[str, float]] = {}
    for user, topic, feature, value in store.items():
        if feature.attribution == Attribution.GENERATED and feature.source in TEXT_SOURCES:
            strengths = base.setdefault(user, {})
            strengths[topic] = strengths.get(topic, 0.0) + value

    global_total: Dict[str, float] = defaultdict(float)
    for user in sorted(base):
        for topic, value in base[user].items():
            global_total[topic] += value
    return GraphTopicStrength(base=base, global_total=dict(global_total))


def extract_graph_feature(
    edges: Iterable[EventRecord], strengths: GraphTopicStrength
) -> Dict[Tuple[str, str, FeatureId], float]:
    """
    For each subject and edge set, the summed topic strength of the neighbours
    in that set, scaled by the global strength of the topic. Repeated edges
    count once.
    """
    sums: Dict[Tuple[str, str, FeatureId], float] = {}
    seen = set()
    for event in edges:
        if event.kind != EventKind.GRAPH_EDGE:
            continue
        key = (event.subject_user, event.payload.actor_user, event.network, event.payload.edge_set)
        if key in seen:
            continue
        seen.add(key)
        feature = event.feature
        for topic, strength in strengths.base.get(event.payload.actor_user, {}).items():
            slot = (event.subject_user, topic, feature)
            sums[slot] = sums.get(slot, 0.0) + strength

    values = {}
    for (user, topic, feature), total in sums.items():
        denominator = strengths.global_total.get(topic, 0.0)
        values[(user, topic, feature)] = total / denominator if denominator > 0 else 0.0
    return values


def count_in_degrees(events: Iterable[EventRecord]) -> Dict[str, ConnectivityVector]:
    degrees: Dict[str, ConnectivityVector] = {}
    seen = set()
    for event in events:
        if event.kind != EventKind.GRAPH_EDGE or event.payload.edge_set not in IN_DEGREE_SETS:
            continue
        graph = f"{event.network.value}_{event.payload.edge_set.value}"
        key = (event.subject_user, event.payload.actor_user, graph)
        if key in seen:
            continue
        seen.add(key)
        vector = degrees.setdefault(event.subject_user, {})
        vector[graph] = vector.get(graph, 0) + 1
    return degrees


def read_connectivity_vectors(path) -> Dict[str, ConnectivityVector]:
    vectors: Dict[str, ConnectivityVector] = {}
    for user, graph, degree in read_tsv(path, expected=3):
        vectors.setdefault(user, {})[graph] = int(float(degree))
    return vectors


def write_connectivity_vectors(path, vectors: Mapping[str, ConnectivityVector]) -> None:
    rows = ((user, graph, vectors[user][graph]) for user in sorted(vectors) for graph in sorted(vectors[user]))
    write_tsv(path, rows, header=("user", "graph", "in_degree"))


def merge_connectivity(
    counted: Mapping[str, ConnectivityVector], declared: Mapping[str, ConnectivityVector]
) -> Dict[str, ConnectivityVector]:
    """Declared in-degrees replace counted ones for the same graph."""
    merged = {user: dict(vector) for user, vector in counted.items()}
    for user, vector in declared.items():
        merged.setdefault(user, {}).update(vector)
    return merged


def connectivities(vectors: Mapping[str, ConnectivityVector]) -> Dict[str, float]:
    return {user: connectivity(vector) for user, vector in vectors.items()}


class FeatureExtractor:
    """
    Runs every extractor over user-partitioned events. The first pass builds
    all non-graph features per partition; the second pass needs the global
    topic strengths and adds the graph features.
    """

    def __init__(self, ontology: TopicOntology, dictionary: PhraseDictionary, partitions: Optional[int] = None):
        self.ontology = ontology
        self.dictionary = dictionary
        self.partitions = partitions or getattr(settings, "TOPIC_EXPERTS_PARTITIONS", 8)
        self.stats = ExtractionStats()

    def extract(self, events_by_user: Mapping[str, List[EventRecord]]) -> FeatureStore:
        buckets = split_partitions(events_by_user.keys(), self.partitions)

        def first_pass(users):
            store, stats = FeatureStore(), ExtractionStats()
            for user in users:
                self._extract_user(user, events_by_user[user], store, stats)
            return store, stats

        results = map_partitions(buckets, first_pass)
        for _, stats in results:
            self.stats.absorb(stats)
        store = FeatureStore.merge(store for store, _ in results)

        strengths = topic_strengths(store)

        def second_pass(users):
            partial = FeatureStore()
            for user in users:
                for (subject, topic, feature), value in extract_graph_feature(
                    events_by_user[user], strengths
                ).items():
                    partial.add(subject, topic, feature, value)
            return partial

        for partial in map_partitions(buckets, second_pass):
            store.update(partial)

        logger.info(
            "Extracted %d feature values for %d users (%d events, %d skipped triples, %d degenerate profiles)",
            len(store),
            len(store.users()),
            self.stats.events,
            self.stats.skipped_triples,
            self.stats.degenerate_profiles,
        )
        return store

    def _extract_user(self, user, events, store, stats):
        stats.events += len(events)
        extract_text_features(events, self.ontology, self.dictionary, store, stats)
        extract_list_features(user, events, self.ontology, self.dictionary, store)
        extract_profile_features(events, self.ontology, self.dictionary, store, stats)

        extract_shared_doc_features(user, events, self.ontology, self.dictionary, store)

        for event in events:
            if event.kind == EventKind.WIKI_PAGE:
                for topic, value in extract_wiki_feature(event.payload, self.ontology, self.dictionary).items():
                    store.add(user, topic, event.feature, value)


def extract_features(
    events: Iterable[EventRecord],
    ontology: TopicOntology,
    dictionary: PhraseDictionary,
    partitions: Optional[int] = None,
) -> FeatureStore:
    return FeatureExtractor(ontology, dictionary, partitions).extract(partition_by_user(events))
