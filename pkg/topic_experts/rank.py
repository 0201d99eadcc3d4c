"""
Per-topic ranked indexes over expertise scores.

Within a topic users are ordered by score descending, then user id
ascending; rank starts at 1 and the percentile of rank r among n scored
users is ``1 - r / (n + 1)``. Users scoring 0 are left out.

On disk an index directory holds::

    topics.tsv            topic id, slug, display name, scored users
    experts/<id>.tsv      rank, user, score, percentile
    handles.tsv           user, twitter username
"""
import logging
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from topic_experts.exceptions import MissingArtifactError, TopicNotFound, UserNotFound
from topic_experts.model import ExpertiseScore
from topic_experts.ontology import TopicOntology
from topic_experts.utils import ensure_dir, format_float, read_tsv, write_tsv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TopicInfo:
    id: str
    slug: str
    display_name: str


@dataclass(frozen=True)
class RankedEntry:
    user: str
    score: float
    rank: int
    percentile: float


@dataclass(frozen=True)
class UserTopic:
    topic: TopicInfo
    percentile: float


class RankedIndex:
    """An immutable snapshot; build a new one instead of changing it."""

    def __init__(
        self,
        experts: Mapping[str, Tuple[RankedEntry, ...]],
        topics: Mapping[str, TopicInfo],
        handles: Optional[Mapping[str, str]] = None,
    ):
        self._experts = {topic_id: tuple(entries) for topic_id, entries in experts.items()}
        self._topics = dict(topics)
        self._by_slug = {info.slug: info for info in self._topics.values()}
        self._handles = dict(handles or {})
        self._users_by_handle = {handle: user for user, handle in self._handles.items()}
        self._users_by_folded_handle = {handle.casefold(): user for user, handle in sorted(self._handles.items())}

        by_user: Dict[str, List[UserTopic]] = {}
        for topic_id, entries in self._experts.items():
            for entry in entries:
                by_user.setdefault(entry.user, []).append(UserTopic(self._topics[topic_id], entry.percentile))
        self._by_user = {
            user: tuple(sorted(items, key=lambda item: (-item.percentile, item.topic.slug)))
            for user, items in by_user.items()
        }

    def __len__(self):
        return len(self._experts)

    @property
    def topics(self) -> List[TopicInfo]:
        return sorted(self._topics.values(), key=lambda info: info.id)

    def experts(self, topic_id: str) -> Tuple[RankedEntry, ...]:
        return self._experts.get(topic_id, ())

    def population(self) -> Dict[str, int]:
        """Scored users per topic slug."""
        return {info.slug: len(self._experts.get(info.id, ())) for info in self.topics}

    def handle_of(self, user: str) -> str:
        return self._handles.get(user, user)

    def resolve_user(self, user_or_handle: str) -> Optional[str]:
        if user_or_handle in self._by_user:
            return user_or_handle
        user = self._users_by_handle.get(user_or_handle)
        if user is None:
            user = self._users_by_folded_handle.get(user_or_handle.casefold())
        return user if user in self._by_user else None

    def top_experts(self, slug: str, k: int) -> List[RankedEntry]:
        info = self._by_slug.get(slug)
        if info is None:
            raise TopicNotFound(f"Unknown topic '{slug}'")
        return list(self._experts.get(info.id, ())[: max(k, 0)])

    def user_topics(self, user_or_handle: str) -> List[UserTopic]:
        user = self.resolve_user(user_or_handle)
        if user is None:
            raise UserNotFound(f"No expertise topics for '{user_or_handle}'")
        return list(self._by_user[user])

    def write(self, directory) -> None:
        ensure_dir(os.path.join(directory, "experts"))
        write_tsv(
            os.path.join(directory, "topics.tsv"),
            ((t.id, t.slug, t.display_name, len(self._experts.get(t.id, ()))) for t in self.topics),
            header=("topic_id", "slug", "display_name", "users"),
        )
        for info in self.topics:
            write_tsv(
                os.path.join(directory, "experts", f"{info.id}.tsv"),
                (
                    (e.rank, e.user, format_float(e.score), format_float(e.percentile))
                    for e in self._experts.get(info.id, ())
                ),
                header=("rank", "user", "score", "percentile"),
            )
        write_tsv(
            os.path.join(directory, "handles.tsv"),
            sorted(self._handles.items()),
            header=("user", "twitter_username"),
        )

    @classmethod
    def read(cls, directory) -> "RankedIndex":
        topics_path = os.path.join(directory, "topics.tsv")
        if not os.path.exists(topics_path):
            raise MissingArtifactError(topics_path, "index")
        topics = {}
        experts = {}
        for topic_id, slug, display_name, *_ in read_tsv(topics_path, expected=3):
            topics[topic_id] = TopicInfo(topic_id, slug, display_name)
            path = os.path.join(directory, "experts", f"{topic_id}.tsv")
            if not os.path.exists(path):
                raise MissingArtifactError(path, "index")
            experts[topic_id] = tuple(
                RankedEntry(user, float(score), int(rank), float(percentile))
                for rank, user, score, percentile in read_tsv(path, expected=4)
            )
        handles_path = os.path.join(directory, "handles.tsv")
        handles = dict(read_handles(handles_path)) if os.path.exists(handles_path) else {}
        return cls(experts, topics, handles)


def rank_topic(scores: Iterable[Tuple[str, float]]) -> Tuple[RankedEntry, ...]:
    ordered = sorted(((user, s) for user, s in scores if s > 0), key=lambda item: (-item[1], item[0]))
    count = len(ordered)
    return tuple(
        RankedEntry(user, s, rank, 1.0 - rank / (count + 1))
        for rank, (user, s) in enumerate(ordered, start=1)
    )


def build_index(
    scores: Iterable[ExpertiseScore],
    ontology: Optional[TopicOntology] = None,
    handles: Optional[Mapping[str, str]] = None,
) -> RankedIndex:
    by_topic: Dict[str, List[Tuple[str, float]]] = {}
    excluded = 0
    for s in scores:
        if s.score > 0:
            by_topic.setdefault(s.topic, []).append((s.user, s.score))
        else:
            excluded += 1

    topics = {}
    for topic_id in sorted(by_topic):
        node = ontology.get(topic_id) if ontology is not None else None
        topics[topic_id] = TopicInfo(topic_id, node.slug, node.display_name) if node else TopicInfo(topic_id, topic_id, topic_id)

    experts = {topic_id: rank_topic(by_topic[topic_id]) for topic_id in topics}
    logger.info("Indexed %d topics; %d zero scores left out", len(topics), excluded)
    return RankedIndex(experts, topics, handles)


def read_handles(path) -> List[Tuple[str, str]]:
    return [(user, handle) for user, handle, *_ in read_tsv(path, expected=2)]


def write_handles(path, handles: Mapping[str, str]) -> None:
    write_tsv(path, sorted(handles.items()), header=("user", "twitter_username"))
