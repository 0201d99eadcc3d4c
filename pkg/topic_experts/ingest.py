"""
Reading, validating and partitioning multi-network event files.

Each line of an event file is one JSON object::

    {"kind": "MESSAGE", "network": "TW", "attribution": "GENERATED",
     "subject": "u42", "ts": 1436659200, "payload": {"text": "...", "source_tag": "MSG_TEXT"}}

Bad lines never stop the stream; they are collected into an ``IngestReport``.
"""
import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Union

from topic_experts.catalog import Attribution, FeatureId, Network, Source, get_catalog
from topic_experts.utils import write_tsv

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    MESSAGE = "MESSAGE"
    LIST = "LIST"
    PROFILE_FIELD = "PROFILE_FIELD"
    GRAPH_EDGE = "GRAPH_EDGE"
    SHARED_DOC = "SHARED_DOC"
    WIKI_PAGE = "WIKI_PAGE"


class ListRole(str, Enum):
    MEMBER = "MEMBER"
    CREATOR = "CREATOR"
    SUBSCRIBER = "SUBSCRIBER"


class EdgeSet(str, Enum):
    FOLLOWERS = "FOLLOWERS"
    FOLLOWING = "FOLLOWING"
    FRIENDS = "FRIENDS"


MESSAGE_SOURCES = (Source.MSG_TEXT, Source.PAGE_TEXT, Source.HASHTAG, Source.URL, Source.URL_META)

ALLOWED_NETWORKS = {
    EventKind.MESSAGE: {Network.TW, Network.FB, Network.FB_PAGE, Network.GP},
    EventKind.LIST: {Network.TW},
    EventKind.PROFILE_FIELD: {Network.LI},
    EventKind.GRAPH_EDGE: {Network.TW, Network.FB, Network.GP},
    EventKind.SHARED_DOC: {Network.TW},
    EventKind.WIKI_PAGE: {Network.WIKI},
}


class InvalidRecord(ValueError):
    pass


@dataclass(frozen=True)
class MessagePayload:
    text: str
    source_tag: Source


@dataclass(frozen=True)
class ListPayload:
    list_name: str
    role: ListRole
    # L(u) as read from the user's profile, when known
    profile_total: Optional[int] = None


@dataclass(frozen=True)
class ProfileFieldPayload:
    field: Source
    text: str
    company_followers: float = 0.0
    industry_followers: float = 0.0


@dataclass(frozen=True)
class GraphEdgePayload:
    actor_user: str
    edge_set: EdgeSet


@dataclass(frozen=True)
class SharedDocPayload:
    doc_id: str
    text: str
    reaction_count: int


@dataclass(frozen=True)
class WikiPagePayload:
    page_text: str
    inlinks: int
    outlinks: int


# Payload attribute -> key in the event file, where they differ.
_WIRE_KEYS = {"actor_user": "actor", "reaction_count": "reactions"}


Payload = Union[
    MessagePayload, ListPayload, ProfileFieldPayload, GraphEdgePayload, SharedDocPayload, WikiPagePayload
]


@dataclass(frozen=True)
class EventRecord:
    kind: EventKind
    network: Network
    attribution: Attribution
    subject_user: str
    payload: Payload
    timestamp: float

    @property
    def feature(self) -> FeatureId:
        return FeatureId(self.network, feature_source(self.kind, self.payload), self.attribution)

    def to_dict(self) -> dict:
        payload = {
            _WIRE_KEYS.get(k, k): (v.value if isinstance(v, Enum) else v)
            for k, v in asdict(self.payload).items()
            if v is not None
        }
        return {
            "kind": self.kind.value,
            "network": self.network.value,
            "attribution": self.attribution.value,
            "subject": self.subject_user,
            "ts": self.timestamp,
            "payload": payload,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def feature_source(kind: EventKind, payload: Payload) -> Source:
    if kind == EventKind.MESSAGE:
        return payload.source_tag
    if kind == EventKind.LIST:
        return Source.LIST
    if kind == EventKind.PROFILE_FIELD:
        return payload.field
    if kind == EventKind.GRAPH_EDGE:
        return Source(payload.edge_set.value)
    if kind == EventKind.SHARED_DOC:
        return Source.SOCIAL_WWW
    return Source.WIKI_INOUT


@dataclass
class Reject:
    line_no: int
    reason: str


@dataclass
class IngestReport:
    lines: int = 0
    accepted: int = 0
    rejects: List[Reject] = field(default_factory=list)

    @property
    def rejected(self) -> int:
        return len(self.rejects)

    def reject(self, line_no: int, reason: str) -> None:
        self.rejects.append(Reject(line_no, reason))

    def reasons(self) -> Dict[str, int]:
        return dict(sorted(Counter(r.reason for r in self.rejects).items()))

    def write(self, path) -> None:
        write_tsv(path, ((r.line_no, r.reason) for r in self.rejects), header=("line", "reason"))

    def summary(self) -> dict:
        return {
            "lines": self.lines,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "reasons": self.reasons(),
        }


def _enum(enum_cls, value, what):
    try:
        return enum_cls(value)
    except ValueError:
        raise InvalidRecord(f"unknown {what}") from None


def _require(payload: dict, key: str):
    if key not in payload or payload[key] is None:
        raise InvalidRecord(f"missing payload field '{key}'")
    return payload[key]


def _finite(value, key: str, what: str):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidRecord(f"'{key}' must be {what}")
    # ints are exact; only floats can be inf or nan
    if isinstance(value, float) and not math.isfinite(value):
        raise InvalidRecord(f"'{key}' must be finite")
    return value


def _count(payload: dict, key: str, default=None) -> int:
    value = payload.get(key, default)
    if value is None:
        raise InvalidRecord(f"missing payload field '{key}'")
    value = _finite(value, key, "an integer")
    if value != int(value):
        raise InvalidRecord(f"'{key}' must be an integer")
    if value < 0:
        raise InvalidRecord(f"'{key}' must be non-negative")
    return int(value)


def _text(payload: dict, key: str) -> str:
    value = _require(payload, key)
    if not isinstance(value, str) or not value.strip():
        raise InvalidRecord(f"'{key}' must be non-empty text")
    return value


def _parse_payload(kind: EventKind, subject: str, payload: dict) -> Payload:
    if kind == EventKind.MESSAGE:
        source = _enum(Source, _require(payload, "source_tag"), "source tag")
        if source not in MESSAGE_SOURCES:
            raise InvalidRecord("unknown source tag")
        return MessagePayload(text=_text(payload, "text"), source_tag=source)

    if kind == EventKind.LIST:
        total = payload.get("profile_total")
        return ListPayload(
            list_name=_text(payload, "list_name"),
            role=_enum(ListRole, _require(payload, "role"), "list role"),
            profile_total=None if total is None else _count(payload, "profile_total"),
        )

    if kind == EventKind.PROFILE_FIELD:
        field_name = _enum(Source, _require(payload, "field"), "profile field")
        if field_name not in (Source.SKILLS, Source.INDUSTRY):
            raise InvalidRecord("unknown profile field")
        company = _finite(payload.get("company_followers", 0) or 0, "company_followers", "a number")
        industry = _finite(payload.get("industry_followers", 0) or 0, "industry_followers", "a number")
        if company < 0 or industry < 0:
            raise InvalidRecord("follower counts must be non-negative")
        return ProfileFieldPayload(
            field=field_name,
            text=_text(payload, "text"),
            company_followers=float(company),
            industry_followers=float(industry),
        )

    if kind == EventKind.GRAPH_EDGE:
        actor = _require(payload, "actor")
        if not isinstance(actor, str) or not actor:
            raise InvalidRecord("'actor' must be a user id")
        if actor == subject:
            raise InvalidRecord("self edge")
        return GraphEdgePayload(actor_user=actor, edge_set=_enum(EdgeSet, _require(payload, "edge_set"), "edge set"))

    if kind == EventKind.SHARED_DOC:
        return SharedDocPayload(
            doc_id=str(_require(payload, "doc_id")),
            text=_text(payload, "text"),
            reaction_count=_count(payload, "reactions", 0),
        )

    return WikiPagePayload(
        page_text=_text(payload, "page_text"),
        inlinks=_count(payload, "inlinks"),
        outlinks=_count(payload, "outlinks"),
    )


def parse_event(obj) -> EventRecord:
    """Validate one decoded object; raises InvalidRecord with the reject reason."""
    if not isinstance(obj, dict):
        raise InvalidRecord("record is not an object")
    for key in ("kind", "network", "attribution", "subject", "ts", "payload"):
        if key not in obj:
            raise InvalidRecord(f"missing field '{key}'")

    kind = _enum(EventKind, obj["kind"], "kind")
    network = _enum(Network, obj["network"], "network")
    attribution = _enum(Attribution, obj["attribution"], "attribution")
    subject = obj["subject"]
    if not isinstance(subject, str) or not subject:
        raise InvalidRecord("'subject' must be a user id")
    ts = _finite(obj["ts"], "ts", "epoch seconds")
    if not isinstance(obj["payload"], dict):
        raise InvalidRecord("'payload' must be an object")

    if network not in ALLOWED_NETWORKS[kind]:
        raise InvalidRecord(f"network {network.value} not allowed for {kind.value}")

    payload = _parse_payload(kind, subject, obj["payload"])
    if kind == EventKind.LIST:
        expected = Attribution.CREDITED if payload.role == ListRole.MEMBER else Attribution.GENERATED
        if attribution != expected:
            raise InvalidRecord("attribution mismatch")

    record = EventRecord(kind, network, attribution, subject, payload, ts)
    if record.feature not in get_catalog():
        raise InvalidRecord("feature not in catalog")
    return record


def read_events(
    path,
    report: Optional[IngestReport] = None,
    since: Optional[float] = None,
    until: Optional[float] = None,
) -> Iterator[EventRecord]:
    """
    Yield validated records in file order. Records with a timestamp outside
    ``[since, until]`` are rejected as "outside window".
    """
    if report is None:
        report = IngestReport()

    with open(path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            report.lines += 1
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                report.reject(line_no, "invalid utf-8")
                continue
            try:
                record = parse_event(json.loads(line))
            except ValueError as exc:
                reason = str(exc) if isinstance(exc, InvalidRecord) else "malformed json"
                report.reject(line_no, reason)
                continue
            if (since is not None and record.timestamp < since) or (
                until is not None and record.timestamp > until
            ):
                report.reject(line_no, "outside window")
                continue
            report.accepted += 1
            yield record

    logger.info(
        "Read %s: %d lines, %d accepted, %d rejected", path, report.lines, report.accepted, report.rejected
    )


def latest_timestamp(path) -> Optional[float]:
    latest = None
    for record in read_events(path):
        if latest is None or record.timestamp > latest:
            latest = record.timestamp
    return latest


def partition_by_user(events: Iterable[EventRecord]) -> Dict[str, List[EventRecord]]:
    groups: Dict[str, List[EventRecord]] = {}
    for event in events:
        groups.setdefault(event.subject_user, []).append(event)
    return groups


def corpus_users(events: Iterable[EventRecord]) -> List[str]:
    """Every user seen anywhere in the corpus, as subject or as graph actor."""
    users = set()
    for event in events:
        users.add(event.subject_user)
        if event.kind == EventKind.GRAPH_EDGE:
            users.add(event.payload.actor_user)
    return sorted(users)


def write_events(path, events: Iterable[EventRecord]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for event in events:
            fh.write(event.to_json() + "\n")
            count += 1
    return count
