"""
Topic ontology, phrase dictionary and the text -> bag-of-topics matcher.

The ontology is a three-level tree (super -> sub -> entity) read from a
tab-separated file::

    id<TAB>slug<TAB>display_name<TAB>level<TAB>parent_id-or-dash

An optional header line ``# counts: super=15 sub=602 entity=8551`` declares
the expected node count per level and is checked on load.
"""
import logging
import re
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple

from topic_experts.exceptions import OntologyParseError, OntologyValidationError

logger = logging.getLogger(__name__)

BagOfTopics = Dict[str, float]

_COUNTS_RE = re.compile(r"^#\s*counts:\s*(.*)$")
_CAMEL_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")


class Level(str, Enum):
    SUPER = "super"
    SUB = "sub"
    ENTITY = "entity"


_PARENT_LEVEL = {Level.SUB: Level.SUPER, Level.ENTITY: Level.SUB}


@dataclass(frozen=True)
class TopicNode:
    id: str
    slug: str
    display_name: str
    level: Level
    parent_id: Optional[str] = None


@dataclass
class TopicOntology:
    nodes: Dict[str, TopicNode]
    declared_counts: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self._by_slug = {node.slug: node for node in self.nodes.values()}

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, topic_id):
        return topic_id in self.nodes

    def get(self, topic_id: str) -> Optional[TopicNode]:
        return self.nodes.get(topic_id)

    def by_slug(self, slug: str) -> Optional[TopicNode]:
        return self._by_slug.get(slug)

    def level_counts(self) -> Dict[str, int]:
        counts = {level.value: 0 for level in Level}
        for node in self.nodes.values():
            counts[node.level.value] += 1
        return counts

    def edges(self) -> List[Tuple[str, str]]:
        return sorted((n.parent_id, n.id) for n in self.nodes.values() if n.parent_id)

    def super_of(self, topic_id: str) -> Optional[TopicNode]:
        node = self.nodes.get(topic_id)
        while node is not None and node.parent_id is not None:
            node = self.nodes.get(node.parent_id)
        return node


@dataclass(frozen=True)
class PhraseDictionary:
    entries: Mapping[Tuple[str, ...], Tuple[Tuple[str, float], ...]]
    max_phrase_length: int

    def __len__(self):
        return len(self.entries)

    def lookup(self, tokens: Tuple[str, ...]):
        return self.entries.get(tokens)


def _strip_edge_punctuation(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> List[str]:
    tokens = []
    for raw in text.split():
        token = _strip_edge_punctuation(raw).lower()
        if token:
            tokens.append(token)
    return tokens


def hashtag_text(tag: str) -> str:
    """'#MachineLearning' -> 'machine learning'; underscores split as well."""
    tag = tag.lstrip("#")
    words = []
    for part in tag.split("_"):
        words.extend(_CAMEL_RE.findall(part) or ([part] if part else []))
    return " ".join(w.lower() for w in words)


def _parse_counts(line: str) -> Dict[str, int]:
    match = _COUNTS_RE.match(line)
    if not match:
        return {}
    counts = {}
    for item in match.group(1).split():
        key, _, value = item.partition("=")
        if key in {level.value for level in Level} and value.isdigit():
            counts[key] = int(value)
    return counts


def load_ontology(path) -> TopicOntology:
    nodes: Dict[str, TopicNode] = {}
    declared: Dict[str, int] = {}
    slugs: Dict[str, str] = {}

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                declared.update(_parse_counts(line))
                continue

            parts = line.split("\t")
            if len(parts) != 5:
                raise OntologyParseError(f"expected 5 tab-separated fields, got {len(parts)}", line_no)
            topic_id, slug, display_name, level, parent = (p.strip() for p in parts)
            if not topic_id or not slug:
                raise OntologyParseError("empty id or slug", line_no)
            try:
                level = Level(level)
            except ValueError:
                raise OntologyParseError(f"unknown level '{level}'", line_no) from None

            if topic_id in nodes:
                raise OntologyValidationError("duplicate id", topic_id)
            if slug in slugs:
                raise OntologyValidationError(f"duplicate slug '{slug}'", topic_id)
            slugs[slug] = topic_id
            nodes[topic_id] = TopicNode(
                id=topic_id,
                slug=slug,
                display_name=display_name,
                level=level,
                parent_id=None if parent in ("", "-") else parent,
            )

    _validate_tree(nodes)
    ontology = TopicOntology(nodes=nodes, declared_counts=declared)

    if declared:
        actual = ontology.level_counts()
        for level, expected in declared.items():
            if actual[level] != expected:
                raise OntologyValidationError(
                    f"header declares {expected} {level} topics, file has {actual[level]}"
                )

    logger.info("Loaded ontology %s: %s", path, ontology.level_counts())
    return ontology


def _validate_tree(nodes: Dict[str, TopicNode]) -> None:
    for node in nodes.values():
        if node.level == Level.SUPER:
            if node.parent_id is not None:
                raise OntologyValidationError("super topic must not have a parent", node.id)
            continue
        if node.parent_id is None:
            raise OntologyValidationError(f"{node.level.value} topic without parent", node.id)
        parent = nodes.get(node.parent_id)
        if parent is None:
            raise OntologyValidationError(f"orphan parent '{node.parent_id}'", node.id)
        if parent.level != _PARENT_LEVEL[node.level]:
            raise OntologyValidationError(
                f"level mismatch: {node.level.value} under {parent.level.value}", node.id
            )
    # Levels strictly decrease towards the root, so the tree cannot contain cycles.


def load_dictionary(path, ontology: TopicOntology) -> PhraseDictionary:
    """Read ``phrase<TAB>topic_id[<TAB>weight]`` rows; a phrase may map to several topics."""
    entries: Dict[Tuple[str, ...], Dict[str, float]] = defaultdict(dict)

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise OntologyParseError(f"expected 2 or 3 fields, got {len(parts)}", line_no)
            tokens = tuple(tokenize(parts[0]))
            if not tokens:
                raise OntologyParseError("empty phrase", line_no)
            topic_id = parts[1].strip()
            if topic_id not in ontology:
                raise OntologyValidationError(f"unknown topic '{topic_id}'", parts[0])
            try:
                weight = float(parts[2]) if len(parts) == 3 and parts[2].strip() else 1.0
            except ValueError:
                raise OntologyParseError(f"bad weight '{parts[2]}'", line_no) from None
            if weight < 0:
                raise OntologyParseError("negative weight", line_no)
            entries[tokens][topic_id] = entries[tokens].get(topic_id, 0.0) + weight

    return build_dictionary({phrase: topics for phrase, topics in entries.items()})


def build_dictionary(entries: Mapping) -> PhraseDictionary:
    """Build from ``{phrase: {topic_id: weight}}``; phrases may be strings or token tuples."""
    frozen = {}
    for phrase, topics in entries.items():
        tokens = tuple(tokenize(phrase)) if isinstance(phrase, str) else tuple(phrase)
        if not tokens:
            continue
        frozen[tokens] = tuple(sorted(topics.items()))
    max_len = max((len(t) for t in frozen), default=0)
    return PhraseDictionary(entries=frozen, max_phrase_length=max_len)


def topicize(text: str, dictionary: PhraseDictionary, ontology: Optional[TopicOntology] = None) -> BagOfTopics:
    """
    Map text to topic frequencies by greedy longest-match-first phrase matching,
    left to right over non-overlapping token spans.
    """
    tokens = tokenize(text)
    bag: BagOfTopics = {}
    i, n = 0, len(tokens)
    max_len = dictionary.max_phrase_length

    while i < n:
        matched = 0
        for length in range(min(max_len, n - i), 0, -1):
            topics = dictionary.entries.get(tuple(tokens[i : i + length]))
            if topics is not None:
                for topic_id, weight in topics:
                    if weight > 0 and (ontology is None or topic_id in ontology):
                        bag[topic_id] = bag.get(topic_id, 0.0) + weight
                matched = length
                break
        i += matched or 1

    return bag
