"""
Synthetic datasets with a planted expertise model.

Every user gets a power-law connectivity and a latent expertise on a few
topics that grows with their connectivity percentile. Each network turns
latent expertise into topical activity in proportion to its signal
strength. A network with signal 0 still posts on its users' topics, but at
a rate unrelated to their expertise, so its features carry no signal.
Evaluators sort random user lists by latent expertise plus Gaussian noise
whose scale is calibrated to a target label noise.

``label_noise`` is the expected disagreement of two votes on a pair: with a
per-vote flip rate r, two-vote consensus is 1 - r(1 - r), so r solves
r(1 - r) = label_noise.
"""
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from topic_experts.catalog import Attribution, Network, Source
from topic_experts.exceptions import ConfigError
from topic_experts.features import ConnectivityVector, write_connectivity_vectors
from topic_experts.groundtruth import PairLabel, SortedEvaluation, write_evaluations
from topic_experts.ingest import (
    EdgeSet,
    EventKind,
    EventRecord,
    GraphEdgePayload,
    ListPayload,
    ListRole,
    MessagePayload,
    ProfileFieldPayload,
    SharedDocPayload,
    WikiPagePayload,
)
from topic_experts.ontology import Level, TopicNode, TopicOntology, build_dictionary
from topic_experts.rank import write_handles
from topic_experts.utils import ensure_dir, format_float, read_tsv, write_tsv

logger = logging.getLogger(__name__)

DAY = 86400

DEFAULT_SIGNALS = {
    Network.TW.value: 1.0,
    Network.FB.value: 0.0,
    Network.FB_PAGE.value: 0.5,
    Network.GP.value: 0.6,
    Network.LI.value: 0.4,
    Network.WIKI.value: 0.8,
}

G, R, C = Attribution.GENERATED, Attribution.REACTED, Attribution.CREDITED

# (source, attribution, share of the network's message rate)
MESSAGE_MIX = {
    Network.TW: [
        (Source.MSG_TEXT, G, 1.0),
        (Source.MSG_TEXT, R, 0.5),
        (Source.MSG_TEXT, C, 0.25),
        (Source.HASHTAG, G, 0.3),
        (Source.HASHTAG, R, 0.15),
        (Source.HASHTAG, C, 0.15),
        (Source.URL, G, 0.25),
        (Source.URL, R, 0.1),
        (Source.URL_META, G, 0.25),
        (Source.URL_META, R, 0.1),
    ],
    Network.FB: [
        (Source.MSG_TEXT, G, 1.0),
        (Source.MSG_TEXT, R, 0.5),
        (Source.MSG_TEXT, C, 0.25),
        (Source.URL, G, 0.25),
        (Source.URL, R, 0.1),
        (Source.URL_META, G, 0.25),
        (Source.URL_META, R, 0.1),
    ],
    Network.FB_PAGE: [
        (Source.PAGE_TEXT, G, 1.0),
        (Source.PAGE_TEXT, R, 0.5),
        (Source.URL, G, 0.25),
        (Source.URL_META, G, 0.25),
    ],
    Network.GP: [
        (Source.MSG_TEXT, G, 1.0),
        (Source.MSG_TEXT, R, 0.5),
        (Source.URL, G, 0.25),
        (Source.URL, R, 0.1),
        (Source.URL_META, G, 0.25),
        (Source.URL_META, R, 0.1),
    ],
}

CHATTER = "weekend plans and coffee with friends"


@dataclass(frozen=True)
class SynthConfig:
    users: int = 2000
    topics: int = 10
    connectivity_exponent: float = 2.0
    label_noise: float = 0.16
    signals: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_SIGNALS))
    message_rate: float = 12.0
    chatter_rate: float = 2.0
    max_interests: int = 3
    lists_per_topic: int = 60
    list_length: int = 8
    evaluators_per_list: int = 2
    unsortable_rate: float = 0.1
    stale_rate: float = 0.01
    corrupt_rate: float = 0.0
    window_days: int = 90
    as_of: int = 1436659200

    def __post_init__(self):
        def check(name, ok, message):
            if not ok:
                raise ConfigError(name, message)

        check("users", isinstance(self.users, int) and self.users >= 2, "must be an integer >= 2")
        check("topics", isinstance(self.topics, int) and self.topics >= 1, "must be an integer >= 1")
        check("connectivity_exponent", self.connectivity_exponent > 1, "must be > 1")
        check("label_noise", 0 <= self.label_noise < 0.25, "must be in [0, 0.25)")
        check("message_rate", self.message_rate > 0, "must be > 0")
        check("chatter_rate", self.chatter_rate >= 0, "must be >= 0")
        check("max_interests", isinstance(self.max_interests, int) and self.max_interests >= 1, "must be >= 1")
        check("lists_per_topic", isinstance(self.lists_per_topic, int) and self.lists_per_topic >= 0, "must be >= 0")
        check("list_length", isinstance(self.list_length, int) and self.list_length >= 2, "must be >= 2")
        check("evaluators_per_list", isinstance(self.evaluators_per_list, int) and self.evaluators_per_list >= 1, "must be >= 1")
        for name in ("unsortable_rate", "stale_rate", "corrupt_rate"):
            check(name, 0 <= getattr(self, name) < 1, "must be in [0, 1)")
        check("window_days", isinstance(self.window_days, int) and self.window_days > 0, "must be a positive integer")
        check("as_of", isinstance(self.as_of, int) and self.as_of > self.window_days * DAY, "must be epoch seconds")
        for key, value in self.signals.items():
            check("signals", key in Network.__members__, f"unknown network '{key}'")
            check("signals", 0 <= value <= 1, f"signal for {key} must be in [0, 1]")

    def signal(self, network: Network) -> float:
        return float(self.signals.get(network.value, 0.0))

    @classmethod
    def from_dict(cls, data: Mapping) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown setting")
        values = dict(data)
        if "signals" in values:
            if not isinstance(values["signals"], Mapping):
                raise ConfigError("signals", "must map network names to strengths")
            values["signals"] = {**DEFAULT_SIGNALS, **values["signals"]}
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "SynthConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except ValueError as exc:
            raise ConfigError("config", f"{path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config", f"{path} must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["signals"] = dict(sorted(self.signals.items()))
        return data


def flip_rate(label_noise: float) -> float:
    """Per-vote flip rate r with r(1 - r) = label_noise."""
    return (1.0 - math.sqrt(1.0 - 4.0 * label_noise)) / 2.0


def calibrate_sort_noise(gaps, target: float) -> float:
    """
    Standard deviation of the per-user sort noise giving a mean pairwise flip
    probability of ``target`` over the given latent gaps.
    """
    gaps = np.abs(np.asarray(gaps, dtype=float))
    if target <= 0 or gaps.size == 0:
        return 0.0

    def excess(sigma):
        return float(np.mean(norm.sf(gaps / (sigma * math.sqrt(2.0))))) - target

    return float(brentq(excess, 1e-12, 1e3, xtol=1e-12))


def sample_connectivity(n: int, exponent: float, rng: np.random.Generator) -> np.ndarray:
    """Integer in-degrees >= 1 with density falling as c^-exponent."""
    return np.floor(rng.pareto(exponent - 1.0, size=n) + 1.0).astype(np.int64)


def synth_votes(n_pairs: int, votes_per_pair: int, label_noise: float, seed: int) -> List[PairLabel]:
    """Independent votes on ``n_pairs`` pairs whose true label is +1."""
    rng = np.random.default_rng(seed)
    flips = rng.random((n_pairs, votes_per_pair)) < flip_rate(label_noise)
    return [
        PairLabel(f"p{i:06d}a", f"p{i:06d}b", "t000", -1 if flips[i, k] else 1, f"e{k:02d}")
        for i in range(n_pairs)
        for k in range(votes_per_pair)
    ]


@dataclass
class SynthDataset:
    config: SynthConfig
    seed: int
    topics: List[TopicNode]
    phrases: Dict[str, str]
    events: List[EventRecord]
    connectivity: Dict[str, ConnectivityVector]
    handles: Dict[str, str]
    latent: Dict[Tuple[str, str], float]
    evaluations: List[SortedEvaluation]
    sort_noise: float = 0.0

    def ontology(self) -> TopicOntology:
        return TopicOntology(nodes={node.id: node for node in self.topics})

    def dictionary(self):
        return build_dictionary({phrase: {topic: 1.0} for phrase, topic in self.phrases.items()})

    def latent_order(self, u1: str, u2: str, topic: str) -> int:
        """+1 when u1 has the higher latent expertise on topic, -1 when lower, 0 on a tie."""
        a = self.latent.get((u1, topic), 0.0)
        b = self.latent.get((u2, topic), 0.0)
        return (a > b) - (a < b)


def build_topics(count: int) -> List[TopicNode]:
    """A super -> sub -> entity tree of ``count`` topics."""
    supers = max(1, count // 5)
    subs = math.ceil((count - supers) / 2)
    nodes = []
    for i in range(count):
        if i < supers:
            level, parent = Level.SUPER, None
        elif i < supers + subs:
            level, parent = Level.SUB, f"t{(i - supers) % supers:03d}"
        else:
            level, parent = Level.ENTITY, f"t{supers + (i - supers - subs) % subs:03d}"
        nodes.append(TopicNode(f"t{i:03d}", f"topic-{i:03d}", f"Topic {i:03d}", level, parent))
    return nodes


def topic_phrase(topic_id: str) -> str:
    return f"topic {topic_id[1:]}"


def _message_text(source: Source, topic_id: str) -> str:
    phrase = topic_phrase(topic_id)
    if source == Source.HASHTAG:
        return f"#Topic{topic_id[1:]}"
    if source == Source.URL:
        return f"https://example.org/{topic_id} {phrase}"
    if source == Source.URL_META:
        return f"headline: {phrase} explained"
    return f"thoughts on {phrase} today"


class SyntheticGenerator:
    def __init__(self, config: SynthConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def _timestamps(self, k: int) -> List[int]:
        cfg = self.config
        window = cfg.window_days * DAY
        stamps = cfg.as_of - self.rng.integers(0, window, size=k)
        stale = self.rng.random(k) < cfg.stale_rate
        stamps[stale] = cfg.as_of - window - self.rng.integers(DAY, 30 * DAY, size=int(stale.sum()))
        return [int(s) for s in stamps]

    def _emit(self, events, k, kind, network, attribution, subject, payload_fn):
        for n, ts in enumerate(self._timestamps(k)):
            events.append(EventRecord(kind, network, attribution, subject, payload_fn(n), ts))

    def generate(self) -> SynthDataset:
        cfg = self.config
        rng = self.rng
        topics = build_topics(cfg.topics)
        topic_ids = [node.id for node in topics]
        users = [f"u{i:05d}" for i in range(cfg.users)]

        degrees = sample_connectivity(cfg.users, cfg.connectivity_exponent, rng)
        percentile = np.argsort(np.argsort(degrees, kind="stable"), kind="stable") / max(cfg.users - 1, 1)
        connectivity: Dict[str, ConnectivityVector] = {}
        for user, degree in zip(users, degrees):
            vector = {f"{Network.TW.value}_{EdgeSet.FOLLOWERS.value}": int(degree)}
            friends = int(degree * rng.uniform(0.0, 0.5))
            if friends > 0:
                vector[f"{Network.FB.value}_{EdgeSet.FRIENDS.value}"] = friends
            connectivity[user] = vector

        latent: Dict[Tuple[str, str], float] = {}
        interests: Dict[str, List[str]] = {}
        for index, user in enumerate(users):
            k = min(1 + int(rng.poisson(1.0)), cfg.max_interests, len(topic_ids))
            chosen = sorted(rng.choice(len(topic_ids), size=k, replace=False))
            interests[user] = [topic_ids[i] for i in chosen]
            for topic in interests[user]:
                latent[(user, topic)] = float(0.5 * percentile[index] + 0.5 * rng.random())

        pools = {t: [u for u in users if (u, t) in latent] for t in topic_ids}
        events: List[EventRecord] = []
        for user in users:
            self._user_events(user, interests[user], latent, pools, events)
        if events:
            first = events[0]
            events[0] = EventRecord(
                first.kind, first.network, first.attribution, first.subject_user, first.payload, cfg.as_of
            )

        evaluations, sort_noise = self._evaluations(topic_ids, pools, latent)
        handles = {user: f"User{user[1:]}" for user in users}
        phrases = {topic_phrase(t): t for t in topic_ids}
        logger.info(
            "Generated %d users, %d events, %d evaluations (sort noise %.4g)",
            len(users),
            len(events),
            len(evaluations),
            sort_noise,
        )
        return SynthDataset(
            cfg, self.seed, topics, phrases, events, connectivity, handles, latent, evaluations, sort_noise
        )

    def _user_events(self, user, topics, latent, pools, events):
        cfg = self.config
        rng = self.rng

        for network, mix in MESSAGE_MIX.items():
            source = Source.PAGE_TEXT if network == Network.FB_PAGE else Source.MSG_TEXT
            chatter = MessagePayload(CHATTER, source)
            self._emit(events, rng.poisson(cfg.chatter_rate), EventKind.MESSAGE, network, G, user, lambda n: chatter)

            signal = cfg.signal(network)
            for topic in topics:
                # with no signal the activity level is drawn independently of expertise
                level = signal * latent[(user, topic)] if signal > 0 else rng.random()
                for source_tag, attribution, share in mix:
                    payload = MessagePayload(_message_text(source_tag, topic), source_tag)
                    k = rng.poisson(cfg.message_rate * level * share)
                    self._emit(events, k, EventKind.MESSAGE, network, attribution, user, lambda n: payload)

        self._list_events(user, topics, latent, events)
        self._graph_events(user, topics, latent, pools, events)
        self._profile_events(user, topics, latent, events)

        tw = cfg.signal(Network.TW)
        wiki = cfg.signal(Network.WIKI)
        for topic in topics:
            e = latent[(user, topic)]
            phrase = topic_phrase(topic)
            if tw > 0:
                reactions = int(rng.poisson(10 * tw * e))
                self._emit(
                    events,
                    rng.poisson(2 * tw * e),
                    EventKind.SHARED_DOC,
                    Network.TW,
                    G,
                    user,
                    lambda n, topic=topic: SharedDocPayload(f"{user}-{topic}-{n}", f"notes about {phrase}", reactions),
                )
            if wiki > 0 and e > 1 - 0.5 * wiki:
                page = WikiPagePayload(f"biography {phrase}", int(rng.poisson(200 * e)), 1 + int(rng.poisson(20)))
                self._emit(events, 1, EventKind.WIKI_PAGE, Network.WIKI, C, user, lambda n: page)

    def _list_events(self, user, topics, latent, events):
        rng = self.rng
        signal = self.config.signal(Network.TW)
        member = [(f"{topic_phrase(t)} experts", int(rng.poisson(4 * signal * latent[(user, t)]))) for t in topics]
        member.append(("people i know", int(rng.poisson(1.0))))
        total = sum(k for _, k in member)
        profile_total = total + int(rng.poisson(2.0))
        first = True
        for name, k in member:
            for _ in range(k):
                payload = ListPayload(name, ListRole.MEMBER, profile_total if first else None)
                first = False
                self._emit(events, 1, EventKind.LIST, Network.TW, C, user, lambda n: payload)
        if signal > 0:
            for topic in topics:
                payload = ListPayload(f"my {topic_phrase(topic)} list", ListRole.CREATOR)
                k = rng.poisson(signal * latent[(user, topic)])
                self._emit(events, k, EventKind.LIST, Network.TW, G, user, lambda n: payload)

    def _graph_events(self, user, topics, latent, pools, events):
        rng = self.rng
        for network in (Network.TW, Network.GP):
            signal = self.config.signal(network)
            if signal <= 0:
                continue
            for topic in topics:
                pool = [u for u in pools[topic] if u != user]
                k = min(int(rng.poisson(6 * signal * latent[(user, topic)])), len(pool))
                for follower in sorted(rng.choice(len(pool), size=k, replace=False)) if k else ():
                    payload = GraphEdgePayload(pool[follower], EdgeSet.FOLLOWERS)
                    self._emit(events, 1, EventKind.GRAPH_EDGE, network, Attribution.GRAPH, user, lambda n: payload)

        topic = topics[0]
        pool = [u for u in pools[topic] if u != user]
        k = min(int(rng.poisson(2.0)), len(pool))
        for followed in sorted(rng.choice(len(pool), size=k, replace=False)) if k else ():
            payload = GraphEdgePayload(pool[followed], EdgeSet.FOLLOWING)
            self._emit(events, 1, EventKind.GRAPH_EDGE, Network.TW, Attribution.GRAPH, user, lambda n: payload)

    def _profile_events(self, user, topics, latent, events):
        rng = self.rng
        signal = self.config.signal(Network.LI)
        if signal <= 0:
            return
        for topic in topics:
            if rng.random() < signal * latent[(user, topic)]:
                payload = ProfileFieldPayload(Source.SKILLS, topic_phrase(topic))
                self._emit(events, 1, EventKind.PROFILE_FIELD, Network.LI, G, user, lambda n: payload)
        top = max(topics, key=lambda t: (latent[(user, t)], t))
        company = float(round(1000 * signal * latent[(user, top)]) + 1)
        payload = ProfileFieldPayload(Source.INDUSTRY, topic_phrase(top), company, 1000.0)
        self._emit(events, 1, EventKind.PROFILE_FIELD, Network.LI, G, user, lambda n: payload)

    def _evaluations(self, topic_ids, pools, latent):
        cfg = self.config
        rng = self.rng
        drawn = []
        for topic in topic_ids:
            pool = pools[topic]
            if len(pool) < 2:
                continue
            size = min(cfg.list_length, len(pool))
            for _ in range(cfg.lists_per_topic):
                members = [pool[i] for i in sorted(rng.choice(len(pool), size=size, replace=False))]
                outside = [u for u in pool if u not in members]
                unsortable = ()
                if outside and rng.random() < cfg.unsortable_rate:
                    unsortable = (outside[int(rng.integers(len(outside)))],)
                drawn.append((topic, members, unsortable))

        gaps = [
            latent[(a, topic)] - latent[(b, topic)]
            for topic, members, _ in drawn
            for i, a in enumerate(members)
            for b in members[i + 1 :]
        ]
        sigma = calibrate_sort_noise(gaps, flip_rate(cfg.label_noise))

        evaluations = []
        for list_no, (topic, members, unsortable) in enumerate(drawn):
            for k in range(cfg.evaluators_per_list):
                noise = rng.normal(0.0, 1.0, size=len(members)) * sigma
                keyed = sorted(
                    zip(members, noise), key=lambda item: (-(latent[(item[0], topic)] + item[1]), item[0])
                )
                evaluations.append(
                    SortedEvaluation(
                        f"e{(list_no + k) % 50:02d}", topic, tuple(u for u, _ in keyed), frozenset(unsortable)
                    )
                )
        return evaluations, sigma


def generate(config: SynthConfig, seed: int = 0) -> SynthDataset:
    return SyntheticGenerator(config, seed).generate()


def write_ontology(path, topics: List[TopicNode]) -> None:
    counts = {level: sum(1 for n in topics if n.level == level) for level in Level}
    ensure_dir(os.path.dirname(str(path)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# counts: " + " ".join(f"{level.value}={counts[level]}" for level in Level) + "\n")
        for node in topics:
            fh.write(f"{node.id}\t{node.slug}\t{node.display_name}\t{node.level.value}\t{node.parent_id or '-'}\n")


def write_dataset(dataset: SynthDataset, directory) -> dict:
    """Write every dataset file into ``directory`` and return a summary of what was written."""
    ensure_dir(directory)
    paths = {
        name: os.path.join(directory, name)
        for name in (
            "ontology.tsv",
            "dictionary.tsv",
            "events.jsonl",
            "groundtruth.tsv",
            "connectivity.tsv",
            "handles.tsv",
            "latent.tsv",
        )
    }
    write_ontology(paths["ontology.tsv"], dataset.topics)
    write_tsv(paths["dictionary.tsv"], sorted(dataset.phrases.items()), header=("phrase", "topic_id"))

    corrupt = np.random.default_rng(dataset.seed + 1)
    corrupted = 0
    with open(paths["events.jsonl"], "w", encoding="utf-8", newline="\n") as fh:
        for event in dataset.events:
            fh.write(event.to_json() + "\n")
            if dataset.config.corrupt_rate and corrupt.random() < dataset.config.corrupt_rate:
                fh.write(event.to_json()[: len(event.to_json()) // 2] + "\n")
                corrupted += 1

    write_evaluations(paths["groundtruth.tsv"], dataset.evaluations)
    write_connectivity_vectors(paths["connectivity.tsv"], dataset.connectivity)
    write_handles(paths["handles.tsv"], dataset.handles)
    write_tsv(
        paths["latent.tsv"],
        ((u, t, format_float(v)) for (u, t), v in sorted(dataset.latent.items())),
        header=("user", "topic", "expertise"),
    )
    return {
        "files": sorted(paths),
        "config": dataset.config.to_dict(),
        "seed": dataset.seed,
        "users": dataset.config.users,
        "events": len(dataset.events),
        "corrupted_lines": corrupted,
        "evaluations": len(dataset.evaluations),
        "sort_noise": dataset.sort_noise,
    }


def read_latent(path) -> Dict[Tuple[str, str], float]:
    return {(u, t): float(v) for u, t, v in read_tsv(path, expected=3)}
