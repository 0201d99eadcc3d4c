"""
Evaluator-sorted lists -> pairwise labels, plus the agreement statistics
computed over them.

A ground-truth file holds one evaluation per line::

    evaluator<TAB>topic<TAB>best,second,...,last<TAB>unsortable,users

Every label is kept for the consensus statistics. Training and testing use
the deduplicated labels: one majority label per unordered (pair, topic),
ties dropped.
"""
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

import numpy as np
from django.conf import settings

from topic_experts.exceptions import GroundTruthError
from topic_experts.utils import log10_bucket, map_partitions, read_tsv, stable_hash, write_tsv

logger = logging.getLogger(__name__)

PairKey = Tuple[str, str, str]


@dataclass(frozen=True)
class SortedEvaluation:
    evaluator: str
    topic: str
    users: Tuple[str, ...]
    unsortable: FrozenSet[str] = frozenset()

    def validate(self) -> None:
        if len(set(self.users)) != len(self.users):
            raise GroundTruthError(f"duplicate users in sorted list of {self.evaluator}/{self.topic}")
        overlap = self.unsortable.intersection(self.users)
        if overlap:
            raise GroundTruthError(f"users both sorted and unsortable: {', '.join(sorted(overlap))}")


@dataclass(frozen=True)
class PairLabel:
    """(u1, u2, topic, +1) means u1 was judged the stronger expert on topic."""

    u1: str
    u2: str
    topic: str
    label: int
    evaluator: str = ""

    def __post_init__(self):
        if self.u1 == self.u2:
            raise ValueError(f"A label needs two distinct users, got {self.u1!r} twice")
        if self.label not in (1, -1):
            raise ValueError(f"Label must be +1 or -1, got {self.label!r}")

    @property
    def key(self) -> PairKey:
        """Unordered (pair, topic) key; the smaller user id comes first."""
        if self.u1 < self.u2:
            return self.u1, self.u2, self.topic
        return self.u2, self.u1, self.topic

    @property
    def oriented_label(self) -> int:
        """The label as seen from the ordering of ``key``."""
        return self.label if self.u1 < self.u2 else -self.label

    def swapped(self) -> "PairLabel":
        return PairLabel(self.u2, self.u1, self.topic, -self.label, self.evaluator)


def explode_pairs(ev: SortedEvaluation) -> List[PairLabel]:
    """
    Every i < j in the sorted list yields (u_i, u_j, t, +1): N(N-1)/2 labels
    with the higher-ranked user always first.
    """
    users = ev.users
    return [
        PairLabel(users[i], users[j], ev.topic, 1, ev.evaluator)
        for i in range(len(users))
        for j in range(i + 1, len(users))
    ]


def explode_all(evaluations: List[SortedEvaluation]) -> List[PairLabel]:
    partitions = max(getattr(settings, "TOPIC_EXPERTS_PARTITIONS", 8), 1)
    size = max(-(-len(evaluations) // partitions), 1)
    # Contiguous chunks, so partition order is file order.
    chunks = {pid: evaluations[pid * size : (pid + 1) * size] for pid in range(partitions)}
    chunks = {pid: chunk for pid, chunk in chunks.items() if chunk}

    def explode_chunk(chunk):
        return [label for ev in chunk for label in explode_pairs(ev)]

    return [label for part in map_partitions(chunks, explode_chunk) for label in part]


def _split_users(value: str) -> Tuple[str, ...]:
    return tuple(u.strip() for u in value.split(",") if u.strip())


def read_evaluations(path) -> List[SortedEvaluation]:
    evaluations = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise GroundTruthError("expected evaluator, topic and sorted users", line_no)
            unsortable = frozenset(_split_users(parts[3])) if len(parts) > 3 else frozenset()
            ev = SortedEvaluation(parts[0], parts[1], _split_users(parts[2]), unsortable)
            try:
                ev.validate()
            except GroundTruthError as exc:
                raise GroundTruthError(str(exc), line_no) from exc
            evaluations.append(ev)
    return evaluations


def write_evaluations(path, evaluations: Iterable[SortedEvaluation]) -> None:
    rows = (
        (ev.evaluator, ev.topic, ",".join(ev.users), ",".join(sorted(ev.unsortable)))
        for ev in evaluations
    )
    write_tsv(path, rows, header=("evaluator", "topic", "sorted_users", "unsortable"))


def read_labels(path) -> List[PairLabel]:
    return [
        PairLabel(u1, u2, topic, int(label), rest[0] if rest else "")
        for u1, u2, topic, label, *rest in read_tsv(path, expected=4)
    ]


def write_labels(path, labels: Iterable[PairLabel]) -> None:
    rows = ((l.u1, l.u2, l.topic, l.label, l.evaluator) for l in labels)
    write_tsv(path, rows, header=("u1", "u2", "topic", "label", "evaluator"))


def tally_votes(labels: Iterable[PairLabel]) -> Dict[PairKey, Tuple[int, int]]:
    """(up, down) votes per unordered (pair, topic), seen from the key's order."""
    votes: Dict[PairKey, List[int]] = defaultdict(lambda: [0, 0])
    for label in labels:
        votes[label.key][0 if label.oriented_label > 0 else 1] += 1
    return {key: (up, down) for key, (up, down) in votes.items()}


@dataclass
class ConsensusReport:
    pairs: Dict[PairKey, float] = field(default_factory=dict)
    # votes -> (mean consensus, pairs)
    by_votes: Dict[int, Tuple[float, int]] = field(default_factory=dict)

    def mean(self, votes: int) -> Optional[float]:
        entry = self.by_votes.get(votes)
        return entry[0] if entry else None


def consensus(labels: Iterable[PairLabel], min_votes: int = 2) -> ConsensusReport:
    """Majority fraction max(up, down) / total for every pair with at least ``min_votes`` votes."""
    report = ConsensusReport()
    grouped: Dict[int, List[float]] = defaultdict(list)
    for key, (up, down) in sorted(tally_votes(labels).items()):
        total = up + down
        if total < min_votes:
            continue
        value = max(up, down) / total
        report.pairs[key] = value
        grouped[total].append(value)

    report.by_votes = {
        total: (float(np.mean(values)), len(values)) for total, values in sorted(grouped.items())
    }
    return report


@dataclass
class ConnectivityConsensus:
    # log10 bucket of |C_u1 - C_u2| -> (mean consensus, pairs)
    curve: Dict[int, Tuple[float, int]] = field(default_factory=dict)
    excluded_pairs: int = 0
    excluded_users: int = 0


def consensus_by_connectivity_delta(
    labels: Iterable[PairLabel], connectivities: Mapping[str, float], min_votes: int = 2
) -> ConnectivityConsensus:
    report = consensus(labels, min_votes=min_votes)
    result = ConnectivityConsensus()
    missing = set()
    grouped: Dict[int, List[float]] = defaultdict(list)

    for (u1, u2, _), value in report.pairs.items():
        absent = [u for u in (u1, u2) if u not in connectivities]
        if absent:
            missing.update(absent)
            result.excluded_pairs += 1
            continue
        bucket = log10_bucket(abs(connectivities[u1] - connectivities[u2]))
        grouped[bucket].append(value)

    result.curve = {b: (float(np.mean(v)), len(v)) for b, v in sorted(grouped.items())}
    result.excluded_users = len(missing)
    if missing:
        logger.info("Excluded %d pairs with %d users lacking connectivity", result.excluded_pairs, len(missing))
    return result


def dedupe_labels(labels: Iterable[PairLabel]) -> List[PairLabel]:
    """One majority label per unordered (pair, topic); ties are dropped."""
    deduped = []
    ties = 0
    for (u1, u2, topic), (up, down) in sorted(tally_votes(labels).items()):
        if up == down:
            ties += 1
            continue
        deduped.append(PairLabel(u1, u2, topic, 1 if up > down else -1, "majority"))
    if ties:
        logger.info("Dropped %d tied pairs while deduplicating labels", ties)
    return deduped


def in_training_split(key: PairKey, fraction: float, seed: int) -> bool:
    return stable_hash("split", seed, *key) / 2**64 < fraction


def split_labels(
    labels: Iterable[PairLabel], fraction: Optional[float] = None, seed: Optional[int] = None
) -> Tuple[List[PairLabel], List[PairLabel]]:
    """Deterministic split over unordered (pair, topic) keys, so a pair never straddles it."""
    if fraction is None:
        fraction = getattr(settings, "TOPIC_EXPERTS_TRAIN_FRACTION", 0.8)
    if seed is None:
        seed = getattr(settings, "TOPIC_EXPERTS_SPLIT_SEED", 0)
    train, test = [], []
    for label in labels:
        (train if in_training_split(label.key, fraction, seed) else test).append(label)
    return train, test


def write_consensus_reports(directory, labels: List[PairLabel], connectivities: Mapping[str, float]) -> None:
    by_votes = consensus(labels).by_votes
    write_tsv(
        os.path.join(directory, "consensus_by_votes.tsv"),
        ((votes, repr(mean), count) for votes, (mean, count) in by_votes.items()),
        header=("votes", "mean_consensus", "pairs"),
    )
    by_delta = consensus_by_connectivity_delta(labels, connectivities)
    write_tsv(
        os.path.join(directory, "consensus_by_connectivity_delta.tsv"),
        ((bucket, repr(mean), count) for bucket, (mean, count) in by_delta.curve.items()),
        header=("log10_delta_bucket", "mean_consensus", "pairs"),
    )
