"""
Two-step expertise model.

Step one fits a non-negative model per network on the feature deltas of that
network's slots. Step two treats the per-network score deltas as features and
fits one global weight per network. The final weight of feature k is its
network weight times the global weight of its network, and an expertise
score is the dot product of the final weights with a normalised feature
vector.
"""
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from topic_experts.catalog import FeatureCatalog, Network, get_catalog
from topic_experts.exceptions import CatalogError, NNLSConvergenceError
from topic_experts.features import FeatureStore
from topic_experts.groundtruth import PairLabel
from topic_experts.nnls import solve
from topic_experts.normalize import DeltaBuilder
from topic_experts.utils import (
    ensure_dir,
    format_float,
    map_partitions,
    read_tsv,
    split_partitions,
    stable_hash,
    write_tsv,
)

logger = logging.getLogger(__name__)


@dataclass
class NetworkModel:
    network: Network
    slots: Tuple[int, ...]
    weights: np.ndarray
    rows: int = 0
    residual: float = 0.0
    empty: bool = False

    def score_delta(self, delta: np.ndarray) -> float:
        return float(self.weights @ delta[list(self.slots)])


@dataclass
class GlobalModel:
    networks: Tuple[Network, ...]
    weights: np.ndarray
    rows: int = 0
    residual: float = 0.0
    empty: bool = False
    # divisor applied to each network's score column
    scales: Optional[np.ndarray] = None

    def weight(self, network: Network) -> float:
        return float(self.weights[self.networks.index(network)])


@dataclass
class ExpertiseModel:
    catalog: FeatureCatalog
    weights: np.ndarray
    global_weights: Dict[Network, float]
    network_models: Dict[Network, NetworkModel] = field(default_factory=dict)
    seed: int = 0
    date: str = ""

    def network_weights(self, network: Network) -> np.ndarray:
        """The final weight vector with every slot outside ``network`` zeroed."""
        restricted = np.zeros_like(self.weights)
        slots = list(self.catalog.slots_for(network))
        restricted[slots] = self.weights[slots]
        return restricted

    def write(self, path) -> None:
        ensure_dir(os.path.dirname(str(path)))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# catalog={self.catalog.digest()} seed={self.seed} date={self.date}\n")
            for feature, weight in zip(self.catalog, self.weights):
                fh.write(f"{feature.name}\t{format_float(weight)}\n")
            for network in self.catalog.networks:
                fh.write(f"{network.value}\t{format_float(self.global_weights.get(network, 0.0))}\n")

    @classmethod
    def read(cls, path, catalog: Optional[FeatureCatalog] = None) -> "ExpertiseModel":
        catalog = catalog or get_catalog()
        header = {}
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
        if first.startswith("#"):
            header = dict(part.split("=", 1) for part in first[1:].split() if "=" in part)
        if header.get("catalog") not in (None, catalog.digest()):
            raise CatalogError(f"{path} was trained against a different feature catalog")

        networks = {n.value: n for n in catalog.networks}
        weights = np.zeros(len(catalog))
        global_weights: Dict[Network, float] = {}
        for name, value in read_tsv(path, expected=2):
            if name in networks:
                global_weights[networks[name]] = float(value)
            else:
                weights[catalog.slot(catalog.by_name(name))] = float(value)
        return cls(
            catalog=catalog,
            weights=weights,
            global_weights=global_weights,
            seed=int(header.get("seed", 0) or 0),
            date=header.get("date", ""),
        )


def _fit(A: np.ndarray, b: np.ndarray, tol):
    if not len(A):
        return np.zeros(A.shape[1]), 0.0, True
    try:
        solution = solve(A, b, tol=tol)
    except NNLSConvergenceError as exc:
        logger.warning("%s; keeping the best iterate", exc)
        return np.maximum(exc.best, 0.0), float(exc.residual), False
    return solution.weights, solution.residual, False


def _nonzero_rows(columns: np.ndarray, labels: Sequence[PairLabel]) -> Tuple[np.ndarray, np.ndarray]:
    keep = columns.any(axis=1)
    targets = np.array([label.label for label in labels], dtype=float)
    return columns[keep], targets[keep]


def train_network_model(
    network: Network,
    labels: Iterable[PairLabel],
    norm: FeatureStore,
    tol: Optional[float] = None,
    builder: Optional[DeltaBuilder] = None,
) -> NetworkModel:
    """NNLS over the labels whose delta is non-zero on the network's slots."""
    labels = list(labels)
    builder = builder or DeltaBuilder(norm)
    slots = norm.catalog.slots_for(network)
    A, b = _nonzero_rows(builder.matrix(labels)[:, list(slots)], labels)

    weights, residual, empty = _fit(A, b, tol)
    if empty:
        logger.warning("No usable training rows for network %s; its model is all zero", network.value)
    return NetworkModel(network, slots, weights, rows=len(A), residual=residual, empty=empty)


def fold_of(label: PairLabel, folds: int, seed: int = 0) -> int:
    """Both orientations of a pair land in the same fold."""
    return stable_hash("fold", seed, *label.key) % folds


def out_of_fold_scores(
    labels: Sequence[PairLabel],
    models: Sequence[NetworkModel],
    norm: FeatureStore,
    folds: int,
    tol: Optional[float] = None,
    builder: Optional[DeltaBuilder] = None,
    seed: int = 0,
) -> np.ndarray:
    """
    Score deltas per network, one column per model, where each label is
    scored by a network model fit on the other folds only.
    """
    labels = list(labels)
    builder = builder or DeltaBuilder(norm)
    deltas = builder.matrix(labels)
    assignment = np.array([fold_of(label, folds, seed) for label in labels], dtype=np.int64)
    scores = np.zeros((len(labels), len(models)))
    for fold in range(folds):
        held = assignment == fold
        if not held.any():
            continue
        rest = [label for label, f in zip(labels, assignment) if f != fold]
        for j, model in enumerate(models):
            fitted = train_network_model(model.network, rest, norm, tol=tol, builder=builder)
            scores[held, j] = deltas[held][:, list(fitted.slots)] @ fitted.weights
    return scores


def train_global_model(
    labels: Iterable[PairLabel],
    models: Sequence[NetworkModel],
    norm: FeatureStore,
    tol: Optional[float] = None,
    builder: Optional[DeltaBuilder] = None,
    folds: Optional[int] = None,
    seed: int = 0,
) -> GlobalModel:
    """
    NNLS over per-network score deltas, one column per network model.

    With ``folds`` >= 2 the columns are out-of-fold score deltas divided by
    their RMS, and ``scales`` records each divisor. Otherwise the columns are
    the models' own score deltas and every scale is 1.
    """
    labels = list(labels)
    networks = tuple(m.network for m in models)
    if not models:
        logger.warning("No network models to combine; global weights are empty")
        return GlobalModel(networks, np.zeros(0), empty=True)

    builder = builder or DeltaBuilder(norm)
    if folds and folds >= 2:
        columns = out_of_fold_scores(labels, models, norm, folds, tol=tol, builder=builder, seed=seed)
        scales = np.sqrt(np.mean(columns**2, axis=0)) if labels else np.zeros(len(models))
        columns = np.divide(columns, scales, out=np.zeros_like(columns), where=scales > 0)
    else:
        deltas = builder.matrix(labels)
        columns = np.column_stack([deltas[:, list(m.slots)] @ m.weights for m in models])
        scales = np.ones(len(models))
    A, b = _nonzero_rows(columns, labels)

    weights, residual, empty = _fit(A, b, tol)
    if empty:
        logger.warning("No usable rows for the global model; all global weights are zero")
    return GlobalModel(networks, weights, rows=len(A), residual=residual, empty=empty, scales=scales)


def finalize_weights(
    models: Sequence[NetworkModel], g, catalog: Optional[FeatureCatalog] = None, seed: int = 0, date: str = ""
) -> ExpertiseModel:
    """w_k = netweight_k * g_network(k), in catalog order."""
    catalog = catalog or get_catalog()
    if isinstance(g, GlobalModel):
        g = {network: g.weight(network) for network in g.networks}
    elif not isinstance(g, Mapping):
        g = {m.network: float(value) for m, value in zip(models, g)}

    weights = np.zeros(len(catalog))
    for model in models:
        weights[list(model.slots)] = model.weights * g.get(model.network, 0.0)
    return ExpertiseModel(
        catalog=catalog,
        weights=weights,
        global_weights={network: float(g.get(network, 0.0)) for network in catalog.networks},
        network_models={m.network: m for m in models},
        seed=seed,
        date=date,
    )


def train_model(
    labels: Sequence[PairLabel],
    norm: FeatureStore,
    tol: Optional[float] = None,
    seed: int = 0,
    date: str = "",
    folds: Optional[int] = None,
) -> ExpertiseModel:
    """
    Network models are fit on every label; the global weights are fit on
    out-of-fold network scores. Each network model is then divided by its
    column scale, so a global weight reads the same whatever the scale of
    its network's features.
    """
    labels = list(labels)
    if folds is None:
        folds = getattr(settings, "TOPIC_EXPERTS_STACK_FOLDS", 5)
    builder = DeltaBuilder(norm)
    models = [
        train_network_model(network, labels, norm, tol=tol, builder=builder) for network in norm.catalog.networks
    ]
    global_model = train_global_model(labels, models, norm, tol=tol, builder=builder, folds=folds, seed=seed)
    models = [
        replace(m, weights=m.weights / scale) if scale > 0 else m for m, scale in zip(models, global_model.scales)
    ]
    model = finalize_weights(models, global_model, norm.catalog, seed=seed, date=date)
    logger.info(
        "Trained on %d labels with %d folds; global weights %s",
        len(labels),
        folds,
        ", ".join(f"{n.value}={w:.4g}" for n, w in model.global_weights.items()),
    )
    return model


def score(user: str, topic: str, model: ExpertiseModel, norm: FeatureStore) -> float:
    """E(u, t) = w . f(u, t); absent features read as 0."""
    return float(model.weights @ norm.vector(user, topic))


@dataclass(frozen=True)
class ExpertiseScore:
    user: str
    topic: str
    score: float
    # One score per network, final weights restricted to that network.
    by_network: Tuple[float, ...] = ()


def score_store(model: ExpertiseModel, norm: FeatureStore, partitions: Optional[int] = None) -> List[ExpertiseScore]:
    partitions = partitions or getattr(settings, "TOPIC_EXPERTS_PARTITIONS", 8)
    restricted = np.vstack([model.network_weights(n) for n in model.catalog.networks])
    by_user: Dict[str, List[str]] = {}
    for user, topic in norm.pairs():
        by_user.setdefault(user, []).append(topic)

    def score_partition(users):
        scores = []
        for user in users:
            for topic in by_user[user]:
                vector = norm.vector(user, topic)
                scores.append(
                    ExpertiseScore(
                        user,
                        topic,
                        float(model.weights @ vector),
                        tuple(float(v) for v in restricted @ vector),
                    )
                )
        return scores

    parts = map_partitions(split_partitions(by_user.keys(), partitions), score_partition)
    return sorted((s for part in parts for s in part), key=lambda s: (s.user, s.topic))


def write_scores(path, scores: Iterable[ExpertiseScore], networks: Sequence[Network]) -> None:
    rows = (
        (s.user, s.topic, format_float(s.score), *(format_float(v) for v in s.by_network)) for s in scores
    )
    write_tsv(path, rows, header=("user", "topic", "score", *(n.value for n in networks)))


def read_scores(path) -> Tuple[List[ExpertiseScore], Tuple[Network, ...]]:
    networks: Tuple[Network, ...] = ()
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().lstrip("#").rstrip("\n").split("\t")
    if header[:3] == ["user", "topic", "score"]:
        networks = tuple(Network(name) for name in header[3:])
    scores = [
        ExpertiseScore(user, topic, float(value), tuple(float(v) for v in rest))
        for user, topic, value, *rest in read_tsv(path, expected=3)
    ]
    return scores, networks
