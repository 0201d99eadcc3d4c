"""
The registry of the 37 expertise features.

Each feature is a (network, source, attribution) triple and renders as
``<NETWORK>_<SOURCE>_<ATTRIBUTION>``. The order of ``data/catalog.tsv`` is the
slot order of every feature vector, delta and weight vector in the package.
"""
import hashlib
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

from topic_experts.exceptions import CatalogError

CATALOG_PATH = Path(__file__).resolve().parent / "data" / "catalog.tsv"


class Network(str, Enum):
    TW = "TW"
    FB = "FB"
    FB_PAGE = "FB_PAGE"
    GP = "GP"
    LI = "LI"
    WIKI = "WIKI"


class Source(str, Enum):
    MSG_TEXT = "MSG_TEXT"
    PAGE_TEXT = "PAGE_TEXT"
    HASHTAG = "HASHTAG"
    LIST = "LIST"
    SKILLS = "SKILLS"
    INDUSTRY = "INDUSTRY"
    FOLLOWERS = "FOLLOWERS"
    FOLLOWING = "FOLLOWING"
    FRIENDS = "FRIENDS"
    URL = "URL"
    URL_META = "URL_META"
    SOCIAL_WWW = "SOCIAL_WWW"
    WIKI_INOUT = "WIKI_INOUT"


class Attribution(str, Enum):
    GENERATED = "GENERATED"
    REACTED = "REACTED"
    CREDITED = "CREDITED"
    GRAPH = "GRAPH"


# Sources a user's own topic strength is built from (graph features).
TEXT_SOURCES = frozenset({Source.MSG_TEXT, Source.PAGE_TEXT, Source.HASHTAG})


@dataclass(frozen=True, order=True)
class FeatureId:
    network: Network
    source: Source
    attribution: Attribution

    @property
    def name(self) -> str:
        return f"{self.network.value}_{self.source.value}_{self.attribution.value}"

    def __str__(self):
        return self.name


class FeatureCatalog:
    def __init__(self, features: Iterable[FeatureId]):
        self.features: Tuple[FeatureId, ...] = tuple(features)
        self._slots: Dict[FeatureId, int] = {}
        self._by_name: Dict[str, FeatureId] = {}
        for slot, feature in enumerate(self.features):
            if feature in self._slots:
                raise CatalogError(f"Duplicate catalog entry {feature.name}")
            self._slots[feature] = slot
            self._by_name[feature.name] = feature

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __contains__(self, feature):
        return feature in self._slots

    def slot(self, feature: FeatureId) -> int:
        try:
            return self._slots[feature]
        except KeyError:
            raise CatalogError(f"{feature} is not a registered feature") from None

    def by_name(self, name: str) -> FeatureId:
        try:
            return self._by_name[name]
        except KeyError:
            raise CatalogError(f"Unknown feature name '{name}'") from None

    def lookup(self, network, source, attribution) -> Optional[FeatureId]:
        """Return the registered feature for the triple, or None when it is not in the catalog."""
        try:
            feature = FeatureId(Network(network), Source(source), Attribution(attribution))
        except ValueError:
            return None
        return feature if feature in self._slots else None

    @property
    def networks(self) -> Tuple[Network, ...]:
        seen = dict.fromkeys(f.network for f in self.features)
        return tuple(seen)

    def slots_for(self, network: Network) -> Tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.features) if f.network == network)

    def digest(self) -> str:
        return hashlib.sha1("|".join(f.name for f in self.features).encode()).hexdigest()


def load_catalog(path=CATALOG_PATH) -> FeatureCatalog:
    features = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CatalogError(f"{path}:{line_no}: expected 3 fields, got {len(parts)}")
            try:
                features.append(FeatureId(Network(parts[0]), Source(parts[1]), Attribution(parts[2])))
            except ValueError as exc:
                raise CatalogError(f"{path}:{line_no}: {exc}") from exc
    return FeatureCatalog(features)


@lru_cache(maxsize=None)
def get_catalog() -> FeatureCatalog:
    return load_catalog()
