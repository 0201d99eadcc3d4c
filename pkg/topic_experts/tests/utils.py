import json
import os
import shutil
import tempfile

from django.test import SimpleTestCase, override_settings

from topic_experts.catalog import Attribution, FeatureId, Network, Source
from topic_experts.groundtruth import PairLabel
from topic_experts.ingest import EventKind, EventRecord, MessagePayload
from topic_experts.model import ExpertiseScore
from topic_experts.ontology import Level, TopicNode, TopicOntology, build_dictionary
from topic_experts.rank import build_index
from topic_experts.snapshot import set_index

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")
SCHEMA_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "schemas")

MINI_ONTOLOGY = """# counts: super=2 sub=2 entity=2
lifestyle\tlifestyle\tLifestyle\tsuper\t-
food\tfood\tFood\tsub\tlifestyle
sushi\tsushi\tSushi\tentity\tfood
technology\ttechnology\tTechnology\tsuper\t-
ml\tmachine-learning\tMachine Learning\tsub\ttechnology
python\tpython\tPython\tentity\tml
"""

MINI_DICTIONARY = """# phrase\ttopic
food\tfood
sushi\tsushi
machine learning\tml
python\tpython
python\tml\t0.5
gadgets\ttechnology
"""

TW_MSG = FeatureId(Network.TW, Source.MSG_TEXT, Attribution.GENERATED)
TW_HASHTAG = FeatureId(Network.TW, Source.HASHTAG, Attribution.GENERATED)
TW_LIST = FeatureId(Network.TW, Source.LIST, Attribution.CREDITED)
TW_FOLLOWERS = FeatureId(Network.TW, Source.FOLLOWERS, Attribution.GRAPH)
FB_MSG = FeatureId(Network.FB, Source.MSG_TEXT, Attribution.GENERATED)
LI_SKILLS = FeatureId(Network.LI, Source.SKILLS, Attribution.GENERATED)
LI_INDUSTRY = FeatureId(Network.LI, Source.INDUSTRY, Attribution.GENERATED)
WIKI = FeatureId(Network.WIKI, Source.WIKI_INOUT, Attribution.CREDITED)


def write_text(path, content):
    path = str(path)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)
    return path


def mini_ontology():
    nodes = [
        TopicNode("lifestyle", "lifestyle", "Lifestyle", Level.SUPER),
        TopicNode("food", "food", "Food", Level.SUB, "lifestyle"),
        TopicNode("sushi", "sushi", "Sushi", Level.ENTITY, "food"),
        TopicNode("technology", "technology", "Technology", Level.SUPER),
        TopicNode("ml", "machine-learning", "Machine Learning", Level.SUB, "technology"),
        TopicNode("python", "python", "Python", Level.ENTITY, "ml"),
    ]
    return TopicOntology(nodes={node.id: node for node in nodes})


def mini_dictionary():
    return build_dictionary(
        {
            "food": {"food": 1.0},
            "sushi": {"sushi": 1.0},
            "machine learning": {"ml": 1.0},
            "python": {"python": 1.0, "ml": 0.5},
            "gadgets": {"technology": 1.0},
        }
    )


def message(subject, text, network=Network.TW, attribution=Attribution.GENERATED, source=Source.MSG_TEXT, ts=1000):
    return EventRecord(EventKind.MESSAGE, network, attribution, subject, MessagePayload(text, source), ts)


def event_line(kind, network, attribution, subject, payload, ts=1000):
    return json.dumps(
        {
            "kind": kind,
            "network": network,
            "attribution": attribution,
            "subject": subject,
            "ts": ts,
            "payload": payload,
        }
    )


def labels_from(triples, topic="t"):
    return [PairLabel(u1, u2, topic, label) for u1, u2, label in triples]


def news_ontology():
    nodes = [
        TopicNode("t-news", "news", "News", Level.SUPER),
        TopicNode("t-politics", "politics", "Politics", Level.SUB, "t-news"),
        TopicNode("t-journalism", "journalism", "Journalism", Level.SUB, "t-news"),
    ]
    return TopicOntology(nodes={node.id: node for node in nodes})


PLANTED_HANDLES = {"u1": "BarackObama", "u2": "washingtonpost", "u3": "nytimes", "u4": "nobody"}

PLANTED_SCORES = [
    ExpertiseScore("u1", "t-politics", 0.9),
    ExpertiseScore("u2", "t-politics", 0.5),
    ExpertiseScore("u3", "t-politics", 0.2),
    ExpertiseScore("u2", "t-journalism", 0.8),
    ExpertiseScore("u3", "t-journalism", 0.3),
    ExpertiseScore("u4", "t-journalism", 0.0),
]


def planted_index():
    """politics: BarackObama > washingtonpost > nytimes; journalism: washingtonpost > nytimes."""
    return build_index(PLANTED_SCORES, news_ontology(), PLANTED_HANDLES)


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def read_golden(name) -> str:
    with open(os.path.join(GOLDEN_DIR, name), "r", encoding="utf-8") as fh:
        return fh.read().strip()


def read_schema(name) -> dict:
    with open(os.path.join(SCHEMA_DIR, name), "r", encoding="utf-8") as fh:
        return json.load(fh)


class IndexTestCase(SimpleTestCase):
    """Serves the planted index from a temporary directory."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.temp_dir = tempfile.mkdtemp()
        cls.index_dir = os.path.join(cls.temp_dir, "index")
        planted_index().write(cls.index_dir)
        cls.settings_override = override_settings(TOPIC_EXPERTS_INDEX_DIR=cls.index_dir)
        cls.settings_override.enable()

    @classmethod
    def tearDownClass(cls):
        cls.settings_override.disable()
        shutil.rmtree(cls.temp_dir, ignore_errors=True)
        super().tearDownClass()

    def setUp(self):
        super().setUp()
        set_index(None)

    def tearDown(self):
        set_index(None)
        super().tearDown()
