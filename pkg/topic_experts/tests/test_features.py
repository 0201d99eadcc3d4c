import pytest

from topic_experts.catalog import Attribution, FeatureCatalog, FeatureId, Network, Source
from topic_experts.exceptions import CatalogError
from topic_experts.features import (
    ExtractionStats,
    FeatureStore,
    ListStats,
    connectivity,
    count_in_degrees,
    estimate_list_feature,
    extract_features,
    extract_graph_feature,
    extract_profile_features,
    extract_shared_doc_features,
    extract_socialwww_feature,
    extract_text_features,
    extract_wiki_feature,
    merge_connectivity,
    topic_strengths,
)
from topic_experts.ingest import (
    EdgeSet,
    EventKind,
    EventRecord,
    GraphEdgePayload,
    ListPayload,
    ListRole,
    ProfileFieldPayload,
    SharedDocPayload,
    WikiPagePayload,
)
from topic_experts.ontology import build_dictionary
from topic_experts.tests.utils import (
    FB_MSG,
    LI_INDUSTRY,
    LI_SKILLS,
    TW_FOLLOWERS,
    TW_HASHTAG,
    TW_LIST,
    TW_MSG,
    WIKI,
    message,
    mini_dictionary,
    mini_ontology,
)


def edge(subject, actor, network=Network.TW, edge_set=EdgeSet.FOLLOWERS):
    return EventRecord(EventKind.GRAPH_EDGE, network, Attribution.GRAPH, subject, GraphEdgePayload(actor, edge_set), 1)


def membership(subject, name, total=None):
    return EventRecord(
        EventKind.LIST, Network.TW, Attribution.CREDITED, subject, ListPayload(name, ListRole.MEMBER, total), 1
    )


def test_estimate_list_feature():
    stats = ListStats(collected_topic_lists={"food": 2}, collected_total=4, profile_total=10)
    assert estimate_list_feature(stats, "food") == 5.0
    assert estimate_list_feature(stats, "sushi") == 0.0
    assert estimate_list_feature(ListStats(), "food") == 0.0


def test_socialwww_feature():
    docs = [
        SharedDocPayload("d1", "sushi and more sushi", 2),
        SharedDocPayload("d2", "sushi", 2),
        SharedDocPayload("d3", "sushi", 0),
    ]
    assert extract_socialwww_feature(docs, mini_ontology(), mini_dictionary()) == {"sushi": 6.0}


def shared_doc(subject, text, reactions, attribution=Attribution.GENERATED):
    return EventRecord(
        EventKind.SHARED_DOC, Network.TW, attribution, subject, SharedDocPayload(text, text, reactions), 1
    )


def test_shared_docs_are_summed_per_feature():
    generated = FeatureId(Network.TW, Source.SOCIAL_WWW, Attribution.GENERATED)
    reacted = FeatureId(Network.TW, Source.SOCIAL_WWW, Attribution.REACTED)
    store = FeatureStore(FeatureCatalog([generated, reacted]))
    events = [
        shared_doc("u1", "sushi", 3, Attribution.REACTED),
        shared_doc("u1", "sushi", 2),
        shared_doc("u1", "food", 4, Attribution.REACTED),
    ]
    extract_shared_doc_features("u1", events, mini_ontology(), mini_dictionary(), store)
    assert store.get("u1", "sushi", generated) == 2.0
    assert store.get("u1", "sushi", reacted) == 3.0
    assert store.get("u1", "food", reacted) == 4.0
    assert store.get("u1", "food", generated) == 0.0


def test_wiki_feature():
    page = WikiPagePayload("python and python and python", inlinks=3, outlinks=10)
    values = extract_wiki_feature(page, mini_ontology(), mini_dictionary())
    assert values["python"] == pytest.approx(0.9)
    assert values["ml"] == pytest.approx(0.45)


def test_wiki_feature_clamps_outlinks():
    page = WikiPagePayload("sushi", inlinks=4, outlinks=0)
    assert extract_wiki_feature(page, mini_ontology(), mini_dictionary()) == {"sushi": 4.0}


def test_connectivity_is_euclidean_norm():
    assert connectivity({"TW_FOLLOWERS": 3, "FB_FRIENDS": 4}) == 5.0
    assert connectivity({}) == 0.0


def test_count_in_degrees_dedupes_edges():
    events = [
        edge("u1", "u2"),
        edge("u1", "u2"),
        edge("u1", "u3"),
        edge("u1", "u4", Network.FB, EdgeSet.FRIENDS),
        edge("u1", "u5", edge_set=EdgeSet.FOLLOWING),
    ]
    assert count_in_degrees(events) == {"u1": {"TW_FOLLOWERS": 2, "FB_FRIENDS": 1}}


def test_declared_connectivity_overrides_counted():
    merged = merge_connectivity({"u1": {"TW_FOLLOWERS": 2}}, {"u1": {"TW_FOLLOWERS": 900}, "u2": {"FB_FRIENDS": 3}})
    assert merged == {"u1": {"TW_FOLLOWERS": 900}, "u2": {"FB_FRIENDS": 3}}


def test_store_keeps_positive_values_only():
    store = FeatureStore()
    store.add("u1", "food", TW_MSG, 0.0)
    store.add("u1", "food", TW_MSG, 2.0)
    store.add("u1", "food", TW_MSG, 1.0)
    assert len(store) == 1
    assert store.get("u1", "food", TW_MSG) == 3.0
    assert store.get("u1", "sushi", TW_MSG) == 0.0
    store.set("u1", "food", TW_MSG, 0.0)
    assert len(store) == 0
    with pytest.raises(CatalogError):
        store.add("u1", "food", FeatureId(Network.LI, Source.MSG_TEXT, Attribution.GENERATED), 1.0)


def test_store_write_read(tmp_path):
    store = FeatureStore(normalized=True)
    store.add("u2", "food", FB_MSG, 0.25)
    store.add("u1", "food", TW_MSG, 1.0 / 3.0)
    store.write(tmp_path / "features.tsv")
    loaded = FeatureStore.read(tmp_path / "features.tsv")
    assert loaded.normalized
    assert list(loaded.items()) == list(store.items())


def test_extract_features_end_to_end():
    events = [
        message("u1", "sushi sushi food"),
        message("u1", "#Sushi", source=Source.HASHTAG),
        message("u2", "machine learning", network=Network.FB),
        membership("u1", "food lovers", total=10),
        membership("u1", "random"),
        EventRecord(
            EventKind.PROFILE_FIELD, Network.LI, Attribution.GENERATED, "u3", ProfileFieldPayload(Source.SKILLS, "python"), 1
        ),
        EventRecord(
            EventKind.PROFILE_FIELD,
            Network.LI,
            Attribution.GENERATED,
            "u3",
            ProfileFieldPayload(Source.INDUSTRY, "food", company_followers=50, industry_followers=200),
            1,
        ),
        EventRecord(EventKind.WIKI_PAGE, Network.WIKI, Attribution.CREDITED, "u2", WikiPagePayload("sushi", 2, 1), 1),
        edge("u3", "u1"),
        edge("u3", "u2"),
    ]
    store = extract_features(events, mini_ontology(), mini_dictionary(), partitions=3)

    assert store.get("u1", "sushi", TW_MSG) == 2.0
    assert store.get("u1", "food", TW_MSG) == 1.0
    assert store.get("u1", "sushi", TW_HASHTAG) == 1.0
    assert store.get("u2", "ml", FB_MSG) == 1.0
    # one of two collected lists matches, profile declares 10
    assert store.get("u1", "food", TW_LIST) == 5.0
    assert store.get("u3", "python", LI_SKILLS) == 1.0
    assert store.get("u3", "ml", LI_SKILLS) == 1.0
    assert store.get("u3", "food", LI_INDUSTRY) == 0.25
    assert store.get("u2", "sushi", WIKI) == 2.0
    # u1 holds all generated sushi text, so u3's follower feature is 1
    assert store.get("u3", "sushi", TW_FOLLOWERS) == 1.0
    assert store.get("u3", "ml", TW_FOLLOWERS) == 1.0
    assert store.get("u1", "sushi", TW_FOLLOWERS) == 0.0


def test_extraction_is_partition_independent(settings):
    events = [message(f"u{i}", "sushi food python " * (i % 3 + 1)) for i in range(20)]
    events += [edge(f"u{i}", f"u{(i * 7) % 20}") for i in range(20) if i != (i * 7) % 20]
    settings.TOPIC_EXPERTS_PARALLEL = False
    serial = extract_features(events, mini_ontology(), mini_dictionary(), partitions=1)
    settings.TOPIC_EXPERTS_PARALLEL = True
    parallel = extract_features(events, mini_ontology(), mini_dictionary(), partitions=5)
    assert list(serial.items()) == list(parallel.items())


def weighted_dictionary():
    return build_dictionary({"alpha": {"food": 0.5}, "beta": {"food": 0.2}, "gamma": {"food": 0.3}})


def test_socialwww_feature_with_fractional_frequencies():
    docs = [SharedDocPayload("d1", "alpha", 10), SharedDocPayload("d2", "beta", 5)]
    values = extract_socialwww_feature(docs, mini_ontology(), weighted_dictionary())
    assert values["food"] == pytest.approx(6.0, abs=1e-12)


def test_wiki_feature_with_fractional_frequency():
    values = extract_wiki_feature(WikiPagePayload("gamma", 60, 20), mini_ontology(), weighted_dictionary())
    assert values["food"] == pytest.approx(0.9, abs=1e-12)
    values = extract_wiki_feature(WikiPagePayload("sushi", 5, 0), mini_ontology(), mini_dictionary())
    assert values == {"sushi": 5.0}
    assert extract_wiki_feature(WikiPagePayload("nothing here", 5, 1), mini_ontology(), mini_dictionary()) == {}


def test_text_features_by_source_and_attribution():
    events = [
        message("u1", "sushi and python"),
        message("u1", "#MachineLearning #Sushi", source=Source.HASHTAG),
        message("u2", "more sushi", attribution=Attribution.REACTED),
        message("u3", "nothing topical"),
        message("u3", "sushi", network=Network.GP, attribution=Attribution.CREDITED),
        edge("u1", "u2"),
    ]
    stats = ExtractionStats()
    store = extract_text_features(events, mini_ontology(), mini_dictionary(), stats=stats)

    assert store.get("u1", "sushi", TW_MSG) == 1.0
    assert store.get("u1", "python", TW_MSG) == 1.0
    assert store.get("u1", "ml", TW_MSG) == 0.5
    assert store.get("u1", "ml", TW_HASHTAG) == 1.0
    assert store.get("u1", "sushi", TW_HASHTAG) == 1.0
    # the reacted text counts for its author
    assert store.get("u2", "sushi", FeatureId(Network.TW, Source.MSG_TEXT, Attribution.REACTED)) == 1.0
    assert store.users() == ["u1", "u2"]
    assert stats.unmatched_texts == 1
    assert stats.skipped_triples == 1


def test_graph_feature_scales_by_global_strength():
    text = FeatureStore()
    text.add("a", "sushi", TW_MSG, 2.0)
    text.add("b", "sushi", FB_MSG, 1.0)
    text.add("b", "python", TW_MSG, 1.0)
    text.add("c", "sushi", TW_LIST, 9.0)
    strengths = topic_strengths(text)
    assert strengths.global_total == {"sushi": 3.0, "python": 1.0}

    edges = [
        edge("u", "a"),
        edge("u", "a"),
        edge("u", "b"),
        edge("u", "c"),
        edge("v", "a"),
        edge("w", "b", network=Network.FB, edge_set=EdgeSet.FRIENDS),
        message("u", "sushi"),
    ]
    values = extract_graph_feature(edges, strengths)
    fb_friends = FeatureId(Network.FB, Source.FRIENDS, Attribution.GRAPH)

    assert values[("u", "sushi", TW_FOLLOWERS)] == 1.0
    assert values[("u", "python", TW_FOLLOWERS)] == 1.0
    assert values[("v", "sushi", TW_FOLLOWERS)] == pytest.approx(2 / 3)
    assert values[("w", "sushi", fb_friends)] == pytest.approx(1 / 3)
    assert values[("w", "python", fb_friends)] == 1.0
    assert len(values) == 5


def profile(subject, field, text, company=0.0, industry=0.0):
    return EventRecord(
        EventKind.PROFILE_FIELD,
        Network.LI,
        Attribution.GENERATED,
        subject,
        ProfileFieldPayload(field, text, company_followers=company, industry_followers=industry),
        1,
    )


def test_profile_features():
    events = [
        profile("u1", Source.SKILLS, "python and sushi"),
        profile("u1", Source.INDUSTRY, "food", company=50, industry=200),
        profile("u2", Source.INDUSTRY, "food", company=50),
        message("u2", "food"),
    ]
    stats = ExtractionStats()
    store = extract_profile_features(events, mini_ontology(), mini_dictionary(), stats=stats)

    # skills are binary, whatever the phrase weight
    assert store.get("u1", "python", LI_SKILLS) == 1.0
    assert store.get("u1", "ml", LI_SKILLS) == 1.0
    assert store.get("u1", "sushi", LI_SKILLS) == 1.0
    assert store.get("u1", "food", LI_INDUSTRY) == 0.25
    assert store.users() == ["u1"]
    assert stats.degenerate_profiles == 1
