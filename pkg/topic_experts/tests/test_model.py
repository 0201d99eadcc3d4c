import numpy as np
import pytest

from topic_experts.catalog import Network, get_catalog
from topic_experts.exceptions import CatalogError
from topic_experts.features import FeatureStore
from topic_experts.groundtruth import PairLabel
from topic_experts.model import (
    ExpertiseModel,
    ExpertiseScore,
    GlobalModel,
    NetworkModel,
    finalize_weights,
    fold_of,
    out_of_fold_scores,
    read_scores,
    score,
    score_store,
    train_global_model,
    train_model,
    train_network_model,
    write_scores,
)
from topic_experts.normalize import feature_delta
from topic_experts.tests.utils import FB_MSG, LI_SKILLS, TW_FOLLOWERS, TW_MSG, WIKI


def planted_store(rng, users=60, topic="t"):
    """TW_MSG carries the true order, FB_MSG is noise."""
    store = FeatureStore(normalized=True)
    truth = {}
    for i in range(users):
        user = f"u{i:03d}"
        truth[user] = rng.random()
        store.set(user, topic, TW_MSG, truth[user])
        store.set(user, topic, FB_MSG, rng.random())
    return store, truth


def labels_for(truth, rng, count, topic="t"):
    users = sorted(truth)
    labels = []
    while len(labels) < count:
        a, b = rng.choice(len(users), size=2, replace=False)
        u1, u2 = users[a], users[b]
        labels.append(PairLabel(u1, u2, topic, 1 if truth[u1] > truth[u2] else -1))
    return labels


def test_score_is_dot_product():
    catalog = get_catalog()
    norm = FeatureStore(normalized=True)
    norm.set("a", "t", TW_MSG, 0.5)
    norm.set("a", "t", WIKI, 1.0)
    weights = np.zeros(len(catalog))
    weights[catalog.slot(TW_MSG)] = 2.0
    weights[catalog.slot(WIKI)] = 0.25
    model = ExpertiseModel(catalog, weights, {})
    assert score("a", "t", model, norm) == 1.25
    assert score("nobody", "t", model, norm) == 0.0


def test_score_difference_agrees_with_delta_sign():
    # dyadic values and weights keep every sum exact, so ties are true zeros
    rng = np.random.default_rng(1)
    catalog = get_catalog()
    features = list(catalog)
    users = ("a", "b", "c", "d", "e")
    checked = ties = 0
    for _ in range(1000):
        norm = FeatureStore(normalized=True)
        for user in users:
            for feature in rng.choice(len(features), size=5, replace=False):
                norm.set(user, "t", features[int(feature)], int(rng.integers(0, 9)) / 8)
        weights = rng.integers(0, 5, size=len(catalog)) / 4 * (rng.random(len(catalog)) < 0.5)
        model = ExpertiseModel(catalog, weights, {})
        for i, u1 in enumerate(users):
            for u2 in users[i + 1 :]:
                difference = score(u1, "t", model, norm) - score(u2, "t", model, norm)
                dot = float(model.weights @ feature_delta(u1, u2, "t", norm))
                assert difference == dot
                assert np.sign(difference) == np.sign(dot)
                ties += difference == 0
                checked += 1
    assert checked == 10000
    assert ties > 0


def test_network_model_uses_only_rows_touching_the_network():
    norm = FeatureStore(normalized=True)
    norm.set("a", "t", TW_MSG, 1.0)
    norm.set("b", "t", TW_MSG, 0.5)
    norm.set("c", "t", LI_SKILLS, 1.0)
    labels = [PairLabel("a", "b", "t", 1), PairLabel("c", "d", "t", 1)]

    tw = train_network_model(Network.TW, labels, norm)
    assert tw.rows == 1
    assert not tw.empty
    assert tw.weights[list(tw.slots).index(get_catalog().slot(TW_MSG))] == pytest.approx(2.0)

    fb = train_network_model(Network.FB, labels, norm)
    assert fb.empty
    assert fb.rows == 0
    assert not fb.weights.any()
    assert len(fb.weights) == 8


def test_global_model_and_finalize():
    catalog = get_catalog()
    tw_slots = catalog.slots_for(Network.TW)
    tw_weights = np.zeros(len(tw_slots))
    tw_weights[0] = 1.0
    models = [
        NetworkModel(Network.TW, tw_slots, tw_weights),
        NetworkModel(Network.WIKI, catalog.slots_for(Network.WIKI), np.array([3.0])),
    ]
    norm = FeatureStore(normalized=True)
    norm.set("a", "t", TW_MSG, 0.5)
    norm.set("b", "t", WIKI, 0.5)
    labels = [PairLabel("a", "c", "t", 1), PairLabel("b", "c", "t", 1)]
    global_model = train_global_model(labels, models, norm)
    assert global_model.rows == 2
    assert global_model.weight(Network.TW) == pytest.approx(2.0)
    assert global_model.weight(Network.WIKI) == pytest.approx(2.0 / 3.0)

    model = finalize_weights(models, global_model)
    assert model.weights[catalog.slot(TW_MSG)] == pytest.approx(2.0)
    assert model.weights[catalog.slot(WIKI)] == pytest.approx(2.0)
    assert model.global_weights[Network.FB] == 0.0
    assert set(model.global_weights) == set(catalog.networks)
    assert (model.weights >= 0).all()


def test_finalize_accepts_sequence_and_mapping():
    catalog = get_catalog()
    models = [NetworkModel(Network.WIKI, catalog.slots_for(Network.WIKI), np.array([3.0]))]
    by_sequence = finalize_weights(models, [0.5])
    by_mapping = finalize_weights(models, {Network.WIKI: 0.5})
    by_global = finalize_weights(models, GlobalModel((Network.WIKI,), np.array([0.5])))
    for model in (by_sequence, by_mapping, by_global):
        assert model.weights[catalog.slot(WIKI)] == 1.5
        assert model.global_weights[Network.WIKI] == 0.5


def test_train_model_recovers_planted_order():
    rng = np.random.default_rng(4)
    norm, truth = planted_store(rng)
    model = train_model(labels_for(truth, rng, 600), norm)
    catalog = get_catalog()
    assert model.weights[catalog.slot(TW_MSG)] > 0
    assert (model.weights >= 0).all()
    assert model.global_weights[Network.TW] > 0

    held_out = labels_for(truth, np.random.default_rng(9), 300)
    correct = sum(
        1 for label in held_out if label.label * (score(label.u1, "t", model, norm) - score(label.u2, "t", model, norm)) > 0
    )
    assert correct / len(held_out) > 0.9


def test_train_model_without_labels_is_all_zero():
    model = train_model([], FeatureStore(normalized=True))
    assert not model.weights.any()
    assert set(model.global_weights.values()) == {0.0}


def test_noise_network_gets_no_global_weight():
    rng = np.random.default_rng(6)
    norm, truth = planted_store(rng, users=200)
    model = train_model(labels_for(truth, rng, 4000), norm)
    fb = model.network_models[Network.FB]
    assert fb.rows > 0
    assert not fb.empty
    assert model.global_weights[Network.FB] < 0.05
    assert model.global_weights[Network.TW] > 0


def test_final_weights_are_global_times_network_weights():
    rng = np.random.default_rng(4)
    norm, truth = planted_store(rng)
    model = train_model(labels_for(truth, rng, 600), norm)
    for network, network_model in model.network_models.items():
        np.testing.assert_allclose(
            model.weights[list(network_model.slots)], model.global_weights[network] * network_model.weights
        )


def test_fold_ignores_pair_orientation():
    labels = [PairLabel(f"a{i}", f"b{i}", "t", 1) for i in range(500)]
    folds = {fold_of(label, 5) for label in labels}
    assert folds == set(range(5))
    for label in labels:
        flipped = PairLabel(label.u2, label.u1, label.topic, -label.label)
        assert fold_of(flipped, 5) == fold_of(label, 5)
        assert fold_of(label, 5, seed=1) in folds


def test_out_of_fold_scores_come_from_the_other_folds():
    rng = np.random.default_rng(3)
    norm, truth = planted_store(rng, users=40)
    labels = labels_for(truth, rng, 200)
    models = [train_network_model(Network.TW, labels, norm)]
    scores = out_of_fold_scores(labels, models, norm, folds=4)
    assert scores.shape == (200, 1)
    for fold in range(4):
        rest = [label for label in labels if fold_of(label, 4) != fold]
        fitted = train_network_model(Network.TW, rest, norm)
        for i, label in enumerate(labels):
            if fold_of(label, 4) == fold:
                expected = fitted.score_delta(feature_delta(label.u1, label.u2, "t", norm))
                assert scores[i, 0] == pytest.approx(expected)


def test_stacked_global_model_records_column_scales():
    rng = np.random.default_rng(5)
    norm, truth = planted_store(rng, users=40)
    labels = labels_for(truth, rng, 200)
    models = [train_network_model(network, labels, norm) for network in (Network.TW, Network.WIKI)]

    raw = train_global_model(labels, models, norm)
    np.testing.assert_array_equal(raw.scales, [1.0, 1.0])

    stacked = train_global_model(labels, models, norm, folds=4)
    columns = out_of_fold_scores(labels, models, norm, folds=4)
    assert stacked.scales[0] == pytest.approx(np.sqrt(np.mean(columns[:, 0] ** 2)))
    assert stacked.scales[0] > 0
    # WIKI has no features in the store, so its column stays zero
    assert stacked.scales[1] == 0.0
    assert stacked.weight(Network.WIKI) == 0.0
    assert stacked.weight(Network.TW) > 0


def test_model_write_read(tmp_path):
    rng = np.random.default_rng(2)
    catalog = get_catalog()
    weights = rng.random(len(catalog))
    model = ExpertiseModel(
        catalog, weights, {n: float(i) / 7 for i, n in enumerate(catalog.networks)}, seed=3, date="2015-07-11"
    )
    model.write(tmp_path / "model.tsv")
    loaded = ExpertiseModel.read(tmp_path / "model.tsv")
    np.testing.assert_array_equal(loaded.weights, weights)
    assert loaded.global_weights == model.global_weights
    assert loaded.seed == 3
    assert loaded.date == "2015-07-11"
    assert (tmp_path / "model.tsv").read_text().splitlines()[1].startswith("TW_MSG_TEXT_GENERATED\t")


def test_model_read_rejects_other_catalog(tmp_path):
    path = tmp_path / "model.tsv"
    path.write_text("# catalog=0000 seed=0 date=\nTW_MSG_TEXT_GENERATED\t1.0\n")
    with pytest.raises(CatalogError):
        ExpertiseModel.read(path)


def test_score_store_and_round_trip(tmp_path, settings):
    catalog = get_catalog()
    norm = FeatureStore(normalized=True)
    norm.set("b", "t", TW_MSG, 0.5)
    norm.set("a", "t", TW_FOLLOWERS, 1.0)
    norm.set("a", "s", WIKI, 0.25)
    weights = np.zeros(len(catalog))
    weights[catalog.slot(TW_MSG)] = 2.0
    weights[catalog.slot(TW_FOLLOWERS)] = 1.0
    weights[catalog.slot(WIKI)] = 4.0
    model = ExpertiseModel(catalog, weights, {})

    settings.TOPIC_EXPERTS_PARALLEL = True
    scores = score_store(model, norm, partitions=3)
    assert [(s.user, s.topic, s.score) for s in scores] == [("a", "s", 1.0), ("a", "t", 1.0), ("b", "t", 1.0)]
    assert scores[0].by_network == (0.0, 0.0, 0.0, 0.0, 0.0, 1.0)
    assert scores[1].by_network[0] == 1.0
    for s in scores:
        assert sum(s.by_network) == pytest.approx(s.score)

    settings.TOPIC_EXPERTS_PARALLEL = False
    assert score_store(model, norm, partitions=1) == scores

    write_scores(tmp_path / "scores.tsv", scores, catalog.networks)
    loaded, networks = read_scores(tmp_path / "scores.tsv")
    assert loaded == scores
    assert networks == catalog.networks


def test_expertise_score_defaults():
    assert ExpertiseScore("a", "t", 0.5).by_network == ()
