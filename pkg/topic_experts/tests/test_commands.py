import json
from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from topic_experts.rank import RankedIndex

SMALL_CONFIG = {"users": 100, "topics": 3, "lists_per_topic": 20}

REPORTS = [
    "consensus_by_connectivity_delta.tsv",
    "consensus_by_votes.tsv",
    "feature_histograms.tsv",
    "feature_metrics.tsv",
    "feature_vs_connectivity.tsv",
    "heatmaps.tsv",
    "label_deltas.tsv",
    "supertopic_rollup.tsv",
    "users_vs_connectivity.tsv",
]


def run_pipeline(work, config_path, seed=7):
    out = StringIO()
    call_command(
        "expertise_pipeline", "--in", str(work), "--synth", "--config", str(config_path), "--seed", str(seed), stdout=out
    )
    return out.getvalue()


def index_files(index_dir):
    return {
        str(path.relative_to(index_dir)): path.read_bytes() for path in sorted(index_dir.rglob("*")) if path.is_file()
    }


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "synth.json"
    path.write_text(json.dumps(SMALL_CONFIG))
    return path


def test_train_without_features_names_the_missing_artifact(tmp_path):
    with pytest.raises(CommandError) as exc:
        call_command("expertise_train", "--in", str(tmp_path), stdout=StringIO())
    assert "features_norm.tsv" in str(exc.value)
    assert "train" in str(exc.value)


def test_index_without_scores(tmp_path):
    with pytest.raises(CommandError) as exc:
        call_command("expertise_index", "--in", str(tmp_path), stdout=StringIO())
    assert "scores.tsv" in str(exc.value)


def test_synth_rejects_bad_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"label_noise": 0.4}))
    with pytest.raises(CommandError) as exc:
        call_command("expertise_synth", "--out", str(tmp_path / "data"), "--config", str(path), stdout=StringIO())
    assert "label_noise" in str(exc.value)


def test_explode_gt_stage(tmp_path):
    (tmp_path / "groundtruth.tsv").write_text("e1\tt1\ta,b,c\ne2\tt1\tb,a\n")
    call_command("expertise_explode_gt", "--in", str(tmp_path), "--train-fraction", "1.0", stdout=StringIO())
    assert len((tmp_path / "labels.tsv").read_text().splitlines()) == 1 + 4
    # (a, b) is tied 1:1 and dropped
    assert len((tmp_path / "labels_train.tsv").read_text().splitlines()) == 1 + 2
    assert (tmp_path / "labels_test.tsv").read_text().splitlines() == ["#u1\tu2\ttopic\tlabel\tevaluator"]
    manifest = json.loads((tmp_path / "explode_gt.json").read_text())
    assert manifest["stage"] == "explode_gt"
    assert manifest["unique_pairs"] == 2


def test_full_pipeline_smoke(tmp_path, config_path):
    work = tmp_path / "work"
    output = run_pipeline(work, config_path)
    assert "Pipeline finished" in output
    assert "MODEL precision=" in output

    for name in ("ingested.jsonl", "features_raw.tsv", "features_norm.tsv", "labels_train.tsv", "model.tsv", "scores.tsv"):
        assert (work / name).exists(), name
    for name in REPORTS:
        assert (work / "reports" / name).exists(), name
    for stage in ("synth", "ingest", "extract", "normalize", "explode_gt", "train", "score", "index", "eval"):
        assert json.loads((work / f"{stage}.json").read_text())["stage"] == stage

    index = RankedIndex.read(work / "index")
    assert len(index) > 0
    topic = index.topics[0]
    experts = index.top_experts(topic.slug, 5)
    assert [e.rank for e in experts] == list(range(1, len(experts) + 1))
    assert index.user_topics(index.handle_of(experts[0].user))


def test_pipeline_is_deterministic(tmp_path, config_path):
    run_pipeline(tmp_path / "one", config_path)
    run_pipeline(tmp_path / "two", config_path)
    assert (tmp_path / "one" / "model.tsv").read_bytes() == (tmp_path / "two" / "model.tsv").read_bytes()
    assert index_files(tmp_path / "one" / "index") == index_files(tmp_path / "two" / "index")


def test_rerunning_a_stage_reproduces_its_output(tmp_path, config_path):
    work = tmp_path / "work"
    run_pipeline(work, config_path)
    before = (work / "features_norm.tsv").read_bytes()
    call_command("expertise_normalize", "--in", str(work), stdout=StringIO())
    assert (work / "features_norm.tsv").read_bytes() == before


def test_serve_without_index(tmp_path, settings):
    settings.TOPIC_EXPERTS_INDEX_DIR = None
    with pytest.raises(CommandError):
        call_command("expertise_serve", "--index-dir", str(tmp_path / "missing"), stdout=StringIO())
