import os

from topic_experts.evaluation import (
    evaluate_features,
    evaluate_model,
    export_distributions,
    feature_vs_connectivity,
    predictability_heatmap,
    supertopic_rollup,
    write_connectivity_curves,
    write_heatmaps,
    write_metrics,
    write_rollup,
)
from topic_experts.features import FeatureStore, connectivities, read_connectivity_vectors
from topic_experts.groundtruth import read_labels, write_consensus_reports
from topic_experts.management.stage import StageCommand
from topic_experts.model import ExpertiseModel, read_scores
from topic_experts.ontology import load_ontology
from topic_experts.utils import read_tsv


class Command(StageCommand):
    help = "Evaluates features and the model on the held-out labels and writes the report files."
    stage = "eval"
    requires = (
        "features_raw.tsv",
        "features_norm.tsv",
        "labels.tsv",
        "labels_test.tsv",
        "model.tsv",
        "scores.tsv",
        "ontology.tsv",
        "connectivity_merged.tsv",
        "corpus_users.tsv",
    )

    def run(self, **options):
        raw = FeatureStore.read(self.input_path("features_raw.tsv"))
        norm = FeatureStore.read(self.input_path("features_norm.tsv"))
        all_labels = read_labels(self.input_path("labels.tsv"))
        test = read_labels(self.input_path("labels_test.tsv"))
        model = ExpertiseModel.read(self.input_path("model.tsv"))
        scores, networks = read_scores(self.input_path("scores.tsv"))
        ontology = load_ontology(self.input_path("ontology.tsv"))
        conn = connectivities(read_connectivity_vectors(self.input_path("connectivity_merged.tsv")))
        corpus = [row[0] for row in read_tsv(self.input_path("corpus_users.tsv"), expected=1)]

        reports = self.output_path("reports")
        if not test:
            self.stderr.write("No held-out labels; metrics are all zero")

        model_metrics = evaluate_model(test, model, norm, corpus)
        metrics = evaluate_features(test, norm, corpus) + model_metrics
        write_metrics(os.path.join(reports, "feature_metrics.tsv"), metrics)

        grids = [predictability_heatmap(feature, test, norm, conn) for feature in norm.catalog]
        write_heatmaps(os.path.join(reports, "heatmaps.tsv"), grids)
        write_connectivity_curves(
            os.path.join(reports, "feature_vs_connectivity.tsv"),
            {feature.name: feature_vs_connectivity(feature, test, norm, conn) for feature in norm.catalog},
        )

        write_consensus_reports(reports, all_labels, conn)
        export_distributions(raw, conn, test, reports, norm=norm)
        write_rollup(os.path.join(reports, "supertopic_rollup.tsv"), supertopic_rollup(scores, ontology, networks))

        overall = model_metrics[0]
        self.stdout.write(
            f"MODEL precision={overall.precision:.4f} recall={overall.recall:.4f} "
            f"f1={overall.f1:.4f} coverage={overall.coverage:.4f}"
        )
        return {
            "test_labels": len(test),
            "model": {
                "precision": overall.precision,
                "recall": overall.recall,
                "f1": overall.f1,
                "coverage": overall.coverage,
            },
        }
