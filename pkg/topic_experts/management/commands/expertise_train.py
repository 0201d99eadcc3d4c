from topic_experts.features import FeatureStore
from topic_experts.groundtruth import read_labels
from topic_experts.management.stage import StageCommand
from topic_experts.model import train_model


class Command(StageCommand):
    help = "Trains the per-network and global NNLS models and writes model.tsv."
    stage = "train"
    requires = ("features_norm.tsv", "labels_train.tsv")

    def add_stage_arguments(self, parser):
        parser.add_argument("--tol", type=float, default=None, help="NNLS dual feasibility tolerance.")
        parser.add_argument(
            "--folds", type=int, default=None, help="Folds for the out-of-fold global fit (TOPIC_EXPERTS_STACK_FOLDS)."
        )

    def run(self, **options):
        norm = FeatureStore.read(self.input_path("features_norm.tsv"))
        labels = read_labels(self.input_path("labels_train.tsv"))
        model = train_model(
            labels, norm, tol=options["tol"], seed=self.split_seed(), date=self.model_date(), folds=options["folds"]
        )
        model.write(self.output_path("model.tsv"))

        for network, net_model in model.network_models.items():
            if net_model.empty:
                self.stderr.write(f"Network {network.value} had no usable training rows")
        self.stdout.write(f"Trained on {len(labels)} labels")
        return {
            "labels": len(labels),
            "global_weights": {n.value: w for n, w in model.global_weights.items()},
            "networks": {
                n.value: {"rows": m.rows, "residual": m.residual, "empty": m.empty}
                for n, m in model.network_models.items()
            },
        }
