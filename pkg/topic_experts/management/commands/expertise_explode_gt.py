from django.conf import settings

from topic_experts.groundtruth import dedupe_labels, explode_all, read_evaluations, split_labels, write_labels
from topic_experts.management.stage import StageCommand


class Command(StageCommand):
    help = "Explodes evaluator-sorted lists into pairwise labels and splits them for training and testing."
    stage = "explode_gt"
    requires = ("groundtruth.tsv",)

    def add_stage_arguments(self, parser):
        parser.add_argument("--train-fraction", type=float, default=None, help="Share of pairs used for training.")

    def run(self, **options):
        evaluations = read_evaluations(self.input_path("groundtruth.tsv"))
        labels = explode_all(evaluations)
        write_labels(self.output_path("labels.tsv"), labels)

        fraction = options["train_fraction"]
        if fraction is None:
            fraction = getattr(settings, "TOPIC_EXPERTS_TRAIN_FRACTION", 0.8)
        deduped = dedupe_labels(labels)
        train, test = split_labels(deduped, fraction, self.split_seed())
        write_labels(self.output_path("labels_train.tsv"), train)
        write_labels(self.output_path("labels_test.tsv"), test)

        self.stdout.write(
            f"{len(evaluations)} evaluations -> {len(labels)} labels, "
            f"{len(deduped)} unique pairs ({len(train)} train / {len(test)} test)"
        )
        return {
            "evaluations": len(evaluations),
            "labels": len(labels),
            "unique_pairs": len(deduped),
            "train": len(train),
            "test": len(test),
            "train_fraction": fraction,
        }
