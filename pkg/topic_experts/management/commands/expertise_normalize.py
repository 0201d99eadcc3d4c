from topic_experts.features import FeatureStore
from topic_experts.management.stage import StageCommand
from topic_experts.normalize import normalize_store


class Command(StageCommand):
    help = "Rescales raw features to [0, 1] per (feature, topic)."
    stage = "normalize"
    requires = ("features_raw.tsv",)

    def run(self, **options):
        raw = FeatureStore.read(self.input_path("features_raw.tsv"))
        norm = normalize_store(raw)
        norm.write(self.output_path("features_norm.tsv"))
        self.stdout.write(f"Normalised {len(norm)} feature values")
        return {"values": len(norm)}
