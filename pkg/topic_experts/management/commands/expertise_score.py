from topic_experts.features import FeatureStore
from topic_experts.management.stage import StageCommand
from topic_experts.model import ExpertiseModel, score_store, write_scores


class Command(StageCommand):
    help = "Scores every (user, topic) pair with the trained model."
    stage = "score"
    requires = ("model.tsv", "features_norm.tsv")

    def run(self, **options):
        model = ExpertiseModel.read(self.input_path("model.tsv"))
        norm = FeatureStore.read(self.input_path("features_norm.tsv"))
        scores = score_store(model, norm)
        write_scores(self.output_path("scores.tsv"), scores, model.catalog.networks)
        positive = sum(1 for s in scores if s.score > 0)
        self.stdout.write(f"Scored {len(scores)} pairs, {positive} above zero")
        return {"pairs": len(scores), "positive": positive}
