import os

from topic_experts.management.stage import StageCommand
from topic_experts.model import read_scores
from topic_experts.ontology import load_ontology
from topic_experts.rank import build_index, read_handles
from topic_experts.utils import write_tsv


class Command(StageCommand):
    help = "Builds the per-topic ranked index served by the API."
    stage = "index"
    requires = ("scores.tsv", "ontology.tsv")

    def run(self, **options):
        scores, _ = read_scores(self.input_path("scores.tsv"))
        ontology = load_ontology(self.input_path("ontology.tsv"))
        handles_path = self.optional_input("handles.tsv")
        handles = dict(read_handles(handles_path)) if handles_path else {}

        index = build_index(scores, ontology, handles)
        index.write(self.output_path("index"))
        population = index.population()
        write_tsv(
            self.output_path("topic_population.tsv"),
            sorted(population.items()),
            header=("topic_slug", "scored_users"),
        )
        self.stdout.write(f"Indexed {len(index)} topics into {os.path.join(self.out_dir, 'index')}")
        return {"topics": len(index), "population": population}
