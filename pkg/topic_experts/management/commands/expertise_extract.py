from dataclasses import asdict

from topic_experts.features import FeatureExtractor
from topic_experts.ingest import partition_by_user, read_events
from topic_experts.management.stage import StageCommand
from topic_experts.ontology import load_dictionary, load_ontology


class Command(StageCommand):
    help = "Extracts raw (user, topic, feature) values from the ingested events."
    stage = "extract"
    requires = ("ingested.jsonl", "ontology.tsv", "dictionary.tsv")

    def add_stage_arguments(self, parser):
        parser.add_argument("--partitions", type=int, default=None, help="Number of user partitions.")

    def run(self, **options):
        ontology = load_ontology(self.input_path("ontology.tsv"))
        dictionary = load_dictionary(self.input_path("dictionary.tsv"), ontology)
        events = read_events(self.input_path("ingested.jsonl"))

        extractor = FeatureExtractor(ontology, dictionary, options["partitions"])
        store = extractor.extract(partition_by_user(events))
        store.write(self.output_path("features_raw.tsv"))

        if extractor.stats.skipped_triples:
            self.stderr.write(f"Skipped {extractor.stats.skipped_triples} events outside the feature catalog")
        if extractor.stats.degenerate_profiles:
            self.stderr.write(f"Skipped {extractor.stats.degenerate_profiles} profiles with no industry followers")
        self.stdout.write(f"Extracted {len(store)} feature values for {len(store.users())} users")
        return {"values": len(store), "users": len(store.users()), "stats": asdict(extractor.stats)}
