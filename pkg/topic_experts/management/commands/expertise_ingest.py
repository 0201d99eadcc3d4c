from topic_experts.features import (
    count_in_degrees,
    merge_connectivity,
    read_connectivity_vectors,
    write_connectivity_vectors,
)
from topic_experts.ingest import IngestReport, corpus_users, latest_timestamp, read_events, write_events
from topic_experts.management.stage import DAY, StageCommand
from topic_experts.utils import write_tsv


class Command(StageCommand):
    help = "Validates events.jsonl, applies the time window and merges user connectivity."
    stage = "ingest"
    requires = ("events.jsonl",)

    def run(self, **options):
        events_path = self.input_path("events.jsonl")
        as_of = options["as_of"]
        if as_of is None:
            as_of = latest_timestamp(events_path)
        since = None if as_of is None else as_of - options["window_days"] * DAY

        report = IngestReport()
        events = list(read_events(events_path, report, since=since, until=as_of))
        write_events(self.output_path("ingested.jsonl"), events)
        report.write(self.output_path("rejects.tsv"))

        declared_path = self.optional_input("connectivity.tsv")
        declared = read_connectivity_vectors(declared_path) if declared_path else {}
        merged = merge_connectivity(count_in_degrees(events), declared)
        write_connectivity_vectors(self.output_path("connectivity_merged.tsv"), merged)

        users = corpus_users(events)
        write_tsv(self.output_path("corpus_users.tsv"), ((user,) for user in users), header=("user",))

        for reason, count in report.reasons().items():
            self.stderr.write(f"Rejected {count} records: {reason}")
        self.stdout.write(f"Accepted {report.accepted} of {report.lines} records from {len(users)} users")
        return {"as_of": as_of, "since": since, "users": len(users), **report.summary()}
