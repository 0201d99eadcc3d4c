from django.core.management import call_command
from django.core.management.base import BaseCommand

STAGES = (
    "expertise_ingest",
    "expertise_extract",
    "expertise_normalize",
    "expertise_explode_gt",
    "expertise_train",
    "expertise_score",
    "expertise_index",
    "expertise_eval",
)


class Command(BaseCommand):
    help = "Runs every pipeline stage in order inside one work directory."

    def add_arguments(self, parser):
        parser.add_argument("--in", dest="in_dir", required=True, help="Work directory.")
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--config", default=None, help="Synthetic dataset configuration (with --synth).")
        parser.add_argument("--window-days", type=int, default=90)
        parser.add_argument("--as-of", type=int, default=None)
        parser.add_argument("--synth", action="store_true", help="Generate a synthetic dataset first.")

    def handle(self, *args, **options):
        work = options["in_dir"]
        common = ["--in", work]
        if options["seed"] is not None:
            common += ["--seed", str(options["seed"])]

        if options["synth"]:
            synth_args = list(common)
            if options["config"]:
                synth_args += ["--config", options["config"]]
            call_command("expertise_synth", *synth_args, stdout=self.stdout, stderr=self.stderr)

        window = ["--window-days", str(options["window_days"])]
        if options["as_of"] is not None:
            window += ["--as-of", str(options["as_of"])]

        for stage in STAGES:
            args = common + window if stage == "expertise_ingest" else common
            call_command(stage, *args, stdout=self.stdout, stderr=self.stderr)

        self.stdout.write(self.style.SUCCESS(f"Pipeline finished in {work}"))
