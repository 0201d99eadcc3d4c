"""
Shared plumbing for the pipeline stage commands.

Every stage reads named files from ``--in``, writes named files to ``--out``
(``--in`` when omitted) and records a ``<stage>.json`` manifest next to its
outputs.
"""
import os
from datetime import datetime, timezone

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from topic_experts.exceptions import MissingArtifactError, TopicExpertsError
from topic_experts.utils import ensure_dir, read_manifest, write_manifest

DAY = 86400


class StageCommand(BaseCommand):
    stage = None
    # Files that must exist in the input directory.
    requires = ()

    def add_arguments(self, parser):
        parser.add_argument("--in", dest="in_dir", default=".", help="Directory holding the stage inputs.")
        parser.add_argument("--out", dest="out_dir", default=None, help="Output directory (defaults to --in).")
        parser.add_argument("--seed", type=int, default=None, help="Seed for anything randomised.")
        parser.add_argument("--config", default=None, help="JSON configuration file.")
        parser.add_argument(
            "--window-days", type=int, default=90, help="Only events this many days before --as-of are used."
        )
        parser.add_argument(
            "--as-of", type=int, default=None, help="End of the event window (epoch seconds); defaults to the latest event."
        )
        self.add_stage_arguments(parser)

    def add_stage_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        self.options = options
        self.in_dir = options["in_dir"]
        self.out_dir = options["out_dir"] or self.in_dir
        ensure_dir(self.out_dir)

        try:
            for name in self.requires:
                self.require(name)
            summary = self.run(**options) or {}
        except MissingArtifactError as exc:
            raise CommandError(str(exc)) from exc
        except (TopicExpertsError, ValueError, OSError) as exc:
            raise CommandError(f"{self.stage} failed: {exc}") from exc

        write_manifest(
            self.out_dir,
            self.stage,
            {
                "stage": self.stage,
                "inputs": sorted(self.requires),
                "flags": {
                    "seed": options.get("seed"),
                    "config": options.get("config"),
                    "window_days": options.get("window_days"),
                    "as_of": options.get("as_of"),
                },
                **summary,
            },
        )
        self.stdout.write(self.style.SUCCESS(f"{self.stage} finished."))

    def run(self, **options):
        raise NotImplementedError

    def require(self, name) -> str:
        path = self.input_path(name)
        if not os.path.exists(path):
            raise MissingArtifactError(path, self.stage)
        return path

    def input_path(self, name) -> str:
        return os.path.join(self.in_dir, name)

    def output_path(self, name) -> str:
        return os.path.join(self.out_dir, name)

    def optional_input(self, name):
        path = self.input_path(name)
        return path if os.path.exists(path) else None

    def split_seed(self) -> int:
        seed = self.options.get("seed")
        return getattr(settings, "TOPIC_EXPERTS_SPLIT_SEED", 0) if seed is None else seed

    def model_date(self) -> str:
        """The ingest window end as a UTC date, so reruns stamp the same date."""
        as_of = read_manifest(self.in_dir, "ingest").get("as_of")
        if as_of is None:
            return ""
        return datetime.fromtimestamp(as_of, tz=timezone.utc).date().isoformat()
