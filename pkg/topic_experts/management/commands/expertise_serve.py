from django.conf import settings
from django.core.management import call_command
from django.core.management.base import BaseCommand, CommandError

from topic_experts.exceptions import MissingArtifactError
from topic_experts.snapshot import reload_index


class Command(BaseCommand):
    help = "Serves the expert API over an index directory."

    def add_arguments(self, parser):
        parser.add_argument("addrport", nargs="?", default="127.0.0.1:8000", help="Listen address.")
        parser.add_argument("--index-dir", default=None, help="Index directory (TOPIC_EXPERTS_INDEX_DIR by default).")

    def handle(self, *args, **options):
        if options["index_dir"]:
            settings.TOPIC_EXPERTS_INDEX_DIR = options["index_dir"]
        try:
            index = reload_index()
        except MissingArtifactError as exc:
            raise CommandError(str(exc)) from exc

        self.stdout.write(self.style.SUCCESS(f"Serving {len(index)} topics on {options['addrport']}"))
        call_command("runserver", options["addrport"], use_reloader=False)
