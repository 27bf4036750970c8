from django.core.management.base import BaseCommand, CommandError

from ...formats import model_from_dict, read_json
from ...validators import validate_model
from ..base import EXIT_INVALID, translate_errors


class Command(BaseCommand):
    help = "Check a CMDP model file against every model invariant"

    def add_arguments(self, parser):
        parser.add_argument("file", type=str, help="Path of the JSON model file")
        parser.add_argument(
            "--interior",
            action="store_true",
            help="Also require every initial state to have positive mass",
        )

    @translate_errors
    def handle(self, *args, **options):
        path = options["file"]
        model = model_from_dict(read_json(path), source=path)
        report = validate_model(model, require_interior=options["interior"])
        if not report:
            for message in report.messages:
                self.stdout.write(self.style.ERROR("- %s" % message))
            raise CommandError(
                "%s: %d invariant violations" % (path, len(report.violations)), returncode=EXIT_INVALID
            )
        self.stdout.write(self.style.SUCCESS("%s: valid CMDP %r" % (path, model)))
