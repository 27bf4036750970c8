from django.core.management.base import BaseCommand, CommandError

from ...invariants import SUITES, run_invariants
from ..base import EXIT_INVALID, translate_errors


class Command(BaseCommand):
    help = "Run the desk-scale invariant suites and report every check"

    def add_arguments(self, parser):
        parser.add_argument(
            "--suite",
            action="append",
            choices=list(SUITES),
            help="Run only this suite; may be repeated",
        )
        parser.add_argument("--seed", type=int, default=0, help="Seed of the generated instances")

    @translate_errors
    def handle(self, *args, **options):
        results = run_invariants(options["suite"], seed=options["seed"])
        failed = 0
        for result in results:
            line = "[%s] %s" % (result.details["suite"], result)
            if not result.passed:
                failed += 1
                self.stdout.write(self.style.ERROR(line))
            elif result.warnings:
                self.stdout.write(self.style.WARNING(line))
                for warning in result.warnings:
                    self.stdout.write("  warning: %s" % warning)
            else:
                self.stdout.write(self.style.SUCCESS(line))
        if failed:
            raise CommandError(
                "%d of %d invariant checks failed" % (failed, len(results)), returncode=EXIT_INVALID
            )
        self.stdout.write(self.style.SUCCESS("All %d invariant checks passed" % len(results)))
