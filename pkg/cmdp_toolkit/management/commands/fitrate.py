from django.core.management.base import BaseCommand

from ...experiments import RATE_MODELS, fit_rate
from ..base import translate_errors


class Command(BaseCommand):
    help = "Fit a power-law or geometric rate to one column of a trace CSV"

    def add_arguments(self, parser):
        parser.add_argument("trace", type=str, help="Path of the trace CSV")
        parser.add_argument("--column", required=True, help="The column to fit")
        parser.add_argument("--model", choices=RATE_MODELS, default="power", help="The rate model")

    @translate_errors
    def handle(self, *args, **options):
        fit = fit_rate(options["trace"], options["column"], model=options["model"])
        self.stdout.write(
            "slope=%.10g intercept=%.10g residual=%.3g stderr=%.3g band=[%.10g, %.10g] rows=%d"
            % (fit.slope, fit.intercept, fit.residual, fit.stderr, fit.band[0], fit.band[1], fit.rows)
        )
        self.stdout.write(self.style.SUCCESS("%s fit of %s finished" % (fit.model, options["column"])))
