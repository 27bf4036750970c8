from pathlib import Path

from django.core.management.base import BaseCommand

from ...experiments import ExperimentConfig, run_experiment
from ...formats import read_json
from ..base import translate_errors


class Command(BaseCommand):
    help = "Run a solver under an experiment config and write its artifacts"

    def add_arguments(self, parser):
        parser.add_argument("solver", choices=["dual", "bisect", "standard"], help="The solver to run")
        parser.add_argument("-c", "--config", required=True, help="Path of the JSON experiment config")
        parser.add_argument("--output-dir", help="Override the output directory of the config")

    @translate_errors
    def handle(self, *args, **options):
        path = Path(options["config"])
        data = read_json(path)
        if isinstance(data, dict):
            data["solver"] = options["solver"]
            if options["output_dir"]:
                data["output_dir"] = str(Path(options["output_dir"]).resolve())
        config = ExperimentConfig.from_dict(data, base_dir=path.parent)
        run_dir = run_experiment(config)
        self.stdout.write(self.style.SUCCESS("Run written to %s" % run_dir))
