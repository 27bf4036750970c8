from django.core.management.base import BaseCommand, CommandError

from ...formats import dump_model, dump_policy
from ...generators import gen_gridworld, gen_random_cmdp
from ..base import EXIT_INVALID, translate_errors


def hazard_cell(value):
    row, col = value.split(",")
    return int(row), int(col)


class Command(BaseCommand):
    help = "Generate a Slater-feasible CMDP instance and write it as JSON"

    def add_arguments(self, parser):
        parser.add_argument("kind", choices=["random", "gridworld"], help="The instance family")
        parser.add_argument("-o", "--output", required=True, help="Path of the model file to write")
        parser.add_argument("--slater-output", help="Also write the certified Slater policy to this path")
        parser.add_argument("--gamma", type=float, default=0.9, help="The discount factor")
        parser.add_argument("--seed", type=int, help="Seed of a random instance")
        parser.add_argument("--states", type=int, default=5, help="Number of states of a random instance")
        parser.add_argument("--actions", type=int, default=3, help="Number of actions of a random instance")
        parser.add_argument(
            "--constraints", type=int, default=1, help="Number of constraints of a random instance"
        )
        parser.add_argument(
            "--threshold-factor",
            type=float,
            help="Thresholds are this fraction of the uniform policy's utilities",
        )
        parser.add_argument("--width", type=int, default=4, help="Gridworld width")
        parser.add_argument("--height", type=int, default=4, help="Gridworld height")
        parser.add_argument(
            "--hazard",
            type=hazard_cell,
            action="append",
            help="A hazard cell as row,col; may be repeated",
        )
        parser.add_argument("--no-hazards", action="store_true", help="Generate a hazard-free gridworld")
        parser.add_argument("--slack", type=float, help="Slater slack of the gridworld threshold")

    @translate_errors
    def handle(self, *args, **options):
        if options["kind"] == "random":
            if options["seed"] is None:
                raise CommandError("random instances need --seed", returncode=EXIT_INVALID)
            generated = gen_random_cmdp(
                options["seed"],
                options["states"],
                options["actions"],
                options["constraints"],
                options["gamma"],
                threshold_factor=options["threshold_factor"],
            )
        else:
            hazards = [] if options["no_hazards"] else options["hazard"]
            generated = gen_gridworld(
                options["width"], options["height"], options["gamma"], hazards=hazards, slack=options["slack"]
            )
        path = dump_model(generated.model, options["output"])
        if options["slater_output"]:
            dump_policy(generated.slater_policy, options["slater_output"])
        self.stdout.write(self.style.SUCCESS("Wrote %r to %s" % (generated.model, path)))
