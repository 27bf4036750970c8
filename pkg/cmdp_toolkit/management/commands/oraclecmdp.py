import numpy as np
from django.core.management.base import BaseCommand, CommandError

from ...dual import DualBox
from ...formats import load_model, load_policy, write_json
from ...models import DecisionRule
from ...npg import lagrangian_reward
from ...oracles import dual_grid_search, occupancy_lp_solve, soft_value_iteration
from ..base import EXIT_INVALID, translate_errors


class Command(BaseCommand):
    help = "Compute ground truth for a CMDP model file with one of the oracles"

    def add_arguments(self, parser):
        parser.add_argument("oracle", choices=["lp", "grid", "softvi"], help="The oracle to run")
        parser.add_argument("file", type=str, help="Path of the JSON model file")
        parser.add_argument("--tau", type=float, help="Entropy regularization weight (grid, softvi)")
        parser.add_argument(
            "--multiplier",
            type=float,
            nargs="*",
            help="Lagrange multipliers of the soft value iteration reward (default 0)",
        )
        parser.add_argument("--resolution", type=float, default=1e-3, help="Grid resolution")
        parser.add_argument("--slater-policy", help="Policy file defining the dual box (default uniform)")
        parser.add_argument("--tol", type=float, help="Sup-norm accuracy of soft value iteration")
        parser.add_argument("-o", "--output", help="Also write the result as JSON to this path")

    def require_tau(self, options):
        if options["tau"] is None or not options["tau"] > 0:
            raise CommandError("the %s oracle needs --tau > 0" % options["oracle"], returncode=EXIT_INVALID)
        return options["tau"]

    def run_lp(self, model, options):
        solution = occupancy_lp_solve(model)
        self.stdout.write("LP value: %.15g" % solution.value)
        return {
            "value": solution.value,
            "occupancy": solution.occupancy.mu.tolist(),
            "policy": solution.policy.prob.tolist(),
            "flow_residual": solution.occupancy.flow_residual(model),
        }

    def run_grid(self, model, options):
        tau = self.require_tau(options)
        if options["slater_policy"]:
            slater = load_policy(options["slater_policy"])
        else:
            slater = DecisionRule(np.full(model.shape, 1.0 / model.num_actions))
        box = DualBox.from_slater(model, slater, tau)
        result = dual_grid_search(model, tau, box, options["resolution"])
        self.stdout.write("lambda*: %s" % np.array2string(result.lambda_star, precision=10))
        self.stdout.write("D*: %.15g" % result.dual_value)
        return {
            "lambda_star": result.lambda_star.tolist(),
            "dual_value": result.dual_value,
            "certificate": result.certificate,
        }

    def run_softvi(self, model, options):
        tau = self.require_tau(options)
        multiplier = options["multiplier"] or [0.0] * model.num_constraints
        reward_table = lagrangian_reward(model, multiplier)
        values, policy = soft_value_iteration(model, reward_table, tau, tol=options["tol"])
        self.stdout.write("V*(rho): %.15g" % values.at(model.initial_dist))
        return {
            "value": values.at(model.initial_dist),
            "values": values.v.tolist(),
            "policy": policy.prob.tolist(),
        }

    @translate_errors
    def handle(self, *args, **options):
        model = load_model(options["file"])
        runner = getattr(self, "run_%s" % options["oracle"])
        result = runner(model, options)
        if options["output"]:
            write_json(options["output"], result)
        self.stdout.write(self.style.SUCCESS("%s oracle finished" % options["oracle"]))
