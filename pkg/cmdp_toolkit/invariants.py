"""
Desk-scale invariant suites.

Every check builds its own small seeded instances, measures one identity or
bound, and reports an `InvariantResult` whose `margin` is bound minus
measurement (negative when the check fails).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .bisection import BisectionConfig, bisection_budget, bisection_inner_budget, bisection_solve
from .dual import (
    DualBox,
    accelerated_dual_descent,
    compute_constants,
    dual_value_and_gradient,
    gradient_error_allowance,
    project_dual,
    value_lipschitz,
)
from .evaluation import (
    direct_policy_gradient,
    discounted_entropy,
    discounted_visitation,
    evaluate_q,
    evaluate_soft_q,
    evaluate_soft_value,
    evaluate_value,
    kl_divergence,
    one_step_lookahead,
    performance_difference,
    policy_distance,
    soft_suboptimality,
    softmax_policy_gradient,
    state_transition_matrix,
    utility_values,
)
from .exceptions import InvalidArgumentError, RateFitError
from .experiments import fit_rate
from .generators import gen_random_cmdp
from .models import DecisionRule, Policy, TabularCMDP
from .npg import NpgConfig, certified_log_error, lagrangian_reward, npg_run, npg_step, q_gap_bound
from .oracles import (
    central_difference,
    dual_grid_search,
    occupancy_lp_solve,
    soft_bellman_backup,
    soft_value_iteration,
    truncated_rollout_value,
    truncated_visitation,
    value_iteration,
)
from .settings import cmdp_settings


logger = logging.getLogger(__name__)

# inner NPG budget that drives the log-policy error to rounding level at gamma = 0.8
CONVERGED_INNER_BUDGET = 200


@dataclass
class InvariantResult:
    name: str
    passed: bool
    margin: float
    details: dict = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def status(self):
        if not self.passed:
            return "FAIL"
        return "WARN" if self.warnings else "PASS"

    def __str__(self):
        return "%s %s (margin %.3g)" % (self.status, self.name, self.margin)


def _bounded(name, pairs, **details):
    """
    Result for a list of (measured, bound) pairs; passes when every measurement is within its bound.
    """
    margins = [float(bound) - float(measured) for measured, bound in pairs]
    worst = min(margins) if margins else 0.0
    details["samples"] = len(margins)
    return InvariantResult(name, worst >= 0, worst, details)


def _seed(rng):
    return int(rng.integers(2**31))


def random_model(rng, num_states, num_actions, num_constraints, gamma=0.9):
    return gen_random_cmdp(_seed(rng), num_states, num_actions, num_constraints, gamma).model


def random_policy(rng, num_states, num_actions, scale=1.0):
    return Policy.from_logits(scale * rng.normal(size=(num_states, num_actions)))


def conflict_model(rng, num_states, gamma=0.8, threshold_factor=0.5):
    """
    Two actions per state: action 0 pays reward 1 and utility 0, action 1 the
    reverse. Transitions are random. With b = factor U^{uniform}, the
    constraint is active for moderate tau and the uniform policy is a Slater point.
    """
    transition = rng.uniform(0.01, 1.0, size=(num_states, 2, num_states))
    transition /= transition.sum(axis=2, keepdims=True)
    reward = np.tile([1.0, 0.0], (num_states, 1))
    utility = np.tile([0.0, 1.0], (num_states, 1))
    initial_dist = np.full(num_states, 1.0 / num_states)
    model = TabularCMDP(transition, reward, [utility], [0.0], gamma, initial_dist)
    uniform = Policy.uniform(num_states, 2)
    return model.with_thresholds(threshold_factor * utility_values(model, uniform)), uniform


def lagrangian_value(model, policy, multiplier, tau):
    """
    L(pi, lambda) = V_tau^pi(rho) + lambda^T (U_g^pi(rho) - b).
    """
    soft_value = evaluate_soft_value(model, policy, model.reward, tau).at(model.initial_dist)
    return soft_value + float(np.dot(multiplier, utility_values(model, policy) - model.thresholds))


def _converged_dual(model, multiplier, tau):
    return dual_value_and_gradient(
        model, multiplier, tau, inner_budget=CONVERGED_INNER_BUDGET, stop_tol=cmdp_settings.NPG_STOP_TOLERANCE
    )


def check_bellman_consistency(rng):
    pairs = []
    for _ in range(5):
        model = random_model(rng, 4, 3, 1)
        policy = random_policy(rng, 4, 3)
        value = evaluate_value(model, policy, model.reward).v
        expected_reward = np.einsum("sa,sa->s", policy.prob, model.reward)
        transition = state_transition_matrix(model, policy)
        residual = np.max(np.abs(value - expected_reward - model.gamma * transition @ value))
        q = evaluate_q(model, policy, model.reward).q
        pairs.append((residual, 1e-10))
        pairs.append((np.max(np.abs(np.einsum("sa,sa->s", policy.prob, q) - value)), 1e-10))
    return _bounded("bellman_consistency", pairs)


def check_truncated_series(rng):
    horizon = 500
    pairs = []
    for _ in range(3):
        model = random_model(rng, 3, 2, 0)
        policy = random_policy(rng, 3, 2)
        exact = evaluate_value(model, policy, model.reward).at(model.initial_dist)
        series = truncated_rollout_value(model, policy, model.reward, horizon)
        pairs.append((abs(exact - series), model.gamma**horizon / (1.0 - model.gamma) + 1e-10))
        visitation = discounted_visitation(model, policy).d
        truncated = truncated_visitation(model, policy, horizon)
        pairs.append((np.max(np.abs(visitation - truncated)), model.gamma**horizon + 1e-12))
    return _bounded("truncated_series", pairs, horizon=horizon)


def check_soft_value_decomposition(rng):
    tau = 0.5
    pairs = []
    for _ in range(5):
        model = random_model(rng, 3, 2, 0)
        policy = random_policy(rng, 3, 2)
        soft = evaluate_soft_value(model, policy, model.reward, tau).at(model.initial_dist)
        plain = evaluate_value(model, policy, model.reward).at(model.initial_dist)
        pairs.append((abs(soft - plain - tau * discounted_entropy(model, policy)), 1e-10))
        soft_q = evaluate_soft_q(model, policy, model.reward, tau).q
        soft_v = evaluate_soft_value(model, policy, model.reward, tau).v
        backup = np.einsum("sa,sa->s", policy.prob, soft_q - tau * policy.log_prob)
        pairs.append((np.max(np.abs(backup - soft_v)), 1e-10))
    return _bounded("soft_value_decomposition", pairs, tau=tau)


def check_performance_difference(rng):
    pairs = []
    for _ in range(5):
        model = random_model(rng, 4, 3, 0)
        rule, other = random_policy(rng, 4, 3), random_policy(rng, 4, 3)
        difference = (
            evaluate_value(model, other, model.reward).at(model.initial_dist)
            - evaluate_value(model, rule, model.reward).at(model.initial_dist)
        )
        pairs.append((abs(difference - performance_difference(model, rule, other, model.reward)), 1e-8))
    return _bounded("performance_difference", pairs)


def check_soft_suboptimality(rng):
    tau = 0.5
    pairs = []
    for _ in range(5):
        model = random_model(rng, 4, 3, 0)
        policy = random_policy(rng, 4, 3)
        values, optimal = soft_value_iteration(model, model.reward, tau)
        gap = values.at(model.initial_dist) - evaluate_soft_value(model, policy, model.reward, tau).at(
            model.initial_dist
        )
        pairs.append((abs(gap - soft_suboptimality(model, policy, optimal, tau)), 1e-8))
    return _bounded("soft_suboptimality", pairs, tau=tau)


def check_policy_gradients(rng):
    tolerance = cmdp_settings.FINITE_DIFFERENCE_TOLERANCE
    pairs = []
    for _ in range(3):
        model = random_model(rng, 3, 2, 0)
        logits = rng.normal(size=(3, 2))

        def value_at(theta):
            return evaluate_value(model, Policy.from_logits(theta), model.reward).at(model.initial_dist)

        policy = Policy.from_logits(logits)
        analytic = softmax_policy_gradient(model, policy, model.reward)
        pairs.append((np.max(np.abs(analytic - central_difference(value_at, logits))), tolerance))

        direction = rng.normal(size=(3, 2))
        direction -= direction.mean(axis=1, keepdims=True)

        def value_along(step):
            return evaluate_value(model, DecisionRule(policy.prob + step[0] * direction), model.reward).at(
                model.initial_dist
            )

        directional = central_difference(value_along, [0.0])[0]
        predicted = float(np.sum(direct_policy_gradient(model, policy, model.reward) * direction))
        pairs.append((abs(directional - predicted), tolerance))
    return _bounded("policy_gradients", pairs)


def check_kl_l1_bound(rng):
    pairs = []
    for _ in range(50):
        p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        bound = np.sum(np.abs(p - q)) ** 2 / (2.0 * math.log(2.0))
        pairs.append((bound, kl_divergence(p, q, base=2)))
    return _bounded("kl_l1_bound", pairs)


def check_value_lipschitz(rng):
    """
    |V^pi1(rho) - V^pi2(rho)| <= ell_c ||pi1 - pi2|| for the reward and every utility.
    """
    pairs = []
    for _ in range(10):
        model = random_model(rng, 4, 3, 1)
        first = random_policy(rng, 4, 3, scale=2.0)
        second = DecisionRule.deterministic(rng.integers(3, size=4), 3)
        bound = value_lipschitz(model) * policy_distance(first, second)
        for table in (model.reward, *model.utilities):
            difference = evaluate_value(model, first, table).at(model.initial_dist)
            difference -= evaluate_value(model, second, table).at(model.initial_dist)
            pairs.append((abs(difference), bound + 1e-12))
    return _bounded("value_lipschitz", pairs)


def check_npg_linear_rate(rng):
    tau, gamma, iterations = 0.1, 0.9, 150
    pairs = []
    slopes = []
    for _ in range(2):
        model = random_model(rng, 5, 3, 0, gamma=gamma)
        values, optimal = soft_value_iteration(model, model.reward, tau)
        uniform = Policy.uniform(5, 3)
        q_star = one_step_lookahead(model, model.reward, values.v)
        q_gap = float(np.max(np.abs(q_star - evaluate_soft_q(model, uniform, model.reward, tau).q)))
        _, trace = npg_run(
            model, uniform, np.zeros(0), NpgConfig(tau=tau, max_iters=iterations), reference_policy=optimal
        )
        for record in trace:
            pairs.append((record.error, certified_log_error(q_gap, tau, gamma, record.iteration) + 1e-9))
        rows = [{"iter": r.iteration, "error": r.error} for r in trace if r.error > 1e-10]
        try:
            slope = fit_rate(rows, "error", model="linear-log").slope
        except RateFitError:
            continue
        slopes.append(slope)
        pairs.append((slope, math.log(gamma) + 0.02))
    return _bounded("npg_linear_rate", pairs, slopes=slopes, tau=tau)


def check_npg_soft_values(rng):
    """
    Soft values of the NPG iterates never exceed the regularized optimum.
    Decreases between iterates are reported as warnings.
    """
    pairs = []
    decreases = []
    for tau in (0.05, 0.5):
        model = random_model(rng, 4, 3, 1)
        multiplier = rng.uniform(0.0, 2.0, size=1)
        reward_table = lagrangian_reward(model, multiplier)
        optimum = soft_value_iteration(model, reward_table, tau)[0].at(model.initial_dist)
        _, trace = npg_run(model, random_policy(rng, 4, 3), multiplier, NpgConfig(tau=tau, max_iters=40))
        pairs.extend((value, optimum + 1e-8) for value in trace.soft_values)
        decreases.extend("tau=%g iteration %d" % (tau, t) for t in trace.monotonicity_violations())
    result = _bounded("npg_soft_values", pairs)
    result.warnings = decreases
    return result


def check_npg_fixed_point(rng):
    tau = 0.1
    pairs = []
    for _ in range(3):
        model = random_model(rng, 5, 3, 0)
        _, optimal = soft_value_iteration(model, model.reward, tau)
        stepped = npg_step(model, optimal, np.zeros(0), NpgConfig(tau=tau))
        pairs.append((np.max(np.abs(stepped.log_prob - optimal.log_prob)), 1e-8))
    return _bounded("npg_fixed_point", pairs, tau=tau)


def check_dual_gradient(rng):
    tau, step = 0.5, 1e-4
    pairs = []
    for _ in range(3):
        model, slater = conflict_model(rng, 4)
        box = DualBox.from_slater(model, slater, tau)
        multiplier = rng.uniform(0.1, min(box.upper[0], 5.0), size=1)

        def dual_at(point):
            return _converged_dual(model, np.maximum(point, 0.0), tau).value

        analytic = _converged_dual(model, multiplier, tau).gradient
        numeric = central_difference(dual_at, multiplier, step=step)
        pairs.append((np.max(np.abs(analytic - numeric)), 1e-5))

        # a short inner run against a converged reference
        budget = 5
        q_gap = q_gap_bound(model, tau, float(multiplier.sum()))
        certified = certified_log_error(q_gap, tau, model.gamma, budget)
        rough = dual_value_and_gradient(model, multiplier, tau, inner_budget=budget).gradient
        pairs.append((np.linalg.norm(rough - analytic), gradient_error_allowance(model, certified)))
    return _bounded("dual_gradient", pairs, tau=tau, step=step)


def check_dual_smoothness_convexity(rng):
    tau = 0.5
    pairs = []
    model, slater = conflict_model(rng, 3)
    constants = compute_constants(model, slater, tau)
    box = DualBox.from_slater(model, slater, tau)
    for _ in range(20):
        first, second = rng.uniform(0.0, box.upper), rng.uniform(0.0, box.upper)
        a, b = _converged_dual(model, first, tau), _converged_dual(model, second, tau)
        middle = _converged_dual(model, 0.5 * (first + second), tau)
        distance = float(np.linalg.norm(first - second))
        pairs.append((np.linalg.norm(a.gradient - b.gradient), constants.ell * distance + 1e-9))
        pairs.append((middle.value, 0.5 * (a.value + b.value) + 1e-9))
        # weak duality against the feasible Slater point
        pairs.append((lagrangian_value(model, Policy.uniform(3, 2), np.zeros(1), tau), a.value + 1e-9))
    return _bounded("dual_smoothness_convexity", pairs, ell=constants.ell)


def check_quadratic_lower_bound(rng):
    tau = 0.5
    pairs = []
    model, slater = conflict_model(rng, 3)
    constants = compute_constants(model, slater, tau)
    box = DualBox.from_slater(model, slater, tau)
    curvature = tau * constants.d_hat / (2.0 * (1.0 - model.gamma) * math.log(2.0))
    for _ in range(20):
        multiplier = rng.uniform(0.0, box.upper)
        _, optimal = soft_value_iteration(model, lagrangian_reward(model, multiplier), tau)
        policy = random_policy(rng, 3, 2, scale=2.0)
        gap = lagrangian_value(model, optimal, multiplier, tau)
        gap -= lagrangian_value(model, policy, multiplier, tau)
        distance = float(np.sum((policy.prob - optimal.prob) ** 2))
        pairs.append((curvature * distance, gap + 1e-10))
    return _bounded("quadratic_lower_bound", pairs, curvature=curvature)


def near_optimal_multiplier(model, tau, box, grid, epsilon):
    """
    Multiplier farthest from the grid minimizer, on a geometric ladder of
    offsets, whose converged dual value is within `epsilon` of the grid optimum.
    """
    for offset in np.geomspace(float(np.max(box.upper)), 1e-6, 40):
        for sign in (1.0, -1.0):
            candidate = project_dual(grid.lambda_star + sign * offset, box)
            if _converged_dual(model, candidate, tau).value - grid.dual_value <= epsilon:
                return candidate
    return np.array(grid.lambda_star)


def check_dual_to_primal_conversion(rng):
    """
    For lambda with D(lambda) - D* <= eps, ||pi_lambda - pi*|| <= C1 sqrt(eps) and the
    constraint violation of pi_lambda is at most ell_c C1 sqrt(eps). The grid error
    bound is added to eps, and pi* is the inner solution at the grid minimizer.
    """
    tau = 0.5
    pairs = []
    model, slater = conflict_model(rng, 3)
    constants = compute_constants(model, slater, tau)
    box = DualBox.from_slater(model, slater, tau)
    grid = dual_grid_search(model, tau, box, 1e-4)
    grid_error = grid.certificate.get("error_bound", 0.0)
    optimal = _converged_dual(model, grid.lambda_star, tau).policy
    for epsilon in (1e-2, 1e-3, 1e-4):
        multiplier = near_optimal_multiplier(model, tau, box, grid, epsilon)
        policy = _converged_dual(model, multiplier, tau).policy
        radius = constants.c1 * math.sqrt(epsilon + grid_error)
        violation = float(np.max(np.maximum(model.thresholds - utility_values(model, policy), 0.0)))
        pairs.append((policy_distance(policy, optimal), radius + constants.c1 * math.sqrt(grid_error) + 1e-9))
        pairs.append((violation, constants.ell_c * radius + 1e-9))
    return _bounded(
        "dual_to_primal_conversion", pairs, c1=constants.c1, lambda_star=grid.lambda_star.tolist()
    )


def check_dual_descent_gap(rng):
    tau, horizon = 0.5, 20
    model, slater = conflict_model(rng, 3)
    constants = compute_constants(model, slater, tau)
    box = DualBox.from_slater(model, slater, tau)
    result = accelerated_dual_descent(
        model, tau, box, constants, horizon, CONVERGED_INNER_BUDGET, CONVERGED_INNER_BUDGET
    )
    grid = dual_grid_search(model, tau, box, 1e-4)
    bound = 2.0 * constants.ell * (np.linalg.norm(grid.lambda_star) + 1.0) ** 2 / (horizon + 1.0) ** 2
    allowance = result.trace.allowance + grid.certificate.get("error_bound", 0.0)
    return _bounded(
        "dual_descent_gap",
        [(result.trace.final.dual_value - grid.dual_value, bound + allowance)],
        lambda_star=grid.lambda_star.tolist(),
        multiplier=result.multiplier.tolist(),
    )


def check_bisection(rng):
    tau, epsilon = 0.5, 1e-3
    pairs = []
    iterations = []
    for _ in range(2):
        model, slater = conflict_model(rng, 3)
        constants = compute_constants(model, slater, tau)
        inner = max(1, bisection_inner_budget(model, tau, constants, epsilon))
        config = BisectionConfig(epsilon=epsilon, inner_budget_n1=inner, recover_budget_n2=inner)
        result = bisection_solve(model, tau, config, constants=constants)
        trace = result.trace
        iterations.append(trace.outer_iterations)
        if trace.short_circuit is None:
            pairs.append((trace.outer_iterations, bisection_budget(constants, epsilon)))
            pairs.append((abs(trace.final_gradient), epsilon))
    return _bounded("bisection", pairs, outer_iterations=iterations, epsilon=epsilon)


def check_lp_matches_value_iteration(rng):
    pairs = []
    for _ in range(3):
        model = random_model(rng, 4, 2, 1).with_thresholds([0.0])
        lp = occupancy_lp_solve(model)
        values, _ = value_iteration(model, model.reward)
        pairs.append((abs(lp.value - values.at(model.initial_dist)), 1e-8))
        pairs.append((lp.occupancy.flow_residual(model), 1e-8))
        replay = evaluate_value(model, lp.policy, model.reward).at(model.initial_dist)
        pairs.append((abs(replay - lp.value), 1e-8))
    return _bounded("lp_matches_value_iteration", pairs)


def check_sandwich_bound(rng):
    pairs = []
    for tau in (0.01, 0.1, 1.0):
        model = random_model(rng, 4, 3, 0)
        optimum = value_iteration(model, model.reward)[0].at(model.initial_dist)
        _, soft_optimal = soft_value_iteration(model, model.reward, tau)
        soft_value = evaluate_value(model, soft_optimal, model.reward).at(model.initial_dist)
        pairs.append((soft_value, optimum + 1e-9))
        pairs.append((optimum, soft_value + tau * math.log(3) / (1.0 - model.gamma) + 1e-9))
    return _bounded("sandwich_bound", pairs)


def check_soft_vi_contraction(rng):
    tau = 0.1
    model = random_model(rng, 4, 3, 0)
    values = np.zeros(4)
    changes = []
    for _ in range(60):
        updated = soft_bellman_backup(model, model.reward, tau, values)
        changes.append(float(np.max(np.abs(updated - values))))
        values = updated
    pairs = [(changes[k + 1], model.gamma * changes[k] + 1e-13) for k in range(len(changes) - 1)]
    return _bounded("soft_vi_contraction", pairs, tau=tau)


SUITES = {
    "evaluation": (
        check_bellman_consistency,
        check_truncated_series,
        check_soft_value_decomposition,
        check_performance_difference,
        check_soft_suboptimality,
        check_policy_gradients,
        check_kl_l1_bound,
        check_value_lipschitz,
    ),
    "npg": (check_npg_linear_rate, check_npg_soft_values, check_npg_fixed_point),
    "dual": (
        check_dual_gradient,
        check_dual_smoothness_convexity,
        check_quadratic_lower_bound,
        check_dual_descent_gap,
        check_dual_to_primal_conversion,
    ),
    "bisection": (check_bisection,),
    "oracles": (check_lp_matches_value_iteration, check_sandwich_bound, check_soft_vi_contraction),
}


def run_invariants(suites=None, seed=0):
    """
    Run the named suites (all by default) and return their results in order.
    """
    if suites is None:
        suites = list(SUITES)
    unknown = [name for name in suites if name not in SUITES]
    if unknown:
        raise InvalidArgumentError(
            "unknown invariant suite %s, expected one of %s" % (", ".join(unknown), ", ".join(SUITES))
        )
    results = []
    for name in suites:
        rng = np.random.default_rng(seed)
        for check in SUITES[name]:
            result = check(rng)
            result.details["suite"] = name
            logger.debug("%s: %s", name, result)
            if result.warnings:
                logger.warning("%s: %s flagged %s", name, result.name, "; ".join(result.warnings))
            results.append(result)
    return results
