"""
Independent ground-truth computations.

Nothing in here is used by the solvers themselves; these routines exist to
certify them. Soft value iteration in particular never calls into the NPG code.
"""

import logging
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .dual import dual_smoothness
from .evaluation import one_step_lookahead, state_transition_matrix
from .exceptions import InvalidArgumentError
from .models import DecisionRule, Policy, ValueTable
from .npg import lagrangian_reward
from .settings import MIN_GRID_POINTS, cmdp_settings


logger = logging.getLogger(__name__)


def truncated_rollout_value(model, rule, reward_table, horizon):
    """
    sum_{t < horizon} gamma^t rho^T P_pi^t r_pi, by explicit matrix-vector recursion.
    """
    if horizon < 0:
        raise InvalidArgumentError("horizon must be nonnegative, got %r" % horizon)
    transition = state_transition_matrix(model, rule)
    expected_reward = np.einsum("sa,sa->s", rule.prob, reward_table)
    distribution = np.array(model.initial_dist)
    total = 0.0
    discount = 1.0
    for _ in range(horizon):
        total += discount * float(distribution @ expected_reward)
        distribution = distribution @ transition
        discount *= model.gamma
    return total


def truncated_visitation(model, rule, horizon):
    """
    (1 - gamma) sum_{t < horizon} gamma^t rho^T P_pi^t.
    """
    transition = state_transition_matrix(model, rule)
    distribution = np.array(model.initial_dist)
    total = np.zeros(model.num_states)
    discount = 1.0
    for _ in range(horizon):
        total += discount * distribution
        distribution = distribution @ transition
        discount *= model.gamma
    return (1.0 - model.gamma) * total


def soft_bellman_backup(model, reward_table, tau, values):
    """
    V(s) <- tau log sum_a exp((reward(s, a) + gamma E V(s')) / tau).
    """
    q = one_step_lookahead(model, reward_table, values)
    return tau * logsumexp(q / tau, axis=1)


def soft_value_iteration(model, reward_table, tau, tol=None, initial_values=None, max_iters=None):
    """
    Iterate the soft Bellman backup until the sup-norm change is at most
    tol (1 - gamma) / gamma, so that ||V - V*|| <= tol.

    Returns the optimal soft values and pi*(a|s) proportional to exp(Q*(s, a) / tau).
    """
    if not tau > 0:
        raise InvalidArgumentError("tau must be positive, got %r" % tau)
    if tol is None:
        tol = cmdp_settings.SOFT_VI_TOLERANCE
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive, got %r" % tol)
    if max_iters is None:
        max_iters = cmdp_settings.SOFT_VI_MAX_ITERATIONS
    reward_table = np.asarray(reward_table, dtype=float)
    values = np.zeros(model.num_states) if initial_values is None else np.array(initial_values, dtype=float)

    if model.gamma == 0:
        threshold = np.inf
    else:
        threshold = tol * (1.0 - model.gamma) / model.gamma
    iterations = 0
    while True:
        updated = soft_bellman_backup(model, reward_table, tau, values)
        iterations += 1
        change = np.max(np.abs(updated - values))
        values = updated
        if change <= threshold:
            break
        if iterations >= max_iters:
            logger.warning("soft value iteration stopped at %d iterations, change %.3g", iterations, change)
            break
    logger.debug("soft value iteration converged in %d iterations", iterations)
    q = one_step_lookahead(model, reward_table, values)
    return ValueTable(values), Policy.from_logits(q / tau)


def value_iteration(model, reward_table, tol=None, max_iters=None):
    """
    Unregularized optimal values and a greedy deterministic decision rule.
    """
    if tol is None:
        tol = cmdp_settings.SOFT_VI_TOLERANCE
    if max_iters is None:
        max_iters = cmdp_settings.SOFT_VI_MAX_ITERATIONS
    reward_table = np.asarray(reward_table, dtype=float)
    values = np.zeros(model.num_states)
    threshold = np.inf if model.gamma == 0 else tol * (1.0 - model.gamma) / model.gamma
    for _ in range(max_iters):
        updated = one_step_lookahead(model, reward_table, values).max(axis=1)
        change = np.max(np.abs(updated - values))
        values = updated
        if change <= threshold:
            break
    else:
        logger.warning("value iteration stopped at %d iterations", max_iters)
    q = one_step_lookahead(model, reward_table, values)
    return ValueTable(values), DecisionRule.deterministic(q.argmax(axis=1), model.num_actions)


class GridSearchResult(NamedTuple):
    lambda_star: np.ndarray
    dual_value: float
    certificate: dict


def _dual_value_by_soft_vi(model, multiplier, tau, warm_values):
    reward_table = lagrangian_reward(model, multiplier)
    values, _ = soft_value_iteration(model, reward_table, tau, initial_values=warm_values)
    return values.at(model.initial_dist) - float(np.dot(multiplier, model.thresholds)), values.v


def dual_grid_search(model, tau, box, resolution, points_per_axis=None):
    """
    Minimize the exact dual D(lambda) = max_pi V_{lambda,tau}^pi(rho) - lambda^T b
    over the box on uniform grids.

    The first grid spans the whole box; each further level is a uniform grid
    over the cells adjacent to the current minimizer, until the spacing
    reaches `resolution`. For n = 1 convexity keeps the minimizer inside the
    refined window; for n = 2 the refinement is a heuristic.
    The certificate holds the neighbouring grid values at the final spacing.
    """
    n = model.num_constraints
    if n > 2:
        raise InvalidArgumentError("dual grid search supports at most 2 constraints, got %d" % n)
    if not resolution > 0:
        raise InvalidArgumentError("resolution must be positive, got %r" % resolution)
    if points_per_axis is None:
        points_per_axis = cmdp_settings.GRID_POINTS_PER_AXIS
    if points_per_axis < MIN_GRID_POINTS:
        raise InvalidArgumentError(
            "points_per_axis must be at least %d, got %r" % (MIN_GRID_POINTS, points_per_axis)
        )

    upper = np.asarray(box.upper, dtype=float)
    if n == 0:
        value, _ = _dual_value_by_soft_vi(model, np.zeros(0), tau, None)
        return GridSearchResult(np.zeros(0), value, {"evaluations": 1, "levels": 0, "neighbours": []})

    lower_edge = np.zeros(n)
    upper_edge = upper.copy()
    cache = {}
    warm = None
    levels = 0
    best = None
    while True:
        levels += 1
        spacing = np.maximum(upper_edge - lower_edge, 0.0) / (points_per_axis - 1)
        axes = [np.linspace(lower_edge[i], upper_edge[i], points_per_axis) for i in range(n)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        for point in mesh:
            key = tuple(np.round(point, 15))
            if key not in cache:
                cache[key], warm = _dual_value_by_soft_vi(model, point, tau, warm)
            if best is None or cache[key] < cache[best]:
                best = key
        if np.all(spacing <= resolution):
            break
        centre = np.array(best)
        lower_edge = np.maximum(centre - spacing, 0.0)
        upper_edge = np.minimum(centre + spacing, upper)

    lambda_star = np.array(best)
    neighbours = []
    for i in range(n):
        for sign in (-1.0, 1.0):
            point = lambda_star.copy()
            point[i] += sign * spacing[i]
            if 0.0 <= point[i] <= upper[i]:
                value, warm = _dual_value_by_soft_vi(model, point, tau, warm)
                neighbours.append({"lambda": point.tolist(), "value": value})
    certificate = {
        "resolution": float(resolution),
        "spacing": spacing.tolist(),
        "levels": levels,
        "evaluations": len(cache),
        "neighbours": neighbours,
    }
    if model.initial_dist.min() > 0:
        certificate["error_bound"] = dual_smoothness(model, tau) * float(np.max(spacing)) ** 2 / 2.0
    logger.debug(
        "dual grid search: lambda*=%s D*=%.15g after %d evaluations", lambda_star, cache[best], len(cache)
    )
    return GridSearchResult(lambda_star, cache[best], certificate)


class OccupancyMeasure:
    """
    Discounted state-action occupancy mu(s, a), a distribution over pairs.
    """

    def __init__(self, mu):
        self.mu = np.array(mu, dtype=float)
        self.mu.setflags(write=False)

    @property
    def state_marginal(self):
        return self.mu.sum(axis=1)

    def decision_rule(self, tolerance=1e-12):
        """
        pi(a|s) = mu(s, a) / sum_a mu(s, a); uniform on states with zero marginal.
        """
        marginal = self.state_marginal
        num_actions = self.mu.shape[1]
        prob = np.full(self.mu.shape, 1.0 / num_actions)
        visited = marginal > tolerance
        prob[visited] = self.mu[visited] / marginal[visited, None]
        return DecisionRule(prob)

    def value(self, reward_table, gamma):
        return float(np.sum(self.mu * reward_table) / (1.0 - gamma))

    def flow_residual(self, model):
        """
        Largest violation of sum_a mu(s', a) = (1 - gamma) rho(s') + gamma sum_{s,a} P(s'|s, a) mu(s, a).
        """
        inflow = (1.0 - model.gamma) * model.initial_dist + model.gamma * np.einsum(
            "sat,sa->t", model.transition, self.mu
        )
        return float(np.max(np.abs(self.state_marginal - inflow)))


class LPSolution(NamedTuple):
    occupancy: OccupancyMeasure
    policy: DecisionRule
    value: float


def occupancy_lp_solve(model):
    """
    Solve the unregularized CMDP as a linear program over occupancy measures.

    Columns are mu(s, a) followed by one surplus variable per constraint, so
    that sum mu g_i - surplus_i = (1 - gamma) b_i.
    """
    num_states, num_actions = model.shape
    n = model.num_constraints
    pairs = num_states * num_actions
    gamma = model.gamma

    # flow rows: sum_a mu(s', a) - gamma sum_{s,a} P(s'|s,a) mu(s,a) = (1 - gamma) rho(s')
    flow = np.zeros((num_states, pairs + n))
    for s in range(num_states):
        flow[s, s * num_actions : (s + 1) * num_actions] = 1.0
    flow[:, :pairs] -= gamma * model.transition.reshape(pairs, num_states).T

    constraints = np.zeros((n, pairs + n))
    constraints[:, :pairs] = model.utilities.reshape(n, pairs)
    constraints[:, pairs:] = -np.eye(n)

    A_eq = np.vstack([flow, constraints])
    b_eq = np.concatenate([(1.0 - gamma) * model.initial_dist, (1.0 - gamma) * model.thresholds])
    c = np.concatenate([model.reward.reshape(pairs), np.zeros(n)])

    solver = cmdp_settings.LP_SOLVER_CLASS()
    x = solver.solve(c, A_eq, b_eq)
    occupancy = OccupancyMeasure(x[:pairs].reshape(num_states, num_actions))
    value = occupancy.value(model.reward, gamma)
    logger.debug("occupancy LP value %.15g", value)
    return LPSolution(occupancy, occupancy.decision_rule(), value)


def central_difference(func, x, step=None):
    """
    Central finite-difference gradient of a scalar function.
    """
    if step is None:
        step = cmdp_settings.FINITE_DIFFERENCE_STEP
    x = np.array(x, dtype=float)
    gradient = np.zeros(x.shape)
    for index in np.ndindex(*x.shape):
        forward = x.copy()
        backward = x.copy()
        forward[index] += step
        backward[index] -= step
        gradient[index] = (func(forward) - func(backward)) / (2.0 * step)
    return gradient
