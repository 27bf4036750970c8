"""
Exact policy evaluation for tabular CMDPs.

Every quantity here is obtained from one dense LU factorization of
(I - gamma P_pi), so results are exact up to machine precision.
"""

import logging

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import rel_entr

from .exceptions import InvalidArgumentError, SolverError
from .models import Policy, QTable, ValueTable, VisitationDistribution


logger = logging.getLogger(__name__)


def _check_reward(model, reward_table):
    reward_table = np.asarray(reward_table, dtype=float)
    if reward_table.shape != model.shape:
        raise InvalidArgumentError(
            "reward table must have shape %s, got %s" % (model.shape, reward_table.shape)
        )
    if not np.all(np.isfinite(reward_table)):
        raise InvalidArgumentError("reward table has non-finite entries")
    return reward_table


def _check_rule(model, rule):
    if rule.shape != model.shape:
        raise InvalidArgumentError("policy has shape %s, model has %s" % (rule.shape, model.shape))


def _require_policy(rule, what):
    if not isinstance(rule, Policy):
        raise InvalidArgumentError("%s is defined for soft-max policies only" % what)


def state_transition_matrix(model, rule):
    """
    P_pi(s, s') = sum_a pi(a|s) P(s'|s, a).
    """
    return np.einsum("sa,sat->st", rule.prob, model.transition)


def _factorize(model, rule):
    if not 0 <= model.gamma < 1:
        raise SolverError("gamma = %g is not a valid discount, evaluation is singular" % model.gamma)
    _check_rule(model, rule)
    system = np.eye(model.num_states) - model.gamma * state_transition_matrix(model, rule)
    return lu_factor(system, check_finite=False)


def _solve(factorization, rhs, trans=0):
    solution = lu_solve(factorization, rhs, trans=trans, check_finite=False)
    if not np.all(np.isfinite(solution)):
        raise SolverError("policy evaluation produced non-finite values")
    return solution


def one_step_lookahead(model, reward_table, values):
    """
    Q(s, a) = reward(s, a) + gamma sum_s' P(s'|s, a) V(s').
    """
    return reward_table + model.gamma * np.einsum("sat,t->sa", model.transition, values)


def evaluate_value(model, rule, reward_table):
    reward_table = _check_reward(model, reward_table)
    factorization = _factorize(model, rule)
    expected_reward = np.einsum("sa,sa->s", rule.prob, reward_table)
    return ValueTable(_solve(factorization, expected_reward))


def evaluate_q(model, rule, reward_table):
    reward_table = _check_reward(model, reward_table)
    value = evaluate_value(model, rule, reward_table)
    return QTable(one_step_lookahead(model, reward_table, value.v))


def discounted_visitation(model, rule):
    """
    d^T = (1 - gamma) rho^T (I - gamma P_pi)^{-1}, solved as a transposed system.
    """
    factorization = _factorize(model, rule)
    d = _solve(factorization, (1.0 - model.gamma) * model.initial_dist, trans=1)
    # the solve is exact up to rounding; clip the -1e-17 noise on unreachable states
    return VisitationDistribution(np.clip(d, 0.0, None))


def _entropy_reward(policy):
    return -policy.log_prob


def state_entropy(model, policy):
    """
    State-wise discounted entropy, i.e. the value of the reward -log pi(a|s).
    """
    _require_policy(policy, "the discounted entropy")
    return evaluate_value(model, policy, _entropy_reward(policy))


def discounted_entropy(model, policy):
    return state_entropy(model, policy).at(model.initial_dist)


def evaluate_soft_value(model, rule, reward_table, tau):
    """
    Entropy-regularized value V_tau^pi, the value of reward(s, a) - tau log pi(a|s).

    With tau = 0 this is `evaluate_value` and any decision rule is accepted.
    """
    if tau < 0:
        raise InvalidArgumentError("tau must be nonnegative, got %r" % tau)
    reward_table = _check_reward(model, reward_table)
    if tau == 0:
        return evaluate_value(model, rule, reward_table)
    _require_policy(rule, "the entropy-regularized value")
    return evaluate_value(model, rule, reward_table + tau * _entropy_reward(rule))


def evaluate_soft_q(model, rule, reward_table, tau):
    reward_table = _check_reward(model, reward_table)
    value = evaluate_soft_value(model, rule, reward_table, tau)
    return QTable(one_step_lookahead(model, reward_table, value.v))


def utility_values(model, rule):
    """
    Discounted utilities U_{g_i}^pi(rho), one per constraint.
    """
    if model.num_constraints == 0:
        return np.zeros(0)
    factorization = _factorize(model, rule)
    expected_utilities = np.einsum("sa,isa->si", rule.prob, model.utilities)
    values = _solve(factorization, expected_utilities)
    return model.initial_dist @ values


def constraint_violations(model, rule):
    """
    [b_i - U_{g_i}^pi(rho)]_+ for every constraint.
    """
    return np.maximum(model.thresholds - utility_values(model, rule), 0.0)


def softmax_policy_gradient(model, policy, reward_table):
    """
    Gradient of V^{pi_theta}(rho) with respect to the soft-max logits theta(s, a).
    """
    reward_table = _check_reward(model, reward_table)
    value = evaluate_value(model, policy, reward_table)
    q = QTable(one_step_lookahead(model, reward_table, value.v))
    d = discounted_visitation(model, policy).d
    return d[:, None] * policy.prob * q.advantage(value) / (1.0 - model.gamma)


def direct_policy_gradient(model, rule, reward_table):
    """
    Gradient of V^pi(rho) with respect to the table pi(a|s) itself.
    """
    q = evaluate_q(model, rule, reward_table)
    d = discounted_visitation(model, rule).d
    return d[:, None] * q.q / (1.0 - model.gamma)


def performance_difference(model, rule, other, reward_table):
    """
    Right-hand side of the performance difference identity for V^other(rho) - V^rule(rho).
    """
    q_other = evaluate_q(model, other, reward_table).q
    d = discounted_visitation(model, rule).d
    return float(np.sum(d[:, None] * (other.prob - rule.prob) * q_other) / (1.0 - model.gamma))


def kl_divergence(p, q, base=np.e, axis=None):
    """
    KL(p || q), in nats by default; pass base=2 for bits.

    Terms with p = 0 contribute nothing. Infinite when q = 0 < p.
    """
    divergence = np.sum(rel_entr(np.asarray(p, dtype=float), np.asarray(q, dtype=float)), axis=axis)
    return divergence / np.log(base)


def soft_suboptimality(model, policy, optimal_policy, tau):
    """
    (tau / (1 - gamma)) sum_s d^pi(s) KL(pi(.|s) || pi*(.|s)).

    Equals V_tau^*(rho) - V_tau^pi(rho) when `optimal_policy` is the
    regularized optimum.
    """
    _require_policy(policy, "the soft sub-optimality gap")
    d = discounted_visitation(model, policy).d
    per_state = kl_divergence(policy.prob, optimal_policy.prob, axis=1)
    return float(tau * np.dot(d, per_state) / (1.0 - model.gamma))


def policy_distance(rule, other):
    """
    Frobenius norm of the difference of the probability tables.
    """
    return float(np.linalg.norm(rule.prob - other.prob))
