"""
Entropy-regularized natural policy gradient under the soft-max parameterization.

The NPG step has the closed form

    log pi'(a|s) = (1 - eta tau / (1 - gamma)) log pi(a|s) + eta / (1 - gamma) Q_tau^pi(s, a) - log Z(s)

which is evaluated in log space so that small tau does not underflow.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .evaluation import evaluate_soft_value, one_step_lookahead
from .exceptions import InvalidArgumentError
from .models import Policy
from .settings import cmdp_settings


logger = logging.getLogger(__name__)

# guards the ceiling against rounding when the log argument is exactly representable
_CEIL_SLACK = 1e-9


@dataclass
class NpgConfig:
    tau: float
    eta: Optional[float] = None
    max_iters: int = 1
    stop_tol: Optional[float] = None

    def resolved_eta(self, gamma):
        if self.eta is None:
            return (1.0 - gamma) / self.tau
        return self.eta

    def clean(self, gamma):
        if not self.tau > 0:
            raise InvalidArgumentError("tau must be positive, got %r" % self.tau)
        if self.max_iters < 0:
            raise InvalidArgumentError("max_iters must be nonnegative, got %r" % self.max_iters)
        if self.stop_tol is not None and not self.stop_tol > 0:
            raise InvalidArgumentError("stop_tol must be positive, got %r" % self.stop_tol)
        eta = self.resolved_eta(gamma)
        largest = (1.0 - gamma) / self.tau
        if not 0 < eta <= largest * (1 + 1e-12):
            raise InvalidArgumentError(
                "eta must lie in (0, (1-gamma)/tau] = (0, %.12g], got %r" % (largest, eta)
            )
        return eta


@dataclass(frozen=True)
class NpgRecord:
    """
    One NPG iteration. `soft_value` is V_{lambda,tau}(rho) of the policy the
    step started from; `log_change` and `error` describe the policy it produced.
    """

    iteration: int
    soft_value: float
    log_change: float
    error: Optional[float] = None

    def as_row(self):
        return {
            "iter": self.iteration,
            "soft_value": self.soft_value,
            "log_change": self.log_change,
            "error": self.error if self.error is not None else "",
        }


@dataclass
class NpgTrace:
    records: List[NpgRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def iterations(self):
        return len(self.records)

    @property
    def errors(self):
        return [record.error for record in self.records]

    @property
    def soft_values(self):
        return [record.soft_value for record in self.records]

    def monotonicity_violations(self, tolerance=None):
        if tolerance is None:
            tolerance = cmdp_settings.MONOTONICITY_TOLERANCE
        values = self.soft_values
        return [
            self.records[t].iteration for t in range(1, len(values)) if values[t] < values[t - 1] - tolerance
        ]

    def as_rows(self):
        return [record.as_row() for record in self.records]


def lagrangian_reward(model, multiplier):
    """
    r_lambda(s, a) = r(s, a) + sum_i lambda_i g_i(s, a).
    """
    multiplier = np.asarray(multiplier, dtype=float).reshape(-1)
    if multiplier.shape[0] != model.num_constraints:
        raise InvalidArgumentError(
            "expected %d multipliers, got %d" % (model.num_constraints, multiplier.shape[0])
        )
    if not np.all(np.isfinite(multiplier)) or np.any(multiplier < 0):
        raise InvalidArgumentError("multipliers must be finite and nonnegative, got %s" % multiplier)
    if model.num_constraints == 0:
        return np.array(model.reward)
    return model.reward + np.einsum("i,isa->sa", multiplier, model.utilities)


def _npg_update(model, policy, reward_table, tau, eta):
    value = evaluate_soft_value(model, policy, reward_table, tau)
    q = one_step_lookahead(model, reward_table, value.v)
    scale = 1.0 - model.gamma
    logits = (1.0 - eta * tau / scale) * policy.log_prob + (eta / scale) * q
    return Policy.from_logits(logits), value.at(model.initial_dist)


def npg_step(model, policy, multiplier, config):
    eta = config.clean(model.gamma)
    reward_table = lagrangian_reward(model, multiplier)
    new_policy, _ = _npg_update(model, policy, reward_table, config.tau, eta)
    return new_policy


def npg_run(model, init_policy, multiplier, config, reference_policy=None):
    """
    Run `config.max_iters` NPG steps, or fewer when the sup-norm change of the
    log-policy drops to `config.stop_tol`.

    When `reference_policy` is given, every record carries the sup-norm
    log-policy error of the produced iterate against it.
    """
    eta = config.clean(model.gamma)
    reward_table = lagrangian_reward(model, multiplier)
    tolerance = cmdp_settings.MONOTONICITY_TOLERANCE
    trace = NpgTrace()
    policy = init_policy
    previous_value = None
    for t in range(config.max_iters):
        new_policy, soft_value = _npg_update(model, policy, reward_table, config.tau, eta)
        log_change = float(np.max(np.abs(new_policy.log_prob - policy.log_prob)))
        error = None
        if reference_policy is not None:
            error = float(np.max(np.abs(reference_policy.log_prob - new_policy.log_prob)))
        trace.records.append(NpgRecord(t + 1, soft_value, log_change, error))
        if previous_value is not None and soft_value < previous_value - tolerance:
            logger.warning(
                "NPG soft value decreased at iteration %d: %.15g -> %.15g", t + 1, previous_value, soft_value
            )
        previous_value = soft_value
        policy = new_policy
        if config.stop_tol is not None and log_change <= config.stop_tol:
            break
    logger.debug("NPG finished after %d iterations", len(trace))
    return policy, trace


def npg_iteration_budget(q_gap_bound, epsilon, tau, gamma):
    """
    Number of NPG steps at eta = (1 - gamma) / tau after which the sup-norm
    log-policy error is at most `epsilon`, given a bound on ||Q* - Q^{pi_0}||.
    """
    if not (q_gap_bound > 0 and epsilon > 0 and tau > 0):
        raise InvalidArgumentError("q_gap_bound, epsilon and tau must be positive")
    if not 0 <= gamma < 1:
        raise InvalidArgumentError("gamma must lie in [0, 1), got %r" % gamma)
    iterations = math.log(2.0 * q_gap_bound / (epsilon * tau)) / (1.0 - gamma)
    return max(0, math.ceil(iterations - _CEIL_SLACK))


def q_gap_bound(model, tau, multiplier_mass):
    """
    Computable bound (1 + mass + tau log|A|) / (1 - gamma) on ||Q*_tau - Q_tau^{pi_0}||
    for Lagrangian rewards with sum_i lambda_i <= mass.
    """
    return (1.0 + multiplier_mass + tau * math.log(model.num_actions)) / (1.0 - model.gamma)


def gradient_accuracy_budget(model, tau, multiplier_mass, delta):
    """
    Inner NPG budget after which the estimated dual gradient is delta-accurate.
    """
    if model.num_constraints == 0:
        return 0
    scale = math.sqrt(model.num_constraints) * model.num_actions / (1.0 - model.gamma) ** 2
    return npg_iteration_budget(q_gap_bound(model, tau, multiplier_mass), delta / scale, tau, model.gamma)


def recovery_budget(model, tau, multiplier_mass, epsilon):
    """
    Inner NPG budget after which the recovered policy is within `epsilon` of
    pi_lambda in Frobenius norm.
    """
    scale = math.sqrt(model.num_states * model.num_actions)
    return npg_iteration_budget(q_gap_bound(model, tau, multiplier_mass), epsilon / scale, tau, model.gamma)


def certified_log_error(q_gap, tau, gamma, iterations):
    """
    Sup-norm log-policy error guaranteed after `iterations` steps at eta = (1 - gamma) / tau.
    """
    return 2.0 * q_gap * gamma ** max(iterations - 1, 0) / tau
