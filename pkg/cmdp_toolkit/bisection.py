"""
Dual bisection for CMDPs with a single constraint.

D is convex in the scalar multiplier, so the sign of the (inexact) gradient
U_g(rho) - b tells which half of the current interval holds the minimizer.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .dual import _evaluate_dual
from .exceptions import InvalidArgumentError
from .models import Policy
from .npg import NpgConfig, gradient_accuracy_budget, npg_run
from .signals import bisection_step_completed


logger = logging.getLogger(__name__)

# extra halvings allowed past the theoretical bound before giving up
_SAFETY_ITERATIONS = 64


@dataclass
class BisectionConfig:
    epsilon: float
    inner_budget_n1: int
    recover_budget_n2: int
    interval: Optional[Tuple[float, float]] = None
    stop_tol: Optional[float] = None
    max_iters: Optional[int] = None

    def clean(self, constants=None):
        if not self.epsilon > 0:
            raise InvalidArgumentError("epsilon must be positive, got %r" % self.epsilon)
        if self.inner_budget_n1 < 1 or self.recover_budget_n2 < 1:
            raise InvalidArgumentError("inner and recovery budgets must be positive integers")
        interval = self.interval
        if interval is None:
            if constants is None:
                raise InvalidArgumentError("an interval or the dual constants are required")
            interval = (0.0, constants.c2)
        lower, upper = float(interval[0]), float(interval[1])
        if not 0 <= lower < upper:
            raise InvalidArgumentError("interval must satisfy 0 <= lower < upper, got %s" % (interval,))
        return lower, upper


@dataclass(frozen=True)
class BisectionRecord:
    iteration: int
    p: float
    q: float
    midpoint: float
    grad_estimate: float
    inner_iters: int

    def as_row(self):
        return {
            "iter": self.iteration,
            "p": self.p,
            "q": self.q,
            "midpoint": self.midpoint,
            "grad_estimate": self.grad_estimate,
            "inner_iters": self.inner_iters,
        }


@dataclass
class BisectionTrace:
    records: List[BisectionRecord] = field(default_factory=list)
    short_circuit: Optional[str] = None
    final_interval: Optional[Tuple[float, float]] = None
    final_gradient: Optional[float] = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def outer_iterations(self):
        return len(self.records)

    def as_rows(self):
        return [record.as_row() for record in self.records]


class BisectionResult(NamedTuple):
    policy: Policy
    multiplier: float
    trace: BisectionTrace


def _require_single_constraint(model):
    if model.num_constraints != 1:
        raise InvalidArgumentError(
            "bisection requires exactly one constraint, got %d" % model.num_constraints
        )


def _grad_sub(model, multiplier, warm_policy, tau, inner_budget, stop_tol=None):
    evaluation, inner_iters, _ = _evaluate_dual(
        model, np.array([multiplier], dtype=float), tau, warm_policy, inner_budget, stop_tol
    )
    return float(evaluation.gradient[0]), evaluation.policy, inner_iters


def grad_sub(model, multiplier, warm_policy, tau, inner_budget, stop_tol=None):
    """
    Gradient estimate U_g^{pi~}(rho) - b at a scalar multiplier, plus the inner policy.
    """
    _require_single_constraint(model)
    gradient, policy, _ = _grad_sub(model, multiplier, warm_policy, tau, inner_budget, stop_tol)
    return gradient, policy


def bisection_budget(constants, epsilon):
    """
    ceil(log2(ell C2 / epsilon)) outer loops, clamped at zero.
    """
    return max(0, math.ceil(math.log2(constants.ell * constants.c2 / epsilon)))


def bisection_inner_budget(model, tau, constants, epsilon):
    """
    Inner NPG budget making each gradient estimate epsilon/2-accurate.
    """
    return gradient_accuracy_budget(model, tau, constants.c2, epsilon / 2.0)


def bisection_solve(model, tau, config, constants=None):
    """
    Bisection on [p, q] = config.interval (default [0, C2]).

    If the gradient at p is already nonnegative, p is returned; if it is
    nonpositive at q, q is returned. Otherwise the interval is halved towards
    the sign change until |grad~ D(midpoint)| < epsilon, and the policy is
    recovered at the final multiplier with `recover_budget_n2` NPG steps.
    Each midpoint solve is warm-started from the previous one.
    """
    _require_single_constraint(model)
    p, q = config.clean(constants)
    epsilon = config.epsilon
    trace = BisectionTrace()
    warm = Policy.uniform(model.num_states, model.num_actions)

    gradient_p, policy_p, _ = _grad_sub(model, p, warm, tau, config.inner_budget_n1, config.stop_tol)
    if gradient_p >= 0:
        trace.short_circuit = "lower"
        trace.final_interval = (p, q)
        trace.final_gradient = gradient_p
        return _recover(model, tau, config, p, policy_p, trace)
    gradient_q, policy_q, _ = _grad_sub(model, q, policy_p, tau, config.inner_budget_n1, config.stop_tol)
    if gradient_q <= 0:
        trace.short_circuit = "upper"
        trace.final_interval = (p, q)
        trace.final_gradient = gradient_q
        return _recover(model, tau, config, q, policy_q, trace)

    bound = bisection_budget(constants, epsilon) if constants is not None else None
    max_iters = config.max_iters
    if max_iters is None:
        max_iters = (bound or 0) + _SAFETY_ITERATIONS
    warm = policy_p
    iteration = 0
    while True:
        iteration += 1
        midpoint = 0.5 * (p + q)
        gradient, warm, inner_iters = _grad_sub(
            model, midpoint, warm, tau, config.inner_budget_n1, config.stop_tol
        )
        record = BisectionRecord(iteration, p, q, midpoint, gradient, inner_iters)
        trace.records.append(record)
        bisection_step_completed.send(sender=BisectionRecord, record=record)
        logger.debug("bisection %d: [%.12g, %.12g] grad=%.6g", iteration, p, q, gradient)
        if abs(gradient) < epsilon:
            break
        if gradient >= epsilon:
            q = midpoint
        else:
            p = midpoint
        if iteration >= max_iters:
            logger.warning(
                "bisection stopped after %d iterations with |grad| = %.3g", iteration, abs(gradient)
            )
            break
    if bound is not None and iteration > bound:
        logger.warning("bisection used %d outer iterations, above the bound %d", iteration, bound)
    trace.final_interval = (p, q)
    trace.final_gradient = gradient
    return _recover(model, tau, config, midpoint, warm, trace)


def _recover(model, tau, config, multiplier, warm, trace):
    config_n2 = NpgConfig(tau=tau, max_iters=config.recover_budget_n2, stop_tol=config.stop_tol)
    policy, _ = npg_run(model, warm, np.array([multiplier]), config_n2)
    logger.info("bisection finished at lambda=%.12g after %d outer iterations", multiplier, len(trace))
    return BisectionResult(policy, float(multiplier), trace)
