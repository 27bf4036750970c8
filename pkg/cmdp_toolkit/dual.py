"""
Accelerated projected gradient descent on the entropy-regularized dual

    D(lambda) = max_pi V_tau^pi(rho) + lambda^T (U_g^pi(rho) - b)

with the inner maximization carried out by natural policy gradient.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .evaluation import (
    discounted_visitation,
    evaluate_q,
    evaluate_soft_value,
    evaluate_value,
    utility_values,
)
from .exceptions import InvalidArgumentError, SlaterConditionError
from .models import DecisionRule, Policy
from .npg import (
    NpgConfig,
    certified_log_error,
    gradient_accuracy_budget,
    npg_run,
    q_gap_bound,
    recovery_budget,
)
from .settings import cmdp_settings
from .signals import dual_step_completed


logger = logging.getLogger(__name__)


def slater_slack(model, rule):
    """
    xi_i = U_{g_i}^pi(rho) - b_i.
    """
    return utility_values(model, rule) - model.thresholds


def strict_slater_slack(model, rule):
    slack = slater_slack(model, rule)
    if np.any(slack <= 0):
        raise SlaterConditionError(
            "Slater policy is not strictly feasible, slack %s" % np.array2string(slack, precision=6),
            slack,
        )
    return slack


class DualBox:
    """
    The box [0, upper_1] x ... x [0, upper_n] of candidate multipliers.
    """

    def __init__(self, upper):
        upper = np.array(upper, dtype=float).reshape(-1)
        if not np.all(np.isfinite(upper)) or np.any(upper < 0):
            raise InvalidArgumentError("dual box bounds must be finite and nonnegative, got %s" % upper)
        upper.setflags(write=False)
        self.upper = upper

    @classmethod
    def from_slater(cls, model, slater_policy, tau):
        """
        Computable enlargement of the optimal-multiplier box,
        upper_i = (2 + 2 tau log|A|) / ((1 - gamma) xi_i).
        """
        slack = strict_slater_slack(model, slater_policy)
        numerator = 2.0 + 2.0 * tau * math.log(model.num_actions)
        return cls(numerator / ((1.0 - model.gamma) * slack))

    @property
    def num_constraints(self):
        return self.upper.shape[0]

    @property
    def total(self):
        return float(self.upper.sum())

    def contains(self, multiplier, tolerance=0.0):
        multiplier = np.asarray(multiplier, dtype=float)
        return bool(np.all(multiplier >= -tolerance) and np.all(multiplier <= self.upper + tolerance))

    def __repr__(self):
        return "<DualBox upper=%s>" % np.array2string(self.upper, precision=6)


@dataclass
class DualState:
    """
    Multiplier memory of the accelerated method: lambda^(t), lambda^(t-1) and t.
    """

    lambda_curr: np.ndarray
    lambda_prev: np.ndarray
    iteration: int = 0

    @property
    def momentum(self):
        t = self.iteration
        return (t - 1.0) / (t + 2.0)

    def extrapolate(self, box):
        return project_dual(self.lambda_curr + self.momentum * (self.lambda_curr - self.lambda_prev), box)

    def advance(self, multiplier):
        self.lambda_prev = self.lambda_curr
        self.lambda_curr = multiplier
        self.iteration += 1


@dataclass(frozen=True)
class Constants:
    ell: float
    ell_c: float
    c1: float
    c2: float
    d_hat: float

    def as_dict(self):
        return asdict(self)


def visitation_floor(model):
    """
    d_hat = (1 - gamma) min_s rho(s), a lower bound on every d_rho^pi(s).
    """
    return (1.0 - model.gamma) * float(model.initial_dist.min())


def value_lipschitz(model):
    return math.sqrt(model.num_actions) / (1.0 - model.gamma) ** 2


def dual_smoothness(model, tau, d_hat=None):
    """
    Smoothness factor ell of D on the optimal-multiplier box.
    """
    if d_hat is None:
        d_hat = visitation_floor(model)
    if not d_hat > 0:
        raise InvalidArgumentError("dual smoothness needs an initial distribution with full support")
    width = model.num_constraints * model.num_actions
    scale = 1.0 - model.gamma
    return 2.0 * math.log(2.0) * (width + scale**2 * math.sqrt(width)) / (tau * scale**3 * d_hat)


def compute_constants(model, slater_policy, tau):
    if not tau > 0:
        raise InvalidArgumentError("tau must be positive, got %r" % tau)
    if model.num_constraints == 0:
        raise InvalidArgumentError("the dual constants need at least one constraint")
    slack = strict_slater_slack(model, slater_policy)
    d_hat = visitation_floor(model)
    scale = 1.0 - model.gamma
    ell = dual_smoothness(model, tau, d_hat)
    c1 = math.sqrt(2.0 * scale * math.log(2.0) / (tau * d_hat))
    c2 = (2.0 + 2.0 * tau * math.log(model.num_actions)) / (scale * float(slack.min()))
    return Constants(ell=ell, ell_c=value_lipschitz(model), c1=c1, c2=c2, d_hat=d_hat)


def project_dual(multiplier, box):
    """
    Coordinate-wise median of {0, upper_i, lambda_i}.
    """
    return np.clip(np.asarray(multiplier, dtype=float), 0.0, box.upper)


def initial_multiplier(box, method=None, seed=None):
    if method is None:
        method = cmdp_settings.DUAL_INITIALIZATION
    if method == "zero":
        return np.zeros(box.num_constraints)
    if method == "random":
        if seed is None:
            seed = cmdp_settings.DUAL_INIT_SEED
        return np.random.default_rng(seed).uniform(0.0, box.upper)
    raise InvalidArgumentError("unknown dual initialization %r" % method)


class DualEvaluation(NamedTuple):
    value: float
    gradient: np.ndarray
    policy: Policy


def _evaluate_dual(model, multiplier, tau, warm_start_policy, inner_budget, stop_tol=None):
    multiplier = np.asarray(multiplier, dtype=float)
    if warm_start_policy is None:
        warm_start_policy = Policy.uniform(model.num_states, model.num_actions)
    config = NpgConfig(tau=tau, max_iters=inner_budget, stop_tol=stop_tol)
    policy, trace = npg_run(model, warm_start_policy, multiplier, config)
    soft_value = evaluate_soft_value(model, policy, model.reward, tau).at(model.initial_dist)
    gradient = utility_values(model, policy) - model.thresholds
    value = soft_value + float(np.dot(multiplier, gradient))
    return DualEvaluation(value, gradient, policy), trace.iterations, soft_value


def dual_value_and_gradient(model, multiplier, tau, warm_start_policy=None, inner_budget=1, stop_tol=None):
    """
    Inexact dual value D~(lambda), gradient U_g(rho) - b and the inner policy,
    from `inner_budget` NPG steps under r_lambda.
    """
    evaluation, _, _ = _evaluate_dual(model, multiplier, tau, warm_start_policy, inner_budget, stop_tol)
    return evaluation


def dual_hessian(model, multiplier, tau, policy):
    """
    Hessian of D at lambda given the regularized optimum `policy` = pi_lambda:
    (1 / ((1 - gamma) tau)) sum_s d(s) Cov_pi(Q_{g_i}(s, .), Q_{g_j}(s, .)).
    """
    n = model.num_constraints
    d = discounted_visitation(model, policy).d
    q = np.stack([evaluate_q(model, policy, model.utilities[i]).q for i in range(n)])
    centred = q - np.einsum("sa,isa->is", policy.prob, q)[:, :, None]
    covariance = np.einsum("s,sa,isa,jsa->ij", d, policy.prob, centred, centred)
    return covariance / ((1.0 - model.gamma) * tau)


def practical_step_size(model, tau):
    """
    1 / (n / (4 tau (1 - gamma)^3)), the reciprocal of the curvature bound
    that `dual_hessian` implies on the whole nonnegative orthant.
    """
    if model.num_constraints == 0:
        raise InvalidArgumentError("the dual step size needs at least one constraint")
    return 4.0 * tau * (1.0 - model.gamma) ** 3 / model.num_constraints


def gradient_error_allowance(model, log_error):
    """
    Bound on ||grad~ D - grad D|| when the inner log-policy error is `log_error`.
    """
    return math.sqrt(model.num_constraints) * model.num_actions * log_error / (1.0 - model.gamma) ** 2


def certified_inner_budget(model, tau, constants, box, horizon, max_delta=None):
    """
    Inner NPG budget for a T-step outer loop: gradient accuracy delta = ell / (T (T + 1)),
    optionally capped at `max_delta`.
    """
    delta = constants.ell / (horizon * (horizon + 1.0))
    if max_delta is not None:
        delta = min(delta, max_delta)
    return max(1, gradient_accuracy_budget(model, tau, box.total, delta))


@dataclass
class DualRecord:
    iteration: int
    multiplier: np.ndarray
    dual_value: float
    grad_norm: float
    max_violation: float
    soft_objective: float
    inner_iters: int
    wall_ms: float = 0.0
    flagged: bool = False

    def as_row(self):
        row = {"iter": self.iteration}
        for i, value in enumerate(self.multiplier):
            row["lambda_%d" % i] = float(value)
        row.update(
            {
                "dual_value": self.dual_value,
                "grad_norm": self.grad_norm,
                "max_violation": self.max_violation,
                "soft_objective": self.soft_objective,
                "inner_iters": self.inner_iters,
                "wall_ms": self.wall_ms,
            }
        )
        return row


@dataclass
class SolveTrace:
    records: List[DualRecord] = field(default_factory=list)
    final: Optional[DualRecord] = None
    allowance: float = 0.0
    step_size: float = 0.0

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def flagged(self):
        return [record.iteration for record in self.records if record.flagged]

    def as_rows(self):
        return [record.as_row() for record in self.records]


class DualDescentResult(NamedTuple):
    policy: Policy
    multiplier: np.ndarray
    trace: SolveTrace


def _record(model, iteration, multiplier, evaluation, soft_value, inner_iters, started):
    gradient = evaluation.gradient
    violation = float(np.max(np.maximum(-gradient, 0.0))) if gradient.size else 0.0
    wall_ms = (time.perf_counter() - started) * 1000.0 if started is not None else 0.0
    return DualRecord(
        iteration=iteration,
        multiplier=np.array(multiplier),
        dual_value=evaluation.value,
        grad_norm=float(np.linalg.norm(gradient)),
        max_violation=violation,
        soft_objective=soft_value,
        inner_iters=inner_iters,
        wall_ms=wall_ms,
    )


def accelerated_dual_descent(
    model,
    tau,
    box,
    constants,
    n1,
    inner_budget,
    recover_budget,
    step_size=None,
    initial=None,
    inner_stop_tol=None,
    record_wall_clock=False,
):
    """
    Accelerated gradient projection on the dual with warm-started NPG inner solves.

    For t = 0, ..., n1 - 1::

        mu(t)      = P(lambda(t) + beta_t (lambda(t) - lambda(t-1))),  beta_t = (t - 1) / (t + 2)
        lambda(t+1) = P(mu(t) - alpha grad~ D(mu(t)))

    with alpha = 1 / ell unless `step_size` overrides it. The extrapolation
    mu(t) is projected onto the box since the Lagrangian reward needs
    lambda >= 0. After the loop the policy is recovered at lambda(n1) with
    `recover_budget` NPG steps. Increases of D~ beyond the inexactness
    allowance are flagged in the trace, not treated as errors.
    """
    if n1 < 1:
        raise InvalidArgumentError("n1 must be at least 1, got %r" % n1)
    if model.num_constraints != box.num_constraints:
        raise InvalidArgumentError(
            "dual box has %d bounds for %d constraints" % (box.num_constraints, model.num_constraints)
        )
    alpha = 1.0 / constants.ell
    if step_size is not None:
        logger.warning("Overriding the theoretical dual step size 1/ell = %.3g with %.3g", alpha, step_size)
        alpha = float(step_size)

    start = project_dual(initial_multiplier(box) if initial is None else initial, box)
    state = DualState(start, start.copy())
    log_error = certified_log_error(q_gap_bound(model, tau, box.total), tau, model.gamma, inner_budget)
    trace = SolveTrace(allowance=2.0 * gradient_error_allowance(model, log_error), step_size=alpha)
    started = time.perf_counter() if record_wall_clock else None

    warm = None
    previous_value = None
    for t in range(n1):
        extrapolated = state.extrapolate(box)
        evaluation, inner_iters, soft_value = _evaluate_dual(
            model, extrapolated, tau, warm, inner_budget, inner_stop_tol
        )
        warm = evaluation.policy
        record = _record(model, t, extrapolated, evaluation, soft_value, inner_iters, started)
        if previous_value is not None and evaluation.value > previous_value + trace.allowance:
            record.flagged = True
            logger.info(
                "dual value increased at iteration %d: %.15g -> %.15g", t, previous_value, evaluation.value
            )
        previous_value = evaluation.value
        trace.records.append(record)
        dual_step_completed.send(sender=DualRecord, record=record)
        state.advance(project_dual(extrapolated - alpha * evaluation.gradient, box))

    final, inner_iters, soft_value = _evaluate_dual(
        model, state.lambda_curr, tau, warm, recover_budget, inner_stop_tol
    )
    trace.final = _record(model, n1, state.lambda_curr, final, soft_value, inner_iters, started)
    logger.info(
        "accelerated dual descent: %d iterations, D~=%.10g, lambda=%s",
        n1,
        final.value,
        np.array2string(state.lambda_curr, precision=6),
    )
    return DualDescentResult(final.policy, np.array(state.lambda_curr), trace)


@dataclass
class StandardSolveReport:
    epsilon: float
    tau: float
    value: float
    utilities: List[float]
    violations: List[float]
    max_violation: float
    duality_gap_allowance: float
    outer_iterations: int = 0
    inner_budget: int = 0
    recover_budget: int = 0
    step_size: Optional[float] = None
    horizon_capped: bool = False
    multiplier: List[float] = field(default_factory=list)
    constants: Optional[dict] = None

    def as_dict(self):
        return asdict(self)


def _report(model, rule, epsilon, tau, **extra):
    utilities = utility_values(model, rule)
    violations = np.maximum(model.thresholds - utilities, 0.0)
    allowance = tau * math.log(model.num_actions) / (1.0 - model.gamma)
    return StandardSolveReport(
        epsilon=epsilon,
        tau=tau,
        value=evaluate_value(model, rule, model.reward).at(model.initial_dist),
        utilities=utilities.tolist(),
        violations=violations.tolist(),
        max_violation=float(violations.max()) if violations.size else 0.0,
        duality_gap_allowance=allowance,
        **extra,
    )


def outer_horizon(constants, box, epsilon):
    """
    Smallest T for which ell_c C1 C2 sqrt(eps0) <= epsilon / 2, with
    eps0 = 2 ell (||lambda(0) - lambda*|| + 1)^2 / (T + 1)^2 and lambda(0) = 0.
    """
    target = (epsilon / (2.0 * constants.ell_c * constants.c1 * constants.c2)) ** 2
    radius = float(np.linalg.norm(box.upper)) + 1.0
    return max(1, math.ceil(math.sqrt(2.0 * constants.ell * radius**2 / target) - 1.0))


def standard_cmdp_solve(model, epsilon, slater_policy=None, max_outer_iterations=None, step_size=None):
    """
    Solve the unregularized CMDP to accuracy O(epsilon) through the regularized dual,
    with tau = (1 - gamma) epsilon / (4 log|A|).

    `slater_policy` defaults to the uniform policy. When the outer horizon
    dictated by epsilon exceeds `max_outer_iterations` it is capped, and the
    practical step size is used unless `step_size` is given.
    """
    if not epsilon > 0:
        raise InvalidArgumentError("epsilon must be positive, got %r" % epsilon)
    if model.num_actions == 1:
        only = Policy.uniform(model.num_states, 1)
        return only, _report(model, only, epsilon, 0.0)

    tau = (1.0 - model.gamma) * epsilon / (4.0 * math.log(model.num_actions))
    stop_tol = cmdp_settings.NPG_STOP_TOLERANCE
    if model.num_constraints == 0:
        budget = recovery_budget(model, tau, 0.0, epsilon / (2.0 * value_lipschitz(model)))
        policy, _ = npg_run(
            model,
            Policy.uniform(model.num_states, model.num_actions),
            np.zeros(0),
            NpgConfig(tau=tau, max_iters=budget, stop_tol=stop_tol),
        )
        return policy, _report(model, policy, epsilon, tau, recover_budget=budget)

    if slater_policy is None:
        slater_policy = DecisionRule(np.full(model.shape, 1.0 / model.num_actions))
    constants = compute_constants(model, slater_policy, tau)
    box = DualBox.from_slater(model, slater_policy, tau)

    if max_outer_iterations is None:
        max_outer_iterations = cmdp_settings.MAX_OUTER_ITERATIONS
    horizon = outer_horizon(constants, box, epsilon)
    capped = horizon > max_outer_iterations
    if capped:
        logger.warning("outer horizon %d capped at %d iterations", horizon, max_outer_iterations)
        horizon = max_outer_iterations
        if step_size is None:
            step_size = practical_step_size(model, tau)

    inner_budget = certified_inner_budget(model, tau, constants, box, horizon, max_delta=epsilon / 4.0)
    recover = max(1, recovery_budget(model, tau, box.total, epsilon / (2.0 * constants.ell_c)))
    result = accelerated_dual_descent(
        model,
        tau,
        box,
        constants,
        horizon,
        inner_budget,
        recover,
        step_size=step_size,
        inner_stop_tol=stop_tol,
    )
    report = _report(
        model,
        result.policy,
        epsilon,
        tau,
        outer_iterations=horizon,
        inner_budget=inner_budget,
        recover_budget=recover,
        step_size=result.trace.step_size,
        horizon_capped=capped,
        multiplier=result.multiplier.tolist(),
        constants=constants.as_dict(),
    )
    return result.policy, report
