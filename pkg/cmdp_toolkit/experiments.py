"""
Declarative experiment runs.

An experiment config is a JSON object mirroring `ExperimentConfig`. A run
writes ``trace.csv``, ``summary.json``, ``params.json`` and ``policy.json``
into its output directory. Unless wall-clock recording is requested, reruns
of the same config produce byte-identical traces.
"""

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple, Optional, Tuple

import numpy as np
from django.core.exceptions import ValidationError
from scipy import stats

from .bisection import BisectionConfig, bisection_budget, bisection_inner_budget, bisection_solve
from .dual import (
    DualBox,
    accelerated_dual_descent,
    certified_inner_budget,
    compute_constants,
    initial_multiplier,
    outer_horizon,
    practical_step_size,
    slater_slack,
    standard_cmdp_solve,
)
from .evaluation import evaluate_soft_value, evaluate_value, utility_values
from .exceptions import RateFitError
from .formats import dump_policy, load_model, load_policy, read_json, write_json
from .generators import gen_gridworld, gen_random_cmdp
from .models import DecisionRule
from .npg import recovery_budget
from .oracles import dual_grid_search, occupancy_lp_solve
from .settings import cmdp_settings
from .signals import bisection_step_completed, dual_step_completed


logger = logging.getLogger(__name__)

SOLVER_ALIASES = {
    "dual": "dual",
    "dual-descent": "dual",
    "bisect": "bisect",
    "bisection": "bisect",
    "standard": "standard",
    "standard-cmdp": "standard",
}
GENERATOR_FIELDS = {
    "random": ("seed", "num_states", "num_actions", "n_constraints", "gamma"),
    "gridworld": ("width", "height", "gamma"),
}
RATE_MODELS = ("power", "linear-log")


def log_dual_step(sender, record, **kwargs):
    logger.debug(
        "dual step %d: D~=%.12g |grad|=%.3g violation=%.3g",
        record.iteration,
        record.dual_value,
        record.grad_norm,
        record.max_violation,
    )


def log_bisection_step(sender, record, **kwargs):
    logger.debug(
        "bisection step %d: midpoint=%.12g grad=%.3g", record.iteration, record.midpoint, record.grad_estimate
    )


dual_step_completed.connect(log_dual_step, dispatch_uid="cmdp_toolkit.experiments.log_dual_step")
bisection_step_completed.connect(
    log_bisection_step, dispatch_uid="cmdp_toolkit.experiments.log_bisection_step"
)


@dataclass
class ExperimentConfig:
    solver: str
    instance: dict
    tau: Optional[float] = None
    epsilon: Optional[float] = None
    outer_iterations: Optional[int] = None
    inner_budget: Optional[int] = None
    recover_budget: Optional[int] = None
    step_size: Optional[object] = None
    interval: Optional[Tuple[float, float]] = None
    initialization: Optional[str] = None
    init_seed: Optional[int] = None
    oracle: bool = False
    oracle_resolution: float = 1e-3
    record_wall_clock: bool = False
    output_dir: Optional[str] = None
    name: Optional[str] = None
    base_dir: Optional[str] = field(default=None, repr=False)

    @classmethod
    def from_dict(cls, data, base_dir=None):
        if not isinstance(data, dict):
            raise ValidationError("an experiment config must be a JSON object")
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError({key: ["unknown config key"] for key in unknown})
        missing = [key for key in ("solver", "instance") if key not in data]
        if missing:
            raise ValidationError({key: ["this field is required"] for key in missing})
        config = cls(base_dir=None if base_dir is None else str(base_dir), **data)
        config.full_clean()
        return config

    @property
    def solver_kind(self):
        return SOLVER_ALIASES.get(self.solver)

    def _clean_instance(self, errors):
        instance = self.instance
        if not isinstance(instance, dict):
            errors.setdefault("instance", []).append("instance must be an object")
            return
        if "file" in instance:
            return
        generator = instance.get("generator")
        if generator not in GENERATOR_FIELDS:
            errors.setdefault("instance", []).append(
                "instance needs a file or a generator in %s" % ", ".join(sorted(GENERATOR_FIELDS))
            )
            return
        absent = [key for key in GENERATOR_FIELDS[generator] if key not in instance]
        if absent:
            errors.setdefault("instance", []).append(
                "%s generator needs %s" % (generator, ", ".join(absent))
            )

    def full_clean(self):
        errors = {}
        kind = self.solver_kind
        if kind is None:
            errors.setdefault("solver", []).append(
                "unknown solver %r, expected one of %s" % (self.solver, ", ".join(sorted(SOLVER_ALIASES)))
            )
        self._clean_instance(errors)
        for name in ("outer_iterations", "inner_budget", "recover_budget"):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, int) or isinstance(value, bool) or value < 1):
                errors.setdefault(name, []).append("budgets must be positive integers")
        for name in ("tau", "epsilon", "oracle_resolution"):
            value = getattr(self, name)
            if value is not None and not (isinstance(value, (int, float)) and value > 0):
                errors.setdefault(name, []).append("%s must be positive" % name)
        if kind in ("dual", "bisect") and self.tau is None:
            errors.setdefault("tau", []).append("tau > 0 is required for regularized runs")
        if kind in ("bisect", "standard") and self.epsilon is None:
            errors.setdefault("epsilon", []).append("epsilon is required for %s runs" % self.solver)
        if kind == "dual" and self.outer_iterations is None and self.epsilon is None:
            errors.setdefault("outer_iterations", []).append(
                "dual descent needs outer_iterations or an epsilon target"
            )
        step = self.step_size
        if step is not None and step != "practical" and not (isinstance(step, (int, float)) and step > 0):
            errors.setdefault("step_size", []).append('step_size must be positive or "practical"')
        if self.initialization not in (None, "zero", "random"):
            errors.setdefault("initialization", []).append('initialization must be "zero" or "random"')
        if self.interval is not None:
            try:
                lower, upper = (float(v) for v in self.interval)
            except (TypeError, ValueError):
                errors.setdefault("interval", []).append("interval must be a pair of numbers")
            else:
                if not 0 <= lower < upper:
                    errors.setdefault("interval", []).append("interval must satisfy 0 <= lower < upper")
        if errors:
            raise ValidationError(errors)

    def resolve_path(self, path):
        path = Path(path)
        if not path.is_absolute() and self.base_dir is not None:
            path = Path(self.base_dir) / path
        return path

    @property
    def run_dir(self):
        if self.output_dir is not None:
            return self.resolve_path(self.output_dir)
        return Path(cmdp_settings.OUTPUT_DIR) / (self.name or self.solver_kind)

    def as_dict(self):
        data = asdict(self)
        data.pop("base_dir")
        return data


def load_config(path):
    path = Path(path)
    return ExperimentConfig.from_dict(read_json(path), base_dir=path.parent)


def load_instance(config):
    """
    Model and Slater decision rule for a config's instance.
    """
    instance = config.instance
    if "file" in instance:
        model = load_model(config.resolve_path(instance["file"]), require_interior=True)
        if "slater_policy" in instance:
            slater = load_policy(config.resolve_path(instance["slater_policy"]))
        else:
            slater = DecisionRule(np.full(model.shape, 1.0 / model.num_actions))
        return model, slater
    if instance["generator"] == "random":
        generated = gen_random_cmdp(
            instance["seed"],
            instance["num_states"],
            instance["num_actions"],
            instance["n_constraints"],
            instance["gamma"],
            threshold_factor=instance.get("threshold_factor"),
        )
    else:
        generated = gen_gridworld(
            instance["width"],
            instance["height"],
            instance["gamma"],
            hazards=instance.get("hazards"),
            slack=instance.get("slack"),
        )
    return generated.model, generated.slater_policy


def write_trace_csv(path, rows, fieldnames=None):
    """
    Write trace rows with csv.DictWriter; floats are written at full precision.
    """
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else ["iter"]
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {key: repr(float(value)) if isinstance(value, float) else value for key, value in row.items()}
            )
    return path


def _parse_cell(value):
    if value == "":
        return None
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def read_trace_csv(path):
    with Path(path).open(encoding="utf-8", newline="") as handle:
        return [{key: _parse_cell(value) for key, value in row.items()} for row in csv.DictReader(handle)]


def dual_trace_columns(num_constraints):
    return (
        ["iter"]
        + ["lambda_%d" % i for i in range(num_constraints)]
        + ["dual_value", "grad_norm", "max_violation", "soft_objective", "inner_iters", "wall_ms"]
    )


BISECTION_COLUMNS = ["iter", "p", "q", "midpoint", "grad_estimate", "inner_iters"]


def _policy_summary(model, policy, tau):
    utilities = utility_values(model, policy)
    violations = np.maximum(model.thresholds - utilities, 0.0)
    summary = {
        "primal_value": evaluate_value(model, policy, model.reward).at(model.initial_dist),
        "utilities": utilities.tolist(),
        "max_violation": float(violations.max()) if violations.size else 0.0,
    }
    if tau:
        soft_value = evaluate_soft_value(model, policy, model.reward, tau)
        summary["soft_objective"] = soft_value.at(model.initial_dist)
    return summary


def _step_size(config, model, tau):
    if config.step_size == "practical":
        return practical_step_size(model, tau)
    return config.step_size


def _run_dual(config, model, slater):
    if model.num_constraints == 0:
        raise ValidationError({"solver": ["dual descent requires at least one constraint"]})
    tau = config.tau
    constants = compute_constants(model, slater, tau)
    box = DualBox.from_slater(model, slater, tau)
    horizon = config.outer_iterations
    if horizon is None:
        horizon = min(outer_horizon(constants, box, config.epsilon), cmdp_settings.MAX_OUTER_ITERATIONS)
    inner = config.inner_budget or certified_inner_budget(model, tau, constants, box, horizon)
    recover = config.recover_budget
    if recover is None:
        recover = inner
        if config.epsilon is not None:
            recover = max(1, recovery_budget(model, tau, box.total, config.epsilon / (2.0 * constants.ell_c)))
    initial = initial_multiplier(box, config.initialization, config.init_seed)
    result = accelerated_dual_descent(
        model,
        tau,
        box,
        constants,
        horizon,
        inner,
        recover,
        step_size=_step_size(config, model, tau),
        initial=initial,
        inner_stop_tol=cmdp_settings.NPG_STOP_TOLERANCE,
        record_wall_clock=config.record_wall_clock,
    )
    trace = result.trace
    summary = {
        "final_dual_value": trace.final.dual_value,
        "final_grad_norm": trace.final.grad_norm,
        "multiplier": result.multiplier.tolist(),
        "flagged_iterations": trace.flagged,
    }
    params = {
        "tau": tau,
        "constants": constants.as_dict(),
        "box_upper": box.upper.tolist(),
        "slater_slack": slater_slack(model, slater).tolist(),
        "outer_iterations": horizon,
        "inner_budget": inner,
        "recover_budget": recover,
        "step_size": trace.step_size,
        "inexactness_allowance": trace.allowance,
        "initial_multiplier": initial.tolist(),
    }
    if config.oracle and model.num_constraints <= 2:
        grid = dual_grid_search(model, tau, box, config.oracle_resolution)
        summary["oracle"] = {
            "lambda_star": grid.lambda_star.tolist(),
            "dual_star": grid.dual_value,
            "dual_gap": trace.final.dual_value - grid.dual_value,
        }
    return result.policy, trace.as_rows(), dual_trace_columns(model.num_constraints), summary, params


def _run_bisect(config, model, slater):
    if model.num_constraints != 1:
        raise ValidationError({"solver": ["bisection requires exactly one constraint"]})
    tau, epsilon = config.tau, config.epsilon
    constants = compute_constants(model, slater, tau)
    inner = config.inner_budget or max(1, bisection_inner_budget(model, tau, constants, epsilon))
    recover = config.recover_budget or max(1, recovery_budget(model, tau, constants.c2, epsilon))
    bisection_config = BisectionConfig(
        epsilon=epsilon,
        inner_budget_n1=inner,
        recover_budget_n2=recover,
        interval=None if config.interval is None else tuple(config.interval),
        stop_tol=cmdp_settings.NPG_STOP_TOLERANCE,
    )
    result = bisection_solve(model, tau, bisection_config, constants=constants)
    trace = result.trace
    summary = {
        "multiplier": [result.multiplier],
        "short_circuit": trace.short_circuit,
        "final_interval": list(trace.final_interval),
        "final_gradient": trace.final_gradient,
        "outer_iterations": trace.outer_iterations,
    }
    params = {
        "tau": tau,
        "epsilon": epsilon,
        "constants": constants.as_dict(),
        "slater_slack": slater_slack(model, slater).tolist(),
        "inner_budget": inner,
        "recover_budget": recover,
        "outer_budget": bisection_budget(constants, epsilon),
    }
    if config.oracle:
        grid = dual_grid_search(model, tau, DualBox([constants.c2]), config.oracle_resolution)
        summary["oracle"] = {"lambda_star": grid.lambda_star.tolist(), "dual_star": grid.dual_value}
    return result.policy, trace.as_rows(), BISECTION_COLUMNS, summary, params


def _run_standard(config, model, slater):
    records = []

    def collect(sender, record, **kwargs):
        records.append(record)

    step_size = config.step_size
    if step_size == "practical":
        step_size = None
        if model.num_actions > 1 and model.num_constraints > 0:
            tau = (1.0 - model.gamma) * config.epsilon / (4.0 * math.log(model.num_actions))
            step_size = practical_step_size(model, tau)

    dual_step_completed.connect(collect, weak=False)
    try:
        policy, report = standard_cmdp_solve(
            model,
            config.epsilon,
            slater_policy=slater,
            max_outer_iterations=config.outer_iterations,
            step_size=step_size,
        )
    finally:
        dual_step_completed.disconnect(collect)
    summary = {"report": report.as_dict()}
    params = {
        "tau": report.tau,
        "constants": report.constants,
        "outer_iterations": report.outer_iterations,
        "inner_budget": report.inner_budget,
        "recover_budget": report.recover_budget,
        "step_size": report.step_size,
        "horizon_capped": report.horizon_capped,
    }
    if config.oracle:
        lp = occupancy_lp_solve(model)
        summary["oracle"] = {
            "lp_value": lp.value,
            "value_gap": abs(lp.value - report.value),
            "max_violation": report.max_violation,
        }
    rows = [record.as_row() for record in records]
    return policy, rows, dual_trace_columns(model.num_constraints), summary, params


RUNNERS = {"dual": _run_dual, "bisect": _run_bisect, "standard": _run_standard}


def run_experiment(config):
    """
    Execute one configured run and return its artifact directory.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    model, slater = load_instance(config)
    started = time.perf_counter()
    policy, rows, columns, summary, params = RUNNERS[config.solver_kind](config, model, slater)
    wall_ms = (time.perf_counter() - started) * 1000.0 if config.record_wall_clock else 0.0

    if config.solver_kind == "standard":
        tau = summary["report"]["tau"]
    else:
        tau = config.tau
    summary.update(_policy_summary(model, policy, tau))
    summary["solver"] = config.solver_kind
    summary["wall_ms"] = wall_ms
    params["config"] = config.as_dict()
    params["model"] = {
        "num_states": model.num_states,
        "num_actions": model.num_actions,
        "num_constraints": model.num_constraints,
        "gamma": model.gamma,
    }

    run_dir = config.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(run_dir / "trace.csv", rows, columns)
    write_json(run_dir / "summary.json", summary)
    write_json(run_dir / "params.json", params)
    dump_policy(policy, run_dir / "policy.json")
    logger.info("%s run written to %s (%d trace rows)", config.solver_kind, run_dir, len(rows))
    return run_dir


class RateFit(NamedTuple):
    model: str
    slope: float
    intercept: float
    residual: float
    stderr: float
    band: Tuple[float, float]
    rows: int


def fit_rate(trace, column, model="power", confidence=0.95):
    """
    Least-squares slope of log(value) against log(iter) ("power") or iter ("linear-log").

    `trace` is a list of row dicts or the path of a trace CSV. Rows with a
    missing or non-positive value are skipped, as are rows with iter <= 0 in
    power fits. `band` is the two-sided confidence interval of the slope.
    """
    if model not in RATE_MODELS:
        raise RateFitError("unknown rate model %r, expected one of %s" % (model, ", ".join(RATE_MODELS)))
    if isinstance(trace, (str, Path)):
        trace = read_trace_csv(trace)
    if trace and column not in trace[0]:
        raise RateFitError("trace has no column %r" % column)

    values = [row.get(column) for row in trace]
    numeric = [value for value in values if isinstance(value, (int, float))]
    if numeric and all(value == 0 for value in numeric):
        raise RateFitError("column %r is constant zero" % column)

    xs, ys = [], []
    for index, row in enumerate(trace):
        value = row.get(column)
        iteration = row.get("iter", index)
        if not isinstance(value, (int, float)) or not value > 0 or not math.isfinite(value):
            continue
        if model == "power":
            if not iteration > 0:
                continue
            xs.append(math.log(iteration))
        else:
            xs.append(float(iteration))
        ys.append(math.log(value))

    minimum = cmdp_settings.RATE_FIT_MIN_ROWS
    if len(xs) < minimum:
        raise RateFitError(
            "column %r has %d usable rows, at least %d are required" % (column, len(xs), minimum)
        )
    fit = stats.linregress(xs, ys)
    predicted = fit.intercept + fit.slope * np.asarray(xs)
    residual = float(np.sqrt(np.mean((np.asarray(ys) - predicted) ** 2)))
    half_width = float(stats.t.ppf(0.5 + confidence / 2.0, len(xs) - 2) * fit.stderr)
    return RateFit(
        model=model,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        residual=residual,
        stderr=float(fit.stderr),
        band=(float(fit.slope) - half_width, float(fit.slope) + half_width),
        rows=len(xs),
    )
