from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .exceptions import ModelValidationError
from .settings import cmdp_settings


@dataclass(frozen=True)
class Violation:
    field_name: str
    index: Tuple[int, ...]
    residual: float
    message: str

    def __str__(self):
        return self.message


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations

    def __bool__(self):
        return self.passed

    @property
    def messages(self):
        return [violation.message for violation in self.violations]

    def add(self, field_name, index, residual, message):
        self.violations.append(Violation(field_name, tuple(int(i) for i in index), float(residual), message))

    def raise_for_violations(self, source=None):
        if self.passed:
            return
        prefix = "%s: " % source if source else ""
        raise ModelValidationError(
            "%sinvalid CMDP model:\n %s" % (prefix, "\n ".join("- " + msg for msg in self.messages)),
            self.messages,
        )


def _index(index):
    return "(%s)" % ",".join(str(int(i)) for i in index)


class DiscountValidator:
    def __call__(self, model, report, tolerance):
        if not np.isfinite(model.gamma) or not 0 <= model.gamma < 1:
            report.add("gamma", (), model.gamma, "gamma = %.12g outside [0, 1)" % model.gamma)


class TransitionValidator:
    def __call__(self, model, report, tolerance):
        transition = model.transition
        if not np.all(np.isfinite(transition)):
            for index in np.argwhere(~np.isfinite(transition)):
                report.add("transition", index, np.nan, "transition entry %s is not finite" % _index(index))
            return
        for index in np.argwhere(transition < 0):
            value = transition[tuple(index)]
            report.add(
                "transition", index, value, "transition entry %s = %.12g is negative" % (_index(index), value)
            )
        row_sums = transition.sum(axis=2)
        for index in np.argwhere(np.abs(row_sums - 1.0) > tolerance):
            total = row_sums[tuple(index)]
            report.add(
                "transition", index, total - 1.0, "transition row %s sums to %.12g" % (_index(index), total)
            )


class UnitRangeValidator:
    """
    Entries of a reward-like table must lie in [0, 1].
    """

    def __init__(self, field_name, label):
        self.field_name = field_name
        self.label = label

    def __call__(self, model, report, tolerance):
        table = getattr(model, self.field_name)
        bad = ~np.isfinite(table) | (table < -tolerance) | (table > 1 + tolerance)
        for index in np.argwhere(bad):
            value = table[tuple(index)]
            residual = value - 1.0 if value > 1 else value
            report.add(
                self.field_name,
                index,
                residual,
                "%s %s = %.12g outside [0, 1]" % (self.label, _index(index), value),
            )


class ThresholdValidator:
    def __call__(self, model, report, tolerance):
        if not 0 <= model.gamma < 1:
            return
        upper = 1.0 / (1.0 - model.gamma)
        for i, value in enumerate(model.thresholds):
            if not np.isfinite(value) or value < -tolerance or value > upper + tolerance:
                report.add(
                    "thresholds",
                    (i,),
                    value,
                    "threshold %d = %.12g outside [0, %.12g]" % (i, value, upper),
                )


class InitialDistributionValidator:
    def __init__(self, require_interior=False):
        self.require_interior = require_interior

    def __call__(self, model, report, tolerance):
        rho = model.initial_dist
        if not np.all(np.isfinite(rho)):
            report.add("initial_dist", (), np.nan, "initial_dist has non-finite entries")
            return
        for (s,) in np.argwhere(rho < 0):
            report.add("initial_dist", (s,), rho[s], "initial_dist[%d] = %.12g is negative" % (s, rho[s]))
        total = rho.sum()
        if abs(total - 1.0) > tolerance:
            report.add("initial_dist", (), total - 1.0, "initial_dist sums to %.12g" % total)
        if self.require_interior:
            for (s,) in np.argwhere(rho <= 0):
                report.add(
                    "initial_dist",
                    (s,),
                    rho[s],
                    "initial_dist[%d] = %.12g is not strictly positive" % (s, rho[s]),
                )


def get_model_validators(require_interior=False):
    return [
        DiscountValidator(),
        TransitionValidator(),
        UnitRangeValidator("reward", "reward"),
        UnitRangeValidator("utilities", "utility"),
        ThresholdValidator(),
        InitialDistributionValidator(require_interior=require_interior),
    ]


def validate_model(model, require_interior=False, tolerance=None):
    """
    Check every invariant of a TabularCMDP and report all violations.

    Nothing is raised; call `raise_for_violations()` on the report to turn a
    failed check into a ModelValidationError. Pass `require_interior=True`
    when every initial state must have positive mass.
    """
    if tolerance is None:
        tolerance = cmdp_settings.VALIDATION_TOLERANCE
    report = ValidationReport()
    for validator in get_model_validators(require_interior=require_interior):
        validator(model, report, tolerance)
    return report
