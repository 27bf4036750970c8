import numpy as np
import pytest

from cmdp_toolkit.exceptions import ModelValidationError
from cmdp_toolkit.models import TabularCMDP
from cmdp_toolkit.validators import ValidationReport, get_model_validators, validate_model

from .utils import bandit_model, chain_model


def make_model(**overrides):
    arguments = {
        "transition": np.full((2, 2, 2), 0.5),
        "reward": np.full((2, 2), 0.5),
        "utilities": np.full((1, 2, 2), 0.5),
        "thresholds": [1.0],
        "gamma": 0.9,
        "initial_dist": [0.5, 0.5],
    }
    arguments.update(overrides)
    return TabularCMDP(**arguments)


def test_valid_model_passes():
    report = validate_model(chain_model())
    assert report.passed
    assert bool(report)
    assert report.messages == []
    report.raise_for_violations()


def test_gamma_out_of_range():
    report = validate_model(make_model(gamma=1.0))
    assert not report.passed
    assert report.violations[0].field_name == "gamma"
    assert "gamma = 1 outside [0, 1)" in report.messages


def test_transition_row_sum():
    transition = np.full((2, 2, 2), 0.5)
    transition[1, 0] = [0.5, 0.6]
    report = validate_model(make_model(transition=transition))
    assert report.messages == ["transition row (1,0) sums to 1.1"]
    violation = report.violations[0]
    assert violation.index == (1, 0)
    assert violation.residual == pytest.approx(0.1)


def test_negative_transition_entry():
    transition = np.full((2, 2, 2), 0.5)
    transition[0, 1] = [1.5, -0.5]
    report = validate_model(make_model(transition=transition))
    assert "transition entry (0,1,1) = -0.5 is negative" in report.messages


def test_non_finite_transition():
    transition = np.full((2, 2, 2), 0.5)
    transition[0, 0, 0] = np.nan
    report = validate_model(make_model(transition=transition))
    assert report.messages == ["transition entry (0,0,0) is not finite"]


def test_reward_and_utility_ranges():
    reward = np.full((2, 2), 0.5)
    reward[1, 1] = 1.5
    utilities = np.full((1, 2, 2), 0.5)
    utilities[0, 0, 1] = -0.25
    report = validate_model(make_model(reward=reward, utilities=utilities))
    assert "reward (1,1) = 1.5 outside [0, 1]" in report.messages
    assert "utility (0,0,1) = -0.25 outside [0, 1]" in report.messages


def test_threshold_range():
    report = validate_model(make_model(thresholds=[10.5]))
    assert report.messages == ["threshold 0 = 10.5 outside [0, 10]"]


def test_initial_distribution():
    report = validate_model(make_model(initial_dist=[0.7, 0.7]))
    assert report.messages == ["initial_dist sums to 1.4"]


def test_interior_initial_distribution():
    model = make_model(initial_dist=[1.0, 0.0])
    assert validate_model(model).passed
    report = validate_model(model, require_interior=True)
    assert report.messages == ["initial_dist[1] = 0 is not strictly positive"]


def test_all_violations_reported():
    reward = np.full((2, 2), 2.0)
    report = validate_model(make_model(reward=reward, gamma=-0.1, initial_dist=[0.2, 0.2]))
    fields = {violation.field_name for violation in report.violations}
    assert fields == {"gamma", "reward", "initial_dist"}
    assert len(report.violations) == 6


def test_tolerance():
    transition = np.full((2, 2, 2), 0.5)
    transition[0, 0] = [0.5, 0.5 + 1e-9]
    model = make_model(transition=transition)
    assert not validate_model(model).passed
    assert validate_model(model, tolerance=1e-8).passed


def test_raise_for_violations():
    report = validate_model(make_model(gamma=1.5))
    with pytest.raises(ModelValidationError) as exc:
        report.raise_for_violations(source="model.json")
    assert str(exc.value).startswith("model.json: invalid CMDP model:")
    assert exc.value.violations == report.messages


def test_report_add():
    report = ValidationReport()
    report.add("reward", np.array([1, 2]), np.float64(0.5), "bad reward")
    assert not report
    assert report.violations[0].index == (1, 2)
    assert str(report.violations[0]) == "bad reward"


def test_get_model_validators():
    validators = get_model_validators()
    assert len(validators) == 6
    assert all(callable(validator) for validator in validators)


def test_single_state_bandit_is_valid():
    assert validate_model(bandit_model(thresholds=[1.0]), require_interior=True).passed
