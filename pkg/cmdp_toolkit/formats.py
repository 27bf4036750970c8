"""
JSON file formats for models and policies.

A model file is a single JSON object with the keys ``gamma``, ``transition``,
``reward``, ``utilities``, ``thresholds`` and ``initial_dist``; ``num_states``
and ``num_actions`` are optional and checked against the array shapes when
present. A policy file holds ``prob`` (any decision rule) or ``log_prob``
(a soft-max policy).
"""

import json
import logging
from pathlib import Path

import numpy as np

from .exceptions import InvalidArgumentError, ModelValidationError
from .models import DecisionRule, Policy, TabularCMDP
from .validators import validate_model


logger = logging.getLogger(__name__)

MODEL_KEYS = ("gamma", "transition", "reward", "utilities", "thresholds", "initial_dist")


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelValidationError("%s: cannot read file: %s" % (path, exc.strerror or exc)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelValidationError("%s:%d:%d: %s" % (path, exc.lineno, exc.colno, exc.msg)) from exc


def write_json(path, data):
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def model_from_dict(data, source=""):
    """
    Build a model from its JSON object. Raises ModelValidationError with
    `source` as prefix for missing keys or mismatched shapes.
    """
    prefix = "%s: " % source if source else ""
    if not isinstance(data, dict):
        raise ModelValidationError("%sa model file must hold a JSON object" % prefix)
    missing = [key for key in MODEL_KEYS if key not in data]
    if missing:
        raise ModelValidationError(
            "%smissing keys: %s" % (prefix, ", ".join(missing)), ["missing key %s" % key for key in missing]
        )
    try:
        model = TabularCMDP(
            data["transition"],
            data["reward"],
            data["utilities"],
            data["thresholds"],
            data["gamma"],
            data["initial_dist"],
        )
    except (InvalidArgumentError, TypeError, ValueError) as exc:
        raise ModelValidationError("%s%s" % (prefix, exc), [str(exc)]) from exc
    for key, actual in (("num_states", model.num_states), ("num_actions", model.num_actions)):
        if key in data and data[key] != actual:
            message = "%s is %r but the arrays have %d" % (key, data[key], actual)
            raise ModelValidationError(prefix + message, [message])
    return model


def load_model(path, require_interior=False):
    """
    Load and validate a model file.
    """
    model = model_from_dict(read_json(path), source=str(path))
    validate_model(model, require_interior=require_interior).raise_for_violations(source=str(path))
    logger.debug("loaded %s from %s", model, path)
    return model


def dump_model(model, path):
    return write_json(path, model.to_dict())


def load_policy(path):
    data = read_json(path)
    try:
        if "log_prob" in data:
            return Policy(data["log_prob"])
        return DecisionRule(data["prob"])
    except (KeyError, TypeError) as exc:
        raise ModelValidationError("%s: a policy file needs prob or log_prob" % path) from exc
    except InvalidArgumentError as exc:
        raise ModelValidationError("%s: %s" % (path, exc), [str(exc)]) from exc


def dump_policy(rule, path):
    data = {"prob": np.asarray(rule.prob).tolist()}
    if isinstance(rule, Policy):
        data["log_prob"] = rule.log_prob.tolist()
    return write_json(path, data)
