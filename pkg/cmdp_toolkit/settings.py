"""
This module is largely inspired by django-rest-framework settings.

Settings for the CMDP toolkit are all namespaced in the CMDP_TOOLKIT setting.
For example your project's `settings.py` file might look like this:

CMDP_TOOLKIT = {
    "RANDOM_GENERATOR_CLASS":
        "cmdp_toolkit.generators.RandomCMDPGenerator",
    "THRESHOLD_FACTOR": 0.8,
}

This module provides the `cmdp_settings` object, that is used to access
toolkit settings, checking for user settings first, then falling
back to the defaults. The library can also be used without a configured
Django project, in which case only the defaults apply.
"""

import os

from django.conf import ENVIRONMENT_VARIABLE, settings
from django.core.exceptions import ImproperlyConfigured
from django.test.signals import setting_changed
from django.utils.module_loading import import_string


DEFAULTS = {
    "RANDOM_GENERATOR_CLASS": "cmdp_toolkit.generators.RandomCMDPGenerator",
    "GRIDWORLD_GENERATOR_CLASS": "cmdp_toolkit.generators.GridworldGenerator",
    "LP_SOLVER_CLASS": "cmdp_toolkit.simplex.DenseSimplex",
    # Instance generation
    "THRESHOLD_FACTOR": 0.9,
    "GRIDWORLD_SLACK": 0.01,
    "GRIDWORLD_EXPLORATION": 0.01,
    # Model and policy checks
    "VALIDATION_TOLERANCE": 1e-12,
    "POLICY_NORMALIZATION_TOLERANCE": 1e-10,
    # Inner solvers
    "SOFT_VI_TOLERANCE": 1e-12,
    "SOFT_VI_MAX_ITERATIONS": 100000,
    "NPG_STOP_TOLERANCE": 1e-10,
    "MONOTONICITY_TOLERANCE": 1e-12,
    # Finite difference oracle
    "FINITE_DIFFERENCE_STEP": 1e-5,
    "FINITE_DIFFERENCE_TOLERANCE": 1e-6,
    # Dual solvers
    "DUAL_INITIALIZATION": "zero",
    "DUAL_INIT_SEED": 0,
    "MAX_OUTER_ITERATIONS": 3000,
    "GRID_POINTS_PER_AXIS": 21,
    # LP oracle
    "SIMPLEX_PIVOT_TOLERANCE": 1e-9,
    "SIMPLEX_MAX_PIVOTS": 20000,
    # Experiments
    "RATE_FIT_MIN_ROWS": 10,
    "OUTPUT_DIR": "cmdp_runs",
}

# List of settings that cannot be empty
MANDATORY = (
    "RANDOM_GENERATOR_CLASS",
    "GRIDWORLD_GENERATOR_CLASS",
    "LP_SOLVER_CLASS",
    "SOFT_VI_TOLERANCE",
    "SOFT_VI_MAX_ITERATIONS",
    "MAX_OUTER_ITERATIONS",
    "GRID_POINTS_PER_AXIS",
    "OUTPUT_DIR",
)

# List of settings that may be in string import notation.
IMPORT_STRINGS = (
    "RANDOM_GENERATOR_CLASS",
    "GRIDWORLD_GENERATOR_CLASS",
    "LP_SOLVER_CLASS",
)

DUAL_INITIALIZATIONS = ("zero", "random")

# refinement windows span two grid cells, so fewer points never contract
MIN_GRID_POINTS = 4


def perform_import(val, setting_name):
    """
    If the given setting is a string import notation,
    then perform the necessary import or imports.
    """
    if val is None:
        return None
    elif isinstance(val, str):
        return import_from_string(val, setting_name)
    elif isinstance(val, (list, tuple)):
        return [import_from_string(item, setting_name) for item in val]
    return val


def import_from_string(val, setting_name):
    """
    Attempt to import a class from a string representation.
    """
    try:
        return import_string(val)
    except ImportError as e:
        msg = "Could not import %r for setting %r. %s: %s." % (val, setting_name, e.__class__.__name__, e)
        raise ImportError(msg)


class CMDPToolkitSettings:
    """
    A settings object, that allows toolkit settings to be accessed as properties.

    Any setting with string import paths will be automatically resolved
    and return the class, rather than the string literal.
    """

    def __init__(self, user_settings=None, defaults=None, import_strings=None, mandatory=None):
        if user_settings is not None:
            self._user_settings = user_settings
        self.defaults = defaults or DEFAULTS
        self.import_strings = import_strings or IMPORT_STRINGS
        self.mandatory = mandatory or ()
        self._cached_attrs = set()

    @property
    def user_settings(self):
        if not hasattr(self, "_user_settings"):
            if settings.configured or os.environ.get(ENVIRONMENT_VARIABLE):
                self._user_settings = getattr(settings, "CMDP_TOOLKIT", None) or {}
            else:
                self._user_settings = {}
        return self._user_settings

    def __getattr__(self, attr):
        if attr not in self.defaults:
            raise AttributeError("Invalid CMDP toolkit setting: %s" % attr)
        try:
            # Check if present in user settings
            val = self.user_settings[attr]
        except KeyError:
            # Fall back to defaults
            val = self.defaults[attr]

        # Coerce import strings into classes
        if val and attr in self.import_strings:
            val = perform_import(val, attr)

        self.validate_setting(attr, val)

        # Cache the result
        self._cached_attrs.add(attr)
        setattr(self, attr, val)
        return val

    def validate_setting(self, attr, val):
        if not val and attr in self.mandatory:
            raise AttributeError("CMDP toolkit setting: %s is mandatory" % attr)
        if attr == "DUAL_INITIALIZATION" and val not in DUAL_INITIALIZATIONS:
            raise ImproperlyConfigured(
                "DUAL_INITIALIZATION must be one of %s, got %r" % (", ".join(DUAL_INITIALIZATIONS), val)
            )
        if attr == "THRESHOLD_FACTOR" and not 0 <= val < 1:
            raise ImproperlyConfigured("THRESHOLD_FACTOR must lie in [0, 1), got %r" % val)
        if attr == "GRIDWORLD_EXPLORATION" and not 0 < val <= 1:
            raise ImproperlyConfigured("GRIDWORLD_EXPLORATION must lie in (0, 1], got %r" % val)
        if attr == "GRID_POINTS_PER_AXIS" and val < MIN_GRID_POINTS:
            raise ImproperlyConfigured(
                "GRID_POINTS_PER_AXIS must be at least %d, got %r" % (MIN_GRID_POINTS, val)
            )

    def reload(self):
        for attr in self._cached_attrs:
            delattr(self, attr)
        self._cached_attrs.clear()
        if hasattr(self, "_user_settings"):
            delattr(self, "_user_settings")


cmdp_settings = CMDPToolkitSettings(None, DEFAULTS, IMPORT_STRINGS, MANDATORY)


def reload_cmdp_settings(*args, **kwargs):
    setting = kwargs["setting"]
    if setting == "CMDP_TOOLKIT":
        cmdp_settings.reload()


setting_changed.connect(reload_cmdp_settings)
