import pytest
from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase
from django.test.utils import override_settings

from cmdp_toolkit.generators import GridworldGenerator, RandomCMDPGenerator, gen_random_cmdp
from cmdp_toolkit.oracles import occupancy_lp_solve
from cmdp_toolkit.settings import (
    DEFAULTS,
    IMPORT_STRINGS,
    MANDATORY,
    CMDPToolkitSettings,
    cmdp_settings,
    perform_import,
)
from cmdp_toolkit.simplex import DenseSimplex

from . import presets
from .utils import CountingSimplex, FixedRandomGenerator, bandit_model


class TestImportStrings(SimpleTestCase):
    def test_import_error_message_maintained(self):
        """
        Make sure import errors are captured and raised sensibly.
        """
        settings = CMDPToolkitSettings({"LP_SOLVER_CLASS": "invalid_module.InvalidClassName"})
        with self.assertRaises(ImportError) as ctx:
            settings.LP_SOLVER_CLASS
        self.assertIn("LP_SOLVER_CLASS", str(ctx.exception))

    def test_default_classes(self):
        assert cmdp_settings.RANDOM_GENERATOR_CLASS is RandomCMDPGenerator
        assert cmdp_settings.GRIDWORLD_GENERATOR_CLASS is GridworldGenerator
        assert cmdp_settings.LP_SOLVER_CLASS is DenseSimplex

    @override_settings(CMDP_TOOLKIT={"LP_SOLVER_CLASS": "tests.utils.CountingSimplex"})
    def test_override_settings_reloads(self):
        assert cmdp_settings.LP_SOLVER_CLASS is CountingSimplex

    def test_override_is_restored(self):
        with override_settings(CMDP_TOOLKIT={"THRESHOLD_FACTOR": 0.5}):
            assert cmdp_settings.THRESHOLD_FACTOR == 0.5
        assert cmdp_settings.THRESHOLD_FACTOR == DEFAULTS["THRESHOLD_FACTOR"]


def test_perform_import_when_none():
    assert perform_import(None, "LP_SOLVER_CLASS") is None


def test_perform_import_list():
    imports = ["tests.utils.CountingSimplex", "cmdp_toolkit.simplex.DenseSimplex"]
    assert perform_import(imports, "SOME_CLASSES") == [CountingSimplex, DenseSimplex]


def test_perform_import_already_imported():
    assert perform_import(DenseSimplex, "LP_SOLVER_CLASS") is DenseSimplex


def test_import_strings_are_defaults():
    for name in IMPORT_STRINGS:
        assert name in DEFAULTS
    for name in MANDATORY:
        assert name in DEFAULTS


def test_invalid_setting_name():
    with pytest.raises(AttributeError):
        cmdp_settings.NOT_A_SETTING


def test_mandatory_setting_cannot_be_empty():
    settings = CMDPToolkitSettings({"OUTPUT_DIR": ""}, DEFAULTS, IMPORT_STRINGS, MANDATORY)
    with pytest.raises(AttributeError) as exc:
        settings.OUTPUT_DIR
    assert "mandatory" in str(exc.value)


@pytest.mark.parametrize(
    "name, value",
    [
        ("DUAL_INITIALIZATION", "gaussian"),
        ("THRESHOLD_FACTOR", 1.0),
        ("GRIDWORLD_EXPLORATION", 0.0),
        ("GRID_POINTS_PER_AXIS", 2),
        ("GRID_POINTS_PER_AXIS", 3),
    ],
)
def test_invalid_values_raise_improperly_configured(name, value):
    settings = CMDPToolkitSettings({name: value})
    with pytest.raises(ImproperlyConfigured) as exc:
        getattr(settings, name)
    assert name in str(exc.value)


def test_defaults_without_user_settings():
    settings = CMDPToolkitSettings({})
    assert settings.VALIDATION_TOLERANCE == DEFAULTS["VALIDATION_TOLERANCE"]
    assert settings.MAX_OUTER_ITERATIONS == DEFAULTS["MAX_OUTER_ITERATIONS"]


def test_project_settings_are_read():
    assert cmdp_settings.OUTPUT_DIR == "cmdp_test_runs"


def test_wrapper_update(cmdp_settings):
    cmdp_settings.update({"OUTPUT_DIR": "elsewhere"})
    assert cmdp_settings.OUTPUT_DIR == "elsewhere"


@pytest.mark.cmdp_settings(presets.RANDOM_DUAL_INIT)
def test_marker_settings(cmdp_settings):
    assert cmdp_settings.DUAL_INITIALIZATION == "random"
    assert cmdp_settings.DUAL_INIT_SEED == 7


@pytest.mark.cmdp_settings(presets.CUSTOM_GENERATORS)
def test_custom_generator_class(cmdp_settings):
    first = gen_random_cmdp(1, 3, 2, 1, 0.9)
    second = gen_random_cmdp(2, 3, 2, 1, 0.9)
    assert (first.model.transition == second.model.transition).all()
    assert cmdp_settings.RANDOM_GENERATOR_CLASS is FixedRandomGenerator


@pytest.mark.cmdp_settings(presets.CUSTOM_GENERATORS)
def test_custom_lp_solver_class(cmdp_settings):
    CountingSimplex.calls = 0
    occupancy_lp_solve(bandit_model(thresholds=[1.0]))
    assert CountingSimplex.calls == 1


def test_setattr_on_wrapper_is_reset(cmdp_settings):
    cmdp_settings.GRID_POINTS_PER_AXIS = 7
    assert cmdp_settings.GRID_POINTS_PER_AXIS == 7
    cmdp_settings.finalize()
    assert cmdp_settings.GRID_POINTS_PER_AXIS == DEFAULTS["GRID_POINTS_PER_AXIS"]


def test_wrapper_rejects_unknown_names(cmdp_settings):
    with pytest.raises(AttributeError) as exc:
        cmdp_settings.GRID_POINTS = 5
    assert "GRID_POINTS" in str(exc.value)
    with pytest.raises(AttributeError):
        cmdp_settings.update({"OUTPUT_DIR": "runs", "COLOUR": "blue"})
    assert cmdp_settings.OUTPUT_DIR == DEFAULTS["OUTPUT_DIR"]


def test_wrapper_validates_overrides(cmdp_settings):
    with pytest.raises(ImproperlyConfigured):
        cmdp_settings.GRID_POINTS_PER_AXIS = 3
    with pytest.raises(ImproperlyConfigured):
        cmdp_settings.DUAL_INITIALIZATION = "gaussian"
    assert cmdp_settings.GRID_POINTS_PER_AXIS == DEFAULTS["GRID_POINTS_PER_AXIS"]


def test_wrapper_imports_class_paths(cmdp_settings):
    cmdp_settings.LP_SOLVER_CLASS = "tests.utils.CountingSimplex"
    assert cmdp_settings.LP_SOLVER_CLASS is CountingSimplex
    cmdp_settings.finalize()
    assert cmdp_settings.LP_SOLVER_CLASS is DenseSimplex
