import numpy as np
import pytest

from cmdp_toolkit.invariants import conflict_model
from cmdp_toolkit.settings import DEFAULTS, IMPORT_STRINGS, perform_import
from cmdp_toolkit.settings import cmdp_settings as _cmdp_settings

from .utils import bandit_model, chain_model


class CMDPSettingsWrapper:
    """
    A wrapper around cmdp_settings for overriding toolkit settings in tests.

    Overrides go through the same import and validation path as the project's
    CMDP_TOOLKIT dict, so a preset with a misspelled name or an out-of-range
    value fails the test that uses it. Every override is recorded in
    _cached_attrs, so that finalize() restores the configured values.
    """

    def __init__(self, settings, user_settings):
        self.settings = settings
        self.update(user_settings or {})

    def update(self, user_settings):
        self._check_names(user_settings)
        self.settings.CMDP_TOOLKIT = dict(user_settings)
        _cmdp_settings.reload()

    def __setattr__(self, attr, value):
        if attr == "settings":
            super().__setattr__(attr, value)
            return
        self._check_names([attr])
        if isinstance(value, str) and attr in IMPORT_STRINGS:
            value = perform_import(value, attr)
        _cmdp_settings.validate_setting(attr, value)
        setattr(_cmdp_settings, attr, value)
        _cmdp_settings._cached_attrs.add(attr)

    def __delattr__(self, attr):
        delattr(_cmdp_settings, attr)
        if attr in _cmdp_settings._cached_attrs:
            _cmdp_settings._cached_attrs.remove(attr)

    def __getattr__(self, attr):
        return getattr(_cmdp_settings, attr)

    @staticmethod
    def _check_names(names):
        unknown = sorted(set(names) - set(DEFAULTS))
        if unknown:
            raise AttributeError("Invalid CMDP toolkit setting: %s" % ", ".join(unknown))

    def finalize(self):
        self.settings.finalize()
        _cmdp_settings.reload()


@pytest.fixture
def cmdp_settings(request, settings):
    """
    A fixture that provides a simple way to override CMDP_TOOLKIT settings.

    It can be used two ways - either setting things on the fly, or by reading
    configuration data from the pytest marker cmdp_settings.

    If used on a standard pytest function, you can use argument dependency
    injection to get the wrapper. If used on a unittest.TestCase, the wrapper
    is made available on the class instance, as `cmdp_settings`.

    Anything overridden will be restored at the end of the test case, ensuring
    that there is no configuration leakage between test cases.
    """
    marker = request.node.get_closest_marker("cmdp_settings")
    user_settings = {}
    if marker is not None:
        user_settings = marker.args[0]
    wrapper = CMDPSettingsWrapper(settings, user_settings)
    if request.instance is not None:
        request.instance.cmdp_settings = wrapper
    yield wrapper
    wrapper.finalize()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def bandit():
    return bandit_model()


@pytest.fixture
def chain():
    return chain_model()


@pytest.fixture
def conflict(rng):
    """
    A three-state instance with an active constraint, and its uniform Slater policy.
    """
    return conflict_model(rng, 3)


@pytest.fixture
def run_dir(request, tmp_path):
    if request.instance is not None:
        request.instance.run_dir = tmp_path
    return tmp_path
