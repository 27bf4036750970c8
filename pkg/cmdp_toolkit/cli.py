import os
import sys

from django.conf import settings
from django.core.management import execute_from_command_line


COMMAND_ALIASES = {
    "validate": "validatecmdp",
    "gen": "gencmdp",
    "solve": "solvecmdp",
    "oracle": "oraclecmdp",
    "check-invariants": "checkinvariants",
    "fit-rate": "fitrate",
}

DEFAULT_LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {"simple": {"format": "%(levelname)s %(name)s %(message)s"}},
    "handlers": {"console": {"class": "logging.StreamHandler", "formatter": "simple"}},
    "loggers": {"cmdp_toolkit": {"handlers": ["console"], "level": "WARNING", "propagate": False}},
}


def configure():
    """
    Configure a minimal Django settings module unless the host project provides one.
    """
    if settings.configured or os.environ.get("DJANGO_SETTINGS_MODULE"):
        return
    settings.configure(
        INSTALLED_APPS=["cmdp_toolkit"],
        LOGGING=DEFAULT_LOGGING,
        CMDP_TOOLKIT={},
    )


def main(argv=None):
    argv = list(sys.argv if argv is None else argv)
    if len(argv) > 1:
        argv[1] = COMMAND_ALIASES.get(argv[1], argv[1])
    configure()
    execute_from_command_line(argv)
