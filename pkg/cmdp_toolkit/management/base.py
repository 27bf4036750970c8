from functools import wraps

from django.core.exceptions import ValidationError
from django.core.management.base import CommandError

from ..exceptions import CMDPToolkitError, InfeasibleProblemError


# exit codes shared by every command
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2


def format_validation_error(exc):
    if hasattr(exc, "error_dict"):
        lines = ["- %s: %s" % (key, "; ".join(messages)) for key, messages in exc.message_dict.items()]
    else:
        lines = ["- %s" % message for message in exc.messages]
    return "Please correct the following errors:\n %s" % "\n ".join(lines)


def translate_errors(handle):
    """
    Turn toolkit exceptions raised by `handle` into CommandError with the
    matching exit code: 2 for infeasibility, 1 for everything else.
    """

    @wraps(handle)
    def wrapper(self, *args, **options):
        try:
            return handle(self, *args, **options)
        except ValidationError as exc:
            raise CommandError(format_validation_error(exc), returncode=EXIT_INVALID) from exc
        except InfeasibleProblemError as exc:
            raise CommandError(str(exc), returncode=EXIT_INFEASIBLE) from exc
        except (CMDPToolkitError, OSError) as exc:
            raise CommandError(str(exc), returncode=EXIT_INVALID) from exc

    return wrapper
