import pytest

from cmdp_toolkit import cli


@pytest.mark.parametrize(
    "alias, command",
    [
        ("validate", "validatecmdp"),
        ("gen", "gencmdp"),
        ("solve", "solvecmdp"),
        ("oracle", "oraclecmdp"),
        ("check-invariants", "checkinvariants"),
        ("fit-rate", "fitrate"),
    ],
)
def test_aliases(mocker, alias, command):
    execute = mocker.patch.object(cli, "execute_from_command_line")
    cli.main(["cmdp-toolkit", alias, "model.json"])
    execute.assert_called_once_with(["cmdp-toolkit", command, "model.json"])


def test_unknown_commands_pass_through(mocker):
    execute = mocker.patch.object(cli, "execute_from_command_line")
    cli.main(["cmdp-toolkit", "solvecmdp", "dual", "-c", "run.json"])
    cli.main(["cmdp-toolkit"])
    assert execute.call_args_list == [
        mocker.call(["cmdp-toolkit", "solvecmdp", "dual", "-c", "run.json"]),
        mocker.call(["cmdp-toolkit"]),
    ]


def test_configure_keeps_host_settings(mocker):
    settings = mocker.patch.object(cli, "settings")
    settings.configured = True
    cli.configure()
    settings.configure.assert_not_called()


def test_configure_respects_settings_module(mocker, monkeypatch):
    monkeypatch.setenv("DJANGO_SETTINGS_MODULE", "tests.settings")
    settings = mocker.patch.object(cli, "settings")
    settings.configured = False
    cli.configure()
    settings.configure.assert_not_called()


def test_configure_standalone(mocker, monkeypatch):
    monkeypatch.delenv("DJANGO_SETTINGS_MODULE", raising=False)
    settings = mocker.patch.object(cli, "settings")
    settings.configured = False
    cli.configure()
    kwargs = settings.configure.call_args.kwargs
    assert kwargs["INSTALLED_APPS"] == ["cmdp_toolkit"]
    assert kwargs["LOGGING"] is cli.DEFAULT_LOGGING
    assert kwargs["CMDP_TOOLKIT"] == {}
