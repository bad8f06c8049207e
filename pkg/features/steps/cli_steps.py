"""Behave step definitions for the speedmeter feature."""
import yaml
from behave import given, then, when

from features.steps.sh_run import run

OK_EXIT_CODE = 0


def _speedmeter(context, command):
    return run(
        [context.speedmeter] + command.split(),
        env=context.env,
        cwd=str(context.temp_dir),
    )


@given("I have an empty output directory")
def check_empty_output_dir(context):
    assert not any(context.temp_dir.iterdir())


@given('I have a config file setting "{key}" to "{value}"')
def create_configuration_file(context, key, value):
    """Write `override.yml` with a single nested setting."""
    section, name = key.split(".", 1)
    document = {section: {name: yaml.safe_load(value)}}
    with (context.temp_dir / "override.yml").open("w") as config_file:
        yaml.safe_dump(document, config_file, default_flow_style=False)


@given('I have executed the speedmeter command "{command}"')
def exec_speedmeter_checked(context, command):
    """Execute a speedmeter command that must succeed"""
    res = _speedmeter(context, command)

    if res.returncode != OK_EXIT_CODE:
        print(res.stdout)
        print(res.stderr)
        assert False


@when('I execute the speedmeter command "{command}"')
def exec_speedmeter(context, command):
    """Execute a speedmeter command"""
    context.result = _speedmeter(context, command)


@when('I execute the kedro command "{command}"')
def exec_kedro_target(context, command):
    """Execute a kedro command outside of any project"""
    context.result = run(
        [context.kedro] + command.split(), env=context.env, cwd=str(context.temp_dir)
    )


@then('I should get a message including "{msg}"')
def read_stdout(context, msg):
    """Raise AssertionError if the given message is not in stdout."""
    if msg not in context.result.stdout:
        print(context.result.stdout)
        assert False, "Message '{0}' not found in stdout".format(msg)


@then('Standard error should contain a message including "{msg}"')
def read_stderr(context, msg):
    """Raise AssertionError if the given message is not in stderr."""
    if msg not in context.result.stderr:
        print(context.result.stderr)
        assert False, "Message '{0}' not found in stderr".format(msg)


@then("I should get a successful exit code")
def check_status_code(context):
    if context.result.returncode != OK_EXIT_CODE:
        print(context.result.stdout)
        print(context.result.stderr)
        assert False, "Expected exit code {} but got {}".format(
            OK_EXIT_CODE, context.result.returncode
        )


@then("I should get an error exit code")
def check_failed_status_code(context):
    if context.result.returncode == OK_EXIT_CODE:
        print(context.result.stdout)
        print(context.result.stderr)
        assert False, "Expected exit code other than {} but got {}".format(
            OK_EXIT_CODE, context.result.returncode
        )


@then('A file "{name}" should be created')
def check_file_created(context, name):
    assert (context.temp_dir / name).is_file(), "`{0}` was not created".format(name)


@then('A file "{name}" with header "{header}" should be created')
def check_csv_header(context, name, header):
    path = context.temp_dir / name
    assert path.is_file(), "`{0}` was not created".format(name)
    first_line = path.read_text().splitlines()[0]
    assert first_line == header, "Expected header {0!r}, got {1!r}".format(
        header, first_line
    )
