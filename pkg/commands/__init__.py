"""
AutoLC 命令行

The click group registers one command per pipeline stage. Library errors
become exit codes here: 1 usage, 2 data error, 3 numerical failure.
"""

import logging
import sys

import click

from core.config import Config
from core.errors import EXIT_OK, EXIT_USAGE, AutoLCError
from core.log import setup_logging
from .base import CommandResponse
from .constants import PROG_NAME
from .search import decode_command, search_command
from .tools import cost_command, gradcheck_command, synth_data_command
from .train import eval_command, train_command

logger = logging.getLogger(__name__)


class AutoLCGroup(click.Group):
    """Maps AutoLCError to its exit code and click usage errors to 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except AutoLCError as e:
            logger.error(f"[COMMAND_FAILED] {ctx.invoked_subcommand}: {e.message}",
                         extra={'error_code': e.error_code})
            if (ctx.obj or {}).get('json'):
                click.echo(CommandResponse.error(e.message, code=e.exit_code, command=ctx.invoked_subcommand,
                                                 error_details=e.to_dict()['error_details']).to_json())
            else:
                click.echo(f"Error: {e.message}", err=True)
            ctx.exit(e.exit_code)

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            code = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            code = EXIT_USAGE
        except click.Abort:
            click.echo('Aborted!', err=True)
            code = EXIT_USAGE
        code = code if isinstance(code, int) else EXIT_OK
        if standalone_mode:
            sys.exit(code)
        return code


@click.group(cls=AutoLCGroup, name=PROG_NAME)
@click.option('--profile', type=click.Choice(['paper', 'desk', 'testing', 'default']),
              help='Configuration profile (AUTOLC_PROFILE).')
@click.option('--log-level', default=None, help='Logging level (LOG_LEVEL).')
@click.option('--log-file', type=click.Path(dir_okay=False), default=None, help='Rotating log file (LOG_FILE).')
@click.pass_context
def cli(ctx, profile, log_level, log_file):
    """AutoLC: differentiable architecture search for land-cover segmentation."""
    setup_logging(log_level or Config.LOG_LEVEL, log_file or Config.LOG_FILE)
    ctx.ensure_object(dict)
    ctx.obj['profile'] = profile


def register_commands(group: click.Group):
    """注册命令行命令"""
    for command in (search_command, decode_command, train_command, eval_command, cost_command,
                    synth_data_command, gradcheck_command):
        group.add_command(command)
    return group


register_commands(cli)

__all__ = ['cli', 'register_commands', 'AutoLCGroup', 'CommandResponse']
