"""
Command line: server-side `train`, `pack`, `scalar-train` and client-side
`extract`, `geodesic`, `eigen`, `sample`, `eval`.
"""
import functools
import logging
import sys

import click
import sentry_sdk

from ndf import init_app
from ndf.errors import NdfError

logger = logging.getLogger(__name__)


@click.group('ndf')
@click.option('--config-name', default=None, help='development | testing | production')
@click.option('--seed', type=int, default=None, help='Overrides NDF_SEED.')
@click.pass_context
def cli(ctx, config_name, seed):
    """Neural displacement fields: train, package and mesh non-mesh surfaces."""
    cfg = init_app(config_name)
    ctx.obj = {'config': cfg, 'seed': cfg.NDF_SEED if seed is None else seed, 'seed_override': seed}


def _handled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NdfError as error:
            tag = f'[{error.stage}] ' if error.stage else ''
            logger.error(f"{type(error).__name__}: {error.message}", extra={"payload": error.payload})
            click.echo(f'error: {tag}{error.message}', err=True)
            sys.exit(error.exit_code)
        except (click.ClickException, click.exceptions.Exit, SystemExit):
            raise
        except Exception as error:
            logger.exception(f"Unhandled error: {error}")
            sentry_sdk.capture_exception(error)
            click.echo(f'error: internal: {error}', err=True)
            sys.exit(1)
    return wrapper


def register_error_handlers(group: click.Group) -> None:
    """Map NdfError to its exit code and unexpected exceptions to exit 1."""
    for command in group.commands.values():
        command.callback = _handled(command.callback)


def register_commands(group: click.Group) -> None:
    from ndf.cli.client import eigen_command, eval_command, extract_command, geodesic_command, sample_command
    from ndf.cli.server import pack_command, scalar_train_command, train_command

    for command in (train_command, pack_command, scalar_train_command, extract_command,
                    geodesic_command, eigen_command, sample_command, eval_command):
        group.add_command(command)


register_commands(cli)
register_error_handlers(cli)


def main() -> None:
    cli(prog_name='ndf')
