"""
Wall-clock timing and the key=value result lines the CLI prints.
"""
import logging
import time
from contextlib import contextmanager
from typing import Dict, Iterator

import click

logger = logging.getLogger(__name__)


class Timer:
    """Elapsed wall time of a block, in integer milliseconds."""

    def __init__(self):
        self.started = None
        self.elapsed = 0.0

    def __enter__(self) -> 'Timer':
        self.started = time.perf_counter()
        return self

    def __exit__(self, *exc) -> None:
        self.elapsed = time.perf_counter() - self.started

    @property
    def ms(self) -> int:
        return int(round(self.elapsed * 1000.0))


@contextmanager
def timed(name: str) -> Iterator[Timer]:
    with Timer() as timer:
        yield timer
    logger.debug(f"{name} took {timer.ms} ms")


def format_value(value) -> str:
    if isinstance(value, float):
        return f'{value:.6g}'
    return str(value)


def echo_results(results: Dict[str, object]) -> None:
    """One `key=value` line per entry on stdout."""
    for key, value in results.items():
        click.echo(f'{key}={format_value(value)}')
