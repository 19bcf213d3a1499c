"""Allow ``python -m skipleak`` as an alternative to the console script."""

from .cli import entry

entry()
