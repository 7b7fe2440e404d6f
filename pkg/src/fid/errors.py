"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: InputError -> 2, CapExceeded -> 3.
Everything else that escapes is a bug.
"""


class FidError(Exception):
    """Base class for all package errors."""


class InputError(FidError):
    """Malformed user input: bad file, bad formula, bad arguments."""


class CapExceeded(FidError):
    """A configured resource cap (order, node count, game rounds) was hit."""


class FormulaTooLarge(CapExceeded):
    """A synthesized formula would exceed the node-count ceiling."""


class UnsupportedPosition(FidError):
    """The phased Spoiler strategy hit the one-useful-class exception
    on structures of different orders, where its bound may legitimately fail."""
