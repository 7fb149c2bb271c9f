"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or out-of-contract input (bad letters, bad parameters)."""


class ResourceError(RuntimeError):
    """A configured size or iteration cap was exceeded."""


class NumericError(ArithmeticError):
    """A numerical computation left its validity envelope."""


class LogicError(RuntimeError):
    """An internal consistency check failed (a verified precondition was contradicted)."""
